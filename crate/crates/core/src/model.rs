//! Runnable model assembly: sequential proposal ConvNets and token
//! transformers, built either from seeded random weights or from a
//! weight directory.
//!
//! Random initialization is uniform in [-s, s] with s = 1/sqrt(fan_in),
//! drawn in a fixed parameter order so a seed pins every byte of output.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flops::{ProposalSpec, VitSpec};
use crate::io::weights::WeightMap;
use crate::psm::{ConvFeatureMap, PatchGrid};
use crate::tensor::{conv2d, AttentionBlock, Conv2dLayer, LayerNorm, LinearLayer, Tensor};
use crate::token::TokenBatch;

fn uniform_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>, bound: f32) -> Tensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(dims, data).expect("finite by construction")
}

fn init_linear(rng: &mut ChaCha8Rng, in_f: usize, out_f: usize) -> LinearLayer {
    let bound = 1.0 / (in_f as f32).sqrt();
    let weight = uniform_tensor(rng, vec![out_f, in_f], bound);
    let bias = Tensor::zeros(vec![out_f]).expect("positive extent");
    LinearLayer::new(weight, Some(bias)).expect("shapes consistent")
}

fn init_block(rng: &mut ChaCha8Rng, dim: usize, heads: usize, hidden: usize) -> AttentionBlock {
    AttentionBlock::new(
        dim,
        heads,
        init_linear(rng, dim, 3 * dim),
        init_linear(rng, dim, dim),
        init_linear(rng, dim, hidden),
        init_linear(rng, hidden, dim),
        LayerNorm::identity(dim).expect("positive dim"),
        LayerNorm::identity(dim).expect("positive dim"),
    )
    .expect("shapes consistent")
}

/// Sequential proposal ConvNet: conv -> ReLU chain; the classifier head
/// is never instantiated because region proposals only need the final
/// convolutional features.
#[derive(Debug, Clone)]
pub struct ProposalNet {
    layers: Vec<Conv2dLayer>,
    input_h: usize,
    input_w: usize,
}

impl ProposalNet {
    fn check_runnable(spec: &ProposalSpec) -> Result<()> {
        spec.validate()?;
        if !spec.sequential {
            return Err(Error::InvalidArgument(format!(
                "proposal `{}` is a counting-only description and cannot be run",
                spec.name
            )));
        }
        if spec.layers.iter().any(|l| l.groups != 1) {
            return Err(Error::InvalidArgument(
                "runnable proposals support groups = 1 only".into(),
            ));
        }
        Ok(())
    }

    pub fn seeded(spec: &ProposalSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::check_runnable(spec)?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let fan_in = l.in_c * l.kernel * l.kernel;
            let bound = 1.0 / (fan_in as f32).sqrt();
            let weight = uniform_tensor(rng, vec![l.out_c, l.in_c, l.kernel, l.kernel], bound);
            let bias = Tensor::zeros(vec![l.out_c])?;
            layers.push(Conv2dLayer::new(
                weight,
                Some(bias),
                (l.stride, l.stride),
                (l.padding, l.padding),
            )?);
        }
        Ok(ProposalNet {
            layers,
            input_h: spec.input_h,
            input_w: spec.input_w,
        })
    }

    /// Builds from `<prefix>conv{i}.weight` / `.bias` entries.
    pub fn from_weights(spec: &ProposalSpec, map: &mut WeightMap, prefix: &str) -> Result<Self> {
        Self::check_runnable(spec)?;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, l) in spec.layers.iter().enumerate() {
            let weight = map.take(
                &format!("{prefix}conv{i}.weight"),
                &[l.out_c, l.in_c, l.kernel, l.kernel],
            )?;
            let bias = map.take(&format!("{prefix}conv{i}.bias"), &[l.out_c])?;
            layers.push(Conv2dLayer::new(
                weight,
                Some(bias),
                (l.stride, l.stride),
                (l.padding, l.padding),
            )?);
        }
        Ok(ProposalNet {
            layers,
            input_h: spec.input_h,
            input_w: spec.input_w,
        })
    }

    pub fn export(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}conv{i}.weight"), l.weight()));
            if let Some(b) = l.bias() {
                out.push((format!("{prefix}conv{i}.bias"), b));
            }
        }
        out
    }

    pub fn input_extents(&self) -> (usize, usize) {
        (self.input_h, self.input_w)
    }

    /// Final convolutional activations for one `[3, H, W]` image.
    pub fn features(&self, image: &Tensor) -> Result<ConvFeatureMap> {
        if image.rank() != 3 || image.dims()[1] != self.input_h || image.dims()[2] != self.input_w
        {
            return Err(Error::ShapeMismatch(format!(
                "proposal expects [C, {}, {}], got {:?}",
                self.input_h,
                self.input_w,
                image.dims()
            )));
        }
        let mut x = image.clone();
        for layer in &self.layers {
            let mut y = conv2d(&x, layer)?;
            for v in y.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            x = y;
        }
        ConvFeatureMap::new(x)
    }

    /// Per-frame features for a `[3, T, H, W]` clip, stacked to
    /// `[K, T, h, w]`.
    pub fn video_features(&self, clip: &Tensor) -> Result<ConvFeatureMap> {
        if clip.rank() != 4 || clip.dims()[0] != 3 {
            return Err(Error::ShapeMismatch(format!(
                "video clip must be [3, T, H, W], got {:?}",
                clip.dims()
            )));
        }
        let (t, h, w) = (clip.dims()[1], clip.dims()[2], clip.dims()[3]);
        let mut per_frame: Vec<Tensor> = Vec::with_capacity(t);
        for ft in 0..t {
            let mut frame = vec![0.0f32; 3 * h * w];
            for c in 0..3 {
                for y in 0..h {
                    let src_off = ((c * t + ft) * h + y) * w;
                    let dst_off = (c * h + y) * w;
                    frame[dst_off..dst_off + w]
                        .copy_from_slice(&clip.data()[src_off..src_off + w]);
                }
            }
            let feats = self.features(&Tensor::new(vec![3, h, w], frame)?)?;
            per_frame.push(feats.features().clone());
        }
        let (k, fh, fw) = (
            per_frame[0].dims()[0],
            per_frame[0].dims()[1],
            per_frame[0].dims()[2],
        );
        let mut out = vec![0.0f32; k * t * fh * fw];
        for (ft, feats) in per_frame.iter().enumerate() {
            for c in 0..k {
                let src = &feats.data()[c * fh * fw..(c + 1) * fh * fw];
                let dst_off = (c * t + ft) * fh * fw;
                out[dst_off..dst_off + fh * fw].copy_from_slice(src);
            }
        }
        ConvFeatureMap::new(Tensor::new(vec![k, t, fh, fw], out)?)
    }
}

/// Token transformer: patch embedding, optional class token, positional
/// embeddings, attention blocks and a classifier head.
#[derive(Debug, Clone)]
pub struct VitModel {
    spec: VitSpec,
    patch_embed: LinearLayer,
    pos_embed: Tensor,
    class_token: Option<Tensor>,
    blocks: Vec<AttentionBlock>,
    head: LinearLayer,
}

impl VitModel {
    pub fn seeded(spec: &VitSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        if spec.video.is_some() {
            return Err(Error::InvalidArgument(
                "runnable transformer supports image specs".into(),
            ));
        }
        let dim = spec.dim;
        let n = spec.n_patches();
        let cls = usize::from(spec.class_token);
        let tok_bound = 1.0 / (dim as f32).sqrt();

        let patch_embed = init_linear(rng, spec.patch_in_features(), dim);
        let class_token = spec
            .class_token
            .then(|| uniform_tensor(rng, vec![dim], tok_bound));
        let pos_embed = uniform_tensor(rng, vec![n + cls, dim], tok_bound);
        let blocks = (0..spec.depth)
            .map(|_| init_block(rng, dim, spec.heads, spec.hidden()))
            .collect();
        let head = init_linear(rng, dim, spec.num_classes);
        Ok(VitModel {
            spec: spec.clone(),
            patch_embed,
            pos_embed,
            class_token,
            blocks,
            head,
        })
    }

    pub fn from_weights(spec: &VitSpec, map: &mut WeightMap, prefix: &str) -> Result<Self> {
        spec.validate()?;
        if spec.video.is_some() {
            return Err(Error::InvalidArgument(
                "runnable transformer supports image specs".into(),
            ));
        }
        let dim = spec.dim;
        let hidden = spec.hidden();
        let n = spec.n_patches();
        let cls = usize::from(spec.class_token);

        let take_linear = |map: &mut WeightMap, name: &str, in_f: usize, out_f: usize| {
            let weight = map.take(&format!("{prefix}{name}.weight"), &[out_f, in_f])?;
            let bias = map.take(&format!("{prefix}{name}.bias"), &[out_f])?;
            LinearLayer::new(weight, Some(bias))
        };
        let take_norm = |map: &mut WeightMap, name: &str| {
            let scale = map.take(&format!("{prefix}{name}.scale"), &[dim])?;
            let shift = map.take(&format!("{prefix}{name}.shift"), &[dim])?;
            LayerNorm::new(scale, shift)
        };

        let patch_embed = take_linear(map, "patch_embed", spec.patch_in_features(), dim)?;
        let class_token = if spec.class_token {
            Some(map.take(&format!("{prefix}class_token"), &[dim])?)
        } else {
            None
        };
        let pos_embed = map.take(&format!("{prefix}pos_embed"), &[n + cls, dim])?;
        let mut blocks = Vec::with_capacity(spec.depth);
        for i in 0..spec.depth {
            let b = format!("blocks.{i}.");
            blocks.push(AttentionBlock::new(
                dim,
                spec.heads,
                take_linear(map, &format!("{b}qkv"), dim, 3 * dim)?,
                take_linear(map, &format!("{b}proj"), dim, dim)?,
                take_linear(map, &format!("{b}mlp_fc1"), dim, hidden)?,
                take_linear(map, &format!("{b}mlp_fc2"), hidden, dim)?,
                take_norm(map, &format!("{b}norm1"))?,
                take_norm(map, &format!("{b}norm2"))?,
            )?);
        }
        let head = take_linear(map, "head", dim, spec.num_classes)?;
        Ok(VitModel {
            spec: spec.clone(),
            patch_embed,
            pos_embed,
            class_token,
            blocks,
            head,
        })
    }

    pub fn spec(&self) -> &VitSpec {
        &self.spec
    }

    pub fn blocks(&self) -> &[AttentionBlock] {
        &self.blocks
    }

    pub fn head(&self) -> &LinearLayer {
        &self.head
    }

    pub fn grid(&self) -> PatchGrid {
        let (gh, gw) = self.spec.grid_hw();
        PatchGrid::Image { h: gh, w: gw }
    }

    /// Extracts patch tokens from a `[3, H, W]` image, prepends the class
    /// token when configured, and adds positional embeddings. Pruning, if
    /// any, happens after this step.
    pub fn tokenize(&self, image: &Tensor) -> Result<TokenBatch> {
        if image.rank() != 3
            || image.dims()[0] != 3
            || image.dims()[1] != self.spec.input_h
            || image.dims()[2] != self.spec.input_w
        {
            return Err(Error::ShapeMismatch(format!(
                "backbone expects [3, {}, {}], got {:?}",
                self.spec.input_h,
                self.spec.input_w,
                image.dims()
            )));
        }
        let k = self.spec.patch_size;
        let (gh, gw) = self.spec.grid_hw();
        let (h, w) = (self.spec.input_h, self.spec.input_w);
        let n = gh * gw;
        let in_f = self.spec.patch_in_features();

        // Row-major patch order; within a patch: channel, then rows.
        let mut patches = vec![0.0f32; n * in_f];
        for py in 0..gh {
            for px in 0..gw {
                let dst = &mut patches[(py * gw + px) * in_f..(py * gw + px + 1) * in_f];
                let mut o = 0;
                for c in 0..3 {
                    for dy in 0..k {
                        let y = py * k + dy;
                        for dx in 0..k {
                            dst[o] = image.data()[(c * h + y) * w + px * k + dx];
                            o += 1;
                        }
                    }
                }
            }
        }
        let embedded = crate::tensor::linear(
            &Tensor::new(vec![n, in_f], patches)?,
            &self.patch_embed,
        )?;

        let dim = self.spec.dim;
        let cls = usize::from(self.spec.class_token);
        let total = n + cls;
        let mut tokens = vec![0.0f32; total * dim];
        if let Some(ct) = &self.class_token {
            tokens[..dim].copy_from_slice(ct.data());
        }
        tokens[cls * dim..].copy_from_slice(embedded.data());
        for (slot, pos) in tokens.iter_mut().zip(self.pos_embed.data()) {
            *slot += pos;
        }
        TokenBatch::new(
            Tensor::new(vec![1, total, dim], tokens)?,
            self.spec.class_token,
            self.grid(),
        )
    }

    pub fn export(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        fn push_linear<'a>(out: &mut Vec<(String, &'a Tensor)>, name: String, l: &'a LinearLayer) {
            out.push((format!("{name}.weight"), l.weight()));
            if let Some(b) = l.bias() {
                out.push((format!("{name}.bias"), b));
            }
        }
        let mut out = Vec::new();
        push_linear(&mut out, format!("{prefix}patch_embed"), &self.patch_embed);
        if let Some(ct) = &self.class_token {
            out.push((format!("{prefix}class_token"), ct));
        }
        out.push((format!("{prefix}pos_embed"), &self.pos_embed));
        for (i, b) in self.blocks.iter().enumerate() {
            let base = format!("{prefix}blocks.{i}.");
            push_linear(&mut out, format!("{base}qkv"), b.qkv());
            push_linear(&mut out, format!("{base}proj"), b.proj());
            push_linear(&mut out, format!("{base}mlp_fc1"), b.mlp_fc1());
            push_linear(&mut out, format!("{base}mlp_fc2"), b.mlp_fc2());
            out.push((format!("{base}norm1.scale"), b.norm1().scale()));
            out.push((format!("{base}norm1.shift"), b.norm1().shift()));
            out.push((format!("{base}norm2.scale"), b.norm2().scale()));
            out.push((format!("{base}norm2.shift"), b.norm2().shift()));
        }
        push_linear(&mut out, format!("{prefix}head"), &self.head);
        out
    }
}

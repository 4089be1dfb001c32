//! Analytical multiply-accumulate accounting for baseline and pruned
//! model configurations.
//!
//! Counts follow the convention of the common model profilers: one MAC
//! per multiply-add, normalization/softmax/activation costs excluded,
//! biases excluded. Published "GFLOPs" figures for these architectures
//! are giga-MACs under that convention, so `gmacs_*` is the number to
//! compare against them; `gflops_*` reports the strict 2x-MAC count.

use crate::error::{Error, Result};
use crate::psm::keep_count;

/// Architecture family of a countable model description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    TokenVit,
    Hierarchical,
    ProposalConv,
}

/// Token-based transformer geometry (images, and videos when `video` is set).
#[derive(Debug, Clone, PartialEq)]
pub struct VitSpec {
    pub depth: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_ratio: f64,
    pub patch_size: usize,
    pub input_h: usize,
    pub input_w: usize,
    pub class_token: bool,
    pub num_classes: usize,
    pub video: Option<VideoGeometry>,
}

/// Frame count and tubelet (temporal patch) size for video transformers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoGeometry {
    pub frames: usize,
    pub tubelet: usize,
}

impl VitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0
            || self.dim == 0
            || self.heads == 0
            || self.patch_size == 0
            || self.input_h == 0
            || self.input_w == 0
            || self.num_classes == 0
        {
            return Err(Error::InvalidArgument(
                "vit spec fields must be positive".into(),
            ));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::InvalidArgument(format!(
                "dim {} must be divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if !self.input_h.is_multiple_of(self.patch_size) || !self.input_w.is_multiple_of(self.patch_size) {
            return Err(Error::InvalidArgument(format!(
                "input {}x{} must be divisible by patch size {}",
                self.input_h, self.input_w, self.patch_size
            )));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(Error::InvalidArgument("mlp ratio must be positive".into()));
        }
        if let Some(v) = self.video {
            if v.frames == 0 || v.tubelet == 0 || v.frames % v.tubelet != 0 {
                return Err(Error::InvalidArgument(format!(
                    "{} frames must be divisible by tubelet {}",
                    v.frames, v.tubelet
                )));
            }
        }
        Ok(())
    }

    pub fn grid_hw(&self) -> (usize, usize) {
        (
            self.input_h / self.patch_size,
            self.input_w / self.patch_size,
        )
    }

    /// Patch-token count (class token excluded).
    pub fn n_patches(&self) -> usize {
        let (gh, gw) = self.grid_hw();
        let gt = self.video.map(|v| v.frames / v.tubelet).unwrap_or(1);
        gt * gh * gw
    }

    pub fn hidden(&self) -> usize {
        (self.mlp_ratio * self.dim as f64).round() as usize
    }

    /// Input features of the patch embedding: all pixels in one patch.
    pub fn patch_in_features(&self) -> usize {
        let t = self.video.map(|v| v.tubelet).unwrap_or(1);
        3 * t * self.patch_size * self.patch_size
    }
}

/// Block flavor of a hierarchical stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HierKind {
    /// Depthwise k x k spatial operator + two pointwise pixel operators.
    ConvNextLike { dw_kernel: usize },
    /// Windowed attention spatial operator + MLP pixel operators.
    SwinLike { window: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierStage {
    pub blocks: usize,
    pub dim: usize,
}

/// Hierarchical backbone geometry. Resolution starts at
/// `input / stem_stride` and halves between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct HierSpec {
    pub kind: HierKind,
    pub stages: Vec<HierStage>,
    pub mlp_ratio: f64,
    pub stem_stride: usize,
    pub input_h: usize,
    pub input_w: usize,
    pub num_classes: usize,
}

impl HierSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidArgument("hier spec needs stages".into()));
        }
        if self.stem_stride == 0 || self.input_h == 0 || self.input_w == 0 || self.num_classes == 0
        {
            return Err(Error::InvalidArgument(
                "hier spec fields must be positive".into(),
            ));
        }
        if !self.input_h.is_multiple_of(self.stem_stride) || !self.input_w.is_multiple_of(self.stem_stride) {
            return Err(Error::InvalidArgument(
                "input must be divisible by the stem stride".into(),
            ));
        }
        let mut h = self.input_h / self.stem_stride;
        let mut w = self.input_w / self.stem_stride;
        for (i, s) in self.stages.iter().enumerate() {
            if s.blocks == 0 || s.dim == 0 {
                return Err(Error::InvalidArgument(
                    "stage blocks and dim must be positive".into(),
                ));
            }
            if i > 0 {
                if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
                    return Err(Error::InvalidArgument(format!(
                        "stage {i} resolution {h}x{w} is not divisible for downsampling"
                    )));
                }
                h /= 2;
                w /= 2;
            }
            if h == 0 || w == 0 {
                return Err(Error::InvalidArgument("stage resolution vanished".into()));
            }
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(Error::InvalidArgument("mlp ratio must be positive".into()));
        }
        Ok(())
    }

    /// Feature resolution at each stage.
    pub fn stage_resolutions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.stages.len());
        let mut h = self.input_h / self.stem_stride;
        let mut w = self.input_w / self.stem_stride;
        for i in 0..self.stages.len() {
            if i > 0 {
                h /= 2;
                w /= 2;
            }
            out.push((h, w));
        }
        out
    }
}

/// One counted convolution with its full geometry spelled out, so branchy
/// architectures can be described as a flat list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub name: String,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvLayerSpec {
    pub fn out_extents(&self) -> (usize, usize) {
        (
            (self.in_h + 2 * self.padding - self.kernel) / self.stride + 1,
            (self.in_w + 2 * self.padding - self.kernel) / self.stride + 1,
        )
    }

    pub fn macs(&self) -> u64 {
        let (oh, ow) = self.out_extents();
        self.out_c as u64
            * oh as u64
            * ow as u64
            * (self.in_c / self.groups) as u64
            * (self.kernel * self.kernel) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_c == 0
            || self.out_c == 0
            || self.kernel == 0
            || self.stride == 0
            || self.groups == 0
            || self.in_h == 0
            || self.in_w == 0
        {
            return Err(Error::InvalidArgument(format!(
                "conv layer {} fields must be positive",
                self.name
            )));
        }
        if !self.in_c.is_multiple_of(self.groups) || !self.out_c.is_multiple_of(self.groups) {
            return Err(Error::InvalidArgument(format!(
                "conv layer {}: groups {} must divide channels {}/{}",
                self.name, self.groups, self.in_c, self.out_c
            )));
        }
        if self.in_h + 2 * self.padding < self.kernel || self.in_w + 2 * self.padding < self.kernel
        {
            return Err(Error::InvalidArgument(format!(
                "conv layer {}: kernel does not fit input",
                self.name
            )));
        }
        Ok(())
    }
}

/// Proposal ConvNet description: counted layers plus an optional FC head.
///
/// `sequential` marks stacks whose layer list, applied in order, is the
/// whole network; only those can be instantiated and run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    pub name: String,
    pub input_h: usize,
    pub input_w: usize,
    pub layers: Vec<ConvLayerSpec>,
    pub fc: Option<(usize, usize)>,
    pub sequential: bool,
}

impl ProposalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument(
                "proposal spec needs at least one conv layer".into(),
            ));
        }
        for l in &self.layers {
            l.validate()?;
        }
        if self.sequential {
            let mut c = self.layers[0].in_c;
            let mut h = self.input_h;
            let mut w = self.input_w;
            for l in &self.layers {
                if l.in_c != c || l.in_h != h || l.in_w != w {
                    return Err(Error::InvalidArgument(format!(
                        "layer {} does not chain sequentially", l.name
                    )));
                }
                let (oh, ow) = l.out_extents();
                c = l.out_c;
                h = oh;
                w = ow;
            }
        }
        Ok(())
    }

    /// Channel count and spatial extents of the final feature map.
    pub fn out_feature_extents(&self) -> (usize, usize, usize) {
        let last = self.layers.last().expect("validated non-empty");
        let (h, w) = last.out_extents();
        (last.out_c, h, w)
    }
}

/// A model description the config layer can load and the counters accept.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    TokenVit(VitSpec),
    Hierarchical(HierSpec),
    ProposalConv(ProposalSpec),
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::TokenVit(_) => Family::TokenVit,
            ModelSpec::Hierarchical(_) => Family::Hierarchical,
            ModelSpec::ProposalConv(_) => Family::ProposalConv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::TokenVit(s) => s.validate(),
            ModelSpec::Hierarchical(s) => s.validate(),
            ModelSpec::ProposalConv(s) => s.validate(),
        }
    }
}

/// Per-layer MAC ledger entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    pub name: String,
    pub macs_base: u64,
    pub macs_pruned: u64,
    /// True for per-location affine operators that pruning scales down.
    pub pixel_op: bool,
}

/// Baseline-vs-pruned multiply-accumulate ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub model: String,
    pub keep_ratio: f64,
    pub tokens_base: usize,
    pub tokens_pruned: usize,
    pub entries: Vec<LayerCost>,
}

impl FlopReport {
    pub fn total_base(&self) -> u64 {
        self.entries.iter().map(|e| e.macs_base).sum()
    }

    pub fn total_pruned(&self) -> u64 {
        self.entries.iter().map(|e| e.macs_pruned).sum()
    }

    pub fn gmacs_base(&self) -> f64 {
        self.total_base() as f64 / 1e9
    }

    pub fn gmacs_pruned(&self) -> f64 {
        self.total_pruned() as f64 / 1e9
    }

    pub fn gflops_base(&self) -> f64 {
        2.0 * self.gmacs_base()
    }

    pub fn gflops_pruned(&self) -> f64 {
        2.0 * self.gmacs_pruned()
    }

    /// Pruned-to-baseline MAC ratio in [0, 1].
    pub fn reduction_ratio(&self) -> f64 {
        self.total_pruned() as f64 / self.total_base() as f64
    }

    /// Share of baseline MACs spent in pixel operators.
    pub fn pixel_share_base(&self) -> f64 {
        let pixel: u64 = self
            .entries
            .iter()
            .filter(|e| e.pixel_op)
            .map(|e| e.macs_base)
            .sum();
        pixel as f64 / self.total_base() as f64
    }

    fn sum_prefix(&self, prefix: &str) -> (u64, u64) {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .fold((0, 0), |(b, p), e| (b + e.macs_base, p + e.macs_pruned))
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let name_w = self
            .entries
            .iter()
            .map(|e| e.name.len())
            .chain(["layer".len(), "total".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        out.push_str(&format!(
            "model {}  z {:.4}  tokens {} -> {}\n",
            self.model, self.keep_ratio, self.tokens_base, self.tokens_pruned
        ));
        out.push_str(&format!(
            "{:<name_w$}  {:>16}  {:>16}\n",
            "layer", "base MACs", "pruned MACs"
        ));
        for e in &self.entries {
            out.push_str(&format!(
                "{:<name_w$}  {:>16}  {:>16}\n",
                e.name, e.macs_base, e.macs_pruned
            ));
        }
        out.push_str(&format!(
            "{:<name_w$}  {:>16}  {:>16}\n",
            "total",
            self.total_base(),
            self.total_pruned()
        ));
        out.push_str(&format!(
            "GMACs {:.4} -> {:.4}  (GFLOPs {:.4} -> {:.4})  reduction {:.4}\n",
            self.gmacs_base(),
            self.gmacs_pruned(),
            self.gflops_base(),
            self.gflops_pruned(),
            self.reduction_ratio()
        ));
        out
    }

    /// Line-oriented `key=value` records for machine diffing.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model={}\n", self.model));
        out.push_str(&format!("z={:.6}\n", self.keep_ratio));
        out.push_str(&format!("tokens_base={}\n", self.tokens_base));
        out.push_str(&format!("tokens_pruned={}\n", self.tokens_pruned));
        for e in &self.entries {
            out.push_str(&format!("layer.{}.base={}\n", e.name, e.macs_base));
            out.push_str(&format!("layer.{}.pruned={}\n", e.name, e.macs_pruned));
        }
        let (bb, bp) = self.sum_prefix("block");
        if bb > 0 {
            out.push_str(&format!("blocks.base={bb}\n"));
            out.push_str(&format!("blocks.pruned={bp}\n"));
        }
        out.push_str(&format!("total.base={}\n", self.total_base()));
        out.push_str(&format!("total.pruned={}\n", self.total_pruned()));
        out.push_str(&format!("gmacs.base={:.6}\n", self.gmacs_base()));
        out.push_str(&format!("gmacs.pruned={:.6}\n", self.gmacs_pruned()));
        out.push_str(&format!("gflops.base={:.6}\n", self.gflops_base()));
        out.push_str(&format!("gflops.pruned={:.6}\n", self.gflops_pruned()));
        out.push_str(&format!("reduction={:.6}\n", self.reduction_ratio()));
        out.push_str(&format!("pixel_share={:.6}\n", self.pixel_share_base()));
        out
    }
}

fn validate_ratio(z: f64) -> Result<()> {
    if z.is_finite() && z > 0.0 && z <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "keep ratio must be in (0, 1], got {z}"
        )))
    }
}

// Shared per-block transformer accounting over base/pruned sequence lengths.
fn push_vit_blocks(
    entries: &mut Vec<LayerCost>,
    depth: usize,
    dim: u64,
    hidden: u64,
    n_base: u64,
    n_pruned: u64,
) {
    for i in 0..depth {
        let tag = |part: &str| format!("block{i:02}.{part}");
        entries.push(LayerCost {
            name: tag("qkv"),
            macs_base: n_base * dim * 3 * dim,
            macs_pruned: n_pruned * dim * 3 * dim,
            pixel_op: true,
        });
        entries.push(LayerCost {
            name: tag("attn_scores"),
            macs_base: n_base * n_base * dim,
            macs_pruned: n_pruned * n_pruned * dim,
            pixel_op: false,
        });
        entries.push(LayerCost {
            name: tag("attn_apply"),
            macs_base: n_base * n_base * dim,
            macs_pruned: n_pruned * n_pruned * dim,
            pixel_op: false,
        });
        entries.push(LayerCost {
            name: tag("proj"),
            macs_base: n_base * dim * dim,
            macs_pruned: n_pruned * dim * dim,
            pixel_op: true,
        });
        entries.push(LayerCost {
            name: tag("mlp_fc1"),
            macs_base: n_base * dim * hidden,
            macs_pruned: n_pruned * dim * hidden,
            pixel_op: true,
        });
        entries.push(LayerCost {
            name: tag("mlp_fc2"),
            macs_base: n_base * hidden * dim,
            macs_pruned: n_pruned * hidden * dim,
            pixel_op: true,
        });
    }
}

fn count_vit_inner(spec: &VitSpec, z: f64, model: String) -> Result<FlopReport> {
    spec.validate()?;
    validate_ratio(z)?;
    let n = spec.n_patches();
    let cls = usize::from(spec.class_token);
    let kept = keep_count(z, n);
    let n_base = (n + cls) as u64;
    let n_pruned = (kept + cls) as u64;
    let dim = spec.dim as u64;
    let hidden = spec.hidden() as u64;

    let mut entries = Vec::new();
    // Patch embedding runs dense: pruning happens after extraction.
    let embed = n as u64 * dim * spec.patch_in_features() as u64;
    entries.push(LayerCost {
        name: "patch_embed".into(),
        macs_base: embed,
        macs_pruned: embed,
        pixel_op: false,
    });
    push_vit_blocks(&mut entries, spec.depth, dim, hidden, n_base, n_pruned);
    let head = dim * spec.num_classes as u64;
    entries.push(LayerCost {
        name: "head".into(),
        macs_base: head,
        macs_pruned: head,
        pixel_op: false,
    });

    Ok(FlopReport {
        model,
        keep_ratio: z,
        tokens_base: n + cls,
        tokens_pruned: kept + cls,
        entries,
    })
}

/// MAC ledger for a token transformer on images.
pub fn count_vit(spec: &VitSpec, z: f64) -> Result<FlopReport> {
    if spec.video.is_some() {
        return Err(Error::InvalidArgument(
            "spec has video geometry; use count_video_vit".into(),
        ));
    }
    count_vit_inner(spec, z, "token-vit".into())
}

/// MAC ledger for a token transformer on video clips; tokens come from
/// the tubelet/patch geometry.
pub fn count_video_vit(spec: &VitSpec, z: f64) -> Result<FlopReport> {
    if spec.video.is_none() {
        return Err(Error::InvalidArgument(
            "spec has no video geometry; use count_vit".into(),
        ));
    }
    count_vit_inner(spec, z, "token-vit-video".into())
}

/// MAC ledger for a hierarchical backbone. Pixel-operator entries scale
/// with the per-stage keep count; spatial/window operators stay dense.
pub fn count_hier(spec: &HierSpec, z: f64) -> Result<FlopReport> {
    spec.validate()?;
    validate_ratio(z)?;
    let resolutions = spec.stage_resolutions();
    let mut entries = Vec::new();

    let stem_dim = spec.stages[0].dim as u64;
    let (r0h, r0w) = resolutions[0];
    entries.push(LayerCost {
        name: "stem".into(),
        macs_base: stem_dim
            * (r0h * r0w) as u64
            * 3
            * (spec.stem_stride * spec.stem_stride) as u64,
        macs_pruned: stem_dim
            * (r0h * r0w) as u64
            * 3
            * (spec.stem_stride * spec.stem_stride) as u64,
        pixel_op: false,
    });

    for (si, stage) in spec.stages.iter().enumerate() {
        let (h, w) = resolutions[si];
        let cells = (h * w) as u64;
        let kept = keep_count(z, h * w) as u64;
        let dim = stage.dim as u64;
        let hidden = (spec.mlp_ratio * stage.dim as f64).round() as u64;
        // Pruned pixel-operator cost: same per-cell cost, kept cells only.
        let scale = |macs: u64| -> u64 { macs / cells * kept };

        if si > 0 {
            let prev = spec.stages[si - 1].dim as u64;
            // Strided 2x2 window that fuses four cells into one; runs dense.
            let down = dim * cells * prev * 4;
            entries.push(LayerCost {
                name: format!("stage{si}.down"),
                macs_base: down,
                macs_pruned: down,
                pixel_op: false,
            });
        }

        for bi in 0..stage.blocks {
            let tag = |part: &str| format!("stage{si}.block{bi:02}.{part}");
            match spec.kind {
                HierKind::ConvNextLike { dw_kernel } => {
                    let dw = dim * cells * (dw_kernel * dw_kernel) as u64;
                    entries.push(LayerCost {
                        name: tag("dw"),
                        macs_base: dw,
                        macs_pruned: dw,
                        pixel_op: false,
                    });
                    let pw1 = cells * dim * hidden;
                    entries.push(LayerCost {
                        name: tag("pw1"),
                        macs_base: pw1,
                        macs_pruned: scale(pw1),
                        pixel_op: true,
                    });
                    let pw2 = cells * hidden * dim;
                    entries.push(LayerCost {
                        name: tag("pw2"),
                        macs_base: pw2,
                        macs_pruned: scale(pw2),
                        pixel_op: true,
                    });
                }
                HierKind::SwinLike { window } => {
                    // The windowed-attention module (qkv, scores, apply,
                    // proj) is inseparable from its spatial mixing, so the
                    // whole module counts as the window operator and runs
                    // dense; the MLP is the prunable pixel operator.
                    let qkv = cells * dim * 3 * dim;
                    entries.push(LayerCost {
                        name: tag("qkv"),
                        macs_base: qkv,
                        macs_pruned: qkv,
                        pixel_op: false,
                    });
                    let attn = 2 * cells * (window * window) as u64 * dim;
                    entries.push(LayerCost {
                        name: tag("attn"),
                        macs_base: attn,
                        macs_pruned: attn,
                        pixel_op: false,
                    });
                    let proj = cells * dim * dim;
                    entries.push(LayerCost {
                        name: tag("proj"),
                        macs_base: proj,
                        macs_pruned: proj,
                        pixel_op: false,
                    });
                    let fc1 = cells * dim * hidden;
                    entries.push(LayerCost {
                        name: tag("mlp_fc1"),
                        macs_base: fc1,
                        macs_pruned: scale(fc1),
                        pixel_op: true,
                    });
                    let fc2 = cells * hidden * dim;
                    entries.push(LayerCost {
                        name: tag("mlp_fc2"),
                        macs_base: fc2,
                        macs_pruned: scale(fc2),
                        pixel_op: true,
                    });
                }
            }
        }
    }

    let last_dim = spec.stages.last().unwrap().dim as u64;
    let head = last_dim * spec.num_classes as u64;
    entries.push(LayerCost {
        name: "head".into(),
        macs_base: head,
        macs_pruned: head,
        pixel_op: false,
    });

    let (h0, w0) = resolutions[0];
    Ok(FlopReport {
        model: "hierarchical".into(),
        keep_ratio: z,
        tokens_base: h0 * w0,
        tokens_pruned: keep_count(z, h0 * w0),
        entries,
    })
}

/// MAC ledger for a proposal ConvNet; the proposal always runs dense, so
/// pruned equals baseline.
pub fn count_proposal(spec: &ProposalSpec) -> Result<FlopReport> {
    spec.validate()?;
    let mut entries: Vec<LayerCost> = spec
        .layers
        .iter()
        .map(|l| LayerCost {
            name: l.name.clone(),
            macs_base: l.macs(),
            macs_pruned: l.macs(),
            pixel_op: l.kernel == 1 && l.groups == 1,
        })
        .collect();
    if let Some((inf, outf)) = spec.fc {
        entries.push(LayerCost {
            name: "fc".into(),
            macs_base: (inf * outf) as u64,
            macs_pruned: (inf * outf) as u64,
            pixel_op: false,
        });
    }
    let (_, fh, fw) = spec.out_feature_extents();
    Ok(FlopReport {
        model: spec.name.clone(),
        keep_ratio: 1.0,
        tokens_base: fh * fw,
        tokens_pruned: fh * fw,
        entries,
    })
}

// ---------------------------------------------------------------------
// Presets for the architectures whose published costs anchor the counters.
// ---------------------------------------------------------------------

fn vit_preset(depth: usize, dim: usize, heads: usize, patch: usize) -> VitSpec {
    VitSpec {
        depth,
        dim,
        heads,
        mlp_ratio: 4.0,
        patch_size: patch,
        input_h: 224,
        input_w: 224,
        class_token: true,
        num_classes: 1000,
        video: None,
    }
}

fn vit_video_preset(depth: usize, dim: usize, heads: usize) -> VitSpec {
    VitSpec {
        depth,
        dim,
        heads,
        mlp_ratio: 4.0,
        patch_size: 16,
        input_h: 224,
        input_w: 224,
        // Mean-pooled readout; these video models drop the class token.
        class_token: false,
        num_classes: 400,
        video: Some(VideoGeometry {
            frames: 16,
            tubelet: 2,
        }),
    }
}

fn hier_preset(kind: HierKind, depths: [usize; 4], dims: [usize; 4]) -> HierSpec {
    HierSpec {
        kind,
        stages: depths
            .iter()
            .zip(dims.iter())
            .map(|(&blocks, &dim)| HierStage { blocks, dim })
            .collect(),
        mlp_ratio: 4.0,
        stem_stride: 4,
        input_h: 224,
        input_w: 224,
        num_classes: 1000,
    }
}

struct ConvWalk {
    layers: Vec<ConvLayerSpec>,
    c: usize,
    h: usize,
    w: usize,
}

impl ConvWalk {
    fn new(in_c: usize, h: usize, w: usize) -> Self {
        ConvWalk {
            layers: Vec::new(),
            c: in_c,
            h,
            w,
        }
    }

    // Main-path conv: advances tracked channels/resolution.
    fn conv(&mut self, name: String, out_c: usize, k: usize, s: usize, p: usize, groups: usize) {
        let l = ConvLayerSpec {
            name,
            in_c: self.c,
            out_c,
            kernel: k,
            stride: s,
            padding: p,
            groups,
            in_h: self.h,
            in_w: self.w,
        };
        let (oh, ow) = l.out_extents();
        self.c = out_c;
        self.h = oh;
        self.w = ow;
        self.layers.push(l);
    }

    // Side-branch conv (residual downsample): counted, state untouched.
    fn branch(&mut self, name: String, in_c: usize, out_c: usize, k: usize, s: usize) {
        self.layers.push(ConvLayerSpec {
            name,
            in_c,
            out_c,
            kernel: k,
            stride: s,
            padding: 0,
            groups: 1,
            in_h: self.h,
            in_w: self.w,
        });
    }

    fn pool(&mut self, k: usize, s: usize, p: usize) {
        self.h = (self.h + 2 * p - k) / s + 1;
        self.w = (self.w + 2 * p - k) / s + 1;
    }
}

fn resnet(name: &str, blocks: [usize; 4], bottleneck: bool) -> ProposalSpec {
    let mut walk = ConvWalk::new(3, 224, 224);
    walk.conv("conv1".into(), 64, 7, 2, 3, 1);
    walk.pool(3, 2, 1);
    let planes = [64usize, 128, 256, 512];
    for (si, (&n, &p)) in blocks.iter().zip(planes.iter()).enumerate() {
        for bi in 0..n {
            let stride = if si > 0 && bi == 0 { 2 } else { 1 };
            let tag = |part: &str| format!("layer{}.{bi}.{part}", si + 1);
            let in_c = walk.c;
            if bottleneck {
                let out_c = 4 * p;
                walk.conv(tag("conv1"), p, 1, 1, 0, 1);
                walk.conv(tag("conv2"), p, 3, stride, 1, 1);
                walk.conv(tag("conv3"), out_c, 1, 1, 0, 1);
                if bi == 0 && (stride != 1 || in_c != out_c) {
                    walk.branch(tag("downsample"), in_c, out_c, 1, 1);
                }
            } else {
                walk.conv(tag("conv1"), p, 3, stride, 1, 1);
                walk.conv(tag("conv2"), p, 3, 1, 1, 1);
                if bi == 0 && (stride != 1 || in_c != p) {
                    walk.branch(tag("downsample"), in_c, p, 1, 1);
                }
            }
        }
    }
    ProposalSpec {
        name: name.into(),
        input_h: 224,
        input_w: 224,
        fc: Some((walk.c, 1000)),
        layers: walk.layers,
        sequential: false,
    }
}

// Inference-time (re-parameterized) form: a stem conv followed by
// depthwise + pointwise pairs.
fn mobileone_s0() -> ProposalSpec {
    let mut walk = ConvWalk::new(3, 224, 224);
    walk.conv("stem".into(), 48, 3, 2, 1, 1);
    let stages: [(usize, usize); 4] = [(2, 48), (8, 128), (10, 256), (1, 1024)];
    for (si, &(blocks, out_c)) in stages.iter().enumerate() {
        for bi in 0..blocks {
            let stride = if bi == 0 { 2 } else { 1 };
            let dw_c = walk.c;
            walk.conv(format!("stage{si}.{bi}.dw"), dw_c, 3, stride, 1, dw_c);
            walk.conv(format!("stage{si}.{bi}.pw"), out_c, 1, 1, 0, 1);
        }
    }
    ProposalSpec {
        name: "mobileone-s0".into(),
        input_h: 224,
        input_w: 224,
        fc: Some((walk.c, 1000)),
        layers: walk.layers,
        sequential: true,
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "vit-s-16",
    "vit-b-16",
    "vit-l-16",
    "vit-h-14",
    "vit-b-video",
    "vit-l-video",
    "convnext-base",
    "swin-base",
    "resnet18",
    "resnet50",
    "resnet152",
    "mobileone-s0",
];

/// Built-in model descriptions by name.
pub fn preset(name: &str) -> Option<ModelSpec> {
    let spec = match name {
        "vit-s-16" => ModelSpec::TokenVit(vit_preset(12, 384, 6, 16)),
        "vit-b-16" => ModelSpec::TokenVit(vit_preset(12, 768, 12, 16)),
        "vit-l-16" => ModelSpec::TokenVit(vit_preset(24, 1024, 16, 16)),
        "vit-h-14" => ModelSpec::TokenVit(vit_preset(32, 1280, 16, 14)),
        "vit-b-video" => ModelSpec::TokenVit(vit_video_preset(12, 768, 12)),
        "vit-l-video" => ModelSpec::TokenVit(vit_video_preset(24, 1024, 16)),
        "convnext-base" => ModelSpec::Hierarchical(hier_preset(
            HierKind::ConvNextLike { dw_kernel: 7 },
            [3, 3, 27, 3],
            [128, 256, 512, 1024],
        )),
        "swin-base" => ModelSpec::Hierarchical(hier_preset(
            HierKind::SwinLike { window: 7 },
            [2, 2, 18, 2],
            [128, 256, 512, 1024],
        )),
        "resnet18" => ModelSpec::ProposalConv(resnet("resnet18", [2, 2, 2, 2], false)),
        "resnet50" => ModelSpec::ProposalConv(resnet("resnet50", [3, 4, 6, 3], true)),
        "resnet152" => ModelSpec::ProposalConv(resnet("resnet152", [3, 8, 36, 3], true)),
        "mobileone-s0" => ModelSpec::ProposalConv(mobileone_s0()),
        _ => return None,
    };
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vit_spec(name: &str) -> VitSpec {
        match preset(name) {
            Some(ModelSpec::TokenVit(s)) => s,
            _ => panic!("not a vit preset: {name}"),
        }
    }

    fn hier_spec(name: &str) -> HierSpec {
        match preset(name) {
            Some(ModelSpec::Hierarchical(s)) => s,
            _ => panic!("not a hier preset: {name}"),
        }
    }

    fn proposal_spec(name: &str) -> ProposalSpec {
        match preset(name) {
            Some(ModelSpec::ProposalConv(s)) => s,
            _ => panic!("not a proposal preset: {name}"),
        }
    }

    fn within(value: f64, target: f64, rel: f64) -> bool {
        (value - target).abs() <= rel * target
    }

    #[test]
    fn vit_baseline_costs_match_published_tables() {
        for &(name, gmacs) in &[
            ("vit-s-16", 4.61),
            ("vit-b-16", 17.59),
            ("vit-l-16", 61.61),
            ("vit-h-14", 167.4),
        ] {
            let report = count_vit(&vit_spec(name), 1.0).unwrap();
            assert!(
                within(report.gmacs_base(), gmacs, 0.03),
                "{name}: got {:.3}, want {gmacs}",
                report.gmacs_base()
            );
            assert_eq!(report.total_base(), report.total_pruned());
        }
    }

    #[test]
    fn vit_pruned_costs_match_published_tables() {
        let b = count_vit(&vit_spec("vit-b-16"), 0.5).unwrap();
        assert!(within(b.gmacs_pruned(), 8.98, 0.05), "{}", b.gmacs_pruned());
        assert_eq!(b.tokens_pruned, 99);
        let l = count_vit(&vit_spec("vit-l-16"), 0.5).unwrap();
        assert!(within(l.gmacs_pruned(), 30.83, 0.05), "{}", l.gmacs_pruned());
    }

    #[test]
    fn video_vit_costs_match_published_table() {
        let spec = vit_spec("vit-l-video");
        let base = count_video_vit(&spec, 1.0).unwrap();
        assert!(within(base.gmacs_base(), 598.0, 0.05), "{}", base.gmacs_base());
        let half = count_video_vit(&spec, 0.5).unwrap();
        assert!(within(half.gmacs_pruned(), 275.0, 0.05), "{}", half.gmacs_pruned());
        let third = count_video_vit(&spec, 0.3).unwrap();
        assert!(within(third.gmacs_pruned(), 160.0, 0.08), "{}", third.gmacs_pruned());

        let b = count_video_vit(&vit_spec("vit-b-video"), 1.0).unwrap();
        assert!(within(b.gmacs_base(), 180.0, 0.05), "{}", b.gmacs_base());
    }

    #[test]
    fn single_token_degenerate_matches_hand_count() {
        // 16x16 input, patch 16 -> one patch token, plus a class token.
        let spec = VitSpec {
            depth: 1,
            dim: 8,
            heads: 2,
            mlp_ratio: 2.0,
            patch_size: 16,
            input_h: 16,
            input_w: 16,
            class_token: true,
            num_classes: 3,
            video: None,
        };
        let r = count_vit(&spec, 1.0).unwrap();
        // Hand-summed straight-line count for N = 2 tokens:
        // embed 1*8*768, qkv 2*8*24, scores 4*8, apply 4*8,
        // proj 2*64, fc1 2*8*16, fc2 2*16*8, head 8*3.
        let want = 8 * 768
            + 2 * 8 * 24
            + 4 * 8
            + 4 * 8
            + 2 * 64
            + 2 * 8 * 16
            + 2 * 16 * 8
            + 8 * 3;
        assert_eq!(r.total_base(), want as u64);
    }

    #[test]
    fn proposal_costs_match_published_tables() {
        for &(name, gmacs) in &[
            ("resnet18", 1.81),
            ("resnet50", 4.09),
            ("resnet152", 11.51),
            ("mobileone-s0", 0.27),
        ] {
            let report = count_proposal(&proposal_spec(name)).unwrap();
            assert!(
                within(report.gmacs_base(), gmacs, 0.05),
                "{name}: got {:.4}, want {gmacs}",
                report.gmacs_base()
            );
        }
        let big = count_proposal(&proposal_spec("resnet152")).unwrap();
        let small = count_proposal(&proposal_spec("mobileone-s0")).unwrap();
        assert!(big.gmacs_base() / small.gmacs_base() >= 40.0);
    }

    #[test]
    fn one_by_one_conv_is_one_mac() {
        let spec = ProposalSpec {
            name: "unit".into(),
            input_h: 1,
            input_w: 1,
            layers: vec![ConvLayerSpec {
                name: "conv".into(),
                in_c: 1,
                out_c: 1,
                kernel: 1,
                stride: 1,
                padding: 0,
                groups: 1,
                in_h: 1,
                in_w: 1,
            }],
            fc: None,
            sequential: true,
        };
        let report = count_proposal(&spec).unwrap();
        assert_eq!(report.total_base(), 1);
    }

    #[test]
    fn hier_pixel_shares_match_published_fractions() {
        let convnext = count_hier(&hier_spec("convnext-base"), 1.0).unwrap();
        assert!(
            (convnext.pixel_share_base() - 0.962).abs() <= 0.05,
            "convnext share {}",
            convnext.pixel_share_base()
        );
        // Baseline totals should also land on the published 15.38.
        assert!(within(convnext.gmacs_base(), 15.38, 0.03), "{}", convnext.gmacs_base());

        let swin = count_hier(&hier_spec("swin-base"), 1.0).unwrap();
        assert!(
            (swin.pixel_share_base() - 0.633).abs() <= 0.05,
            "swin share {}",
            swin.pixel_share_base()
        );
        assert!(within(swin.gmacs_base(), 15.47, 0.03), "{}", swin.gmacs_base());
    }

    #[test]
    fn hier_full_keep_is_exactly_baseline() {
        for name in ["convnext-base", "swin-base"] {
            let r = count_hier(&hier_spec(name), 1.0).unwrap();
            assert_eq!(r.total_base(), r.total_pruned());
        }
    }

    #[test]
    fn hier_pruned_total_tracks_published_convnext_point() {
        // ConvNeXt-B at z = 0.65 is published as 10.42 (with proposal cost
        // folded in); the backbone-only count must be within a few percent.
        let r = count_hier(&hier_spec("convnext-base"), 0.65).unwrap();
        assert!(
            (r.gmacs_pruned() - 10.42).abs() / 10.42 <= 0.05,
            "{}",
            r.gmacs_pruned()
        );
    }

    #[test]
    fn totals_are_monotone_in_keep_ratio() {
        let zs = [0.05, 0.1, 0.3, 0.45, 0.5, 0.62, 0.8, 1.0];
        let vit = vit_spec("vit-b-16");
        let video = vit_spec("vit-l-video");
        let hier = hier_spec("swin-base");
        let mut last_vit = 0u64;
        let mut last_video = 0u64;
        let mut last_hier = 0u64;
        for &z in &zs {
            let a = count_vit(&vit, z).unwrap().total_pruned();
            let b = count_video_vit(&video, z).unwrap().total_pruned();
            let c = count_hier(&hier, z).unwrap().total_pruned();
            assert!(a >= last_vit && b >= last_video && c >= last_hier, "z={z}");
            last_vit = a;
            last_video = b;
            last_hier = c;
        }
    }

    #[test]
    fn token_terms_scale_linearly_and_attention_quadratically() {
        let spec = vit_spec("vit-b-16");
        let mut linear_unit = None;
        let mut quad_unit = None;
        for &z in &[0.25, 0.5, 0.75, 1.0] {
            let r = count_vit(&spec, z).unwrap();
            let n = r.tokens_pruned as u64;
            let qkv = r
                .entries
                .iter()
                .find(|e| e.name == "block00.qkv")
                .unwrap()
                .macs_pruned;
            let scores = r
                .entries
                .iter()
                .find(|e| e.name == "block00.attn_scores")
                .unwrap()
                .macs_pruned;
            assert_eq!(qkv % n, 0);
            assert_eq!(scores % (n * n), 0);
            let lu = qkv / n;
            let qu = scores / (n * n);
            if let Some(prev) = linear_unit {
                assert_eq!(lu, prev, "linear term unit drifts with N'");
            }
            if let Some(prev) = quad_unit {
                assert_eq!(qu, prev, "quadratic term unit drifts with N'");
            }
            linear_unit = Some(lu);
            quad_unit = Some(qu);
        }
    }

    #[test]
    fn per_entry_pruned_never_exceeds_base() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            let report = match &spec {
                ModelSpec::TokenVit(s) if s.video.is_some() => {
                    count_video_vit(s, 0.4).unwrap()
                }
                ModelSpec::TokenVit(s) => count_vit(s, 0.4).unwrap(),
                ModelSpec::Hierarchical(s) => count_hier(s, 0.4).unwrap(),
                ModelSpec::ProposalConv(s) => count_proposal(s).unwrap(),
            };
            for e in &report.entries {
                assert!(e.macs_pruned <= e.macs_base, "{name}: {}", e.name);
            }
        }
    }

    #[test]
    fn invalid_ratios_and_specs_are_rejected() {
        let spec = vit_spec("vit-b-16");
        assert!(count_vit(&spec, 0.0).is_err());
        assert!(count_vit(&spec, 1.5).is_err());
        let mut bad = spec.clone();
        bad.input_h = 223;
        assert!(count_vit(&bad, 0.5).is_err());
        let mut heads = spec;
        heads.heads = 7;
        assert!(count_vit(&heads, 0.5).is_err());
    }

    #[test]
    fn kv_report_has_stable_keys() {
        let r = count_vit(&vit_spec("vit-s-16"), 0.5).unwrap();
        let kv = r.to_kv();
        for key in [
            "model=",
            "z=",
            "tokens_base=",
            "tokens_pruned=",
            "blocks.base=",
            "total.base=",
            "gmacs.base=",
            "gflops.base=",
            "reduction=",
        ] {
            assert!(kv.contains(key), "missing {key}");
        }
        assert_eq!(kv, r.to_kv(), "kv serialization must be deterministic");
    }
}

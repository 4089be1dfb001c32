//! Dense row-major f32 tensors and the layer primitives built on them.
//!
//! Everything here is a pure function with a fixed, documented reduction
//! order, so outputs are bit-reproducible across runs on the same platform.

use crate::error::{Error, Result};

/// Dense N-dimensional value grid, row-major, 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor, checking that `data` has exactly `product(dims)`
    /// finite elements.
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "extents must be positive, got {dims:?}"
            )));
        }
        let numel: usize = dims.iter().product();
        if data.len() != numel {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match extents {:?} ({} elements)",
                data.len(),
                dims,
                numel
            )));
        }
        let t = Tensor { dims, data };
        t.check_finite("tensor construction")?;
        Ok(t)
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "extents must be positive, got {dims:?}"
            )));
        }
        let numel = dims.iter().product();
        Ok(Tensor {
            dims,
            data: vec![0.0; numel],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub(crate) fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }
}

/// Affine map over the last axis: `y = W x + b`, weight stored `[out, in]`.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    weight: Tensor,
    bias: Option<Tensor>,
}

impl LinearLayer {
    pub fn new(weight: Tensor, bias: Option<Tensor>) -> Result<Self> {
        if weight.rank() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "linear weight must be rank 2, got {:?}",
                weight.dims()
            )));
        }
        if let Some(b) = &bias {
            if b.rank() != 1 || b.dims()[0] != weight.dims()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "linear bias {:?} does not match out features {}",
                    b.dims(),
                    weight.dims()[0]
                )));
            }
        }
        Ok(LinearLayer { weight, bias })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        LinearLayer::new(Tensor::new(vec![dim, dim], data)?, None)
    }

    pub fn out_features(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }
}

/// 2-D convolution parameters, weight stored `[outC, inC, kH, kW]`.
#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    weight: Tensor,
    bias: Option<Tensor>,
    stride: (usize, usize),
    padding: (usize, usize),
}

impl Conv2dLayer {
    pub fn new(
        weight: Tensor,
        bias: Option<Tensor>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self> {
        if weight.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv weight must be rank 4, got {:?}",
                weight.dims()
            )));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::InvalidArgument("conv stride must be >= 1".into()));
        }
        if let Some(b) = &bias {
            if b.rank() != 1 || b.dims()[0] != weight.dims()[0] {
                return Err(Error::ShapeMismatch(format!(
                    "conv bias {:?} does not match out channels {}",
                    b.dims(),
                    weight.dims()[0]
                )));
            }
        }
        Ok(Conv2dLayer {
            weight,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.dims()[2], self.weight.dims()[3])
    }

    pub fn stride(&self) -> (usize, usize) {
        self.stride
    }

    pub fn padding(&self) -> (usize, usize) {
        self.padding
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }

    /// Output spatial extents for an `(h, w)` input, erroring when the
    /// kernel does not fit.
    pub fn out_extents(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel();
        let (sy, sx) = self.stride;
        let (py, px) = self.padding;
        if h + 2 * py < kh || w + 2 * px < kw {
            return Err(Error::ShapeMismatch(format!(
                "kernel {kh}x{kw} does not fit {h}x{w} input with padding {py},{px}"
            )));
        }
        Ok(((h + 2 * py - kh) / sy + 1, (w + 2 * px - kw) / sx + 1))
    }
}

/// Layer-norm scale/shift pair over the feature axis.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    scale: Tensor,
    shift: Tensor,
}

impl LayerNorm {
    pub fn new(scale: Tensor, shift: Tensor) -> Result<Self> {
        if scale.rank() != 1 || shift.rank() != 1 || scale.dims() != shift.dims() {
            return Err(Error::ShapeMismatch(format!(
                "layer norm params must be matching rank-1 tensors, got {:?} and {:?}",
                scale.dims(),
                shift.dims()
            )));
        }
        Ok(LayerNorm { scale, shift })
    }

    /// Unit scale, zero shift.
    pub fn identity(dim: usize) -> Result<Self> {
        LayerNorm::new(
            Tensor::new(vec![dim], vec![1.0; dim])?,
            Tensor::new(vec![dim], vec![0.0; dim])?,
        )
    }

    pub fn dim(&self) -> usize {
        self.scale.dims()[0]
    }

    pub fn scale(&self) -> &Tensor {
        &self.scale
    }

    pub fn shift(&self) -> &Tensor {
        &self.shift
    }
}

/// Pre-norm transformer block: LN -> MHA -> residual -> LN -> MLP -> residual.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    dim: usize,
    heads: usize,
    qkv: LinearLayer,
    proj: LinearLayer,
    mlp_fc1: LinearLayer,
    mlp_fc2: LinearLayer,
    norm1: LayerNorm,
    norm2: LayerNorm,
}

impl AttentionBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        heads: usize,
        qkv: LinearLayer,
        proj: LinearLayer,
        mlp_fc1: LinearLayer,
        mlp_fc2: LinearLayer,
        norm1: LayerNorm,
        norm2: LayerNorm,
    ) -> Result<Self> {
        if dim == 0 || heads == 0 || !dim.is_multiple_of(heads) {
            return Err(Error::InvalidArgument(format!(
                "dim {dim} must be a positive multiple of heads {heads}"
            )));
        }
        if qkv.in_features() != dim || qkv.out_features() != 3 * dim {
            return Err(Error::ShapeMismatch(format!(
                "qkv must map {dim} -> {}, got {} -> {}",
                3 * dim,
                qkv.in_features(),
                qkv.out_features()
            )));
        }
        if proj.in_features() != dim || proj.out_features() != dim {
            return Err(Error::ShapeMismatch("proj must map dim -> dim".into()));
        }
        if mlp_fc1.in_features() != dim
            || mlp_fc2.out_features() != dim
            || mlp_fc2.in_features() != mlp_fc1.out_features()
        {
            return Err(Error::ShapeMismatch(
                "mlp must map dim -> hidden -> dim".into(),
            ));
        }
        if norm1.dim() != dim || norm2.dim() != dim {
            return Err(Error::ShapeMismatch("layer norm dim mismatch".into()));
        }
        Ok(AttentionBlock {
            dim,
            heads,
            qkv,
            proj,
            mlp_fc1,
            mlp_fc2,
            norm1,
            norm2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn qkv(&self) -> &LinearLayer {
        &self.qkv
    }

    pub fn proj(&self) -> &LinearLayer {
        &self.proj
    }

    pub fn mlp_fc1(&self) -> &LinearLayer {
        &self.mlp_fc1
    }

    pub fn mlp_fc2(&self) -> &LinearLayer {
        &self.mlp_fc2
    }

    pub fn norm1(&self) -> &LayerNorm {
        &self.norm1
    }

    pub fn norm2(&self) -> &LayerNorm {
        &self.norm2
    }
}

/// Direct convolution of a `[C, H, W]` input.
///
/// Summation order is the fixed loop nest (outC, y, x, inC, kY, kX); the
/// bias, when present, is added after the accumulation.
pub fn conv2d(input: &Tensor, layer: &Conv2dLayer) -> Result<Tensor> {
    if input.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "conv2d input must be [C,H,W], got {:?}",
            input.dims()
        )));
    }
    let (c_in, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    if c_in != layer.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "input has {c_in} channels, conv expects {}",
            layer.in_channels()
        )));
    }
    let (kh, kw) = layer.kernel();
    let (sy, sx) = layer.stride();
    let (py, px) = layer.padding();
    let (oh, ow) = layer.out_extents(h, w)?;
    let c_out = layer.out_channels();

    let src = input.data();
    let wgt = layer.weight.data();
    let mut out = vec![0.0f32; c_out * oh * ow];
    for oc in 0..c_out {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f32;
                for ic in 0..c_in {
                    for ky in 0..kh {
                        let iy = (oy * sy + ky) as isize - py as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * sx + kx) as isize - px as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let sv = src[(ic * h + iy as usize) * w + ix as usize];
                            let wv = wgt[((oc * c_in + ic) * kh + ky) * kw + kx];
                            acc += sv * wv;
                        }
                    }
                }
                if let Some(b) = &layer.bias {
                    acc += b.data()[oc];
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    let t = Tensor::new(vec![c_out, oh, ow], out)?;
    t.check_finite("conv2d")?;
    Ok(t)
}

/// Affine map over the last axis; leading axes are treated as independent rows.
pub fn linear(input: &Tensor, layer: &LinearLayer) -> Result<Tensor> {
    let in_f = *input.dims().last().expect("rank >= 1");
    if in_f != layer.in_features() {
        return Err(Error::ShapeMismatch(format!(
            "linear input features {in_f} do not match weight in features {}",
            layer.in_features()
        )));
    }
    let out_f = layer.out_features();
    let rows = input.numel() / in_f;
    let mut dims = input.dims().to_vec();
    *dims.last_mut().unwrap() = out_f;

    let src = input.data();
    let wgt = layer.weight.data();
    let mut out = vec![0.0f32; rows * out_f];
    for r in 0..rows {
        let x = &src[r * in_f..(r + 1) * in_f];
        for o in 0..out_f {
            let wrow = &wgt[o * in_f..(o + 1) * in_f];
            let mut acc = 0.0f32;
            for i in 0..in_f {
                acc += wrow[i] * x[i];
            }
            if let Some(b) = &layer.bias {
                acc += b.data()[o];
            }
            out[r * out_f + o] = acc;
        }
    }
    let t = Tensor::new(dims, out)?;
    t.check_finite("linear")?;
    Ok(t)
}

/// Mean over the spatial axes of a `[K, h, w]` feature map.
pub fn global_avg_pool(features: &Tensor) -> Result<Tensor> {
    if features.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "global_avg_pool input must be [K,h,w], got {:?}",
            features.dims()
        )));
    }
    let (k, h, w) = (
        features.dims()[0],
        features.dims()[1],
        features.dims()[2],
    );
    let cells = h * w;
    let src = features.data();
    let mut out = vec![0.0f32; k];
    for c in 0..k {
        let mut acc = 0.0f32;
        for i in 0..cells {
            acc += src[c * cells + i];
        }
        out[c] = acc / cells as f32;
    }
    let t = Tensor::new(vec![k], out)?;
    t.check_finite("global_avg_pool")?;
    Ok(t)
}

// Catmull-Rom taps (a = -0.5) at offsets -1..=2 around the base sample.
fn cubic_weights(frac: f64) -> [f64; 4] {
    let kernel = |t: f64| -> f64 {
        let t = t.abs();
        if t <= 1.0 {
            (1.5 * t - 2.5) * t * t + 1.0
        } else if t < 2.0 {
            ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
        } else {
            0.0
        }
    };
    [
        kernel(1.0 + frac),
        kernel(frac),
        kernel(1.0 - frac),
        kernel(2.0 - frac),
    ]
}

// Per-output-coordinate taps for one axis: clamped source indices and
// Catmull-Rom weights under the half-pixel-center mapping.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|o| {
            let s = (o as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let weights = cubic_weights(s - base);
            let mut idx = [0usize; 4];
            for (i, slot) in idx.iter_mut().enumerate() {
                let p = base as i64 - 1 + i as i64;
                *slot = p.clamp(0, src_len as i64 - 1) as usize;
            }
            (idx, weights)
        })
        .collect()
}

/// Bicubic resize of a rank-2 map with the Catmull-Rom kernel (a = -0.5),
/// half-pixel-center coordinate mapping and edge-clamped sampling.
///
/// A same-size call is an exact pass-through. Implemented as a separable
/// horizontal-then-vertical pass with f64 accumulation.
pub fn bicubic_resize(src: &Tensor, dst_h: usize, dst_w: usize) -> Result<Tensor> {
    if src.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "bicubic_resize input must be rank 2, got {:?}",
            src.dims()
        )));
    }
    if dst_h == 0 || dst_w == 0 {
        return Err(Error::InvalidArgument(
            "bicubic_resize target extents must be positive".into(),
        ));
    }
    let (h, w) = (src.dims()[0], src.dims()[1]);
    if dst_h == h && dst_w == w {
        return Ok(src.clone());
    }

    let data = src.data();

    // Horizontal pass: [h, w] -> [h, dst_w], kept in f64.
    let xtaps = axis_taps(w, dst_w);
    let mut mid = vec![0.0f64; h * dst_w];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for (ox, (idx, wt)) in xtaps.iter().enumerate() {
            let mut acc = 0.0f64;
            for i in 0..4 {
                acc += wt[i] * row[idx[i]] as f64;
            }
            mid[y * dst_w + ox] = acc;
        }
    }

    // Vertical pass: [h, dst_w] -> [dst_h, dst_w].
    let ytaps = axis_taps(h, dst_h);
    let mut out = vec![0.0f32; dst_h * dst_w];
    for (oy, (idx, wt)) in ytaps.iter().enumerate() {
        for ox in 0..dst_w {
            let mut acc = 0.0f64;
            for i in 0..4 {
                acc += wt[i] * mid[idx[i] * dst_w + ox];
            }
            out[oy * dst_w + ox] = acc as f32;
        }
    }
    let t = Tensor::new(vec![dst_h, dst_w], out)?;
    t.check_finite("bicubic_resize")?;
    Ok(t)
}

// GELU, tanh form.
pub(crate) fn gelu(x: f32) -> f32 {
    const SQRT_2_OVER_PI: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
}

pub(crate) fn layer_norm(input: &Tensor, params: &LayerNorm) -> Result<Tensor> {
    let dim = *input.dims().last().expect("rank >= 1");
    if dim != params.dim() {
        return Err(Error::ShapeMismatch(format!(
            "layer norm expects {} features, input has {dim}",
            params.dim()
        )));
    }
    const EPS: f32 = 1e-5;
    let rows = input.numel() / dim;
    let src = input.data();
    let scale = params.scale.data();
    let shift = params.shift.data();
    let mut out = vec![0.0f32; input.numel()];
    for r in 0..rows {
        let x = &src[r * dim..(r + 1) * dim];
        let mut mean = 0.0f32;
        for &v in x {
            mean += v;
        }
        mean /= dim as f32;
        let mut var = 0.0f32;
        for &v in x {
            let d = v - mean;
            var += d * d;
        }
        var /= dim as f32;
        let inv = 1.0 / (var + EPS).sqrt();
        for i in 0..dim {
            out[r * dim + i] = (x[i] - mean) * inv * scale[i] + shift[i];
        }
    }
    Tensor::new(input.dims().to_vec(), out)
}

// In-place softmax of one row, with max subtraction for stability.
fn softmax_row(row: &mut [f32]) {
    let mut max = f32::NEG_INFINITY;
    for &v in row.iter() {
        if v > max {
            max = v;
        }
    }
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// One pre-norm transformer block over a `[N, dim]` token matrix.
///
/// The block contains no positional terms, so it is permutation
/// equivariant: permuting input tokens permutes outputs identically.
pub fn attention_forward(tokens: &Tensor, block: &AttentionBlock) -> Result<Tensor> {
    if tokens.rank() != 2 || tokens.dims()[1] != block.dim {
        return Err(Error::ShapeMismatch(format!(
            "attention input must be [N, {}], got {:?}",
            block.dim,
            tokens.dims()
        )));
    }
    let n = tokens.dims()[0];
    let dim = block.dim;
    let heads = block.heads;
    let dh = dim / heads;
    let scale = 1.0 / (dh as f32).sqrt();

    let normed = layer_norm(tokens, &block.norm1)?;
    let qkv = linear(&normed, &block.qkv)?;
    let qkv = qkv.data();

    // Per-head attention; q/k/v are contiguous thirds of the qkv output.
    let mut ctx = vec![0.0f32; n * dim];
    let mut scores = vec![0.0f32; n];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let q = &qkv[i * 3 * dim + off..i * 3 * dim + off + dh];
            for (j, slot) in scores.iter_mut().enumerate() {
                let k = &qkv[j * 3 * dim + dim + off..j * 3 * dim + dim + off + dh];
                let mut acc = 0.0f32;
                for d in 0..dh {
                    acc += q[d] * k[d];
                }
                *slot = acc * scale;
            }
            softmax_row(&mut scores);
            let out_row = &mut ctx[i * dim + off..i * dim + off + dh];
            for (j, &a) in scores.iter().enumerate() {
                let v = &qkv[j * 3 * dim + 2 * dim + off..j * 3 * dim + 2 * dim + off + dh];
                for d in 0..dh {
                    out_row[d] += a * v[d];
                }
            }
        }
    }

    let attn_out = linear(&Tensor::new(vec![n, dim], ctx)?, &block.proj)?;
    let mut x: Vec<f32> = tokens
        .data()
        .iter()
        .zip(attn_out.data())
        .map(|(a, b)| a + b)
        .collect();

    let mid = Tensor::new(vec![n, dim], x.clone())?;
    let normed2 = layer_norm(&mid, &block.norm2)?;
    let mut hidden = linear(&normed2, &block.mlp_fc1)?;
    for v in hidden.data_mut() {
        *v = gelu(*v);
    }
    let mlp_out = linear(&hidden, &block.mlp_fc2)?;
    for (slot, &m) in x.iter_mut().zip(mlp_out.data()) {
        *slot += m;
    }

    let t = Tensor::new(vec![n, dim], x)?;
    t.check_finite("attention_forward")?;
    Ok(t)
}

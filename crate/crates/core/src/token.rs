//! Mask application for vanilla-transformer token sequences.
//!
//! Pruning happens exactly once, right after patch extraction and
//! positional-embedding addition; every transformer block then runs on
//! the reduced sequence. The class token, when present, is never pruned
//! and always stays at position 0.

use crate::error::{Error, Result};
use crate::psm::{PatchGrid, PruneMask};
use crate::tensor::{attention_forward, linear, AttentionBlock, LinearLayer, Tensor};

/// A batch of token sequences `[B, N, dim]` plus the patch-grid geometry
/// the patch tokens came from.
#[derive(Debug, Clone)]
pub struct TokenBatch {
    tokens: Tensor,
    has_class_token: bool,
    grid: PatchGrid,
}

impl TokenBatch {
    pub fn new(tokens: Tensor, has_class_token: bool, grid: PatchGrid) -> Result<Self> {
        if tokens.rank() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "token batch must be [B, N, dim], got {:?}",
                tokens.dims()
            )));
        }
        let n = tokens.dims()[1];
        let cls = usize::from(has_class_token);
        if n < 1 + cls || n - cls != grid.n_patches() {
            return Err(Error::ShapeMismatch(format!(
                "{n} tokens (class token: {has_class_token}) do not cover a {} patch grid",
                grid.n_patches()
            )));
        }
        Ok(TokenBatch {
            tokens,
            has_class_token,
            grid,
        })
    }

    pub fn tokens(&self) -> &Tensor {
        &self.tokens
    }

    pub fn batch_size(&self) -> usize {
        self.tokens.dims()[0]
    }

    pub fn seq_len(&self) -> usize {
        self.tokens.dims()[1]
    }

    pub fn dim(&self) -> usize {
        self.tokens.dims()[2]
    }

    pub fn has_class_token(&self) -> bool {
        self.has_class_token
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }
}

/// Gathers the kept tokens of every batch element, one mask per element.
///
/// All masks must share the batch's grid and a common keep count so the
/// output stays rectangular. Patch tokens land in mask order (descending
/// significance); a class token is copied through at position 0.
pub fn prune_tokens(batch: &TokenBatch, masks: &[PruneMask]) -> Result<TokenBatch> {
    let b = batch.batch_size();
    if masks.len() != b {
        return Err(Error::InvalidArgument(format!(
            "expected {b} masks for batch size {b}, got {}",
            masks.len()
        )));
    }
    let keep = masks[0].keep_count();
    for (i, m) in masks.iter().enumerate() {
        if m.grid() != batch.grid() {
            return Err(Error::ShapeMismatch(format!(
                "mask {i} grid {:?} does not match batch grid {:?}",
                m.grid().extents(),
                batch.grid().extents()
            )));
        }
        if m.keep_count() != keep {
            return Err(Error::InvalidArgument(format!(
                "masks must share one keep count; mask {i} keeps {} but mask 0 keeps {keep}",
                m.keep_count()
            )));
        }
    }

    let cls = usize::from(batch.has_class_token);
    let (n, dim) = (batch.seq_len(), batch.dim());
    let out_n = keep + cls;
    let src = batch.tokens.data();
    let mut out = vec![0.0f32; b * out_n * dim];
    for (bi, mask) in masks.iter().enumerate() {
        let sample = &src[bi * n * dim..(bi + 1) * n * dim];
        let dst = &mut out[bi * out_n * dim..(bi + 1) * out_n * dim];
        if cls == 1 {
            dst[..dim].copy_from_slice(&sample[..dim]);
        }
        for (slot, &patch) in mask.kept().iter().enumerate() {
            let tok = patch + cls; // class token shifts patch indices by one
            dst[(slot + cls) * dim..(slot + cls + 1) * dim]
                .copy_from_slice(&sample[tok * dim..(tok + 1) * dim]);
        }
    }
    TokenBatch::new(
        Tensor::new(vec![b, out_n, dim], out)?,
        batch.has_class_token,
        PatchGrid::image(1, keep)?,
    )
}

/// Runs every block over each batch element, invoking `observe` with the
/// per-sample token matrix after each block.
///
/// The observer is the integration point for downstream token-reduction
/// passes that want to edit or inspect tokens between blocks.
pub fn run_blocks_observed(
    tokens: &Tensor,
    blocks: &[AttentionBlock],
    observe: &mut dyn FnMut(usize, usize, &Tensor),
) -> Result<Tensor> {
    if tokens.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected [B, N, dim] tokens, got {:?}",
            tokens.dims()
        )));
    }
    let (b, n, dim) = (tokens.dims()[0], tokens.dims()[1], tokens.dims()[2]);
    let mut out = vec![0.0f32; b * n * dim];
    for bi in 0..b {
        let mut x = Tensor::new(
            vec![n, dim],
            tokens.data()[bi * n * dim..(bi + 1) * n * dim].to_vec(),
        )?;
        for (li, block) in blocks.iter().enumerate() {
            x = attention_forward(&x, block)?;
            observe(bi, li, &x);
        }
        out[bi * n * dim..(bi + 1) * n * dim].copy_from_slice(x.data());
    }
    Tensor::new(vec![b, n, dim], out)
}

/// Classifier readout: the class token when present, otherwise the mean
/// of all patch tokens, through the head layer. Returns `[B, C]` logits.
pub fn readout_logits(
    tokens: &Tensor,
    has_class_token: bool,
    head: &LinearLayer,
) -> Result<Tensor> {
    let (b, n, dim) = (tokens.dims()[0], tokens.dims()[1], tokens.dims()[2]);
    if head.in_features() != dim {
        return Err(Error::ShapeMismatch(format!(
            "head expects {} features, tokens have {dim}",
            head.in_features()
        )));
    }
    let mut pooled = vec![0.0f32; b * dim];
    for bi in 0..b {
        let sample = &tokens.data()[bi * n * dim..(bi + 1) * n * dim];
        let dst = &mut pooled[bi * dim..(bi + 1) * dim];
        if has_class_token {
            dst.copy_from_slice(&sample[..dim]);
        } else {
            for t in 0..n {
                for d in 0..dim {
                    dst[d] += sample[t * dim + d];
                }
            }
            for v in dst.iter_mut() {
                *v /= n as f32;
            }
        }
    }
    linear(&Tensor::new(vec![b, dim], pooled)?, head)
}

/// Unpruned forward pass: all blocks on the full sequence, then readout.
pub fn vit_forward(
    batch: &TokenBatch,
    blocks: &[AttentionBlock],
    head: &LinearLayer,
) -> Result<Tensor> {
    let out = run_blocks_observed(&batch.tokens, blocks, &mut |_, _, _| {})?;
    readout_logits(&out, batch.has_class_token, head)
}

/// Pruned forward pass: apply `mask` once (shared across the batch), run
/// all blocks on the reduced sequence, then readout.
pub fn vit_forward_pruned(
    batch: &TokenBatch,
    blocks: &[AttentionBlock],
    mask: &PruneMask,
    head: &LinearLayer,
) -> Result<Tensor> {
    let masks = vec![mask.clone(); batch.batch_size()];
    let pruned = prune_tokens(batch, &masks)?;
    let out = run_blocks_observed(&pruned.tokens, blocks, &mut |_, _, _| {})?;
    readout_logits(&out, pruned.has_class_token, head)
}

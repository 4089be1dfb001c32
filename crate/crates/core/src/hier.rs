//! Pixel-operator pruning for hierarchical/convolutional backbones.
//!
//! A block is a window-based spatial operator followed by per-location
//! pixel operators (1x1 conv / linear). The spatial operator always runs
//! dense on the full map; pixel operators run only on foreground rows,
//! and background rows are written back as exact zeros so the map keeps
//! its shape for the next spatial operator.

use crate::error::{Error, Result};
use crate::psm::{PatchGrid, PruneMask};
use crate::tensor::{linear, LinearLayer, Tensor};

/// Channel-last pixel features `[B, h, w, dim]` on a spatial patch grid.
#[derive(Debug, Clone)]
pub struct HierFeature {
    values: Tensor,
    grid: PatchGrid,
}

impl HierFeature {
    pub fn new(values: Tensor, grid: PatchGrid) -> Result<Self> {
        if values.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "hierarchical features must be [B, h, w, dim], got {:?}",
                values.dims()
            )));
        }
        match grid {
            PatchGrid::Image { h, w } if values.dims()[1] == h && values.dims()[2] == w => {}
            _ => {
                return Err(Error::ShapeMismatch(format!(
                    "feature dims {:?} do not match grid {:?}",
                    values.dims(),
                    grid.extents()
                )))
            }
        }
        Ok(HierFeature { values, grid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    pub fn batch_size(&self) -> usize {
        self.values.dims()[0]
    }

    pub fn dim(&self) -> usize {
        self.values.dims()[3]
    }
}

fn check_grid(a: &HierFeature, mask: &PruneMask) -> Result<()> {
    if mask.grid() != a.grid() {
        return Err(Error::ShapeMismatch(format!(
            "mask grid {:?} does not match feature grid {:?}",
            mask.grid().extents(),
            a.grid().extents()
        )));
    }
    Ok(())
}

/// Partitions rows into foreground (kept indices, mask order) and the
/// background index set (ascending).
pub fn split(a: &HierFeature, mask: &PruneMask) -> Result<(Tensor, Vec<usize>)> {
    check_grid(a, mask)?;
    let (b, dim) = (a.batch_size(), a.dim());
    let n = a.grid.n_patches();
    let keep = mask.keep_count();
    let src = a.values.data();
    let mut fg = vec![0.0f32; b * keep * dim];
    for bi in 0..b {
        for (slot, &idx) in mask.kept().iter().enumerate() {
            fg[(bi * keep + slot) * dim..(bi * keep + slot + 1) * dim]
                .copy_from_slice(&src[(bi * n + idx) * dim..(bi * n + idx + 1) * dim]);
        }
    }
    Ok((Tensor::new(vec![b, keep, dim], fg)?, mask.background()))
}

/// Writes foreground rows back at their kept positions; every background
/// row is exact zeros.
pub fn reassemble(foreground: &Tensor, mask: &PruneMask) -> Result<HierFeature> {
    if foreground.rank() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "foreground must be [B, n_f, dim], got {:?}",
            foreground.dims()
        )));
    }
    let (b, rows, dim) = (
        foreground.dims()[0],
        foreground.dims()[1],
        foreground.dims()[2],
    );
    if rows != mask.keep_count() {
        return Err(Error::ShapeMismatch(format!(
            "foreground has {rows} rows, mask keeps {}",
            mask.keep_count()
        )));
    }
    let (h, w) = match mask.grid() {
        PatchGrid::Image { h, w } => (h, w),
        PatchGrid::Video { .. } => {
            return Err(Error::ShapeMismatch(
                "hierarchical features use image grids".into(),
            ))
        }
    };
    let n = h * w;
    let mut out = vec![0.0f32; b * n * dim];
    for bi in 0..b {
        for (slot, &idx) in mask.kept().iter().enumerate() {
            out[(bi * n + idx) * dim..(bi * n + idx + 1) * dim]
                .copy_from_slice(&foreground.data()[(bi * rows + slot) * dim..(bi * rows + slot + 1) * dim]);
        }
    }
    HierFeature::new(Tensor::new(vec![b, h, w, dim], out)?, mask.grid())
}

/// Split -> linear on foreground -> reassemble with zero background.
///
/// Background rows are exactly 0.0, not the bias vector, so the result
/// deliberately differs from a dense pass wherever the mask drops rows.
pub fn pixel_op_pruned(
    a: &HierFeature,
    mask: &PruneMask,
    op: &LinearLayer,
) -> Result<HierFeature> {
    check_grid(a, mask)?;
    if op.in_features() != a.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pixel operator expects {} features, map has {}",
            op.in_features(),
            a.dim()
        )));
    }
    let (fg, _bg) = split(a, mask)?;
    let fg_out = linear(&fg, op)?;
    reassemble(&fg_out, mask)
}

/// Dense application of a pixel operator to every row.
pub fn pixel_op_dense(a: &HierFeature, op: &LinearLayer) -> Result<HierFeature> {
    if op.in_features() != a.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pixel operator expects {} features, map has {}",
            op.in_features(),
            a.dim()
        )));
    }
    let out = linear(&a.values, op)?;
    HierFeature::new(out, a.grid())
}

/// A window-based operator that mixes neighboring locations and preserves
/// the spatial grid.
pub trait SpatialOperator {
    fn apply(&self, input: &HierFeature) -> Result<HierFeature>;
}

/// Depthwise k x k convolution over channel-last features, stride 1 with
/// zero padding; the usual window operator of conv-style blocks.
#[derive(Debug, Clone)]
pub struct DepthwiseConv2d {
    weight: Tensor, // [dim, kH, kW]
    bias: Option<Tensor>,
    padding: (usize, usize),
}

impl DepthwiseConv2d {
    pub fn new(weight: Tensor, bias: Option<Tensor>, padding: (usize, usize)) -> Result<Self> {
        if weight.rank() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "depthwise weight must be [dim, kH, kW], got {:?}",
                weight.dims()
            )));
        }
        if let Some(b) = &bias {
            if b.rank() != 1 || b.dims()[0] != weight.dims()[0] {
                return Err(Error::ShapeMismatch("depthwise bias mismatch".into()));
            }
        }
        Ok(DepthwiseConv2d {
            weight,
            bias,
            padding,
        })
    }

    /// k x k identity: center tap 1, elsewhere 0.
    pub fn identity(dim: usize, k: usize) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "identity depthwise kernel must be odd-sized".into(),
            ));
        }
        let mut data = vec![0.0f32; dim * k * k];
        for c in 0..dim {
            data[c * k * k + (k / 2) * k + k / 2] = 1.0;
        }
        DepthwiseConv2d::new(
            Tensor::new(vec![dim, k, k], data)?,
            None,
            (k / 2, k / 2),
        )
    }
}

impl SpatialOperator for DepthwiseConv2d {
    fn apply(&self, input: &HierFeature) -> Result<HierFeature> {
        let (b, h, w, dim) = (
            input.values.dims()[0],
            input.values.dims()[1],
            input.values.dims()[2],
            input.values.dims()[3],
        );
        if self.weight.dims()[0] != dim {
            return Err(Error::ShapeMismatch(format!(
                "depthwise kernel has {} channels, map has {dim}",
                self.weight.dims()[0]
            )));
        }
        let (kh, kw) = (self.weight.dims()[1], self.weight.dims()[2]);
        let (py, px) = self.padding;
        if h + 2 * py + 1 < kh + 1 || w + 2 * px + 1 < kw + 1 || h + 2 * py - kh + 1 != h
            || w + 2 * px - kw + 1 != w
        {
            return Err(Error::ShapeMismatch(format!(
                "depthwise {kh}x{kw} with padding ({py}, {px}) does not preserve {h}x{w}"
            )));
        }
        let src = input.values.data();
        let wgt = self.weight.data();
        let mut out = vec![0.0f32; b * h * w * dim];
        for bi in 0..b {
            for oy in 0..h {
                for ox in 0..w {
                    for c in 0..dim {
                        let mut acc = 0.0f32;
                        for ky in 0..kh {
                            let iy = (oy + ky) as isize - py as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox + kx) as isize - px as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += src[((bi * h + iy as usize) * w + ix as usize) * dim + c]
                                    * wgt[(c * kh + ky) * kw + kx];
                            }
                        }
                        if let Some(bias) = &self.bias {
                            acc += bias.data()[c];
                        }
                        out[((bi * h + oy) * w + ox) * dim + c] = acc;
                    }
                }
            }
        }
        HierFeature::new(Tensor::new(vec![b, h, w, dim], out)?, input.grid())
    }
}

/// One hierarchical block: dense spatial operator, then each pixel
/// operator pruned through the shared stage mask.
pub fn hier_block_forward(
    a: &HierFeature,
    spatial_op: &dyn SpatialOperator,
    pixel_ops: &[LinearLayer],
    mask: &PruneMask,
) -> Result<HierFeature> {
    check_grid(a, mask)?;
    let mut x = spatial_op.apply(a)?;
    if x.grid() != a.grid() {
        return Err(Error::ShapeMismatch(
            "spatial operator must preserve the patch grid".into(),
        ));
    }
    for op in pixel_ops {
        x = pixel_op_pruned(&x, mask, op)?;
    }
    Ok(x)
}

/// Dense reference for the same block shape: no pruning anywhere.
pub fn hier_block_forward_dense(
    a: &HierFeature,
    spatial_op: &dyn SpatialOperator,
    pixel_ops: &[LinearLayer],
) -> Result<HierFeature> {
    let mut x = spatial_op.apply(a)?;
    for op in pixel_ops {
        x = pixel_op_dense(&x, op)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psm::{build_mask, PatchSignificanceMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Tensor {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Tensor::new(dims, data).unwrap()
    }

    fn random_feature(rng: &mut ChaCha8Rng, b: usize, h: usize, w: usize, dim: usize) -> HierFeature {
        HierFeature::new(
            random_tensor(rng, vec![b, h, w, dim]),
            PatchGrid::image(h, w).unwrap(),
        )
        .unwrap()
    }

    fn mask_from_values(values: Vec<f32>, h: usize, w: usize, z: f64) -> PruneMask {
        let grid = PatchGrid::image(h, w).unwrap();
        let psm =
            PatchSignificanceMap::new(Tensor::new(vec![h, w], values).unwrap(), grid).unwrap();
        build_mask(&psm, z).unwrap()
    }

    fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, z: f64) -> PruneMask {
        let vals: Vec<f32> = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        mask_from_values(vals, h, w, z)
    }

    #[test]
    fn split_full_keep_covers_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let a = random_feature(&mut rng, 2, 2, 2, 3);
        let mask = random_mask(&mut rng, 2, 2, 1.0);
        let (fg, bg) = split(&a, &mask).unwrap();
        assert_eq!(fg.dims(), &[2, 4, 3]);
        assert!(bg.is_empty());
    }

    #[test]
    fn split_single_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let a = random_feature(&mut rng, 1, 2, 2, 2);
        let mask = mask_from_values(vec![0.0, 0.0, 0.0, 9.0], 2, 2, 0.25);
        assert_eq!(mask.kept(), &[3]);
        let (fg, bg) = split(&a, &mask).unwrap();
        assert_eq!(fg.data(), &a.values().data()[3 * 2..4 * 2]);
        assert_eq!(bg, vec![0, 1, 2]);
    }

    #[test]
    fn split_matches_boolean_partition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let (h, w, dim) = (14, 14, 3);
        let a = random_feature(&mut rng, 2, h, w, dim);
        let mask = random_mask(&mut rng, h, w, 0.65);
        let (fg, bg) = split(&a, &mask).unwrap();

        let mut keep = vec![false; h * w];
        for &i in mask.kept() {
            keep[i] = true;
        }
        let want_bg: Vec<usize> = (0..h * w).filter(|&i| !keep[i]).collect();
        assert_eq!(bg, want_bg);
        for bi in 0..2 {
            for (slot, &idx) in mask.kept().iter().enumerate() {
                let got = &fg.data()
                    [(bi * mask.keep_count() + slot) * dim..(bi * mask.keep_count() + slot + 1) * dim];
                let want =
                    &a.values().data()[(bi * h * w + idx) * dim..(bi * h * w + idx + 1) * dim];
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn reassemble_inverts_split_on_foreground() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let a = random_feature(&mut rng, 2, 4, 3, 5);
        let mask = random_mask(&mut rng, 4, 3, 0.5);
        let (fg, _) = split(&a, &mask).unwrap();
        let back = reassemble(&fg, &mask).unwrap();
        for bi in 0..2 {
            for &idx in mask.kept() {
                let got = &back.values().data()[(bi * 12 + idx) * 5..(bi * 12 + idx + 1) * 5];
                let want = &a.values().data()[(bi * 12 + idx) * 5..(bi * 12 + idx + 1) * 5];
                assert_eq!(got, want);
            }
            for idx in mask.background() {
                let row = &back.values().data()[(bi * 12 + idx) * 5..(bi * 12 + idx + 1) * 5];
                assert!(row.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn pixel_op_full_keep_equals_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let a = random_feature(&mut rng, 1, 3, 3, 4);
        let op = LinearLayer::new(
            random_tensor(&mut rng, vec![6, 4]),
            Some(random_tensor(&mut rng, vec![6])),
        )
        .unwrap();
        let mask = random_mask(&mut rng, 3, 3, 1.0);
        let pruned = pixel_op_pruned(&a, &mask, &op).unwrap();
        let dense = pixel_op_dense(&a, &op).unwrap();
        for (p, d) in pruned.values().data().iter().zip(dense.values().data()) {
            assert!((p - d).abs() <= 1e-6);
        }
    }

    #[test]
    fn pixel_op_identity_keeps_row_zero_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let a = random_feature(&mut rng, 1, 2, 2, 3);
        let op = LinearLayer::identity(3).unwrap();
        let mask = mask_from_values(vec![9.0, 0.0, 0.0, 0.0], 2, 2, 0.25);
        let out = pixel_op_pruned(&a, &mask, &op).unwrap();
        assert_eq!(&out.values().data()[..3], &a.values().data()[..3]);
        assert!(out.values().data()[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pixel_op_matches_dense_then_zero_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(151);
        for _ in 0..100 {
            let (h, w, dim, out_dim) = (4, 4, 3, 5);
            let a = random_feature(&mut rng, 2, h, w, dim);
            let op = LinearLayer::new(
                random_tensor(&mut rng, vec![out_dim, dim]),
                Some(random_tensor(&mut rng, vec![out_dim])),
            )
            .unwrap();
            let z = rng.gen_range(0.1..=1.0);
            let mask = random_mask(&mut rng, h, w, z);
            let got = pixel_op_pruned(&a, &mask, &op).unwrap();

            // Oracle: apply op to all rows, then overwrite background with zeros.
            let dense = pixel_op_dense(&a, &op).unwrap();
            let mut want = dense.values().data().to_vec();
            for bi in 0..2 {
                for idx in mask.background() {
                    for d in 0..out_dim {
                        want[(bi * h * w + idx) * out_dim + d] = 0.0;
                    }
                }
            }
            for (g, v) in got.values().data().iter().zip(&want) {
                assert!((g - v).abs() <= 1e-6);
            }
            // Zero-background contract is exact, not approximate.
            for bi in 0..2 {
                for idx in mask.background() {
                    let row = &got.values().data()
                        [(bi * h * w + idx) * out_dim..(bi * h * w + idx + 1) * out_dim];
                    assert!(row.iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn pixel_op_rejects_dim_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(157);
        let a = random_feature(&mut rng, 1, 2, 2, 3);
        let op = LinearLayer::identity(4).unwrap();
        let mask = random_mask(&mut rng, 2, 2, 1.0);
        assert!(pixel_op_pruned(&a, &mask, &op).is_err());
    }

    #[test]
    fn block_full_keep_matches_dense_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(163);
        let dim = 4;
        let a = random_feature(&mut rng, 2, 5, 5, dim);
        let spatial = DepthwiseConv2d::new(
            random_tensor(&mut rng, vec![dim, 3, 3]),
            Some(random_tensor(&mut rng, vec![dim])),
            (1, 1),
        )
        .unwrap();
        let ops = vec![
            LinearLayer::new(
                random_tensor(&mut rng, vec![8, dim]),
                Some(random_tensor(&mut rng, vec![8])),
            )
            .unwrap(),
            LinearLayer::new(
                random_tensor(&mut rng, vec![dim, 8]),
                Some(random_tensor(&mut rng, vec![dim])),
            )
            .unwrap(),
        ];
        let mask = random_mask(&mut rng, 5, 5, 1.0);
        let pruned = hier_block_forward(&a, &spatial, &ops, &mask).unwrap();
        let dense = hier_block_forward_dense(&a, &spatial, &ops).unwrap();
        for (p, d) in pruned.values().data().iter().zip(dense.values().data()) {
            assert!((p - d).abs() <= 1e-5);
        }
    }

    #[test]
    fn block_matches_straight_line_zeroed_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(167);
        let dim = 3;
        let a = random_feature(&mut rng, 1, 4, 4, dim);
        let spatial = DepthwiseConv2d::identity(dim, 3).unwrap();
        let ops = vec![
            LinearLayer::new(
                random_tensor(&mut rng, vec![5, dim]),
                Some(random_tensor(&mut rng, vec![5])),
            )
            .unwrap(),
            LinearLayer::new(
                random_tensor(&mut rng, vec![2, 5]),
                Some(random_tensor(&mut rng, vec![2])),
            )
            .unwrap(),
        ];
        let mask = random_mask(&mut rng, 4, 4, 0.4);
        let got = hier_block_forward(&a, &spatial, &ops, &mask).unwrap();

        // Straight-line dense computation, zeroing background after each op.
        let mut x = a.values().data().to_vec();
        let mut cur_dim = dim;
        for op in &ops {
            let t = Tensor::new(vec![1, 4, 4, cur_dim], x.clone()).unwrap();
            let dense = linear(&t, op).unwrap();
            cur_dim = op.out_features();
            x = dense.data().to_vec();
            for idx in mask.background() {
                for d in 0..cur_dim {
                    x[idx * cur_dim + d] = 0.0;
                }
            }
        }
        for (g, w) in got.values().data().iter().zip(&x) {
            assert!((g - w).abs() <= 1e-6);
        }
    }

    #[test]
    fn depthwise_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(173);
        let a = random_feature(&mut rng, 1, 3, 4, 2);
        let spatial = DepthwiseConv2d::identity(2, 3).unwrap();
        let out = spatial.apply(&a).unwrap();
        assert_eq!(out.values(), a.values());
    }
}

//! Patch significance maps and prune masks from proposal-network features.
//!
//! A lightweight ConvNet's final convolutional activations are averaged
//! over channels into a region proposal, resampled onto the backbone's
//! patch grid, and sorted into a top-z keep mask. None of this needs the
//! proposal network's classifier head: suppressing the FC layer with a
//! uniform weight is what makes the localization independent of the
//! proposal model's own accuracy.

use crate::error::{Error, Result};
use crate::tensor::{bicubic_resize, Tensor};

/// Patch grid geometry of the target backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchGrid {
    Image { h: usize, w: usize },
    Video { t: usize, h: usize, w: usize },
}

impl PatchGrid {
    pub fn image(h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidArgument(
                "patch grid extents must be positive".into(),
            ));
        }
        Ok(PatchGrid::Image { h, w })
    }

    pub fn video(t: usize, h: usize, w: usize) -> Result<Self> {
        if t == 0 || h == 0 || w == 0 {
            return Err(Error::InvalidArgument(
                "patch grid extents must be positive".into(),
            ));
        }
        Ok(PatchGrid::Video { t, h, w })
    }

    pub fn n_patches(&self) -> usize {
        match *self {
            PatchGrid::Image { h, w } => h * w,
            PatchGrid::Video { t, h, w } => t * h * w,
        }
    }

    pub fn extents(&self) -> Vec<usize> {
        match *self {
            PatchGrid::Image { h, w } => vec![h, w],
            PatchGrid::Video { t, h, w } => vec![t, h, w],
        }
    }
}

/// Final convolutional activations of the proposal network:
/// `[K, h, w]` for images, `[K, t, h, w]` for videos.
#[derive(Debug, Clone)]
pub struct ConvFeatureMap {
    features: Tensor,
}

impl ConvFeatureMap {
    pub fn new(features: Tensor) -> Result<Self> {
        if features.rank() != 3 && features.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "feature map must be [K,h,w] or [K,t,h,w], got {:?}",
                features.dims()
            )));
        }
        Ok(ConvFeatureMap { features })
    }

    pub fn channels(&self) -> usize {
        self.features.dims()[0]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }
}

/// Channel-mean of the feature map; one scalar per spatial(-temporal) cell.
#[derive(Debug, Clone)]
pub struct RegionProposal {
    values: Tensor,
}

impl RegionProposal {
    pub fn values(&self) -> &Tensor {
        &self.values
    }
}

/// Per-patch significance aligned to a target patch grid.
#[derive(Debug, Clone)]
pub struct PatchSignificanceMap {
    values: Tensor,
    grid: PatchGrid,
}

impl PatchSignificanceMap {
    pub fn new(values: Tensor, grid: PatchGrid) -> Result<Self> {
        if values.dims() != grid.extents().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "significance map {:?} does not match grid {:?}",
                values.dims(),
                grid.extents()
            )));
        }
        Ok(PatchSignificanceMap { values, grid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }
}

/// Ordered kept-patch indices plus the keep ratio that produced them.
///
/// `kept` is sorted by descending significance with ties broken by the
/// lower flat index, so masks are deterministic and golden-file stable.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    kept: Vec<usize>,
    z: f64,
    grid: PatchGrid,
}

impl PruneMask {
    /// Builds a mask from explicit indices. Index ordering encodes
    /// descending significance and is the caller's responsibility here;
    /// masks produced by [`build_mask`] always satisfy it.
    pub fn new(kept: Vec<usize>, z: f64, grid: PatchGrid) -> Result<Self> {
        if !(z > 0.0 && z <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "keep ratio must be in (0, 1], got {z}"
            )));
        }
        if kept.is_empty() {
            return Err(Error::InvalidArgument(
                "mask must keep at least one patch".into(),
            ));
        }
        let n = grid.n_patches();
        let mut seen = vec![false; n];
        for &i in &kept {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "kept index {i} out of range for {n} patches"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!("duplicate kept index {i}")));
            }
            seen[i] = true;
        }
        Ok(PruneMask { kept, z, grid })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn keep_count(&self) -> usize {
        self.kept.len()
    }

    pub fn keep_ratio(&self) -> f64 {
        self.z
    }

    pub fn grid(&self) -> PatchGrid {
        self.grid
    }

    /// Background indices: the complement of `kept`, ascending.
    pub fn background(&self) -> Vec<usize> {
        let n = self.grid.n_patches();
        let mut keep = vec![false; n];
        for &i in &self.kept {
            keep[i] = true;
        }
        (0..n).filter(|&i| !keep[i]).collect()
    }
}

/// Number of patches kept at ratio `z` out of `n_patches`.
///
/// Budgeted over patch tokens only (a class token is always extra), and
/// never less than one.
pub fn keep_count(z: f64, n_patches: usize) -> usize {
    let k = (z * n_patches as f64).floor() as usize;
    k.clamp(1, n_patches)
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

/// Element-wise mean over the channel axis.
///
/// This is the uniform FC recalibration: every class weight is replaced by
/// the same positive constant, so the constant itself drops out of any
/// subsequent ranking and only the channel mean remains.
pub fn region_proposal(f: &ConvFeatureMap) -> RegionProposal {
    let feats = f.features();
    let k = feats.dims()[0];
    let cell_dims: Vec<usize> = feats.dims()[1..].to_vec();
    let cells: usize = cell_dims.iter().product();
    let src = feats.data();
    let mut out = vec![0.0f32; cells];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0f32;
        for c in 0..k {
            acc += src[c * cells + j];
        }
        *slot = acc / k as f32;
    }
    RegionProposal {
        values: Tensor::new(cell_dims, out).expect("shape preserved"),
    }
}

// Linear interpolation along the leading (temporal) axis of [t, h, w],
// half-pixel centers, edge clamped, f64 accumulation.
fn resize_temporal_linear(src: &Tensor, dst_t: usize) -> Result<Tensor> {
    let (t, h, w) = (src.dims()[0], src.dims()[1], src.dims()[2]);
    if dst_t == t {
        return Ok(src.clone());
    }
    let frame = h * w;
    let scale = t as f64 / dst_t as f64;
    let data = src.data();
    let mut out = vec![0.0f32; dst_t * frame];
    for ot in 0..dst_t {
        let s = (ot as f64 + 0.5) * scale - 0.5;
        let base = s.floor();
        let frac = s - base;
        let i0 = (base as i64).clamp(0, t as i64 - 1) as usize;
        let i1 = (base as i64 + 1).clamp(0, t as i64 - 1) as usize;
        for j in 0..frame {
            let v = (1.0 - frac) * data[i0 * frame + j] as f64
                + frac * data[i1 * frame + j] as f64;
            out[ot * frame + j] = v as f32;
        }
    }
    Tensor::new(vec![dst_t, h, w], out)
}

/// Resamples a region proposal onto the target patch grid.
///
/// Spatial axes use bicubic resizing; for video the temporal axis is
/// linearly resized first, then each frame is resized spatially. A call
/// whose grid equals the proposal extents is an exact pass-through.
pub fn build_psm(r: &RegionProposal, grid: PatchGrid) -> Result<PatchSignificanceMap> {
    let values = match (r.values.rank(), grid) {
        (2, PatchGrid::Image { h, w }) => bicubic_resize(&r.values, h, w)?,
        (3, PatchGrid::Video { t, h, w }) => {
            let tmp = resize_temporal_linear(&r.values, t)?;
            let (st, sh, sw) = (tmp.dims()[0], tmp.dims()[1], tmp.dims()[2]);
            if sh == h && sw == w {
                tmp
            } else {
                let frame_in = sh * sw;
                let mut out = vec![0.0f32; st * h * w];
                for ft in 0..st {
                    let slice = Tensor::new(
                        vec![sh, sw],
                        tmp.data()[ft * frame_in..(ft + 1) * frame_in].to_vec(),
                    )?;
                    let resized = bicubic_resize(&slice, h, w)?;
                    out[ft * h * w..(ft + 1) * h * w].copy_from_slice(resized.data());
                }
                Tensor::new(vec![t, h, w], out)?
            }
        }
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "proposal rank {} does not match grid {:?}",
                r.values.rank(),
                grid.extents()
            )))
        }
    };
    PatchSignificanceMap::new(values, grid)
}

// Percentile by linear interpolation on the sorted values, p in [0, 100].
fn percentile(sorted: &[f32], p: f64) -> f32 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    ((1.0 - frac) * sorted[lo] as f64 + frac * sorted[hi] as f64) as f32
}

/// Min-max normalization to `[0, 1]`, with optional percentile clipping
/// first to suppress outliers. A constant map normalizes to all zeros.
///
/// This output is for visualization (heatmaps) only; mask construction
/// always ranks the raw significance map.
pub fn normalize_psm(
    p: &PatchSignificanceMap,
    clip_percentiles: Option<(f64, f64)>,
) -> Result<PatchSignificanceMap> {
    let mut values = p.values.data().to_vec();
    if let Some((lo, hi)) = clip_percentiles {
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "clip percentiles require lo < hi, got ({lo}, {hi})"
            )));
        }
        if lo < 0.0 || hi > 100.0 {
            return Err(Error::InvalidArgument(format!(
                "clip percentiles must lie in [0, 100], got ({lo}, {hi})"
            )));
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let vlo = percentile(&sorted, lo);
        let vhi = percentile(&sorted, hi);
        for v in values.iter_mut() {
            *v = v.clamp(vlo, vhi);
        }
    }
    let min = values.iter().cloned().fold(f32::INFINITY, f32::min);
    let max = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let range = max - min;
    if range == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        for v in values.iter_mut() {
            *v = (*v - min) / range;
        }
    }
    PatchSignificanceMap::new(
        Tensor::new(p.values.dims().to_vec(), values)?,
        p.grid,
    )
}

/// Ranks patches by significance and keeps the top-z fraction.
///
/// Flattening is row-major; the sort is stable and descending, so equal
/// values keep ascending flat-index order.
pub fn build_mask(p: &PatchSignificanceMap, z: f64) -> Result<PruneMask> {
    validate_ratio(z)?;
    let values = p.values.data();
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite"));
    order.truncate(keep_count(z, n));
    Ok(PruneMask {
        kept: order,
        z,
        grid: p.grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> Tensor {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Tensor::new(dims, data).unwrap()
    }

    fn psm_from(values: Tensor) -> PatchSignificanceMap {
        let dims = values.dims().to_vec();
        let grid = PatchGrid::image(dims[0], dims[1]).unwrap();
        PatchSignificanceMap::new(values, grid).unwrap()
    }

    #[test]
    fn region_proposal_two_channel_mean() {
        let f = ConvFeatureMap::new(Tensor::new(vec![2, 1, 1], vec![1.0, 3.0]).unwrap())
            .unwrap();
        let r = region_proposal(&f);
        assert_eq!(r.values().dims(), &[1, 1]);
        assert_eq!(r.values().data(), &[2.0]);
    }

    #[test]
    fn region_proposal_identical_channels() {
        let m = vec![0.5, -1.0, 2.0, 0.0, 3.5, -0.25];
        let mut data = Vec::new();
        for _ in 0..4 {
            data.extend_from_slice(&m);
        }
        let f = ConvFeatureMap::new(Tensor::new(vec![4, 2, 3], data).unwrap()).unwrap();
        let r = region_proposal(&f);
        for (got, want) in r.values().data().iter().zip(&m) {
            assert!((got - want).abs() <= 1e-6);
        }
    }

    #[test]
    fn region_proposal_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let f = random_tensor(&mut rng, vec![16, 7, 7]);
            let r = region_proposal(&ConvFeatureMap::new(f.clone()).unwrap());
            for y in 0..7 {
                for x in 0..7 {
                    let mut want = 0.0f32;
                    for c in 0..16 {
                        want += f.data()[(c * 7 + y) * 7 + x];
                    }
                    want /= 16.0;
                    let got = r.values().data()[y * 7 + x];
                    assert!((got - want).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn region_proposal_channel_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let k = 8;
        let f = random_tensor(&mut rng, vec![k, 3, 3]);
        let base = region_proposal(&ConvFeatureMap::new(f.clone()).unwrap());
        for _ in 0..10 {
            let mut perm: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let mut data = vec![0.0f32; k * 9];
            for (dst, &src) in perm.iter().enumerate() {
                data[dst * 9..(dst + 1) * 9].copy_from_slice(&f.data()[src * 9..(src + 1) * 9]);
            }
            let shuffled =
                region_proposal(&ConvFeatureMap::new(Tensor::new(vec![k, 3, 3], data).unwrap()).unwrap());
            for (a, b) in base.values().data().iter().zip(shuffled.values().data()) {
                assert!((a - b).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn build_psm_identity_grid_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let f = random_tensor(&mut rng, vec![4, 5, 6]);
        let r = region_proposal(&ConvFeatureMap::new(f).unwrap());
        let psm = build_psm(&r, PatchGrid::image(5, 6).unwrap()).unwrap();
        assert_eq!(psm.values(), r.values());
    }

    #[test]
    fn build_psm_constant_stays_constant() {
        let r = region_proposal(
            &ConvFeatureMap::new(Tensor::new(vec![2, 3, 3], vec![4.0; 18]).unwrap()).unwrap(),
        );
        let psm = build_psm(&r, PatchGrid::image(7, 9).unwrap()).unwrap();
        assert!(psm.values().data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn build_psm_upsample_matches_resize() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let f = random_tensor(&mut rng, vec![3, 7, 7]);
        let r = region_proposal(&ConvFeatureMap::new(f).unwrap());
        let psm = build_psm(&r, PatchGrid::image(14, 14).unwrap()).unwrap();
        let want = bicubic_resize(r.values(), 14, 14).unwrap();
        assert_eq!(psm.values(), &want);
    }

    #[test]
    fn build_psm_video_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let f = random_tensor(&mut rng, vec![2, 4, 3, 3]);
        let r = region_proposal(&ConvFeatureMap::new(f).unwrap());
        let same = build_psm(&r, PatchGrid::video(4, 3, 3).unwrap()).unwrap();
        assert_eq!(same.values(), r.values());

        let c = region_proposal(
            &ConvFeatureMap::new(Tensor::new(vec![2, 2, 2, 2], vec![1.5; 16]).unwrap())
                .unwrap(),
        );
        let up = build_psm(&c, PatchGrid::video(5, 4, 4).unwrap()).unwrap();
        assert!(up.values().data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn build_psm_rejects_grid_kind_mismatch() {
        let r = region_proposal(
            &ConvFeatureMap::new(Tensor::new(vec![1, 2, 2], vec![0.0; 4]).unwrap()).unwrap(),
        );
        assert!(build_psm(&r, PatchGrid::video(2, 2, 2).unwrap()).is_err());
    }

    #[test]
    fn normalize_basic_and_constant() {
        let p = psm_from(Tensor::new(vec![1, 3], vec![0.0, 5.0, 10.0]).unwrap());
        let n = normalize_psm(&p, None).unwrap();
        assert_eq!(n.values().data(), &[0.0, 0.5, 1.0]);

        let c = psm_from(Tensor::new(vec![2, 2], vec![3.0; 4]).unwrap());
        let n = normalize_psm(&c, None).unwrap();
        assert_eq!(n.values().data(), &[0.0; 4]);
    }

    #[test]
    fn normalize_percentile_clip_matches_sort_oracle() {
        let values: Vec<f32> = (0..100).map(|i| i as f32).collect();
        let p = psm_from(Tensor::new(vec![10, 10], values.clone()).unwrap());
        let n = normalize_psm(&p, Some((1.0, 99.0))).unwrap();

        // Oracle: sorted percentiles by linear interpolation, then affine.
        let lo = 0.01f64 * 99.0; // rank -> value 0.99 on 0..99
        let vlo = lo as f32;
        let vhi = (0.99f64 * 99.0) as f32;
        for (i, &got) in n.values().data().iter().enumerate() {
            let clipped = values[i].clamp(vlo, vhi);
            let want = (clipped - vlo) / (vhi - vlo);
            assert!((got - want).abs() <= 1e-6, "i={i} got={got} want={want}");
        }
        // 0 sits below the 1st percentile (0.99) and 99 above the 99th
        // (98.01), so the endpoints saturate exactly.
        assert_eq!(n.values().data()[0], 0.0);
        assert_eq!(n.values().data()[99], 1.0);
    }

    #[test]
    fn normalize_rejects_bad_percentiles() {
        let p = psm_from(Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap());
        assert!(normalize_psm(&p, Some((50.0, 50.0))).is_err());
        assert!(normalize_psm(&p, Some((90.0, 10.0))).is_err());
        assert!(normalize_psm(&p, Some((-1.0, 50.0))).is_err());
    }

    #[test]
    fn normalize_is_idempotent_without_clip() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            let p = psm_from(random_tensor(&mut rng, vec![4, 5]));
            let once = normalize_psm(&p, None).unwrap();
            let twice = normalize_psm(&once, None).unwrap();
            assert_eq!(once.values(), twice.values());
            assert!(once
                .values()
                .data()
                .iter()
                .all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn build_mask_hand_checkable() {
        let p = psm_from(Tensor::new(vec![2, 2], vec![4.0, 1.0, 3.0, 2.0]).unwrap());
        let mask = build_mask(&p, 0.5).unwrap();
        assert_eq!(mask.kept(), &[0, 2]);
    }

    #[test]
    fn build_mask_tie_breaks_to_lowest_index() {
        let p = psm_from(Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap());
        let mask = build_mask(&p, 0.25).unwrap();
        assert_eq!(mask.kept(), &[0]);
    }

    #[test]
    fn build_mask_matches_selection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..100 {
            let p = psm_from(random_tensor(&mut rng, vec![14, 14]));
            let mask = build_mask(&p, 0.45).unwrap();
            let k = (0.45f64 * 196.0).floor() as usize;
            assert_eq!(mask.keep_count(), k);

            // Brute-force selection by (value desc, index asc).
            let values = p.values().data();
            let mut pairs: Vec<(usize, f32)> =
                values.iter().cloned().enumerate().collect();
            pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let want: Vec<usize> = pairs[..k].iter().map(|&(i, _)| i).collect();
            assert_eq!(mask.kept(), want.as_slice());
        }
    }

    #[test]
    fn build_mask_rejects_out_of_range_ratio() {
        let p = psm_from(Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap());
        assert!(build_mask(&p, 0.0).is_err());
        assert!(build_mask(&p, 1.0 + 1e-9).is_err());
        assert!(build_mask(&p, f64::NAN).is_err());
    }

    #[test]
    fn mask_selection_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..100 {
            let p = psm_from(random_tensor(&mut rng, vec![6, 7]));
            let a: f32 = rng.gen_range(0.1..=5.0);
            let b: f32 = rng.gen_range(-3.0..=3.0);
            let scaled = psm_from(
                Tensor::new(
                    vec![6, 7],
                    p.values().data().iter().map(|&v| a * v + b).collect(),
                )
                .unwrap(),
            );
            let z = rng.gen_range(0.05..=1.0);
            let m1 = build_mask(&p, z).unwrap();
            let m2 = build_mask(&scaled, z).unwrap();
            assert_eq!(m1.kept(), m2.kept(), "a={a} b={b} z={z}");
        }
    }

    #[test]
    fn mask_kept_sets_nest_as_z_grows() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..100 {
            let p = psm_from(random_tensor(&mut rng, vec![5, 8]));
            let mut z1 = rng.gen_range(0.02..=1.0f64);
            let mut z2 = rng.gen_range(0.02..=1.0f64);
            if z1 > z2 {
                std::mem::swap(&mut z1, &mut z2);
            }
            let small = build_mask(&p, z1).unwrap();
            let large = build_mask(&p, z2).unwrap();
            let large_set: std::collections::HashSet<usize> =
                large.kept().iter().cloned().collect();
            for i in small.kept() {
                assert!(large_set.contains(i), "z1={z1} z2={z2}");
            }
        }
    }

    #[test]
    fn keep_count_edge_cases() {
        assert_eq!(keep_count(1.0, 196), 196);
        assert_eq!(keep_count(0.5, 196), 98);
        assert_eq!(keep_count(0.45, 196), 88);
        assert_eq!(keep_count(0.001, 196), 1, "floor below one clamps to one");
        assert_eq!(keep_count(0.25, 4), 1);
    }

    #[test]
    fn mask_constructor_validates() {
        let grid = PatchGrid::image(2, 2).unwrap();
        assert!(PruneMask::new(vec![0, 1], 0.5, grid).is_ok());
        assert!(PruneMask::new(vec![], 0.5, grid).is_err());
        assert!(PruneMask::new(vec![4], 0.5, grid).is_err());
        assert!(PruneMask::new(vec![1, 1], 0.5, grid).is_err());
        assert!(PruneMask::new(vec![0], 0.0, grid).is_err());
    }

    #[test]
    fn mask_background_is_ascending_complement() {
        let grid = PatchGrid::image(2, 3).unwrap();
        let mask = PruneMask::new(vec![4, 0, 2], 0.5, grid).unwrap();
        assert_eq!(mask.background(), vec![1, 3, 5]);
    }
}

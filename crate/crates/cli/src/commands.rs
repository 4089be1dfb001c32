//! The four subcommands. Each validates everything it can before any
//! heavy computation, and computes everything before writing any output
//! file, so invalid invocations never leave partial results behind.

use std::path::{Path, PathBuf};

use papr_core::flops::{
    count_hier, count_proposal, count_video_vit, count_vit, FlopReport, ModelSpec,
};
use papr_core::io::{write_heatmap, write_ppm};
use papr_core::psm::{
    build_mask, build_psm, normalize_psm, region_proposal, PatchGrid, PatchSignificanceMap,
};
use papr_core::tensor::Tensor;
use papr_core::token::{vit_forward, vit_forward_pruned};

use crate::common::*;

pub struct PsmArgs {
    pub input: PathBuf,
    pub proposal: PathBuf,
    pub grid: String,
    pub z: f64,
    pub seed: u64,
    pub weights: Option<PathBuf>,
    pub out: PathBuf,
    pub clip_percentiles: Option<String>,
    pub heatmap_scale: usize,
}

pub fn cmd_psm(args: &PsmArgs) -> CliResult<()> {
    // Validation phase.
    validate_ratio(args.z)?;
    let grid = parse_grid(&args.grid)?;
    if matches!(grid, PatchGrid::Video { .. }) {
        return Err(CliError::Usage(
            "psm operates on image grids; use the video subcommand for clips".into(),
        ));
    }
    let clip = args.clip_percentiles.as_deref().map(parse_clip).transpose()?;
    if args.heatmap_scale == 0 {
        return Err(CliError::Usage("--heatmap-scale must be >= 1".into()));
    }
    let spec = load_proposal_spec(&args.proposal)?;
    let image = load_image(&args.input)?;
    if image.dims()[1] != spec.input_h || image.dims()[2] != spec.input_w {
        return Err(CliError::Usage(format!(
            "input is {}x{}, proposal expects {}x{}",
            image.dims()[1],
            image.dims()[2],
            spec.input_h,
            spec.input_w
        )));
    }
    let mut rng = seeded_rng(args.seed);
    let net = build_proposal(&spec, args.weights.as_deref(), &mut rng)?;

    // Compute phase.
    let features = internal(net.features(&image))?;
    let proposal = region_proposal(&features);
    let psm = internal(build_psm(&proposal, grid))?;
    let mask = internal(build_mask(&psm, args.z))?;
    let normalized = internal(normalize_psm(&psm, clip))?;

    // Output phase.
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("mask.txt"), &mask_record(&mask))?;
    write_bytes_via(&args.out.join("heatmap.pgm"), |p| {
        write_heatmap(&normalized, p, args.heatmap_scale)
    })?;
    eprintln!(
        "psm: kept {}/{} patches -> {}",
        mask.keep_count(),
        mask.grid().n_patches(),
        args.out.display()
    );
    Ok(())
}

pub struct E2eArgs {
    pub input: PathBuf,
    pub proposal: PathBuf,
    pub backbone: PathBuf,
    pub z: f64,
    pub seed: u64,
    pub weights: Option<PathBuf>,
    pub no_prune: bool,
    pub out: PathBuf,
}

pub fn cmd_e2e(args: &E2eArgs) -> CliResult<()> {
    // Validation phase.
    validate_ratio(args.z)?;
    let prop_spec = load_proposal_spec(&args.proposal)?;
    let vit_spec = match load_backbone_spec(&args.backbone)? {
        ModelSpec::TokenVit(s) if s.video.is_none() => s,
        ModelSpec::TokenVit(_) => {
            return Err(CliError::Usage(
                "e2e runs image backbones; use the video subcommand for clips".into(),
            ))
        }
        other => {
            return Err(CliError::Usage(format!(
                "e2e requires a token-vit backbone, got {:?}",
                other.family()
            )))
        }
    };
    let image = load_image(&args.input)?;
    if image.dims()[1] != vit_spec.input_h || image.dims()[2] != vit_spec.input_w {
        return Err(CliError::Usage(format!(
            "input is {}x{}, backbone expects {}x{}",
            image.dims()[1],
            image.dims()[2],
            vit_spec.input_h,
            vit_spec.input_w
        )));
    }
    if image.dims()[1] != prop_spec.input_h || image.dims()[2] != prop_spec.input_w {
        return Err(CliError::Usage(format!(
            "input is {}x{}, proposal expects {}x{}",
            image.dims()[1],
            image.dims()[2],
            prop_spec.input_h,
            prop_spec.input_w
        )));
    }
    // Build order is fixed (proposal, then backbone) so a seed pins both.
    let mut rng = seeded_rng(args.seed);
    let net = build_proposal(&prop_spec, args.weights.as_deref(), &mut rng)?;
    let model = build_backbone(&vit_spec, args.weights.as_deref(), &mut rng)?;

    // Compute phase.
    let batch = internal(model.tokenize(&image))?;
    let logits = if args.no_prune {
        internal(vit_forward(&batch, model.blocks(), model.head()))?
    } else {
        let features = internal(net.features(&image))?;
        let psm = internal(build_psm(&region_proposal(&features), model.grid()))?;
        let mask = internal(build_mask(&psm, args.z))?;
        internal(vit_forward_pruned(&batch, model.blocks(), &mask, model.head()))?
    };
    let count_z = if args.no_prune { 1.0 } else { args.z };
    let backbone_report = internal(count_vit(&vit_spec, count_z))?;
    let proposal_report = internal(count_proposal(&prop_spec))?;

    // Output phase.
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("logits.txt"), &logits_record(&logits))?;
    write_reports(&args.out, "flops", &backbone_report, Some(&proposal_report))?;
    eprintln!(
        "e2e: {} tokens -> {}, {:.4} -> {:.4} GMACs (proposal {:.4}), logits in {}",
        backbone_report.tokens_base,
        backbone_report.tokens_pruned,
        backbone_report.gmacs_base(),
        backbone_report.gmacs_pruned(),
        proposal_report.gmacs_base(),
        args.out.display()
    );
    Ok(())
}

pub struct FlopsArgs {
    pub backbone: PathBuf,
    pub z_list: String,
    pub out: Option<PathBuf>,
}

pub fn cmd_flops(args: &FlopsArgs) -> CliResult<()> {
    // Validation phase.
    let spec = load_backbone_spec(&args.backbone)?;
    let zs: CliResult<Vec<f64>> = args
        .z_list
        .split(',')
        .map(|s| {
            let z: f64 = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad keep ratio `{s}`")))?;
            validate_ratio(z)?;
            Ok(z)
        })
        .collect();
    let zs = zs?;

    // Compute phase.
    let mut reports: Vec<(f64, FlopReport)> = Vec::new();
    for &z in &zs {
        let report = match &spec {
            ModelSpec::TokenVit(s) if s.video.is_some() => internal(count_video_vit(s, z))?,
            ModelSpec::TokenVit(s) => internal(count_vit(s, z))?,
            ModelSpec::Hierarchical(s) => internal(count_hier(s, z))?,
            ModelSpec::ProposalConv(s) => internal(count_proposal(s))?,
        };
        reports.push((z, report));
    }

    // Output phase: tables to stdout, files when --out is given.
    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
    }
    for (z, report) in &reports {
        println!("{}", report.to_table());
        if let Some(out) = &args.out {
            let tag = format!("flops_z{z}");
            write_reports(out, &tag, report, None)?;
        }
    }
    Ok(())
}

pub struct VideoArgs {
    pub frames: PathBuf,
    pub proposal: PathBuf,
    pub backbone: PathBuf,
    pub z: f64,
    pub seed: u64,
    pub weights: Option<PathBuf>,
    pub out: PathBuf,
    pub heatmap_scale: usize,
}

pub fn cmd_video(args: &VideoArgs) -> CliResult<()> {
    // Validation phase.
    validate_ratio(args.z)?;
    if args.heatmap_scale == 0 {
        return Err(CliError::Usage("--heatmap-scale must be >= 1".into()));
    }
    let prop_spec = load_proposal_spec(&args.proposal)?;
    let vit_spec = match load_backbone_spec(&args.backbone)? {
        ModelSpec::TokenVit(s) if s.video.is_some() => s,
        _ => {
            return Err(CliError::Usage(
                "video requires a token-vit backbone with input_t and tubelet".into(),
            ))
        }
    };
    let geometry = vit_spec.video.expect("validated above");
    let frame_paths = list_frames(&args.frames)?;
    if frame_paths.len() != geometry.frames {
        return Err(CliError::Usage(format!(
            "found {} frames in {}, backbone expects {}",
            frame_paths.len(),
            args.frames.display(),
            geometry.frames
        )));
    }
    let mut frames = Vec::with_capacity(frame_paths.len());
    for p in &frame_paths {
        let img = load_image(p)?;
        if img.dims()[1] != vit_spec.input_h || img.dims()[2] != vit_spec.input_w {
            return Err(CliError::Usage(format!(
                "frame {} is {}x{}, backbone expects {}x{}",
                p.display(),
                img.dims()[1],
                img.dims()[2],
                vit_spec.input_h,
                vit_spec.input_w
            )));
        }
        if img.dims()[1] != prop_spec.input_h || img.dims()[2] != prop_spec.input_w {
            return Err(CliError::Usage(format!(
                "frame {} is {}x{}, proposal expects {}x{}",
                p.display(),
                img.dims()[1],
                img.dims()[2],
                prop_spec.input_h,
                prop_spec.input_w
            )));
        }
        frames.push(img);
    }
    let mut rng = seeded_rng(args.seed);
    let net = build_proposal(&prop_spec, args.weights.as_deref(), &mut rng)?;

    // Compute phase.
    let clip = stack_frames(&frames)?;
    let features = internal(net.video_features(&clip))?;
    let proposal = region_proposal(&features);
    let (gh, gw) = vit_spec.grid_hw();
    let gt = geometry.frames / geometry.tubelet;
    let grid = usage(PatchGrid::video(gt, gh, gw))?;
    let psm = internal(build_psm(&proposal, grid))?;
    let mask = internal(build_mask(&psm, args.z))?;
    let normalized = internal(normalize_psm(&psm, None))?;
    let report = internal(count_video_vit(&vit_spec, args.z))?;
    let proposal_report = internal(count_proposal(&prop_spec))?;

    // Output phase.
    ensure_out_dir(&args.out)?;
    write_file(&args.out.join("mask.txt"), &mask_record(&mask))?;
    for t in 0..gt {
        let slice = internal(psm_time_slice(&normalized, t, gh, gw))?;
        write_bytes_via(&args.out.join(format!("heatmap_t{t:02}.pgm")), |p| {
            write_heatmap(&slice, p, args.heatmap_scale)
        })?;
    }
    write_reports(&args.out, "flops", &report, Some(&proposal_report))?;
    eprintln!(
        "video: kept {}/{} spatio-temporal patches, {:.2} -> {:.2} GMACs -> {}",
        mask.keep_count(),
        grid.n_patches(),
        report.gmacs_base(),
        report.gmacs_pruned(),
        args.out.display()
    );
    Ok(())
}

fn list_frames(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read frame dir {}: {e}", dir.display())))?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("ppm"))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(CliError::Usage(format!(
            "no .ppm frames in {}",
            dir.display()
        )));
    }
    Ok(frames)
}

fn stack_frames(frames: &[Tensor]) -> CliResult<Tensor> {
    let t = frames.len();
    let (h, w) = (frames[0].dims()[1], frames[0].dims()[2]);
    let mut data = vec![0.0f32; 3 * t * h * w];
    for (ft, frame) in frames.iter().enumerate() {
        for c in 0..3 {
            let src = &frame.data()[c * h * w..(c + 1) * h * w];
            let off = (c * t + ft) * h * w;
            data[off..off + h * w].copy_from_slice(src);
        }
    }
    internal(Tensor::new(vec![3, t, h, w], data))
}

fn psm_time_slice(
    psm: &PatchSignificanceMap,
    t: usize,
    h: usize,
    w: usize,
) -> papr_core::Result<PatchSignificanceMap> {
    let frame = h * w;
    let values = psm.values().data()[t * frame..(t + 1) * frame].to_vec();
    PatchSignificanceMap::new(
        Tensor::new(vec![h, w], values)?,
        PatchGrid::image(h, w)?,
    )
}

// flops.txt holds the aligned table; flops.kv the machine records, with
// the proposal network's cost appended under a `proposal.` prefix.
fn write_reports(
    out: &Path,
    tag: &str,
    report: &FlopReport,
    proposal: Option<&FlopReport>,
) -> CliResult<()> {
    let mut table = report.to_table();
    let mut kv = report.to_kv();
    if let Some(p) = proposal {
        table.push('\n');
        table.push_str(&p.to_table());
        for line in p.to_kv().lines() {
            kv.push_str(&format!("proposal.{line}\n"));
        }
    }
    write_file(&out.join(format!("{tag}.txt")), &table)?;
    write_file(&out.join(format!("{tag}.kv")), &kv)?;
    Ok(())
}

/// Writes a deterministic synthetic test image; handy for exercising the
/// pipeline without external assets.
pub struct GenImageArgs {
    pub out: PathBuf,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

pub fn cmd_gen_image(args: &GenImageArgs) -> CliResult<()> {
    use rand_chacha::rand_core::RngCore;
    if args.width == 0 || args.height == 0 {
        return Err(CliError::Usage("image extents must be positive".into()));
    }
    let (h, w) = (args.height, args.width);
    let mut rng = seeded_rng(args.seed);
    // Smooth gradient plus a bright off-center blob and noise, so masks
    // have obvious structure to find.
    let mut data = vec![0.0f32; 3 * h * w];
    let (cy, cx) = (h as f32 * 0.4, w as f32 * 0.6);
    let sigma = (h.min(w) as f32) * 0.18;
    for y in 0..h {
        for x in 0..w {
            let d2 = ((y as f32 - cy).powi(2) + (x as f32 - cx).powi(2)) / (2.0 * sigma * sigma);
            let blob = (-d2).exp();
            let noise = (rng.next_u32() as f32 / u32::MAX as f32 - 0.5) * 0.08;
            let base = 0.15 + 0.2 * (x as f32 / w as f32);
            data[y * w + x] = (base + 0.8 * blob + noise).clamp(0.0, 1.0);
            data[(h + y) * w + x] = (base + 0.6 * blob - noise).clamp(0.0, 1.0);
            data[(2 * h + y) * w + x] = (0.3 + 0.3 * blob + noise).clamp(0.0, 1.0);
        }
    }
    let image = internal(Tensor::new(vec![3, h, w], data))?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    write_bytes_via(&args.out, |p| write_ppm(p, &image))?;
    eprintln!("gen-image: wrote {}x{} -> {}", w, h, args.out.display());
    Ok(())
}

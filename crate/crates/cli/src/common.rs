//! Shared plumbing for the subcommands: error-to-exit-code mapping,
//! input loading, model building, and record writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use papr_core::flops::{ModelSpec, ProposalSpec, VitSpec};
use papr_core::io::{load_weights, read_model_config, read_ppm, read_tensor};
use papr_core::model::{ProposalNet, VitModel};
use papr_core::psm::{PatchGrid, PruneMask};
use papr_core::tensor::Tensor;

/// Usage/validation problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps validation-phase failures as usage errors.
pub fn usage<T>(r: papr_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

/// Wraps compute-phase failures as internal errors.
pub fn internal<T>(r: papr_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Internal(e.to_string()))
}

pub fn validate_ratio(z: f64) -> CliResult<()> {
    if z.is_finite() && z > 0.0 && z <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "keep ratio --z must be in (0, 1], got {z}"
        )))
    }
}

pub fn parse_clip(s: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "--clip-percentiles expects `lo,hi`, got `{s}`"
        )));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad percentile `{}`", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad percentile `{}`", parts[1])))?;
    Ok((lo, hi))
}

pub fn parse_grid(s: &str) -> CliResult<PatchGrid> {
    let parts: CliResult<Vec<usize>> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad grid extent `{p}`")))
        })
        .collect();
    let parts = parts?;
    match parts.as_slice() {
        [h, w] => usage(PatchGrid::image(*h, *w)),
        [t, h, w] => usage(PatchGrid::video(*t, *h, *w)),
        _ => Err(CliError::Usage(format!(
            "--grid expects `h,w` or `t,h,w`, got `{s}`"
        ))),
    }
}

/// Loads a `[3, H, W]` image from a PPM or tensor container file.
pub fn load_image(path: &Path) -> CliResult<Tensor> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let image = match ext {
        "ppm" => usage(read_ppm(path))?,
        "ptsr" => usage(read_tensor(path))?,
        other => {
            return Err(CliError::Usage(format!(
                "unsupported input extension `{other}` (expected .ppm or .ptsr)"
            )))
        }
    };
    if image.rank() != 3 || image.dims()[0] != 3 {
        return Err(CliError::Usage(format!(
            "input must be a [3, H, W] image, got {:?}",
            image.dims()
        )));
    }
    Ok(image)
}

pub fn load_proposal_spec(path: &Path) -> CliResult<ProposalSpec> {
    match usage(read_model_config(path))? {
        ModelSpec::ProposalConv(s) => Ok(s),
        other => Err(CliError::Usage(format!(
            "--proposal config must have family proposal-conv, got {:?}",
            other.family()
        ))),
    }
}

pub fn load_backbone_spec(path: &Path) -> CliResult<ModelSpec> {
    usage(read_model_config(path))
}

/// Builds the proposal net from a weights directory (entries prefixed
/// `proposal.`) or from the seeded initializer.
pub fn build_proposal(
    spec: &ProposalSpec,
    weights: Option<&Path>,
    rng: &mut ChaCha8Rng,
) -> CliResult<ProposalNet> {
    match weights {
        Some(dir) => {
            let mut map = usage(load_weights(dir))?;
            let net = usage(ProposalNet::from_weights(spec, &mut map, "proposal."))?;
            Ok(net)
        }
        None => usage(ProposalNet::seeded(spec, rng)),
    }
}

/// Builds the backbone transformer from the same weights directory
/// (entries prefixed `backbone.`) or from the seeded initializer.
pub fn build_backbone(
    spec: &VitSpec,
    weights: Option<&Path>,
    rng: &mut ChaCha8Rng,
) -> CliResult<VitModel> {
    match weights {
        Some(dir) => {
            let mut map = usage(load_weights(dir))?;
            let model = usage(VitModel::from_weights(spec, &mut map, "backbone."))?;
            Ok(model)
        }
        None => usage(VitModel::seeded(spec, rng)),
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ensure_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create --out {}: {e}", out.display())))
}

/// Mask record: grid geometry, ratio, count, then kept indices in
/// significance order. Stable bytes for golden files.
pub fn mask_record(mask: &PruneMask) -> String {
    let mut out = String::new();
    let ext = mask.grid().extents();
    let ext: Vec<String> = ext.iter().map(|e| e.to_string()).collect();
    let _ = writeln!(out, "grid = {}", ext.join(" "));
    let _ = writeln!(out, "z = {}", mask.keep_ratio());
    let _ = writeln!(out, "keep_count = {}", mask.keep_count());
    let kept: Vec<String> = mask.kept().iter().map(|i| i.to_string()).collect();
    let _ = writeln!(out, "kept = {}", kept.join(" "));
    out
}

/// Logits record: one shortest-round-trip float per line.
pub fn logits_record(logits: &Tensor) -> String {
    let mut out = String::new();
    for v in logits.data() {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_file(path: &PathBuf, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn write_bytes_via<F>(path: &PathBuf, f: F) -> CliResult<()>
where
    F: FnOnce(&Path) -> papr_core::Result<()>,
{
    f(path).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

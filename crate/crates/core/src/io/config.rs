//! Line-oriented `key = value` model config files.
//!
//! `#` starts a comment, blank lines are ignored, every key may appear
//! once, and unknown keys are rejected. A file may instead hold a single
//! `preset = <name>` line naming a built-in description. Serialization is
//! canonical, so parse -> serialize -> parse is a fixed point.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::flops::{
    preset, ConvLayerSpec, HierKind, HierSpec, HierStage, ModelSpec, ProposalSpec, VideoGeometry,
    VitSpec,
};

struct ConfigMap {
    entries: BTreeMap<String, String>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl ConfigMap {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Format(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Format(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigMap {
            entries,
            consumed: Default::default(),
        })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Format(format!("missing required key `{key}`")))
    }

    fn get_opt(&self, key: &str) -> Option<&str> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|s| s.as_str())
    }

    fn finish(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        let unknown: Vec<&String> = self
            .entries
            .keys()
            .filter(|k| !consumed.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("unknown keys: {unknown:?}")))
        }
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Format(format!("key `{key}`: `{v}` is not a non-negative integer")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Format(format!("key `{key}`: `{v}` is not a number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Format(format!(
            "key `{key}`: `{v}` is not `true` or `false`"
        ))),
    }
}

fn parse_usize_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| parse_usize(key, s.trim()))
        .collect()
}

fn parse_vit(cfg: &ConfigMap) -> Result<VitSpec> {
    let spec = VitSpec {
        depth: parse_usize("depth", cfg.get("depth")?)?,
        dim: parse_usize("dim", cfg.get("dim")?)?,
        heads: parse_usize("heads", cfg.get("heads")?)?,
        mlp_ratio: parse_f64("mlp_ratio", cfg.get("mlp_ratio")?)?,
        patch_size: parse_usize("patch_size", cfg.get("patch_size")?)?,
        input_h: parse_usize("input_h", cfg.get("input_h")?)?,
        input_w: parse_usize("input_w", cfg.get("input_w")?)?,
        class_token: parse_bool("class_token", cfg.get("class_token")?)?,
        num_classes: parse_usize("num_classes", cfg.get("num_classes")?)?,
        video: match (cfg.get_opt("input_t"), cfg.get_opt("tubelet")) {
            (Some(t), Some(tb)) => Some(VideoGeometry {
                frames: parse_usize("input_t", t)?,
                tubelet: parse_usize("tubelet", tb)?,
            }),
            (None, None) => None,
            _ => {
                return Err(Error::Format(
                    "`input_t` and `tubelet` must be given together".into(),
                ))
            }
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_hier(cfg: &ConfigMap) -> Result<HierSpec> {
    let kind = match cfg.get("block_kind")? {
        "convnext" => HierKind::ConvNextLike {
            dw_kernel: parse_usize("dw_kernel", cfg.get("dw_kernel")?)?,
        },
        "swin" => HierKind::SwinLike {
            window: parse_usize("window", cfg.get("window")?)?,
        },
        other => {
            return Err(Error::Format(format!(
                "block_kind must be `convnext` or `swin`, got `{other}`"
            )))
        }
    };
    let depths = parse_usize_list("depths", cfg.get("depths")?)?;
    let dims = parse_usize_list("dims", cfg.get("dims")?)?;
    if depths.len() != dims.len() {
        return Err(Error::Format(format!(
            "depths ({}) and dims ({}) must have equal length",
            depths.len(),
            dims.len()
        )));
    }
    let spec = HierSpec {
        kind,
        stages: depths
            .into_iter()
            .zip(dims)
            .map(|(blocks, dim)| HierStage { blocks, dim })
            .collect(),
        mlp_ratio: parse_f64("mlp_ratio", cfg.get("mlp_ratio")?)?,
        stem_stride: parse_usize("stem_stride", cfg.get("stem_stride")?)?,
        input_h: parse_usize("input_h", cfg.get("input_h")?)?,
        input_w: parse_usize("input_w", cfg.get("input_w")?)?,
        num_classes: parse_usize("num_classes", cfg.get("num_classes")?)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_proposal(cfg: &ConfigMap) -> Result<ProposalSpec> {
    let input_h = parse_usize("input_h", cfg.get("input_h")?)?;
    let input_w = parse_usize("input_w", cfg.get("input_w")?)?;
    let channels = parse_usize_list("channels", cfg.get("channels")?)?;
    let kernels = parse_usize_list("kernels", cfg.get("kernels")?)?;
    let strides = parse_usize_list("strides", cfg.get("strides")?)?;
    let paddings = parse_usize_list("paddings", cfg.get("paddings")?)?;
    let n = channels.len();
    if kernels.len() != n || strides.len() != n || paddings.len() != n {
        return Err(Error::Format(
            "channels/kernels/strides/paddings must have equal length".into(),
        ));
    }
    let fc = match cfg.get_opt("num_classes") {
        Some(v) => Some(parse_usize("num_classes", v)?),
        None => None,
    };

    let mut layers = Vec::with_capacity(n);
    let (mut c, mut h, mut w) = (3usize, input_h, input_w);
    for i in 0..n {
        let layer = ConvLayerSpec {
            name: format!("conv{i}"),
            in_c: c,
            out_c: channels[i],
            kernel: kernels[i],
            stride: strides[i],
            padding: paddings[i],
            groups: 1,
            in_h: h,
            in_w: w,
        };
        layer.validate()?;
        let (oh, ow) = layer.out_extents();
        c = channels[i];
        h = oh;
        w = ow;
        layers.push(layer);
    }
    let spec = ProposalSpec {
        name: "proposal-conv".into(),
        input_h,
        input_w,
        fc: fc.map(|classes| (c, classes)),
        layers,
        sequential: true,
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses config text into a model description.
pub fn parse_model_config(text: &str) -> Result<ModelSpec> {
    let cfg = ConfigMap::parse(text)?;
    if let Some(name) = cfg.get_opt("preset") {
        if cfg.entries.len() != 1 {
            return Err(Error::Format(
                "`preset` must be the only key in a config".into(),
            ));
        }
        return preset(name).ok_or_else(|| Error::Format(format!("unknown preset `{name}`")));
    }
    let spec = match cfg.get("family")? {
        "token-vit" => ModelSpec::TokenVit(parse_vit(&cfg)?),
        "hierarchical" => ModelSpec::Hierarchical(parse_hier(&cfg)?),
        "proposal-conv" => ModelSpec::ProposalConv(parse_proposal(&cfg)?),
        other => {
            return Err(Error::Format(format!(
                "family must be token-vit, hierarchical or proposal-conv, got `{other}`"
            )))
        }
    };
    cfg.finish()?;
    Ok(spec)
}

fn fmt_ratio(r: f64) -> String {
    // Shortest round-trip float formatting keeps the fixed point exact.
    format!("{r}")
}

/// Canonical serialization: fixed key order, one `key = value` per line.
pub fn serialize_model_config(spec: &ModelSpec) -> String {
    match spec {
        ModelSpec::TokenVit(s) => {
            let mut out = String::from("family = token-vit\n");
            out.push_str(&format!("depth = {}\n", s.depth));
            out.push_str(&format!("dim = {}\n", s.dim));
            out.push_str(&format!("heads = {}\n", s.heads));
            out.push_str(&format!("mlp_ratio = {}\n", fmt_ratio(s.mlp_ratio)));
            out.push_str(&format!("patch_size = {}\n", s.patch_size));
            out.push_str(&format!("input_h = {}\n", s.input_h));
            out.push_str(&format!("input_w = {}\n", s.input_w));
            out.push_str(&format!("class_token = {}\n", s.class_token));
            out.push_str(&format!("num_classes = {}\n", s.num_classes));
            if let Some(v) = s.video {
                out.push_str(&format!("input_t = {}\n", v.frames));
                out.push_str(&format!("tubelet = {}\n", v.tubelet));
            }
            out
        }
        ModelSpec::Hierarchical(s) => {
            let mut out = String::from("family = hierarchical\n");
            match s.kind {
                HierKind::ConvNextLike { dw_kernel } => {
                    out.push_str("block_kind = convnext\n");
                    out.push_str(&format!("dw_kernel = {dw_kernel}\n"));
                }
                HierKind::SwinLike { window } => {
                    out.push_str("block_kind = swin\n");
                    out.push_str(&format!("window = {window}\n"));
                }
            }
            let depths: Vec<String> = s.stages.iter().map(|st| st.blocks.to_string()).collect();
            let dims: Vec<String> = s.stages.iter().map(|st| st.dim.to_string()).collect();
            out.push_str(&format!("depths = {}\n", depths.join(",")));
            out.push_str(&format!("dims = {}\n", dims.join(",")));
            out.push_str(&format!("mlp_ratio = {}\n", fmt_ratio(s.mlp_ratio)));
            out.push_str(&format!("stem_stride = {}\n", s.stem_stride));
            out.push_str(&format!("input_h = {}\n", s.input_h));
            out.push_str(&format!("input_w = {}\n", s.input_w));
            out.push_str(&format!("num_classes = {}\n", s.num_classes));
            out
        }
        ModelSpec::ProposalConv(s) => {
            if s.name != "proposal-conv" {
                // Branchy built-ins round-trip through their preset name.
                return format!("preset = {}\n", s.name);
            }
            let mut out = String::from("family = proposal-conv\n");
            out.push_str(&format!("input_h = {}\n", s.input_h));
            out.push_str(&format!("input_w = {}\n", s.input_w));
            let col = |f: fn(&ConvLayerSpec) -> usize| -> String {
                s.layers
                    .iter()
                    .map(|l| f(l).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            out.push_str(&format!("channels = {}\n", col(|l| l.out_c)));
            out.push_str(&format!("kernels = {}\n", col(|l| l.kernel)));
            out.push_str(&format!("strides = {}\n", col(|l| l.stride)));
            out.push_str(&format!("paddings = {}\n", col(|l| l.padding)));
            if let Some((_, classes)) = s.fc {
                out.push_str(&format!("num_classes = {classes}\n"));
            }
            out
        }
    }
}

pub fn read_model_config(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read config {}: {e}", path.display())))?;
    parse_model_config(&text)
}

pub fn write_model_config(path: &Path, spec: &ModelSpec) -> Result<()> {
    fs::write(path, serialize_model_config(spec))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flops::PRESET_NAMES;

    const VIT_TEXT: &str = "\
# toy transformer
family = token-vit
depth = 2
dim = 32
heads = 4
mlp_ratio = 4
patch_size = 16
input_h = 64
input_w = 64
class_token = true
num_classes = 10
";

    #[test]
    fn parses_vit_config() {
        let spec = parse_model_config(VIT_TEXT).unwrap();
        match spec {
            ModelSpec::TokenVit(s) => {
                assert_eq!(s.depth, 2);
                assert_eq!(s.grid_hw(), (4, 4));
                assert!(s.class_token);
                assert!(s.video.is_none());
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn rejects_unknown_missing_and_duplicate_keys() {
        let unknown = format!("{VIT_TEXT}window = 7\n");
        assert!(parse_model_config(&unknown).is_err());
        let missing = VIT_TEXT.replace("depth = 2\n", "");
        assert!(parse_model_config(&missing).is_err());
        let dup = format!("{VIT_TEXT}depth = 3\n");
        assert!(parse_model_config(&dup).is_err());
    }

    #[test]
    fn parse_serialize_parse_is_fixed_point() {
        let round = |text: &str| {
            let spec = parse_model_config(text).unwrap();
            let text2 = serialize_model_config(&spec);
            let spec2 = parse_model_config(&text2).unwrap();
            assert_eq!(spec, spec2);
            assert_eq!(text2, serialize_model_config(&spec2));
        };
        round(VIT_TEXT);
        round(
            "family = hierarchical\nblock_kind = swin\nwindow = 7\ndepths = 2,2\ndims = 32,64\nmlp_ratio = 4\nstem_stride = 4\ninput_h = 56\ninput_w = 56\nnum_classes = 5\n",
        );
        round(
            "family = proposal-conv\ninput_h = 32\ninput_w = 32\nchannels = 4,8\nkernels = 3,3\nstrides = 2,2\npaddings = 1,1\nnum_classes = 4\n",
        );
        for name in PRESET_NAMES {
            round(&format!("preset = {name}\n"));
        }
    }

    #[test]
    fn preset_must_stand_alone() {
        assert!(parse_model_config("preset = vit-b-16\ndepth = 2\n").is_err());
        assert!(parse_model_config("preset = no-such-model\n").is_err());
        let spec = parse_model_config("preset = vit-b-16\n").unwrap();
        assert!(matches!(spec, ModelSpec::TokenVit(_)));
    }

    #[test]
    fn video_keys_must_pair() {
        let with_t = format!("{}input_t = 16\n", VIT_TEXT.replace("class_token = true", "class_token = false"));
        assert!(parse_model_config(&with_t).is_err());
        let both = format!(
            "{}input_t = 16\ntubelet = 2\n",
            VIT_TEXT.replace("class_token = true", "class_token = false")
        );
        let spec = parse_model_config(&both).unwrap();
        match spec {
            ModelSpec::TokenVit(s) => assert_eq!(s.n_patches(), 8 * 16),
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn proposal_layers_chain_from_rgb() {
        let spec = parse_model_config(
            "family = proposal-conv\ninput_h = 64\ninput_w = 64\nchannels = 8,16\nkernels = 3,3\nstrides = 2,2\npaddings = 1,1\n",
        )
        .unwrap();
        match spec {
            ModelSpec::ProposalConv(s) => {
                assert_eq!(s.layers[0].in_c, 3);
                assert_eq!(s.layers[1].in_c, 8);
                assert_eq!(s.out_feature_extents(), (16, 16, 16));
                assert!(s.fc.is_none());
                assert!(s.sequential);
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn validation_errors_surface_through_parse() {
        // 224 not divisible by patch 15.
        let bad = VIT_TEXT.replace("patch_size = 16", "patch_size = 15");
        assert!(parse_model_config(&bad).is_err());
    }
}

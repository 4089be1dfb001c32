//! Weight directories: a `manifest.txt` of `name = file` lines mapping
//! layer names to tensor container files in the same directory.
//!
//! Loaders consume entries by name with an expected shape; a model
//! constructor finishes by checking that nothing is left over, so a
//! manifest can neither silently miss nor smuggle parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::tensor_file::{read_tensor, write_tensor};

#[derive(Debug)]
pub struct WeightMap {
    entries: BTreeMap<String, Tensor>,
}

impl WeightMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }

    /// Removes and returns the named tensor, checking its shape.
    pub fn take(&mut self, name: &str, dims: &[usize]) -> Result<Tensor> {
        let t = self
            .entries
            .remove(name)
            .ok_or_else(|| Error::Format(format!("missing weight entry `{name}`")))?;
        if t.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "weight `{name}` has shape {:?}, expected {dims:?}",
                t.dims()
            )));
        }
        Ok(t)
    }

    /// Errors when entries remain unconsumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "unused weight entries: {:?}",
                self.entries.keys().collect::<Vec<_>>()
            )))
        }
    }
}

/// Reads `dir/manifest.txt` and every tensor file it names.
pub fn load_weights(dir: &Path) -> Result<WeightMap> {
    let manifest = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", manifest.display())))?;
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
        let (name, file) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("manifest line {}: expected `name = file`", lineno + 1))
        })?;
        let name = name.trim().to_string();
        let file = file.trim();
        if name.is_empty() || file.is_empty() {
            return Err(Error::Format(format!(
                "manifest line {}: empty name or file",
                lineno + 1
            )));
        }
        let tensor = read_tensor(&dir.join(file))?;
        if entries.insert(name.clone(), tensor).is_some() {
            return Err(Error::Format(format!("duplicate manifest entry `{name}`")));
        }
    }
    Ok(WeightMap { entries })
}

/// Writes tensors plus a manifest into `dir`; file names are derived from
/// entry names by replacing path-hostile characters.
pub fn save_weights(dir: &Path, entries: &[(String, &Tensor)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (name, tensor) in entries {
        let file = format!(
            "{}.ptsr",
            name.replace(|c: char| !c.is_ascii_alphanumeric(), "_")
        );
        write_tensor(&dir.join(&file), tensor)?;
        manifest.push_str(&format!("{name} = {file}\n"));
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_take_finish() {
        let dir = tempfile::tempdir().unwrap();
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![3], vec![0.5, -0.5, 0.0]).unwrap();
        save_weights(
            dir.path(),
            &[("blocks.0.qkv.weight".into(), &a), ("head.bias".into(), &b)],
        )
        .unwrap();

        let mut map = load_weights(dir.path()).unwrap();
        assert_eq!(map.names().len(), 2);
        let got = map.take("blocks.0.qkv.weight", &[2, 2]).unwrap();
        assert_eq!(got, a);
        assert!(map.take("head.bias", &[4]).is_err(), "shape mismatch");
    }

    #[test]
    fn finish_rejects_leftovers_and_missing_entries_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = Tensor::new(vec![1], vec![1.0]).unwrap();
        save_weights(dir.path(), &[("extra".into(), &a)]).unwrap();
        let mut map = load_weights(dir.path()).unwrap();
        assert!(map.take("nope", &[1]).is_err());
        assert!(map.finish().is_err(), "leftover `extra` must be rejected");
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_weights(dir.path()).is_err(), "missing manifest");
        std::fs::write(dir.path().join("manifest.txt"), "just-a-name\n").unwrap();
        assert!(load_weights(dir.path()).is_err());
        std::fs::write(dir.path().join("manifest.txt"), "w = missing.ptsr\n").unwrap();
        assert!(load_weights(dir.path()).is_err());
    }
}

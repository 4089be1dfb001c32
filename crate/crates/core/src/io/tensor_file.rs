//! Binary tensor container.
//!
//! Layout: magic `PTSR`, version byte (1), dtype byte (0 = float32
//! little-endian), ndim byte, then ndim u64 little-endian extents, then
//! the row-major payload. Round trips are bit-identical for any finite
//! float32 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"PTSR";
pub const VERSION: u8 = 1;
pub const DTYPE_F32_LE: u8 = 0;

pub fn write_tensor_to(writer: &mut dyn Write, t: &Tensor) -> Result<()> {
    if t.rank() > u8::MAX as usize {
        return Err(Error::Format("tensor rank exceeds container limit".into()));
    }
    writer.write_all(&MAGIC)?;
    writer.write_all(&[VERSION, DTYPE_F32_LE, t.rank() as u8])?;
    for &d in t.dims() {
        writer.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_from(reader: &mut dyn Read) -> Result<Tensor> {
    let mut header = [0u8; 7];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("truncated tensor file header".into()))?;
    if header[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            &header[..4],
            MAGIC
        )));
    }
    if header[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", header[4])));
    }
    if header[5] != DTYPE_F32_LE {
        return Err(Error::Format(format!("unsupported dtype {}", header[5])));
    }
    let ndim = header[6] as usize;
    if ndim == 0 {
        return Err(Error::Format("tensor file has zero dimensions".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut buf8 = [0u8; 8];
    for _ in 0..ndim {
        reader
            .read_exact(&mut buf8)
            .map_err(|_| Error::Format("truncated tensor file extents".into()))?;
        let d = u64::from_le_bytes(buf8);
        if d == 0 || d > usize::MAX as u64 {
            return Err(Error::Format(format!("invalid extent {d}")));
        }
        dims.push(d as usize);
    }
    let numel: usize = dims.iter().product();
    let mut payload = vec![0u8; numel * 4];
    reader
        .read_exact(&mut payload)
        .map_err(|_| Error::Format("truncated tensor file payload".into()))?;
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after tensor payload".into()));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut writer, t)?;
    writer.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut reader = BufReader::new(File::open(path)?);
    read_tensor_from(&mut reader)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn roundtrip(t: &Tensor) -> Tensor {
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, t).unwrap();
        read_tensor_from(&mut &buf[..]).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(179);
        for _ in 0..50 {
            let rank = rng.gen_range(1..=4);
            let dims: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=5)).collect();
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|_| rng.gen_range(-1e6..=1e6)).collect();
            let t = Tensor::new(dims, data).unwrap();
            let back = roundtrip(&t);
            assert_eq!(t.dims(), back.dims());
            let a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_layout_is_exact() {
        let t = Tensor::new(vec![2, 1], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();
        let mut want = b"PTSR".to_vec();
        want.extend_from_slice(&[1, 0, 2]);
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(buf, want);
    }

    #[test]
    fn rejects_corrupt_inputs() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor_to(&mut buf, &t).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_tensor_from(&mut &bad_magic[..]).is_err());

        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(read_tensor_from(&mut &bad_version[..]).is_err());

        let truncated = &buf[..buf.len() - 2];
        assert!(read_tensor_from(&mut &truncated[..]).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_tensor_from(&mut &trailing[..]).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ptsr");
        let t = Tensor::new(vec![2, 3], vec![0.5, -0.25, 1e-30, 3.0, -7.5, 0.0]).unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(t, back);
    }
}

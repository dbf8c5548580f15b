//! Binary checkpoint format.
//!
//! Layout: magic `NUMCKPT\0`, format version (u32 LE), seed (u64 LE),
//! tensor count (u32 LE), then per tensor: name length (u32 LE), UTF-8 name,
//! rank (u32 LE), dims (u64 LE each), row-major little-endian f64 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"NUMCKPT\0";
const VERSION: u32 = 1;

/// A parsed checkpoint: the seed it was produced under and its named tensors.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub seed: u64,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet) -> Self {
        Checkpoint {
            seed: params.seed(),
            tensors: params
                .iter()
                .map(|(name, t)| (name.to_string(), t.clone()))
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, tensor) in &self.tensors {
            let bytes = name.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(tensor.rank() as u32).to_le_bytes())?;
            for &d in tensor.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in tensor.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic in {}: not a checkpoint file",
                path.display()
            )));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {VERSION})"
            )));
        }
        let seed = read_u64(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for i in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| Error::Checkpoint(format!("tensor {i}: name is not UTF-8")))?;
            let rank = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(&mut r)? as usize);
            }
            let n: usize = shape.iter().product();
            let mut values = vec![0.0f64; n];
            let mut buf = [0u8; 8];
            for v in values.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            tensors.push((name, Tensor::new(shape, values).expect("sized by product")));
        }
        Ok(Checkpoint { seed, tensors })
    }

    /// Copy values into an already-registered parameter set. Every checkpoint
    /// tensor must match a registered parameter by name and shape, and every
    /// parameter must be covered.
    pub fn load_into(&self, params: &mut ParamSet) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} tensors, model registers {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (name, tensor) in &self.tensors {
            let id = params
                .by_name(name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor `{name}`")))?;
            let target = params.get_mut(id);
            if target.shape() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}`: shape {:?} does not match registered {:?}",
                    tensor.shape(),
                    target.shape()
                )));
            }
            target.values_mut().copy_from_slice(tensor.values());
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("numcore-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.ckpt");

        let mut ps = ParamSet::new(99);
        ps.add_glorot("a.w", vec![3, 4]);
        ps.add_uniform("b.table", vec![7, 2], 0.25);
        ps.add_const("a.b", vec![3], 0.0);

        Checkpoint::from_params(&ps).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.seed, 99);

        let mut fresh = ParamSet::new(1);
        fresh.add_zeros("a.w", vec![3, 4]);
        fresh.add_zeros("b.table", vec![7, 2]);
        fresh.add_zeros("a.b", vec![3]);
        loaded.load_into(&mut fresh).unwrap();
        for (orig, new) in ps.iter().zip(fresh.iter()) {
            assert_eq!(orig.1.values(), new.1.values());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join("numcore-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"NOTACKPTxxxxxxxxxxxx").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("numcore-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("shape.ckpt");
        let mut ps = ParamSet::new(0);
        ps.add_zeros("w", vec![2, 2]);
        Checkpoint::from_params(&ps).save(&path).unwrap();

        let mut other = ParamSet::new(0);
        other.add_zeros("w", vec![3, 2]);
        assert!(Checkpoint::load(&path).unwrap().load_into(&mut other).is_err());
    }
}

//! Binary parameter snapshots (`.imck`).
//!
//! Layout, all integers little-endian `u32`: magic `IMCK`, version, tensor
//! count, then per tensor in name order: name length, UTF-8 name, rank,
//! dims, and the values as `f64` LE.

use std::io::{Read, Write};

use super::params::ParamStore;
use super::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(params: &ParamStore, mut w: W) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, p) in params.iter() {
        w.write_all(&(p.name.len() as u32).to_le_bytes())?;
        w.write_all(p.name.as_bytes())?;
        w.write_all(&(p.shape.len() as u32).to_le_bytes())?;
        for &d in &p.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * p.value.len());
        for v in &p.value {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn checkpoint_bytes(params: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    write_checkpoint(params, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamStore, NnError> {
    let mut magic = [0u8; 4];
    read(&mut r, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        if len > 4096 {
            return Err(NnError::Checkpoint(format!("name length {len} too long")));
        }
        let mut name = vec![0u8; len];
        read(&mut r, &mut name)?;
        let name = String::from_utf8(name).map_err(|_| NnError::Checkpoint("name is not UTF-8".into()))?;
        let rank = read_u32(&mut r)? as usize;
        if rank > 8 {
            return Err(NnError::Checkpoint(format!("{name}: rank {rank} too large")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<_, _>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.filter(|&n| n <= 1 << 28).ok_or_else(|| NnError::Checkpoint(format!("{name}: shape too large")))?;
        let mut raw = vec![0u8; 8 * n];
        read(&mut r, &mut raw)?;
        let value = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        entries.push((name, shape, value));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| NnError::Checkpoint(e.to_string()))? != 0 {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    ParamStore::from_values(entries)
}

/// Loads a checkpoint and checks it has exactly the tensors of `expected`.
pub fn read_checkpoint_matching<R: Read>(r: R, expected: &ParamStore) -> Result<ParamStore, NnError> {
    let p = read_checkpoint(r)?;
    for (_, e) in expected.iter() {
        let id = p.id(&e.name).map_err(|_| NnError::Checkpoint(format!("missing tensor {}", e.name)))?;
        if p.shape(id) != e.shape.as_slice() {
            return Err(NnError::Checkpoint(format!(
                "{}: shape {:?}, expected {:?}",
                e.name,
                p.shape(id),
                e.shape
            )));
        }
    }
    if p.len() != expected.len() {
        return Err(NnError::Checkpoint(format!("{} tensors, expected {}", p.len(), expected.len())));
    }
    Ok(p)
}

fn read<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|_| NnError::Checkpoint("truncated".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    read(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ParamSpec};

    fn store() -> ParamStore {
        init_params(&[ParamSpec::matrix("a.w", 3, 4), ParamSpec::bias("a.b", 3), ParamSpec::bias("z", 2)], 5).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut s = store();
        let id = s.id("z").unwrap();
        s.param_mut(id).value = vec![f64::MIN_POSITIVE, -0.0];
        let bytes = checkpoint_bytes(&s);
        assert_eq!(&bytes[..4], b"IMCK");
        let back = read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(checkpoint_bytes(&back), bytes);
        assert_eq!(back.value(id)[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = checkpoint_bytes(&store());
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'J';
        assert!(read_checkpoint(&magic[..]).is_err());
        let mut version = bytes;
        version[4] = 9;
        assert!(read_checkpoint(&version[..]).is_err());
    }

    #[test]
    fn matching_checks_shapes() {
        let s = store();
        let other = init_params(&[ParamSpec::matrix("a.w", 4, 3), ParamSpec::bias("a.b", 3), ParamSpec::bias("z", 2)], 5)
            .unwrap();
        let bytes = checkpoint_bytes(&other);
        assert!(read_checkpoint_matching(&bytes[..], &s).is_err());
        assert!(read_checkpoint_matching(&checkpoint_bytes(&s)[..], &s).is_ok());
    }
}

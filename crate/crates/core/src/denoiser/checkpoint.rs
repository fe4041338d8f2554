//! Checkpoint layout: magic `OTDNCKPT`, format version (u32 LE), descriptor
//! length (u32 LE), JSON [`NetSpec`] descriptor, parameter count (u64 LE),
//! then the parameters as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use super::net::{DenoiserParams, NetSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"OTDNCKPT";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar>(params: &DenoiserParams<T>, mut w: impl Write) -> Result<()> {
    let desc = serde_json::to_vec(&params.spec)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(desc.len() as u32).to_le_bytes())?;
    w.write_all(&desc)?;
    w.write_all(&(params.values.len() as u64).to_le_bytes())?;
    for v in &params.values {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(mut r: impl Read) -> Result<DenoiserParams<T>> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mut u4 = [0u8; 4];
    r.read_exact(&mut u4).map_err(|_| bad("truncated header"))?;
    let version = u32::from_le_bytes(u4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut u4).map_err(|_| bad("truncated header"))?;
    let mut desc = vec![0u8; u32::from_le_bytes(u4) as usize];
    r.read_exact(&mut desc).map_err(|_| bad("truncated descriptor"))?;
    let spec: NetSpec = serde_json::from_slice(&desc)?;
    let mut u8b = [0u8; 8];
    r.read_exact(&mut u8b).map_err(|_| bad("truncated parameter count"))?;
    let n = u64::from_le_bytes(u8b) as usize;
    if n != spec.param_count() {
        return Err(Error::Checkpoint(format!(
            "{n} parameters stored for a network with {}",
            spec.param_count()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut u8b).map_err(|_| bad("truncated parameters"))?;
        values.push(T::lit(f64::from_le_bytes(u8b)));
    }
    if r.read(&mut u8b)? != 0 {
        return Err(bad("trailing bytes"));
    }
    DenoiserParams::new(spec, values)
}

pub fn save_checkpoint<T: Scalar>(params: &DenoiserParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(params, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<DenoiserParams<T>> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let p = DenoiserParams::<f64>::random(NetSpec::toy(), 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        let back: DenoiserParams<f64> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert_eq!(&buf[..8], MAGIC);
        let tail = &buf[buf.len() - 8..];
        assert_eq!(f64::from_le_bytes(tail.try_into().unwrap()), *p.values.last().unwrap());
    }

    #[test]
    fn rejects_corruption() {
        let p = DenoiserParams::<f64>::random(NetSpec::toy(), 1);
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(read_checkpoint::<f64>(&buf[..buf.len() - 3]).is_err());
        let mut wrong = buf.clone();
        wrong[8] = 9;
        assert!(read_checkpoint::<f64>(wrong.as_slice()).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint::<f64>(extra.as_slice()).is_err());
        assert!(read_checkpoint::<f64>(&b"garbage!"[..]).is_err());
    }
}

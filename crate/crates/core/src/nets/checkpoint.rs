//! Model checkpoint file: magic, version, decision sharpness k, config
//! block, then named parameter tensors as little-endian f32.

use super::{ModelParams, NetConfig};
use crate::error::{Error, Result};
use crate::graph::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::TensorData;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"RCNC";
const VERSION: u32 = 1;

pub fn write_params<T: Scalar, W: Write>(w: &mut W, params: &ModelParams<T>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.k().to_f64_lossy() as f32).to_le_bytes())?;
    let cfg = serde_json::to_vec(&params.config).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(params.store.len() as u32).to_le_bytes())?;
    for (name, t) in params.store.iter() {
        write_tensor(w, name, t)?;
    }
    Ok(())
}

pub fn write_tensor<T: Scalar, W: Write>(w: &mut W, name: &str, t: &TensorData<T>) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
    for &d in &t.shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in &t.data {
        w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    Ok(f32::from_le_bytes(b))
}

pub fn read_tensor<T: Scalar, R: Read>(r: &mut R) -> Result<(String, TensorData<T>)> {
    let name_len = read_u32(r)? as usize;
    if name_len > 4096 {
        return Err(Error::Format("implausible tensor name length".into()));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    let name = String::from_utf8(name).map_err(|_| Error::Format("bad tensor name".into()))?;
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(Error::Format("implausible tensor rank".into()));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(T::c(read_f32(r)? as f64));
    }
    Ok((name, TensorData::new(shape, data)))
}

pub fn read_params<T: Scalar, R: Read>(r: &mut R) -> Result<ModelParams<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let _k = read_f32(r)?;
    let cfg_len = read_u32(r)? as usize;
    let mut cfg_buf = vec![0u8; cfg_len];
    r.read_exact(&mut cfg_buf)
        .map_err(|_| Error::Format("checkpoint truncated".into()))?;
    let config: NetConfig =
        serde_json::from_slice(&cfg_buf).map_err(|e| Error::Format(e.to_string()))?;
    let count = read_u32(r)? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let (name, t) = read_tensor(r)?;
        store.insert(&name, t);
    }
    if !store.contains(super::K_LOG) {
        return Err(Error::Format("checkpoint missing k".into()));
    }
    Ok(ModelParams { store, config })
}

pub fn save_model<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_params(&mut f, params)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_params(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_identical_for_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = NetConfig {
            unet_widths: vec![4, 8],
            feat_dim: 4,
            field_width: 8,
            field_layers: 2,
            shade_width: 8,
            shade_layers: 1,
            ..NetConfig::desk()
        };
        let m = ModelParams::<f32>::init(cfg, 0.1, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save_model(&m, &p).unwrap();
        let back: ModelParams<f32> = load_model(&p).unwrap();
        assert_eq!(back.config, m.config);
        assert_eq!(back.store.len(), m.store.len());
        for (name, t) in m.store.iter() {
            assert_eq!(back.store.get(name).unwrap(), t, "{name}");
        }
    }

    #[test]
    fn truncated_file_rejected_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = NetConfig {
            unet_widths: vec![4],
            feat_dim: 2,
            field_width: 4,
            field_layers: 1,
            shade_width: 4,
            shade_layers: 1,
            ..NetConfig::desk()
        };
        let m = ModelParams::<f32>::init(cfg, 0.1, &mut rng);
        let mut buf = Vec::new();
        write_params(&mut buf, &m).unwrap();
        buf.truncate(buf.len() / 2);
        let err = read_params::<f32, _>(&mut &buf[..]);
        assert!(matches!(err, Err(Error::Format(_))));
    }

    #[test]
    fn wrong_magic_rejected() {
        let buf = b"NOPE00000000".to_vec();
        assert!(read_params::<f32, _>(&mut &buf[..]).is_err());
    }
}

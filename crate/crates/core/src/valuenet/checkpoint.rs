//! Checkpoint format: JSON header (shapes, config hash, step) followed by a
//! flat little-endian f64 parameter block per ensemble member.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{ValueNet, LAYER_SHAPES};
use super::NetError;

const MAGIC: &[u8; 4] = b"VCKP";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    k: usize,
    step: u64,
    config_hash: String,
    layer_norm: bool,
    dropout: f64,
    shapes: Vec<[usize; 2]>,
}

/// A loaded checkpoint: ensemble members plus training provenance.
#[derive(Debug)]
pub struct Checkpoint {
    pub members: Vec<ValueNet>,
    pub step: u64,
    pub config_hash: String,
}

pub fn save_checkpoint(
    path: &Path,
    members: &[ValueNet],
    step: u64,
    config_hash: &str,
) -> Result<(), NetError> {
    let header = Header {
        version: 1,
        k: members.len(),
        step,
        config_hash: config_hash.to_string(),
        layer_norm: members[0].layer_norm,
        dropout: members[0].dropout,
        shapes: LAYER_SHAPES.iter().map(|(o, i)| [*o, *i]).collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    f.write_all(&header_bytes)?;
    for m in members {
        let flat = m.flat_params();
        let mut buf = Vec::with_capacity(flat.len() * 8);
        for v in flat {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&buf)?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NetError> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NetError::Corrupt("bad magic (not a checkpoint)".into()));
    }
    let mut len = [0u8; 4];
    f.read_exact(&mut len)?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len) as usize];
    f.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    let expected: Vec<[usize; 2]> = LAYER_SHAPES.iter().map(|(o, i)| [*o, *i]).collect();
    if header.shapes != expected {
        return Err(NetError::Corrupt(format!(
            "shape manifest mismatch: file has {:?}",
            header.shapes
        )));
    }
    let param_count: usize = LAYER_SHAPES.iter().map(|(o, i)| o * i + o).sum();
    let mut members = Vec::with_capacity(header.k);
    for k in 0..header.k {
        let mut raw = vec![0u8; param_count * 8];
        f.read_exact(&mut raw).map_err(|_| {
            NetError::Corrupt(format!("parameter block for member {k} is truncated"))
        })?;
        let flat: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut net = ValueNet {
            layers: LAYER_SHAPES
                .iter()
                .map(|(o, i)| super::net::Linear {
                    w: vec![0.0; o * i],
                    b: vec![0.0; *o],
                    in_dim: *i,
                    out_dim: *o,
                })
                .collect(),
            layer_norm: header.layer_norm,
            dropout: header.dropout,
        };
        net.set_flat_params(&flat);
        members.push(net);
    }
    Ok(Checkpoint {
        members,
        step: header.step,
        config_hash: header.config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn roundtrip_preserves_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut rng = RngStream::new(1, 0).rng();
        let members = vec![
            ValueNet::init(false, 0.0, &mut rng),
            ValueNet::init(false, 0.0, &mut rng),
        ];
        save_checkpoint(&path, &members, 1234, "deadbeef").unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.step, 1234);
        assert_eq!(ck.config_hash, "deadbeef");
        assert_eq!(ck.members.len(), 2);
        for (a, b) in members.iter().zip(&ck.members) {
            let (fa, fb) = (a.flat_params(), b.flat_params());
            for (x, y) in fa.iter().zip(&fb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut rng = RngStream::new(2, 0).rng();
        let members = vec![ValueNet::init(false, 0.0, &mut rng)];
        save_checkpoint(&path, &members, 1, "x").unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 64]).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        std::fs::write(&path, b"NOPE1234").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}

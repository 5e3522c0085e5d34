//! Weight checkpoints.
//!
//! Layout:
//!
//! ```text
//! b"CMSRCKPT"            8 bytes
//! header length          u32 little-endian
//! header                 UTF-8 JSON (see `Header`)
//! tensor data            f32 little-endian, in header order
//! ```
//!
//! The header carries the format version, both configs needed to rebuild
//! the model, and the name and shape of every stored tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::deform::{DeformConfig, DeformationStack, LayerFlags};
use crate::error::{Error, Result};
use crate::net::{NetConfig, NetworkWeights};
use crate::tensor::{Shape, Tensor};

pub const MAGIC: &[u8; 8] = b"CMSRCKPT";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Shape,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    net: NetConfig,
    deform: DeformConfig,
    layers: LayerFlags,
    tensors: Vec<Entry>,
}

/// A trained network with its alignment.
#[derive(Clone, Debug)]
pub struct Model {
    pub weights: NetworkWeights,
    pub stack: DeformationStack,
    pub deform: DeformConfig,
}

fn named_tensors(model: &mut Model) -> Vec<(String, &mut Tensor)> {
    let mut out = Vec::new();
    for (branch, layers) in [("fe1", &mut model.weights.fe1), ("fe2", &mut model.weights.fe2)] {
        for (i, l) in layers.iter_mut().enumerate() {
            out.push((format!("{branch}.{i}.weight"), &mut l.weight));
            out.push((format!("{branch}.{i}.bias"), &mut l.bias));
        }
    }
    for (name, t) in model.stack.params_mut() {
        out.push((name.to_string(), t));
    }
    out
}

impl Model {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut model = self.clone();
        let layers = model.stack.enabled;
        let tensors = named_tensors(&mut model);
        let header = Header {
            version: VERSION,
            net: self.weights.config,
            deform: self.deform,
            layers,
            tensors: tensors.iter().map(|(n, t)| Entry { name: n.clone(), shape: t.shape() }).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.weights.param_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in &tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if header.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
        }
        header.net.validate()?;
        let mut model = Model {
            weights: NetworkWeights::zeros(header.net),
            stack: DeformationStack::new(&header.deform)?,
            deform: header.deform,
        };
        model.stack.enabled = header.layers;
        let mut data = &bytes[12 + len..];
        let mut tensors = named_tensors(&mut model);
        if tensors.len() != header.tensors.len() {
            return Err(bad("tensor count does not match the configs"));
        }
        for ((name, t), entry) in tensors.iter_mut().zip(&header.tensors) {
            if *name != entry.name || t.shape() != entry.shape {
                return Err(Error::Checkpoint(format!(
                    "expected {name} {} but found {} {}",
                    t.shape(),
                    entry.name,
                    entry.shape
                )));
            }
            let n = t.len() * 4;
            let chunk = data.get(..n).ok_or_else(|| bad("truncated tensor data"))?;
            for (dst, src) in t.data_mut().iter_mut().zip(chunk.chunks_exact(4)) {
                *dst = f32::from_le_bytes(src.try_into().expect("4 bytes"));
            }
            data = &data[n..];
        }
        if !data.is_empty() {
            return Err(bad("trailing bytes after tensor data"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn model() -> Model {
        let net = NetConfig {
            fe1_layers: 2,
            fe1_channels: 3,
            fe2_layers: 4,
            fe2_channels: 4,
        };
        let deform = DeformConfig {
            cells_x: 2,
            cells_y: 3,
            tps_side: 3,
            ..DeformConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut stack = DeformationStack::new(&deform).unwrap();
        stack.affine.params.data_mut()[2] = 0.25;
        stack.cpab.coeffs.data_mut()[0] = -0.5;
        stack.tps.displacements.data_mut()[1] = 0.125;
        stack.enabled.tps = false;
        Model {
            weights: NetworkWeights::init(net, &mut rng),
            stack,
            deform,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let back = Model::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back.weights.fe1, m.weights.fe1);
        assert_eq!(back.weights.fe2, m.weights.fe2);
        assert_eq!(back.stack.affine, m.stack.affine);
        assert_eq!(back.stack.cpab.coeffs, m.stack.cpab.coeffs);
        assert_eq!(back.stack.tps.displacements, m.stack.tps.displacements);
        assert_eq!(back.stack.enabled, m.stack.enabled);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = model().to_bytes().unwrap();
        assert!(Model::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Model::from_bytes(&extra).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Model::from_bytes(&magic).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model();
        m.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap().weights.fe2, m.weights.fe2);
    }
}

//! Checkpoint container and FP16 post-training quantization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 0      8 bytes   magic "SEADBSCK"
//! 8      u32       format version
//! 12     u32       header length H
//! 16     H bytes   JSON header
//! 16+H   ...       payload: tensors back to back, offsets relative to here
//! ```

use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentNetworks, TrainingConfig, Variant};
use crate::error::{Error, Result};
use crate::nn::{Architecture, Mlp};

pub const MAGIC: &[u8; 8] = b"SEADBSCK";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp32,
    Fp16,
}

impl Precision {
    pub fn bytes_per_value(self) -> usize {
        match self {
            Precision::Fp32 => 4,
            Precision::Fp16 => 2,
        }
    }

    fn dtype(self) -> &'static str {
        match self {
            Precision::Fp32 => "f32",
            Precision::Fp16 => "f16",
        }
    }
}

/// Names under which the five networks are stored, in payload order.
pub const NETWORK_NAMES: [&str; 5] = ["actor", "critic", "target_actor", "target_critic", "predictor"];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub precision: Precision,
    pub variant: Variant,
    pub seed: u64,
    pub training: TrainingConfig,
    /// Parameters as f32. For fp16 checkpoints every value is exactly
    /// representable in binary16.
    pub nets: AgentNetworks<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
    nbytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkEntry {
    name: String,
    architecture: Architecture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    precision: Precision,
    variant: Variant,
    seed: u64,
    networks: Vec<NetworkEntry>,
    tensors: Vec<TensorEntry>,
    payload_bytes: usize,
    training: TrainingConfig,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Rounds to binary16 (nearest, ties to even), saturating at ±65504.
pub fn quantize_value(x: f32) -> Result<f16> {
    if x.is_nan() {
        return Err(Error::NonFinite("parameter"));
    }
    let max = f16::MAX.to_f32();
    Ok(f16::from_f32(x.clamp(-max, max)))
}

fn quantize_net(net: &Mlp<f32>) -> Result<Mlp<f32>> {
    let mut out = net.clone();
    for p in out.params_mut() {
        *p = quantize_value(*p)?.to_f32();
    }
    Ok(out)
}

impl ModelCheckpoint {
    pub fn new(nets: AgentNetworks<f32>, variant: Variant, seed: u64, training: TrainingConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            precision: Precision::Fp32,
            variant,
            seed,
            training,
            nets,
        }
    }

    fn networks(&self) -> [&Mlp<f32>; 5] {
        [
            &self.nets.actor,
            &self.nets.critic,
            &self.nets.target_actor,
            &self.nets.target_critic,
            &self.nets.predictor,
        ]
    }

    /// Number of stored parameters across all networks.
    pub fn num_params(&self) -> usize {
        self.networks().iter().map(|n| n.num_params()).sum()
    }

    /// Size of the raw parameter payload in bytes.
    pub fn payload_bytes(&self) -> usize {
        self.num_params() * self.precision.bytes_per_value()
    }

    /// Copy with every parameter rounded to binary16.
    pub fn quantize_fp16(&self) -> Result<Self> {
        let n = &self.nets;
        Ok(Self {
            precision: Precision::Fp16,
            nets: AgentNetworks {
                actor: quantize_net(&n.actor)?,
                critic: quantize_net(&n.critic)?,
                target_actor: quantize_net(&n.target_actor)?,
                target_critic: quantize_net(&n.target_critic)?,
                predictor: quantize_net(&n.predictor)?,
                gamma: n.gamma,
                target_tau: n.target_tau,
            },
            ..self.clone()
        })
    }

    /// Networks ready for inference (fp16 values already widened).
    pub fn load_for_inference(&self) -> AgentNetworks<f32> {
        self.nets.clone()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let width = self.precision.bytes_per_value();
        let mut tensors = Vec::new();
        let mut networks = Vec::new();
        let mut offset = 0;
        for (name, net) in NETWORK_NAMES.iter().zip(self.networks()) {
            networks.push(NetworkEntry {
                name: name.to_string(),
                architecture: net.architecture(),
            });
            for (l, layer) in net.layers.iter().enumerate() {
                for (kind, shape) in [
                    ("weight", vec![layer.n_out, layer.n_in]),
                    ("bias", vec![layer.n_out]),
                ] {
                    let nbytes = shape.iter().product::<usize>() * width;
                    tensors.push(TensorEntry {
                        name: format!("{name}.{l}.{kind}"),
                        shape,
                        dtype: self.precision.dtype().to_string(),
                        offset,
                        nbytes,
                    });
                    offset += nbytes;
                }
            }
        }
        let header = Header {
            precision: self.precision,
            variant: self.variant,
            seed: self.seed,
            networks,
            tensors,
            payload_bytes: offset,
            training: self.training.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;

        let mut out = Vec::with_capacity(PREAMBLE + header.len() + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for net in self.networks() {
            for layer in &net.layers {
                for v in layer.weight.iter().chain(&layer.bias) {
                    match self.precision {
                        Precision::Fp32 => out.extend_from_slice(&v.to_le_bytes()),
                        Precision::Fp16 => out.extend_from_slice(&quantize_value(*v)?.to_le_bytes()),
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREAMBLE {
            return Err(corrupt("file shorter than the fixed preamble"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(corrupt(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let header_end = PREAMBLE
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
            .map_err(|e| corrupt(format!("unreadable header: {e}")))?;
        let payload = &bytes[header_end..];
        if payload.len() != header.payload_bytes {
            return Err(corrupt(format!(
                "payload is {} bytes, header declares {}",
                payload.len(),
                header.payload_bytes
            )));
        }
        let width = header.precision.bytes_per_value();
        let read = |entry: &TensorEntry| -> Result<Vec<f32>> {
            let count: usize = entry.shape.iter().product();
            if entry.dtype != header.precision.dtype() || entry.nbytes != count * width {
                return Err(corrupt(format!(
                    "tensor {} has inconsistent dtype or size",
                    entry.name
                )));
            }
            let chunk = payload
                .get(entry.offset..entry.offset + entry.nbytes)
                .ok_or_else(|| corrupt(format!("tensor {} lies outside the payload", entry.name)))?;
            Ok(match header.precision {
                Precision::Fp32 => chunk
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
                Precision::Fp16 => chunk
                    .chunks_exact(2)
                    .map(|c| f16::from_le_bytes(c.try_into().unwrap()).to_f32())
                    .collect(),
            })
        };

        let mut nets = Vec::new();
        for name in NETWORK_NAMES {
            let entry = header
                .networks
                .iter()
                .find(|n| n.name == name)
                .ok_or_else(|| corrupt(format!("network {name} missing")))?;
            if entry.architecture.sizes.len() < 2 {
                return Err(corrupt(format!("network {name} has no layers")));
            }
            let mut net = Mlp::<f32>::zeros(&entry.architecture);
            for (l, layer) in net.layers.iter_mut().enumerate() {
                for (kind, dst) in [("weight", &mut layer.weight), ("bias", &mut layer.bias)] {
                    let tname = format!("{name}.{l}.{kind}");
                    let t = header
                        .tensors
                        .iter()
                        .find(|t| t.name == tname)
                        .ok_or_else(|| corrupt(format!("tensor {tname} missing")))?;
                    let values = read(t)?;
                    if values.len() != dst.len() {
                        return Err(corrupt(format!("tensor {tname} has the wrong shape")));
                    }
                    *dst = values;
                }
            }
            nets.push(net);
        }
        let mut it = nets.into_iter();
        let mut next = || it.next().unwrap();
        let nets = AgentNetworks {
            actor: next(),
            critic: next(),
            target_actor: next(),
            target_critic: next(),
            predictor: next(),
            gamma: header.training.gamma as f32,
            target_tau: header.training.temperature.floor as f32,
        };
        Ok(Self {
            format_version: version,
            precision: header.precision,
            variant: header.variant,
            seed: header.seed,
            training: header.training,
            nets,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

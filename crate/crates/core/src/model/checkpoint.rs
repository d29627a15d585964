//! Self-describing checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"AESCCKPT"            8-byte magic
//! u64                    header length in bytes
//! header                 UTF-8 JSON: format version, ModelSpec, seed,
//!                        tensor directory, free-form `extra` metadata
//! f32 * N                tensor payloads in directory order
//! ```
//!
//! The network's tensors come first, named `encoder.<i>.weight`,
//! `encoder.<i>.bias`, `decoder.<i>.weight`, `decoder.<i>.bias`; any auxiliary
//! tensors (optimizer moments) follow.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelSpec, Network};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"AESCCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: u32,
    spec: ModelSpec,
    seed: u64,
    spec_hash: String,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    extra: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network<f32>,
    /// Named auxiliary tensors stored after the network parameters.
    pub aux: Vec<(String, Vec<f32>)>,
    pub extra: serde_json::Value,
}

/// Short stable digest of a model spec, used to pair checkpoints with configs.
pub fn spec_hash(spec: &ModelSpec) -> String {
    let json = serde_json::to_vec(spec).expect("ModelSpec serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn network_tensor_names(net: &Network<f32>) -> Vec<String> {
    let mut names = Vec::new();
    for (part, layers) in [("encoder", &net.encoder), ("decoder", &net.decoder)] {
        for i in 0..layers.len() {
            names.push(format!("{part}.{i}.weight"));
            names.push(format!("{part}.{i}.bias"));
        }
    }
    names
}

impl Checkpoint {
    pub fn new(network: Network<f32>) -> Self {
        Self {
            network,
            aux: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let net = &self.network;
        let groups = net.param_groups();
        let mut tensors: Vec<TensorEntry> = network_tensor_names(net)
            .into_iter()
            .zip(&groups)
            .map(|(name, g)| TensorEntry { name, len: g.len() })
            .collect();
        tensors.extend(self.aux.iter().map(|(name, t)| TensorEntry {
            name: name.clone(),
            len: t.len(),
        }));
        let header = Header {
            version: VERSION,
            spec: net.spec().clone(),
            seed: net.seed(),
            spec_hash: spec_hash(net.spec()),
            tensors,
            extra: self.extra.clone(),
        };
        let header_bytes = serde_json::to_vec(&header)?;

        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(header_bytes.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&header_bytes).map_err(io)?;
        for tensor in groups.iter().copied().chain(self.aux.iter().map(|(_, t)| &t[..])) {
            for v in tensor {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("{} is not a checkpoint file", path.display())));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(io)?;
        let len = u64::from_le_bytes(len) as usize;
        if len > 64 << 20 {
            return Err(Error::Checkpoint(format!("implausible header length {len}")));
        }
        let mut header = vec![0u8; len];
        r.read_exact(&mut header).map_err(io)?;
        let header: Header = serde_json::from_slice(&header)?;
        if header.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", header.version)));
        }

        let mut network = Network::<f32>::zeroed(header.spec.clone(), header.seed)?;
        let expected_names = network_tensor_names(&network);
        if header.tensors.len() < expected_names.len() {
            return Err(Error::Checkpoint("tensor directory shorter than the network".into()));
        }
        let mut read_tensor = |n: usize| -> Result<Vec<f32>> {
            let mut bytes = vec![0u8; n * 4];
            r.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };
        {
            let mut groups = network.param_groups_mut();
            for ((entry, name), group) in header.tensors.iter().zip(&expected_names).zip(groups.iter_mut()) {
                if &entry.name != name || entry.len != group.len() {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{}` ({} values) does not match layer `{}` ({} values)",
                        entry.name,
                        entry.len,
                        name,
                        group.len()
                    )));
                }
                group.copy_from_slice(&read_tensor(entry.len)?);
            }
        }
        let mut aux = Vec::new();
        for entry in &header.tensors[expected_names.len()..] {
            aux.push((entry.name.clone(), read_tensor(entry.len)?));
        }
        Ok(Self {
            network,
            aux,
            extra: header.extra,
        })
    }

    pub fn aux_tensor(&self, name: &str) -> Option<&[f32]> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, t)| &t[..])
    }
}

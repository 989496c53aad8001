//! Binary containers for MPS, MPO and brick-wall circuit files.
//!
//! Layout: the 8 magic bytes `QPDETN01`, the header length as a little-endian
//! `u64`, a UTF-8 JSON [`ContainerHeader`], then the payload. The payload holds
//! every tensor in header order, row-major, each entry as two little-endian
//! `f64` (real, imaginary). MPS sites have shape `[2, left, right]`, MPO sites
//! `[out, in, left, right]`; circuit gates are 4×4 matrices with row index
//! `2·o_q + o_{q+1}`, listed layer by layer, and `positions[j]` holds the first
//! qubit of each gate in layer `j` (layer `j` acts on pairs starting at `q ≡ j mod 2`).

use std::collections::BTreeMap;
use std::path::Path;

use qpde_core::brickwall::{layer_pairs, BrickWallCircuit};
use qpde_core::mpo::MatrixProductOperator;
use qpde_core::mps::MatrixProductState;
use qpde_core::{DenseTensor, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{QpdeError, Result};

pub const MAGIC: &[u8; 8] = b"QPDETN01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContainerKind {
    Mps,
    Mpo,
    Circuit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerHeader {
    pub format_version: u32,
    pub kind: ContainerKind,
    pub n_qubits: usize,
    pub shapes: Vec<Vec<usize>>,
    /// First qubit of every gate, per layer; circuits only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<usize>>>,
    pub payload_sha256: String,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}

fn encode(
    kind: ContainerKind,
    n_qubits: usize,
    tensors: &[&DenseTensor],
    positions: Option<Vec<Vec<usize>>>,
    meta: BTreeMap<String, serde_json::Value>,
) -> Result<Vec<u8>> {
    let mut payload = Vec::with_capacity(16 * tensors.iter().map(|t| t.len()).sum::<usize>());
    for t in tensors {
        for z in t.data() {
            payload.extend_from_slice(&z.re.to_le_bytes());
            payload.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let header = ContainerHeader {
        format_version: FORMAT_VERSION,
        kind,
        n_qubits,
        shapes: tensors.iter().map(|t| t.shape().to_vec()).collect(),
        positions,
        payload_sha256: sha256_hex(&payload),
        meta,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

fn decode(bytes: &[u8], source: &str, want: ContainerKind) -> Result<(ContainerHeader, Vec<DenseTensor>)> {
    let bad = |message: String| QpdeError::Container {
        path: source.to_string(),
        message,
    };
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if bytes.len() < 16 + len {
        return Err(bad(format!("header of {} bytes is truncated", len)));
    }
    let header: ContainerHeader = serde_json::from_slice(&bytes[16..16 + len]).map_err(|e| bad(format!("header: {}", e)))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("format version {}", header.format_version)));
    }
    if header.kind != want {
        return Err(bad(format!("holds {:?}, expected {:?}", header.kind, want)));
    }
    let payload = &bytes[16 + len..];
    if sha256_hex(payload) != header.payload_sha256 {
        return Err(bad("payload checksum mismatch".into()));
    }
    let counts: Vec<usize> = header.shapes.iter().map(|s| s.iter().product()).collect();
    if counts.iter().sum::<usize>() * 16 != payload.len() {
        return Err(bad(format!("payload has {} bytes for shapes {:?}", payload.len(), header.shapes)));
    }
    let mut values = payload.chunks_exact(16).map(|c| {
        C64::new(
            f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
            f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
        )
    });
    let mut tensors = Vec::with_capacity(counts.len());
    for (shape, &n) in header.shapes.iter().zip(&counts) {
        let data: Vec<C64> = values.by_ref().take(n).collect();
        tensors.push(DenseTensor::new(shape.clone(), data).map_err(|e| bad(e.to_string()))?);
    }
    Ok((header, tensors))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| QpdeError::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| QpdeError::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(QpdeError::MissingArtifact(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|e| QpdeError::io(path, e))
}

pub fn mps_to_bytes(mps: &MatrixProductState, meta: BTreeMap<String, serde_json::Value>) -> Result<Vec<u8>> {
    let sites: Vec<&DenseTensor> = mps.sites().iter().collect();
    encode(ContainerKind::Mps, mps.n_sites(), &sites, None, meta)
}

pub fn mps_from_bytes(bytes: &[u8], source: &str) -> Result<(MatrixProductState, ContainerHeader)> {
    let (header, tensors) = decode(bytes, source, ContainerKind::Mps)?;
    let mps = MatrixProductState::new(tensors).map_err(|e| QpdeError::Container {
        path: source.to_string(),
        message: e.to_string(),
    })?;
    Ok((mps, header))
}

pub fn mpo_to_bytes(mpo: &MatrixProductOperator, meta: BTreeMap<String, serde_json::Value>) -> Result<Vec<u8>> {
    let sites: Vec<&DenseTensor> = mpo.sites().iter().collect();
    encode(ContainerKind::Mpo, mpo.n_sites(), &sites, None, meta)
}

pub fn mpo_from_bytes(bytes: &[u8], source: &str) -> Result<(MatrixProductOperator, ContainerHeader)> {
    let (header, tensors) = decode(bytes, source, ContainerKind::Mpo)?;
    let mpo = MatrixProductOperator::new(tensors).map_err(|e| QpdeError::Container {
        path: source.to_string(),
        message: e.to_string(),
    })?;
    Ok((mpo, header))
}

pub fn circuit_to_bytes(c: &BrickWallCircuit, meta: BTreeMap<String, serde_json::Value>) -> Result<Vec<u8>> {
    let gates: Vec<&DenseTensor> = c.layers().iter().flatten().collect();
    let positions = (0..c.depth()).map(|j| layer_pairs(c.n_qubits(), j).collect()).collect();
    encode(ContainerKind::Circuit, c.n_qubits(), &gates, Some(positions), meta)
}

pub fn circuit_from_bytes(bytes: &[u8], source: &str) -> Result<(BrickWallCircuit, ContainerHeader)> {
    let (header, tensors) = decode(bytes, source, ContainerKind::Circuit)?;
    let bad = |message: String| QpdeError::Container {
        path: source.to_string(),
        message,
    };
    let positions = header.positions.clone().ok_or_else(|| bad("circuit without positions".into()))?;
    let mut it = tensors.into_iter();
    let mut layers = Vec::with_capacity(positions.len());
    for (j, pos) in positions.iter().enumerate() {
        let want: Vec<usize> = layer_pairs(header.n_qubits, j).collect();
        if *pos != want {
            return Err(bad(format!("layer {} positions {:?}, expected {:?}", j, pos, want)));
        }
        layers.push(it.by_ref().take(pos.len()).collect::<Vec<_>>());
    }
    if it.next().is_some() {
        return Err(bad("more gates than positions".into()));
    }
    let c = BrickWallCircuit::new(header.n_qubits, layers).map_err(|e| bad(e.to_string()))?;
    Ok((c, header))
}

pub fn write_mps(path: &Path, mps: &MatrixProductState, meta: BTreeMap<String, serde_json::Value>) -> Result<()> {
    write_bytes(path, &mps_to_bytes(mps, meta)?)
}

pub fn read_mps(path: &Path) -> Result<MatrixProductState> {
    Ok(mps_from_bytes(&read_bytes(path)?, &path.display().to_string())?.0)
}

pub fn write_mpo(path: &Path, mpo: &MatrixProductOperator, meta: BTreeMap<String, serde_json::Value>) -> Result<()> {
    write_bytes(path, &mpo_to_bytes(mpo, meta)?)
}

pub fn read_mpo(path: &Path) -> Result<MatrixProductOperator> {
    Ok(mpo_from_bytes(&read_bytes(path)?, &path.display().to_string())?.0)
}

pub fn write_circuit(path: &Path, c: &BrickWallCircuit, meta: BTreeMap<String, serde_json::Value>) -> Result<()> {
    write_bytes(path, &circuit_to_bytes(c, meta)?)
}

pub fn read_circuit(path: &Path) -> Result<BrickWallCircuit> {
    Ok(circuit_from_bytes(&read_bytes(path)?, &path.display().to_string())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qpde_core::brickwall::init_circuit;

    #[test]
    fn circuit_roundtrip_is_bit_exact() {
        let c = init_circuit(5, 3, 0.4, 9).unwrap();
        let bytes = circuit_to_bytes(&c, BTreeMap::new()).unwrap();
        let (back, header) = circuit_from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, c);
        assert_eq!(header.positions.unwrap(), vec![vec![0, 2], vec![1, 3], vec![0, 2]]);
    }

    #[test]
    fn corruption_is_detected() {
        let c = init_circuit(3, 2, 0.4, 1).unwrap();
        let mut bytes = circuit_to_bytes(&c, BTreeMap::new()).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        assert!(matches!(circuit_from_bytes(&bytes, "mem"), Err(QpdeError::Container { .. })));
        assert!(circuit_from_bytes(b"nonsense", "mem").is_err());
    }

    #[test]
    fn kind_is_checked() {
        let m = MatrixProductState::product_state(&[0, 1]);
        let bytes = mps_to_bytes(&m, BTreeMap::new()).unwrap();
        assert!(mpo_from_bytes(&bytes, "mem").is_err());
        assert_eq!(mps_from_bytes(&bytes, "mem").unwrap().0.to_dense().unwrap(), m.to_dense().unwrap());
    }
}

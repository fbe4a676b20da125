//! Binary checkpoint of a relaxation in progress.
//!
//! Layout: the 8-byte magic `MPDOCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` byte length followed by a UTF-8 JSON header (lattice,
//! parameters, truncation settings, canonical center, relaxation progress and
//! tensor shapes), then every tensor entry as a little-endian `f64` in site
//! order and row-major `(left, phys, right)` order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MpdoState, RelaxProgress, SiteTensor};
use crate::error::{Error, Result};
use crate::fock::LatticeSpec;
use crate::model::ModelParams;

const MAGIC: &[u8; 8] = b"MPDOCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: MpdoState,
    pub params: ModelParams,
    pub progress: RelaxProgress,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: LatticeSpec,
    params: ModelParams,
    max_bond: usize,
    cutoff: f64,
    center: usize,
    progress: RelaxProgress,
    shapes: Vec<[usize; 3]>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let s = &self.state;
        let header = Header {
            spec: s.spec.clone(),
            params: self.params.clone(),
            max_bond: s.max_bond,
            cutoff: s.cutoff,
            center: s.center,
            progress: self.progress.clone(),
            shapes: s.tensors.iter().map(|t| [t.left(), t.phys(), t.right()]).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for t in &s.tensors {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not an MPDO checkpoint".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| Error::Checkpoint(e.to_string()))?;

        let mut tensors = Vec::with_capacity(header.shapes.len());
        let mut buf = [0u8; 8];
        for [left, phys, right] in &header.shapes {
            let count = left * phys * right;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push(SiteTensor::from_data(*left, *phys, *right, data)?);
        }
        let state = MpdoState::from_parts(tensors, header.spec, header.max_bond, header.cutoff, header.center)?;
        Ok(Self { state, params: header.params, progress: header.progress })
    }
}

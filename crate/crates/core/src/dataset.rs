//! Labelled samples and the on-disk dataset format.
//!
//! A dataset file is a magic line, a one-line JSON header and a payload of
//! little-endian `f64` records, one per entry: `eps`, then `rho`, `u`, `T`
//! and `q` with `nx` values each.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::GenConfig;
use crate::{Error, Result};

pub const DATASET_MAGIC: &str = "HEATFLUX-DATASET";
pub const DATASET_VERSION: u32 = 1;

/// Where an entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub run_id: u64,
    pub record_time: f64,
    pub seed: u64,
}

/// One labelled sample: the Knudsen number, the fluid moments and the
/// kinetic heat flux on the training grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub eps: f64,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub temperature: Vec<f64>,
    pub q: Vec<f64>,
    pub provenance: Provenance,
}

impl DatasetEntry {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rho.len();
        if n == 0 || self.u.len() != n || self.temperature.len() != n || self.q.len() != n {
            return Err(Error::Shape("entry vectors must share a non-zero length".into()));
        }
        if let Some((i, &v)) = self.rho.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDensity { cell: i, value: v });
        }
        if let Some((i, &v)) = self.temperature.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Realizability { cell: i, quantity: "temperature", value: v });
        }
        if !self.eps.is_finite() || self.u.iter().chain(&self.q).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("entry holds non-finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub nx: usize,
    pub seed: u64,
    pub gen_config: Option<GenConfig>,
    pub entries: Vec<DatasetEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    count: usize,
    nx: usize,
    seed: u64,
    sha256: String,
    gen_config: Option<GenConfig>,
    provenance: Vec<Provenance>,
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn f64s_to_bytes(values: impl IntoIterator<Item = f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn bytes_to_f64s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8 bytes")))
        .collect()
}

/// Reads the magic line and the JSON header line; returns the header text.
pub(crate) fn read_header(reader: &mut impl BufRead, magic: &str) -> Result<String> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != magic {
        return Err(Error::Format(format!("missing {magic} magic line")));
    }
    line.clear();
    reader.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Format("truncated header".into()));
    }
    Ok(line)
}

impl Dataset {
    pub fn new(nx: usize, seed: u64, gen_config: Option<GenConfig>, entries: Vec<DatasetEntry>) -> Self {
        Dataset { nx, seed, gen_config, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn record_len(&self) -> usize {
        1 + 4 * self.nx
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut payload = Vec::with_capacity(self.len() * self.record_len() * 8);
        for e in &self.entries {
            if e.len() != self.nx {
                return Err(Error::Shape(format!("entry has {} points, dataset has {}", e.len(), self.nx)));
            }
            f64s_to_bytes([e.eps], &mut payload);
            for v in [&e.rho, &e.u, &e.temperature, &e.q] {
                f64s_to_bytes(v.iter().copied(), &mut payload);
            }
        }
        let header = Header {
            version: DATASET_VERSION,
            count: self.len(),
            nx: self.nx,
            seed: self.seed,
            sha256: hex_digest(&payload),
            gen_config: self.gen_config.clone(),
            provenance: self.entries.iter().map(|e| e.provenance).collect(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{DATASET_MAGIC}")?;
        writeln!(w, "{json}")?;
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let line = read_header(&mut reader, DATASET_MAGIC)?;
        let header: Header = serde_json::from_str(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if header.version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {}", header.version)));
        }
        if header.provenance.len() != header.count {
            return Err(Error::Format("provenance count does not match entry count".into()));
        }
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        let rec = 1 + 4 * header.nx;
        if payload.len() != header.count * rec * 8 {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                header.count * rec * 8
            )));
        }
        if hex_digest(&payload) != header.sha256 {
            return Err(Error::Format("dataset checksum mismatch".into()));
        }
        let values = bytes_to_f64s(&payload);
        let n = header.nx;
        let entries = values
            .chunks_exact(rec)
            .zip(&header.provenance)
            .map(|(r, p)| DatasetEntry {
                eps: r[0],
                rho: r[1..1 + n].to_vec(),
                u: r[1 + n..1 + 2 * n].to_vec(),
                temperature: r[1 + 2 * n..1 + 3 * n].to_vec(),
                q: r[1 + 3 * n..1 + 4 * n].to_vec(),
                provenance: *p,
            })
            .collect();
        Ok(Dataset { nx: n, seed: header.seed, gen_config: header.gen_config, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

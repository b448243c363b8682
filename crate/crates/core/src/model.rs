//! A trained network bundled with its preprocessing constants, and the
//! model file format.
//!
//! The file is a magic line, a one-line JSON header and the parameters as
//! little-endian `f64` values in canonical order.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closures::NeuralClosure;
use crate::dataset::{bytes_to_f64s, f64s_to_bytes, hex_digest, read_header};
use crate::processing::{PipelineConfig, StandardizationStats};
use crate::vnet::{param_count, VNet, VNetConfig, VNetParams};
use crate::{Error, Result};

pub const MODEL_MAGIC: &str = "HEATFLUX-MODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: VNetParams<f64>,
    pub pipeline: PipelineConfig,
    pub stats: StandardizationStats,
    pub seed: u64,
    /// Global epoch index of the best validation loss.
    pub best_epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    vnet: VNetConfig,
    pipeline: PipelineConfig,
    stats: StandardizationStats,
    seed: u64,
    best_epoch: usize,
    param_count: usize,
    sha256: String,
}

/// Precision used when the network runs inside the closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl TrainedModel {
    pub fn config(&self) -> &VNetConfig {
        &self.params.config
    }

    pub fn closure(&self) -> Result<NeuralClosure<VNet<f64>>> {
        NeuralClosure::new(VNet::new(self.params.clone()), self.stats, self.pipeline)
    }

    pub fn closure_f32(&self) -> Result<NeuralClosure<VNet<f32>>> {
        NeuralClosure::new(VNet::new(self.params.cast::<f32>()), self.stats, self.pipeline)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut payload = Vec::with_capacity(self.params.param_count() * 8);
        f64s_to_bytes(self.params.to_flat(), &mut payload);
        let header = Header {
            version: MODEL_VERSION,
            vnet: self.params.config,
            pipeline: self.pipeline,
            stats: self.stats,
            seed: self.seed,
            best_epoch: self.best_epoch,
            param_count: self.params.param_count(),
            sha256: hex_digest(&payload),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "{json}")?;
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let line = read_header(&mut reader, MODEL_MAGIC)?;
        let h: Header = serde_json::from_str(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        if h.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", h.version)));
        }
        h.vnet.validate()?;
        if h.param_count != param_count(&h.vnet) {
            return Err(Error::Format("parameter count does not match the network configuration".into()));
        }
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        if payload.len() != h.param_count * 8 {
            return Err(Error::Format(format!("payload has {} bytes, expected {}", payload.len(), h.param_count * 8)));
        }
        if hex_digest(&payload) != h.sha256 {
            return Err(Error::Format("model checksum mismatch".into()));
        }
        let params = VNetParams::from_flat(&h.vnet, &bytes_to_f64s(&payload))?;
        Ok(TrainedModel { params, pipeline: h.pipeline, stats: h.stats, seed: h.seed, best_epoch: h.best_epoch })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::read(path)?.as_slice())
    }
}

//! Toy model checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "GXTOYCK\0"
//! 8       4     format version, u32 little endian (currently 1)
//! 12      8     header length H, u64 little endian
//! 20      H     UTF-8 JSON header (see `Header`)
//! 20+H    8N    model parameters, f64 little endian
//! ...     8N    EMA parameters, f64 little endian (present iff header.has_ema)
//! ```
//!
//! `N` is `header.n_params`. Parameter order follows the flat layout of
//! [`ToyDenoiser`]: input projection, input bias, condition table, then per
//! residual block `W1, b1, W2, b2`, then output projection and bias.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::toy::{ToyConfig, ToyDenoiser};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GXTOYCK\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    config: ToyConfig,
    train_seed: u64,
    n_params: usize,
    has_ema: bool,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ToyConfig,
    pub params: Vec<f64>,
    pub ema: Option<Vec<f64>>,
    pub train_seed: u64,
    /// Free-form provenance (training config, iteration count, stamps).
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn model(&self) -> Result<ToyDenoiser> {
        ToyDenoiser::from_params(self.config.clone(), self.params.clone())
    }

    pub fn ema_model(&self) -> Result<Option<ToyDenoiser>> {
        self.ema
            .as_ref()
            .map(|e| ToyDenoiser::from_params(self.config.clone(), e.clone()))
            .transpose()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        if self.ema.as_ref().is_some_and(|e| e.len() != self.params.len()) {
            return Err(Error::Checkpoint("EMA and model parameter counts differ".into()));
        }
        let header = Header {
            format: "genextend-toy-denoiser".into(),
            config: self.config.clone(),
            train_seed: self.train_seed,
            n_params: self.params.len(),
            has_ema: self.ema.is_some(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for p in self.params.iter().chain(self.ema.iter().flatten()) {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a toy denoiser checkpoint (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut read_vec = |n: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes)?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let params = read_vec(header.n_params)?;
        let ema = if header.has_ema { Some(read_vec(header.n_params)?) } else { None };
        let ck = Checkpoint {
            config: header.config,
            params,
            ema,
            train_seed: header.train_seed,
            meta: header.meta,
        };
        ck.model()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let cfg = ToyConfig {
            layers: 1,
            width: 4,
            latent_channels: 2,
            context_frames: 3,
            n_conditions: 1,
            time_embedding: 4,
            seed: 9,
        };
        let m = ToyDenoiser::new(cfg.clone()).unwrap();
        let ck = Checkpoint {
            config: cfg,
            params: m.params().to_vec(),
            ema: Some(m.params().iter().map(|p| p * 0.5).collect()),
            train_seed: 77,
            meta: serde_json::json!({"iterations": 3}),
        };
        let mut bytes = Vec::new();
        ck.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.params, ck.params);
        assert_eq!(back.ema, ck.ema);
        assert_eq!(back.train_seed, 77);
        assert_eq!(back.meta["iterations"], 3);
        bytes[0] = b'X';
        assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
    }
}

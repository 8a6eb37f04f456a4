//! Labeled window datasets and their on-disk format.
//!
//! A dataset is stored as two files: `<path>` holds the binary payload
//! (magic, version, dimensions, then windows and labels as little-endian
//! f64), and `<path>.json` is a human-readable sidecar with the metadata
//! needed to regenerate or audit the payload. The pair round-trips
//! losslessly and the payload is byte-stable for a fixed seed.

use crate::linalg::Mat;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 6] = b"FPPDS\0";
const FORMAT_VERSION: u32 = 1;

/// Provenance carried in the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetMeta {
    /// "simulated" or "ingested".
    pub source: String,
    pub sampler: Option<String>,
    pub mu_range: Option<(f64, f64)>,
    pub beta_range: Option<(f64, f64)>,
    /// Time units of the windows for ingested data (e.g. "seconds").
    pub units: Option<String>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            source: "simulated".into(),
            sampler: None,
            mu_range: None,
            beta_range: None,
            units: None,
        }
    }
}

/// Windows of inter-arrival times paired with `(mu, beta)` labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    /// `n_samples x seq_len`.
    pub windows: Mat,
    /// `n_samples x 2`, columns `(mu, beta)`.
    pub labels: Mat,
    pub seq_len: usize,
    pub rng_seed: u64,
    pub meta: DatasetMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarHeader {
    format_version: u32,
    n_samples: usize,
    seq_len: usize,
    seed: u64,
    #[serde(flatten)]
    meta: DatasetMeta,
}

impl LabeledDataset {
    pub fn n_samples(&self) -> usize {
        self.windows.rows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.rows() != self.labels.rows() {
            return Err(Error::Config(format!(
                "window rows {} != label rows {}",
                self.windows.rows(),
                self.labels.rows()
            )));
        }
        if self.seq_len < 2 || self.windows.cols() != self.seq_len || self.labels.cols() != 2 {
            return Err(Error::Config("inconsistent dataset dimensions".into()));
        }
        Ok(())
    }

    /// Path of the JSON sidecar belonging to a payload path.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".json");
        PathBuf::from(p)
    }

    /// Write payload + sidecar. Returns the sidecar path.
    pub fn save(&self, path: &Path) -> Result<PathBuf> {
        self.validate()?;
        let mut buf =
            Vec::with_capacity(MAGIC.len() + 4 + 16 + 8 * (self.windows.len() + self.labels.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.n_samples() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.seq_len as u64).to_le_bytes());
        for v in self.windows.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.labels.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(path)?.write_all(&buf)?;

        let header = SidecarHeader {
            format_version: FORMAT_VERSION,
            n_samples: self.n_samples(),
            seq_len: self.seq_len,
            seed: self.rng_seed,
            meta: self.meta.clone(),
        };
        let sidecar = Self::sidecar_path(path);
        fs::write(&sidecar, serde_json::to_string_pretty(&header)? + "\n")?;
        Ok(sidecar)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < MAGIC.len() + 4 + 16 {
            return Err(Error::Format("dataset file truncated".into()));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let mut off = MAGIC.len();
        let version = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {version}"
            )));
        }
        off += 4;
        let n = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        off += 8;
        let len = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        off += 8;
        let need = off + 8 * (n * len + n * 2);
        if bytes.len() != need {
            return Err(Error::Format(format!(
                "dataset payload has {} bytes, expected {need}",
                bytes.len()
            )));
        }
        let read_mat = |rows: usize, cols: usize, off: &mut usize| {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap()));
                *off += 8;
            }
            Mat::from_vec(rows, cols, data)
        };
        let windows = read_mat(n, len, &mut off)?;
        let labels = read_mat(n, 2, &mut off)?;

        let sidecar = Self::sidecar_path(path);
        let header: SidecarHeader = serde_json::from_str(&fs::read_to_string(&sidecar)?)?;
        if header.n_samples != n || header.seq_len != len {
            return Err(Error::Format(
                "sidecar dimensions disagree with binary payload".into(),
            ));
        }

        Ok(Self {
            windows,
            labels,
            seq_len: len,
            rng_seed: header.seed,
            meta: header.meta,
        })
    }
}

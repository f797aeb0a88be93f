//! Lawn files: JSON with run-length-encoded site bits.
//!
//! ```json
//! {
//!   "grid": { "source_tag": "fibonacci-antipodal", "N": 6000, "content_hash": "…" },
//!   "theta": 0.9424777960769379,
//!   "setup": "one",
//!   "kernel": { "shape": "cosine", "half_width": 2.0 },
//!   "bits": ["1*3,0*2,…"],
//!   "probability": 0.71
//! }
//! ```
//!
//! `bits` holds one string per lawn (two for the two-lawn setup). Each string
//! is a comma-separated list of `<bit>*<run length>` tokens covering the
//! sites in grid file order.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SphericalGrid;
use crate::kernel::DeltaKernel;
use crate::lawn::{Lawn, LawnState, Setup, TwoLawnConfig};

pub fn encode_bits(sites: &[u8]) -> String {
    let mut out = String::new();
    let mut iter = sites.iter().peekable();
    while let Some(&bit) = iter.next() {
        let mut run = 1usize;
        while iter.peek() == Some(&&bit) {
            iter.next();
            run += 1;
        }
        if !out.is_empty() {
            out.push(',');
        }
        out.push_str(&format!("{bit}*{run}"));
    }
    out
}

pub fn decode_bits(text: &str) -> std::result::Result<Vec<u8>, String> {
    let mut out = Vec::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    for token in text.split(',') {
        let (bit, run) = token
            .trim()
            .split_once('*')
            .ok_or_else(|| format!("bad run token {token:?}"))?;
        let bit: u8 = match bit {
            "0" => 0,
            "1" => 1,
            _ => return Err(format!("bad bit {bit:?} in token {token:?}")),
        };
        let run: usize = run
            .parse()
            .map_err(|_| format!("bad run length in token {token:?}"))?;
        if run == 0 {
            return Err(format!("zero-length run in token {token:?}"));
        }
        out.extend(std::iter::repeat_n(bit, run));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRef {
    pub source_tag: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub content_hash: String,
}

impl GridRef {
    pub fn of(grid: &SphericalGrid) -> Self {
        GridRef {
            source_tag: grid.source_tag().to_string(),
            n: grid.len(),
            content_hash: grid.content_hash(),
        }
    }

    pub fn check(&self, grid: &SphericalGrid) -> Result<()> {
        if self.content_hash != grid.content_hash() || self.n != grid.len() {
            return Err(Error::GridMismatch {
                expected: self.content_hash.clone(),
                found: grid.content_hash(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawnFile {
    pub grid: GridRef,
    pub theta: f64,
    pub setup: Setup,
    #[serde(default)]
    pub kernel: DeltaKernel,
    pub bits: Vec<String>,
    pub probability: f64,
}

impl LawnFile {
    pub fn from_state(
        state: &LawnState,
        theta: f64,
        kernel: DeltaKernel,
        probability: f64,
    ) -> Self {
        LawnFile {
            grid: GridRef::of(state.grid()),
            theta,
            setup: state.setup(),
            kernel,
            bits: state
                .lawns()
                .iter()
                .map(|l| encode_bits(l.sites()))
                .collect(),
            probability,
        }
    }

    /// Rebuilds the state on `grid`, which must be the grid the file was
    /// written for.
    pub fn to_state(&self, grid: Arc<SphericalGrid>) -> Result<LawnState> {
        self.grid.check(&grid)?;
        decode_state(&grid, self.setup, &self.bits).map_err(|m| Error::format("<lawn>", m))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

pub(crate) fn decode_state(
    grid: &Arc<SphericalGrid>,
    setup: Setup,
    bits: &[String],
) -> std::result::Result<LawnState, String> {
    let expected = match setup {
        Setup::One => 1,
        Setup::Two => 2,
    };
    if bits.len() != expected {
        return Err(format!(
            "setup {setup} needs {expected} bit strings, found {}",
            bits.len()
        ));
    }
    let mut lawns = bits
        .iter()
        .map(|b| {
            let sites = decode_bits(b)?;
            Lawn::from_sites(grid.clone(), &sites).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ok(match setup {
        Setup::One => LawnState::One(lawns.remove(0)),
        Setup::Two => {
            let l2 = lawns.remove(1);
            let l1 = lawns.remove(0);
            LawnState::Two(TwoLawnConfig::new(l1, l2).map_err(|e| e.to_string())?)
        }
    })
}

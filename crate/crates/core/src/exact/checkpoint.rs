//! Resumable progress for table sweeps.
//!
//! File format (JSON, pretty-printed, trailing newline):
//!
//! ```text
//! {
//!   "format": "candy-exact-checkpoint",
//!   "version": 1,
//!   "k": 4,
//!   "params": {"d": 1, "n": 2, "kappa": 3, "p": ["1/2", "1/2"]},
//!   "completed": {"pI": {"num": "518955", "exp": 21}, "pS(0,0)": {...}, ...}
//! }
//! ```
//!
//! `completed` maps unit names to exact maxima and is kept sorted, so saving a
//! loaded checkpoint reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::params::ModelParams;

use super::{Conditioning, ExactError};

pub const FORMAT: &str = "candy-exact-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub params: ModelParams,
    pub completed: BTreeMap<String, Dyadic>,
}

/// Name of the work unit for a conditioning.
pub fn unit_name(cond: &Conditioning) -> String {
    match cond {
        Conditioning::UnstableAtOrigin => "pI".to_string(),
        Conditioning::TripleUnstable => "pIII".to_string(),
        Conditioning::StableGap { left, right } => format!("pS({left},{right})"),
    }
}

impl Checkpoint {
    pub fn new(params: &ModelParams, k: usize) -> Self {
        Checkpoint { format: FORMAT.to_string(), version: VERSION, k, params: params.clone(), completed: BTreeMap::new() }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ExactError> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| ExactError::Checkpoint(format!("corrupt: {e}")))?;
        if cp.format != FORMAT {
            return Err(ExactError::Checkpoint(format!("unknown format tag `{}`", cp.format)));
        }
        if cp.version != VERSION {
            return Err(ExactError::Checkpoint(format!("unsupported version {}", cp.version)));
        }
        if let Some((unit, v)) = cp.completed.iter().find(|(_, v)| v.is_negative() || **v > Dyadic::one()) {
            return Err(ExactError::Checkpoint(format!("unit {unit} holds {v}, outside [0,1]")));
        }
        Ok(cp)
    }

    /// Loads `path` if it exists, checking that it belongs to this run.
    pub fn load_or_new(path: &Path, params: &ModelParams, k: usize) -> Result<Self, ExactError> {
        if !path.exists() {
            return Ok(Checkpoint::new(params, k));
        }
        let cp = Checkpoint::from_text(&fs::read_to_string(path)?)?;
        if cp.k != k || cp.params != *params {
            return Err(ExactError::Checkpoint(format!(
                "{} was written for k = {} ({}), not k = {k} ({params})",
                path.display(),
                cp.k,
                cp.params
            )));
        }
        Ok(cp)
    }

    /// Writes through a temporary file and renames, so a crash leaves either
    /// the old or the new checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), ExactError> {
        let mut tmp = PathBuf::from(path);
        tmp.as_mut_os_string().push(".tmp");
        fs::write(&tmp, self.to_text())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn get(&self, cond: &Conditioning) -> Option<&Dyadic> {
        self.completed.get(&unit_name(cond))
    }

    pub fn record(&mut self, cond: &Conditioning, value: Dyadic) {
        self.completed.insert(unit_name(cond), value);
    }
}

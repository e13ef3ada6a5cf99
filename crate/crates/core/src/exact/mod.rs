//! Exact k-step instability probabilities for the one-dimensional automaton.
//!
//! The probability that the origin is unstable after `k` synchronous steps is
//! a function of the colors on a finite window around it. The engine
//! enumerates those windows, evaluates each by a distribution dynamic program
//! over a shrinking light cone, and takes maxima per conditioning event.
//!
//! Two evaluation routes exist:
//! * [`dp`]: generic forward distribution DP over [`Dyadic`] masses, any
//!   color count, stability constant and dyadic recoloring distribution.
//! * [`bitmask`]: backward value tables over packed binary words with a
//!   fixed-point `u128` numerator, for two colors with uniform recoloring.
//!
//! Both routes are cross-checked against each other in tests.

pub mod bitmask;
pub mod certificate;
pub mod checkpoint;
pub mod dp;
pub mod tables;
pub mod window;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use certificate::{certify, Certificate, Thirds};
pub use checkpoint::Checkpoint;
pub use dp::{frozen_window_prob, kstep_prob, masked_value, window_sufficiency_check};
pub use tables::{compute_tables, gap_sum, max_gap_sum, unbounded_sum, ProbTables};
pub use window::{enumerate_windows, window_classes, MaskedWord, WindowClass};

use crate::lattice::LatticeError;
use crate::params::ModelParams;

#[derive(Debug, thiserror::Error)]
pub enum ExactError {
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("the exact engine is one-dimensional, got d = {0}")]
    Dimension(usize),
    #[error("window radius {radius} is below the required {required}")]
    RadiusTooSmall { radius: usize, required: usize },
    #[error("window length {0} is not odd")]
    EvenWindow(usize),
    #[error("no window realizes the conditioning {0}")]
    Unrealizable(Conditioning),
    #[error("recoloring distribution is not dyadic")]
    NonDyadic,
    #[error("window does not satisfy its conditioning {0}")]
    ConditioningViolated(Conditioning),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("gap-sum identity violated: sum over unbounded region {unbounded} != half of {bounded}")]
    IdentityViolation { unbounded: String, bounded: String },
    #[error("the contraction bound assumes kappa = 3, got {0}")]
    CertificateKappa(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The event conditioned on at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Conditioning {
    /// The origin is unstable.
    UnstableAtOrigin,
    /// The origin and both of its neighbors are unstable.
    TripleUnstable,
    /// Sites `-left..=right` are stable and sites `-left-1`, `right+1` are unstable.
    StableGap { left: usize, right: usize },
}

impl Conditioning {
    pub fn is_reflection_symmetric(&self) -> bool {
        match *self {
            Conditioning::StableGap { left, right } => left == right,
            _ => true,
        }
    }

    pub fn reflected(&self) -> Conditioning {
        match *self {
            Conditioning::StableGap { left, right } => Conditioning::StableGap { left: right, right: left },
            c => c,
        }
    }

    /// Largest distance from the origin at which a stability flag is constrained.
    pub fn flag_reach(&self) -> usize {
        match *self {
            Conditioning::UnstableAtOrigin => 0,
            Conditioning::TripleUnstable => 1,
            Conditioning::StableGap { left, right } => left.max(right) + 1,
        }
    }

    /// Checks the event against flags indexed by offset from the origin.
    pub fn holds(&self, stable: impl Fn(i64) -> bool) -> bool {
        match *self {
            Conditioning::UnstableAtOrigin => !stable(0),
            Conditioning::TripleUnstable => !stable(-1) && !stable(0) && !stable(1),
            Conditioning::StableGap { left, right } => {
                let (l, r) = (left as i64, right as i64);
                (-l..=r).all(&stable) && !stable(-l - 1) && !stable(r + 1)
            }
        }
    }
}

impl fmt::Display for Conditioning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conditioning::UnstableAtOrigin => f.write_str("unstable-at-origin"),
            Conditioning::TripleUnstable => f.write_str("triple-unstable"),
            Conditioning::StableGap { left, right } => write!(f, "stable-gap({left},{right})"),
        }
    }
}

/// Window sizes for `k` steps at stability constant `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub kappa: usize,
    pub k: usize,
}

impl Geometry {
    pub fn new(params: &ModelParams, k: usize) -> Result<Self, ExactError> {
        if k == 0 {
            return Err(ExactError::ZeroSteps);
        }
        if params.dimension() != 1 {
            return Err(ExactError::Dimension(params.dimension()));
        }
        Ok(Geometry { kappa: params.kappa(), k })
    }

    /// Light-cone reach of one step.
    pub fn reach(&self) -> usize {
        self.kappa - 1
    }

    /// Radius of the color region needed after `j` steps: `(kappa-1)(k-j+1)`.
    pub fn color_radius(&self, j: usize) -> usize {
        self.reach() * (self.k + 1 - j)
    }

    /// Color radius at time zero that determines the k-step probability.
    pub fn buffer_radius(&self) -> usize {
        self.color_radius(0)
    }

    /// Radius of the masked word (stable colors, unstable marks) at time zero.
    pub fn class_radius(&self) -> usize {
        self.color_radius(1)
    }

    /// Index that stores the saturated stable-run length (`2k` for `kappa = 3`).
    pub fn saturation(&self) -> usize {
        self.reach() * self.k
    }

    /// Largest gap size in the contraction bound (`4k` for `kappa = 3`).
    pub fn gap_range(&self) -> usize {
        2 * self.saturation()
    }

    /// Window radius whose flags determine `cond` and whose colors determine the probability.
    pub fn window_radius(&self, cond: &Conditioning) -> usize {
        self.buffer_radius().max(cond.flag_reach() + self.reach())
    }

    /// Radius of the sweep that decides every table conditioning at once.
    pub fn sweep_radius(&self) -> usize {
        self.buffer_radius().max(self.saturation() + 1 + self.reach())
    }
}

/// Which symmetry reductions the table sweep may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetry {
    /// Identify windows under color permutations (requires uniform recoloring).
    pub complement: bool,
    /// Identify windows under left-right reflection.
    pub reflection: bool,
}

impl Symmetry {
    pub const NONE: Symmetry = Symmetry { complement: false, reflection: false };
    pub const ALL: Symmetry = Symmetry { complement: true, reflection: true };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Bitmask tables when the model allows, generic DP otherwise.
    #[default]
    Auto,
    Bitmask,
    Generic,
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub parallel: bool,
    pub symmetry: Symmetry,
    pub backend: Backend,
    pub checkpoint: Option<std::path::PathBuf>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { parallel: true, symmetry: Symmetry::ALL, backend: Backend::Auto, checkpoint: None }
    }
}

impl EngineOptions {
    pub fn serial() -> Self {
        EngineOptions { parallel: false, ..Default::default() }
    }
}

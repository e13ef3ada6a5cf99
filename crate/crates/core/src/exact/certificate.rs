//! The contraction coefficient `c_k = pIII/3 + 2 pI/3 + max_g gap_sum(g)/3`.
//!
//! The terms carry a factor 1/3 and so are not dyadic; [`Thirds`] stores three
//! times the value as a [`Dyadic`] and keeps every comparison exact.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Serialize, Serializer};

use crate::dyadic::Dyadic;
use crate::params::ModelParams;

use super::tables::{compute_tables, max_gap_sum, unbounded_sum, ProbTables};
use super::{EngineOptions, ExactError, Geometry};

/// A rational of the form `a / (3 * 2^e)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Thirds {
    three_times: Dyadic,
}

impl Thirds {
    /// `value / 3`.
    pub fn third_of(value: Dyadic) -> Self {
        Thirds { three_times: value }
    }

    pub fn three_times(&self) -> &Dyadic {
        &self.three_times
    }

    pub fn to_rational(&self) -> BigRational {
        self.three_times.to_rational() / BigRational::from_integer(BigInt::from(3))
    }

    pub fn to_f64(&self) -> f64 {
        self.three_times.to_f64() / 3.0
    }

    /// Reduced `a/b`.
    pub fn to_fraction_string(&self) -> String {
        let r = self.to_rational();
        if r.denom() == &BigInt::from(1) {
            r.numer().to_string()
        } else {
            format!("{}/{}", r.numer(), r.denom())
        }
    }

    pub fn cmp_one(&self) -> Ordering {
        self.three_times.cmp(&Dyadic::from_u128(3, 0))
    }
}

impl std::ops::Add for &Thirds {
    type Output = Thirds;
    fn add(self, rhs: &Thirds) -> Thirds {
        Thirds { three_times: &self.three_times + &rhs.three_times }
    }
}

/// `a/2^e` when the value is dyadic, `a/(3*2^e)` otherwise.
impl fmt::Display for Thirds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match Dyadic::from_rational(&self.to_rational()) {
            Some(d) => write!(f, "{d}"),
            None => write!(f, "{}/(3*2^{})", self.three_times.numerator(), self.three_times.exponent()),
        }
    }
}

impl Serialize for Thirds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub k: usize,
    pub tables: ProbTables,
    /// Gap size attaining the maximum gap sum.
    pub max_gap_size: usize,
    pub max_gap_sum: Dyadic,
    pub unbounded_sum: Dyadic,
    pub term_iii: Thirds,
    pub term_i: Thirds,
    pub term_gap: Thirds,
    pub c: Thirds,
}

impl Certificate {
    /// Assembles the certificate from tables; only meaningful for `kappa = 3`.
    pub fn from_tables(tables: ProbTables) -> Result<Self, ExactError> {
        let k = tables.k;
        if tables.saturation() != 2 * k {
            return Err(ExactError::CertificateKappa(tables.saturation() / k.max(1) + 1));
        }
        let unbounded = unbounded_sum(&tables)?;
        let (g, gap) = max_gap_sum(&tables);
        let term_iii = Thirds::third_of(tables.p_iii.clone());
        let term_i = Thirds::third_of(&tables.p_i + &tables.p_i);
        let term_gap = Thirds::third_of(gap.clone());
        let c = &(&term_iii + &term_i) + &term_gap;
        Ok(Certificate { k, tables, max_gap_size: g, max_gap_sum: gap, unbounded_sum: unbounded, term_iii, term_i, term_gap, c })
    }

    pub fn contraction(&self) -> bool {
        self.c.cmp_one() == Ordering::Less
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "k": self.k,
            "term_III": self.term_iii,
            "term_I": self.term_i,
            "term_gap": self.term_gap,
            "c": self.c,
            "c_reduced": self.c.to_fraction_string(),
            "contraction": self.contraction(),
            "pIII": self.tables.p_iii.to_string(),
            "pI": self.tables.p_i.to_string(),
            "max_gap_sum": self.max_gap_sum.to_string(),
            "max_gap_size": self.max_gap_size,
        })
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "pIII = {} = {}", self.tables.p_iii, self.tables.p_iii.to_fraction_string())?;
        writeln!(f, "pI = {} = {}", self.tables.p_i, self.tables.p_i.to_fraction_string())?;
        writeln!(
            f,
            "max gap sum = {} = {} (g = {})",
            self.max_gap_sum,
            self.max_gap_sum.to_fraction_string(),
            self.max_gap_size
        )?;
        writeln!(f, "term_III = {} = {}", self.term_iii, self.term_iii.to_fraction_string())?;
        writeln!(f, "term_I = {} = {}", self.term_i, self.term_i.to_fraction_string())?;
        writeln!(f, "term_gap = {} = {}", self.term_gap, self.term_gap.to_fraction_string())?;
        write!(f, "c = {} = {} ~ {:.9}", self.c, self.c.to_fraction_string(), self.c.to_f64())
    }
}

/// Computes the tables for `k` steps and the contraction certificate.
pub fn certify(params: &ModelParams, k: usize, opts: &EngineOptions) -> Result<Certificate, ExactError> {
    let geom = Geometry::new(params, k)?;
    if geom.kappa != 3 {
        return Err(ExactError::CertificateKappa(geom.kappa));
    }
    Certificate::from_tables(compute_tables(params, k, opts)?)
}

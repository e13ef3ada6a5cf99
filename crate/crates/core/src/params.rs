use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("dimension must be at least 1")]
    Dimension,
    #[error("need at least 2 colors, got {0}")]
    TooFewColors(usize),
    #[error("at most 256 colors are supported, got {0}")]
    TooManyColors(usize),
    #[error("stability constant must be at least 2, got {0}")]
    Kappa(usize),
    #[error("recoloring distribution has {got} entries for {colors} colors")]
    DistLength { got: usize, colors: usize },
    #[error("recoloring probabilities must be nonnegative")]
    NegativeProbability,
    #[error("distribution must sum to 1 (sums to {0})")]
    NotNormalized(String),
    #[error("cannot parse probability `{0}`")]
    Parse(String),
}

/// Model parameters: lattice dimension, color count, stability constant and the
/// recoloring distribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ModelParams {
    dimension: usize,
    colors: usize,
    kappa: usize,
    recolor_dist: Vec<BigRational>,
    // cumulative thresholds over a 64-bit uniform draw; last entry is 2^64
    thresholds: Vec<u128>,
}

impl ModelParams {
    pub fn new(
        dimension: usize,
        colors: usize,
        kappa: usize,
        recolor_dist: Vec<BigRational>,
    ) -> Result<Self, ParamsError> {
        if dimension == 0 {
            return Err(ParamsError::Dimension);
        }
        if colors < 2 {
            return Err(ParamsError::TooFewColors(colors));
        }
        if colors > 256 {
            return Err(ParamsError::TooManyColors(colors));
        }
        if kappa < 2 {
            return Err(ParamsError::Kappa(kappa));
        }
        if recolor_dist.iter().any(|p| p.is_negative()) {
            return Err(ParamsError::NegativeProbability);
        }
        let total: BigRational = recolor_dist.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
        if !total.is_one() {
            return Err(ParamsError::NotNormalized(total.to_string()));
        }
        if recolor_dist.len() != colors {
            return Err(ParamsError::DistLength { got: recolor_dist.len(), colors });
        }
        let scale = BigInt::one() << 64u32;
        let mut cum = BigRational::zero();
        let mut thresholds = Vec::with_capacity(colors);
        for p in &recolor_dist {
            cum += p;
            let t = (cum.numer() * &scale) / cum.denom();
            thresholds.push(t.to_u128().expect("threshold fits in 65 bits"));
        }
        Ok(ModelParams { dimension, colors, kappa, recolor_dist, thresholds })
    }

    /// Uniform recoloring over `colors` colors.
    pub fn uniform(dimension: usize, colors: usize, kappa: usize) -> Result<Self, ParamsError> {
        let p = BigRational::new(BigInt::one(), BigInt::from(colors.max(1)));
        ModelParams::new(dimension, colors, kappa, vec![p; colors])
    }

    /// `d = 1`, two colors, `kappa = 3`, `p = (1/2, 1/2)`: the setting in which
    /// almost-sure fixation is proved.
    pub fn theorem() -> Self {
        ModelParams::uniform(1, 2, 3).expect("valid parameters")
    }

    pub fn is_theorem_setting(&self) -> bool {
        *self == ModelParams::theorem()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn recolor_dist(&self) -> &[BigRational] {
        &self.recolor_dist
    }

    pub fn is_uniform(&self) -> bool {
        self.recolor_dist.windows(2).all(|w| w[0] == w[1])
    }

    /// Recoloring probabilities as dyadic rationals, if they all are.
    pub fn dyadic_dist(&self) -> Option<Vec<Dyadic>> {
        self.recolor_dist.iter().map(Dyadic::from_rational).collect()
    }

    /// Same model with a different lattice dimension.
    pub fn with_dimension(&self, dimension: usize) -> Result<Self, ParamsError> {
        ModelParams::new(dimension, self.colors, self.kappa, self.recolor_dist.clone())
    }

    /// Maps a uniform 64-bit draw to a color by inversion.
    #[inline]
    pub fn color_for_draw(&self, u: u64) -> u8 {
        let u = u128::from(u);
        self.thresholds.iter().position(|&t| u < t).unwrap_or(self.colors - 1) as u8
    }
}

/// Parses a single probability written as `a/b`, a decimal like `0.25`, or an integer.
pub fn parse_probability(s: &str) -> Result<BigRational, ParamsError> {
    let s = s.trim();
    let err = || ParamsError::Parse(s.to_string());
    if let Some((a, b)) = s.split_once('/') {
        let a = BigInt::from_str(a.trim()).map_err(|_| err())?;
        let b = BigInt::from_str(b.trim()).map_err(|_| err())?;
        if b.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let int = if int.is_empty() { "0" } else { int };
        let negative = int.starts_with('-');
        let whole = BigInt::from_str(int).map_err(|_| err())?;
        let den = num_traits::pow(BigInt::from(10u32), frac.len());
        let frac_num = BigInt::from_str(frac).map_err(|_| err())?;
        let num = whole.abs() * &den + frac_num;
        let num = if negative { -num } else { num };
        return Ok(BigRational::new(num, den));
    }
    BigInt::from_str(s).map(BigRational::from_integer).map_err(|_| err())
}

/// Parses a comma-separated distribution such as `1/2,1/2` or `0.3,0.7`.
pub fn parse_distribution(s: &str) -> Result<Vec<BigRational>, ParamsError> {
    s.split(',').map(parse_probability).collect()
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    d: usize,
    n: usize,
    kappa: usize,
    p: Vec<String>,
}

impl From<ModelParams> for ParamsRepr {
    fn from(m: ModelParams) -> Self {
        ParamsRepr {
            d: m.dimension,
            n: m.colors,
            kappa: m.kappa,
            p: m.recolor_dist.iter().map(|r| r.to_string()).collect(),
        }
    }
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = ParamsError;
    fn try_from(r: ParamsRepr) -> Result<Self, Self::Error> {
        let p = r.p.iter().map(|s| parse_probability(s)).collect::<Result<Vec<_>, _>>()?;
        ModelParams::new(r.d, r.n, r.kappa, p)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.recolor_dist.iter().map(|r| r.to_string()).collect();
        write!(f, "d={} n={} kappa={} p=({})", self.dimension, self.colors, self.kappa, p.join(","))
    }
}

//! Colorings of finite boxes in `Z^d`, stability classification and the
//! synchronous recoloring operator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::params::{ModelParams, ParamsError};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("box extents must all be at least 1, got {0:?}")]
    EmptyExtent(Vec<usize>),
    #[error("shape {shape:?} holds {expected} sites but {got} colors were given")]
    CellCount { shape: Vec<usize>, expected: usize, got: usize },
    #[error("configuration has dimension {config} but the model has dimension {model}")]
    DimensionMismatch { config: usize, model: usize },
    #[error("mask shape {mask:?} does not match configuration shape {config:?}")]
    ShapeMismatch { config: Vec<usize>, mask: Vec<usize> },
    #[error("color id {color} at site {index} is not below n = {colors}")]
    InvalidColor { index: usize, color: u8, colors: usize },
    #[error("the stable-exterior boundary is only defined in one dimension")]
    StableExteriorDimension,
    #[error("cannot parse color word `{0}`")]
    BadWord(String),
    #[error("unknown boundary policy `{0}`")]
    BadBoundary(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// How chains behave at the edge of the finite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Chains are clipped at the box edge.
    Frozen,
    /// The box tiles space; chains wrap around.
    Periodic,
    /// One-dimensional window embedded in an infinite stable region that never
    /// contributes to a chain.
    StableExterior,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Frozen => "frozen",
            Boundary::Periodic => "periodic",
            Boundary::StableExterior => "stable_exterior",
        })
    }
}

impl FromStr for Boundary {
    type Err = LatticeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "frozen" => Ok(Boundary::Frozen),
            "periodic" => Ok(Boundary::Periodic),
            "stable_exterior" | "stable" => Ok(Boundary::StableExterior),
            _ => Err(LatticeError::BadBoundary(s.to_string())),
        }
    }
}

/// A coloring of a finite box, stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    shape: Vec<usize>,
    cells: Vec<u8>,
    boundary: Boundary,
}

impl Configuration {
    pub fn new(shape: Vec<usize>, cells: Vec<u8>, boundary: Boundary) -> Result<Self, LatticeError> {
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(LatticeError::EmptyExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != cells.len() {
            return Err(LatticeError::CellCount { shape, expected, got: cells.len() });
        }
        if boundary == Boundary::StableExterior && shape.len() != 1 {
            return Err(LatticeError::StableExteriorDimension);
        }
        Ok(Configuration { shape, cells, boundary })
    }

    /// One-dimensional configuration from a digit string such as `00011`.
    pub fn from_word(word: &str, boundary: Boundary) -> Result<Self, LatticeError> {
        let cells = parse_word(word)?;
        Configuration::new(vec![cells.len()], cells, boundary)
    }

    pub fn line(cells: Vec<u8>, boundary: Boundary) -> Result<Self, LatticeError> {
        Configuration::new(vec![cells.len()], cells, boundary)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        self.shape.len()
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, coords: &[usize]) -> u8 {
        self.cells[self.index(coords)]
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.shape.len());
        coords.iter().zip(&self.shape).fold(0, |acc, (&c, &e)| {
            debug_assert!(c < e);
            acc * e + c
        })
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (axis, &e) in self.shape.iter().enumerate().rev() {
            out[axis] = index % e;
            index /= e;
        }
        out
    }

    /// Digit-string rendering for one-dimensional configurations with at most ten colors.
    pub fn to_word(&self) -> Option<String> {
        if self.dimension() != 1 || self.cells.iter().any(|&c| c > 9) {
            return None;
        }
        Some(self.cells.iter().map(|&c| char::from(b'0' + c)).collect())
    }

    pub fn with_cells(&self, cells: Vec<u8>) -> Result<Self, LatticeError> {
        Configuration::new(self.shape.clone(), cells, self.boundary)
    }

    /// Checks the configuration against the model: dimension and color range.
    pub fn validate(&self, params: &ModelParams) -> Result<(), LatticeError> {
        if self.dimension() != params.dimension() {
            return Err(LatticeError::DimensionMismatch { config: self.dimension(), model: params.dimension() });
        }
        if let Some((index, &color)) = self.cells.iter().enumerate().find(|(_, &c)| usize::from(c) >= params.colors()) {
            return Err(LatticeError::InvalidColor { index, color, colors: params.colors() });
        }
        Ok(())
    }
}

pub fn parse_word(word: &str) -> Result<Vec<u8>, LatticeError> {
    let word = word.trim();
    if word.is_empty() || !word.bytes().all(|b| b.is_ascii_digit()) {
        return Err(LatticeError::BadWord(word.to_string()));
    }
    Ok(word.bytes().map(|b| b - b'0').collect())
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_word() {
            Some(w) => f.write_str(&w),
            None => write!(f, "{:?}{:?}", self.shape, self.cells),
        }
    }
}

/// Stability flags aligned with a configuration; `true` means stable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StabilityMask {
    shape: Vec<usize>,
    bits: Vec<bool>,
}

impl StabilityMask {
    pub fn new(shape: Vec<usize>, bits: Vec<bool>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), bits.len());
        StabilityMask { shape, bits }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_stable_at(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn unstable_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i)
    }

    /// Digit rendering (`1` stable, `0` unstable) for one-dimensional masks.
    pub fn to_word(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Marks every site of a line that lies on a run of at least `kappa` equal
/// colors. Returns `true` for unstable sites.
pub fn line_unstable(colors: &[u8], kappa: usize, periodic: bool) -> Vec<bool> {
    let len = colors.len();
    let mut out = vec![false; len];
    if len == 0 {
        return out;
    }
    if periodic {
        // a monochrome cycle is an infinite chain
        if colors.iter().all(|&c| c == colors[0]) {
            out.fill(true);
            return out;
        }
        let start = (0..len).find(|&i| colors[i] != colors[(i + len - 1) % len]).unwrap();
        let mut i = 0;
        while i < len {
            let c = colors[(start + i) % len];
            let mut j = i + 1;
            while j < len && colors[(start + j) % len] == c {
                j += 1;
            }
            if j - i >= kappa {
                for t in i..j {
                    out[(start + t) % len] = true;
                }
            }
            i = j;
        }
        return out;
    }
    let mut i = 0;
    while i < len {
        let mut j = i + 1;
        while j < len && colors[j] == colors[i] {
            j += 1;
        }
        if j - i >= kappa {
            out[i..j].fill(true);
        }
        i = j;
    }
    out
}

/// Computes the stability function of `config`: a site is unstable iff it lies
/// on an axis-aligned monochromatic chain of length at least `kappa`.
pub fn classify_stability(config: &Configuration, params: &ModelParams) -> Result<StabilityMask, LatticeError> {
    config.validate(params)?;
    let shape = config.shape();
    let periodic = config.boundary() == Boundary::Periodic;
    let mut unstable = vec![false; config.len()];
    let mut line = Vec::new();
    for axis in 0..shape.len() {
        let extent = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * extent * stride + inner;
                line.clear();
                line.extend((0..extent).map(|i| config.cells[base + i * stride]));
                for (i, u) in line_unstable(&line, params.kappa(), periodic).into_iter().enumerate() {
                    if u {
                        unstable[base + i * stride] = true;
                    }
                }
            }
        }
    }
    Ok(StabilityMask::new(shape.to_vec(), unstable.into_iter().map(|u| !u).collect()))
}

pub fn count_unstable(mask: &StabilityMask) -> usize {
    mask.bits.iter().filter(|&&b| !b).count()
}

pub fn is_stable(config: &Configuration, params: &ModelParams) -> Result<bool, LatticeError> {
    Ok(count_unstable(&classify_stability(config, params)?) == 0)
}

/// One application of the recoloring operator: every unstable site is redrawn
/// independently from the recoloring distribution, stable sites keep their color.
pub fn step(config: &Configuration, params: &ModelParams, rng: &mut RngStream) -> Result<Configuration, LatticeError> {
    let mask = classify_stability(config, params)?;
    step_with_mask(config, &mask, params, rng)
}

/// [`step`] with a precomputed mask. Draws are consumed in row-major order of
/// the unstable sites.
pub fn step_with_mask(
    config: &Configuration,
    mask: &StabilityMask,
    params: &ModelParams,
    rng: &mut RngStream,
) -> Result<Configuration, LatticeError> {
    if mask.shape() != config.shape() {
        return Err(LatticeError::ShapeMismatch { config: config.shape().to_vec(), mask: mask.shape().to_vec() });
    }
    let mut cells = config.cells.clone();
    for i in mask.unstable_indices() {
        cells[i] = params.color_for_draw(rng.next_u64());
    }
    Ok(Configuration { shape: config.shape.clone(), cells, boundary: config.boundary })
}

/// JSON form of a configuration together with the model constants it is read under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationFile {
    pub d: usize,
    pub shape: Vec<usize>,
    pub colors: Vec<u8>,
    pub boundary: Boundary,
    pub kappa: usize,
    pub n: usize,
}

impl ConfigurationFile {
    pub fn from_parts(config: &Configuration, params: &ModelParams) -> Self {
        ConfigurationFile {
            d: config.dimension(),
            shape: config.shape.clone(),
            colors: config.cells.clone(),
            boundary: config.boundary,
            kappa: params.kappa(),
            n: params.colors(),
        }
    }

    /// Rebuilds the configuration; the model uses uniform recoloring unless
    /// the caller swaps in its own distribution.
    pub fn into_parts(self) -> Result<(Configuration, ModelParams), LatticeError> {
        let params = ModelParams::uniform(self.d, self.n, self.kappa)?;
        if self.shape.len() != self.d {
            return Err(LatticeError::DimensionMismatch { config: self.shape.len(), model: self.d });
        }
        let config = Configuration::new(self.shape, self.colors, self.boundary)?;
        config.validate(&params)?;
        Ok((config, params))
    }
}

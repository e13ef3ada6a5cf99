//! Monte Carlo estimates of k-step probabilities compared against exact values.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dyadic::Dyadic;
use crate::exact::{kstep_prob, ExactError, Geometry, MaskedWord, WindowClass};
use crate::lattice::line_unstable;
use crate::montecarlo::{estimate_kstep_prob, Estimate, MonteCarloError};
use crate::params::ModelParams;
use crate::rng::RngStream;

#[derive(Debug, thiserror::Error)]
pub enum CrosscheckError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
}

/// Which window classes to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// One representative per class over all words at the light-cone radius.
    All,
    /// Distinct classes of uniformly drawn words, this many of them.
    Random(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckRow {
    pub window: String,
    pub class: String,
    pub exact: Dyadic,
    pub estimate: Estimate,
    /// Deviation in units of the standard error at the exact value.
    pub z: f64,
    pub pass: bool,
}

fn class_of(colors: &[u8], geom: &Geometry, uniform: bool) -> MaskedWord {
    let r = colors.len() / 2;
    let cr = geom.class_radius();
    let unstable = line_unstable(colors, geom.kappa, false);
    MaskedWord { sites: (r - cr..=r + cr).map(|p| (!unstable[p]).then_some(colors[p])).collect() }
        .canonical(uniform, true)
}

/// Representative windows (first found per class) for `k` steps.
pub fn select_windows(params: &ModelParams, k: usize, selection: Selection, seed: u64) -> Result<Vec<Vec<u8>>, ExactError> {
    let geom = Geometry::new(params, k)?;
    let len = 2 * geom.buffer_radius() + 1;
    let n = params.colors() as u64;
    let uniform = params.is_uniform();
    let mut reps: BTreeMap<MaskedWord, Vec<u8>> = BTreeMap::new();
    match selection {
        Selection::All => {
            let total = n.checked_pow(len as u32).filter(|&t| t <= 1 << 24);
            let total = total.ok_or_else(|| ExactError::TooLarge(format!("{n}^{len} windows")))?;
            for code in 0..total {
                let mut c = code;
                let colors: Vec<u8> = (0..len)
                    .map(|_| {
                        let v = (c % n) as u8;
                        c /= n;
                        v
                    })
                    .collect();
                reps.entry(class_of(&colors, &geom, uniform)).or_insert(colors);
            }
        }
        Selection::Random(count) => {
            let mut rng = RngStream::new(seed, u64::MAX);
            let mut attempts = 0usize;
            while reps.len() < count {
                attempts += 1;
                if attempts > 1000 * count.max(1) {
                    return Err(ExactError::TooLarge(format!("fewer than {count} distinct classes found")));
                }
                let colors: Vec<u8> = (0..len).map(|_| rng.below(n) as u8).collect();
                reps.entry(class_of(&colors, &geom, uniform)).or_insert(colors);
            }
        }
    }
    Ok(reps.into_values().collect())
}

/// Estimates every window's k-step probability from `samples` runs and
/// compares it with the exact value. A row passes when the deviation is at
/// most `tolerance` standard errors (exact agreement when the value is 0 or 1).
pub fn crosscheck(
    params: &ModelParams,
    k: usize,
    windows: &[Vec<u8>],
    samples: u64,
    seed: u64,
    tolerance: f64,
) -> Result<Vec<CrosscheckRow>, CrosscheckError> {
    let geom = Geometry::new(params, k)?;
    let uniform = params.is_uniform();
    windows
        .iter()
        .enumerate()
        .map(|(i, colors)| {
            let w = WindowClass::new(params, colors.clone(), None)?;
            let exact = kstep_prob(params, &w, k)?;
            let estimate = estimate_kstep_prob(params, colors, k, samples, seed.wrapping_add(i as u64))?;
            let p = exact.to_f64();
            let se = estimate.standard_error_at(p);
            let delta = (estimate.frequency() - p).abs();
            let (z, pass) = if se == 0.0 { (if delta == 0.0 { 0.0 } else { f64::INFINITY }, delta == 0.0) } else { (delta / se, delta <= tolerance * se) };
            Ok(CrosscheckRow { window: w.to_word(), class: class_of(colors, &geom, uniform).to_string(), exact, estimate, z, pass })
        })
        .collect()
}

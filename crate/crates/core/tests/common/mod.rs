//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the engine under test beyond reading parameters.
#![allow(dead_code)]

use std::collections::BTreeMap;

use candy_core::params::ModelParams;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Site `i` is unstable iff the maximal run through it has length at least `kappa`.
/// The word is clipped at both ends.
pub fn unstable_sites(colors: &[u8], kappa: usize) -> Vec<bool> {
    (0..colors.len())
        .map(|i| {
            let left = colors[..i].iter().rev().take_while(|&&c| c == colors[i]).count();
            let right = colors[i + 1..].iter().take_while(|&&c| c == colors[i]).count();
            left + right + 1 >= kappa
        })
        .collect()
}

/// Probability that the center is unstable after `k` steps, summing over
/// every sequence of recoloring outcomes without any projection.
pub fn brute_force_prob(colors: &[u8], k: usize, params: &ModelParams) -> BigRational {
    let center = colors.len() / 2;
    let unstable = unstable_sites(colors, params.kappa());
    if k == 0 {
        return if unstable[center] { BigRational::one() } else { BigRational::zero() };
    }
    let open: Vec<usize> = (0..colors.len()).filter(|&i| unstable[i]).collect();
    if open.is_empty() {
        return BigRational::zero();
    }
    let dist = params.recolor_dist();
    let n = dist.len();
    let mut total = BigRational::zero();
    let mut word = colors.to_vec();
    let outcomes = n.pow(open.len() as u32);
    for code in 0..outcomes {
        let mut c = code;
        let mut weight = BigRational::one();
        for &pos in &open {
            let color = c % n;
            c /= n;
            word[pos] = color as u8;
            weight *= &dist[color];
        }
        if !weight.is_zero() {
            total += weight * brute_force_prob(&word, k - 1, params);
        }
    }
    total
}

/// Every word of `len` colors.
pub fn all_words(n: usize, len: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..n.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let c = (code % n) as u8;
                code /= n;
                c
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Unit {
    I,
    III,
    S(usize, usize),
}

/// Tables by direct maximization over every word (no symmetry reduction),
/// evaluated with [`brute_force_prob`]. Practical for k = 1 only.
pub fn brute_force_tables(params: &ModelParams, k: usize) -> BTreeMap<Unit, BigRational> {
    let kappa = params.kappa();
    let reach = kappa - 1;
    let s = reach * k;
    let cone = reach * (k + 1);
    let radius = cone.max(s + 1 + reach);
    let mut best: BTreeMap<Unit, BigRational> = BTreeMap::new();
    let mut cache: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
    for word in all_words(params.colors(), 2 * radius + 1) {
        let flags = unstable_sites(&word, kappa);
        let u = |x: i64| flags[(radius as i64 + x) as usize];
        let mut units = Vec::new();
        if u(0) {
            units.push(Unit::I);
            if u(-1) && u(1) {
                units.push(Unit::III);
            }
        } else {
            let run = |dir: i64| (0..=s).find(|&t| u(dir * (t as i64 + 1)));
            if let (Some(l), Some(r)) = (run(-1), run(1)) {
                units.push(Unit::S(l, r));
            }
        }
        if units.is_empty() {
            continue;
        }
        let sub = word[radius - cone..=radius + cone].to_vec();
        let p = cache.entry(sub.clone()).or_insert_with(|| brute_force_prob(&sub, k, params)).clone();
        for unit in units {
            let slot = best.entry(unit).or_insert_with(BigRational::zero);
            if p > *slot {
                *slot = p.clone();
            }
        }
    }
    best
}

//! Forward distribution DP with exact dyadic masses.
//!
//! The state after `j` steps is a distribution over color words on a symmetric
//! region. Each step classifies the word, branches every retained unstable
//! site over the recoloring distribution and projects onto the region of
//! radius `(kappa-1)(k-j)`, merging equal words. Sites outside that region
//! cannot reach the origin's final neighborhood any more.

use std::collections::BTreeMap;

use crate::dyadic::Dyadic;
use crate::lattice::line_unstable;
use crate::params::ModelParams;

use super::window::{MaskedWord, WindowClass};
use super::{ExactError, Geometry};

type Dist = BTreeMap<Vec<u8>, Dyadic>;

struct Branching {
    kappa: usize,
    // (color, probability) for colors of positive probability
    support: Vec<(u8, Dyadic)>,
}

impl Branching {
    fn new(params: &ModelParams) -> Result<Self, ExactError> {
        let dist = params.dyadic_dist().ok_or(ExactError::NonDyadic)?;
        let support = dist
            .into_iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(c, p)| (c as u8, p))
            .collect();
        Ok(Branching { kappa: params.kappa(), support })
    }

    /// Adds `mass` times every completion of `word` at `open` positions to `out`.
    fn expand(&self, word: &mut Vec<u8>, open: &[usize], mass: Dyadic, out: &mut Dist) {
        match open.split_first() {
            None => {
                let slot = out.entry(word.clone()).or_insert_with(Dyadic::zero);
                *slot = &*slot + &mass;
            }
            Some((&pos, rest)) => {
                for (c, p) in &self.support {
                    word[pos] = *c;
                    self.expand(word, rest, &mass * p, out);
                }
            }
        }
    }

    /// One synchronous step followed by projection onto radius `keep` (or the
    /// word's own radius if smaller). Classification clips at the word's edge.
    fn advance(&self, dist: &Dist, keep: usize) -> Dist {
        let mut out = Dist::new();
        for (word, mass) in dist {
            let r = word.len() / 2;
            let keep = keep.min(r);
            let unstable = line_unstable(word, self.kappa, false);
            let lo = r - keep;
            let mut next = word[lo..=r + keep].to_vec();
            let open: Vec<usize> = (0..next.len()).filter(|&i| unstable[lo + i]).collect();
            self.expand(&mut next, &open, mass.clone(), &mut out);
        }
        out
    }

    fn origin_unstable_mass(&self, dist: &Dist) -> Dyadic {
        dist.iter()
            .filter(|(w, _)| line_unstable(w, self.kappa, false)[w.len() / 2])
            .map(|(_, m)| m)
            .sum()
    }

    fn run(&self, geom: &Geometry, mut dist: Dist, from_step: usize) -> Dyadic {
        for j in from_step..geom.k {
            dist = self.advance(&dist, geom.color_radius(j + 1));
        }
        self.origin_unstable_mass(&dist)
    }
}

/// Exact probability that the origin is unstable after `k` steps, starting
/// from the window's colors. The window must cover the light cone,
/// radius `(kappa-1)(k+1)`.
pub fn kstep_prob(params: &ModelParams, w: &WindowClass, k: usize) -> Result<Dyadic, ExactError> {
    let geom = Geometry::new(params, k)?;
    let required = geom.buffer_radius();
    if w.radius() < required {
        return Err(ExactError::RadiusTooSmall { radius: w.radius(), required });
    }
    let branching = Branching::new(params)?;
    let start = Dist::from([(w.cropped_colors(required).to_vec(), Dyadic::one())]);
    Ok(branching.run(&geom, start, 0))
}

/// Same probability as [`kstep_prob`], starting from a masked word at the class
/// radius `(kappa-1)k`: the first recoloring is applied directly to the masked sites.
pub fn masked_value(params: &ModelParams, masked: &MaskedWord, k: usize) -> Result<Dyadic, ExactError> {
    let geom = Geometry::new(params, k)?;
    let required = geom.class_radius();
    let r = masked.radius();
    if r < required {
        return Err(ExactError::RadiusTooSmall { radius: r, required });
    }
    let branching = Branching::new(params)?;
    let sites = &masked.sites[r - required..=r + required];
    let mut word: Vec<u8> = sites.iter().map(|s| s.unwrap_or(0)).collect();
    let open: Vec<usize> = (0..sites.len()).filter(|&i| sites[i].is_none()).collect();
    let mut start = Dist::new();
    branching.expand(&mut word, &open, Dyadic::one(), &mut start);
    Ok(branching.run(&geom, start, 1))
}

/// Probability that the center of `colors` is unstable after `k` steps when
/// the word is treated as a finite box with clipped (frozen) edges. For
/// windows covering the light cone this equals [`kstep_prob`]; narrower
/// windows may disagree with their extensions.
pub fn frozen_window_prob(params: &ModelParams, colors: &[u8], k: usize) -> Result<Dyadic, ExactError> {
    let geom = Geometry::new(params, k)?;
    if colors.len() % 2 == 0 {
        return Err(ExactError::EvenWindow(colors.len()));
    }
    let branching = Branching::new(params)?;
    let start = Dist::from([(colors.to_vec(), Dyadic::one())]);
    Ok(branching.run(&geom, start, 0))
}

/// Searches `sample` for a window whose frozen-edge k-step probability changes
/// when one site of any color is added on each side.
pub fn find_insufficient_window(
    params: &ModelParams,
    k: usize,
    sample: &[WindowClass],
) -> Result<Option<(WindowClass, [u8; 2])>, ExactError> {
    let colors = params.colors() as u8;
    for w in sample {
        let base = frozen_window_prob(params, w.colors(), k)?;
        let mut ext = Vec::with_capacity(w.colors().len() + 2);
        for left in 0..colors {
            for right in 0..colors {
                ext.clear();
                ext.push(left);
                ext.extend_from_slice(w.colors());
                ext.push(right);
                if frozen_window_prob(params, &ext, k)? != base {
                    return Ok(Some((w.clone(), [left, right])));
                }
            }
        }
    }
    Ok(None)
}

/// True iff every sampled window's k-step probability is unchanged by all
/// one-site exterior extensions.
pub fn window_sufficiency_check(params: &ModelParams, k: usize, sample: &[WindowClass]) -> Result<bool, ExactError> {
    Ok(find_insufficient_window(params, k, sample)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Conditioning;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn window(word: &str) -> WindowClass {
        WindowClass::from_word(&ModelParams::theorem(), word, None).unwrap()
    }

    #[test]
    fn first_table_rows() {
        let p = ModelParams::theorem();
        // exterior sites chosen so the flags on [-2,2] match each row
        for (word, flags, expected) in [
            ("000000000", "00000", "1/2"),
            ("000000100", "00001", "1/2"),
            ("000001000", "00010", "1/2"),
            ("000001011", "00011", "3/8"),
            ("000001100", "00011", "5/8"),
            ("001000100", "10001", "1/2"),
        ] {
            let w = WindowClass::from_word(&p, word, Some(Conditioning::UnstableAtOrigin)).unwrap();
            assert_eq!(w.flag_word(), flags, "{word}");
            assert_eq!(kstep_prob(&p, &w, 1).unwrap(), d(expected), "{word}");
        }
    }

    #[test]
    fn second_table_rows() {
        let p = ModelParams::theorem();
        let cond = Some(Conditioning::StableGap { left: 1, right: 2 });
        for (core, expected) in [("01001", "0"), ("01010", "0"), ("01011", "0"), ("10010", "1/2"), ("10011", "1/2")] {
            // site -2 completes a chain to the left, site 3 starts one to the right
            let left = core[..1].repeat(3);
            let right = if core.ends_with('1') { "000" } else { "111" };
            let word = format!("{left}{core}{right}");
            let w = WindowClass::from_word(&p, &word, cond).unwrap();
            assert_eq!(kstep_prob(&p, &w, 1).unwrap(), d(expected), "{word}");
        }
    }

    #[test]
    fn stable_window_never_destabilizes() {
        let p = ModelParams::theorem();
        let w = window("0101101001101");
        for k in 1..=5 {
            let w = WindowClass::new(&p, {
                let mut c = Vec::new();
                while c.len() < 4 * k + 5 {
                    c.extend([0u8, 1, 1, 0]);
                }
                c.truncate(4 * k + 5);
                c
            }, None)
            .unwrap();
            assert_eq!(kstep_prob(&p, &w, k).unwrap(), Dyadic::zero());
        }
        assert_eq!(kstep_prob(&p, &w, 2).unwrap(), Dyadic::zero());
    }

    #[test]
    fn radius_too_small() {
        let p = ModelParams::theorem();
        let err = kstep_prob(&p, &window("0000000"), 2).unwrap_err();
        assert!(matches!(err, ExactError::RadiusTooSmall { radius: 3, required: 6 }));
        assert!(matches!(kstep_prob(&p, &window("000000000"), 0), Err(ExactError::ZeroSteps)));
    }

    #[test]
    fn masked_route_matches_window_route() {
        let p = ModelParams::theorem();
        for word in ["000001011", "000001100", "110010011", "000111000", "0110100110100"] {
            let w = window(word);
            let k = (w.radius() - 2) / 2;
            let m = w.masked(2 * k);
            assert_eq!(kstep_prob(&p, &w, k).unwrap(), masked_value(&p, &m, k).unwrap(), "{word}");
        }
    }

    #[test]
    fn frozen_route_matches_on_covering_windows() {
        let p = ModelParams::theorem();
        for word in ["000001011", "0001110001110", "00100011101"] {
            let w = window(word);
            assert_eq!(kstep_prob(&p, &w, 1).unwrap(), frozen_window_prob(&p, w.colors(), 1).unwrap());
        }
    }

    #[test]
    fn even_window_rejected() {
        assert!(matches!(frozen_window_prob(&ModelParams::theorem(), &[0, 0], 1), Err(ExactError::EvenWindow(2))));
    }

    #[test]
    fn truncated_radius_is_caught() {
        let p = ModelParams::theorem();
        // radius 2k = 2: the exterior site 3 can complete a chain 0 0 0 at 1..3
        let w = window("01100");
        assert!(!window_sufficiency_check(&p, 1, &[w]).unwrap());
        let w = window("000110000");
        assert!(window_sufficiency_check(&p, 1, &[w]).unwrap());
    }

    #[test]
    fn non_dyadic_distribution_rejected() {
        let p = ModelParams::uniform(1, 3, 3).unwrap();
        let w = WindowClass::from_word(&p, "000000000", None).unwrap();
        assert!(matches!(kstep_prob(&p, &w, 1), Err(ExactError::NonDyadic)));
    }
}

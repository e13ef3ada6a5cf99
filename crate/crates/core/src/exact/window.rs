use std::collections::BTreeSet;
use std::fmt;

use crate::lattice::line_unstable;
use crate::params::ModelParams;

use super::{Conditioning, ExactError, Geometry};

/// Largest number of color words [`enumerate_windows`] will materialize.
const MAX_ENUMERATION: u64 = 1 << 26;

/// A color word on `[-radius, radius]` with the stability flags it determines.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowClass {
    radius: usize,
    kappa: usize,
    colors: Vec<u8>,
    // stable flags on [-flag_radius, flag_radius]
    flags: Vec<bool>,
    conditioning: Option<Conditioning>,
}

impl WindowClass {
    /// Builds a window from its colors (listed from `-radius` to `radius`) and
    /// checks it against `conditioning`.
    pub fn new(params: &ModelParams, colors: Vec<u8>, conditioning: Option<Conditioning>) -> Result<Self, ExactError> {
        if colors.len() % 2 == 0 {
            return Err(ExactError::EvenWindow(colors.len()));
        }
        let kappa = params.kappa();
        let radius = colors.len() / 2;
        let reach = kappa - 1;
        if radius < reach {
            return Err(ExactError::RadiusTooSmall { radius, required: reach });
        }
        if let Some((index, &color)) = colors.iter().enumerate().find(|(_, &c)| usize::from(c) >= params.colors()) {
            return Err(crate::lattice::LatticeError::InvalidColor { index, color, colors: params.colors() }.into());
        }
        let unstable = line_unstable(&colors, kappa, false);
        let flags = unstable[reach..colors.len() - reach].iter().map(|&u| !u).collect();
        let w = WindowClass { radius, kappa, colors, flags, conditioning };
        if let Some(cond) = conditioning {
            let required = cond.flag_reach() + reach;
            if radius < required {
                return Err(ExactError::RadiusTooSmall { radius, required });
            }
            if !cond.holds(|x| w.stable(x).expect("within flag radius")) {
                return Err(ExactError::ConditioningViolated(cond));
            }
        }
        Ok(w)
    }

    pub fn from_word(params: &ModelParams, word: &str, conditioning: Option<Conditioning>) -> Result<Self, ExactError> {
        WindowClass::new(params, crate::lattice::parse_word(word)?, conditioning)
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    pub fn conditioning(&self) -> Option<Conditioning> {
        self.conditioning
    }

    pub fn flag_radius(&self) -> usize {
        self.radius - (self.kappa - 1)
    }

    pub fn color(&self, x: i64) -> u8 {
        self.colors[(x + self.radius as i64) as usize]
    }

    /// Stability of site `x`, if the window determines it.
    pub fn stable(&self, x: i64) -> Option<bool> {
        let f = self.flag_radius() as i64;
        (-f..=f).contains(&x).then(|| self.flags[(x + f) as usize])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Colors on the central `[-radius, radius]` sub-window.
    pub fn cropped_colors(&self, radius: usize) -> &[u8] {
        assert!(radius <= self.radius);
        &self.colors[self.radius - radius..=self.radius + radius]
    }

    /// Stable sites keep their color, unstable ones are masked, on `[-radius, radius]`.
    pub fn masked(&self, radius: usize) -> MaskedWord {
        assert!(radius <= self.flag_radius(), "masked radius {radius} beyond flag radius {}", self.flag_radius());
        let sites = (-(radius as i64)..=radius as i64)
            .map(|x| self.stable(x).unwrap().then(|| self.color(x)))
            .collect();
        MaskedWord { sites }
    }

    pub fn to_word(&self) -> String {
        self.colors.iter().map(|&c| char::from(b'0' + c.min(9))).collect()
    }

    /// Flags rendered as digits, `1` for stable.
    pub fn flag_word(&self) -> String {
        self.flags.iter().map(|&s| if s { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for WindowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.to_word(), self.flag_word())?;
        if let Some(c) = self.conditioning {
            write!(f, " [{c}]")?;
        }
        Ok(())
    }
}

/// Stable colors and unstable marks (`None`) on a symmetric interval. One step
/// of the automaton only sees a window through this word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaskedWord {
    pub sites: Vec<Option<u8>>,
}

impl MaskedWord {
    pub fn radius(&self) -> usize {
        self.sites.len() / 2
    }

    pub fn reflected(&self) -> MaskedWord {
        MaskedWord { sites: self.sites.iter().rev().copied().collect() }
    }

    /// Relabels colors in order of first appearance.
    pub fn relabeled(&self) -> MaskedWord {
        let mut map: Vec<Option<u8>> = vec![None; 256];
        let mut next = 0u8;
        let sites = self
            .sites
            .iter()
            .map(|s| {
                s.map(|c| {
                    *map[usize::from(c)].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
            })
            .collect();
        MaskedWord { sites }
    }

    /// Representative under color permutations (if `permute`) and reflection (if `reflect`).
    pub fn canonical(&self, permute: bool, reflect: bool) -> MaskedWord {
        let fix = |w: MaskedWord| if permute { w.relabeled() } else { w };
        let a = fix(self.clone());
        if reflect {
            a.min(fix(self.reflected()))
        } else {
            a
        }
    }
}

impl fmt::Display for MaskedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sites {
            match s {
                Some(c) => write!(f, "{c}")?,
                None => f.write_str("*")?,
            }
        }
        Ok(())
    }
}

/// All color words on the window for `k` steps that realize `cond`. Under
/// uniform recoloring the origin is fixed to color 0 (color symmetry).
pub fn enumerate_windows(params: &ModelParams, k: usize, cond: Conditioning) -> Result<Vec<WindowClass>, ExactError> {
    let geom = Geometry::new(params, k)?;
    let radius = geom.window_radius(&cond);
    let len = 2 * radius + 1;
    let n = params.colors() as u64;
    let fix_origin = params.is_uniform();
    let free = if fix_origin { len - 1 } else { len };
    let total = (n as u128).checked_pow(free as u32).filter(|&t| t <= u128::from(MAX_ENUMERATION));
    let Some(total) = total else {
        return Err(ExactError::TooLarge(format!("{n}^{free} color words")));
    };
    let mut out = Vec::new();
    let mut colors = vec![0u8; len];
    for code in 0..total as u64 {
        let mut c = code;
        for (i, slot) in colors.iter_mut().enumerate() {
            if fix_origin && i == radius {
                *slot = 0;
                continue;
            }
            *slot = (c % n) as u8;
            c /= n;
        }
        match WindowClass::new(params, colors.clone(), Some(cond)) {
            Ok(w) => out.push(w),
            Err(ExactError::ConditioningViolated(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(ExactError::Unrealizable(cond));
    }
    Ok(out)
}

/// Distinct masked words at the class radius, identified under color
/// permutations (uniform recoloring only) and, if `reflect`, reflection.
pub fn window_classes(params: &ModelParams, k: usize, windows: &[WindowClass], reflect: bool) -> Result<Vec<MaskedWord>, ExactError> {
    let geom = Geometry::new(params, k)?;
    let radius = geom.class_radius();
    let permute = params.is_uniform();
    let set: BTreeSet<MaskedWord> = windows.iter().map(|w| w.masked(radius).canonical(permute, reflect)).collect();
    Ok(set.into_iter().collect())
}

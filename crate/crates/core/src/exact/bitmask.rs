//! Backward value tables for two colors with uniform recoloring.
//!
//! Words are packed into `u64` with site `x` of a radius-`r` word at bit
//! `x + r`. `V_j(c)` is the probability that the origin is unstable at time
//! `k` given colors `c` on radius `(kappa-1)(k-j+1)` at time `j`; it is stored
//! as an integer numerator over `2^E_j`. A time-zero window enters through its
//! masked word (stable colors plus the set of unstable sites), and its value is
//! the average of `V_1` over all recolorings of the unstable sites.

use rayon::prelude::*;

use crate::dyadic::Dyadic;

use super::{ExactError, Geometry};

/// Largest level-one word length whose table is built (2^24 entries).
const MAX_TABLE_BITS: usize = 24;

#[inline]
pub fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Sites of a packed binary word of `len` sites lying on a run of at least
/// `kappa` equal colors. Runs are clipped at the word's ends.
#[inline]
pub fn unstable_bits(word: u64, len: usize, kappa: usize) -> u64 {
    if len < kappa {
        return 0;
    }
    // eq bit i: site i equals site i+1
    let eq = !(word ^ (word >> 1)) & low_mask(len - 1);
    let mut starts = eq;
    for s in 1..kappa - 1 {
        starts &= eq >> s;
    }
    starts &= low_mask(len + 1 - kappa);
    let mut out = 0;
    for s in 0..kappa {
        out |= starts << s;
    }
    out & low_mask(len)
}

#[inline]
pub fn reverse_bits(x: u64, len: usize) -> u64 {
    if len == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - len)
    }
}

/// A masked word at the class radius: colors of stable sites and the set of unstable sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedMasked(u64);

impl PackedMasked {
    pub fn new(base: u64, unstable: u64) -> Self {
        debug_assert_eq!(base & unstable, 0);
        PackedMasked((unstable << 32) | base)
    }

    pub fn base(self) -> u64 {
        self.0 & 0xffff_ffff
    }

    pub fn unstable(self) -> u64 {
        self.0 >> 32
    }

    pub fn complemented(self, len: usize) -> Self {
        let u = self.unstable();
        PackedMasked::new(!self.base() & !u & low_mask(len), u)
    }

    pub fn reflected(self, len: usize) -> Self {
        PackedMasked::new(reverse_bits(self.base(), len), reverse_bits(self.unstable(), len))
    }
}

pub struct ValueTables {
    geom: Geometry,
    // levels[j-1] holds V_j over words of length 2*color_radius(j)+1
    levels: Vec<Vec<u128>>,
    exps: Vec<u32>,
}

impl ValueTables {
    pub fn build(geom: Geometry, parallel: bool) -> Result<Self, ExactError> {
        let k = geom.k;
        let len = |j: usize| 2 * geom.color_radius(j) + 1;
        if len(1) > MAX_TABLE_BITS {
            return Err(ExactError::TooLarge(format!("value table over 2^{} words", len(1))));
        }
        // exponent of V_j is the number of sites recolored in steps j..k
        let mut exps = vec![0u32; k + 1];
        for j in (0..k).rev() {
            exps[j] = exps[j + 1] + len(j + 1) as u32;
        }
        if exps[0] > 127 {
            return Err(ExactError::TooLarge(format!("fixed-point exponent {} exceeds 127", exps[0])));
        }
        let reach = geom.reach();
        let kappa = geom.kappa;
        let top_len = len(k);
        let top: Vec<u128> = (0..1u64 << top_len)
            .map(|c| u128::from((unstable_bits(c, top_len, kappa) >> reach) & 1))
            .collect();
        let mut levels = vec![top];
        for j in (1..k).rev() {
            let (l, inner_len) = (len(j), len(j + 1));
            let next = levels.last().unwrap();
            let value = |c: u64| {
                let inner = (unstable_bits(c, l, kappa) >> reach) & low_mask(inner_len);
                let base = (c >> reach) & low_mask(inner_len) & !inner;
                subcube_sum(next, base, inner) << (inner_len as u32 - inner.count_ones())
            };
            let table: Vec<u128> = if parallel {
                (0..1u64 << l).into_par_iter().map(value).collect()
            } else {
                (0..1u64 << l).map(value).collect()
            };
            levels.push(table);
        }
        levels.reverse();
        Ok(ValueTables { geom, levels, exps })
    }

    pub fn geometry(&self) -> Geometry {
        self.geom
    }

    /// Number of sites in a class-radius masked word.
    pub fn class_len(&self) -> usize {
        2 * self.geom.class_radius() + 1
    }

    /// Denominator exponent of [`Self::masked_numerator`].
    pub fn exponent(&self) -> u32 {
        self.exps[0]
    }

    /// Numerator over `2^exponent()` of the k-step probability for a masked word.
    pub fn masked_numerator(&self, key: PackedMasked) -> u128 {
        let l = self.class_len();
        let inner = key.unstable();
        subcube_sum(&self.levels[0], key.base(), inner) << (l as u32 - inner.count_ones())
    }

    pub fn masked_value(&self, key: PackedMasked) -> Dyadic {
        Dyadic::from_u128(self.masked_numerator(key), self.exponent())
    }

    /// Value of a full color word at level `j` (`1 <= j <= k`), as a dyadic.
    pub fn level_value(&self, j: usize, word: u64) -> Dyadic {
        Dyadic::from_u128(self.levels[j - 1][word as usize], self.exps[j])
    }
}

/// Sum of `table[base | sub]` over all subsets `sub` of `free`.
#[inline]
fn subcube_sum(table: &[u128], base: u64, free: u64) -> u128 {
    let mut sum = 0u128;
    let mut sub = 0u64;
    loop {
        sum += table[(base | sub) as usize];
        sub = sub.wrapping_sub(free) & free;
        if sub == 0 {
            return sum;
        }
    }
}

/// Packs a color word given as a slice of 0/1 values (site `-r` first).
pub fn pack(colors: &[u8]) -> u64 {
    colors.iter().enumerate().fold(0, |acc, (i, &c)| acc | (u64::from(c & 1) << i))
}

pub fn unpack(word: u64, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((word >> i) & 1) as u8).collect()
}

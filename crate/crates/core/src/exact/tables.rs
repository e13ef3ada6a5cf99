use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::lattice::line_unstable;
use crate::params::ModelParams;

use super::bitmask::{low_mask, unstable_bits, PackedMasked, ValueTables};
use super::checkpoint::Checkpoint;
use super::dp::masked_value;
use super::window::MaskedWord;
use super::{Backend, Conditioning, EngineOptions, ExactError, Geometry, Symmetry};

/// Largest sweep (in color words) either backend will run.
const MAX_SWEEP_WORDS: u128 = 1 << 34;
const CHUNK_WORDS: u64 = 1 << 15;

/// Worst-case k-step instability probabilities.
///
/// `p_s[n][m]` is indexed `0..=s` on both axes, where `s = (kappa-1)k` (`2k`
/// for `kappa = 3`) and index `s` stands for every run length `>= s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbTables {
    pub k: usize,
    #[serde(rename = "pI")]
    pub p_i: Dyadic,
    #[serde(rename = "pIII")]
    pub p_iii: Dyadic,
    #[serde(rename = "pS")]
    pub p_s: Vec<Vec<Dyadic>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("table text, line {line}: {msg}")]
pub struct TableParseError {
    pub line: usize,
    pub msg: String,
}

impl ProbTables {
    pub fn saturation(&self) -> usize {
        self.p_s.len() - 1
    }

    /// `p_k^S(n, m)` with run lengths beyond the saturation index clamped.
    pub fn ps(&self, n: usize, m: usize) -> &Dyadic {
        let s = self.saturation();
        &self.p_s[n.min(s)][m.min(s)]
    }

    pub fn validate(&self) -> Result<(), String> {
        let size = self.p_s.len();
        if size == 0 || self.p_s.iter().any(|row| row.len() != size) {
            return Err("pS must be a nonempty square matrix".into());
        }
        let in_range = |d: &Dyadic| !d.is_negative() && *d <= Dyadic::one();
        if !in_range(&self.p_i) || !in_range(&self.p_iii) || !self.p_s.iter().flatten().all(in_range) {
            return Err("table entries must lie in [0,1]".into());
        }
        Ok(())
    }

    /// Smallest exponent per column `n` that writes every entry `p_s[n][m]`,
    /// `m >= n`, with an integer numerator.
    pub fn column_exponents(&self) -> Vec<u32> {
        let s = self.saturation();
        (0..=s).map(|n| (n..=s).map(|m| self.p_s[n][m].exponent()).max().unwrap_or(0)).collect()
    }

    /// Plain-text rendering: the full fraction grid followed by the
    /// numerator table with one power-of-two denominator per column.
    pub fn to_text(&self) -> String {
        let s = self.saturation();
        let mut out = String::new();
        writeln!(out, "k = {}", self.k).unwrap();
        writeln!(out, "pI = {}", self.p_i.to_fraction_string()).unwrap();
        writeln!(out, "pIII = {}", self.p_iii.to_fraction_string()).unwrap();
        writeln!(out).unwrap();

        writeln!(out, "pS(n,m), rows n, columns m (index {s} stands for every run length >= {s}):").unwrap();
        let cells: Vec<Vec<String>> =
            self.p_s.iter().map(|row| row.iter().map(Dyadic::to_fraction_string).collect()).collect();
        let w = cells.iter().flatten().map(String::len).max().unwrap_or(1).max(4) + 2;
        let mut line = format!("{:<6}", "");
        for m in 0..=s {
            line += &format!("{:>w$}", format!("m={m}"));
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
        for (n, row) in cells.iter().enumerate() {
            let mut line = format!("{:<6}", format!("n={n}"));
            for c in row {
                line += &format!("{c:>w$}");
            }
            writeln!(out, "{line}").unwrap();
        }
        writeln!(out).unwrap();

        writeln!(out, "pS numerators, one denominator per column n (rows m >= n):").unwrap();
        let exps = self.column_exponents();
        let nums: Vec<Vec<String>> = (0..=s)
            .map(|m| (0..=m).map(|n| self.p_s[n][m].numerator_over(exps[n]).to_string()).collect())
            .collect();
        let dens: Vec<String> = exps.iter().map(|&e| (num_bigint::BigUint::from(1u8) << e).to_string()).collect();
        let w = nums.iter().flatten().chain(dens.iter()).map(String::len).max().unwrap_or(1).max(7) + 2;
        let mut line = format!("{:<8}", "");
        for n in 0..=s {
            line += &format!("{:>w$}", format!("n={n}"));
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
        let mut line = format!("{:<8}", "denom.");
        for d in &dens {
            line += &format!("{d:>w$}");
        }
        writeln!(out, "{line}").unwrap();
        let mut line = format!("{:<8}", "");
        for e in &exps {
            line += &format!("{:>w$}", format!("(=2^{e})"));
        }
        writeln!(out, "{line}").unwrap();
        for (m, row) in nums.iter().enumerate() {
            let mut line = format!("{:<8}", format!("m={m}"));
            for c in row {
                line += &format!("{c:>w$}");
            }
            writeln!(out, "{line}").unwrap();
        }
        out
    }

    /// Parses the output of [`ProbTables::to_text`] (the fraction grid is authoritative).
    pub fn from_text(text: &str) -> Result<Self, TableParseError> {
        let err = |line: usize, msg: &str| TableParseError { line: line + 1, msg: msg.to_string() };
        let value = |line: usize, s: &str| s.trim().parse::<Dyadic>().map_err(|e| err(line, &e.to_string()));
        let mut k = None;
        let mut p_i = None;
        let mut p_iii = None;
        let mut p_s: Vec<Vec<Dyadic>> = Vec::new();
        let lines: Vec<&str> = text.lines().collect();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i].trim();
            if let Some(v) = line.strip_prefix("k = ") {
                k = Some(v.trim().parse::<usize>().map_err(|_| err(i, "bad k"))?);
            } else if let Some(v) = line.strip_prefix("pIII = ") {
                p_iii = Some(value(i, v)?);
            } else if let Some(v) = line.strip_prefix("pI = ") {
                p_i = Some(value(i, v)?);
            } else if line.starts_with("pS(n,m), rows n") {
                i += 2; // skip the column header
                while i < lines.len() && lines[i].trim_start().starts_with("n=") {
                    let mut tokens = lines[i].split_whitespace();
                    tokens.next();
                    p_s.push(tokens.map(|t| value(i, t)).collect::<Result<_, _>>()?);
                    i += 1;
                }
                continue;
            }
            i += 1;
        }
        let tables = ProbTables {
            k: k.ok_or_else(|| err(0, "missing k"))?,
            p_i: p_i.ok_or_else(|| err(0, "missing pI"))?,
            p_iii: p_iii.ok_or_else(|| err(0, "missing pIII"))?,
            p_s,
        };
        tables.validate().map_err(|m| err(0, &m))?;
        Ok(tables)
    }
}

/// Upper bound on the expected number of sites of a bounded stable region of
/// size `g` that are unstable after `k` steps: `sum_{i=1}^{g} pS(i-1, g-i)`.
pub fn gap_sum(tables: &ProbTables, g: usize) -> Dyadic {
    (1..=g).map(|i| tables.ps(i - 1, g - i)).sum()
}

/// Maximum of [`gap_sum`] over `1 <= g <= 2s` and the first size attaining it.
pub fn max_gap_sum(tables: &ProbTables) -> (usize, Dyadic) {
    let range = 2 * tables.saturation();
    let mut best = (1, gap_sum(tables, 1));
    for g in 2..=range {
        let v = gap_sum(tables, g);
        if v > best.1 {
            best = (g, v);
        }
    }
    best
}

/// Bound for an unbounded stable region, `sum_{i=1}^{s} pS(i-1, inf)`,
/// checked against half of `gap_sum(2s)`.
pub fn unbounded_sum(tables: &ProbTables) -> Result<Dyadic, ExactError> {
    let s = tables.saturation();
    let unbounded: Dyadic = (1..=s).map(|i| tables.ps(i - 1, s)).sum();
    let bounded = gap_sum(tables, 2 * s);
    if &unbounded + &unbounded != bounded {
        return Err(ExactError::IdentityViolation { unbounded: unbounded.to_string(), bounded: bounded.to_string() });
    }
    Ok(unbounded)
}

type Units<K> = BTreeMap<Conditioning, Vec<K>>;

fn merge_units<K: Ord>(mut a: Units<K>, b: Units<K>) -> Units<K> {
    for (cond, mut keys) in b {
        let slot = a.entry(cond).or_default();
        slot.append(&mut keys);
        slot.sort_unstable();
        slot.dedup();
    }
    a
}

/// Which conditioning (if any) a time-zero window realizes, decided from its
/// instability flags. `unstable(x)` is only queried within the flag range.
fn classify_window(s: usize, unstable: impl Fn(i64) -> bool, mut emit: impl FnMut(Conditioning)) {
    if unstable(0) {
        emit(Conditioning::UnstableAtOrigin);
        if unstable(-1) && unstable(1) {
            emit(Conditioning::TripleUnstable);
        }
        return;
    }
    let run = |dir: i64| (0..=s).find(|&t| unstable(dir * (t as i64 + 1)));
    if let (Some(left), Some(right)) = (run(-1), run(1)) {
        emit(Conditioning::StableGap { left, right });
    }
}

fn canonical_packed(key: PackedMasked, len: usize, complement: bool, reflect: bool) -> PackedMasked {
    let c = |k: PackedMasked| if complement { k.min(k.complemented(len)) } else { k };
    if reflect {
        c(key).min(c(key.reflected(len)))
    } else {
        c(key)
    }
}

/// Orients a window so that gap units with `left > right` are stored under
/// their mirror image when reflection is used.
fn orient<K>(cond: Conditioning, key: K, sym: Symmetry, canon: impl Fn(K, bool) -> K, reflect: impl Fn(K) -> K) -> (Conditioning, K) {
    if !sym.reflection {
        return (cond, canon(key, false));
    }
    match cond {
        Conditioning::StableGap { left, right } if left > right => (cond.reflected(), canon(reflect(key), false)),
        _ if cond.is_reflection_symmetric() => (cond, canon(key, true)),
        _ => (cond, canon(key, false)),
    }
}

fn sweep_bitmask(geom: &Geometry, sym: Symmetry, parallel: bool) -> Result<Units<PackedMasked>, ExactError> {
    let b = geom.sweep_radius();
    let len = 2 * b + 1;
    let free = if sym.complement { len - 1 } else { len };
    if (1u128 << free) > MAX_SWEEP_WORDS {
        return Err(ExactError::TooLarge(format!("2^{free} color words")));
    }
    let s = geom.saturation();
    let cl = 2 * geom.class_radius() + 1;
    let shift = b - geom.class_radius();
    let kappa = geom.kappa;
    let total = 1u64 << free;

    let chunk = |c: u64| -> Units<PackedMasked> {
        let mut units: Units<PackedMasked> = BTreeMap::new();
        let end = ((c + 1) * CHUNK_WORDS).min(total);
        for i in c * CHUNK_WORDS..end {
            // the origin's color bit is fixed to 0 under color symmetry
            let w = if sym.complement { (i & low_mask(b)) | ((i >> b) << (b + 1)) } else { i };
            let u = unstable_bits(w, len, kappa);
            let inner = (u >> shift) & low_mask(cl);
            let key = PackedMasked::new((w >> shift) & low_mask(cl) & !inner, inner);
            classify_window(s, |x| (u >> (b as i64 + x)) & 1 == 1, |cond| {
                let (cond, key) = orient(
                    cond,
                    key,
                    sym,
                    |k, r| canonical_packed(k, cl, sym.complement, r),
                    |k| k.reflected(cl),
                );
                units.entry(cond).or_default().push(key);
            });
        }
        for keys in units.values_mut() {
            keys.sort_unstable();
            keys.dedup();
        }
        units
    };
    let chunks = total.div_ceil(CHUNK_WORDS);
    Ok(if parallel {
        (0..chunks).into_par_iter().map(chunk).reduce(BTreeMap::new, merge_units)
    } else {
        (0..chunks).map(chunk).fold(BTreeMap::new(), merge_units)
    })
}

fn sweep_generic(params: &ModelParams, geom: &Geometry, sym: Symmetry, parallel: bool) -> Result<Units<MaskedWord>, ExactError> {
    let b = geom.sweep_radius();
    let len = 2 * b + 1;
    let n = params.colors() as u64;
    let free = if sym.complement { len - 1 } else { len };
    let total = (n as u128).checked_pow(free as u32).filter(|&t| t <= MAX_SWEEP_WORDS);
    let Some(total) = total.map(|t| t as u64) else {
        return Err(ExactError::TooLarge(format!("{n}^{free} color words")));
    };
    let s = geom.saturation();
    let cr = geom.class_radius();
    let kappa = geom.kappa;

    let chunk = |c: u64| -> Units<MaskedWord> {
        let mut units: Units<MaskedWord> = BTreeMap::new();
        let mut colors = vec![0u8; len];
        let end = ((c + 1) * CHUNK_WORDS).min(total);
        for i in c * CHUNK_WORDS..end {
            let mut code = i;
            for (pos, slot) in colors.iter_mut().enumerate() {
                if sym.complement && pos == b {
                    *slot = 0;
                    continue;
                }
                *slot = (code % n) as u8;
                code /= n;
            }
            let unstable = line_unstable(&colors, kappa, false);
            let key = MaskedWord {
                sites: (b - cr..=b + cr).map(|p| (!unstable[p]).then_some(colors[p])).collect(),
            };
            classify_window(s, |x| unstable[(b as i64 + x) as usize], |cond| {
                let (cond, key) = orient(cond, key.clone(), sym, |k, r| k.canonical(sym.complement, r), |k| k.reflected());
                units.entry(cond).or_default().push(key);
            });
        }
        for keys in units.values_mut() {
            keys.sort_unstable();
            keys.dedup();
        }
        units
    };
    let chunks = total.div_ceil(CHUNK_WORDS);
    Ok(if parallel {
        (0..chunks).into_par_iter().map(chunk).reduce(BTreeMap::new, merge_units)
    } else {
        (0..chunks).map(chunk).fold(BTreeMap::new(), merge_units)
    })
}

/// Units a sweep must evaluate; with reflection, gaps with `left > right` are mirrored.
fn required_units(geom: &Geometry, sym: Symmetry) -> Vec<Conditioning> {
    let s = geom.saturation();
    let mut units = vec![Conditioning::UnstableAtOrigin, Conditioning::TripleUnstable];
    for left in 0..=s {
        for right in 0..=s {
            if !(sym.reflection && left > right) {
                units.push(Conditioning::StableGap { left, right });
            }
        }
    }
    units
}

fn maximize<K: Sync, V: Ord + Send>(keys: &[K], eval: impl Fn(&K) -> V + Sync, parallel: bool) -> Option<V> {
    if parallel {
        keys.par_iter().map(&eval).max()
    } else {
        keys.iter().map(eval).max()
    }
}

fn evaluate_units<K: Sync, V: Ord + Send>(
    required: &[Conditioning],
    units: &Units<K>,
    eval: impl Fn(&K) -> V + Sync,
    to_dyadic: impl Fn(V) -> Dyadic,
    parallel: bool,
    results: &mut BTreeMap<Conditioning, Dyadic>,
    checkpoint: &mut Option<(std::path::PathBuf, Checkpoint)>,
) -> Result<(), ExactError> {
    for cond in required {
        if results.contains_key(cond) {
            continue;
        }
        let keys = units.get(cond).map(Vec::as_slice).unwrap_or(&[]);
        let best = maximize(keys, &eval, parallel).ok_or(ExactError::Unrealizable(*cond))?;
        let value = to_dyadic(best);
        if let Some((path, cp)) = checkpoint.as_mut() {
            cp.record(cond, value.clone());
            cp.save(path)?;
        }
        results.insert(*cond, value);
    }
    Ok(())
}

fn resolve_backend(params: &ModelParams, geom: &Geometry, backend: Backend) -> Result<Backend, ExactError> {
    let binary = params.colors() == 2 && params.is_uniform();
    let fits = 2 * geom.class_radius() < 24 && 2 * geom.sweep_radius() < 40;
    match backend {
        Backend::Auto if binary && fits => Ok(Backend::Bitmask),
        Backend::Auto => Ok(Backend::Generic),
        Backend::Bitmask if !binary => {
            Err(ExactError::Unsupported("bitmask backend needs two colors with uniform recoloring".into()))
        }
        b => Ok(b),
    }
}

/// Computes `pI`, `pIII` and the `pS` matrix for `k` steps as maxima of the
/// exact k-step probability over all windows realizing each conditioning.
pub fn compute_tables(params: &ModelParams, k: usize, opts: &EngineOptions) -> Result<ProbTables, ExactError> {
    let geom = Geometry::new(params, k)?;
    if params.dyadic_dist().is_none() {
        return Err(ExactError::NonDyadic);
    }
    let sym = Symmetry { complement: opts.symmetry.complement && params.is_uniform(), ..opts.symmetry };
    let required = required_units(&geom, sym);
    let mut checkpoint = match &opts.checkpoint {
        Some(path) => Some((path.clone(), Checkpoint::load_or_new(path, params, k)?)),
        None => None,
    };
    let mut results: BTreeMap<Conditioning, Dyadic> = BTreeMap::new();
    if let Some((_, cp)) = &checkpoint {
        for cond in &required {
            if let Some(v) = cp.get(cond) {
                results.insert(*cond, v.clone());
            }
        }
    }
    if required.iter().any(|c| !results.contains_key(c)) {
        match resolve_backend(params, &geom, opts.backend)? {
            Backend::Bitmask => {
                let values = ValueTables::build(geom, opts.parallel)?;
                let units = sweep_bitmask(&geom, sym, opts.parallel)?;
                let exp = values.exponent();
                evaluate_units(
                    &required,
                    &units,
                    |key| values.masked_numerator(*key),
                    |num| Dyadic::from_u128(num, exp),
                    opts.parallel,
                    &mut results,
                    &mut checkpoint,
                )?;
            }
            _ => {
                let units = sweep_generic(params, &geom, sym, opts.parallel)?;
                evaluate_units(
                    &required,
                    &units,
                    |m| masked_value(params, m, k).expect("dyadic distribution checked"),
                    |v| v,
                    opts.parallel,
                    &mut results,
                    &mut checkpoint,
                )?;
            }
        }
    }
    let s = geom.saturation();
    let get = |c: Conditioning| results[&c].clone();
    let p_s = (0..=s)
        .map(|left| {
            (0..=s)
                .map(|right| {
                    let c = Conditioning::StableGap { left, right };
                    if sym.reflection && left > right {
                        get(c.reflected())
                    } else {
                        get(c)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ProbTables {
        k,
        p_i: get(Conditioning::UnstableAtOrigin),
        p_iii: get(Conditioning::TripleUnstable),
        p_s,
    })
}

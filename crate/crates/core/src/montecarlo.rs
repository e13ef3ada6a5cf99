//! Seeded trajectory experiments.
//!
//! Randomness is keyed by `(seed, trial, t)`: the recoloring applied to go from
//! time `t` to `t+1` in trial `i` reads stream `i` of the seed at block `t+1`,
//! consuming one draw per unstable site in coordinate order. Block 0 of each
//! trial's stream samples the initial condition. Trajectories are therefore
//! identical however trials are scheduled across threads.
//!
//! Under [`Boundary::StableExterior`] a one-dimensional window sits inside an
//! infinite stable line. Two exteriors are available: an inert one that never
//! joins a chain, and the chessboard coloring `x mod 2`, which is stable but
//! can be recruited by an adjacent chain. The simulated window is widened
//! whenever instability comes within `kappa` sites of its edge, so the
//! chessboard case is the exact dynamics on `Z`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{classify_stability, line_unstable, parse_word, step_with_mask, Boundary, Configuration, LatticeError};
use crate::params::ModelParams;
use crate::rng::RngStream;

pub const DEFAULT_T_MAX: u64 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum MonteCarloError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("trial {trial}, t = {t}: {detail}")]
    BoundViolated { trial: u64, t: u64, detail: String },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What lies beyond an explicit word under [`Boundary::StableExterior`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exterior {
    /// Exterior sites never belong to a chain.
    #[default]
    Inert,
    /// Site `x` has color `x mod 2`; the word's first site is at `x = 0`.
    Chessboard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// A fixed one-dimensional word.
    ExplicitWord {
        word: String,
        #[serde(default)]
        exterior: Exterior,
    },
    /// A fixed coloring of a box of any dimension.
    ExplicitBox { shape: Vec<usize>, cells: Vec<u8> },
    /// Colors on `[-M, M]` drawn from the recoloring distribution inside a
    /// chessboard exterior, conditioned on a nonempty unstable set contained
    /// in `[-M+1, M-1]`.
    RandomUnstableBlock { m: usize },
    /// Independent uniform colors on a box.
    UniformRandomBox { shape: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ModelParams,
    pub initial: InitialCondition,
    pub boundary: Boundary,
    pub t_max: u64,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let err = |m: String| Err(MonteCarloError::Spec(m));
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.t_max == 0 {
            return err("t_max must be at least 1".into());
        }
        let d = self.params.dimension();
        if self.boundary == Boundary::StableExterior && d != 1 {
            return err("the stable-exterior boundary needs d = 1".into());
        }
        match &self.initial {
            InitialCondition::ExplicitWord { word, exterior } => {
                if d != 1 {
                    return err(format!("a color word needs d = 1, got d = {d}"));
                }
                if *exterior == Exterior::Chessboard && self.boundary != Boundary::StableExterior {
                    return err("a chessboard exterior needs the stable-exterior boundary".into());
                }
                let cells = parse_word(word)?;
                Configuration::line(cells, self.boundary)?.validate(&self.params)?;
            }
            InitialCondition::ExplicitBox { shape, cells } => {
                Configuration::new(shape.clone(), cells.clone(), self.boundary)?.validate(&self.params)?;
            }
            InitialCondition::RandomUnstableBlock { m } => {
                if d != 1 || self.boundary != Boundary::StableExterior {
                    return err("a random unstable block needs d = 1 and the stable-exterior boundary".into());
                }
                if 2 * m < self.params.kappa() + 1 {
                    return err(format!("M = {m} leaves no room for a chain of length {}", self.params.kappa()));
                }
            }
            InitialCondition::UniformRandomBox { shape } => {
                if shape.len() != d {
                    return err(format!("box shape {shape:?} does not have dimension {d}"));
                }
                if shape.iter().any(|&e| e == 0) {
                    return err(format!("box shape {shape:?} has an empty extent"));
                }
            }
        }
        Ok(())
    }

    /// True outside the setting where fixation is proven (d=1, n=2, kappa=3, uniform).
    pub fn is_exploratory(&self) -> bool {
        !self.params.is_theorem_setting()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub trial: u64,
    /// First `t` with no unstable site, if reached by `t_max`.
    pub fixation_time: Option<u64>,
    /// `I_0, I_1, ...` up to fixation or `t_max`.
    pub i_series: Vec<u64>,
    /// Per-axis closed interval containing every site that was ever unstable.
    pub final_window_extent: Option<Vec<[i64; 2]>>,
}

impl TrajectoryStats {
    /// `I_t`, zero after fixation and `None` past the end of an unfixated run.
    pub fn unstable_at(&self, t: u64) -> Option<u64> {
        match self.i_series.get(t as usize) {
            Some(&i) => Some(i),
            None if self.fixation_time.is_some() => Some(0),
            None => None,
        }
    }
}

fn extend_extent(extent: &mut Option<Vec<[i64; 2]>>, coords: &[i64]) {
    match extent {
        None => *extent = Some(coords.iter().map(|&c| [c, c]).collect()),
        Some(e) => {
            for (iv, &c) in e.iter_mut().zip(coords) {
                iv[0] = iv[0].min(c);
                iv[1] = iv[1].max(c);
            }
        }
    }
}

fn chessboard(x: i64) -> u8 {
    x.rem_euclid(2) as u8
}

/// A one-dimensional window of an infinite line; `origin` is the coordinate of `cells[0]`.
struct Line {
    origin: i64,
    cells: Vec<u8>,
    chessboard: bool,
}

impl Line {
    /// Unstable coordinates, widening the window first if instability is near an edge.
    fn unstable(&mut self, kappa: usize) -> Vec<i64> {
        loop {
            let flags = if self.chessboard {
                let reach = kappa - 1;
                let mut ext = Vec::with_capacity(self.cells.len() + 2 * reach);
                ext.extend((0..reach as i64).map(|i| chessboard(self.origin - reach as i64 + i)));
                ext.extend_from_slice(&self.cells);
                let end = self.origin + self.cells.len() as i64;
                ext.extend((0..reach as i64).map(|i| chessboard(end + i)));
                line_unstable(&ext, kappa, false)[reach..reach + self.cells.len()].to_vec()
            } else {
                line_unstable(&self.cells, kappa, false)
            };
            let len = self.cells.len();
            let near_left = flags.iter().take(kappa).any(|&u| u);
            let near_right = flags.iter().skip(len.saturating_sub(kappa)).any(|&u| u);
            if self.chessboard && (near_left || near_right) {
                let pad = 2 * kappa;
                if near_left {
                    let mut grown: Vec<u8> = (0..pad as i64).map(|i| chessboard(self.origin - pad as i64 + i)).collect();
                    grown.extend_from_slice(&self.cells);
                    self.cells = grown;
                    self.origin -= pad as i64;
                }
                if near_right {
                    let end = self.origin + self.cells.len() as i64;
                    self.cells.extend((0..pad as i64).map(|i| chessboard(end + i)));
                }
                continue;
            }
            return flags.iter().enumerate().filter(|(_, &u)| u).map(|(i, _)| self.origin + i as i64).collect();
        }
    }

    fn recolor(&mut self, sites: &[i64], params: &ModelParams, rng: &mut RngStream) {
        for &x in sites {
            self.cells[(x - self.origin) as usize] = params.color_for_draw(rng.next_u64());
        }
    }
}

enum State {
    Line(Line),
    Box(Configuration),
}

fn sample_block(params: &ModelParams, m: usize, rng: &mut RngStream) -> Line {
    let kappa = params.kappa();
    let m = m as i64;
    loop {
        let cells: Vec<u8> = (0..2 * m + 1).map(|_| params.color_for_draw(rng.next_u64())).collect();
        let mut line = Line { origin: -m, cells, chessboard: true };
        let unstable = line.unstable(kappa);
        if !unstable.is_empty() && unstable.iter().all(|&x| x.abs() < m) {
            return line;
        }
    }
}

fn initial_state(spec: &ExperimentSpec, rng: &mut RngStream) -> Result<State, MonteCarloError> {
    Ok(match &spec.initial {
        InitialCondition::ExplicitWord { word, exterior } => {
            let cells = parse_word(word)?;
            if spec.boundary == Boundary::StableExterior {
                State::Line(Line { origin: 0, cells, chessboard: *exterior == Exterior::Chessboard })
            } else {
                State::Box(Configuration::line(cells, spec.boundary)?)
            }
        }
        InitialCondition::ExplicitBox { shape, cells } => {
            if spec.boundary == Boundary::StableExterior {
                State::Line(Line { origin: 0, cells: cells.clone(), chessboard: false })
            } else {
                State::Box(Configuration::new(shape.clone(), cells.clone(), spec.boundary)?)
            }
        }
        InitialCondition::RandomUnstableBlock { m } => State::Line(sample_block(&spec.params, *m, rng)),
        InitialCondition::UniformRandomBox { shape } => {
            let n = spec.params.colors() as u64;
            let cells: Vec<u8> = (0..shape.iter().product::<usize>()).map(|_| rng.below(n) as u8).collect();
            if spec.boundary == Boundary::StableExterior {
                State::Line(Line { origin: 0, cells, chessboard: false })
            } else {
                State::Box(Configuration::new(shape.clone(), cells, spec.boundary)?)
            }
        }
    })
}

/// Runs one trajectory until fixation or `t_max`.
///
/// Under a random unstable block the growth bounds `I_t <= 2M+4t+1` and
/// `unstable sites within [-M-2t, M+2t]` (for `kappa = 3`, in general
/// `(kappa-1)t`) are asserted at every step.
pub fn run_trajectory(spec: &ExperimentSpec, trial: u64) -> Result<TrajectoryStats, MonteCarloError> {
    spec.validate()?;
    let params = &spec.params;
    let kappa = params.kappa();
    let mut state = initial_state(spec, &mut RngStream::at_block(spec.seed, trial, 0))?;
    let block_m = match spec.initial {
        InitialCondition::RandomUnstableBlock { m } => Some(m as i64),
        _ => None,
    };
    let mut i_series = Vec::new();
    let mut extent = None;
    let mut t = 0u64;
    loop {
        let mut rng = RngStream::at_block(spec.seed, trial, t + 1);
        let unstable = match &mut state {
            State::Line(line) => {
                let sites = line.unstable(kappa);
                for &x in &sites {
                    extend_extent(&mut extent, &[x]);
                }
                if let Some(m) = block_m {
                    let reach = ((kappa - 1) as u64 * t) as i64;
                    let count_bound = 2 * m as u64 + 2 * (kappa as u64 - 1) * t + 1;
                    if sites.len() as u64 > count_bound {
                        return Err(MonteCarloError::BoundViolated {
                            trial,
                            t,
                            detail: format!("I_t = {} exceeds {count_bound}", sites.len()),
                        });
                    }
                    if let Some(x) = sites.iter().find(|x| x.abs() > m + reach) {
                        return Err(MonteCarloError::BoundViolated {
                            trial,
                            t,
                            detail: format!("site {x} unstable outside [-{0}, {0}]", m + reach),
                        });
                    }
                }
                if !sites.is_empty() && t < spec.t_max {
                    line.recolor(&sites, params, &mut rng);
                }
                sites.len() as u64
            }
            State::Box(config) => {
                let mask = classify_stability(config, params)?;
                let mut count = 0u64;
                for i in mask.unstable_indices() {
                    let c: Vec<i64> = config.coords(i).into_iter().map(|c| c as i64).collect();
                    extend_extent(&mut extent, &c);
                    count += 1;
                }
                if count > 0 && t < spec.t_max {
                    *config = step_with_mask(config, &mask, params, &mut rng)?;
                }
                count
            }
        };
        i_series.push(unstable);
        if unstable == 0 {
            return Ok(TrajectoryStats { trial, fixation_time: Some(t), i_series, final_window_extent: extent });
        }
        if t == spec.t_max {
            return Ok(TrajectoryStats { trial, fixation_time: None, i_series, final_window_extent: extent });
        }
        t += 1;
    }
}

/// Runs every trial (in parallel when asked); results are in trial order.
pub fn run_experiment(spec: &ExperimentSpec, parallel: bool) -> Result<Vec<TrajectoryStats>, MonteCarloError> {
    spec.validate()?;
    if parallel {
        (0..spec.trials).into_par_iter().map(|i| run_trajectory(spec, i)).collect()
    } else {
        (0..spec.trials).map(|i| run_trajectory(spec, i)).collect()
    }
}

/// Fraction of trials with `I_t >= 1` for `t = 0, 1, ...` until every trial
/// has fixated or its series ends.
pub fn survival_from(stats: &[TrajectoryStats]) -> Vec<(u64, f64)> {
    let horizon = stats.iter().map(|s| s.i_series.len()).max().unwrap_or(0) as u64;
    let n = stats.len().max(1) as f64;
    (0..horizon)
        .map(|t| {
            let alive = stats.iter().filter(|s| s.unstable_at(t).is_none_or(|i| i > 0)).count();
            (t, alive as f64 / n)
        })
        .collect()
}

pub fn survival_curve(spec: &ExperimentSpec) -> Result<Vec<(u64, f64)>, MonteCarloError> {
    Ok(survival_from(&run_experiment(spec, true)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn frequency(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// Binomial standard error at the observed frequency.
    pub fn standard_error(&self) -> f64 {
        self.standard_error_at(self.frequency())
    }

    /// Binomial standard error if the true probability is `p`.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Frequency with which the center of `colors` is unstable after `k` steps,
/// simulating the word as a box with clipped edges. For windows covering the
/// light cone this estimates the exact k-step probability.
pub fn estimate_kstep_prob(params: &ModelParams, colors: &[u8], k: usize, trials: u64, seed: u64) -> Result<Estimate, MonteCarloError> {
    if trials == 0 {
        return Err(MonteCarloError::Spec("trials must be at least 1".into()));
    }
    if colors.len() % 2 == 0 {
        return Err(MonteCarloError::Spec(format!("window length {} is not odd", colors.len())));
    }
    Configuration::line(colors.to_vec(), Boundary::Frozen)?.validate(params)?;
    let kappa = params.kappa();
    let center = colors.len() / 2;
    let trial = |i: u64| -> u64 {
        let mut word = colors.to_vec();
        for t in 0..k {
            let unstable = line_unstable(&word, kappa, false);
            let mut rng = RngStream::at_block(seed, i, t as u64 + 1);
            for (c, _) in word.iter_mut().zip(&unstable).filter(|(_, &u)| u) {
                *c = params.color_for_draw(rng.next_u64());
            }
        }
        u64::from(line_unstable(&word, kappa, false)[center])
    };
    let hits = (0..trials).into_par_iter().map(trial).sum();
    Ok(Estimate { hits, trials })
}

/// Writes one JSON object per trajectory.
pub fn write_jsonl<W: Write>(stats: &[TrajectoryStats], mut out: W) -> Result<(), MonteCarloError> {
    for s in stats {
        serde_json::to_writer(&mut out, s).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `t,survivors,mean_I` rows, counting fixated trials as `I_t = 0`.
/// Rows stop where every trial has fixated or some series ends.
pub fn write_aggregate_csv<W: Write>(stats: &[TrajectoryStats], mut out: W) -> Result<(), MonteCarloError> {
    writeln!(out, "t,survivors,mean_I")?;
    let horizon = stats.iter().map(|s| s.i_series.len()).max().unwrap_or(0) as u64;
    for t in 0..horizon {
        let values: Option<Vec<u64>> = stats.iter().map(|s| s.unstable_at(t)).collect();
        let Some(values) = values else { break };
        let survivors = values.iter().filter(|&&i| i > 0).count();
        let mean = values.iter().sum::<u64>() as f64 / values.len().max(1) as f64;
        writeln!(out, "{t},{survivors},{mean}")?;
    }
    Ok(())
}

/// Reproducibility record written next to every experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub spec: ExperimentSpec,
    pub code_version: String,
    /// Set when the parameters lie outside the proven fixation setting.
    pub exploratory: bool,
    pub fixated: u64,
    pub trials: u64,
}

impl ExperimentManifest {
    pub fn new(spec: &ExperimentSpec, stats: &[TrajectoryStats]) -> Self {
        ExperimentManifest {
            spec: spec.clone(),
            code_version: crate::CODE_VERSION.to_string(),
            exploratory: spec.is_exploratory(),
            fixated: stats.iter().filter(|s| s.fixation_time.is_some()).count() as u64,
            trials: stats.len() as u64,
        }
    }
}

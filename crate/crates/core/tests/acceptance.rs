//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any fails.

mod common;

use std::time::{Duration, Instant};

use candy_core::crosscheck::{crosscheck, select_windows, Selection};
use candy_core::dyadic::Dyadic;
use candy_core::exact::{
    certify, compute_tables, enumerate_windows, gap_sum, kstep_prob, masked_value, max_gap_sum, unbounded_sum,
    window_classes, window_sufficiency_check, Backend, Certificate, Checkpoint, Conditioning, EngineOptions, ProbTables,
    Symmetry, WindowClass,
};
use candy_core::lattice::Boundary;
use candy_core::montecarlo::{run_experiment, write_jsonl, ExperimentSpec, Exterior, InitialCondition};
use candy_core::params::ModelParams;
use candy_core::rng::RngStream;

type Check = Result<String, String>;

fn d(s: &str) -> Dyadic {
    s.parse().unwrap()
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn theorem() -> ModelParams {
    ModelParams::theorem()
}

fn check_eq(label: &str, got: &Dyadic, want: &str) -> Result<(), String> {
    ensure!(*got == d(want), "{label} = {}, expected {want}", got.to_fraction_string());
    Ok(())
}

fn c1_k1_golden() -> Check {
    let p = theorem();
    let t = compute_tables(&p, 1, &EngineOptions::default()).map_err(err)?;
    check_eq("pI", &t.p_i, "5/8")?;
    check_eq("pIII", &t.p_iii, "1/2")?;
    let grid = [["1/2", "3/4", "1/2"], ["3/4", "1/2", "1/2"], ["1/2", "1/2", "0"]];
    for n in 0..3 {
        for m in 0..3 {
            check_eq(&format!("pS({n},{m})"), &t.p_s[n][m], grid[n][m])?;
        }
    }
    // first table: colors / flags on [-2,2] -> probability
    for (word, flags, want) in [
        ("000000000", "00000", "1/2"),
        ("000000100", "00001", "1/2"),
        ("000001000", "00010", "1/2"),
        ("000001011", "00011", "3/8"),
        ("000001100", "00011", "5/8"),
        ("001000100", "10001", "1/2"),
    ] {
        let w = WindowClass::from_word(&p, word, Some(Conditioning::UnstableAtOrigin)).map_err(err)?;
        ensure!(w.flag_word() == flags, "{word}: flags {} != {flags}", w.flag_word());
        check_eq(&format!("row {}/{flags}", &word[2..7]), &kstep_prob(&p, &w, 1).map_err(err)?, want)?;
    }
    // second table: stable gap (1,2)
    for (core, want) in [("01001", "0"), ("01010", "0"), ("01011", "0"), ("10010", "1/2"), ("10011", "1/2")] {
        let right = if core.ends_with('1') { "000" } else { "111" };
        let word = format!("{}{core}{right}", &core[..1].repeat(3));
        let w = WindowClass::from_word(&p, &word, Some(Conditioning::StableGap { left: 1, right: 2 })).map_err(err)?;
        check_eq(&format!("row {core}"), &kstep_prob(&p, &w, 1).map_err(err)?, want)?;
    }
    let count = |cond, reflect| -> Result<usize, String> {
        let ws = enumerate_windows(&p, 1, cond).map_err(err)?;
        Ok(window_classes(&p, 1, &ws, reflect).map_err(err)?.len())
    };
    ensure!(count(Conditioning::UnstableAtOrigin, true)? == 6, "first table class count");
    ensure!(count(Conditioning::StableGap { left: 1, right: 2 }, false)? == 5, "second table class count");
    let zero = enumerate_windows(&p, 1, Conditioning::StableGap { left: 2, right: 2 }).map_err(err)?;
    ensure!(zero.iter().all(|w| kstep_prob(&p, w, 1).unwrap().is_zero()), "a (2,2) window has positive probability");
    Ok("pI 5/8, pIII 1/2, 3x3 pS, 11 table rows, 6 and 5 classes".into())
}

fn certificate_components(c: &Certificate, iii: &str, i: &str, gap: &str, value: &str) -> Result<(), String> {
    check_eq("pIII", &c.tables.p_iii, iii)?;
    check_eq("pI", &c.tables.p_i, i)?;
    check_eq("max gap sum", &c.max_gap_sum, gap)?;
    ensure!(c.c.to_fraction_string() == value, "c = {}, expected {value}", c.c.to_fraction_string());
    Ok(())
}

fn c2_k2_k3() -> Check {
    let p = theorem();
    let start = Instant::now();
    let c2 = certify(&p, 2, &EngineOptions::default()).map_err(err)?;
    let t2 = start.elapsed();
    certificate_components(&c2, "29/64", "61/128", "19/8", "121/96")?;
    let start = Instant::now();
    let c3 = certify(&p, 3, &EngineOptions::default()).map_err(err)?;
    let t3 = start.elapsed();
    certificate_components(&c3, "5037/16384", "2687/8192", "2495/1024", "55705/49152")?;
    ensure!(t2 < Duration::from_secs(60) && t3 < Duration::from_secs(1800), "too slow: {t2:?}, {t3:?}");
    Ok(format!("c2 = 121/96 in {t2:.2?}, c3 = 55705/49152 in {t3:.2?}"))
}

fn c3_k4() -> Check {
    let p = theorem();
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("k4.json");
    let opts = EngineOptions { checkpoint: Some(path.clone()), ..EngineOptions::default() };
    let start = Instant::now();
    let cert = certify(&p, 4, &opts).map_err(err)?;
    let elapsed = start.elapsed();
    certificate_components(&cert, "15371121/2^26", "518955/2^21", "2371247/2^20", "200344049/201326592")?;
    ensure!(cert.contraction(), "c4 is not below 1");
    let t = &cert.tables;
    check_eq("pS(0,0)", &t.p_s[0][0], "109921252/2^29")?;
    check_eq("pS(5,6)", &t.p_s[5][6], "179/1024")?;
    check_eq("pS(7,7)", &t.p_s[7][7], "1/16")?;
    check_eq("pS(8,8)", &t.p_s[8][8], "0")?;
    let exps = t.column_exponents();
    ensure!(exps == [29, 26, 26, 22, 17, 11, 9, 4, 0], "column denominators 2^{exps:?}");

    // resume after an interruption that lost half of the units
    let mut cp = Checkpoint::from_text(&std::fs::read_to_string(&path).map_err(err)?).map_err(err)?;
    let names: Vec<String> = cp.completed.keys().cloned().collect();
    for name in names.iter().step_by(2) {
        cp.completed.remove(name);
    }
    cp.save(&path).map_err(err)?;
    let resumed = certify(&p, 4, &opts).map_err(err)?;
    ensure!(resumed == cert, "resumed run differs");
    Ok(format!("c4 = 200344049/201326592 < 1 in {elapsed:.2?}, pS spot checks, resume from checkpoint"))
}

fn c4_properties() -> Check {
    let p = theorem();
    for k in 1..=2 {
        let t = compute_tables(&p, k, &EngineOptions::default()).map_err(err)?;
        let s = 2 * k;
        for n in 0..=s {
            for m in 0..=s {
                ensure!(t.p_s[n][m] == t.p_s[m][n], "k {k}: pS not symmetric at ({n},{m})");
            }
        }
        ensure!(t.p_s[s][s].is_zero(), "k {k}: pS(s,s) != 0");
        for m in 0..=s {
            let cond = Conditioning::StableGap { left: s + 1, right: m };
            let ws = enumerate_windows(&p, k, cond).map_err(err)?;
            let classes = window_classes(&p, k, &ws, false).map_err(err)?;
            let best = classes.iter().map(|c| masked_value(&p, c, k).unwrap()).max().unwrap();
            ensure!(best == t.p_s[s][m], "k {k}: saturation fails at m = {m}");
        }
        ensure!(gap_sum(&t, 4 * k + 1) == gap_sum(&t, 4 * k + 7), "k {k}: gap sum not constant past 4k");
        let u = unbounded_sum(&t).map_err(err)?;
        ensure!(&u + &u == gap_sum(&t, 4 * k), "k {k}: unbounded identity");
        ensure!(t.p_iii <= t.p_i, "k {k}: pIII > pI");
    }
    let all: Vec<WindowClass> = common::all_words(2, 9).map(|c| WindowClass::new(&p, c, None).unwrap()).collect();
    ensure!(window_sufficiency_check(&p, 1, &all).map_err(err)?, "k=1 sufficiency");
    let mut rng = RngStream::new(2024, 0);
    let sample: Vec<WindowClass> =
        (0..1000).map(|_| WindowClass::new(&p, (0..13).map(|_| rng.below(2) as u8).collect(), None).unwrap()).collect();
    ensure!(window_sufficiency_check(&p, 2, &sample).map_err(err)?, "k=2 sufficiency");
    Ok("symmetry, vanishing, saturation, gap constancy, identity, ordering; sufficiency on 512 + 1000 windows".into())
}

fn c5_oracle() -> Check {
    let p = theorem();
    let ws = select_windows(&p, 1, Selection::All, 0).map_err(err)?;
    let mut n = 0;
    for colors in common::all_words(2, 9) {
        let w = WindowClass::new(&p, colors.clone(), None).map_err(err)?;
        let exact = kstep_prob(&p, &w, 1).map_err(err)?.to_rational();
        ensure!(exact == common::brute_force_prob(&colors, 1, &p), "window {} disagrees", w.to_word());
        n += 1;
    }
    Ok(format!("{n} windows ({} classes) equal the one-step outcome oracle", ws.len()))
}

fn c6_monte_carlo() -> Check {
    let p = theorem();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut total = 0;
    for (k, sel) in [(1, Selection::All), (2, Selection::Random(50))] {
        let ws = select_windows(&p, k, sel, 77).map_err(err)?;
        let rows = crosscheck(&p, k, &ws, 100_000, 1000 + k as u64, 4.0).map_err(err)?;
        if let Some(r) = rows.iter().find(|r| !r.pass) {
            return Err(format!("k {k} window {}: exact {} frequency {} ({:.2} SE)", r.window, r.exact, r.estimate.frequency(), r.z));
        }
        worst = rows.iter().map(|r| r.z).fold(worst, f64::max);
        total += rows.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!("{total} windows x 10^5 runs, worst {worst:.2} SE, {elapsed:.2?}"))
}

fn c7_fixation() -> Check {
    let spec = ExperimentSpec {
        params: theorem(),
        initial: InitialCondition::RandomUnstableBlock { m: 10 },
        boundary: Boundary::StableExterior,
        t_max: 100_000,
        trials: 1000,
        seed: 7,
    };
    let start = Instant::now();
    // growth bounds are asserted inside every step; a violation is an error here
    let stats = run_experiment(&spec, true).map_err(err)?;
    let elapsed = start.elapsed();
    let fixated = stats.iter().filter(|s| s.fixation_time.is_some()).count();
    ensure!(fixated == 1000, "{fixated}/1000 fixated");
    for s in &stats {
        for (t, &i) in s.i_series.iter().enumerate() {
            ensure!(i <= 21 + 4 * t as u64, "trial {} t {t}: I_t = {i}", s.trial);
        }
        let tau = s.fixation_time.unwrap() as i64;
        if let Some(e) = &s.final_window_extent {
            ensure!(e[0][0] >= -10 - 2 * tau && e[0][1] <= 10 + 2 * tau, "trial {} extent {:?}", s.trial, e);
        }
    }
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    let max = stats.iter().filter_map(|s| s.fixation_time).max().unwrap();
    Ok(format!("1000/1000 fixated (max time {max}), bounds held, {elapsed:.2?}"))
}

fn c8_mean_contraction() -> Check {
    let p = theorem();
    let c4 = certify(&p, 4, &EngineOptions::default()).map_err(err)?.c.to_f64();
    let spec = ExperimentSpec {
        params: p,
        initial: InitialCondition::ExplicitWord { word: "000111".repeat(5), exterior: Exterior::Chessboard },
        boundary: Boundary::StableExterior,
        t_max: 100,
        trials: 10_000,
        seed: 8,
    };
    let stats = run_experiment(&spec, true).map_err(err)?;
    ensure!(stats.iter().all(|s| s.i_series[0] == 30), "I_0 != 30");
    let at = |t: u64| -> Result<Vec<f64>, String> {
        stats.iter().map(|s| s.unstable_at(t).map(|i| i as f64).ok_or_else(|| "series ended early".to_string())).collect()
    };
    let n = stats.len() as f64;
    let mut report = Vec::new();
    for t in [0u64, 4, 8] {
        let (now, later) = (at(t)?, at(t + 4)?);
        let diffs: Vec<f64> = later.iter().zip(&now).map(|(l, i)| l - c4 * i).collect();
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let (m_now, m_later) = (now.iter().sum::<f64>() / n, later.iter().sum::<f64>() / n);
        ensure!(mean <= 5.0 * se, "t = {t}: mean I_{} = {m_later:.3} > c4 * {m_now:.3} + 5 SE ({se:.3})", t + 4);
        report.push(format!("I_{} {m_later:.2} vs {:.2}", t + 4, c4 * m_now));
    }
    Ok(report.join(", "))
}

fn c9_determinism() -> Check {
    let spec = ExperimentSpec {
        params: theorem(),
        initial: InitialCondition::RandomUnstableBlock { m: 10 },
        boundary: Boundary::StableExterior,
        t_max: 100_000,
        trials: 200,
        seed: 9,
    };
    let render = || -> Result<Vec<u8>, String> {
        let mut out = Vec::new();
        write_jsonl(&run_experiment(&spec, true).map_err(err)?, &mut out).map_err(err)?;
        Ok(out)
    };
    ensure!(render()? == render()?, "JSON-lines differ between runs");
    let p = theorem();
    for k in 1..=4 {
        let par = compute_tables(&p, k, &EngineOptions::default()).map_err(err)?;
        let ser = compute_tables(&p, k, &EngineOptions::serial()).map_err(err)?;
        ensure!(par == ser, "k {k}: parallel and serial tables differ");
        ensure!(ProbTables::from_text(&par.to_text()).map_err(err)? == par, "k {k}: text round trip");
    }
    let none = EngineOptions { symmetry: Symmetry::NONE, backend: Backend::Generic, ..EngineOptions::serial() };
    ensure!(compute_tables(&p, 2, &none).map_err(err)? == compute_tables(&p, 2, &EngineOptions::default()).map_err(err)?, "reductions change k=2");
    let (g, _) = max_gap_sum(&compute_tables(&p, 1, &EngineOptions::default()).map_err(err)?);
    ensure!(g == 4, "k=1 max gap at {g}");
    Ok("byte-identical JSON-lines; parallel = serial tables for k = 1..4".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 k=1 golden tables", c1_k1_golden),
        ("2 k=2 and k=3 certificates", c2_k2_k3),
        ("3 k=4 certificate", c3_k4),
        ("4 property suites", c4_properties),
        ("5 oracle equivalence", c5_oracle),
        ("6 Monte Carlo cross-check", c6_monte_carlo),
        ("7 fixation experiment", c7_fixation),
        ("8 mean contraction", c8_mean_contraction),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{name}] {why} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

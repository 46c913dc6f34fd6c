//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use mext_cli::commands;
use mext_cli::config::{resolve, Overrides};
use mext_core::harness::{self, median, ExperimentResult, Method, SweepKind, SweepSpec};
use mext_core::matrix::Matrix;
use mext_core::mlp::{self, NetworkParams};
use mext_core::seed::rng_for;
use mext_core::selection::{self, SelectionLogits};
use mext_core::trainer::{self, SelectionMode, TrainConfig};
use mext_core::{GeometryKind, Profile, ScenarioConfig};
use rand::Rng;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs_f64() < limit_secs as f64
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

/// Median over seeds of each sweep value's MSE for one method.
fn medians(runs: &[ExperimentResult], values: &[f64], method: Method, geometry: GeometryKind) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let per_seed: Vec<f64> = runs
                .iter()
                .map(|r| r.find(v, method, geometry).and_then(|row| row.test_mse).unwrap_or(f64::NAN))
                .collect();
            if per_seed.iter().any(|x| !x.is_finite()) {
                f64::NAN
            } else {
                median(&per_seed).unwrap()
            }
        })
        .collect()
}

fn run_seeds(mut spec: SweepSpec) -> Vec<ExperimentResult> {
    SEEDS
        .iter()
        .map(|&seed| {
            spec.seed = seed;
            harness::run_sweep(&spec).expect("sweep runs")
        })
        .collect()
}

fn gumbel_max_law() -> Verdict {
    let start = Instant::now();
    let draws = 100_000;
    let mut worst: f64 = 0.0;
    for row in 0..5u64 {
        let mut rng = rng_for(101, 0, row);
        let z: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let logits = SelectionLogits::new(Matrix::from_vec(1, 8, z).unwrap()).unwrap();
        let p = selection::class_probabilities(&logits);
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            let g = selection::sample_gumbel(1, 8, &mut rng);
            counts[selection::hard_select(&logits, &g).unwrap().indices()[0]] += 1;
        }
        let tv: f64 = 0.5
            * counts
                .iter()
                .zip(p.row(0))
                .map(|(&c, &pk)| (c as f64 / draws as f64 - pk).abs())
                .sum::<f64>();
        worst = worst.max(tv);
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 0.02 && within(elapsed, 10),
        format!("max total variation {worst:.4} (limit 0.02), {:.1}s", elapsed.as_secs_f64()),
    )
}

fn central_diff(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let mut worst_sel: f64 = 0.0;
    for case in 0..100u64 {
        let mut rng = rng_for(102, 0, case);
        let n = rng.random_range(3..12);
        let m = rng.random_range(1..=n.min(5));
        let tau = rng.random_range(0.3..5.0);
        let z = Matrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
        let logits = SelectionLogits::new(z).unwrap();
        let noise = selection::sample_gumbel(m, n, &mut rng);
        let upstream = Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let mask = selection::hard_select(&logits, &noise).unwrap().exclusion_mask();
        let analytic = selection::selection_backward(&upstream, &logits, &noise, tau, &mask).unwrap();
        let numeric = central_diff(logits.values().as_slice(), |v| {
            let l = SelectionLogits::new(Matrix::from_vec(m, n, v.to_vec()).unwrap()).unwrap();
            let soft = selection::soft_select(&l, &noise, tau, &mask).unwrap();
            soft.rows.as_slice().iter().zip(upstream.as_slice()).map(|(p, g)| p * g).sum()
        });
        worst_sel = worst_sel.max(rel_err(analytic.as_slice(), &numeric));
    }

    let mut worst_mlp: f64 = 0.0;
    for case in 0..50u64 {
        let mut rng = rng_for(103, 0, case);
        let hidden: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(2..7)).collect();
        let specs = mlp::layer_specs(rng.random_range(1..6), &hidden, rng.random_range(1..5));
        let mut net = mlp::init_network(&specs, &mut rng).unwrap();
        net.for_each_param_mut(|p| *p += rng.random_range(-0.1..0.1));
        let x: Vec<f64> = (0..net.in_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..net.out_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |p: &NetworkParams, x: &[f64]| -> f64 {
            mlp::forward(p, x).unwrap().0.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = mlp::forward(&net, &x).unwrap();
        let (grads, grad_x) = mlp::backward(&net, &cache, &c).unwrap();
        let numeric = central_diff(&net.flat(), |v| {
            let mut probe = net.clone();
            probe.set_flat(v);
            objective(&probe, &x)
        });
        let numeric_x = central_diff(&x, |v| objective(&net, v));
        worst_mlp = worst_mlp
            .max(rel_err(&grads.flat(), &numeric))
            .max(rel_err(&grad_x, &numeric_x));
    }
    let elapsed = start.elapsed();
    verdict(
        worst_sel <= 1e-4 && worst_mlp <= 1e-4 && within(elapsed, 30),
        format!(
            "selection max rel err {worst_sel:.2e} over 100, network {worst_mlp:.2e} over 50 (limit 1e-4), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn small_array_recovery() -> Verdict {
    let start = Instant::now();
    let scenario = ScenarioConfig {
        n_antennas: 8,
        n_paths: 2,
        f_downlink: ScenarioConfig::default().f_uplink,
        rng_seed: 7,
        ..Default::default()
    };
    let data = harness::generate_dataset(&scenario, 10_000, 0.8).unwrap();
    let config = TrainConfig {
        n_iter: 5000,
        eval_every: 0,
        log_every: 0,
        seed: 7,
        ..Profile::Desk.train_config()
    };
    let specs = mlp::layer_specs(2 * 4, &[64, 64], 2 * 8);
    let model = trainer::train(&data.train, &data.test, &config, &specs, &SelectionMode::Learned)
        .unwrap()
        .model;
    let mse = model.final_mse.unwrap();
    let energy: f64 =
        data.test.iter().map(|s| s.downlink.iter().map(|h| h.norm_sqr()).sum::<f64>() / 8.0).sum::<f64>()
            / data.test.len() as f64;
    let relative = mse / energy;
    let elapsed = start.elapsed();
    verdict(
        relative <= 0.05 && within(elapsed, 120),
        format!("relative test MSE {relative:.4} (limit 0.05), {:.1}s", elapsed.as_secs_f64()),
    )
}

fn compression_sweep() -> (Vec<ExperimentResult>, Vec<f64>, Duration) {
    let start = Instant::now();
    let mut spec = SweepSpec::new(SweepKind::CompressionRatio, Profile::Desk);
    spec.geometries = vec![GeometryKind::Nula];
    let values = spec.values.clone();
    let runs = run_seeds(spec);
    (runs, values, start.elapsed())
}

fn mse_falls_with_ratio(runs: &[ExperimentResult], values: &[f64], elapsed: Duration) -> Verdict {
    let med = medians(runs, values, Method::Proposed, GeometryKind::Nula);
    verdict(
        non_increasing(&med) && within(elapsed, 30 * 60),
        format!(
            "median MSE over r = {:?}: {}, {:.0}s",
            values,
            fmt_list(&med),
            elapsed.as_secs_f64()
        ),
    )
}

fn learned_matches_uniform(runs: &[ExperimentResult], values: &[f64]) -> Verdict {
    let at = values.iter().position(|&v| v == 0.125).unwrap();
    let proposed = medians(runs, values, Method::Proposed, GeometryKind::Nula)[at];
    let uniform = medians(runs, values, Method::Uniform, GeometryKind::Nula)[at];
    verdict(
        proposed <= 1.05 * uniform,
        format!("r = 1/8 median MSE: learned {proposed:.4}, uniform {uniform:.4} (limit 1.05x)"),
    )
}

fn mse_grows_with_gap() -> Verdict {
    let start = Instant::now();
    let mut spec = SweepSpec::new(SweepKind::FrequencyGap, Profile::Desk);
    spec.geometries = vec![GeometryKind::Nula];
    spec.methods = vec![Method::Proposed];
    let values = spec.values.clone();
    let runs = run_seeds(spec);
    let med = medians(&runs, &values, Method::Proposed, GeometryKind::Nula);
    let elapsed = start.elapsed();
    verdict(
        non_decreasing(&med) && within(elapsed, 15 * 60),
        format!(
            "median MSE over subcarriers [17, 33, 49, 62]: {}, {:.0}s",
            fmt_list(&med),
            elapsed.as_secs_f64()
        ),
    )
}

fn mse_grows_with_noise() -> Verdict {
    let start = Instant::now();
    let mut spec = SweepSpec::new(SweepKind::UplinkNoise, Profile::Desk);
    spec.geometries = vec![GeometryKind::Nula];
    spec.methods = vec![Method::Proposed];
    let values = spec.values.clone();
    let runs = run_seeds(spec);
    let med = medians(&runs, &values, Method::Proposed, GeometryKind::Nula);
    let top_var = *values.last().unwrap();
    let top_mse = *med.last().unwrap();
    let elapsed = start.elapsed();
    verdict(
        non_decreasing(&med) && top_mse < top_var,
        format!(
            "median MSE over variances {:?}: {}; at {top_var}: {top_mse:.4} < {top_var}, {:.0}s",
            values,
            fmt_list(&med),
            elapsed.as_secs_f64()
        ),
    )
}

fn train_is_reproducible() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.json");
    std::fs::write(
        &cfg_path,
        r#"{"num_samples": 2000, "scenario": {"n_antennas": 32}, "train": {"n_iter": 300, "log_every": 0}}"#,
    )
    .unwrap();
    let flags = Overrides {
        seed: Some(17),
        ..Default::default()
    };
    let cfg = resolve(Some(&cfg_path), &flags).unwrap();
    let data = dir.path().join("d.bin");
    commands::cmd_gen_data(&cfg, &data).unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    commands::cmd_train(&cfg, &data, &a).unwrap();
    commands::cmd_train(&cfg, &data, &b).unwrap();
    let same_model = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
    let same_trace = std::fs::read(commands::trace_path(&a)).unwrap() == std::fs::read(commands::trace_path(&b)).unwrap();
    verdict(
        same_model && same_trace,
        format!("model files identical: {same_model}, traces identical: {same_trace}"),
    )
}

fn exclusion_invariant() -> Verdict {
    let mut rng = rng_for(104, 0, 0);
    let mut bad = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..65);
        let m = rng.random_range(1..=n);
        let scale = rng.random_range(0.0..20.0);
        let z = Matrix::from_fn(m, n, |_, _| rng.random_range(-scale..=scale));
        let logits = SelectionLogits::new(z).unwrap();
        let g = selection::sample_gumbel(m, n, &mut rng);
        let sel = selection::hard_select(&logits, &g).unwrap();
        let mut seen = vec![false; n];
        let distinct = sel.indices().iter().all(|&k| k < n && !std::mem::replace(&mut seen[k], true));
        let dense = sel.to_dense();
        let one_hot = (0..m).all(|r| {
            let row = dense.row(r);
            row.iter().all(|&v| v == 0.0 || v == 1.0) && row.iter().sum::<f64>() == 1.0
        });
        if !(distinct && one_hot && sel.indices().len() == m) {
            bad += 1;
        }
    }
    verdict(bad == 0, format!("{bad} violations in 10000 draws"))
}

fn annealing_endpoints() -> Verdict {
    let mut rng = rng_for(105, 0, 0);
    let mut bad = Vec::new();
    for _ in 0..10 {
        let n_iter = rng.random_range(2..1_000_000);
        let cfg = TrainConfig {
            n_iter,
            ..TrainConfig::default()
        };
        let first = trainer::temperature_at(1, &cfg).unwrap();
        let last = trainer::temperature_at(n_iter, &cfg).unwrap();
        if first != 5.0 || last != 0.5 {
            bad.push((n_iter, first, last));
        }
    }
    verdict(bad.is_empty(), format!("endpoint mismatches: {bad:?}"))
}

fn main() {
    // `cargo test` passes filter arguments; a `--list` request expects no output.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let _ = env_logger::builder().is_test(true).try_init();
    panic::set_hook(Box::new(|info| eprintln!("{info}")));

    let mut sweep = None;
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict>)> = vec![
        (1, "Gumbel-max argmax frequencies follow softmax", Box::new(gumbel_max_law)),
        (2, "analytic gradients match finite differences", Box::new(gradient_suite)),
        (3, "small-array recovery with f_D = f_U", Box::new(small_array_recovery)),
        (8, "training twice with one seed is byte-identical", Box::new(train_is_reproducible)),
        (9, "hard selection never repeats an antenna", Box::new(exclusion_invariant)),
        (10, "temperature schedule endpoints are exact", Box::new(annealing_endpoints)),
    ];

    let mut failures = 0;
    let mut report = |id: u32, name: &str, outcome: std::thread::Result<Verdict>| {
        let v = outcome.unwrap_or_else(|_| verdict(false, "panicked".into()));
        if !v.pass {
            failures += 1;
        }
        println!("criterion {id:>2} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    for (id, name, f) in &criteria {
        report(*id, name, panic::catch_unwind(AssertUnwindSafe(f)));
    }

    match panic::catch_unwind(compression_sweep) {
        Ok(s) => sweep = Some(s),
        Err(_) => {
            report(4, "MSE non-increasing in compression ratio", Err(Box::new(())));
            report(5, "learned selection within 5% of uniform at r = 1/8", Err(Box::new(())));
        }
    }
    if let Some((runs, values, elapsed)) = &sweep {
        report(
            4,
            "MSE non-increasing in compression ratio",
            panic::catch_unwind(AssertUnwindSafe(|| mse_falls_with_ratio(runs, values, *elapsed))),
        );
        report(
            5,
            "learned selection within 5% of uniform at r = 1/8",
            panic::catch_unwind(AssertUnwindSafe(|| learned_matches_uniform(runs, values))),
        );
    }
    report(6, "MSE non-decreasing in frequency gap", panic::catch_unwind(mse_grows_with_gap));
    report(7, "MSE non-decreasing in uplink noise, below it at the top", panic::catch_unwind(mse_grows_with_noise));

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

//! Acceptance criteria A1-A10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any gated criterion fails. A10 is reported only.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zeromode::classifier::{model_to_json, ClassifierConfig, Model};
use zeromode::data::{load_optdigits, subset_and_split, Dataset, Task};
use zeromode::dynamics::{growth_rate_with, GrowthOptions};
use zeromode::encoding::EncodingMode;
use zeromode::lattice::{build_hamiltonian, ArrayParams, PumpPattern};
use zeromode::report::{
    lasing_histogram, mode_stats, noise_sweep, strictly_zero_fraction, write_cdf_csv, write_histogram_csv,
    write_mode_stats_csv, write_noise_csv, write_predictions_csv, NOISE_REALIZATIONS,
};
use zeromode::spectrum::{eigendecompose, eigendecompose_gauge, nhph_defect};
use zeromode::threshold::{threshold_scale, ThresholdMethod};
use zeromode::training::{
    cost, cost_from_gaps, dual_anneal, metrics_of, predict_all, write_training_log, ImageGap, Metrics, TrainConfig,
    TrainOutcome,
};

/// Subset size: the largest class-balanced draw the 1797-row file allows.
const TOTAL: usize = 356;
const TRAIN_FRACTION: f64 = 0.75;
const SPLIT_SEED: u64 = 0;
const TRAIN_SEED: u64 = 7;
const DESK_BUDGET: usize = 20_000;

struct Report {
    failures: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, id: &'static str, gated: bool, pass: bool, detail: String) {
        let verdict = match (pass, gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        let mut err = std::io::stderr();
        let _ = writeln!(err, "{id} {verdict} {detail}");
        if gated && !pass {
            self.failures.push(id);
        }
    }
}

fn random_pump(seed: u64) -> PumpPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PumpPattern::new(8, 8, (0..64).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn dataset() -> Dataset {
    load_optdigits(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/optdigits.csv")).unwrap()
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn a1_a2(r: &mut Report) {
    let params = ArrayParams::standard();
    let start = Instant::now();
    let mut defect: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for seed in 0..200 {
        let h = build_hamiltonian(&random_pump(seed), &params).unwrap();
        let expected = Complex64::new(0.0, random_pump(seed).gains().iter().map(|g| g - 0.2).sum());
        for spec in [eigendecompose(&h).unwrap(), eigendecompose_gauge(&h).unwrap()] {
            defect = defect.max(nhph_defect(&spec));
            let sum: Complex64 = spec.eigenvalues().iter().sum();
            trace = trace.max((sum - expected).norm());
            residual = residual.max(spec.max_residual().unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "A1",
        true,
        defect <= 1e-8 && secs <= 10.0,
        format!("nhph_defect max {defect:.2e} (<= 1e-8) over 200 pumps x 2 solvers, {secs:.2} s (<= 10 s)"),
    );
    r.line(
        "A2",
        true,
        trace <= 1e-10 * 64.0 && residual <= 1e-8,
        format!(
            "trace error max {trace:.2e} (<= {:.1e}), eigen residual max {residual:.2e} (<= 1e-8)",
            1e-10 * 64.0
        ),
    );
}

/// Long enough that horizon times the Im-gap below the leading mode is at
/// least 10 for every pump drawn here (smallest gap 2.7e-3).
const A3_HORIZON: f64 = 4000.0;

fn a3(r: &mut Report) {
    let params = ArrayParams::standard();
    let mut worst: f64 = 0.0;
    let start = Instant::now();
    for seed in 0..20 {
        let h = build_hamiltonian(&random_pump(1000 + seed), &params).unwrap();
        let target = eigendecompose(&h).unwrap().max_imag();
        let est = growth_rate_with(&h, &GrowthOptions::with_horizon(A3_HORIZON)).unwrap();
        worst = worst.max((est.rate - target).abs() / target.abs());
    }
    r.line(
        "A3",
        true,
        worst <= 1e-3,
        format!(
            "growth rate vs max Im eps, worst rel err {worst:.2e} (<= 1e-3) over 20 pumps, horizon {A3_HORIZON}, {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn a4(r: &mut Report) {
    let params = ArrayParams::standard();
    let mut residual: f64 = 0.0;
    let mut covariance: f64 = 0.0;
    for seed in 0..50 {
        let p = random_pump(2000 + seed);
        let t = threshold_scale(&p, &params, ThresholdMethod::ExactMax).unwrap();
        residual = residual.max(t.spectrum.max_imag().abs());
        for c in [0.01, 0.37, 3.0, 250.0] {
            let s = threshold_scale(&p.scaled(c), &params, ThresholdMethod::ExactMax).unwrap();
            residual = residual.max(s.spectrum.max_imag().abs());
            covariance = covariance.max((s.alpha - t.alpha / c).abs() / (t.alpha / c));
        }
    }
    let mut dimer: f64 = 0.0;
    let pair = ArrayParams::new(1, 2, 1.0, 1.0, 0.2).unwrap();
    for g in [0.05, 0.3, 1.0, 7.5, 123.0] {
        let t = threshold_scale(
            &PumpPattern::uniform(1, 2, g).unwrap(),
            &pair,
            ThresholdMethod::ExactMax,
        )
        .unwrap();
        dimer = dimer.max((t.alpha - 0.2 / g).abs() / (0.2 / g));
    }
    r.line(
        "A4",
        true,
        residual <= 1e-9 && dimer <= 1e-9 && covariance <= 1e-9,
        format!(
            "|max Im eps| at threshold {residual:.2e} (<= 1e-9), dimer rel err {dimer:.2e}, scale covariance rel err {covariance:.2e} (both <= 1e-9)"
        ),
    );
}

fn a8(r: &mut Report, data: &Dataset) {
    let hand = cost_from_gaps(
        &[
            ImageGap {
                id: 0,
                gap: 0.1,
                positive: true,
            },
            ImageGap {
                id: 1,
                gap: -0.1,
                positive: false,
            },
        ],
        4.0,
    );
    let hand_ok = (hand + 2.0 * 0.4f64.tanh()).abs() <= 1e-12;

    // Same images, roles of the two digits exchanged: gaps are identical
    // and every term changes sign.
    let (train, _) = subset_and_split(data, Task::OneVsOne { other_digit: 1 }, 0, 40, 0.5, 3).unwrap();
    let array = ArrayParams::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let entries: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let m = zeromode::encoding::TransformMatrix::new(EncodingMode::Matrix8, &array, entries).unwrap();
    let config = |target, other| ClassifierConfig {
        delta: 1e-3,
        target_digit: target,
        task: Task::OneVsOne { other_digit: other },
        threshold_method: ThresholdMethod::ExactMax,
        encoding_mode: EncodingMode::Matrix8,
    };
    let a = cost(&m, train.images(), &array, &config(0, 1), 4.0).unwrap();
    let b = cost(&m, train.images(), &array, &config(1, 0), 4.0).unwrap();
    let antisymmetric = a.total_cost == -b.total_cost;
    let bounded = a.total_cost.abs() <= train.len() as f64;
    r.line(
        "A8",
        true,
        hand_ok && antisymmetric && bounded,
        format!(
            "hand C = {hand:.12} (target {:.12}), label swap {} vs {} (exact negation: {antisymmetric}), |C| <= {} : {bounded}",
            -2.0 * 0.4f64.tanh(),
            a.total_cost,
            b.total_cost,
            train.len()
        ),
    );
}

fn classifier(task: Task, delta: f64) -> ClassifierConfig {
    ClassifierConfig {
        delta,
        target_digit: 0,
        task,
        threshold_method: ThresholdMethod::ExactMax,
        encoding_mode: EncodingMode::Matrix8,
    }
}

struct Trained {
    outcome: TrainOutcome,
    train: Dataset,
    test: Dataset,
    test_metrics: Metrics,
    secs: f64,
}

fn train_protocol(data: &Dataset, task: Task, delta: f64, budget: usize, name: &str) -> Trained {
    let (train, test) = subset_and_split(data, task, 0, TOTAL, TRAIN_FRACTION, SPLIT_SEED).unwrap();
    let config = TrainConfig {
        budget,
        seed: TRAIN_SEED,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = dual_anneal(
        train.images(),
        &ArrayParams::standard(),
        &config,
        &classifier(task, delta),
        data.fingerprint(),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let test_metrics = metrics_of(&predict_all(&outcome.model, test.images()).unwrap());
    let dir = out_dir(name);
    std::fs::write(dir.join("model.json"), model_to_json(&outcome.model)).unwrap();
    write_training_log(
        std::fs::File::create(dir.join("training_log.csv")).unwrap(),
        &outcome.log,
    )
    .unwrap();
    Trained {
        outcome,
        train,
        test,
        test_metrics,
        secs,
    }
}

fn describe(m: &Metrics) -> String {
    let pct = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{:.1}%", 100.0 * x));
    format!(
        "accuracy {:.1}% precision {} recall {} (tp {} fp {} tn {} fn {})",
        100.0 * m.accuracy,
        pct(m.precision),
        pct(m.recall),
        m.tp,
        m.fp,
        m.tn,
        m.fn_
    )
}

fn a7(r: &mut Report, model: &Model, test: &Dataset) {
    let points = noise_sweep(
        model,
        test.images(),
        &[0.0, 0.05, 1.0, 2.0],
        NOISE_REALIZATIONS,
        0,
        false,
    )
    .unwrap();
    let (clean, low, high, higher) = (&points[0], &points[1], &points[2], &points[3]);
    let low_ok = (low.mean_accuracy - clean.mean_accuracy).abs() <= 0.02;
    let random = |a: f64| (0.40..=0.60).contains(&a);
    r.line(
        "A7",
        true,
        low_ok && random(high.mean_accuracy) && random(higher.mean_accuracy),
        format!(
            "accuracy noiseless {:.3}, level 0.05 {:.3}+-{:.3} (within 0.02), level 1 {:.3}+-{:.3}, level 2 {:.3}+-{:.3} (in [0.40, 0.60])",
            clean.mean_accuracy,
            low.mean_accuracy,
            low.std_accuracy,
            high.mean_accuracy,
            high.std_accuracy,
            higher.mean_accuracy,
            higher.std_accuracy
        ),
    );
}

fn a10_fraction(t: &Trained) -> (Option<f64>, usize) {
    let mut images = t.train.images().to_vec();
    images.extend_from_slice(t.test.images());
    let stats = mode_stats(&predict_all(&t.outcome.model, &images).unwrap());
    (
        strictly_zero_fraction(&stats),
        stats.iter().filter(|s| s.selected).count(),
    )
}

/// Every artifact of a short training run, as bytes.
fn artifacts(data: &Dataset) -> Vec<(String, Vec<u8>)> {
    let (train, test) = subset_and_split(
        data,
        Task::OneVsOne { other_digit: 1 },
        0,
        40,
        TRAIN_FRACTION,
        SPLIT_SEED,
    )
    .unwrap();
    let config = TrainConfig {
        budget: 150,
        seed: 99,
        polish_fraction: 0.2,
        ..TrainConfig::default()
    };
    let cc = classifier(Task::OneVsOne { other_digit: 1 }, 1e-3);
    let outcome = dual_anneal(
        train.images(),
        &ArrayParams::standard(),
        &config,
        &cc,
        data.fingerprint(),
    )
    .unwrap();
    let model = &outcome.model;
    let predictions = predict_all(model, test.images()).unwrap();
    let stats = mode_stats(&predictions);
    let sweep = noise_sweep(model, test.images(), &[0.0, 0.3], 3, 5, false).unwrap();
    let mut out = vec![("model.json".to_string(), model_to_json(model).into_bytes())];
    let mut push = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        out.push((name.to_string(), buf));
    };
    push("training_log.csv", &|w| write_training_log(w, &outcome.log));
    push("predictions.csv", &|w| write_predictions_csv(w, &predictions));
    push("mode_stats.csv", &|w| write_mode_stats_csv(w, &stats));
    push("histogram.csv", &|w| write_histogram_csv(w, &lasing_histogram(&stats)));
    push("cdf.csv", &|w| write_cdf_csv(w, &stats));
    push("noise.csv", &|w| write_noise_csv(w, &sweep));
    out
}

fn a9(r: &mut Report, data: &Dataset) {
    let first = artifacts(data);
    let second = artifacts(data);
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, _)| a.0.as_str())
        .collect();
    r.line(
        "A9",
        true,
        differing.is_empty(),
        format!(
            "two seeded runs, {} artifacts compared byte for byte, differing: {:?}",
            first.len(),
            differing
        ),
    );
}

fn main() {
    // Behave like a single test named "acceptance" under libtest filters.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if args
        .iter()
        .filter(|a| !a.starts_with('-'))
        .any(|f| !"acceptance".contains(f.as_str()))
    {
        return;
    }
    let mut r = Report { failures: Vec::new() };
    let data = dataset();
    a1_a2(&mut r);
    a3(&mut r);
    a4(&mut r);
    a8(&mut r, &data);
    a9(&mut r, &data);

    if std::env::var_os("ACCEPTANCE_FAST").is_some() {
        for id in ["A5", "A6", "A7", "A10"] {
            let _ = writeln!(std::io::stderr(), "SKIP {id}: ACCEPTANCE_FAST set, no training runs");
        }
    } else {
        training_criteria(&mut r, &data);
    }

    if !r.failures.is_empty() {
        let _ = writeln!(std::io::stderr(), "acceptance failures: {:?}", r.failures);
        std::process::exit(1);
    }
}

fn training_criteria(r: &mut Report, data: &Dataset) {
    let ovo = train_protocol(data, Task::OneVsOne { other_digit: 1 }, 1e-3, DESK_BUDGET, "one_vs_one");
    let m = &ovo.test_metrics;
    r.line(
        "A5",
        true,
        m.accuracy >= 0.90 && m.precision.is_some_and(|p| p >= 0.95),
        format!(
            "one-vs-one 0/1, delta 1e-3, {}/{} split, budget {}: test {} (need accuracy >= 90%, precision >= 95%); {:.0} s on {} thread(s)",
            ovo.train.len(),
            ovo.test.len(),
            DESK_BUDGET,
            describe(m),
            ovo.secs,
            rayon::current_num_threads()
        ),
    );
    a7(r, &ovo.outcome.model, &ovo.test);

    let ova = train_protocol(data, Task::OneVsAll, 0.1, DESK_BUDGET, "one_vs_all");
    r.line(
        "A6",
        true,
        ova.test_metrics.accuracy >= 0.85,
        format!(
            "one-vs-all, delta 0.1, {}/{} split, budget {}: test {} (need accuracy >= 85%); {:.0} s",
            ova.train.len(),
            ova.test.len(),
            DESK_BUDGET,
            describe(&ova.test_metrics),
            ova.secs
        ),
    );

    let (f_ovo, n_ovo) = a10_fraction(&ovo);
    let (f_ova, n_ova) = a10_fraction(&ova);
    let within = |f: Option<f64>, lo: f64| f.is_some_and(|x| (lo..=1.0).contains(&x));
    let show = |f: Option<f64>| f.map_or("undefined".to_string(), |x| format!("{:.1}%", 100.0 * x));
    r.line(
        "A10",
        false,
        within(f_ovo, 0.70) && within(f_ova, 0.60),
        format!(
            "strictly-zero share of selected lasing modes: one-vs-one {} of {} (expect [70%, 100%]), one-vs-all {} of {} (expect [60%, 100%]); reported, not gated",
            show(f_ovo),
            n_ovo,
            show(f_ova),
            n_ova
        ),
    );
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use zeromode::classifier::{load_model, save_model, ClassifierConfig, Model, Pipeline};
use zeromode::data::{
    load_optdigits, read_split_manifest, subset_and_split, write_split_manifest, Dataset, Image, SplitTag, Task,
};
use zeromode::encoding::EncodingMode;
use zeromode::lattice::{build_hamiltonian, ArrayParams};
use zeromode::report::{
    answer_str, lasing_histogram, mode_stats, noise_sweep, strictly_zero_fraction, write_cdf_csv, write_histogram_csv,
    write_mode_stats_csv, write_noise_csv, write_predictions_csv, NOISE_REALIZATIONS,
};
use zeromode::spectrum::{eigendecompose, lasing_index, neighbor_phase_differences, write_spectrum_csv};
use zeromode::threshold::{ThresholdMethod, DEFAULT_LSE_BETA};
use zeromode::training::{dual_anneal, metrics_of, predict_all, write_training_log, AnnealParams, TrainConfig};

use crate::error::CliError;
use crate::settings::{EncodingArg, MethodArg, Settings, SplitArg, TaskArg};

pub const DEFAULT_TOTAL: usize = 356;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;
pub const DEFAULT_NOISE_LEVELS: [f64; 8] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 2.0];
const RESIDUAL_LIMIT: f64 = 1e-8;

/// What a command produced, for the run manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub dataset_fingerprint: Option<String>,
}

pub fn array_params(s: &Settings) -> Result<ArrayParams, CliError> {
    let mut a = ArrayParams::standard();
    a.rows = s.rows.unwrap_or(a.rows);
    a.cols = s.cols.unwrap_or(a.cols);
    a.kappa_x = s.kappa_x.unwrap_or(a.kappa_x);
    a.kappa_y = s.kappa_y.unwrap_or(a.kappa_y);
    a.gamma = s.gamma.unwrap_or(a.gamma);
    a.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(a)
}

pub fn classifier_config(s: &Settings) -> Result<ClassifierConfig, CliError> {
    let task = match s.task.unwrap_or(TaskArg::OneVsOne) {
        TaskArg::OneVsOne => Task::OneVsOne {
            other_digit: s.other_digit.unwrap_or(1),
        },
        TaskArg::OneVsAll => Task::OneVsAll,
    };
    let threshold_method = match s.threshold_method.unwrap_or(MethodArg::ExactMax) {
        MethodArg::ExactMax => ThresholdMethod::ExactMax,
        MethodArg::Lse => ThresholdMethod::Lse {
            beta: s.lse_beta.unwrap_or(DEFAULT_LSE_BETA),
        },
    };
    let encoding_mode = match s.encoding.unwrap_or(EncodingArg::Matrix8) {
        EncodingArg::Matrix8 => EncodingMode::Matrix8,
        EncodingArg::Flat64 => EncodingMode::Flat64,
    };
    let config = ClassifierConfig {
        delta: s.delta.unwrap_or(1e-3),
        target_digit: s.target_digit.unwrap_or(0),
        task,
        threshold_method,
        encoding_mode,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

pub fn train_config(s: &Settings) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let bounds = match s.bounds.as_deref() {
        None => d.bounds,
        Some([lo, hi]) => (*lo, *hi),
        Some(other) => {
            return Err(CliError::Usage(format!(
                "--bounds needs two values, got {}",
                other.len()
            )))
        }
    };
    let a = AnnealParams::default();
    let config = TrainConfig {
        eta: s.eta.unwrap_or(d.eta),
        budget: s.budget.unwrap_or(d.budget),
        bounds,
        seed: s.seed.unwrap_or(d.seed),
        anneal: AnnealParams {
            initial_temperature: s.initial_temperature.unwrap_or(a.initial_temperature),
            visiting: s.visiting.unwrap_or(a.visiting),
            acceptance: s.acceptance.unwrap_or(a.acceptance),
            restart_ratio: s.restart_ratio.unwrap_or(a.restart_ratio),
        },
        local_search: s.local_search.unwrap_or(d.local_search),
        polish_fraction: s.polish_fraction.unwrap_or(d.polish_fraction),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_with(
    path: &Path,
    out: &mut Outcome,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))?;
    out.artifacts.push(path.to_path_buf());
    Ok(())
}

fn write_json(path: &Path, out: &mut Outcome, value: &serde_json::Value) -> Result<(), CliError> {
    write_with(path, out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn load_dataset(s: &Settings, out: &mut Outcome) -> Result<Dataset, CliError> {
    let data = load_optdigits(s.dataset_path()?)?;
    out.dataset_fingerprint = Some(data.fingerprint().to_string());
    Ok(data)
}

fn load_checked_model(s: &Settings, data: &Dataset) -> Result<Model, CliError> {
    let model = load_model(s.model_path())?;
    if model.provenance.dataset_sha != data.fingerprint() {
        eprintln!("warning: dataset fingerprint differs from the one the model was trained on");
    }
    Ok(model)
}

/// Images named by `--on`, read through the split manifest. `all` without a
/// manifest file means the whole dataset.
fn images_on(s: &Settings, data: &Dataset, default: SplitArg) -> Result<Vec<Image>, CliError> {
    let on = s.on.unwrap_or(default);
    let path = s.split_path();
    if on == SplitArg::All && s.split.is_none() && !path.exists() {
        return Ok(data.images().to_vec());
    }
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest = read_split_manifest(BufReader::new(file))?;
    let ids = match on {
        SplitArg::Train => manifest.ids(SplitTag::Train),
        SplitArg::Test => manifest.ids(SplitTag::Test),
        SplitArg::All => manifest.ids(SplitTag::All),
    };
    if ids.is_empty() {
        return Err(CliError::Data(format!(
            "split manifest {} has no images for this selection",
            path.display()
        )));
    }
    Ok(data.select(&ids, SplitTag::All)?.images().to_vec())
}

fn with_delta(model: &Model, s: &Settings) -> Result<ClassifierConfig, CliError> {
    let mut config = model.config;
    if let Some(d) = s.delta {
        config.delta = d;
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(config)
}

fn metrics_json(m: &zeromode::training::Metrics) -> serde_json::Value {
    serde_json::to_value(m).expect("metrics serialize")
}

pub fn train(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let array = array_params(s)?;
    let cc = classifier_config(s)?;
    let tc = train_config(s)?;
    let data = load_dataset(s, &mut out)?;
    let (train, test) = subset_and_split(
        &data,
        cc.task,
        cc.target_digit,
        s.total.unwrap_or(DEFAULT_TOTAL),
        s.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION),
        s.split_seed.unwrap_or(0),
    )?;
    let dir = s.out_dir();
    write_with(&s.split_path(), &mut out, |w| write_split_manifest(w, &train, &test))?;

    let outcome = dual_anneal(train.images(), &array, &tc, &cc, data.fingerprint())?;
    if !outcome.improved {
        eprintln!(
            "warning: budget of {} evaluation(s) exhausted without improving on the initial transform",
            tc.budget
        );
    }
    if outcome.warnings > 0 {
        eprintln!(
            "warning: {} image evaluation(s) failed threshold scaling and got the sentinel gap",
            outcome.warnings
        );
    }
    let model_path = s.model_path();
    if let Some(parent) = model_path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    save_model(&outcome.model, &model_path)?;
    out.artifacts.push(model_path);
    write_with(&dir.join("training_log.csv"), &mut out, |w| {
        write_training_log(w, &outcome.log)
    })?;

    let train_metrics = metrics_of(&predict_all(&outcome.model, train.images())?);
    let test_metrics = metrics_of(&predict_all(&outcome.model, test.images())?);
    let summary = json!({
        "initial_cost": outcome.initial_cost,
        "final_cost": outcome.final_cost,
        "evaluations_used": outcome.evaluations_used,
        "train": metrics_json(&train_metrics),
        "test": metrics_json(&test_metrics),
    });
    write_json(&dir.join("train_summary.json"), &mut out, &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(out)
}

pub fn evaluate(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let data = load_dataset(s, &mut out)?;
    let model = load_checked_model(s, &data)?;
    let path = s.split_path();
    let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest = read_split_manifest(BufReader::new(file))?;
    if manifest.train.is_empty() && manifest.test.is_empty() {
        return Err(CliError::Data(format!("split manifest {} is empty", path.display())));
    }
    let dir = s.out_dir();
    let mut summary = serde_json::Map::new();
    for (name, tag) in [("train", SplitTag::Train), ("test", SplitTag::Test)] {
        let ids = manifest.ids(tag);
        if ids.is_empty() {
            continue;
        }
        let part = data.select(&ids, tag)?;
        let predictions = predict_all(&model, part.images())?;
        write_with(&dir.join(format!("predictions_{name}.csv")), &mut out, |w| {
            write_predictions_csv(w, &predictions)
        })?;
        summary.insert(name.into(), metrics_json(&metrics_of(&predictions)));
    }
    let summary = serde_json::Value::Object(summary);
    write_json(&dir.join("metrics.json"), &mut out, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("metrics serialize"));
    Ok(out)
}

pub fn mode_stats_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let data = load_dataset(s, &mut out)?;
    let model = load_checked_model(s, &data)?;
    let images = images_on(s, &data, SplitArg::Test)?;
    let predictions = predict_all(&model, &images)?;
    let stats = mode_stats(&predictions);
    let dir = s.out_dir();
    write_with(&dir.join("mode_stats.csv"), &mut out, |w| {
        write_mode_stats_csv(w, &stats)
    })?;
    write_with(&dir.join("lasing_histogram.csv"), &mut out, |w| {
        write_histogram_csv(w, &lasing_histogram(&stats))
    })?;
    write_with(&dir.join("lasing_cdf.csv"), &mut out, |w| write_cdf_csv(w, &stats))?;
    let selected = stats.iter().filter(|m| m.selected).count();
    let summary = json!({
        "images": stats.len(),
        "selected_lasing_modes": selected,
        "strictly_zero_fraction": strictly_zero_fraction(&stats),
    });
    write_json(&dir.join("mode_summary.json"), &mut out, &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(out)
}

pub fn noise_sweep_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let data = load_dataset(s, &mut out)?;
    let model = load_checked_model(s, &data)?;
    let images = images_on(s, &data, SplitArg::Test)?;
    let levels = s.noise_levels.clone().unwrap_or_else(|| DEFAULT_NOISE_LEVELS.to_vec());
    if let Some(bad) = levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(CliError::Usage(format!(
            "noise level {bad} must be a nonnegative number"
        )));
    }
    let points = noise_sweep(
        &model,
        &images,
        &levels,
        s.realizations.unwrap_or(NOISE_REALIZATIONS),
        s.noise_seed.unwrap_or(0),
        s.symmetric_noise.unwrap_or(false),
    )?;
    write_with(&s.out_dir().join("noise_sweep.csv"), &mut out, |w| {
        write_noise_csv(w, &points)
    })?;
    for p in &points {
        println!(
            "level {:<6} accuracy {:.4} +- {:.4}",
            p.level, p.mean_accuracy, p.std_accuracy
        );
    }
    Ok(out)
}

fn image_arg<'a>(s: &Settings, data: &'a Dataset) -> Result<&'a Image, CliError> {
    let id = s
        .image_id
        .ok_or_else(|| CliError::Usage("--image-id is required".into()))?;
    data.get(id)
        .ok_or_else(|| CliError::Data(format!("no image with id {id} in the dataset")))
}

pub fn spectrum_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let data = load_dataset(s, &mut out)?;
    let model = load_checked_model(s, &data)?;
    let image = image_arg(s, &data)?;
    let config = with_delta(&model, s)?;
    let run = Pipeline::new(&model.array)?.run(image, &model.transform, &config, None)?;
    let Some(threshold) = run.threshold else {
        return Err(CliError::Numerical(format!(
            "image {} never reaches threshold; no spectrum to dump",
            image.id()
        )));
    };
    let h = build_hamiltonian(&threshold.scaled_pump, &model.array).map_err(|e| CliError::Numerical(e.to_string()))?;
    let spectrum = eigendecompose(&h).map_err(|e| CliError::Numerical(e.to_string()))?;
    if let Some(r) = spectrum.max_residual() {
        if r > RESIDUAL_LIMIT {
            return Err(CliError::Numerical(format!(
                "eigen residual {r:e} above {RESIDUAL_LIMIT:e}"
            )));
        }
    }
    let dir = s.out_dir();
    let id = image.id();
    write_with(&dir.join(format!("spectrum_{id}.csv")), &mut out, |w| {
        write_spectrum_csv(w, &spectrum, config.delta)
    })?;
    let (rows, cols) = (model.array.rows, model.array.cols);
    let alpha = threshold.alpha;
    write_with(&dir.join(format!("pump_{id}.csv")), &mut out, |w| {
        writeln!(w, "row,col,pump,scaled_pump")?;
        for r in 0..rows {
            for c in 0..cols {
                let g = threshold.scaled_pump.get(r, c);
                writeln!(w, "{r},{c},{:e},{:e}", g / alpha, g)?;
            }
        }
        Ok(())
    })?;
    let lasing = lasing_index(&spectrum);
    if let Some(basis) = spectrum.basis() {
        let phases = neighbor_phase_differences(&basis.vectors[lasing], rows, cols);
        write_with(&dir.join(format!("lasing_phases_{id}.csv")), &mut out, |w| {
            writeln!(w, "bond,phase_difference")?;
            for (k, p) in phases.iter().enumerate() {
                writeln!(w, "{k},{p:e}")?;
            }
            Ok(())
        })?;
    }
    let r = &run.result;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "id": id,
            "label": image.label(),
            "answer": answer_str(r.answer),
            "gap": r.gap,
            "alpha": alpha,
            "lasing_re": spectrum.eigenvalues()[lasing].re,
            "lasing_im": spectrum.eigenvalues()[lasing].im,
        }))
        .expect("summary serializes")
    );
    Ok(out)
}

pub fn classify_cmd(s: &Settings) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let data = load_dataset(s, &mut out)?;
    let model = load_checked_model(s, &data)?;
    let image = image_arg(s, &data)?;
    let config = with_delta(&model, s)?;
    let r = Pipeline::new(&model.array)?
        .run(image, &model.transform, &config, None)?
        .result;
    let value = json!({
        "id": image.id(),
        "label": image.label(),
        "answer": answer_str(r.answer),
        "gap": r.gap,
        "alpha": r.alpha,
        "lasing_re": r.lasing_eigenvalue.map(|e| e.re),
        "lasing_im": r.lasing_eigenvalue.map(|e| e.im),
        "lasing_selected": r.lasing_selected,
        "selected_count": r.selected_count,
        "strictly_zero": r.strictly_zero,
        "diagnostic": r.diagnostic,
    });
    write_json(
        &s.out_dir().join(format!("classify_{}.json", image.id())),
        &mut out,
        &value,
    )?;
    println!("{}", serde_json::to_string_pretty(&value).expect("result serializes"));
    Ok(out)
}

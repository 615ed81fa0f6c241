//! Cost function, metrics, and the generalized simulated annealing trainer.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{
    Answer, ClassificationResult, ClassifierConfig, ClassifyError, Model, ModelError, Pipeline, Provenance,
};
use crate::data::Image;
use crate::encoding::{EncodingError, TransformMatrix};
use crate::lattice::ArrayParams;
use crate::spectrum::empty_set_sentinel;
use crate::threshold::{ThresholdError, ThresholdHint};

pub const DEFAULT_ETA: f64 = 4.0;
pub const DEFAULT_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealParams {
    pub initial_temperature: f64,
    /// Tsallis visiting parameter `q_v`.
    pub visiting: f64,
    /// Generalized Metropolis parameter `q_a`.
    pub acceptance: f64,
    /// Restart once the temperature drops below this fraction of the initial one.
    pub restart_ratio: f64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            initial_temperature: 5230.0,
            visiting: 2.62,
            acceptance: -5.0,
            restart_ratio: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    /// Maximum number of full training-set cost evaluations.
    pub budget: usize,
    pub bounds: (f64, f64),
    pub seed: u64,
    pub anneal: AnnealParams,
    pub local_search: bool,
    /// Share of the budget held back for the final simplex polish.
    pub polish_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            budget: DEFAULT_BUDGET,
            bounds: (-1.0, 1.0),
            seed: 0,
            anneal: AnnealParams::default(),
            local_search: true,
            polish_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |m: String| Err(TrainingError::InvalidConfig(m));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("bounds [{lo}, {hi}] are not an interval"));
        }
        let a = &self.anneal;
        if !(a.visiting > 1.0 && a.visiting <= 3.0) {
            return bad(format!("visiting parameter {} outside (1, 3]", a.visiting));
        }
        if !(a.acceptance < 1.0 && a.acceptance.is_finite()) {
            return bad(format!("acceptance parameter {} must be below 1", a.acceptance));
        }
        if !(a.initial_temperature > 0.0 && a.initial_temperature.is_finite()) {
            return bad(format!("initial temperature {}", a.initial_temperature));
        }
        if !(a.restart_ratio > 0.0 && a.restart_ratio < 1.0) {
            return bad(format!("restart ratio {} outside (0, 1)", a.restart_ratio));
        }
        if !(0.0..1.0).contains(&self.polish_fraction) {
            return bad(format!("polish fraction {} outside [0, 1)", self.polish_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("labeled image set is empty")]
    EmptySet,
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGap {
    pub id: usize,
    pub gap: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub total_cost: f64,
    pub per_image_gaps: Vec<ImageGap>,
    pub evaluations_used: usize,
    /// Images whose threshold search failed and got the sentinel gap.
    pub warnings: usize,
    /// Full eigenvalue computations spent on this evaluation.
    pub dense_solves: usize,
}

/// `-sum_+ tanh(eta gap) + sum_- tanh(eta gap)`, accumulated in the given order.
pub fn cost_from_gaps(gaps: &[ImageGap], eta: f64) -> f64 {
    gaps.iter()
        .map(|g| {
            let t = (eta * g.gap).tanh();
            if g.positive {
                -t
            } else {
                t
            }
        })
        .sum()
}

/// Repeated cost evaluation over a fixed labeled set. Keeps one threshold
/// hint per image so that nearby transforms reuse the previous root.
#[derive(Debug)]
pub struct CostEvaluator {
    images: Vec<Image>,
    array: ArrayParams,
    config: ClassifierConfig,
    eta: f64,
    hints: Vec<Option<ThresholdHint>>,
    evaluations: usize,
    warnings: usize,
}

impl CostEvaluator {
    /// Images are ordered by id so that the accumulated cost does not depend
    /// on the input order.
    pub fn new(
        images: &[Image],
        array: ArrayParams,
        config: ClassifierConfig,
        eta: f64,
    ) -> Result<Self, TrainingError> {
        if images.is_empty() {
            return Err(TrainingError::EmptySet);
        }
        array
            .validate()
            .map_err(|e| TrainingError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        let mut images = images.to_vec();
        images.sort_by_key(Image::id);
        Ok(Self {
            hints: vec![None; images.len()],
            images,
            array,
            config,
            eta,
            evaluations: 0,
            warnings: 0,
        })
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Total count of sentinel substitutions over all evaluations.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn evaluate(&mut self, m: &TransformMatrix) -> Result<CostReport, TrainingError> {
        m.check_array(&self.array)?;
        let (array, config) = (self.array, self.config);
        let gamma = array.gamma;
        let target = config.target_digit;
        let outcomes: Vec<Result<(f64, bool, usize), TrainingError>> = self
            .images
            .par_iter()
            .zip(self.hints.par_iter_mut())
            .map_init(
                || Pipeline::new(&array),
                |pipeline, (image, hint)| {
                    let pipeline = pipeline.as_mut().map_err(|e| TrainingError::Threshold(e.clone()))?;
                    match pipeline.run(image, m, &config, hint.as_ref()) {
                        Ok(out) => {
                            let failed = out.result.diagnostic.is_some();
                            let mut dense = 0;
                            if let Some(t) = &out.threshold {
                                *hint = t.hint;
                                dense = t.dense_solves;
                            }
                            Ok((out.result.gap, failed, dense))
                        }
                        Err(ClassifyError::Threshold(_)) => {
                            *hint = None;
                            Ok((empty_set_sentinel(gamma), true, 0))
                        }
                        Err(ClassifyError::Encoding(e)) => Err(e.into()),
                    }
                },
            )
            .collect();
        let mut gaps = Vec::with_capacity(outcomes.len());
        let mut warnings = 0;
        let mut dense_solves = 0;
        for (image, outcome) in self.images.iter().zip(outcomes) {
            let (gap, failed, dense) = outcome?;
            dense_solves += dense;
            warnings += usize::from(failed);
            gaps.push(ImageGap {
                id: image.id(),
                gap,
                positive: image.label() == target,
            });
        }
        self.evaluations += 1;
        self.warnings += warnings;
        Ok(CostReport {
            total_cost: cost_from_gaps(&gaps, self.eta),
            per_image_gaps: gaps,
            evaluations_used: self.evaluations,
            warnings,
            dense_solves,
        })
    }
}

/// One-shot cost of `m` on a labeled set.
pub fn cost(
    m: &TransformMatrix,
    images: &[Image],
    array: &ArrayParams,
    config: &ClassifierConfig,
    eta: f64,
) -> Result<CostReport, TrainingError> {
    CostEvaluator::new(images, *array, *config, eta)?.evaluate(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// `None` when nothing was predicted positive.
    pub precision: Option<f64>,
    /// `None` when the set has no positives.
    pub recall: Option<f64>,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_).unwrap_or(f64::NAN),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }

    /// From (actual positive, predicted positive) pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (actual, predicted) in pairs {
            match (actual, predicted) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: usize,
    pub label: u8,
    pub positive: bool,
    pub result: ClassificationResult,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.positive == (self.result.answer == Answer::Yes)
    }
}

/// Classifies every image, in id order.
pub fn predict_all(model: &Model, images: &[Image]) -> Result<Vec<Prediction>, TrainingError> {
    let mut images: Vec<&Image> = images.iter().collect();
    images.sort_by_key(|i| i.id());
    let results: Vec<Result<ClassificationResult, ClassifyError>> = images
        .par_iter()
        .map_init(
            || Pipeline::new(&model.array),
            |pipeline, image| {
                let pipeline = pipeline.as_mut().map_err(|e| ClassifyError::Threshold(e.clone()))?;
                Ok(pipeline.run_model(image, model)?.result)
            },
        )
        .collect();
    images
        .iter()
        .zip(results)
        .map(|(image, r)| {
            Ok(Prediction {
                id: image.id(),
                label: image.label(),
                positive: model.config.is_positive(image.label()),
                result: r?,
            })
        })
        .collect()
}

pub fn metrics_of(predictions: &[Prediction]) -> Metrics {
    Metrics::tally(predictions.iter().map(|p| (p.positive, p.result.answer == Answer::Yes)))
}

pub fn evaluate(model: &Model, images: &[Image]) -> Result<Metrics, TrainingError> {
    if images.is_empty() {
        return Err(TrainingError::EmptySet);
    }
    Ok(metrics_of(&predict_all(model, images)?))
}

pub const TRAINING_LOG_HEADER: &str = "evaluation,temperature,current_cost,best_cost";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub evaluation: usize,
    /// Annealing temperature, `NaN` for initial and polish evaluations.
    pub temperature: f64,
    pub current_cost: f64,
    pub best_cost: f64,
}

pub fn write_training_log<W: Write>(mut out: W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(out, "{TRAINING_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{:e}",
            r.evaluation, r.temperature, r.current_cost, r.best_cost
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LogRow>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub evaluations_used: usize,
    /// Sentinel substitutions summed over all evaluations.
    pub warnings: usize,
    /// False when no proposal ever beat the initial transform.
    pub improved: bool,
}

const TAIL_LIMIT: f64 = 1e8;
const MIN_VISIT_BOUND: f64 = 1e-10;

/// Tsallis visiting distribution with the constants of the generalized
/// simulated annealing literature.
struct Visiting {
    qv: f64,
    lower: f64,
    range: f64,
    factor4_p: f64,
    factor6: f64,
}

impl Visiting {
    fn new(qv: f64, lower: f64, upper: f64) -> Self {
        let factor2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
        let factor3 = ((2.0 - qv) * 2f64.ln() / (qv - 1.0)).exp();
        let factor4_p = std::f64::consts::PI.sqrt() * factor2 / (factor3 * (3.0 - qv));
        let factor5 = 1.0 / (qv - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let pi = std::f64::consts::PI;
        let factor6 = pi * (1.0 - factor5) / (pi * (1.0 - factor5)).sin() / libm::lgamma(d1).exp();
        Self {
            qv,
            lower,
            range: upper - lower,
            factor4_p,
            factor6,
        }
    }

    fn draw(&self, temperature: f64, rng: &mut ChaCha8Rng) -> f64 {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let qv = self.qv;
        let factor1 = (temperature.ln() / (qv - 1.0)).exp();
        let factor4 = self.factor4_p * factor1;
        let x = x * (-(qv - 1.0) * (self.factor6 / factor4).ln() / (3.0 - qv)).exp();
        let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
        x / den
    }

    fn wrap(&self, v: f64) -> f64 {
        let a = v - self.lower;
        let b = a % self.range + self.range;
        let mut w = b % self.range + self.lower;
        if (w - self.lower).abs() < MIN_VISIT_BOUND {
            w += MIN_VISIT_BOUND;
        }
        w
    }

    /// Steps `0..dim` move every coordinate, steps `dim..2 dim` move one.
    fn visit(&self, x: &[f64], step: usize, temperature: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let dim = x.len();
        let mut out = x.to_vec();
        if step < dim {
            let mut visits: Vec<f64> = (0..dim).map(|_| self.draw(temperature, rng)).collect();
            let upper: f64 = rng.random();
            let lower: f64 = rng.random();
            for v in &mut visits {
                if *v > TAIL_LIMIT {
                    *v = TAIL_LIMIT * upper;
                } else if *v < -TAIL_LIMIT {
                    *v = -TAIL_LIMIT * lower;
                }
            }
            for (o, v) in out.iter_mut().zip(visits) {
                *o = self.wrap(*o + v);
            }
        } else {
            let mut v = self.draw(temperature, rng);
            if v > TAIL_LIMIT {
                v = TAIL_LIMIT * rng.random::<f64>();
            } else if v < -TAIL_LIMIT {
                v = -TAIL_LIMIT * rng.random::<f64>();
            }
            let i = step - dim;
            out[i] = self.wrap(out[i] + v);
        }
        out
    }
}

/// Budget-capped objective that records every evaluation in the log.
struct Objective<'a> {
    evaluator: CostEvaluator,
    template: &'a TransformMatrix,
    budget: usize,
    log: Vec<LogRow>,
    best: (f64, Vec<f64>),
}

impl Objective<'_> {
    fn exhausted(&self) -> bool {
        self.evaluator.evaluations() >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64, TrainingError> {
        debug_assert!(!self.exhausted());
        let c = self.evaluator.evaluate(&self.template.with_entries(x))?.total_cost;
        if c < self.best.0 {
            self.best = (c, x.to_vec());
        }
        Ok(c)
    }

    fn record(&mut self, temperature: f64, current: f64) {
        self.log.push(LogRow {
            evaluation: self.evaluator.evaluations(),
            temperature,
            current_cost: current,
            best_cost: self.best.0,
        });
    }
}

/// Trains the transform by generalized simulated annealing followed, when
/// enabled, by a bounded Nelder-Mead polish of the best point.
pub fn dual_anneal(
    train: &[Image],
    array: &ArrayParams,
    train_config: &TrainConfig,
    classifier_config: &ClassifierConfig,
    dataset_sha: &str,
) -> Result<TrainOutcome, TrainingError> {
    train_config.validate()?;
    let evaluator = CostEvaluator::new(train, *array, *classifier_config, train_config.eta)?;
    let count = TransformMatrix::parameter_count(classifier_config.encoding_mode, array)?;
    let (lo, hi) = train_config.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let random_point = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..count).map(|_| rng.random_range(lo..hi)).collect() };

    let x0 = random_point(&mut rng);
    let template = TransformMatrix::new(classifier_config.encoding_mode, array, x0.clone())?;
    let budget = train_config.budget;
    let polish_budget = if train_config.local_search {
        (budget as f64 * train_config.polish_fraction).floor() as usize
    } else {
        0
    };
    let mut obj = Objective {
        evaluator,
        template: &template,
        budget: budget - polish_budget,
        log: Vec::new(),
        best: (f64::INFINITY, x0.clone()),
    };
    let initial_cost = obj.eval(&x0)?;
    obj.record(f64::NAN, initial_cost);

    anneal(&mut obj, x0, initial_cost, train_config, &mut rng)?;

    if polish_budget > 0 {
        obj.budget = budget;
        let start = obj.best.1.clone();
        nelder_mead(&mut obj, &start, (lo, hi))?;
    }

    let (final_cost, best) = obj.best.clone();
    let improved = final_cost < initial_cost;
    let provenance = Provenance {
        seed: train_config.seed,
        budget: budget as u64,
        final_cost,
        dataset_sha: dataset_sha.to_string(),
    };
    let model = Model::new(template.with_entries(&best), *array, *classifier_config, provenance)?;
    Ok(TrainOutcome {
        model,
        initial_cost,
        final_cost,
        evaluations_used: obj.evaluator.evaluations(),
        warnings: obj.evaluator.warnings(),
        improved,
        log: obj.log,
    })
}

fn anneal(
    obj: &mut Objective<'_>,
    x0: Vec<f64>,
    e0: f64,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), TrainingError> {
    let params = &config.anneal;
    let (lo, hi) = config.bounds;
    let visiting = Visiting::new(params.visiting, lo, hi);
    let qv = params.visiting;
    let qa = params.acceptance;
    let t1 = ((qv - 1.0) * 2f64.ln()).exp() - 1.0;
    let restart_temperature = params.initial_temperature * params.restart_ratio;
    let (mut x, mut e) = (x0, e0);
    let dim = x.len();
    'outer: while !obj.exhausted() {
        let mut step = 0usize;
        loop {
            let s = step as f64 + 2.0;
            let t2 = ((qv - 1.0) * s.ln()).exp() - 1.0;
            let temperature = params.initial_temperature * t1 / t2;
            if temperature < restart_temperature {
                // Reanneal from a fresh random point.
                if obj.exhausted() {
                    break 'outer;
                }
                x = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
                e = obj.eval(&x)?;
                obj.record(temperature, e);
                break;
            }
            let temperature_step = temperature / (step as f64 + 1.0);
            for j in 0..2 * dim {
                if obj.exhausted() {
                    break 'outer;
                }
                let candidate = visiting.visit(&x, j, temperature, rng);
                let c = obj.eval(&candidate)?;
                if c < e {
                    x = candidate;
                    e = c;
                } else {
                    let r: f64 = rng.random();
                    let p = 1.0 - (1.0 - qa) * (c - e) / temperature_step;
                    let accept_probability = if p <= 0.0 { 0.0 } else { (p.ln() / (1.0 - qa)).exp() };
                    if r <= accept_probability {
                        x = candidate;
                        e = c;
                    }
                }
                obj.record(temperature, e);
            }
            step += 1;
        }
    }
    Ok(())
}

/// Adaptive Nelder-Mead inside the box, clipping trial points to the bounds.
/// Stops when the budget runs out or the simplex collapses.
fn nelder_mead(obj: &mut Objective<'_>, start: &[f64], bounds: (f64, f64)) -> Result<(), TrainingError> {
    let n = start.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let clip = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|t| t.clamp(bounds.0, bounds.1)).collect() };
    let step = 0.05 * (bounds.1 - bounds.0);
    let nan = f64::NAN;

    if obj.exhausted() {
        return Ok(());
    }
    let f0 = obj.eval(start)?;
    obj.record(nan, f0);
    let mut simplex: Vec<(f64, Vec<f64>)> = vec![(f0, start.to_vec())];
    for i in 0..n {
        if obj.exhausted() {
            return Ok(());
        }
        let mut v = start.to_vec();
        v[i] = if v[i] + step <= bounds.1 {
            v[i] + step
        } else {
            v[i] - step
        };
        let f = obj.eval(&v)?;
        obj.record(nan, f);
        simplex.push((f, v));
    }
    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> { c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect() };
    loop {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spread = simplex[n].0 - simplex[0].0;
        let size = simplex[1..]
            .iter()
            .flat_map(|(_, v)| v.iter().zip(&simplex[0].1).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-12 * simplex[0].0.abs().max(1.0) && size <= 1e-10 {
            return Ok(());
        }
        let mut centroid = vec![0.0; n];
        for (_, v) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        macro_rules! try_eval {
            ($x:expr) => {{
                if obj.exhausted() {
                    return Ok(());
                }
                let x = $x;
                let f = obj.eval(&x)?;
                obj.record(nan, f);
                (f, x)
            }};
        }
        let reflected = try_eval!(clip(point(&centroid, &worst.1, -alpha)));
        if reflected.0 < simplex[0].0 {
            let expanded = try_eval!(clip(point(&centroid, &worst.1, -alpha * beta)));
            simplex[n] = if expanded.0 < reflected.0 { expanded } else { reflected };
            continue;
        }
        if reflected.0 < simplex[n - 1].0 {
            simplex[n] = reflected;
            continue;
        }
        let contracted = if reflected.0 < worst.0 {
            let c = try_eval!(clip(point(&centroid, &worst.1, -alpha * gamma)));
            (c.0 <= reflected.0).then_some(c)
        } else {
            let c = try_eval!(clip(point(&centroid, &worst.1, gamma)));
            (c.0 < worst.0).then_some(c)
        };
        if let Some(c) = contracted {
            simplex[n] = c;
            continue;
        }
        let best = simplex[0].1.clone();
        for k in 1..=n {
            let shrunk = try_eval!(point(&best, &simplex[k].1, delta));
            simplex[k] = shrunk;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gap(id: usize, gap: f64, positive: bool) -> ImageGap {
        ImageGap { id, gap, positive }
    }

    #[test]
    fn hand_cost_values() {
        assert_eq!(cost_from_gaps(&[gap(0, 0.0, true)], 4.0), 0.0);
        let c = cost_from_gaps(&[gap(0, 0.1, true), gap(1, -0.1, false)], 4.0);
        assert!((c + 2.0 * 0.379_948_962_255_224_9).abs() < 1e-12, "{c}");
    }

    #[test]
    fn label_swap_negates_exactly() {
        let gaps: Vec<ImageGap> = (0..17)
            .map(|k| gap(k, (k as f64 * 0.37).sin() * 0.3, k % 3 == 0))
            .collect();
        let swapped: Vec<ImageGap> = gaps.iter().map(|g| gap(g.id, g.gap, !g.positive)).collect();
        assert_eq!(cost_from_gaps(&gaps, 4.0), -cost_from_gaps(&swapped, 4.0));
    }

    #[test]
    fn metrics_from_counts() {
        let m = Metrics::tally((0..10).map(|k| (k < 5, k < 5 || k == 9)));
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (5, 1, 4, 0));
        assert!((m.accuracy - 0.9).abs() < 1e-15);
        let none = Metrics::tally([(true, false), (false, false)]);
        assert_eq!(none.precision, None);
        assert_eq!(none.recall, Some(0.0));
    }

    #[test]
    fn visiting_stays_in_bounds() {
        let v = Visiting::new(2.62, -1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = vec![0.0; 8];
        for step in 0..16 {
            for t in [5230.0, 10.0, 0.01] {
                let y = v.visit(&x, step, t, &mut rng);
                assert!(y.iter().all(|&u| (-1.0..=1.0).contains(&u)), "{y:?}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            budget: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let mut bad = TrainConfig::default();
        bad.anneal.visiting = 3.5;
        assert!(bad.validate().is_err());
    }
}

//! Lasing-mode statistics, noise sweeps, and their CSV forms.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classifier::{Answer, Model};
use crate::data::{add_noise, Image, NoiseSpec};
use crate::spectrum::is_strict_zero_mode;
use crate::training::{metrics_of, predict_all, Prediction, TrainingError};

pub const LOG_BINS: usize = 64;
pub const LOG_FLOOR: f64 = 1e-16;
pub const NOISE_REALIZATIONS: usize = 20;

/// Lasing mode of one classified image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeStat {
    pub id: usize,
    pub label: u8,
    pub positive: bool,
    pub answer: Answer,
    /// `None` when the image never reaches threshold.
    pub re: Option<f64>,
    pub im: Option<f64>,
    pub selected: bool,
    pub strictly_zero: bool,
}

pub fn mode_stats(predictions: &[Prediction]) -> Vec<ModeStat> {
    predictions
        .iter()
        .map(|p| {
            let eps = p.result.lasing_eigenvalue;
            ModeStat {
                id: p.id,
                label: p.label,
                positive: p.positive,
                answer: p.result.answer,
                re: eps.map(|e| e.re),
                im: eps.map(|e| e.im),
                selected: p.result.lasing_selected,
                strictly_zero: eps.is_some_and(is_strict_zero_mode),
            }
        })
        .collect()
}

/// Share of selected lasing modes that are zero-modes to rounding level.
/// `None` if no lasing mode was selected.
pub fn strictly_zero_fraction(stats: &[ModeStat]) -> Option<f64> {
    let selected: Vec<&ModeStat> = stats.iter().filter(|s| s.selected).collect();
    if selected.is_empty() {
        return None;
    }
    Some(selected.iter().filter(|s| s.strictly_zero).count() as f64 / selected.len() as f64)
}

/// Bin edges: 64 bins of equal width in `log10` from `1e-16` to `1`.
pub fn log_bin_edges() -> Vec<f64> {
    let decades = -LOG_FLOOR.log10();
    (0..=LOG_BINS)
        .map(|k| 10f64.powf(-decades + decades * k as f64 / LOG_BINS as f64))
        .collect()
}

/// Bin of `|x|`. Values under the floor (exact zeros included) land in the
/// first bin and values above 1 in the last.
pub fn log_bin(x: f64) -> usize {
    let a = x.abs();
    if !(a > LOG_FLOOR) {
        return 0;
    }
    let decades = -LOG_FLOOR.log10();
    let pos = (a.log10() + decades) / decades * LOG_BINS as f64;
    (pos.floor() as usize).min(LOG_BINS - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

/// Histogram of `|Re eps|` of the lasing mode, split by true class.
pub fn lasing_histogram(stats: &[ModeStat]) -> Histogram {
    let mut h = Histogram {
        edges: log_bin_edges(),
        positive: vec![0; LOG_BINS],
        negative: vec![0; LOG_BINS],
    };
    for s in stats {
        if let Some(re) = s.re {
            let counts = if s.positive { &mut h.positive } else { &mut h.negative };
            counts[log_bin(re)] += 1;
        }
    }
    h
}

pub const HISTOGRAM_CSV_HEADER: &str = "bin,lower,upper,positive,negative";

pub fn write_histogram_csv<W: Write>(mut out: W, h: &Histogram) -> std::io::Result<()> {
    writeln!(out, "{HISTOGRAM_CSV_HEADER}")?;
    for k in 0..h.positive.len() {
        writeln!(
            out,
            "{k},{:e},{:e},{},{}",
            h.edges[k],
            h.edges[k + 1],
            h.positive[k],
            h.negative[k]
        )?;
    }
    Ok(())
}

pub const CDF_CSV_HEADER: &str = "group,abs_re,cdf";

/// Empirical CDFs of `|Re eps|` for selected and non-selected lasing modes.
pub fn write_cdf_csv<W: Write>(mut out: W, stats: &[ModeStat]) -> std::io::Result<()> {
    writeln!(out, "{CDF_CSV_HEADER}")?;
    for (group, want) in [("selected", true), ("nonselected", false)] {
        let mut values: Vec<f64> = stats
            .iter()
            .filter(|s| s.selected == want)
            .filter_map(|s| s.re.map(f64::abs))
            .collect();
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        for (k, v) in values.iter().enumerate() {
            writeln!(out, "{group},{v:e},{:e}", (k + 1) as f64 / n)?;
        }
    }
    Ok(())
}

pub const MODE_STATS_CSV_HEADER: &str = "id,label,positive,answer,re,im,selected,strictly_zero";

pub fn write_mode_stats_csv<W: Write>(mut out: W, stats: &[ModeStat]) -> std::io::Result<()> {
    writeln!(out, "{MODE_STATS_CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.id,
            s.label,
            u8::from(s.positive),
            answer_str(s.answer),
            opt(s.re),
            opt(s.im),
            u8::from(s.selected),
            u8::from(s.strictly_zero)
        )?;
    }
    Ok(())
}

pub fn answer_str(a: Answer) -> &'static str {
    match a {
        Answer::Yes => "yes",
        Answer::No => "no",
    }
}

pub const PREDICTIONS_CSV_HEADER: &str =
    "id,label,positive,answer,correct,gap,alpha,lasing_re,lasing_im,lasing_selected,diagnostic";

pub fn write_predictions_csv<W: Write>(mut out: W, predictions: &[Prediction]) -> std::io::Result<()> {
    writeln!(out, "{PREDICTIONS_CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for p in predictions {
        let r = &p.result;
        writeln!(
            out,
            "{},{},{},{},{},{:e},{},{},{},{},{}",
            p.id,
            p.label,
            u8::from(p.positive),
            answer_str(r.answer),
            u8::from(p.correct()),
            r.gap,
            opt(r.alpha),
            opt(r.lasing_eigenvalue.map(|e| e.re)),
            opt(r.lasing_eigenvalue.map(|e| e.im)),
            u8::from(r.lasing_selected),
            if r.diagnostic.is_some() {
                "no_threshold_reachable"
            } else {
                ""
            }
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub level: f64,
    pub mean_accuracy: f64,
    /// Sample standard deviation over realizations.
    pub std_accuracy: f64,
    pub accuracies: Vec<f64>,
}

/// Accuracy under additive noise; realization `r` uses seed `seed + r`.
pub fn noise_sweep(
    model: &Model,
    images: &[Image],
    levels: &[f64],
    realizations: usize,
    seed: u64,
    symmetric: bool,
) -> Result<Vec<NoisePoint>, TrainingError> {
    if images.is_empty() {
        return Err(TrainingError::EmptySet);
    }
    let mut points = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut accuracies = Vec::with_capacity(realizations);
        for r in 0..realizations as u64 {
            let spec = NoiseSpec {
                level,
                seed: seed.wrapping_add(r),
                symmetric,
            };
            let noisy: Vec<Image> = images.iter().map(|i| add_noise(i, &spec)).collect();
            accuracies.push(metrics_of(&predict_all(model, &noisy)?).accuracy);
        }
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = if accuracies.len() > 1 {
            accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        points.push(NoisePoint {
            level,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            accuracies,
        });
    }
    Ok(points)
}

pub const NOISE_CSV_HEADER: &str = "level,mean_accuracy,std_accuracy,realizations";

pub fn write_noise_csv<W: Write>(mut out: W, points: &[NoisePoint]) -> std::io::Result<()> {
    writeln!(out, "{NOISE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{:e},{:e},{:e},{}",
            p.level,
            p.mean_accuracy,
            p.std_accuracy,
            p.accuracies.len()
        )?;
    }
    Ok(())
}

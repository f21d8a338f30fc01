use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::Subject;
use super::{MatchParams, MinutiaeError, match_templates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub threshold: f64,
    /// Fraction of impostor trials accepted.
    pub far: f64,
    /// Fraction of genuine trials rejected.
    pub frr: f64,
}

/// Raw comparison scores behind a ROC table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

/// Genuine trials: every ordered pair of distinct samples of one subject.
/// Impostor trials: the first sample of each subject against the first sample
/// of every other subject, ordered.
pub fn trial_scores(
    population: &[Subject],
    params: &MatchParams,
) -> Result<TrialScores, MinutiaeError> {
    if population.len() < 2 {
        return Err(MinutiaeError::TooFewSubjects(population.len()));
    }
    params.validate()?;

    let mut genuine_pairs = Vec::new();
    for subject in population {
        let n = subject.samples.len();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                genuine_pairs.push((&subject.samples[i], &subject.samples[j]));
            }
        }
    }
    let mut impostor_pairs = Vec::new();
    for (a, sa) in population.iter().enumerate() {
        for (b, sb) in population.iter().enumerate() {
            if a != b {
                impostor_pairs.push((&sa.samples[0], &sb.samples[0]));
            }
        }
    }

    let score = |&(probe, gallery)| match_templates(probe, gallery, params).map(|r| r.score);
    Ok(TrialScores {
        genuine: genuine_pairs
            .par_iter()
            .map(score)
            .collect::<Result<_, _>>()?,
        impostor: impostor_pairs
            .par_iter()
            .map(score)
            .collect::<Result<_, _>>()?,
    })
}

pub fn roc_from_scores(
    scores: &TrialScores,
    thresholds: &[f64],
) -> Result<Vec<RocRow>, MinutiaeError> {
    validate_thresholds(thresholds)?;
    let rate = |hits: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    };
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let false_accepts = scores.impostor.iter().filter(|&&s| s >= threshold).count();
            let false_rejects = scores.genuine.iter().filter(|&&s| s < threshold).count();
            RocRow {
                threshold,
                far: rate(false_accepts, scores.impostor.len()),
                frr: rate(false_rejects, scores.genuine.len()),
            }
        })
        .collect())
}

pub fn evaluate_far_frr(
    population: &[Subject],
    params: &MatchParams,
    thresholds: &[f64],
) -> Result<Vec<RocRow>, MinutiaeError> {
    validate_thresholds(thresholds)?;
    roc_from_scores(&trial_scores(population, params)?, thresholds)
}

fn validate_thresholds(thresholds: &[f64]) -> Result<(), MinutiaeError> {
    for (i, &t) in thresholds.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(MinutiaeError::InvalidThreshold(t));
        }
        if i > 0 && thresholds[i - 1] > t {
            return Err(MinutiaeError::ThresholdsNotAscending);
        }
    }
    Ok(())
}

/// Thresholds `0, step, 2*step, ..., 1` with `steps` intervals.
pub fn uniform_thresholds(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Pipe-separated `threshold|FAR|FRR` lines, one per row.
pub fn format_roc_table(rows: &[RocRow]) -> String {
    rows.iter()
        .map(|r| format!("{:.4}|{:.6}|{:.6}\n", r.threshold, r.far, r.frr))
        .collect()
}

/// Point on the row list where |FAR - FRR| is smallest, reported as the mean
/// of the two rates.
pub fn equal_error_rate(rows: &[RocRow]) -> Option<(f64, f64)> {
    rows.iter()
        .min_by(|a, b| (a.far - a.frr).abs().total_cmp(&(b.far - b.frr).abs()))
        .map(|r| (r.threshold, (r.far + r.frr) / 2.0))
}

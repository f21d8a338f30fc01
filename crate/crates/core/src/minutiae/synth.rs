//! Seeded synthetic fingerprint populations.
//!
//! Each subject gets a base template of well-separated minutiae; every sample
//! of that subject is the base under a random rigid motion plus position and
//! direction jitter, dropout, and a few spurious minutiae.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::format::serialize_template;
use super::template::{FIELD_MAX, MAX_MINUTIAE};
use super::transform::clamp_coord;
use super::{FingerprintTemplate, Minutia, MinutiaKind, MinutiaeError, rigid_transform};

/// Rejection-sampling budget for placing one base minutia.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

const BASE_LO: u16 = 100;
const BASE_HI: u16 = 900;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_subjects: usize,
    pub samples_per_subject: usize,
    pub minutiae_per_subject: usize,
    /// Minimum distance between base minutiae; twice the default matcher `dmax`.
    pub min_separation: f64,
    pub position_jitter_sigma: f64,
    pub angle_jitter_sigma: f64,
    pub dropout_prob: f64,
    pub spurious_count: usize,
    pub rotation_range_deg: f64,
    pub translation_range: u16,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 42,
            n_subjects: 50,
            samples_per_subject: 5,
            minutiae_per_subject: 40,
            min_separation: 24.0,
            position_jitter_sigma: 3.0,
            angle_jitter_sigma: 5.0,
            dropout_prob: 0.1,
            spurious_count: 2,
            rotation_range_deg: 30.0,
            translation_range: 50,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), MinutiaeError> {
        let bad = |why: &str| Err(MinutiaeError::InvalidSyntheticConfig(why.to_owned()));
        if self.n_subjects == 0 || self.samples_per_subject == 0 {
            return bad("n_subjects and samples_per_subject must be positive");
        }
        if self.minutiae_per_subject == 0
            || self.minutiae_per_subject + self.spurious_count > MAX_MINUTIAE
        {
            return bad("minutiae_per_subject + spurious_count must lie in 1..=200");
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return bad("dropout_prob must lie in [0, 1]");
        }
        let finite_non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_non_negative(self.position_jitter_sigma)
            || !finite_non_negative(self.angle_jitter_sigma)
            || !finite_non_negative(self.rotation_range_deg)
            || !finite_non_negative(self.min_separation)
        {
            return bad("sigmas, ranges and separation must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub label: String,
    /// The noise-free template every sample is derived from.
    pub base: FingerprintTemplate,
    pub samples: Vec<FingerprintTemplate>,
}

pub fn synthesize_population(cfg: &SyntheticConfig) -> Result<Vec<Subject>, MinutiaeError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pos_noise = Normal::new(0.0, cfg.position_jitter_sigma).expect("validated sigma");
    let angle_noise = Normal::new(0.0, cfg.angle_jitter_sigma).expect("validated sigma");

    (0..cfg.n_subjects)
        .map(|s| {
            let label = format!("S{s:03}");
            let base = base_template(&mut rng, cfg)?.with_label(&label);
            let samples = (0..cfg.samples_per_subject)
                .map(|_| {
                    noisy_sample(&mut rng, cfg, &base, &pos_noise, &angle_noise).with_label(&label)
                })
                .collect();
            Ok(Subject {
                label,
                base,
                samples,
            })
        })
        .collect()
}

fn random_kind(rng: &mut impl Rng) -> MinutiaKind {
    if rng.random_bool(0.5) {
        MinutiaKind::Bifurcation
    } else {
        MinutiaKind::RidgeEnding
    }
}

fn base_template(
    rng: &mut impl Rng,
    cfg: &SyntheticConfig,
) -> Result<FingerprintTemplate, MinutiaeError> {
    let sep_sq = cfg.min_separation * cfg.min_separation;
    let mut placed: Vec<Minutia> = Vec::with_capacity(cfg.minutiae_per_subject);
    while placed.len() < cfg.minutiae_per_subject {
        let mut attempts = 0;
        let (x, y) = loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(MinutiaeError::InfeasibleSeparation {
                    placed: placed.len(),
                    requested: cfg.minutiae_per_subject,
                });
            }
            attempts += 1;
            let x = rng.random_range(BASE_LO..=BASE_HI);
            let y = rng.random_range(BASE_LO..=BASE_HI);
            let clear = placed.iter().all(|m| {
                let dx = f64::from(m.x()) - f64::from(x);
                let dy = f64::from(m.y()) - f64::from(y);
                dx * dx + dy * dy >= sep_sq && (m.x(), m.y()) != (x, y)
            });
            if clear {
                break (x, y);
            }
        };
        let angle = rng.random_range(0..360);
        placed.push(Minutia::new(x, y, angle, random_kind(rng))?);
    }
    FingerprintTemplate::new(placed)
}

fn noisy_sample(
    rng: &mut impl Rng,
    cfg: &SyntheticConfig,
    base: &FingerprintTemplate,
    pos_noise: &Normal<f64>,
    angle_noise: &Normal<f64>,
) -> FingerprintTemplate {
    let theta = if cfg.rotation_range_deg > 0.0 {
        rng.random_range(-cfg.rotation_range_deg..=cfg.rotation_range_deg)
    } else {
        0.0
    };
    let t = i32::from(cfg.translation_range);
    let (dx, dy) = (rng.random_range(-t..=t), rng.random_range(-t..=t));
    let moved = rigid_transform(base, theta, dx, dy);

    let mut points: Vec<Minutia> = Vec::with_capacity(moved.len() + cfg.spurious_count);
    for m in moved.minutiae() {
        let x = clamp_coord(f64::from(m.x()) + pos_noise.sample(rng));
        let y = clamp_coord(f64::from(m.y()) + pos_noise.sample(rng));
        let angle = (f64::from(m.angle()) + angle_noise.sample(rng))
            .round()
            .rem_euclid(360.0) as u16;
        let keep = rng.random::<f64>() >= cfg.dropout_prob;
        if keep {
            points.push(Minutia::new(x, y, angle, m.kind()).expect("clamped fields are in range"));
        }
    }
    if points.is_empty() {
        // Everything dropped out; keep the first transformed minutia so the
        // sample stays a valid template.
        points.push(moved.minutiae()[0]);
    }
    for _ in 0..cfg.spurious_count {
        let m = Minutia::new(
            rng.random_range(0..=FIELD_MAX),
            rng.random_range(0..=FIELD_MAX),
            rng.random_range(0..360),
            random_kind(rng),
        )
        .expect("sampled in range");
        points.push(m);
    }
    FingerprintTemplate::from_points_resolving_collisions(points)
        .expect("count bounded by validation")
}

/// Concatenated text serialization of every sample, subject by subject.
pub fn serialize_population(population: &[Subject]) -> String {
    let mut out = String::new();
    for subject in population {
        for (i, sample) in subject.samples.iter().enumerate() {
            out.push_str(&format!("# {} sample {}\n", subject.label, i));
            out.push_str(&serialize_template(sample));
        }
    }
    out
}

//! Fingerprint templates and the biometric matcher.
//!
//! A template is a set of minutiae (ridge endings and bifurcations) on a
//! 1000x1000 sensor field. [`match_templates`] compares a live sample against
//! an enrolled template and yields a score in `[0, 1]`; [`decide`] turns that
//! into accept or reject. The [`synth`] and [`roc`] submodules generate
//! labelled populations and measure false accept / false reject rates.

mod format;
mod matcher;
pub mod roc;
pub mod synth;
mod template;
mod transform;

use thiserror::Error;

pub use format::{parse_template, serialize_template};
pub use matcher::{MatchParams, MatchResult, decide, match_templates};
pub use roc::{RocRow, evaluate_far_frr};
pub use synth::{Subject, SyntheticConfig, synthesize_population};
pub use template::{FIELD_MAX, FingerprintTemplate, MAX_MINUTIAE, Minutia, MinutiaKind};
pub use transform::{FIELD_CENTER, rigid_transform};

#[derive(Debug, Error, PartialEq)]
pub enum MinutiaeError {
    #[error("template has no minutiae")]
    EmptyTemplate,
    #[error("template has {0} minutiae, more than {MAX_MINUTIAE}")]
    TooManyMinutiae(usize),
    #[error("two minutiae share the coordinate ({x}, {y})")]
    DuplicateCoordinate { x: u16, y: u16 },
    #[error("coordinate ({x}, {y}) outside the 0..=1000 field")]
    CoordinateOutOfRange { x: u16, y: u16 },
    #[error("angle {0} outside 0..=359")]
    AngleOutOfRange(u16),
    #[error("malformed header {0:?}, expected `MINUTIAE v1 <count>`")]
    MalformedHeader(String),
    #[error("header declares {declared} minutiae but {found} records follow")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("invalid match parameters {0:?}")]
    InvalidMatchParams(MatchParams),
    #[error("invalid synthetic config: {0}")]
    InvalidSyntheticConfig(String),
    #[error("could not place minutia {placed} of {requested} at the required separation")]
    InfeasibleSeparation { placed: usize, requested: usize },
    #[error("evaluation needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("thresholds must be ascending")]
    ThresholdsNotAscending,
}

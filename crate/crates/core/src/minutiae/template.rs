use std::collections::HashSet;
use std::fmt;

use super::MinutiaeError;

/// Largest coordinate value on either sensor axis.
pub const FIELD_MAX: u16 = 1000;
/// Upper bound on the number of minutiae a template may hold.
pub const MAX_MINUTIAE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MinutiaKind {
    RidgeEnding,
    Bifurcation,
}

impl MinutiaKind {
    /// Single-letter tag used by the text format.
    pub fn letter(self) -> char {
        match self {
            MinutiaKind::RidgeEnding => 'E',
            MinutiaKind::Bifurcation => 'B',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "E" => Some(MinutiaKind::RidgeEnding),
            "B" => Some(MinutiaKind::Bifurcation),
            _ => None,
        }
    }

    pub fn wire_code(self) -> u8 {
        match self {
            MinutiaKind::RidgeEnding => 0,
            MinutiaKind::Bifurcation => 1,
        }
    }

    pub fn from_wire_code(b: u8) -> Option<Self> {
        match b {
            0 => Some(MinutiaKind::RidgeEnding),
            1 => Some(MinutiaKind::Bifurcation),
            _ => None,
        }
    }
}

/// A ridge feature at an integer sensor position with a direction in whole degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Minutia {
    x: u16,
    y: u16,
    angle: u16,
    kind: MinutiaKind,
}

impl Minutia {
    pub fn new(x: u16, y: u16, angle: u16, kind: MinutiaKind) -> Result<Self, MinutiaeError> {
        if x > FIELD_MAX || y > FIELD_MAX {
            return Err(MinutiaeError::CoordinateOutOfRange { x, y });
        }
        if angle > 359 {
            return Err(MinutiaeError::AngleOutOfRange(angle));
        }
        Ok(Minutia { x, y, angle, kind })
    }

    pub fn x(&self) -> u16 {
        self.x
    }

    pub fn y(&self) -> u16 {
        self.y
    }

    pub fn angle(&self) -> u16 {
        self.angle
    }

    pub fn kind(&self) -> MinutiaKind {
        self.kind
    }

    pub(crate) fn position(&self) -> (u16, u16) {
        (self.x, self.y)
    }
}

impl fmt::Display for Minutia {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.x,
            self.y,
            self.angle,
            self.kind.letter()
        )
    }
}

/// An ordered, non-empty set of minutiae with pairwise distinct positions.
///
/// Used both for the enrolled template stored by the bank and for the live
/// sample presented at the terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintTemplate {
    minutiae: Vec<Minutia>,
    subject_label: Option<String>,
}

impl FingerprintTemplate {
    pub fn new(minutiae: Vec<Minutia>) -> Result<Self, MinutiaeError> {
        if minutiae.is_empty() {
            return Err(MinutiaeError::EmptyTemplate);
        }
        if minutiae.len() > MAX_MINUTIAE {
            return Err(MinutiaeError::TooManyMinutiae(minutiae.len()));
        }
        let mut seen = HashSet::with_capacity(minutiae.len());
        for m in &minutiae {
            if !seen.insert(m.position()) {
                return Err(MinutiaeError::DuplicateCoordinate { x: m.x, y: m.y });
            }
        }
        Ok(FingerprintTemplate {
            minutiae,
            subject_label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.subject_label = Some(label.into());
        self
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }

    pub fn subject_label(&self) -> Option<&str> {
        self.subject_label.as_deref()
    }

    /// Builds a template from raw points, moving any point that lands on an
    /// occupied coordinate one step at a time along +x (falling back to -x at
    /// the field edge) until it is free. Later points yield to earlier ones.
    pub(crate) fn from_points_resolving_collisions(
        points: impl IntoIterator<Item = Minutia>,
    ) -> Result<Self, MinutiaeError> {
        let mut seen: HashSet<(u16, u16)> = HashSet::new();
        let mut out = Vec::new();
        for mut m in points {
            if seen.contains(&m.position()) {
                m.x = free_x(&seen, m.x, m.y);
            }
            seen.insert(m.position());
            out.push(m);
        }
        FingerprintTemplate::new(out)
    }
}

fn free_x(seen: &HashSet<(u16, u16)>, x: u16, y: u16) -> u16 {
    (x + 1..=FIELD_MAX)
        .chain((0..x).rev())
        .find(|&cand| !seen.contains(&(cand, y)))
        // A full row of 1001 occupied cells cannot happen under MAX_MINUTIAE.
        .unwrap_or(x)
}

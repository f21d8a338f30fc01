//! Pair-hypothesis rigid alignment with greedy tolerant pairing.
//!
//! Every same-kind (probe, gallery) pair whose direction difference is within
//! the rotation limit proposes an alignment that rotates the probe by that
//! difference and lands the probe minutia exactly on the gallery one. Each
//! alignment is scored by greedily pairing the remaining minutiae, nearest
//! first. The best alignment wins.

use serde::{Deserialize, Serialize};

use super::template::FIELD_MAX;
use super::{FingerprintTemplate, Minutia, MinutiaeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Pairing distance tolerance in sensor units.
    pub dmax: f64,
    /// Pairing direction tolerance in degrees.
    pub atol: f64,
    /// Largest alignment rotation considered, in degrees.
    pub rot_limit: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            dmax: 12.0,
            atol: 20.0,
            rot_limit: 45.0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MinutiaeError> {
        let ok = self.dmax > 0.0
            && self.dmax.is_finite()
            && self.atol > 0.0
            && self.atol < 90.0
            && (0.0..=180.0).contains(&self.rot_limit);
        if ok {
            Ok(())
        } else {
            Err(MinutiaeError::InvalidMatchParams(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `2M / (|probe| + |gallery|)`, in `[0, 1]`.
    pub score: f64,
    pub matched_count: usize,
    /// Rotation of the winning alignment, in `(-180, 180]`.
    pub best_rotation_deg: f64,
    /// Translation applied after rotating the probe about the origin.
    pub best_translation: (f64, f64),
}

impl MatchResult {
    fn no_match() -> Self {
        MatchResult {
            score: 0.0,
            matched_count: 0,
            best_rotation_deg: 0.0,
            best_translation: (0.0, 0.0),
        }
    }
}

/// Inclusive threshold decision on a match score.
pub fn decide(result: &MatchResult, threshold: f64) -> bool {
    result.score >= threshold
}

/// Signed difference `to - from` normalized to `(-180, 180]`.
pub(crate) fn signed_angle_diff(from: u16, to: u16) -> i32 {
    let d = (i32::from(to) - i32::from(from)).rem_euclid(360);
    if d > 180 { d - 360 } else { d }
}

/// Unsigned circular distance between two directions, in `[0, 180]`.
fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Matches `probe` against `gallery`. Directional: swapping the arguments may
/// give a different score.
pub fn match_templates(
    probe: &FingerprintTemplate,
    gallery: &FingerprintTemplate,
    params: &MatchParams,
) -> Result<MatchResult, MinutiaeError> {
    params.validate()?;
    let probe = probe.minutiae();
    let gallery_pts = gallery.minutiae();
    let index = GalleryIndex::new(gallery_pts, params.dmax);
    let mut scratch = Scratch::new(probe.len(), gallery_pts.len());
    let total = (probe.len() + gallery_pts.len()) as f64;

    let mut best: Option<MatchResult> = None;
    for anchor_p in probe {
        for anchor_g in gallery_pts {
            if anchor_p.kind() != anchor_g.kind() {
                continue;
            }
            let rotation = signed_angle_diff(anchor_p.angle(), anchor_g.angle());
            if f64::from(rotation.abs()) > params.rot_limit {
                continue;
            }
            let align = Alignment::anchored(anchor_p, anchor_g, rotation);
            let matched = greedy_pairs(probe, &index, &align, params, &mut scratch);
            let score = 2.0 * matched as f64 / total;
            if best.is_none_or(|b| score > b.score) {
                best = Some(MatchResult {
                    score,
                    matched_count: matched,
                    best_rotation_deg: f64::from(rotation),
                    best_translation: (align.tx, align.ty),
                });
            }
        }
    }
    Ok(best.unwrap_or_else(MatchResult::no_match))
}

/// `q -> R(rotation) q + t`.
struct Alignment {
    rotation: i32,
    cos: f64,
    sin: f64,
    tx: f64,
    ty: f64,
}

impl Alignment {
    fn anchored(p: &Minutia, g: &Minutia, rotation: i32) -> Self {
        let (sin, cos) = f64::from(rotation).to_radians().sin_cos();
        let (px, py) = (f64::from(p.x()), f64::from(p.y()));
        Alignment {
            rotation,
            cos,
            sin,
            tx: f64::from(g.x()) - (cos * px - sin * py),
            ty: f64::from(g.y()) - (sin * px + cos * py),
        }
    }

    fn apply(&self, m: &Minutia) -> (f64, f64, f64) {
        let (x, y) = (f64::from(m.x()), f64::from(m.y()));
        (
            self.cos * x - self.sin * y + self.tx,
            self.sin * x + self.cos * y + self.ty,
            f64::from(i32::from(m.angle()) + self.rotation),
        )
    }
}

struct Scratch {
    candidates: Vec<(f64, u32, u32)>,
    probe_used: Vec<bool>,
    gallery_used: Vec<bool>,
}

impl Scratch {
    fn new(n_probe: usize, n_gallery: usize) -> Self {
        Scratch {
            candidates: Vec::new(),
            probe_used: vec![false; n_probe],
            gallery_used: vec![false; n_gallery],
        }
    }
}

fn greedy_pairs(
    probe: &[Minutia],
    index: &GalleryIndex<'_>,
    align: &Alignment,
    params: &MatchParams,
    scratch: &mut Scratch,
) -> usize {
    let dmax_sq = params.dmax * params.dmax;
    scratch.candidates.clear();
    for (i, q) in probe.iter().enumerate() {
        let (x, y, angle) = align.apply(q);
        index.for_each_near(x, y, |j, g| {
            if g.kind() != q.kind() {
                return;
            }
            let (ex, ey) = (f64::from(g.x()) - x, f64::from(g.y()) - y);
            let d_sq = ex * ex + ey * ey;
            if d_sq <= dmax_sq && circular_distance(angle, f64::from(g.angle())) <= params.atol {
                scratch.candidates.push((d_sq, i as u32, j as u32));
            }
        });
    }
    // Squared distance preserves the distance order, ties included.
    scratch
        .candidates
        .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    scratch.probe_used.fill(false);
    scratch.gallery_used.fill(false);
    let mut matched = 0;
    for &(_, i, j) in &scratch.candidates {
        let (i, j) = (i as usize, j as usize);
        if !scratch.probe_used[i] && !scratch.gallery_used[j] {
            scratch.probe_used[i] = true;
            scratch.gallery_used[j] = true;
            matched += 1;
        }
    }
    matched
}

/// Uniform grid over the sensor field with cells `dmax` wide, so every
/// gallery point within `dmax` of a query lies in the 3x3 neighbourhood.
struct GalleryIndex<'a> {
    points: &'a [Minutia],
    cell: f64,
    side: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> GalleryIndex<'a> {
    fn new(points: &'a [Minutia], dmax: f64) -> Self {
        let cell = dmax.max(1.0);
        let side = (f64::from(FIELD_MAX) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); side * side];
        for (j, g) in points.iter().enumerate() {
            let (cx, cy) = (
                Self::coord(cell, f64::from(g.x())),
                Self::coord(cell, f64::from(g.y())),
            );
            buckets[cy * side + cx].push(j as u32);
        }
        GalleryIndex {
            points,
            cell,
            side,
            buckets,
        }
    }

    fn coord(cell: f64, v: f64) -> usize {
        (v / cell).floor() as usize
    }

    fn for_each_near(&self, x: f64, y: f64, mut f: impl FnMut(usize, &Minutia)) {
        let lo = -self.cell;
        let hi = f64::from(FIELD_MAX) + self.cell;
        if !(lo..=hi).contains(&x) || !(lo..=hi).contains(&y) {
            return;
        }
        let cx = (x / self.cell).floor() as i64;
        let cy = (y / self.cell).floor() as i64;
        let max = self.side as i64 - 1;
        for gy in (cy - 1).max(0)..=(cy + 1).min(max) {
            for gx in (cx - 1).max(0)..=(cx + 1).min(max) {
                for &j in &self.buckets[gy as usize * self.side + gx as usize] {
                    f(j as usize, &self.points[j as usize]);
                }
            }
        }
    }
}

use super::template::FIELD_MAX;
use super::{FingerprintTemplate, Minutia};

/// Rotation pivot for [`rigid_transform`].
pub const FIELD_CENTER: (f64, f64) = (500.0, 500.0);

/// Rotates every minutia by `theta_deg` (counter-clockwise) about the field
/// center, then translates by `(dx, dy)`.
///
/// Positions are rounded to the nearest integer and clamped to the field;
/// angles advance by `round(theta_deg)` modulo 360. Points that collapse onto
/// an occupied coordinate are nudged along x.
pub fn rigid_transform(
    t: &FingerprintTemplate,
    theta_deg: f64,
    dx: i32,
    dy: i32,
) -> FingerprintTemplate {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let dtheta = theta_deg.round() as i64;
    let (cx, cy) = FIELD_CENTER;
    let moved = t.minutiae().iter().map(|m| {
        let (rx, ry) = (f64::from(m.x()) - cx, f64::from(m.y()) - cy);
        let x = cx + c * rx - s * ry + f64::from(dx);
        let y = cy + s * rx + c * ry + f64::from(dy);
        let angle = (i64::from(m.angle()) + dtheta).rem_euclid(360) as u16;
        Minutia::new(clamp_coord(x), clamp_coord(y), angle, m.kind())
            .expect("clamped fields are in range")
    });
    let mut out = FingerprintTemplate::from_points_resolving_collisions(moved)
        .expect("transform preserves count and resolves collisions");
    if let Some(label) = t.subject_label() {
        out = out.with_label(label);
    }
    out
}

pub(crate) fn clamp_coord(v: f64) -> u16 {
    v.round().clamp(0.0, f64::from(FIELD_MAX)) as u16
}

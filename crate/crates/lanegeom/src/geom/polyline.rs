//! Small helpers over point sequences treated as polylines.

use super::Vec3;

/// Total polyline length.
pub fn length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Closest point on the polyline to `q`, with its distance.
/// Projects onto every segment, not just vertices. `None` for < 2 points.
pub fn closest_point(points: &[Vec3], q: Vec3) -> Option<(Vec3, f64)> {
    if points.len() < 2 {
        return None;
    }
    let mut best: Option<(Vec3, f64)> = None;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ab = b - a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((q - a).dot(ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let p = a + ab * t;
        let d = p.distance(q);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((p, d));
        }
    }
    best
}

/// Signed parameters `s` where the horizontal line `origin + s·dir` crosses
/// the polyline (z ignored). `dir` need not be unit length for hit testing,
/// but `s` is in units of `dir`'s length, so pass a unit vector for meters.
pub fn lateral_crossings(points: &[Vec3], origin: Vec3, dir: Vec3) -> Vec<f64> {
    let mut out = Vec::new();
    let eps = 1e-9;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let e = b - a;
        // Solve origin + s*dir = a + r*e in the xy plane.
        let det = dir.x * (-e.y) - (-e.x) * dir.y;
        if det.abs() < 1e-15 {
            continue; // parallel
        }
        let rhs = a - origin;
        let s = (rhs.x * (-e.y) - (-e.x) * rhs.y) / det;
        let r = (dir.x * rhs.y - dir.y * rhs.x) / det;
        if (-eps..=1.0 + eps).contains(&r) {
            out.push(s);
        }
    }
    out
}

/// Minimum absolute crossing parameter, if the line hits the polyline at all.
pub fn min_abs_crossing(points: &[Vec3], origin: Vec3, dir: Vec3) -> Option<f64> {
    lateral_crossings(points, origin, dir)
        .into_iter()
        .map(f64::abs)
        .min_by(|a, b| a.total_cmp(b))
}

//! Planar polyline geometry. Elevation is never used.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Euclidean distance to the closest point on the segment chain.
    pub distance: f64,
    /// Arc length from the first vertex to the closest point.
    pub station: f64,
    /// Positive when the point lies to the left of the direction of travel.
    pub signed_offset: f64,
    /// Heading (rad) of the segment holding the closest point.
    pub tangent_heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::MapFormat(format!(
                "polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::MapFormat("polyline has a non-finite coordinate".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::MapFormat("polyline has zero length".into()));
        }
        Ok(Polyline { points, cumulative })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Exact projection onto the segment chain (not just the vertices).
    pub fn project(&self, x: f64, y: f64) -> Projection {
        let mut best: Option<(f64, usize, f64)> = None;
        for (i, w) in self.points.windows(2).enumerate() {
            let (ax, ay) = (w[0][0], w[0][1]);
            let (dx, dy) = (w[1][0] - ax, w[1][1] - ay);
            let len2 = dx * dx + dy * dy;
            if len2 == 0.0 {
                continue;
            }
            let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (ax + t * dx, ay + t * dy);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            if best.is_none_or(|(b, _, _)| d2 < b) {
                best = Some((d2, i, t));
            }
        }
        let (d2, seg, t) = best.expect("polyline has a non-degenerate segment");
        let a = self.points[seg];
        let b = self.points[seg + 1];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let seg_len = dx.hypot(dy);
        let cross = dx * (y - a[1]) - dy * (x - a[0]);
        let distance = d2.sqrt();
        Projection {
            distance,
            station: self.cumulative[seg] + t * seg_len,
            signed_offset: if cross >= 0.0 { distance } else { -distance },
            tangent_heading: dy.atan2(dx),
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Circular mean of a set of headings.
pub fn mean_heading(headings: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = headings
        .into_iter()
        .fold((0.0, 0.0), |(s, c), h| (s + h.sin(), c + h.cos()));
    s.atan2(c)
}

/// Unsigned angle in degrees, within [0, 180], between two directions.
pub fn angle_between_deg(h1: f64, h2: f64) -> f64 {
    wrap_angle(h1 - h2).abs().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_distance(points: &[[f64; 2]], x: f64, y: f64) -> f64 {
        // dense sampling of each segment
        let mut best = f64::INFINITY;
        for w in points.windows(2) {
            for k in 0..=10_000 {
                let t = k as f64 / 10_000.0;
                let px = w[0][0] + t * (w[1][0] - w[0][0]);
                let py = w[0][1] + t * (w[1][1] - w[0][1]);
                best = best.min((x - px).hypot(y - py));
            }
        }
        best
    }

    #[test]
    fn rejects_short_polylines() {
        assert!(matches!(Polyline::new(vec![[0.0, 0.0]]), Err(Error::MapFormat(_))));
        assert!(Polyline::new(vec![]).is_err());
        assert!(Polyline::new(vec![[1.0, 1.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn projection_on_segment_interior() {
        let pl = Polyline::new(vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]]).unwrap();
        let p = pl.project(4.0, 2.0);
        assert!((p.distance - 2.0).abs() < 1e-12);
        assert!((p.station - 4.0).abs() < 1e-12);
        assert!(p.signed_offset > 0.0);
        let p = pl.project(12.0, 5.0);
        assert!((p.distance - 2.0).abs() < 1e-12);
        assert!((p.station - 15.0).abs() < 1e-12);
        assert!(p.signed_offset < 0.0);
        assert!((p.tangent_heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_dense_sampling() {
        let pts = vec![[0.0, 0.0], [5.0, 1.0], [9.0, -2.0], [15.0, 3.0]];
        let pl = Polyline::new(pts.clone()).unwrap();
        for &(x, y) in &[(1.0, 3.0), (7.0, -4.0), (16.0, 5.0), (-2.0, -1.0), (9.0, -2.0)] {
            let d = pl.project(x, y).distance;
            assert!((d - brute_distance(&pts, x, y)).abs() < 1e-3);
        }
    }

    #[test]
    fn angles() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((angle_between_deg(std::f64::consts::FRAC_PI_4, 0.0) - 45.0).abs() < 1e-12);
        assert!((angle_between_deg(0.1, -0.1 + std::f64::consts::TAU) - 0.2f64.to_degrees()).abs() < 1e-9);
        let m = mean_heading([std::f64::consts::PI - 0.1, -std::f64::consts::PI + 0.1]);
        assert!((m.abs() - std::f64::consts::PI).abs() < 1e-12);
    }
}

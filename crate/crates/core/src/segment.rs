//! Closest points between 3D line segments.

use crate::vec3::Vec3;

const EPS: f64 = 1e-14;

/// Distance between segments `p0p1` and `q0q1` and the closest-point
/// parameters `(s, t)` in `[0, 1]` along each.
pub fn segment_segment(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> (f64, f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                // parallel: any s works, pick the start
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let cp = p0 + d1 * s;
    let cq = q0 + d2 * t;
    (cp.distance(cq), s, t)
}

/// Minimum norm of `d0 + τ (d1 - d0)` for τ in `[0, 1]`.
pub fn min_norm_on_segment(d0: Vec3, d1: Vec3) -> f64 {
    let v = d1 - d0;
    let vv = v.norm_sq();
    let tau = if vv <= EPS {
        0.0
    } else {
        (-d0.dot(v) / vv).clamp(0.0, 1.0)
    };
    (d0 + v * tau).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> f64 {
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let a = p0.lerp(p1, i as f64 / n as f64);
            for j in 0..=n {
                let b = q0.lerp(q1, j as f64 / n as f64);
                best = best.min(a.distance(b));
            }
        }
        best
    }

    #[test]
    fn crossing_segments_touch() {
        let (d, s, t) = segment_segment(
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        );
        assert!(d < 1e-15);
        assert!((s - 0.5).abs() < 1e-12 && (t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn skew_segments_offset_in_z() {
        let (d, _, _) = segment_segment(
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 2.0),
            Vec3::new(0.0, 1.0, 2.0),
        );
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_degenerate() {
        let (d, _, _) = segment_segment(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.0),
            Vec3::new(3.0, 1.0, 0.0),
        );
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        let p = Vec3::new(0.5, 3.0, 0.0);
        let (d, _, _) = segment_segment(p, p, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_brute_force_grid() {
        let cases = [
            [
                0.3, -1.2, 0.4, 2.0, 0.5, -0.3, -0.7, 0.9, 1.1, 1.5, -0.2, 0.6,
            ],
            [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.2, 0.0, 0.3, 2.5, 0.4, -1.0],
            [5.0, 1.0, 0.0, 6.0, 1.5, 0.5, -1.0, 0.2, 0.1, 0.0, -3.0, 0.0],
        ];
        for c in cases {
            let p0 = Vec3::new(c[0], c[1], c[2]);
            let p1 = Vec3::new(c[3], c[4], c[5]);
            let q0 = Vec3::new(c[6], c[7], c[8]);
            let q1 = Vec3::new(c[9], c[10], c[11]);
            let (d, _, _) = segment_segment(p0, p1, q0, q1);
            let b = brute(p0, p1, q0, q1);
            assert!(d <= b + 1e-12 && b - d < 1e-2, "{d} vs {b}");
        }
    }

    #[test]
    fn min_norm_interior_and_clamped() {
        let d = min_norm_on_segment(Vec3::new(-1.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0));
        assert!((d - 1.0).abs() < 1e-15);
        let d = min_norm_on_segment(Vec3::new(2.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0));
        assert!((d - 2.0).abs() < 1e-15);
    }
}

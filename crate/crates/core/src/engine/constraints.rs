//! Admissible normal directions and epipolar depth intervals.

use nalgebra::{Point2, Vector3};
use smallvec::SmallVec;

use crate::geometry::ViewPair;

/// Viewing directions (camera centre to the point) of the reference view
/// and every visible source. A normal is admissible iff `n · v ≤ 0` for all.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalConstraint {
    pub directions: SmallVec<[Vector3<f64>; 8]>,
}

impl NormalConstraint {
    /// `point` is the 3D point of the pixel in the reference frame;
    /// `centers` are the visible source centres in that frame.
    pub fn new(point: &Vector3<f64>, centers: impl IntoIterator<Item = Vector3<f64>>) -> Self {
        let mut directions = SmallVec::new();
        directions.push(point.normalize());
        for c in centers {
            let v = point - c;
            let n = v.norm();
            if n > 0.0 {
                directions.push(v / n);
            }
        }
        Self { directions }
    }

    #[inline]
    pub fn admits(&self, normal: &Vector3<f64>) -> bool {
        self.directions.iter().all(|v| normal.dot(v) <= 0.0)
    }
}

/// Source camera centre expressed in the reference frame.
pub fn source_center(pair: &ViewPair) -> Vector3<f64> {
    -(pair.r_rel.transpose() * pair.t_rel)
}

/// Two depth ranges bracketing the current depth: `left` towards smaller
/// depths, `right` towards larger ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthInterval {
    pub left: (f64, f64),
    pub right: (f64, f64),
}

impl DepthInterval {
    /// The fallback used when no view yields usable offsets.
    pub fn relative(d: f64, frac: f64) -> Self {
        Self {
            left: (d * (1.0 - frac), d),
            right: (d, d * (1.0 + frac)),
        }
    }

    pub fn contains(&self, d: f64) -> bool {
        (self.left.0..=self.left.1).contains(&d) || (self.right.0..=self.right.1).contains(&d)
    }

    pub fn total_length(&self) -> f64 {
        (self.left.1 - self.left.0) + (self.right.1 - self.right.0)
    }

    /// Orders both ends and clamps them into `[lo, hi]`.
    pub fn normalized(self, lo: f64, hi: f64) -> Self {
        let fix = |(a, b): (f64, f64)| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            (a.clamp(lo, hi), b.clamp(lo, hi))
        };
        Self {
            left: fix(self.left),
            right: fix(self.right),
        }
    }
}

/// Depths of one view at offsets `+(α+β), +α, −α, −(α+β)` along the
/// epipolar line: `(d_ll, d_lr, d_rl, d_rr)`.
pub fn view_extremes(pair: &ViewPair, p: &Point2<f64>, d: f64, alpha: f64, beta: f64) -> Option<[f64; 4]> {
    let at = |o: f64| pair.depth_at_offset(p, d, o).ok();
    Some([at(alpha + beta)?, at(alpha)?, at(-alpha)?, at(-(alpha + beta))?])
}

/// k-th smallest (1-based) of `v`.
fn kth_smallest(v: &mut [f64], k: usize) -> f64 {
    v.sort_by(f64::total_cmp);
    v[k - 1]
}

fn kth_largest(v: &mut [f64], k: usize) -> f64 {
    v.sort_by(|a, b| b.total_cmp(a));
    v[k - 1]
}

/// Combines per-view extremes with order statistics: the left interval is
/// `(μ-th smallest d_ll, μ-th largest d_lr)`, the right one
/// `(μ-th largest d_rl, μ-th smallest d_rr)`. With fewer than μ views the
/// most extreme available statistic is used. `None` when `extremes` is empty.
pub fn combine_extremes(extremes: &[[f64; 4]], mu: usize) -> Option<DepthInterval> {
    if extremes.is_empty() || mu == 0 {
        return None;
    }
    let k = mu.min(extremes.len());
    let col = |c: usize| extremes.iter().map(|e| e[c]).collect::<Vec<f64>>();
    let ll = kth_smallest(&mut col(0), k);
    let lr = kth_largest(&mut col(1), k);
    let rl = kth_largest(&mut col(2), k);
    let rr = kth_smallest(&mut col(3), k);
    Some(DepthInterval {
        left: (ll, lr),
        right: (rl, rr),
    })
}

/// Aggregated interval for pixel `p` at depth `d` over the visible views.
/// Falls back to `±fallback` relative when no view is usable. The result is
/// ordered and clamped into `range`.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_depth_interval(
    p: &Point2<f64>,
    d: f64,
    visible: &[&ViewPair],
    alpha: f64,
    beta: f64,
    mu: usize,
    fallback: f64,
    range: (f64, f64),
) -> DepthInterval {
    let extremes: SmallVec<[[f64; 4]; 8]> = visible
        .iter()
        .filter_map(|pair| view_extremes(pair, p, d, alpha, beta))
        .collect();
    combine_extremes(&extremes, mu)
        .unwrap_or_else(|| DepthInterval::relative(d, fallback))
        .normalized(range.0, range.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::CameraModel;
    use nalgebra::Matrix3;

    fn rectified(f: f64, b: f64) -> (CameraModel, CameraModel) {
        let k = CameraModel::intrinsics(f, f, 320.0, 240.0);
        let a = CameraModel::new(k, Matrix3::identity(), Vector3::zeros(), 641, 481).unwrap();
        let c = CameraModel::new(k, Matrix3::identity(), Vector3::new(-b, 0.0, 0.0), 641, 481).unwrap();
        (a, c)
    }

    #[test]
    fn rectified_single_view() {
        let (a, c) = rectified(100.0, 10.0);
        let pair = ViewPair::new(&a, &c);
        let p = Point2::new(400.0, 240.0);
        let iv = aggregate_depth_interval(&p, 10.0, &[&pair], 1.0, 4.0, 3, 0.01, (1.0, 100.0));
        let rel = |x: f64, y: f64| ((x - y) / y).abs();
        assert!(rel(iv.left.0, 1000.0 / 105.0) < 1e-9);
        assert!(rel(iv.left.1, 1000.0 / 101.0) < 1e-9);
        assert!(rel(iv.right.0, 1000.0 / 99.0) < 1e-9);
        assert!(rel(iv.right.1, 1000.0 / 95.0) < 1e-9);
    }

    #[test]
    fn no_views_uses_fallback() {
        let iv = aggregate_depth_interval(&Point2::new(1.0, 1.0), 5.0, &[], 1.0, 4.0, 3, 0.01, (0.1, 100.0));
        assert_eq!(iv, DepthInterval::relative(5.0, 0.01));
        assert!(iv.contains(5.0));
    }

    #[test]
    fn order_statistics() {
        let e = [[1.0, 5.0, 7.0, 11.0], [2.0, 4.0, 8.0, 10.0], [3.0, 6.0, 9.0, 12.0], [0.5, 3.0, 6.5, 13.0]];
        let iv = combine_extremes(&e, 3).unwrap();
        assert_eq!(iv.left, (2.0, 4.0));
        assert_eq!(iv.right, (7.0, 12.0));
        let one = combine_extremes(&e[..1], 3).unwrap();
        assert_eq!(one.left, (1.0, 5.0));
        assert_eq!(one.right, (7.0, 11.0));
    }

    #[test]
    fn normal_constraint_cases() {
        let x = Vector3::new(0.0, 0.0, 5.0);
        let only_ref = NormalConstraint::new(&x, []);
        assert!(only_ref.admits(&Vector3::new(0.0, 0.0, -1.0)));
        assert!(!only_ref.admits(&Vector3::new(0.0, 0.0, 1.0)));
        // A camera on the far side of the point.
        let opposite = NormalConstraint::new(&x, [Vector3::new(0.0, 0.0, 10.0)]);
        assert!(!opposite.admits(&Vector3::new(0.0, 0.0, -1.0)));
        assert!(!opposite.admits(&Vector3::new(0.0, 0.0, 1.0)));
        assert!(opposite.admits(&Vector3::new(1.0, 0.0, 0.0)));
    }
}

//! Region planes over `(x, y, d)` points and their similarity.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng;

use crate::error::FitError;
use crate::rng;

/// Plane `n · (x, y, d) + offset = 0` with unit `n` and `n.z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPlane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl RegionPlane {
    /// Builds a canonical plane from an arbitrary normal and a point on it.
    pub fn through(normal: Vector3<f64>, point: Vector3<f64>) -> Option<Self> {
        let norm = normal.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return None;
        }
        let mut n = normal / norm;
        let flip = if n.z != 0.0 {
            n.z < 0.0
        } else if n.y != 0.0 {
            n.y < 0.0
        } else {
            n.x < 0.0
        };
        if flip {
            n = -n;
        }
        Some(Self {
            normal: [n.x, n.y, n.z],
            offset: -n.dot(&point),
        })
    }

    #[inline]
    pub fn distance(&self, p: &[f64; 3]) -> f64 {
        let n = &self.normal;
        (n[0] * p[0] + n[1] * p[1] + n[2] * p[2] + self.offset).abs()
    }

    /// Relative depth predicted at normalised `(x, y)`; `None` for planes parallel to the depth axis.
    pub fn depth_at(&self, x: f64, y: f64) -> Option<f64> {
        let n = &self.normal;
        (n[2].abs() > 1e-12).then(|| -(n[0] * x + n[1] * y + self.offset) / n[2])
    }
}

/// Plane similarity `n_i · n_j + min(1, |d_i - d_j|)`.
///
/// With `depth_penalty` the depth term is subtracted instead.
pub fn plane_similarity(a: &RegionPlane, b: &RegionPlane, depth_penalty: bool) -> f64 {
    let dot: f64 = a.normal.iter().zip(&b.normal).map(|(x, y)| x * y).sum();
    let gap = (a.offset - b.offset).abs().min(1.0);
    if depth_penalty {
        dot - gap
    } else {
        dot + gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_distance: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 256,
            inlier_distance: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub plane: RegionPlane,
    pub inlier_ratio: f64,
}

fn count_inliers(points: &[[f64; 3]], plane: &RegionPlane, tol: f64) -> usize {
    points.iter().filter(|p| plane.distance(p) <= tol).count()
}

/// Total-least-squares plane through the inliers of `plane`.
fn refit(points: &[[f64; 3]], plane: &RegionPlane, tol: f64) -> Option<RegionPlane> {
    let inliers: Vec<Vector3<f64>> = points
        .iter()
        .filter(|p| plane.distance(p) <= tol)
        .map(|p| Vector3::new(p[0], p[1], p[2]))
        .collect();
    if inliers.len() < 3 {
        return None;
    }
    let centroid = inliers.iter().sum::<Vector3<f64>>() / inliers.len() as f64;
    let cov = inliers
        .iter()
        .map(|p| (p - centroid) * (p - centroid).transpose())
        .sum::<Matrix3<f64>>();
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    RegionPlane::through(eig.eigenvectors.column(k).into_owned(), centroid)
}

/// RANSAC plane fit. The random stream is keyed by `seed` and `key`, so
/// refitting the same point set reproduces the same plane.
pub fn ransac_plane(points: &[[f64; 3]], params: &RansacParams, seed: u64, key: u64) -> Result<PlaneFit, FitError> {
    let n = points.len();
    if n < 3 {
        return Err(FitError::TooFewPoints(n));
    }
    let mut rng = rng::stream(&[seed, key, n as u64]);
    let mut best: Option<(usize, RegionPlane)> = None;
    for _ in 0..params.iterations {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        let k = rng.gen_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let [a, b, c] = [points[i], points[j], points[k]].map(|p| Vector3::new(p[0], p[1], p[2]));
        let Some(plane) = RegionPlane::through((b - a).cross(&(c - a)), a) else {
            continue;
        };
        let count = count_inliers(points, &plane, params.inlier_distance);
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, plane));
        }
    }
    let (mut count, mut plane) = best.ok_or(FitError::Degenerate)?;
    if let Some(refined) = refit(points, &plane, params.inlier_distance) {
        let c = count_inliers(points, &refined, params.inlier_distance);
        if c >= count {
            count = c;
            plane = refined;
        }
    }
    Ok(PlaneFit {
        plane,
        inlier_ratio: count as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn grid(f: impl Fn(f64, f64) -> f64) -> Vec<[f64; 3]> {
        (0..40)
            .flat_map(|y| (0..40).map(move |x| (x as f64 / 100.0, y as f64 / 100.0)))
            .map(|(x, y)| [x, y, f(x, y)])
            .collect()
    }

    #[test]
    fn exact_plane_is_recovered() {
        let pts = grid(|x, y| 0.3 * x - 0.2 * y + 0.4);
        let fit = ransac_plane(&pts, &RansacParams::default(), 1, 0).unwrap();
        assert_eq!(fit.inlier_ratio, 1.0);
        for (x, y) in [(0.1, 0.2), (0.35, 0.05)] {
            let d = fit.plane.depth_at(x, y).unwrap();
            assert!((d - (0.3 * x - 0.2 * y + 0.4)).abs() < 1e-3);
        }
        let expected = RegionPlane::through(Vector3::new(0.3, -0.2, -1.0), Vector3::new(0.0, 0.0, 0.4)).unwrap();
        for k in 0..3 {
            assert!((fit.plane.normal[k] - expected.normal[k]).abs() < 1e-3);
        }
        assert!((fit.plane.offset - expected.offset).abs() < 1e-3);
    }

    #[test]
    fn interleaved_planes_give_half_inliers() {
        let pts = grid(|x, y| if ((x * 100.0).round() as i64 + (y * 100.0).round() as i64) % 2 == 0 { 0.2 + 0.5 * x } else { 0.8 - 0.4 * y });
        let fit = ransac_plane(&pts, &RansacParams::default(), 3, 0).unwrap();
        assert!((fit.inlier_ratio - 0.5).abs() <= 0.05, "{}", fit.inlier_ratio);
        let d = fit.plane.depth_at(0.1, 0.1).unwrap();
        assert!((d - 0.25).abs() < 1e-3 || (d - 0.76).abs() < 1e-3);
    }

    #[test]
    fn noise_has_low_inlier_ratio() {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let pts = grid(|_, _| 0.0)
            .into_iter()
            .map(|[x, y, _]| [x, y, r.gen::<f64>()])
            .collect::<Vec<_>>();
        let fit = ransac_plane(&pts, &RansacParams::default(), 4, 0).unwrap();
        assert!(fit.inlier_ratio < 0.7);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(ransac_plane(&[[0.0; 3]; 2], &RansacParams::default(), 0, 0), Err(FitError::TooFewPoints(2)));
        let line: Vec<[f64; 3]> = (0..50).map(|i| [i as f64, 2.0 * i as f64, 0.5]).collect();
        assert_eq!(ransac_plane(&line, &RansacParams::default(), 0, 0), Err(FitError::Degenerate));
    }

    #[test]
    fn similarity_cases() {
        let p = |nx: f64, nz: f64, off: f64| RegionPlane {
            normal: [nx, 0.0, nz],
            offset: off,
        };
        assert_eq!(plane_similarity(&p(0.0, 1.0, 0.2), &p(0.0, 1.0, 0.2), false), 1.0);
        assert_eq!(plane_similarity(&p(0.0, 1.0, 0.0), &p(0.0, 1.0, 1.5), false), 2.0);
        assert_eq!(plane_similarity(&p(0.0, 1.0, 0.3), &p(0.0, -1.0, 0.3), false), -1.0);
        assert_eq!(plane_similarity(&p(0.0, 1.0, 0.0), &p(0.0, 1.0, 1.5), true), 0.0);
    }
}

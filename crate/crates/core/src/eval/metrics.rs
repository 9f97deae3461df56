//! Accuracy, completeness and F1 between point clouds.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::EvalError;
use crate::par::{self, ExecMode};

/// Uniform grid over 3D points for fixed-radius queries.
pub struct PointGrid<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [[f64; 3]], cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell must be positive");
        let mut cells: HashMap<_, Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { points, cell, cells }
    }

    fn key(p: &[f64; 3], cell: f64) -> (i64, i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64)
    }

    /// Distance to the nearest point within `radius`, if any.
    pub fn nearest_within(&self, q: &[f64; 3], radius: f64) -> Option<f64> {
        let r = (radius / self.cell).ceil() as i64;
        let (cx, cy, cz) = Self::key(q, self.cell);
        let mut best = f64::INFINITY;
        for dx in -r..=r {
            for dy in -r..=r {
                for dz in -r..=r {
                    let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &i in ids {
                        let p = &self.points[i as usize];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        best = best.min(d2);
                    }
                }
            }
        }
        let d = best.sqrt();
        (d <= radius).then_some(d)
    }
}

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub completeness: f64,
    pub f1: f64,
    pub tau: f64,
    pub reconstructed: usize,
    pub ground_truth: usize,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "threshold     {:.6}", self.tau);
        let _ = writeln!(s, "points        {} reconstructed, {} ground truth", self.reconstructed, self.ground_truth);
        let _ = writeln!(s, "accuracy      {:.2} %", self.accuracy);
        let _ = writeln!(s, "completeness  {:.2} %", self.completeness);
        let _ = writeln!(s, "F1            {:.2}", self.f1);
        s
    }

    /// `key = value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "tau = {}\nreconstructed = {}\nground_truth = {}\naccuracy = {}\ncompleteness = {}\nf1 = {}\n",
            self.tau, self.reconstructed, self.ground_truth, self.accuracy, self.completeness, self.f1
        )
    }
}

pub fn f1_score(accuracy: f64, completeness: f64) -> f64 {
    if accuracy + completeness > 0.0 {
        2.0 * accuracy * completeness / (accuracy + completeness)
    } else {
        0.0
    }
}

fn fraction_within(queries: &[[f64; 3]], grid: &PointGrid<'_>, tau: f64, mode: ExecMode) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let hits: usize = par::map_range(mode, queries.len().div_ceil(4096), |b| {
        queries[b * 4096..((b + 1) * 4096).min(queries.len())]
            .iter()
            .filter(|q| grid.nearest_within(q, tau).is_some())
            .count()
    })
    .into_iter()
    .sum();
    100.0 * hits as f64 / queries.len() as f64
}

/// Symmetric nearest-neighbour evaluation at distance `tau`.
pub fn evaluate(reconstructed: &[[f64; 3]], ground_truth: &[[f64; 3]], tau: f64, mode: ExecMode) -> Result<EvalReport, EvalError> {
    if ground_truth.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    if !(tau > 0.0) {
        return Err(EvalError::BadThreshold(tau));
    }
    let gt_grid = PointGrid::new(ground_truth, tau);
    let accuracy = fraction_within(reconstructed, &gt_grid, tau, mode);
    let completeness = if reconstructed.is_empty() {
        0.0
    } else {
        fraction_within(ground_truth, &PointGrid::new(reconstructed, tau), tau, mode)
    };
    Ok(EvalReport {
        accuracy,
        completeness,
        f1: f1_score(accuracy, completeness),
        tau,
        reconstructed: reconstructed.len(),
        ground_truth: ground_truth.len(),
    })
}

/// Default threshold: 1% of the bounding-box diagonal.
pub fn default_tau(ground_truth: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in ground_truth {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let d2: f64 = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum();
    0.01 * d2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cloud(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut r = crate::rng::stream(&[seed]);
        (0..n).map(|_| [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..0.2)]).collect()
    }

    #[test]
    fn identical_clouds_score_full() {
        let c = cloud(500, 1);
        let r = evaluate(&c, &c, 0.01, ExecMode::Parallel).unwrap();
        assert_eq!((r.accuracy, r.completeness, r.f1), (100.0, 100.0, 100.0));
    }

    #[test]
    fn empty_and_errors() {
        let c = cloud(10, 2);
        let r = evaluate(&[], &c, 0.1, ExecMode::Sequential).unwrap();
        assert_eq!((r.completeness, r.f1), (0.0, 0.0));
        assert!(matches!(evaluate(&c, &[], 0.1, ExecMode::Sequential), Err(EvalError::EmptyGroundTruth)));
        assert!(matches!(evaluate(&c, &c, 0.0, ExecMode::Sequential), Err(EvalError::BadThreshold(_))));
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        assert!((f1_score(50.0, 100.0) - 66.666_666).abs() < 1e-4);
    }

    #[test]
    fn grid_matches_brute_force() {
        let a = cloud(1000, 3);
        let b = cloud(1000, 4);
        let tau = 0.03;
        let grid = PointGrid::new(&b, tau);
        for q in &a {
            let brute = b
                .iter()
                .map(|p| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            match grid.nearest_within(q, tau) {
                Some(d) => assert!((d - brute).abs() < 1e-12),
                None => assert!(brute > tau),
            }
        }
    }

    #[test]
    fn translated_cloud_has_no_accuracy() {
        let gt = cloud(1000, 5);
        let tau = 0.01;
        let moved: Vec<[f64; 3]> = gt.iter().map(|p| [p[0], p[1], p[2] + 2.0 * tau + 0.3]).collect();
        assert_eq!(evaluate(&moved, &gt, tau, ExecMode::Sequential).unwrap().accuracy, 0.0);
    }
}

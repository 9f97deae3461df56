//! Per-pixel, per-source-view visibility weights.

use nalgebra::Point2;

use crate::camera::CameraModel;
use crate::config::{AnchorVisibilityTest, VisibilityConfig};
use crate::cost::CostValue;
use crate::geometry::reprojection_error;
use crate::par::{self, ExecMode};
use crate::raster::DepthMapBuffer;

/// Weight of one source view from its matching cost: a Gaussian of the
/// cost below `tau_good`, zero at or above it.
pub fn view_weight(cost: CostValue, cfg: &VisibilityConfig) -> f64 {
    let c = cost.value();
    if c < cfg.tau_good {
        (-c * c / (2.0 * cfg.bandwidth * cfg.bandwidth)).exp()
    } else {
        0.0
    }
}

pub fn init_view_weights(per_view_costs: &[CostValue], cfg: &VisibilityConfig) -> Vec<f64> {
    per_view_costs.iter().map(|&c| view_weight(c, cfg)).collect()
}

/// Weights `w'[p][j]` for the sources of one reference view.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMap {
    width: usize,
    height: usize,
    sources: usize,
    weights: Vec<f32>,
}

impl VisibilityMap {
    pub fn zeros(width: usize, height: usize, sources: usize) -> Self {
        Self {
            width,
            height,
            sources,
            weights: vec![0.0; width * height * sources],
        }
    }

    pub fn from_weights(width: usize, height: usize, sources: usize, weights: Vec<f32>) -> Self {
        assert_eq!(weights.len(), width * height * sources, "visibility buffer size");
        Self {
            width,
            height,
            sources,
            weights,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    #[inline]
    pub fn weights_at(&self, pixel: usize) -> &[f32] {
        &self.weights[pixel * self.sources..(pixel + 1) * self.sources]
    }

    #[inline]
    pub fn weight(&self, pixel: usize, source: usize) -> f32 {
        self.weights[pixel * self.sources + source]
    }

    pub fn set(&mut self, pixel: usize, source: usize, w: f32) {
        self.weights[pixel * self.sources + source] = w;
    }

    pub fn weights_at_mut(&mut self, pixel: usize) -> &mut [f32] {
        &mut self.weights[pixel * self.sources..(pixel + 1) * self.sources]
    }

    /// One source's weights as a grayscale plane in `[0, 1]`.
    pub fn plane(&self, source: usize) -> Vec<f32> {
        (0..self.width * self.height).map(|p| self.weight(p, source)).collect()
    }
}

/// Everything restoration needs to know about the other views.
pub struct RestoreInputs<'a> {
    pub reference: &'a CameraModel,
    pub reference_depth: &'a DepthMapBuffer,
    /// Camera and current depth of each source, in source order.
    pub sources: Vec<(&'a CameraModel, &'a DepthMapBuffer)>,
}

/// Zero-weight entries whose round-trip reprojection error is at most
/// `eps_reproj` receive `w_min_restored`; positive weights are kept.
pub fn restore_visibility(vis: &VisibilityMap, inputs: &RestoreInputs<'_>, cfg: &VisibilityConfig, mode: ExecMode) -> VisibilityMap {
    let (w, n) = (vis.width, vis.sources);
    assert_eq!(inputs.sources.len(), n, "one source entry per weight column");
    let rows: Vec<Vec<f32>> = par::map_range(mode, vis.height, |y| {
        let mut row = vis.weights[y * w * n..(y + 1) * w * n].to_vec();
        for x in 0..w {
            let Some(d) = inputs.reference_depth.get(x, y) else { continue };
            let p = Point2::new(x as f64, y as f64);
            for (j, (cam_j, depth_j)) in inputs.sources.iter().enumerate() {
                let slot = &mut row[x * n + j];
                if *slot > 0.0 {
                    continue;
                }
                if let Some(e) = reprojection_error(&p, d as f64, inputs.reference, cam_j, depth_j) {
                    if e <= cfg.eps_reproj {
                        *slot = cfg.w_min_restored as f32;
                    }
                }
            }
        }
        row
    });
    VisibilityMap {
        weights: rows.concat(),
        ..vis.clone()
    }
}

/// Anchors visible in source `j`: `w'_j > 0` at the anchor pixel (or at
/// the owning pixel, depending on `test`).
pub fn filter_anchors_by_visibility(
    p: (usize, usize),
    s_prime: &[(usize, usize)],
    vis: &VisibilityMap,
    j: usize,
    test: AnchorVisibilityTest,
) -> Vec<(usize, usize)> {
    let at = |(x, y): (usize, usize)| vis.weight(y * vis.width + x, j) > 0.0;
    match test {
        AnchorVisibilityTest::AnchorPixel => s_prime.iter().copied().filter(|&s| at(s)).collect(),
        AnchorVisibilityTest::OwnerPixel => {
            if at(p) {
                s_prime.to_vec()
            } else {
                Vec::new()
            }
        }
    }
}

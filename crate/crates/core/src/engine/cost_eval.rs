//! Multi-view cost of a candidate hypothesis at one pixel.

use nalgebra::Point2;
use smallvec::SmallVec;

use crate::camera::CameraModel;
use crate::cost::{blend_deformable, CostValue, PatchSpec, RefPatch};
use crate::geometry::{PlaneHypothesis, ViewPair};
use crate::raster::GrayImage;

use super::anchors::MAX_SECTORS;

/// One source view as seen from the reference.
pub struct SourceView<'a> {
    /// Index of the source in the scene.
    pub index: usize,
    pub camera: &'a CameraModel,
    pub image: &'a GrayImage,
    pub pair: ViewPair,
}

pub type Costs = SmallVec<[CostValue; 8]>;

/// Everything needed to score hypotheses at one pixel during one phase.
pub struct PixelCost {
    p: Point2<f64>,
    central: RefPatch,
    /// Region-filtered anchor sub-patches.
    anchors: SmallVec<[RefPatch; MAX_SECTORS]>,
    /// Bit `k` of entry `j`: anchor `k` is usable in source `j`.
    masks: SmallVec<[u16; 8]>,
    weights: SmallVec<[f64; 8]>,
    lambda: f64,
}

impl PixelCost {
    /// Conventional cost: central patch only.
    pub fn central(image: &GrayImage, p: (usize, usize), weights: &[f32]) -> Self {
        Self {
            p: Point2::new(p.0 as f64, p.1 as f64),
            central: RefPatch::new(image, p.0 as i64, p.1 as i64, PatchSpec::CENTRAL),
            anchors: SmallVec::new(),
            masks: SmallVec::from_elem(0, weights.len()),
            weights: weights.iter().map(|&w| w as f64).collect(),
            lambda: 1.0,
        }
    }

    /// Deformable cost with anchor sub-patches; `masks[j]` selects the
    /// anchors used for source `j`.
    pub fn deformable(image: &GrayImage, p: (usize, usize), weights: &[f32], anchors: &[(usize, usize)], masks: &[u16], lambda: f64) -> Self {
        debug_assert_eq!(masks.len(), weights.len());
        let mut c = Self::central(image, p, weights);
        c.anchors = anchors
            .iter()
            .map(|&(x, y)| RefPatch::new(image, x as i64, y as i64, PatchSpec::ANCHOR))
            .collect();
        c.masks = masks.into();
        c.lambda = lambda;
        c
    }

    pub fn has_anchors(&self) -> bool {
        !self.anchors.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cost in one source view.
    pub fn view_cost(&self, j: usize, src: &SourceView<'_>, hyp: &PlaneHypothesis) -> CostValue {
        let Ok(h) = src.pair.homography(&self.p, hyp) else {
            return CostValue::MAX;
        };
        let central = self.central.ncc(src.image, &h);
        let mask = self.masks[j];
        if mask == 0 || self.anchors.is_empty() {
            return central;
        }
        let costs: SmallVec<[CostValue; MAX_SECTORS]> = self
            .anchors
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, a)| a.ncc(src.image, &h))
            .collect();
        blend_deformable(central, &costs, self.lambda)
    }

    /// Per-view costs for all sources.
    pub fn view_costs(&self, sources: &[SourceView<'_>], hyp: &PlaneHypothesis) -> Costs {
        sources.iter().enumerate().map(|(j, s)| self.view_cost(j, s, hyp)).collect()
    }

    /// Weighted aggregate over views with positive weight. With no weight
    /// at all, the plain mean over every view stands in.
    pub fn aggregate(&self, sources: &[SourceView<'_>], hyp: &PlaneHypothesis) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (j, s) in sources.iter().enumerate() {
            let w = self.weights[j];
            if w > 0.0 {
                num += w * self.view_cost(j, s, hyp).value();
                den += w;
            }
        }
        if den > 0.0 {
            return CostValue::new(num / den).value();
        }
        unweighted_fallback(&self.view_costs(sources, hyp))
    }
}

/// Plain mean over every view, used when no view carries weight.
pub fn unweighted_fallback(costs: &[CostValue]) -> f64 {
    if costs.is_empty() {
        return CostValue::MAX.value();
    }
    CostValue::new(costs.iter().map(|c| c.value()).sum::<f64>() / costs.len() as f64).value()
}

/// Aggregation of already computed per-view costs, matching [`PixelCost::aggregate`].
pub fn aggregate_with_fallback(costs: &[CostValue], weights: &[f64]) -> f64 {
    let (num, den) = costs
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .fold((0.0, 0.0), |(n, d), (c, w)| (n + w * c.value(), d + w));
    if den > 0.0 {
        CostValue::new(num / den).value()
    } else {
        unweighted_fallback(costs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fallback_aggregation() {
        let c = |v| CostValue::new(v);
        let costs = [c(0.9), c(0.1), c(0.3), c(1.2)];
        assert!((aggregate_with_fallback(&costs, &[0.0; 4]) - 0.625).abs() < 1e-12);
        assert!((aggregate_with_fallback(&costs, &[1.0, 0.0, 1.0, 0.0]) - 0.6).abs() < 1e-12);
        assert!((unweighted_fallback(&costs[..3]) - 1.3 / 3.0).abs() < 1e-12);
        assert_eq!(unweighted_fallback(&[]), 2.0);
    }
}

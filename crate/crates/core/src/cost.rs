//! Photometric matching costs.
//!
//! The single-view cost is one minus a bilaterally weighted normalised
//! cross-correlation between a reference patch and its plane-induced warp
//! into a source image. Values live in `[0, 2]`; degenerate patches score 2.

use nalgebra::{Matrix3, Point2};

use crate::camera::CameraModel;
use crate::geometry::{PlaneHypothesis, ViewPair};
use crate::raster::GrayImage;

/// Bandwidth of the intensity term in the bilateral weight.
pub const BILATERAL_SIGMA: f64 = 0.2;
/// Variance below which a patch is treated as flat.
pub const MIN_VARIANCE: f64 = 1e-12;
/// Blend between the central patch and the anchor sub-patches.
pub const DEFAULT_LAMBDA: f64 = 0.25;

/// Square sampling pattern: `size` pixels per side, sampled every `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub size: usize,
    pub stride: usize,
}

impl PatchSpec {
    /// Central patch of a pixel.
    pub const CENTRAL: PatchSpec = PatchSpec { size: 11, stride: 5 };
    /// Sub-patch around an anchor pixel.
    pub const ANCHOR: PatchSpec = PatchSpec { size: 11, stride: 2 };

    pub fn radius(&self) -> i64 {
        (self.size / 2) as i64
    }

    /// Offsets `-r, -r + stride, ..., <= r` along one axis.
    pub fn offsets(&self) -> impl Iterator<Item = i64> + Clone {
        let r = self.radius();
        (-r..=r).step_by(self.stride.max(1))
    }

    pub fn sample_count(&self) -> usize {
        let n = self.offsets().count();
        n * n
    }
}

/// A matching cost clamped to `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CostValue(f64);

impl CostValue {
    pub const MAX: CostValue = CostValue(2.0);
    pub const ZERO: CostValue = CostValue(0.0);

    pub fn new(v: f64) -> Self {
        if v.is_nan() {
            return Self::MAX;
        }
        CostValue(v.clamp(0.0, 2.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct RefSample {
    x: f64,
    y: f64,
    value: f64,
    weight: f64,
}

/// Reference-side samples of one patch, reusable across hypotheses and views.
#[derive(Debug, Clone)]
pub struct RefPatch {
    samples: Vec<RefSample>,
}

impl RefPatch {
    /// Samples `spec` around `(cx, cy)`, clamping positions at the border.
    pub fn new(image: &GrayImage, cx: i64, cy: i64, spec: PatchSpec) -> Self {
        let center = image.get_clamped(cx, cy) as f64;
        let mut samples = Vec::with_capacity(spec.sample_count());
        let max_x = image.width() as i64 - 1;
        let max_y = image.height() as i64 - 1;
        for dy in spec.offsets() {
            for dx in spec.offsets() {
                let x = (cx + dx).clamp(0, max_x);
                let y = (cy + dy).clamp(0, max_y);
                let value = image.get(x as usize, y as usize) as f64;
                let weight = (-(value - center).abs() / BILATERAL_SIGMA).exp();
                samples.push(RefSample {
                    x: x as f64,
                    y: y as f64,
                    value,
                    weight,
                });
            }
        }
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// NCC cost of this patch against `source` warped by `h`.
    ///
    /// Samples mapping outside the source are dropped; fewer than half
    /// surviving, or a flat patch on either side, yields the maximum cost.
    pub fn ncc(&self, source: &GrayImage, h: &Matrix3<f64>) -> CostValue {
        let (mut sw, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut kept = 0usize;
        for s in &self.samples {
            let w = h[(2, 0)] * s.x + h[(2, 1)] * s.y + h[(2, 2)];
            if !(w > 1e-12) {
                continue;
            }
            let u = (h[(0, 0)] * s.x + h[(0, 1)] * s.y + h[(0, 2)]) / w;
            let v = (h[(1, 0)] * s.x + h[(1, 1)] * s.y + h[(1, 2)]) / w;
            let Some(b) = source.sample(u, v) else { continue };
            let a = s.value;
            let wt = s.weight;
            kept += 1;
            sw += wt;
            sa += wt * a;
            sb += wt * b;
            saa += wt * a * a;
            sbb += wt * b * b;
            sab += wt * a * b;
        }
        if kept * 2 < self.samples.len() || sw <= 0.0 {
            return CostValue::MAX;
        }
        let ma = sa / sw;
        let mb = sb / sw;
        let var_a = saa / sw - ma * ma;
        let var_b = sbb / sw - mb * mb;
        if var_a < MIN_VARIANCE || var_b < MIN_VARIANCE {
            return CostValue::MAX;
        }
        let cov = sab / sw - ma * mb;
        CostValue::new(1.0 - cov / (var_a * var_b).sqrt())
    }
}

/// Cost of the patch `spec` around `p` for hypothesis `hyp` between a
/// reference and a source view.
pub fn ncc_cost(
    img_i: &GrayImage,
    img_j: &GrayImage,
    p: (i64, i64),
    hyp: &PlaneHypothesis,
    spec: PatchSpec,
    cam_i: &CameraModel,
    cam_j: &CameraModel,
) -> CostValue {
    let pair = ViewPair::new(cam_i, cam_j);
    match pair.homography(&Point2::new(p.0 as f64, p.1 as f64), hyp) {
        Ok(h) => RefPatch::new(img_i, p.0, p.1, spec).ncc(img_j, &h),
        Err(_) => CostValue::MAX,
    }
}

/// Convex blend of the central cost and the mean anchor cost.
/// An empty anchor list leaves the central cost untouched.
pub fn blend_deformable(central: CostValue, anchor_costs: &[CostValue], lambda: f64) -> CostValue {
    if anchor_costs.is_empty() {
        return central;
    }
    let mean = anchor_costs.iter().map(|c| c.value()).sum::<f64>() / anchor_costs.len() as f64;
    CostValue::new(lambda * central.value() + (1.0 - lambda) * mean)
}

/// Deformable-patch cost: the central patch of `p` blended with 11x11
/// stride-2 sub-patches around each anchor, all warped by the homography of
/// `p`'s candidate hypothesis.
pub fn deformable_cost(
    p: (i64, i64),
    hyp: &PlaneHypothesis,
    anchors: &[(i64, i64)],
    img_i: &GrayImage,
    img_j: &GrayImage,
    cam_i: &CameraModel,
    cam_j: &CameraModel,
) -> CostValue {
    let pair = ViewPair::new(cam_i, cam_j);
    let Ok(h) = pair.homography(&Point2::new(p.0 as f64, p.1 as f64), hyp) else {
        return CostValue::MAX;
    };
    let central = RefPatch::new(img_i, p.0, p.1, PatchSpec::CENTRAL).ncc(img_j, &h);
    let anchor_costs: Vec<CostValue> = anchors
        .iter()
        .map(|&(x, y)| RefPatch::new(img_i, x, y, PatchSpec::ANCHOR).ncc(img_j, &h))
        .collect();
    blend_deformable(central, &anchor_costs, DEFAULT_LAMBDA)
}

/// Weighted mean of per-view costs; 2 when no view carries weight.
pub fn aggregate_cost(per_view_costs: &[CostValue], weights: &[f64]) -> CostValue {
    assert_eq!(per_view_costs.len(), weights.len(), "one weight per source view");
    let (num, den) = per_view_costs
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(n, d), (c, w)| (n + w * c.value(), d + w));
    if den <= 0.0 {
        return CostValue::MAX;
    }
    CostValue::new(num / den)
}

/// Mean of the `k` lowest per-view costs.
pub fn best_k_mean(per_view_costs: &[CostValue], k: usize) -> CostValue {
    if per_view_costs.is_empty() || k == 0 {
        return CostValue::MAX;
    }
    let mut v: Vec<f64> = per_view_costs.iter().map(|c| c.value()).collect();
    v.sort_by(f64::total_cmp);
    let k = k.min(v.len());
    CostValue::new(v[..k].iter().sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f32, y as f32);
            0.5 + 0.25 * (0.37 * x + 0.11 * y).sin() + 0.2 * (0.23 * y - 0.05 * x).cos()
        })
    }

    fn cam(tx: f64) -> CameraModel {
        CameraModel::new(
            CameraModel::intrinsics(100.0, 100.0, 40.0, 30.0),
            Matrix3::identity(),
            Vector3::new(-tx, 0.0, 0.0),
            81,
            61,
        )
        .unwrap()
    }

    #[test]
    fn patch_offsets() {
        assert_eq!(PatchSpec::CENTRAL.offsets().collect::<Vec<_>>(), vec![-5, 0, 5]);
        assert_eq!(PatchSpec::ANCHOR.offsets().collect::<Vec<_>>(), vec![-5, -3, -1, 1, 3, 5]);
        assert_eq!(PatchSpec::ANCHOR.sample_count(), 36);
    }

    #[test]
    fn identical_views_cost_zero() {
        let img = textured(81, 61);
        let c = cam(0.0);
        let hyp = PlaneHypothesis::facing(Vector3::new(0.1, 0.2, -1.0), 3.0, &Vector3::z());
        for spec in [PatchSpec::CENTRAL, PatchSpec::ANCHOR] {
            let cost = ncc_cost(&img, &img, (40, 30), &hyp, spec, &c, &c);
            assert!(cost.value() < 1e-6, "{cost:?}");
        }
    }

    #[test]
    fn flat_patch_costs_max() {
        let flat = GrayImage::constant(81, 61, 0.4);
        let c = cam(0.0);
        let cost = ncc_cost(&flat, &flat, (40, 30), &PlaneHypothesis::fronto_parallel(3.0), PatchSpec::CENTRAL, &c, &c);
        assert_eq!(cost, CostValue::MAX);
    }

    #[test]
    fn mostly_outside_source_costs_max() {
        let img = textured(81, 61);
        // A 2 unit baseline at depth 3 shifts by ~67 px: almost everything leaves the image.
        let cost = ncc_cost(&img, &img, (20, 30), &PlaneHypothesis::fronto_parallel(3.0), PatchSpec::CENTRAL, &cam(0.0), &cam(2.0));
        assert_eq!(cost, CostValue::MAX);
    }

    #[test]
    fn deformable_blend_arithmetic() {
        let c = blend_deformable(CostValue::new(0.4), &[CostValue::new(0.2), CostValue::new(0.2)], DEFAULT_LAMBDA);
        assert_relative_eq!(c.value(), 0.25, epsilon = 1e-12);
        assert_eq!(blend_deformable(CostValue::new(0.7), &[], DEFAULT_LAMBDA), CostValue::new(0.7));
        let same = blend_deformable(CostValue::new(0.3), &[CostValue::new(0.3); 5], DEFAULT_LAMBDA);
        assert_relative_eq!(same.value(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn deformable_without_anchors_equals_central() {
        let img = textured(81, 61);
        let other = GrayImage::from_fn(81, 61, |x, y| img.get((x + 3).min(80), y));
        let hyp = PlaneHypothesis::fronto_parallel(2.5);
        let central = ncc_cost(&img, &other, (40, 30), &hyp, PatchSpec::CENTRAL, &cam(0.0), &cam(0.1));
        let deform = deformable_cost((40, 30), &hyp, &[], &img, &other, &cam(0.0), &cam(0.1));
        assert_eq!(central, deform);
    }

    #[test]
    fn aggregation_arithmetic() {
        let c = |v| CostValue::new(v);
        assert_relative_eq!(aggregate_cost(&[c(0.2), c(0.4)], &[1.0, 1.0]).value(), 0.3, epsilon = 1e-12);
        assert_eq!(aggregate_cost(&[c(0.2), c(0.4)], &[0.0, 0.0]), CostValue::MAX);
        assert_relative_eq!(
            aggregate_cost(&[c(0.1), c(0.9), c(0.4)], &[2.0, 0.0, 1.0]).value(),
            0.2,
            epsilon = 1e-12
        );
        assert_relative_eq!(best_k_mean(&[c(0.9), c(0.1), c(0.3)], 2).value(), 0.2, epsilon = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn costs_stay_in_range(
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, d in 0.5f64..20.0,
            tx in -0.5f64..0.5, px in 0i64..81, py in 0i64..61,
        ) {
            let img = textured(81, 61);
            let hyp = PlaneHypothesis::facing(Vector3::new(nx, ny, -1.0), d, &Vector3::z());
            let c = ncc_cost(&img, &img, (px, py), &hyp, PatchSpec::ANCHOR, &cam(0.0), &cam(tx));
            proptest::prop_assert!((0.0..=2.0).contains(&c.value()));
        }

        #[test]
        fn blend_lies_between_parts(central in 0.0f64..2.0, anchors in proptest::collection::vec(0.0f64..2.0, 1..8)) {
            let costs: Vec<_> = anchors.iter().map(|v| CostValue::new(*v)).collect();
            let mean = anchors.iter().sum::<f64>() / anchors.len() as f64;
            let b = blend_deformable(CostValue::new(central), &costs, DEFAULT_LAMBDA).value();
            proptest::prop_assert!(b >= central.min(mean) - 1e-12 && b <= central.max(mean) + 1e-12);
        }
    }
}

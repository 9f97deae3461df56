//! Region prior from a monocular depth map and the image.
//!
//! Edges split the image into connected regions, each planarised by RANSAC
//! in `(x, y, relative depth)`. Regions joined through thin necks are split
//! by erosion when their halves disagree; coplanar neighbours are merged;
//! edge pixels are then absorbed into the closest consistent region. The
//! engine keeps only anchors that share a pixel's region.

mod edges;
mod plane;
mod regions;

use std::fmt::Write as _;
use std::path::Path;

pub use edges::{roberts_edges, roberts_magnitude, EdgeMap, RelativeDepth};
pub use plane::{plane_similarity, ransac_plane, PlaneFit, RansacParams, RegionPlane};
pub use regions::{
    adjacent_pairs, dilate_merge, erode_regions, filter_anchors_by_region, filter_boundary_pixels, fit_all,
    fit_region_plane, label_regions, merge_predicate, split_predicate, MergeEvent, RegionMap, RegionRecord,
    SplitEvent, EDGE, UNASSIGNED,
};

use crate::config::RegionConfig;
use crate::error::IoError;
use crate::raster::{DepthMapBuffer, GrayImage};

/// The finished prior for one view plus the intermediate products.
#[derive(Debug, Clone)]
pub struct RegionPrior {
    pub depth: RelativeDepth,
    pub edges: EdgeMap,
    /// Regions straight after labelling and fitting.
    pub initial: RegionMap,
    pub map: RegionMap,
    pub splits: Vec<SplitEvent>,
    pub merges: Vec<MergeEvent>,
    pub absorbed_pixels: usize,
}

impl RegionPrior {
    /// Runs edges, labelling, fitting, erosion, merging and absorption.
    pub fn build(mono: &DepthMapBuffer, image: &GrayImage, cfg: &RegionConfig, seed: u64) -> Self {
        let depth = RelativeDepth::normalize(mono);
        let edges = roberts_edges(&depth, image, cfg.roberts_threshold, cfg.eps_grad);
        let mut map = label_regions(&edges, cfg.eta);
        fit_all(&mut map, &depth, cfg, seed);
        let initial = map.clone();
        let splits = erode_regions(&mut map, &depth, cfg, seed);
        let merges = dilate_merge(&mut map, &depth, cfg, seed);
        let absorbed_pixels = filter_boundary_pixels(&mut map, &depth, cfg);
        log::debug!(
            "region prior: {} regions, {} splits, {} merges, {} absorbed",
            map.region_count(),
            splits.len(),
            merges.len(),
            absorbed_pixels
        );
        Self {
            depth,
            edges,
            initial,
            map,
            splits,
            merges,
            absorbed_pixels,
        }
    }

    /// Recomputes the split predicate of `event` from its stored pixel sets.
    pub fn recheck_split(&self, event: &SplitEvent, cfg: &RegionConfig, seed: u64) -> bool {
        let fit = |px: &[usize]| fit_region_plane(px, &self.depth, cfg, seed).ok();
        let (Some(parent), Some(a), Some(b)) = (fit(&event.parent_pixels), fit(&event.cores[0]), fit(&event.cores[1])) else {
            return false;
        };
        let sim = plane_similarity(&a.plane, &b.plane, cfg.depth_penalty_similarity);
        split_predicate(sim, a.inlier_ratio, b.inlier_ratio, parent.inlier_ratio, cfg).0
    }

    /// Recomputes the merge predicate of `event` from its stored planes and ratios.
    pub fn recheck_merge(event: &MergeEvent, cfg: &RegionConfig) -> bool {
        let rec = |k: usize| RegionRecord {
            id: 0,
            pixel_count: 1,
            plane: Some(event.planes[k]),
            inlier_ratio: event.inlier_ratios[k],
        };
        merge_predicate(&rec(0), &rec(1), cfg).is_some()
    }
}

/// Line-oriented region table: `id count nx ny nz d r`.
pub fn region_table(map: &RegionMap) -> String {
    let mut out = String::from("# id count nx ny nz d inlier_ratio\n");
    for r in map.live_regions() {
        let (n, d) = r.plane.map_or(([f64::NAN; 3], f64::NAN), |p| (p.normal, p.offset));
        let _ = writeln!(
            out,
            "{} {} {:.6} {:.6} {:.6} {:.6} {:.4}",
            r.id, r.pixel_count, n[0], n[1], n[2], d, r.inlier_ratio
        );
    }
    out
}

/// False-colour label image; edges black, unassigned grey.
pub fn label_colors(map: &RegionMap) -> Vec<[u8; 3]> {
    map.labels
        .iter()
        .map(|&l| match l {
            EDGE => [0, 0, 0],
            UNASSIGNED => [96, 96, 96],
            l => {
                let h = crate::rng::mix(&[l as u64]);
                [(h >> 8) as u8 | 64, (h >> 24) as u8 | 64, (h >> 40) as u8 | 64]
            }
        })
        .collect()
}

pub fn dump_regions(map: &RegionMap, png: &Path, table: &Path) -> Result<(), IoError> {
    crate::scene_io::write_rgb_png(map.width, map.height, &label_colors(map), png)?;
    std::fs::write(table, region_table(map)).map_err(|e| IoError::io(table, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lists_regions() {
        let img = GrayImage::from_fn(60, 40, |x, _| if x < 30 { 0.2 } else { 0.8 });
        let mono = DepthMapBuffer::from_relative(60, 40, (0..2400).map(|i| (i % 60) as f32 * 0.001).collect());
        let prior = RegionPrior::build(&mono, &img, &RegionConfig::default(), 0);
        let t = region_table(&prior.map);
        assert_eq!(t.lines().count(), 1 + prior.map.region_count());
        assert_eq!(label_colors(&prior.map).len(), 2400);
    }
}

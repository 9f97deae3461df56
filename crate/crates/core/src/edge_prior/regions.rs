//! Region labelling and the erosion / dilation / absorption refinements.

use std::collections::{BTreeSet, VecDeque};

use super::edges::{EdgeMap, RelativeDepth};
use super::plane::{plane_similarity, ransac_plane, PlaneFit, RansacParams, RegionPlane};
use crate::config::RegionConfig;
use crate::error::FitError;

/// Label of pixels flagged as edges.
pub const EDGE: u32 = u32::MAX;
/// Label of non-edge pixels in components smaller than η.
pub const UNASSIGNED: u32 = u32::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub id: u32,
    pub pixel_count: usize,
    pub plane: Option<RegionPlane>,
    pub inlier_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// Indexed by label; retired labels hold `None`.
    pub regions: Vec<Option<RegionRecord>>,
}

impl RegionMap {
    /// Region label of a pixel, `None` for edge or unassigned pixels.
    #[inline]
    pub fn label_at(&self, x: usize, y: usize) -> Option<u32> {
        let l = self.labels[y * self.width + x];
        (l < UNASSIGNED).then_some(l)
    }

    pub fn record(&self, label: u32) -> Option<&RegionRecord> {
        self.regions.get(label as usize).and_then(Option::as_ref)
    }

    pub fn live_regions(&self) -> impl Iterator<Item = &RegionRecord> {
        self.regions.iter().flatten()
    }

    pub fn region_count(&self) -> usize {
        self.live_regions().count()
    }

    /// Pixel indices carrying `label`, ascending.
    pub fn pixels_of(&self, label: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }

    fn push_region(&mut self, pixel_count: usize) -> u32 {
        let id = self.regions.len() as u32;
        self.regions.push(Some(RegionRecord {
            id,
            pixel_count,
            plane: None,
            inlier_ratio: 0.0,
        }));
        id
    }
}

/// 4-connected components of `mask` inside a `w x h` grid; each component
/// lists its pixel indices in BFS order from its smallest index.
fn components(mask: &[bool], w: usize, h: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        out.push(comp);
    }
    out
}

/// Groups non-edge pixels into 4-connected components. Components of at
/// least `eta` pixels become regions (without planes yet); the rest are
/// marked [`UNASSIGNED`].
pub fn label_regions(edges: &EdgeMap, eta: usize) -> RegionMap {
    let (w, h) = (edges.width, edges.height);
    let mask: Vec<bool> = edges.flags.iter().map(|f| !f).collect();
    let mut map = RegionMap {
        width: w,
        height: h,
        labels: edges.flags.iter().map(|f| if *f { EDGE } else { UNASSIGNED }).collect(),
        regions: Vec::new(),
    };
    for comp in components(&mask, w, h) {
        if comp.len() >= eta {
            let id = map.push_region(comp.len());
            for i in comp {
                map.labels[i] = id;
            }
        }
    }
    map
}

fn ransac_params(cfg: &RegionConfig) -> RansacParams {
    RansacParams {
        iterations: cfg.ransac_iterations,
        inlier_distance: cfg.ransac_inlier_distance,
    }
}

/// RANSAC fit over the `(x, y, d)` points of `pixels`. Pixels with invalid
/// depth are skipped. The random stream is keyed by the smallest pixel
/// index, so the same pixel set always yields the same fit.
pub fn fit_region_plane(pixels: &[usize], depth: &RelativeDepth, cfg: &RegionConfig, seed: u64) -> Result<PlaneFit, FitError> {
    let points: Vec<[f64; 3]> = pixels.iter().filter_map(|&i| depth.point(i)).collect();
    let key = pixels.iter().min().copied().unwrap_or(0) as u64;
    let fit = ransac_plane(&points, &ransac_params(cfg), seed, key)?;
    // Invalid-depth pixels count against the inlier ratio.
    Ok(PlaneFit {
        plane: fit.plane,
        inlier_ratio: fit.inlier_ratio * points.len() as f64 / pixels.len() as f64,
    })
}

fn refit(map: &mut RegionMap, label: u32, pixels: &[usize], depth: &RelativeDepth, cfg: &RegionConfig, seed: u64) {
    let fit = (pixels.len() >= cfg.eta)
        .then(|| fit_region_plane(pixels, depth, cfg, seed).ok())
        .flatten();
    let rec = map.regions[label as usize].as_mut().expect("live region");
    rec.pixel_count = pixels.len();
    rec.plane = fit.map(|f| f.plane);
    rec.inlier_ratio = fit.map_or(0.0, |f| f.inlier_ratio);
}

/// Fits a plane to every region.
pub fn fit_all(map: &mut RegionMap, depth: &RelativeDepth, cfg: &RegionConfig, seed: u64) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); map.regions.len()];
    for (i, &l) in map.labels.iter().enumerate() {
        if l < UNASSIGNED {
            members[l as usize].push(i);
        }
    }
    for (label, pixels) in members.iter().enumerate() {
        if map.regions[label].is_some() {
            refit(map, label as u32, pixels, depth, cfg, seed);
        }
    }
}

/// A committed split, with everything needed to recheck its predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvent {
    pub parent: u32,
    pub children: [u32; 2],
    pub erosion_rounds: usize,
    pub parent_pixels: Vec<usize>,
    /// Pixels of the two eroded cores the planes were fitted on.
    pub cores: [Vec<usize>; 2],
    pub parent_inlier_ratio: f64,
    pub core_inlier_ratios: [f64; 2],
    pub similarity: f64,
    /// `(r_i + r_j) / (2 r_k)`.
    pub ratio_gain: f64,
}

/// A committed merge of `absorbed` into `kept`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeEvent {
    pub kept: u32,
    pub absorbed: u32,
    pub planes: [RegionPlane; 2],
    pub inlier_ratios: [f64; 2],
    pub similarity: f64,
}

/// Binary erosion with a full 3x3 element; outside the grid counts as background.
fn erode(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    (0..mask.len())
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if !mask[i] || x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                return false;
            }
            (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| mask[yy * w + xx]))
        })
        .collect()
}

/// Result of eroding one region until it falls apart.
struct Cores {
    rounds: usize,
    cores: [Vec<usize>; 2],
}

/// Erodes the pixels of one region (global indices) up to `max_rounds`
/// times and returns the two largest components of at least `eta` pixels
/// at the first round that produces two or more.
fn erode_until_split(pixels: &[usize], width: usize, eta: usize, max_rounds: usize) -> Option<Cores> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for &i in pixels {
        let (x, y) = (i % width, i / width);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    // One pixel of padding keeps the box border as background.
    let bw = x1 - x0 + 3;
    let bh = y1 - y0 + 3;
    let to_local = |i: usize| (i / width - y0 + 1) * bw + (i % width - x0 + 1);
    let to_global = |j: usize| (j / bw + y0 - 1) * width + (j % bw + x0 - 1);
    let mut mask = vec![false; bw * bh];
    for &i in pixels {
        mask[to_local(i)] = true;
    }
    for round in 1..=max_rounds {
        mask = erode(&mask, bw, bh);
        if !mask.iter().any(|m| *m) {
            return None;
        }
        let mut big: Vec<Vec<usize>> = components(&mask, bw, bh).into_iter().filter(|c| c.len() >= eta).collect();
        if big.len() >= 2 {
            big.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
            let mut take = |k: usize| {
                let mut v: Vec<usize> = std::mem::take(&mut big[k]).into_iter().map(to_global).collect();
                v.sort_unstable();
                v
            };
            let a = take(0);
            let b = take(1);
            return Some(Cores { rounds: round, cores: [a, b] });
        }
    }
    None
}

/// Assigns every pixel of `pixels` to the geodesically nearest core
/// (4-connected BFS inside the region). Ties go to the first core.
fn assign_to_cores(pixels: &[usize], cores: &[Vec<usize>; 2], width: usize, height: usize) -> [Vec<usize>; 2] {
    let inside: std::collections::HashSet<usize> = pixels.iter().copied().collect();
    let mut owner: std::collections::HashMap<usize, u8> = std::collections::HashMap::with_capacity(pixels.len());
    let mut queue = VecDeque::new();
    for (k, core) in cores.iter().enumerate() {
        for &i in core {
            owner.insert(i, k as u8);
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let k = owner[&i];
        let (x, y) = (i % width, i / width);
        let mut nbrs = [usize::MAX; 4];
        if x > 0 {
            nbrs[0] = i - 1;
        }
        if x + 1 < width {
            nbrs[1] = i + 1;
        }
        if y > 0 {
            nbrs[2] = i - width;
        }
        if y + 1 < height {
            nbrs[3] = i + width;
        }
        for j in nbrs {
            if j != usize::MAX && inside.contains(&j) && !owner.contains_key(&j) {
                owner.insert(j, k);
                queue.push_back(j);
            }
        }
    }
    let mut out = [Vec::new(), Vec::new()];
    for &i in pixels {
        // A region is connected, so every pixel is reached.
        out[owner.get(&i).copied().unwrap_or(0) as usize].push(i);
    }
    out
}

/// Split predicate: the two core planes differ (similarity ≤ σ) and the
/// inlier ratios improve by at least γ.
pub fn split_predicate(similarity: f64, r_i: f64, r_j: f64, r_k: f64, cfg: &RegionConfig) -> (bool, f64) {
    let gain = if r_k > 0.0 { (r_i + r_j) / (2.0 * r_k) } else { f64::INFINITY };
    (similarity <= cfg.sigma && gain >= cfg.gamma, gain)
}

/// Erodes every planar region and commits splits that pass
/// [`split_predicate`]. Children are examined again.
pub fn erode_regions(map: &mut RegionMap, depth: &RelativeDepth, cfg: &RegionConfig, seed: u64) -> Vec<SplitEvent> {
    let mut events = Vec::new();
    let mut work: VecDeque<u32> = map.live_regions().filter(|r| r.plane.is_some()).map(|r| r.id).collect();
    while let Some(label) = work.pop_front() {
        let Some(rec) = map.record(label).cloned() else { continue };
        let Some(_) = rec.plane else { continue };
        let pixels = map.pixels_of(label);
        let Some(Cores { rounds, cores }) = erode_until_split(&pixels, map.width, cfg.eta, cfg.max_erosion_rounds) else {
            continue;
        };
        let (Ok(fi), Ok(fj)) = (
            fit_region_plane(&cores[0], depth, cfg, seed),
            fit_region_plane(&cores[1], depth, cfg, seed),
        ) else {
            continue;
        };
        let sim = plane_similarity(&fi.plane, &fj.plane, cfg.depth_penalty_similarity);
        let (commit, gain) = split_predicate(sim, fi.inlier_ratio, fj.inlier_ratio, rec.inlier_ratio, cfg);
        if !commit {
            continue;
        }
        let parts = assign_to_cores(&pixels, &cores, map.width, map.height);
        let child = map.push_region(parts[1].len());
        for &i in &parts[1] {
            map.labels[i] = child;
        }
        refit(map, label, &parts[0], depth, cfg, seed);
        refit(map, child, &parts[1], depth, cfg, seed);
        log::debug!("split region {label} into {label} and {child} (sim {sim:.3}, gain {gain:.3})");
        events.push(SplitEvent {
            parent: label,
            children: [label, child],
            erosion_rounds: rounds,
            parent_pixels: pixels,
            cores,
            parent_inlier_ratio: rec.inlier_ratio,
            core_inlier_ratios: [fi.inlier_ratio, fj.inlier_ratio],
            similarity: sim,
            ratio_gain: gain,
        });
        work.push_back(label);
        work.push_back(child);
    }
    events
}

/// Pairs of planar regions whose one-step (3x3) dilations touch, i.e. with
/// pixels at Chebyshev distance at most 2. Returned in ascending order.
pub fn adjacent_pairs(map: &RegionMap) -> BTreeSet<(u32, u32)> {
    let (w, h) = (map.width, map.height);
    let mut pairs = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = map.labels[y * w + x];
            if a >= UNASSIGNED {
                continue;
            }
            for yy in y..(y + 3).min(h) {
                let xs = if yy == y { x + 1 } else { x.saturating_sub(2) };
                for xx in xs..(x + 3).min(w) {
                    let b = map.labels[yy * w + xx];
                    if b < UNASSIGNED && b != a {
                        pairs.insert((a.min(b), a.max(b)));
                    }
                }
            }
        }
    }
    pairs
}

/// Merge predicate: similar planes (≥ σ) and both inlier ratios ≥ κ.
pub fn merge_predicate(u: &RegionRecord, v: &RegionRecord, cfg: &RegionConfig) -> Option<f64> {
    let (pu, pv) = (u.plane?, v.plane?);
    let sim = plane_similarity(&pu, &pv, cfg.depth_penalty_similarity);
    (sim >= cfg.sigma && u.inlier_ratio >= cfg.kappa && v.inlier_ratio >= cfg.kappa).then_some(sim)
}

/// Repeatedly merges the first adjacent pair (ascending labels) that passes
/// [`merge_predicate`], refitting after each merge, until none does.
pub fn dilate_merge(map: &mut RegionMap, depth: &RelativeDepth, cfg: &RegionConfig, seed: u64) -> Vec<MergeEvent> {
    let mut events = Vec::new();
    loop {
        let pick = adjacent_pairs(map).into_iter().find_map(|(u, v)| {
            let (ru, rv) = (map.record(u)?, map.record(v)?);
            merge_predicate(ru, rv, cfg).map(|sim| (u, v, sim))
        });
        let Some((u, v, sim)) = pick else { break };
        let (ru, rv) = (map.record(u).cloned().unwrap(), map.record(v).cloned().unwrap());
        for l in map.labels.iter_mut() {
            if *l == v {
                *l = u;
            }
        }
        map.regions[v as usize] = None;
        let pixels = map.pixels_of(u);
        refit(map, u, &pixels, depth, cfg, seed);
        log::debug!("merged region {v} into {u} (sim {sim:.3})");
        events.push(MergeEvent {
            kept: u,
            absorbed: v,
            planes: [ru.plane.unwrap(), rv.plane.unwrap()],
            inlier_ratios: [ru.inlier_ratio, rv.inlier_ratio],
            similarity: sim,
        });
    }
    events
}

const NEIGHBORS_8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Absorbs edge and unassigned pixels into an 8-adjacent region when the
/// pixel lies within δ of the region plane and the region's inlier ratio is
/// at least κ; the closest plane wins. Sweeps are synchronous and repeat
/// until nothing changes. Returns the number of absorbed pixels.
pub fn filter_boundary_pixels(map: &mut RegionMap, depth: &RelativeDepth, cfg: &RegionConfig) -> usize {
    let (w, h) = (map.width, map.height);
    let eligible: Vec<Option<RegionPlane>> = map
        .regions
        .iter()
        .map(|r| r.as_ref().filter(|r| r.inlier_ratio >= cfg.kappa).and_then(|r| r.plane))
        .collect();
    let neighbors = |i: usize| {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        NEIGHBORS_8.iter().filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64).then(|| ny as usize * w + nx as usize)
        })
    };
    let mut frontier: BTreeSet<usize> = (0..w * h)
        .filter(|&i| map.labels[i] >= UNASSIGNED && neighbors(i).any(|j| map.labels[j] < UNASSIGNED))
        .collect();
    let mut total = 0;
    while !frontier.is_empty() {
        let updates: Vec<(usize, u32)> = frontier
            .iter()
            .filter_map(|&i| {
                let p = depth.point(i)?;
                let mut best: Option<(f64, u32)> = None;
                for j in neighbors(i) {
                    let l = map.labels[j];
                    if l >= UNASSIGNED {
                        continue;
                    }
                    let Some(plane) = eligible[l as usize] else { continue };
                    let dist = plane.distance(&p);
                    if dist <= cfg.delta && best.is_none_or(|(d, bl)| dist < d || (dist == d && l < bl)) {
                        best = Some((dist, l));
                    }
                }
                best.map(|(_, l)| (i, l))
            })
            .collect();
        let mut next = BTreeSet::new();
        for &(i, l) in &updates {
            map.labels[i] = l;
        }
        for &(i, _) in &updates {
            for j in neighbors(i) {
                if map.labels[j] >= UNASSIGNED {
                    next.insert(j);
                }
            }
        }
        total += updates.len();
        frontier = next;
    }
    if total > 0 {
        let mut counts = vec![0usize; map.regions.len()];
        for &l in &map.labels {
            if l < UNASSIGNED {
                counts[l as usize] += 1;
            }
        }
        for (rec, c) in map.regions.iter_mut().zip(counts) {
            if let Some(r) = rec {
                r.pixel_count = c;
            }
        }
    }
    total
}

/// Keeps the anchors that share `p`'s region; an unlabelled `p` keeps all.
pub fn filter_anchors_by_region(p: (usize, usize), anchors: &[(usize, usize)], map: &RegionMap) -> Vec<(usize, usize)> {
    match map.label_at(p.0, p.1) {
        None => anchors.to_vec(),
        Some(l) => anchors.iter().copied().filter(|&(x, y)| map.label_at(x, y) == Some(l)).collect(),
    }
}

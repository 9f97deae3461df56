//! PatchMatch over plane hypotheses for every view of a scene.
//!
//! Each iteration first recomputes, per view, the cost-based visibility
//! weights of the current hypotheses, restores weights that pass the
//! round-trip reprojection test and classifies pixels as reliable. Then the
//! red and black checkerboard phases run: a pixel gathers plane candidates
//! from the other colour, keeps the cheapest, and refines it with random
//! and perturbed candidates. All views finish an iteration before any view
//! starts the next, so restoration always reads a consistent set of depth
//! maps.
//!
//! Within one iteration the cost function is fixed, so the stored cost of
//! every pixel is non-increasing from the iteration baseline onwards.

mod anchors;
mod constraints;
mod cost_eval;
mod sampling;

pub use anchors::{classify_reliability, search_anchors, sector_of, Anchor, AnchorSet, MAX_SECTORS};
pub use constraints::{
    aggregate_depth_interval, combine_extremes, source_center, view_extremes, DepthInterval, NormalConstraint,
};
pub use cost_eval::{aggregate_with_fallback, unweighted_fallback, PixelCost, SourceView};
pub use sampling::{cone_perturb, facing_normal, sample_interval, unit_sphere};

use std::time::Instant;

use nalgebra::{Point2, Vector3};
use rand::Rng;

use crate::camera::CameraModel;
use crate::config::{Ablation, AnchorVisibilityTest, Config};
use crate::cost::CostValue;
use crate::edge_prior::{filter_anchors_by_region, RegionPrior};
use crate::error::PipelineError;
use crate::geometry::{PlaneHypothesis, ViewPair};
use crate::par;
use crate::raster::{DepthMapBuffer, GrayImage, NormalMap};
use crate::rng;
use crate::scene_io::Scene;
use crate::visibility::{init_view_weights, restore_visibility, RestoreInputs, VisibilityMap};

const TAG_INIT: u64 = 0;
const TAG_REFINE: u64 = 1;

/// Propagation directions; diagonal samples sit one pixel off the diagonal
/// so that every sample has the opposite checkerboard colour.
const DIRECTIONS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];

fn direction_offset((dx, dy): (i64, i64), k: i64) -> (i64, i64) {
    match (dx, dy) {
        (0, _) | (_, 0) => (dx * k, dy * k),
        (1, 1) | (-1, -1) => (dx * (k + 1), dy * k),
        _ => (dx * k, dy * (k + 1)),
    }
}

/// What to record while running. Recording is off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceOptions {
    /// Keep the per-pixel cost map at each iteration baseline and after each phase.
    pub costs: bool,
    /// Record constraint and anchor samples for pixels whose index is a
    /// multiple of this stride; 0 records none.
    pub sample_stride: usize,
}

/// Cost maps of one view during one iteration.
#[derive(Debug, Clone)]
pub struct PhaseCosts {
    pub view: usize,
    pub iteration: usize,
    pub baseline: Vec<f32>,
    pub after_red: Vec<f32>,
    pub after_black: Vec<f32>,
}

/// A hypothesis accepted while the normal constraint was active.
#[derive(Debug, Clone)]
pub struct ConstraintSample {
    pub view: usize,
    pub pixel: usize,
    pub iteration: usize,
    pub constraint: NormalConstraint,
    pub normal: Vector3<f64>,
}

/// The anchor chain of one unreliable pixel.
#[derive(Debug, Clone)]
pub struct AnchorSample {
    pub view: usize,
    pub pixel: usize,
    pub iteration: usize,
    /// Sector search result with the reliability of each anchor.
    pub searched: Vec<(Anchor, bool)>,
    /// Anchors sharing the pixel's region.
    pub in_region: Vec<(usize, usize)>,
    /// Anchors used for each source view.
    pub per_view: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub costs: Vec<PhaseCosts>,
    pub constraints: Vec<ConstraintSample>,
    pub anchors: Vec<AnchorSample>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Depth search range `(min, max)`.
    pub depth_range: (f64, f64),
    pub trace: TraceOptions,
}

impl RunOptions {
    pub fn new(depth_range: (f64, f64)) -> Self {
        Self {
            depth_range,
            trace: TraceOptions::default(),
        }
    }
}

/// Final state of one view. Normals are in the view's camera frame.
#[derive(Debug, Clone)]
pub struct ViewResult {
    pub depth: DepthMapBuffer,
    pub normals: NormalMap,
    pub costs: Vec<f32>,
    /// Cost-based weights of the last iteration, before restoration.
    pub initial_visibility: VisibilityMap,
    /// Weights used in the last iteration.
    pub visibility: VisibilityMap,
    /// Final cost below the reliability threshold.
    pub reliable: Vec<bool>,
    pub prior: Option<RegionPrior>,
    /// Ablation actually applied, after any fallback.
    pub ablation: Ablation,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub views: Vec<ViewResult>,
    pub trace: Trace,
}

/// Settings of one iteration.
#[derive(Debug, Clone, Copy)]
struct Stage {
    iteration: usize,
    deform: bool,
    geometry: bool,
    restore: bool,
    /// Relative depth perturbation outside geometry mode.
    perturbation: f64,
}

impl Stage {
    fn new(t: usize, ab: &Ablation, cfg: &Config) -> Self {
        let e = &cfg.engine;
        Self {
            iteration: t,
            deform: ab.deformable_patches && t > e.warmup_iterations,
            geometry: ab.geometry_constraints && t >= e.normal_constraint_from,
            restore: ab.cross_view_prior && t >= e.restore_from,
            perturbation: (0.2 * 0.5f64.powi(t as i32 - 1)).max(0.005),
        }
    }
}

struct ViewCtx<'a> {
    index: usize,
    camera: &'a CameraModel,
    image: &'a GrayImage,
    sources: Vec<SourceView<'a>>,
    centers: Vec<Vector3<f64>>,
    width: usize,
    height: usize,
}

impl ViewCtx<'_> {
    fn ray(&self, pixel: usize) -> Vector3<f64> {
        self.camera.pixel_ray(&Point2::new((pixel % self.width) as f64, (pixel / self.width) as f64))
    }
}

struct ViewState {
    hyps: Vec<PlaneHypothesis>,
    costs: Vec<f64>,
    initial_vis: VisibilityMap,
    vis: VisibilityMap,
    reliable: Vec<bool>,
    ablation: Ablation,
    prior: Option<RegionPrior>,
}

struct Update {
    pixel: usize,
    hyp: PlaneHypothesis,
    cost: f64,
    sample: Option<ConstraintSample>,
}

/// Runs the full pipeline. `mono` holds one optional monocular depth map per view.
pub fn run_pipeline(scene: &Scene, mono: &[Option<DepthMapBuffer>], cfg: &Config, opts: &RunOptions) -> Result<PipelineOutput, PipelineError> {
    cfg.validate()?;
    let n = scene.len();
    if n < 2 {
        return Err(PipelineError::TooFewViews(n));
    }
    if mono.len() != n {
        return Err(PipelineError::Config(format!("{} monocular maps for {n} views", mono.len())));
    }
    let (lo, hi) = opts.depth_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(PipelineError::Config(format!("invalid depth range ({lo}, {hi})")));
    }
    for (i, (cam, img)) in scene.cameras.iter().zip(&scene.images).enumerate() {
        if (cam.width, cam.height) != (img.width(), img.height()) {
            return Err(PipelineError::InvalidView {
                view: i,
                message: format!("image {}x{} but camera {}x{}", img.width(), img.height(), cam.width, cam.height),
            });
        }
    }

    let contexts: Vec<ViewCtx<'_>> = (0..n)
        .map(|i| {
            let camera = &scene.cameras[i];
            let sources: Vec<SourceView<'_>> = (0..n)
                .filter(|&j| j != i)
                .map(|j| SourceView {
                    index: j,
                    camera: &scene.cameras[j],
                    image: &scene.images[j],
                    pair: ViewPair::new(camera, &scene.cameras[j]),
                })
                .collect();
            let centers = sources.iter().map(|s| source_center(&s.pair)).collect();
            ViewCtx {
                index: i,
                camera,
                image: &scene.images[i],
                sources,
                centers,
                width: camera.width,
                height: camera.height,
            }
        })
        .collect();

    let mut states: Vec<ViewState> = contexts
        .iter()
        .map(|ctx| init_state(ctx, mono[ctx.index].as_ref(), cfg, opts))
        .collect();

    let mut trace = Trace::default();
    for t in 1..=cfg.engine.iterations {
        let started = Instant::now();
        let depths: Vec<DepthMapBuffer> = states.iter().zip(&contexts).map(|(s, c)| depth_map(c, s)).collect();
        for (ctx, state) in contexts.iter().zip(states.iter_mut()) {
            let stage = Stage::new(t, &state.ablation, cfg);
            begin_iteration(ctx, state, &stage, &depths, cfg, opts, &mut trace);
            run_phases(ctx, state, &stage, cfg, opts, &mut trace);
        }
        let mean = states.iter().map(|s| s.costs.iter().sum::<f64>() / s.costs.len() as f64).sum::<f64>() / n as f64;
        log::info!("iteration {t}/{}: mean cost {mean:.4} ({:.1?})", cfg.engine.iterations, started.elapsed());
    }

    let views = contexts
        .iter()
        .zip(states)
        .map(|(ctx, s)| {
            let mut normals = NormalMap::new(ctx.width, ctx.height);
            for (i, h) in s.hyps.iter().enumerate() {
                normals.set(i % ctx.width, i / ctx.width, &h.normal);
            }
            ViewResult {
                depth: depth_map(ctx, &s),
                normals,
                costs: s.costs.iter().map(|&c| c as f32).collect(),
                reliable: classify_reliability(&s.costs, cfg.engine.tau_rel),
                initial_visibility: s.initial_vis,
                visibility: s.vis,
                prior: s.prior,
                ablation: s.ablation,
            }
        })
        .collect();
    Ok(PipelineOutput { views, trace })
}

/// Seed of the region prior of view `view`.
pub fn prior_seed(seed: u64, view: usize) -> u64 {
    rng::mix(&[seed, view as u64])
}

fn depth_map(ctx: &ViewCtx<'_>, s: &ViewState) -> DepthMapBuffer {
    DepthMapBuffer::from_values(ctx.width, ctx.height, s.hyps.iter().map(|h| h.depth as f32).collect())
}

fn init_state(ctx: &ViewCtx<'_>, mono: Option<&DepthMapBuffer>, cfg: &Config, opts: &RunOptions) -> ViewState {
    let (w, h) = (ctx.width, ctx.height);
    let mut ablation = cfg.ablation;
    let mut prior = None;
    if ablation.edge_prior {
        match mono {
            Some(m) if (m.width(), m.height()) == (w, h) => {
                prior = Some(RegionPrior::build(m, ctx.image, &cfg.region, prior_seed(cfg.seed, ctx.index)));
            }
            Some(m) => {
                log::warn!(
                    "view {}: monocular depth is {}x{}, image is {w}x{h}; using conventional PatchMatch",
                    ctx.index,
                    m.width(),
                    m.height()
                );
                ablation = Ablation::CONVENTIONAL;
            }
            None => {
                log::warn!("view {}: no monocular depth; using conventional PatchMatch", ctx.index);
                ablation = Ablation::CONVENTIONAL;
            }
        }
    }
    let (lo, hi) = opts.depth_range;
    let hyps = (0..w * h)
        .map(|i| {
            let mut r = rng::stream(&[cfg.seed, ctx.index as u64, i as u64, 0, TAG_INIT]);
            let ray = ctx.ray(i);
            PlaneHypothesis {
                normal: facing_normal(&mut r, &ray),
                depth: r.gen_range(lo..=hi),
            }
        })
        .collect();
    ViewState {
        hyps,
        costs: vec![CostValue::MAX.value(); w * h],
        initial_vis: VisibilityMap::zeros(w, h, ctx.sources.len()),
        vis: VisibilityMap::zeros(w, h, ctx.sources.len()),
        reliable: vec![false; w * h],
        ablation,
        prior,
    }
}

/// Recomputes weights, restoration, reliability and the baseline costs.
fn begin_iteration(
    ctx: &ViewCtx<'_>,
    state: &mut ViewState,
    stage: &Stage,
    depths: &[DepthMapBuffer],
    cfg: &Config,
    opts: &RunOptions,
    trace: &mut Trace,
) {
    let (w, h, ns) = (ctx.width, ctx.height, ctx.sources.len());
    let ones = vec![1.0f32; ns];
    let rows: Vec<(Vec<CostValue>, Vec<f32>, Vec<f64>)> = par::map_range(cfg.exec, h, |y| {
        let mut costs = Vec::with_capacity(w * ns);
        let mut weights = Vec::with_capacity(w * ns);
        let mut conv = Vec::with_capacity(w);
        for x in 0..w {
            let pc = PixelCost::central(ctx.image, (x, y), &ones);
            let c = pc.view_costs(&ctx.sources, &state.hyps[y * w + x]);
            let wts = init_view_weights(&c, &cfg.visibility);
            conv.push(aggregate_with_fallback(&c, &wts));
            weights.extend(wts.iter().map(|&v| v as f32));
            costs.extend(c);
        }
        (costs, weights, conv)
    });
    let mut central = Vec::with_capacity(w * h * ns);
    let mut weights = Vec::with_capacity(w * h * ns);
    let mut conv = Vec::with_capacity(w * h);
    for (c, wt, cv) in rows {
        central.extend(c);
        weights.extend(wt);
        conv.extend(cv);
    }
    let initial = VisibilityMap::from_weights(w, h, ns, weights);
    state.vis = if stage.restore {
        let inputs = RestoreInputs {
            reference: ctx.camera,
            reference_depth: &depths[ctx.index],
            sources: ctx.sources.iter().map(|s| (s.camera, &depths[s.index])).collect(),
        };
        restore_visibility(&initial, &inputs, &cfg.visibility, cfg.exec)
    } else {
        initial.clone()
    };
    state.initial_vis = initial;
    state.reliable = classify_reliability(&conv, cfg.engine.tau_rel);

    let st: &ViewState = state;
    let rows: Vec<(Vec<f64>, Vec<AnchorSample>)> = par::map_range(cfg.exec, h, |y| {
        let mut out = Vec::with_capacity(w);
        let mut samples = Vec::new();
        for x in 0..w {
            let p = y * w + x;
            let record = opts.trace.sample_stride > 0 && p % opts.trace.sample_stride == 0;
            let (pc, sample) = pixel_cost(ctx, st, stage, (x, y), cfg, record);
            samples.extend(sample);
            let cost = if pc.has_anchors() {
                pc.aggregate(&ctx.sources, &st.hyps[p])
            } else {
                let wts: Vec<f64> = st.vis.weights_at(p).iter().map(|&v| v as f64).collect();
                aggregate_with_fallback(&central[p * ns..(p + 1) * ns], &wts)
            };
            out.push(cost);
        }
        (out, samples)
    });
    state.costs.clear();
    for (c, s) in rows {
        state.costs.extend(c);
        trace.anchors.extend(s.into_iter().map(|mut a| {
            a.view = ctx.index;
            a.iteration = stage.iteration;
            a
        }));
    }
}

/// Cost function of pixel `p` for the current iteration.
fn pixel_cost(ctx: &ViewCtx<'_>, st: &ViewState, stage: &Stage, p: (usize, usize), cfg: &Config, record: bool) -> (PixelCost, Option<AnchorSample>) {
    let pixel = p.1 * ctx.width + p.0;
    let weights = st.vis.weights_at(pixel);
    if !stage.deform || st.reliable[pixel] {
        return (PixelCost::central(ctx.image, p, weights), None);
    }
    let e = &cfg.engine;
    let r_max = ctx.width.min(ctx.height) as f64 / 4.0;
    let searched = search_anchors(p, &st.reliable, ctx.width, ctx.height, e.sectors, e.sector_step, r_max);
    let positions: Vec<(usize, usize)> = searched.iter().map(Anchor::pos).collect();
    let in_region = match (&st.prior, st.ablation.edge_prior) {
        (Some(prior), true) => filter_anchors_by_region(p, &positions, &prior.map),
        _ => positions.clone(),
    };
    let full = (1u32 << in_region.len()) - 1;
    let masks: Vec<u16> = (0..ctx.sources.len())
        .map(|j| {
            if !st.ablation.cross_view_prior {
                return full as u16;
            }
            match cfg.visibility.anchor_test {
                AnchorVisibilityTest::AnchorPixel => in_region
                    .iter()
                    .enumerate()
                    .filter(|(_, &(x, y))| st.vis.weight(y * ctx.width + x, j) > 0.0)
                    .fold(0u16, |m, (k, _)| m | (1 << k)),
                AnchorVisibilityTest::OwnerPixel => {
                    if weights[j] > 0.0 {
                        full as u16
                    } else {
                        0
                    }
                }
            }
        })
        .collect();
    let sample = record.then(|| AnchorSample {
        view: ctx.index,
        pixel,
        iteration: stage.iteration,
        searched: searched.iter().map(|a| (*a, st.reliable[a.y * ctx.width + a.x])).collect(),
        in_region: in_region.clone(),
        per_view: masks
            .iter()
            .map(|m| in_region.iter().enumerate().filter(|(k, _)| m & (1 << k) != 0).map(|(_, &a)| a).collect())
            .collect(),
    });
    (PixelCost::deformable(ctx.image, p, weights, &in_region, &masks, e.lambda), sample)
}

fn run_phases(ctx: &ViewCtx<'_>, state: &mut ViewState, stage: &Stage, cfg: &Config, opts: &RunOptions, trace: &mut Trace) {
    let (w, h) = (ctx.width, ctx.height);
    let snapshot = |s: &ViewState| s.costs.iter().map(|&c| c as f32).collect::<Vec<f32>>();
    let baseline = opts.trace.costs.then(|| snapshot(state));
    let mut after = Vec::new();
    for phase in 0..2 {
        let st: &ViewState = state;
        let rows: Vec<Vec<Update>> = par::map_range(cfg.exec, h, |y| {
            ((y + phase) % 2..w)
                .step_by(2)
                .map(|x| update_pixel(ctx, st, stage, (x, y), cfg, opts))
                .collect()
        });
        for u in rows.into_iter().flatten() {
            state.hyps[u.pixel] = u.hyp;
            state.costs[u.pixel] = u.cost;
            trace.constraints.extend(u.sample);
        }
        if opts.trace.costs {
            after.push(snapshot(state));
        }
    }
    if let Some(baseline) = baseline {
        let after_black = after.pop().unwrap_or_default();
        let after_red = after.pop().unwrap_or_default();
        trace.costs.push(PhaseCosts {
            view: ctx.index,
            iteration: stage.iteration,
            baseline,
            after_red,
            after_black,
        });
    }
}

/// Propagation followed by refinement for one pixel, reading only `st`.
fn update_pixel(ctx: &ViewCtx<'_>, st: &ViewState, stage: &Stage, p: (usize, usize), cfg: &Config, opts: &RunOptions) -> Update {
    let (w, h) = (ctx.width as i64, ctx.height as i64);
    let pixel = p.1 * ctx.width + p.0;
    let e = &cfg.engine;
    let (lo, hi) = opts.depth_range;
    let (pc, _) = pixel_cost(ctx, st, stage, p, cfg, false);
    let ray = ctx.ray(pixel);
    let current = st.hyps[pixel];
    let weights = st.vis.weights_at(pixel);

    let constraint = stage.geometry.then(|| {
        let x = current.point(&ray);
        let visible = ctx.centers.iter().zip(weights).filter(|(_, &wt)| wt > 0.0).map(|(c, _)| *c);
        NormalConstraint::new(&x, visible)
    });
    let admissible = |n: &Vector3<f64>| sampling::admissible(n, &ray, constraint.as_ref());

    let mut best = current;
    let mut best_cost = st.costs[pixel];
    let consider = |cand: PlaneHypothesis, best: &mut PlaneHypothesis, best_cost: &mut f64| {
        let c = pc.aggregate(&ctx.sources, &cand);
        if c < *best_cost {
            *best = cand;
            *best_cost = c;
        }
    };

    for dir in DIRECTIONS {
        let mut pick: Option<(usize, f64)> = None;
        for &k in &e.propagation_offsets {
            let (dx, dy) = direction_offset(dir, k as i64);
            let (qx, qy) = (p.0 as i64 + dx, p.1 as i64 + dy);
            if qx < 0 || qy < 0 || qx >= w || qy >= h {
                continue;
            }
            let q = (qy * w + qx) as usize;
            if pick.is_none_or(|(_, c)| st.costs[q] < c) {
                pick = Some((q, st.costs[q]));
            }
        }
        let Some((q, _)) = pick else { continue };
        let hq = st.hyps[q];
        let Some(d) = hq.depth_along(&ctx.ray(q), &ray) else { continue };
        if !(lo..=hi).contains(&d) || !admissible(&hq.normal) {
            continue;
        }
        consider(PlaneHypothesis { normal: hq.normal, depth: d }, &mut best, &mut best_cost);
    }

    let mut r = rng::stream(&[cfg.seed, ctx.index as u64, pixel as u64, stage.iteration as u64, TAG_REFINE]);
    let (n_cur, d_cur) = (best.normal, best.depth);
    let attempts = e.normal_attempts;
    let n_rand = sampling::rejection(attempts, || facing_normal(&mut r, &ray), admissible).unwrap_or(n_cur);
    let cone = e.normal_cone_deg.to_radians();
    let n_pert = sampling::rejection(attempts, || cone_perturb(&mut r, &n_cur, cone), admissible).unwrap_or(n_cur);
    let d_rand = r.gen_range(lo..=hi);
    let d_pert = if stage.geometry {
        let pairs: Vec<&ViewPair> = ctx
            .sources
            .iter()
            .zip(weights)
            .filter(|(_, &wt)| wt > 0.0)
            .map(|(s, _)| &s.pair)
            .collect();
        let pt = Point2::new(p.0 as f64, p.1 as f64);
        let iv = aggregate_depth_interval(&pt, d_cur, &pairs, e.alpha, e.beta, e.mu, e.fallback_interval, (lo, hi));
        sample_interval(&mut r, &iv, d_cur)
    } else {
        let s = stage.perturbation;
        (d_cur * (1.0 + r.gen_range(-s..=s))).clamp(lo, hi)
    };
    for (d, n) in [
        (d_pert, n_pert),
        (d_rand, n_rand),
        (d_cur, n_pert),
        (d_pert, n_cur),
        (d_cur, n_rand),
        (d_rand, n_cur),
    ] {
        // The sampling fallback is the current normal, which the constraint
        // rebuilt at the current point may reject.
        if !admissible(&n) {
            continue;
        }
        consider(PlaneHypothesis { normal: n, depth: d }, &mut best, &mut best_cost);
    }

    let record = opts.trace.sample_stride > 0 && pixel.is_multiple_of(opts.trace.sample_stride);
    let sample = match constraint {
        Some(c) if record && best != current => Some(ConstraintSample {
            view: ctx.index,
            pixel,
            iteration: stage.iteration,
            constraint: c,
            normal: best.normal,
        }),
        _ => None,
    };
    Update {
        pixel,
        hyp: best,
        cost: best_cost,
        sample,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_offsets_have_opposite_colour() {
        for dir in DIRECTIONS {
            for k in [1, 3, 5] {
                let (dx, dy) = direction_offset(dir, k);
                assert_eq!((dx + dy).rem_euclid(2), 1, "{dir:?} {k}");
                assert!(dx.signum() == dir.0 && dy.signum() == dir.1);
            }
        }
    }

    #[test]
    fn stage_schedule() {
        let cfg = Config::default();
        let s = |t| Stage::new(t, &Ablation::FULL, &cfg);
        assert!(!s(1).deform && !s(1).restore && !s(1).geometry);
        assert!(!s(2).deform && s(2).restore && !s(2).geometry);
        assert!(s(3).deform && s(3).restore && s(3).geometry);
        let c = Stage::new(5, &Ablation::CONVENTIONAL, &cfg);
        assert!(!c.deform && !c.restore && !c.geometry);
        assert!((s(1).perturbation - 0.2).abs() < 1e-12);
        assert_eq!(s(20).perturbation, 0.005);
    }
}

//! Ray-cast synthetic scenes with exact ground truth.
//!
//! Surfaces are textured quads. Intensities depend only on the surface
//! point, so every view sees the same albedo; images carry a small amount
//! of per-view noise and are quantised to 8 bits like real captures.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::cloud::{CloudPoint, PointCloud};
use crate::error::{EvalError, IoError};
use crate::geometry::{project_point, unproject};
use crate::raster::{DepthMapBuffer, GrayImage, NormalMap};
use crate::rng;
use crate::scene_io::{
    luminance, mono_depth_path, write_cameras, write_depth_map, write_gray_png, write_point_cloud, CameraEntry, Scene,
    CAMERA_FILE, IMAGE_DIR, MONO_DEPTH_DIR,
};

pub const GT_DEPTH_DIR: &str = "gt_depth";
pub const VISIBILITY_DIR: &str = "visibility";
pub const TEXTURELESS_DIR: &str = "textureless";
pub const GT_POINTS_FILE: &str = "gt_points.ply";
pub const META_FILE: &str = "scene.toml";

/// Amplitude of the uniform per-view image noise; below half a quantisation
/// step, so flat panels painted on an exact grey level stay constant.
const IMAGE_NOISE: f64 = 0.001;

/// Albedo of an exact 8-bit grey level.
fn grey_level(v: u8) -> f64 {
    v as f64 / 255.0
}
/// Reference resolution the scene layouts are designed at.
const BASE_WIDTH: f64 = 640.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    TexturedPlane,
    TwoPlaneL,
    TexturelessWall,
    OcclusionBox,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [
        SceneKind::TexturedPlane,
        SceneKind::TwoPlaneL,
        SceneKind::TexturelessWall,
        SceneKind::OcclusionBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::TexturedPlane => "textured-plane",
            SceneKind::TwoPlaneL => "two-plane-L",
            SceneKind::TexturelessWall => "textureless-wall",
            SceneKind::OcclusionBox => "occlusion-box",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| EvalError::UnknownScene(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            width: 640,
            height: 480,
            seed: 0,
        }
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Albedo and a textureless flag at local surface coordinates (scene units).
type Paint = Box<dyn Fn(f64, f64) -> (f64, bool) + Send + Sync>;

struct Quad {
    origin: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    paint: Paint,
}

struct Hit {
    t: f64,
    quad: usize,
    a: f64,
    b: f64,
}

impl Quad {
    fn new(origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>, paint: Paint) -> Self {
        Self { origin, u, v, paint }
    }

    fn normal(&self) -> Vector3<f64> {
        self.u.cross(&self.v).normalize()
    }

    /// Ray parameter and local coordinates of the intersection with `o + t dir`.
    fn intersect(&self, o: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let n = self.u.cross(&self.v);
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(self.origin - o)) / denom;
        if !(t > 1e-9) {
            return None;
        }
        let rel = o + dir * t - self.origin;
        let s = rel.dot(&self.u) / self.u.norm_squared();
        let r = rel.dot(&self.v) / self.v.norm_squared();
        ((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&r)).then(|| (t, s * self.u.norm(), r * self.v.norm()))
    }
}

fn cast(quads: &[Quad], o: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    quads
        .iter()
        .enumerate()
        .filter_map(|(i, q)| q.intersect(o, dir).map(|(t, a, b)| Hit { t, quad: i, a, b }))
        .min_by(|x, y| x.t.total_cmp(&y.t))
}

fn lattice(key: u64, ix: i64, iy: i64) -> f64 {
    (rng::mix(&[key, ix as u64, iy as u64]) >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(key: u64, a: f64, b: f64, cell: f64) -> f64 {
    let (fx, fy) = (a / cell, b / cell);
    let (ix, iy) = (fx.floor(), fy.floor());
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (tx, ty) = (smooth(fx - ix), smooth(fy - iy));
    let (ix, iy) = (ix as i64, iy as i64);
    let top = lattice(key, ix, iy) * (1.0 - tx) + lattice(key, ix + 1, iy) * tx;
    let bottom = lattice(key, ix, iy + 1) * (1.0 - tx) + lattice(key, ix + 1, iy + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Fractal noise centred on `base` with half-range `amp`; octave cells halve from `cell`.
fn texture(key: u64, base: f64, amp: f64, cell: f64, octaves: u32) -> impl Fn(f64, f64) -> f64 + Send + Sync {
    move |a, b| {
        let (mut sum, mut norm, mut weight, mut c) = (0.0, 0.0, 1.0, cell);
        for k in 0..octaves {
            sum += weight * value_noise(key.wrapping_add(k as u64), a, b, c);
            norm += weight;
            weight *= 0.6;
            c *= 0.5;
        }
        (base + amp * 2.0 * (sum / norm - 0.5)).clamp(0.0, 1.0)
    }
}

fn textured(key: u64, base: f64, amp: f64, cell: f64) -> Paint {
    let t = texture(key, base, amp, cell, 3);
    Box::new(move |a, b| (t(a, b), false))
}

/// Geometry and cameras of one scene.
struct Layout {
    quads: Vec<Quad>,
    f_ref: f64,
    f_src: f64,
    ring: f64,
    target: f64,
}

fn layout(spec: &SceneSpec) -> Layout {
    let s = BASE_WIDTH / spec.width as f64;
    let key = |k: u64| rng::mix(&[spec.seed, k]);
    match spec.kind {
        SceneKind::TexturedPlane => {
            let n = Vector3::new(0.2, -0.15, -1.0).normalize();
            let e1 = Vector3::y().cross(&n).normalize();
            let e2 = n.cross(&e1);
            let center = Vector3::new(0.0, 0.0, 5.0);
            Layout {
                quads: vec![Quad::new(
                    center - e1 * 8.0 - e2 * 8.0,
                    e1 * 16.0,
                    e2 * 16.0,
                    textured(key(1), 0.5, 0.42, 0.12 * s),
                )],
                f_ref: 520.0,
                f_src: 400.0,
                ring: 1.0,
                target: 5.0,
            }
        }
        SceneKind::TwoPlaneL => two_plane_l(spec, key(2)),
        SceneKind::TexturelessWall => textureless_wall(spec, key(3)),
        SceneKind::OcclusionBox => occlusion_box(spec, key(4)),
    }
}

/// Crease depth and wall slope of the two-plane scene.
const L_CREASE_Z: f64 = 5.6;
const L_SLOPE: f64 = 0.5;

fn two_plane_l(spec: &SceneSpec, key: u64) -> Layout {
    let f_ref = 520.0 * spec.width as f64 / BASE_WIDTH;
    // The neck is a 6 px band at the crease where albedo ramps smoothly across it.
    let neck_half = 3.0 * L_CREASE_Z / f_ref;
    let ramp = 0.5;
    let step_x = 1.5;
    let soft_l = texture(key, 0.0, 0.015, 0.2, 2);
    let soft_r = texture(key ^ 1, 0.0, 0.015, 0.2, 2);
    let albedo = move |x: f64, y: f64| -> f64 {
        let base = if y.abs() < neck_half && x.abs() < ramp {
            0.5 + 0.15 * x / ramp
        } else if x < 0.0 {
            0.35
        } else if x > step_x {
            0.69
        } else {
            0.65
        };
        let soft = if x < 0.0 { soft_l(x, y) } else { soft_r(x, y) };
        (base + soft).clamp(0.0, 1.0)
    };
    let albedo = std::sync::Arc::new(albedo);
    let w = 4.0;
    let half_h = 4.0;
    let left_origin = Vector3::new(-w, -half_h, L_CREASE_Z - L_SLOPE * w);
    let left_u = Vector3::new(w, 0.0, L_SLOPE * w);
    let right_origin = Vector3::new(0.0, -half_h, L_CREASE_Z);
    let right_u = Vector3::new(w, 0.0, -L_SLOPE * w);
    let v = Vector3::new(0.0, 2.0 * half_h, 0.0);
    let (lu, ru) = (left_u.norm(), right_u.norm());
    let al = albedo.clone();
    let ar = albedo;
    Layout {
        quads: vec![
            Quad::new(
                left_origin,
                left_u,
                v,
                Box::new(move |a, b| (al(-w + a * w / lu, -half_h + b), false)),
            ),
            Quad::new(
                right_origin,
                right_u,
                v,
                Box::new(move |a, b| (ar(a * w / ru, -half_h + b), false)),
            ),
        ],
        f_ref: 520.0,
        f_src: 400.0,
        ring: 1.0,
        target: L_CREASE_Z,
    }
}

/// Column of the crease in the reference image of a two-plane scene.
pub fn two_plane_crease_column(width: usize) -> f64 {
    (width as f64 - 1.0) / 2.0
}

fn textureless_wall(spec: &SceneSpec, key: u64) -> Layout {
    let (wd, ht) = (spec.width as f64, spec.height as f64);
    let f_ref = 520.0 * wd / BASE_WIDTH;
    let wall_z = 6.0;
    let pole_z = 4.0;
    let s = BASE_WIDTH / wd;
    // Image fractions mapped onto the wall plane as seen from the reference.
    let to_x = move |u: f64, z: f64| (u * wd - (wd - 1.0) / 2.0) * z / f_ref;
    let to_y = move |v: f64, z: f64| (v * ht - (ht - 1.0) / 2.0) * z / f_ref;
    // A grid of flat panels separated by thin textured strips; the two
    // inner columns run right up to the pole.
    let columns = [(0.03, 0.24), (0.27, 0.46), (0.54, 0.73), (0.76, 0.97)].map(|(l, r)| (to_x(l, wall_z), to_x(r, wall_z)));
    let rows = [(0.05, 0.47), (0.53, 0.95)].map(|(t, b)| (to_y(t, wall_z), to_y(b, wall_z)));
    let frame = texture(key, 0.5, 0.4, 0.12 * s, 3);
    let (x0, y0) = (-8.0, -6.0);
    let wall_paint: Paint = Box::new(move |a, b| {
        let (x, y) = (x0 + a, y0 + b);
        let in_panel = rows.iter().any(|&(t, b)| (t..=b).contains(&y)) && columns.iter().any(|&(l, r)| (l..=r).contains(&x));
        if in_panel {
            (grey_level(153), true)
        } else {
            (frame(a, b), false)
        }
    });
    // The pole shares the panels' grey, so its silhouette against them is
    // invisible in the images; thin textured bands give it matchable rows.
    let (pl, pr) = (to_x(0.46, pole_z), to_x(0.54, pole_z));
    let bands = texture(key ^ 7, 0.45, 0.4, 0.08 * s, 3);
    let (period, band) = (0.6, 0.12);
    let pole_paint: Paint = Box::new(move |a, b| {
        if b.rem_euclid(period) < band {
            (bands(a, b), false)
        } else {
            (grey_level(153), true)
        }
    });
    Layout {
        quads: vec![
            Quad::new(
                Vector3::new(pl, -4.0, pole_z),
                Vector3::new(pr - pl, 0.0, 0.0),
                Vector3::new(0.0, 8.0, 0.0),
                pole_paint,
            ),
            Quad::new(Vector3::new(x0, y0, wall_z), Vector3::new(16.0, 0.0, 0.0), Vector3::new(0.0, 12.0, 0.0), wall_paint),
        ],
        f_ref: 520.0,
        f_src: 400.0,
        ring: 1.0,
        target: wall_z,
    }
}

fn occlusion_box(spec: &SceneSpec, key: u64) -> Layout {
    let s = BASE_WIDTH / spec.width as f64;
    let wall_z = 6.0;
    let frame = texture(key, 0.5, 0.4, 0.12 * s, 3);
    let (x0, y0) = (-8.0, -6.0);
    let wall_paint: Paint = Box::new(move |a, b| {
        let (x, y) = (x0 + a, y0 + b);
        // Flat panels stay clear of the box's shadow in every view, so
        // occlusion is tested on texture and restoration on the panels.
        let side = (1.7..2.9).contains(&x.abs()) && y.abs() < 2.2;
        let band = (1.7..2.4).contains(&y.abs()) && x.abs() < 1.4;
        if side || band {
            (grey_level(140), true)
        } else {
            (frame(a, b), false)
        }
    });
    // Box: front face at z = 4.2, 1.2 x 1.2, 0.6 deep.
    let (hw, zf, depth) = (0.6, 4.2, 0.6);
    let c = |x: f64, y: f64, z: f64| Vector3::new(x, y, z);
    let side = |k: u64| textured(key ^ (100 + k), 0.45, 0.4, 0.06 * s);
    Layout {
        quads: vec![
            Quad::new(c(-hw, -hw, zf), c(2.0 * hw, 0.0, 0.0), c(0.0, 2.0 * hw, 0.0), side(0)),
            Quad::new(c(-hw, -hw, zf), c(0.0, 0.0, depth), c(0.0, 2.0 * hw, 0.0), side(1)),
            Quad::new(c(hw, -hw, zf), c(0.0, 0.0, depth), c(0.0, 2.0 * hw, 0.0), side(2)),
            Quad::new(c(-hw, -hw, zf), c(2.0 * hw, 0.0, 0.0), c(0.0, 0.0, depth), side(3)),
            Quad::new(c(-hw, hw, zf), c(2.0 * hw, 0.0, 0.0), c(0.0, 0.0, depth), side(4)),
            Quad::new(c(x0, y0, wall_z), c(16.0, 0.0, 0.0), c(0.0, 12.0, 0.0), wall_paint),
        ],
        f_ref: 520.0,
        f_src: 400.0,
        ring: 1.0,
        target: wall_z,
    }
}

/// Scene metadata written next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub name: SceneKind,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub depth_range: [f64; 2],
    /// Bounding-box diagonal of the ground-truth cloud.
    pub diameter: f64,
}

impl SceneMeta {
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        toml::from_str(&text).map_err(|e| IoError::Header {
            format: "scene.toml",
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = toml::to_string_pretty(self).expect("metadata serialises");
        std::fs::write(path, text).map_err(|e| IoError::io(path, e))
    }
}

/// A rendered scene with its ground truth.
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub names: Vec<String>,
    pub cameras: Vec<CameraModel>,
    pub images: Vec<GrayImage>,
    pub gt_depth: Vec<DepthMapBuffer>,
    /// Ground-truth normals in each camera frame.
    pub gt_normals: Vec<NormalMap>,
    /// Pixels whose surface has constant albedo.
    pub textureless: Vec<Vec<bool>>,
    /// `visibility[i][j][p]`: pixel `p` of view `i` is seen unoccluded by view `j`.
    pub visibility: Vec<Vec<Vec<bool>>>,
    pub gt_points: PointCloud,
    pub meta: SceneMeta,
}

pub fn generate_scene(spec: &SceneSpec) -> SyntheticScene {
    let lay = layout(spec);
    let (w, h) = (spec.width, spec.height);
    let scale = w as f64 / BASE_WIDTH;
    let k = |f: f64| CameraModel::intrinsics(f * scale, f * scale, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let target = Vector3::new(0.0, 0.0, lay.target);
    let up = Vector3::new(0.0, -1.0, 0.0);
    let r = lay.ring;
    let eyes = [
        (Vector3::zeros(), lay.f_ref),
        (Vector3::new(r, 0.0, 0.0), lay.f_src),
        (Vector3::new(-r, 0.0, 0.0), lay.f_src),
        (Vector3::new(0.0, r, 0.0), lay.f_src),
        (Vector3::new(0.0, -r, 0.0), lay.f_src),
    ];
    let cameras: Vec<CameraModel> = eyes
        .iter()
        .map(|(eye, f)| CameraModel::look_at(k(*f), *eye, target, up, w, h).expect("valid synthetic camera"))
        .collect();
    let names = (0..cameras.len()).map(|i| format!("view_{i:03}.png")).collect();

    let mut images = Vec::new();
    let mut gt_depth = Vec::new();
    let mut gt_normals = Vec::new();
    let mut textureless = Vec::new();
    for (vi, cam) in cameras.iter().enumerate() {
        let o = cam.center();
        let mut img = vec![0f32; w * h];
        let mut depth = vec![0f32; w * h];
        let mut valid = vec![false; w * h];
        let mut normals = NormalMap::new(w, h);
        let mut flat = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let dir = |px: f64, py: f64| cam.r.transpose() * cam.pixel_ray(&Point2::new(px, py));
                if let Some(hit) = cast(&lay.quads, &o, &dir(x as f64, y as f64)) {
                    depth[i] = hit.t as f32;
                    valid[i] = true;
                    let q = &lay.quads[hit.quad];
                    flat[i] = (q.paint)(hit.a, hit.b).1;
                    let mut n = cam.r * q.normal();
                    if n.dot(&cam.pixel_ray(&Point2::new(x as f64, y as f64))) > 0.0 {
                        n = -n;
                    }
                    normals.set(x, y, &n);
                }
                let mut acc = 0.0;
                for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                    if let Some(hit) = cast(&lay.quads, &o, &dir(x as f64 + dx, y as f64 + dy)) {
                        acc += (lay.quads[hit.quad].paint)(hit.a, hit.b).0;
                    }
                }
                let mut nr = rng::stream(&[spec.seed, 0x1_0000 + vi as u64, i as u64]);
                let v = (acc / 4.0 + nr.gen_range(-IMAGE_NOISE..=IMAGE_NOISE)).clamp(0.0, 1.0);
                let q = (v * 255.0).round() as u8;
                img[i] = luminance([q, q, q]);
            }
        }
        images.push(GrayImage::new(w, h, img).expect("image size"));
        gt_depth.push(DepthMapBuffer::with_mask(w, h, depth, valid));
        gt_normals.push(normals);
        textureless.push(flat);
    }

    let n = cameras.len();
    let visibility: Vec<Vec<Vec<bool>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..w * h)
                        .map(|p| {
                            let Some(d) = gt_depth[i].get(p % w, p / w) else { return false };
                            if i == j {
                                return true;
                            }
                            let x = unproject(&cameras[i], &Point2::new((p % w) as f64, (p / w) as f64), d as f64);
                            seen_from(&lay.quads, &cameras[j], &x)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let (gt_points, diameter) = ground_truth_cloud(&cameras, &gt_depth, &gt_normals, &visibility);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in &gt_depth {
        for (v, ok) in d.values().iter().zip(d.valid_mask()) {
            if *ok {
                lo = lo.min(*v as f64);
                hi = hi.max(*v as f64);
            }
        }
    }
    let meta = SceneMeta {
        name: spec.kind,
        seed: spec.seed,
        width: w,
        height: h,
        depth_range: [0.8 * lo, 1.2 * hi],
        diameter,
    };
    SyntheticScene {
        spec: *spec,
        names,
        cameras,
        images,
        gt_depth,
        gt_normals,
        textureless,
        visibility,
        gt_points,
        meta,
    }
}

/// `x` projects inside `cam` and nothing lies between it and the camera.
fn seen_from(quads: &[Quad], cam: &CameraModel, x: &Vector3<f64>) -> bool {
    let Ok((px, _)) = project_point(cam, x) else { return false };
    if !cam.contains(&px) {
        return false;
    }
    let o = cam.center();
    match cast(quads, &o, &(x - o)) {
        Some(hit) => hit.t >= 1.0 - 1e-6,
        None => true,
    }
}

/// Cameras that must see a surface point for it to enter the ground truth.
const MIN_OBSERVERS: usize = 3;

/// Surface points observed by at least [`MIN_OBSERVERS`] views, thinned on a
/// grid of 1/400 of the diameter. The diameter spans everything any view sees.
fn ground_truth_cloud(
    cameras: &[CameraModel],
    depths: &[DepthMapBuffer],
    normals: &[NormalMap],
    visibility: &[Vec<Vec<bool>>],
) -> (PointCloud, f64) {
    let mut raw = Vec::new();
    let mut observed = Vec::new();
    for (i, ((cam, d), nm)) in cameras.iter().zip(depths).zip(normals).enumerate() {
        for y in 0..cam.height {
            for x in 0..cam.width {
                if let Some(z) = d.get(x, y) {
                    let k = visibility[i].iter().filter(|v| v[y * cam.width + x]).count();
                    observed.push(k >= MIN_OBSERVERS);
                    let p = unproject(cam, &Point2::new(x as f64, y as f64), z as f64);
                    let n = cam.r.transpose() * nm.get(x, y);
                    raw.push((p, n));
                }
            }
        }
    }
    let (mut lo, mut hi) = (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY));
    for (p, _) in &raw {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let diameter = if raw.is_empty() { 0.0 } else { (hi - lo).norm() };
    let cell = (diameter / 400.0).max(1e-9);
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for ((p, n), _) in raw.into_iter().zip(observed).filter(|(_, o)| *o) {
        let key = ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64);
        if seen.insert(key) {
            points.push(CloudPoint {
                position: [p.x as f32, p.y as f32, p.z as f32],
                normal: [n.x as f32, n.y as f32, n.z as f32],
                color: None,
            });
        }
    }
    (PointCloud::new(points), diameter)
}

impl SyntheticScene {
    /// The scene as the reconstruction pipeline sees it.
    pub fn scene(&self) -> Scene {
        Scene {
            names: self.names.clone(),
            cameras: self.cameras.clone(),
            images: self.images.clone(),
            colors: self
                .images
                .iter()
                .map(|img| Some(img.values().iter().map(|v| [(v * 255.0).round() as u8; 3]).collect()))
                .collect(),
        }
    }

    /// Min-max normalised inverse ground-truth depth, standing in for a
    /// monocular estimate.
    pub fn mono_depths(&self) -> Vec<DepthMapBuffer> {
        self.gt_depth.iter().map(normalized_inverse_depth).collect()
    }

    pub fn depth_range(&self) -> (f64, f64) {
        (self.meta.depth_range[0], self.meta.depth_range[1])
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        for sub in [IMAGE_DIR, MONO_DEPTH_DIR, GT_DEPTH_DIR, VISIBILITY_DIR, TEXTURELESS_DIR] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| IoError::io(&p, e))?;
        }
        let entries: Vec<CameraEntry> = self
            .names
            .iter()
            .zip(&self.cameras)
            .map(|(name, camera)| CameraEntry {
                name: name.clone(),
                camera: camera.clone(),
            })
            .collect();
        write_cameras(&entries, &dir.join(CAMERA_FILE))?;
        let (w, h) = (self.spec.width, self.spec.height);
        let mask_png = |mask: &[bool], path: &Path| {
            let img = GrayImage::new(w, h, mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()).expect("mask size");
            write_gray_png(&img, path)
        };
        let mono = self.mono_depths();
        for (i, name) in self.names.iter().enumerate() {
            write_gray_png(&self.images[i], &dir.join(IMAGE_DIR).join(name))?;
            write_depth_map(&mono[i], &mono_depth_path(&dir.join(MONO_DEPTH_DIR), name))?;
            write_depth_map(&self.gt_depth[i], &mono_depth_path(&dir.join(GT_DEPTH_DIR), name))?;
            mask_png(&self.textureless[i], &dir.join(TEXTURELESS_DIR).join(name))?;
            for j in 0..self.names.len() {
                if i != j {
                    mask_png(&self.visibility[i][j], &dir.join(VISIBILITY_DIR).join(format!("vis_{i}_{j}.png")))?;
                }
            }
        }
        write_point_cloud(&self.gt_points, &dir.join(GT_POINTS_FILE))?;
        self.meta.write(&dir.join(META_FILE))
    }
}

pub fn normalized_inverse_depth(d: &DepthMapBuffer) -> DepthMapBuffer {
    let inv: Vec<Option<f64>> = (0..d.width() * d.height())
        .map(|i| d.get(i % d.width(), i / d.width()).map(|z| 1.0 / z as f64))
        .collect();
    let (lo, hi) = inv.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let values: Vec<f32> = inv
        .iter()
        .map(|v| match v {
            Some(v) if span > 0.0 => ((v - lo) / span) as f32,
            Some(_) => 0.5,
            None => 0.0,
        })
        .collect();
    let valid = inv.iter().map(Option::is_some).collect();
    DepthMapBuffer::with_mask(d.width(), d.height(), values, valid)
}

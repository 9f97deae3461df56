//! Projective primitives shared by the cost, prior and engine modules.
//!
//! Plane hypotheses live in the reference camera frame. A hypothesis stores
//! the unit normal and the depth of its owning pixel; the plane offset is
//! recovered from the 3D point of that pixel.

use nalgebra::{Matrix3, Point2, Vector2, Vector3};

use crate::camera::CameraModel;
use crate::error::GeometryError;
use crate::raster::DepthMapBuffer;

/// Per-pixel local plane: unit normal (reference camera frame) plus the
/// depth of the owning pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneHypothesis {
    pub normal: Vector3<f64>,
    pub depth: f64,
}

impl PlaneHypothesis {
    /// Normalises `normal` and flips it towards the camera along `ray`.
    pub fn facing(normal: Vector3<f64>, depth: f64, ray: &Vector3<f64>) -> Self {
        let n = normal.normalize();
        let n = if n.dot(ray) > 0.0 { -n } else { n };
        Self { normal: n, depth }
    }

    /// Fronto-parallel plane at `depth`.
    pub fn fronto_parallel(depth: f64) -> Self {
        Self {
            normal: Vector3::new(0.0, 0.0, -1.0),
            depth,
        }
    }

    /// 3D point of the owning pixel in the camera frame.
    pub fn point(&self, ray: &Vector3<f64>) -> Vector3<f64> {
        ray * self.depth
    }

    /// Depth at which the ray `target_ray` meets this plane, when the plane
    /// is anchored at `origin_ray`. `None` if the ray is parallel, the
    /// plane faces away from it, or the intersection is behind the camera.
    pub fn depth_along(&self, origin_ray: &Vector3<f64>, target_ray: &Vector3<f64>) -> Option<f64> {
        let denom = self.normal.dot(target_ray);
        if denom >= -1e-12 {
            return None;
        }
        let d = self.normal.dot(&self.point(origin_ray)) / denom;
        (d.is_finite() && d > 0.0).then_some(d)
    }

    pub fn is_unit(&self) -> bool {
        (self.normal.norm() - 1.0).abs() <= 1e-6
    }
}

/// Line `a x + b y + c = 0` in a source image with `a² + b² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Unit direction along which the projection moves as depth decreases.
    pub direction: Vector2<f64>,
}

impl EpipolarLine {
    pub fn distance(&self, px: &Point2<f64>) -> f64 {
        (self.a * px.x + self.b * px.y + self.c).abs()
    }
}

/// Projects a world point; returns the pixel and the camera-frame depth.
pub fn project_point(cam: &CameraModel, x: &Vector3<f64>) -> Result<(Point2<f64>, f64), GeometryError> {
    let xc = cam.world_to_camera(x);
    if !(xc.z > 0.0) {
        return Err(GeometryError::BehindCamera(xc.z));
    }
    let h = cam.k * xc;
    Ok((Point2::new(h.x / h.z, h.y / h.z), xc.z))
}

/// World point at `depth` along the ray through `px`.
pub fn unproject(cam: &CameraModel, px: &Point2<f64>, depth: f64) -> Vector3<f64> {
    cam.camera_to_world(&(cam.pixel_ray(px) * depth))
}

/// Precomputed relation between a reference and a source camera.
///
/// A reference-frame point `X` maps into the source frame as
/// `R_rel X + t_rel`; in homogeneous source pixels a point at depth `d` on
/// the ray through `p` is `d * A p + b` with `A = K_j R_rel K_i⁻¹` and
/// `b = K_j t_rel`.
#[derive(Debug, Clone)]
pub struct ViewPair {
    pub r_rel: Matrix3<f64>,
    pub t_rel: Vector3<f64>,
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    k_ref_inv: Matrix3<f64>,
    k_ref_inv_t: Matrix3<f64>,
}

impl ViewPair {
    pub fn new(reference: &CameraModel, source: &CameraModel) -> Self {
        let r_rel = source.r * reference.r.transpose();
        let t_rel = source.t - r_rel * reference.t;
        let a = source.k * r_rel * reference.k_inv();
        let b = source.k * t_rel;
        Self {
            r_rel,
            t_rel,
            a,
            b,
            k_ref_inv: *reference.k_inv(),
            k_ref_inv_t: reference.k_inv().transpose(),
        }
    }

    /// Plane-induced homography for `hyp` anchored at reference pixel `p`.
    pub fn homography(&self, p: &Point2<f64>, hyp: &PlaneHypothesis) -> Result<Matrix3<f64>, GeometryError> {
        let ray = self.k_ref_inv * Vector3::new(p.x, p.y, 1.0);
        // Plane n·X + c = 0 with c = -n·X_p.
        let c = -hyp.normal.dot(&hyp.point(&ray));
        if !(c.abs() > 1e-9 * hyp.depth * ray.norm()) {
            return Err(GeometryError::DegenerateHomography);
        }
        let m = self.k_ref_inv_t * hyp.normal;
        Ok(self.a - self.b * m.transpose() / c)
    }

    /// Homogeneous source-image point of the reference ray through `p` at infinite depth.
    fn vanishing(&self, p: &Point2<f64>) -> Vector3<f64> {
        self.a * Vector3::new(p.x, p.y, 1.0)
    }

    /// Source pixel of reference pixel `p` seen at `depth`.
    pub fn map(&self, p: &Point2<f64>, depth: f64) -> Option<Point2<f64>> {
        let h = self.vanishing(p) * depth + self.b;
        (h.z > 0.0).then(|| Point2::new(h.x / h.z, h.y / h.z))
    }

    pub fn epipolar_line(&self, p: &Point2<f64>) -> Result<EpipolarLine, GeometryError> {
        if self.t_rel.norm() <= 1e-12 {
            return Err(GeometryError::NoEpipolarGeometry);
        }
        let a = self.vanishing(p);
        let l = a.cross(&self.b);
        let ln = (l.x * l.x + l.y * l.y).sqrt();
        // The projection of the ray moves along b_xy*a_z - a_xy*b_z as depth decreases.
        let dir = Vector2::new(self.b.x * a.z - a.x * self.b.z, self.b.y * a.z - a.y * self.b.z);
        let dn = dir.norm();
        if !(ln > 1e-12 && dn > 1e-12) {
            return Err(GeometryError::NoEpipolarGeometry);
        }
        Ok(EpipolarLine {
            a: l.x / ln,
            b: l.y / ln,
            c: l.z / ln,
            direction: dir / dn,
        })
    }

    /// Depth along the ray of `p` whose projection sits `offset` pixels
    /// from the projection at `depth`, measured along the epipolar
    /// direction (positive offsets move towards smaller depths).
    pub fn depth_at_offset(&self, p: &Point2<f64>, depth: f64, offset: f64) -> Result<f64, GeometryError> {
        let line = self.epipolar_line(p)?;
        let pj = self.map(p, depth).ok_or(GeometryError::NoSolution)?;
        if offset == 0.0 {
            return Ok(depth);
        }
        let q = pj.coords + line.direction * offset;
        let a = self.vanishing(p);
        // Solve d (a_xy - q a_z) = q b_z - b_xy in the least-squares sense.
        let lhs = Vector2::new(a.x - q.x * a.z, a.y - q.y * a.z);
        let rhs = Vector2::new(q.x * self.b.z - self.b.x, q.y * self.b.z - self.b.y);
        let denom = lhs.norm_squared();
        if denom <= 1e-18 {
            return Err(GeometryError::NoSolution);
        }
        let d = lhs.dot(&rhs) / denom;
        let w = a.z * d + self.b.z;
        if !(d.is_finite() && d > 0.0 && w > 0.0) {
            return Err(GeometryError::NoSolution);
        }
        Ok(d)
    }
}

/// Homography mapping reference pixels on the plane of `hyp` (anchored at `p`)
/// into `cam_j`.
pub fn plane_homography(
    cam_i: &CameraModel,
    cam_j: &CameraModel,
    p: &Point2<f64>,
    hyp: &PlaneHypothesis,
) -> Result<Matrix3<f64>, GeometryError> {
    ViewPair::new(cam_i, cam_j).homography(p, hyp)
}

/// Applies a homography to a pixel. `None` if the point maps to infinity or behind.
#[inline]
pub fn apply_homography(h: &Matrix3<f64>, x: f64, y: f64) -> Option<(f64, f64)> {
    let w = h[(2, 0)] * x + h[(2, 1)] * y + h[(2, 2)];
    if !(w.abs() > 1e-12) {
        return None;
    }
    Some((
        (h[(0, 0)] * x + h[(0, 1)] * y + h[(0, 2)]) / w,
        (h[(1, 0)] * x + h[(1, 1)] * y + h[(1, 2)]) / w,
    ))
}

/// Round-trip reprojection error `e(p)` in reference pixels.
///
/// `p` at `depth_i` is mapped into `cam_j`, the source depth is read at the
/// mapped position, and the resulting point is projected back. Returns
/// `None` ("unverifiable") when the mapped pixel leaves the source image or
/// lands on invalid depth.
pub fn reprojection_error(
    p: &Point2<f64>,
    depth_i: f64,
    cam_i: &CameraModel,
    cam_j: &CameraModel,
    depth_map_j: &DepthMapBuffer,
) -> Option<f64> {
    if !(depth_i > 0.0) {
        return None;
    }
    let x = unproject(cam_i, p, depth_i);
    let (pj, _) = project_point(cam_j, &x).ok()?;
    if !cam_j.contains(&pj) {
        return None;
    }
    let dj = depth_map_j.sample_depth(pj.x, pj.y)?;
    let back = unproject(cam_j, &pj, dj);
    let (p2, _) = project_point(cam_i, &back).ok()?;
    Some((p2 - p).norm())
}

pub fn epipolar_line(
    cam_i: &CameraModel,
    cam_j: &CameraModel,
    p: &Point2<f64>,
) -> Result<EpipolarLine, GeometryError> {
    ViewPair::new(cam_i, cam_j).epipolar_line(p)
}

pub fn depth_from_epipolar_offset(
    cam_i: &CameraModel,
    cam_j: &CameraModel,
    p: &Point2<f64>,
    depth: f64,
    offset: f64,
) -> Result<f64, GeometryError> {
    ViewPair::new(cam_i, cam_j).depth_at_offset(p, depth, offset)
}

//! Pinhole camera model.
//!
//! World points map into the camera frame as `X_cam = R * X_world + T` and
//! onto the image as `K * X_cam`. Pixel centres sit at integer coordinates.

use nalgebra::{Matrix3, Point2, Vector3};

/// Smallest image side accepted; one full matching patch must fit.
pub const MIN_IMAGE_SIDE: usize = 11;

const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub width: usize,
    pub height: usize,
    k_inv: Matrix3<f64>,
    center: Vector3<f64>,
}

impl CameraModel {
    /// Builds a camera after checking the intrinsic and rotation invariants.
    pub fn new(
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, String> {
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(format!(
                "focal entries must be positive (got {}, {})",
                k[(0, 0)],
                k[(1, 1)]
            ));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err("K must be upper triangular with K[2][2] = 1".into());
        }
        let rtr = r.transpose() * r;
        let dev = (rtr - Matrix3::identity()).abs().max();
        if !(dev <= ORTHONORMAL_TOL) {
            return Err(format!("R is not orthonormal (max |RᵀR - I| = {dev:.3e})"));
        }
        if !r.determinant().is_sign_positive() {
            return Err("R is a reflection (det < 0)".into());
        }
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(format!(
                "image {width}x{height} is smaller than the {MIN_IMAGE_SIDE}px patch"
            ));
        }
        if k.iter().chain(r.iter()).chain(t.iter()).any(|v| !v.is_finite()) {
            return Err("non-finite camera parameter".into());
        }
        let k_inv = k.try_inverse().ok_or("K is singular")?;
        let center = -(r.transpose() * t);
        Ok(Self {
            k,
            r,
            t,
            width,
            height,
            k_inv,
            center,
        })
    }

    /// Camera looking from `eye` towards `target`; image y points along `-up`.
    pub fn look_at(
        k: Matrix3<f64>,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, String> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::new(k, r, t, width, height)
    }

    pub fn intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Matrix3<f64> {
        Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0)
    }

    pub fn k_inv(&self) -> &Matrix3<f64> {
        &self.k_inv
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn world_to_camera(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r * x + self.t
    }

    pub fn camera_to_world(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.r.transpose() * (x - self.t)
    }

    /// Ray through a pixel in the camera frame, scaled so its z component is 1.
    pub fn pixel_ray(&self, px: &Point2<f64>) -> Vector3<f64> {
        self.k_inv * Vector3::new(px.x, px.y, 1.0)
    }

    /// Whether a continuous pixel position lies inside the image.
    pub fn contains(&self, px: &Point2<f64>) -> bool {
        px.x >= 0.0
            && px.y >= 0.0
            && px.x <= (self.width - 1) as f64
            && px.y <= (self.height - 1) as f64
    }
}

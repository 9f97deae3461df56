//! Dense per-pixel buffers: grayscale images, depth maps, normal maps.

use nalgebra::Vector3;

/// Row-major luminance image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, String> {
        if values.len() != width * height {
            return Err(format!(
                "{} values for a {width}x{height} image",
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(format!("luminance {v} outside [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("constant image")
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y).clamp(0.0, 1.0))
            .collect();
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Pixel value with coordinates clamped into the image.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f32 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.values[y * self.width + x]
    }

    /// Bilinear sample; `None` outside `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if x > max_x || y > max_y {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let i = y0 * self.width + x0;
        let v00 = self.values[i] as f64;
        let v10 = self.values[i + 1] as f64;
        let v01 = self.values[i + self.width] as f64;
        let v11 = self.values[i + self.width + 1] as f64;
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        Some(top + (bottom - top) * fy)
    }
}

/// Depth per pixel with an explicit validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMapBuffer {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMapBuffer {
    /// All pixels invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Builds a buffer where every finite positive value is valid.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Self {
        let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        Self::with_mask(width, height, values, valid)
    }

    /// Relative (monocular) depth: finite values `>= 0` are valid.
    pub fn from_relative(width: usize, height: usize, values: Vec<f32>) -> Self {
        let valid = values.iter().map(|v| v.is_finite() && *v >= 0.0).collect();
        Self::with_mask(width, height, values, valid)
    }

    /// Explicit mask; masked-out entries are zeroed.
    pub fn with_mask(width: usize, height: usize, mut values: Vec<f32>, valid: Vec<bool>) -> Self {
        assert_eq!(values.len(), width * height, "depth buffer size");
        assert_eq!(valid.len(), width * height, "depth mask size");
        for (v, ok) in values.iter_mut().zip(&valid) {
            if !ok {
                *v = 0.0;
            }
        }
        Self {
            width,
            height,
            values,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.values[i])
    }

    pub fn set(&mut self, x: usize, y: usize, depth: f32) {
        let i = y * self.width + x;
        if depth.is_finite() && depth > 0.0 {
            self.values[i] = depth;
            self.valid[i] = true;
        } else {
            self.values[i] = 0.0;
            self.valid[i] = false;
        }
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.values[i] = 0.0;
        self.valid[i] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Depth at a continuous position, interpolating inverse depth over the
    /// four neighbours. Inverse depth is affine in pixel coordinates on a
    /// plane, so this is exact for planar surfaces. Falls back to the nearest
    /// pixel when a neighbour is invalid.
    pub fn sample_depth(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) || x > (self.width - 1) as f64 || y > (self.height - 1) as f64 {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let corners = [
            self.get(x0, y0),
            self.get(x1, y0),
            self.get(x0, y1),
            self.get(x1, y1),
        ];
        if let [Some(a), Some(b), Some(c), Some(d)] = corners {
            let fx = x - x0 as f64;
            let fy = y - y0 as f64;
            let inv = |v: f32| 1.0 / v as f64;
            let top = inv(a) + (inv(b) - inv(a)) * fx;
            let bottom = inv(c) + (inv(d) - inv(c)) * fx;
            let v = top + (bottom - top) * fy;
            return (v > 0.0).then(|| 1.0 / v);
        }
        let nx = (x.round() as usize).min(self.width - 1);
        let ny = (y.round() as usize).min(self.height - 1);
        self.get(nx, ny).map(f64::from)
    }
}

/// Per-pixel unit normals (camera frame of the owning view); zero where unset.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    values: Vec<[f32; 3]>,
}

impl NormalMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<[f32; 3]>) -> Self {
        assert_eq!(values.len(), width * height, "normal buffer size");
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[[f32; 3]] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Vector3<f64> {
        let v = self.values[y * self.width + x];
        Vector3::new(v[0] as f64, v[1] as f64, v[2] as f64)
    }

    pub fn set(&mut self, x: usize, y: usize, n: &Vector3<f64>) {
        self.values[y * self.width + x] = [n.x as f32, n.y as f32, n.z as f32];
    }
}

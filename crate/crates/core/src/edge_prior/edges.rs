use crate::raster::{DepthMapBuffer, GrayImage};

/// Monocular depth rescaled to `[0, 1]` over its valid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDepth {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl RelativeDepth {
    /// Min-max normalisation. A constant map becomes 0.5 everywhere.
    pub fn normalize(depth: &DepthMapBuffer) -> Self {
        let valid = depth.valid_mask().to_vec();
        let (lo, hi) = depth
            .values()
            .iter()
            .zip(&valid)
            .filter(|(_, ok)| **ok)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
                (lo.min(*v as f64), hi.max(*v as f64))
            });
        let span = hi - lo;
        let values = depth
            .values()
            .iter()
            .zip(&valid)
            .map(|(v, ok)| match (*ok, span > 0.0) {
                (false, _) => 0.0,
                (true, true) => (*v as f64 - lo) / span,
                (true, false) => 0.5,
            })
            .collect();
        Self {
            width: depth.width(),
            height: depth.height(),
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

    #[inline]
    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.values[i])
    }

    /// Scale that maps pixel coordinates into the unit square.
    pub fn coord_scale(&self) -> f64 {
        1.0 / self.width.max(self.height) as f64
    }

    /// The `(x, y, d)` point of pixel `i` used for plane fits.
    #[inline]
    pub fn point(&self, i: usize) -> Option<[f64; 3]> {
        let s = self.coord_scale();
        self.get(i)
            .map(|d| [(i % self.width) as f64 * s, (i / self.width) as f64 * s, d])
    }
}

/// Per-pixel edge responses and the resulting edge flags.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    /// Roberts magnitude of the image.
    pub image_magnitude: Vec<f32>,
    /// Relative-depth gradient per pixel (infinite at invalid depth).
    pub depth_gradient: Vec<f32>,
    pub flags: Vec<bool>,
}

impl EdgeMap {
    pub fn edge_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Roberts cross magnitude `sqrt((a - d)^2 + (b - c)^2)` over the 2x2 block
/// whose top-left pixel is `(x, y)`; the last row and column reuse the border.
fn roberts(w: usize, h: usize, x: usize, y: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    let x1 = (x + 1).min(w - 1);
    let y1 = (y + 1).min(h - 1);
    let g1 = f(x, y) - f(x1, y1);
    let g2 = f(x1, y) - f(x, y1);
    (g1 * g1 + g2 * g2).sqrt()
}

/// Roberts responses of the image alone.
pub fn roberts_magnitude(image: &GrayImage) -> Vec<f32> {
    let (w, h) = (image.width(), image.height());
    (0..w * h)
        .map(|i| roberts(w, h, i % w, i / w, |x, y| image.get(x, y) as f64) as f32)
        .collect()
}

/// Image edges (Roberts magnitude above `roberts_threshold`) united with
/// depth edges (relative-depth gradient above `eps_grad`).
pub fn roberts_edges(depth: &RelativeDepth, image: &GrayImage, roberts_threshold: f64, eps_grad: f64) -> EdgeMap {
    let (w, h) = (image.width(), image.height());
    assert_eq!((depth.width(), depth.height()), (w, h), "depth and image sizes differ");
    let image_magnitude = roberts_magnitude(image);
    let depth_gradient: Vec<f32> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let x1 = (x + 1).min(w - 1);
            let y1 = (y + 1).min(h - 1);
            let block = [y * w + x, y * w + x1, y1 * w + x, y1 * w + x1];
            if block.iter().any(|&j| depth.get(j).is_none()) {
                return f32::INFINITY;
            }
            // Diagonal differences span sqrt(2) pixels.
            (roberts(w, h, x, y, |x, y| depth.get(y * w + x).unwrap_or(0.0)) / std::f64::consts::SQRT_2) as f32
        })
        .collect();
    let flags = image_magnitude
        .iter()
        .zip(&depth_gradient)
        .map(|(m, g)| *m as f64 > roberts_threshold || *g as f64 > eps_grad)
        .collect();
    EdgeMap {
        width: w,
        height: h,
        image_magnitude,
        depth_gradient,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_depth(w: usize, h: usize) -> RelativeDepth {
        RelativeDepth::normalize(&DepthMapBuffer::from_relative(w, h, vec![0.3; w * h]))
    }

    #[test]
    fn constant_image_has_no_edges() {
        let e = roberts_edges(&flat_depth(20, 15), &GrayImage::constant(20, 15, 0.4), 0.03, 0.005);
        assert_eq!(e.edge_count(), 0);
        assert!(e.image_magnitude.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn vertical_step_response() {
        let h = 0.25f32;
        let img = GrayImage::from_fn(20, 10, |x, _| if x >= 10 { 0.5 + h } else { 0.5 });
        let m = roberts_magnitude(&img);
        let expected = (h as f64) * std::f64::consts::SQRT_2;
        for y in 0..10 {
            assert!((m[y * 20 + 9] as f64 - expected).abs() < 1e-6);
            assert_eq!(m[y * 20 + 5], 0.0);
        }
    }

    #[test]
    fn depth_slope_is_per_pixel() {
        let w = 50;
        let vals: Vec<f32> = (0..w * 10).map(|i| (i % w) as f32).collect();
        let d = RelativeDepth::normalize(&DepthMapBuffer::from_relative(w, 10, vals));
        let e = roberts_edges(&d, &GrayImage::constant(w, 10, 0.5), 0.03, 0.005);
        let g = e.depth_gradient[3 * w + 10] as f64;
        assert!((g - 1.0 / 49.0).abs() < 1e-6);
        assert!(e.flags[3 * w + 10]);
    }

    #[test]
    fn constant_depth_normalises_to_half() {
        let d = flat_depth(4, 4);
        assert_eq!(d.get(5), Some(0.5));
    }
}

//! Random hypothesis generation.

use nalgebra::Vector3;
use rand::Rng;

use super::constraints::{DepthInterval, NormalConstraint};

/// Uniform direction on the unit sphere.
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Uniform normal on the hemisphere facing the camera along `ray`.
pub fn facing_normal<R: Rng + ?Sized>(rng: &mut R, ray: &Vector3<f64>) -> Vector3<f64> {
    let n = unit_sphere(rng);
    if n.dot(ray) > 0.0 {
        -n
    } else {
        n
    }
}

/// Uniform direction inside the cone of half-angle `max_angle` (radians) around `axis`.
pub fn cone_perturb<R: Rng + ?Sized>(rng: &mut R, axis: &Vector3<f64>, max_angle: f64) -> Vector3<f64> {
    let axis = axis.normalize();
    let cos_t: f64 = rng.gen_range(max_angle.cos()..=1.0);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = axis.cross(&helper).normalize();
    let v = axis.cross(&u);
    (axis * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t).normalize()
}

/// Rejection-samples `draw` until `accept` holds; `None` after `attempts` misses.
pub fn rejection<T>(attempts: usize, mut draw: impl FnMut() -> T, accept: impl Fn(&T) -> bool) -> Option<T> {
    (0..attempts).map(|_| draw()).find(|t| accept(t))
}

/// Admissibility of a normal: the explicit constraint when present,
/// otherwise facing the reference camera.
pub fn admissible(n: &Vector3<f64>, ray: &Vector3<f64>, constraint: Option<&NormalConstraint>) -> bool {
    match constraint {
        Some(c) => c.admits(n),
        None => n.dot(ray) < 0.0,
    }
}

/// Uniform sample from the union of both interval ranges.
pub fn sample_interval<R: Rng + ?Sized>(rng: &mut R, iv: &DepthInterval, current: f64) -> f64 {
    let l = iv.left.1 - iv.left.0;
    let r = iv.right.1 - iv.right.0;
    let total = l + r;
    if !(total > 0.0) {
        return current;
    }
    let u = rng.gen_range(0.0..total);
    if u < l {
        iv.left.0 + u
    } else {
        iv.right.0 + (u - l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn cone_stays_inside() {
        let mut r = rng::stream(&[1]);
        let axis = Vector3::new(0.3, -0.2, -1.0).normalize();
        for _ in 0..500 {
            let n = cone_perturb(&mut r, &axis, 10f64.to_radians());
            assert!((n.norm() - 1.0).abs() < 1e-9);
            assert!(n.dot(&axis) >= 10f64.to_radians().cos() - 1e-9);
        }
    }

    #[test]
    fn facing_hemisphere() {
        let mut r = rng::stream(&[2]);
        let ray = Vector3::new(0.1, 0.0, 1.0);
        assert!((0..500).all(|_| facing_normal(&mut r, &ray).dot(&ray) <= 0.0));
    }

    #[test]
    fn interval_union_containment() {
        let mut r = rng::stream(&[3]);
        let iv = DepthInterval {
            left: (1.0, 2.0),
            right: (4.0, 4.5),
        };
        for _ in 0..1000 {
            assert!(iv.contains(sample_interval(&mut r, &iv, 3.0)));
        }
        let empty = DepthInterval {
            left: (3.0, 3.0),
            right: (3.0, 3.0),
        };
        assert_eq!(sample_interval(&mut r, &empty, 3.0), 3.0);
    }

    #[test]
    fn rejection_gives_up() {
        assert_eq!(rejection(32, || 1, |&x| x > 1), None);
        let mut k = 0;
        assert_eq!(
            rejection(
                32,
                || {
                    k += 1;
                    k
                },
                |&x| x == 5
            ),
            Some(5)
        );
    }
}

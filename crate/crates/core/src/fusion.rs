//! Depth-map fusion into one point cloud.
//!
//! Views are visited in order. A pixel becomes a point when enough other
//! views hold a consistent estimate at its projection; the estimates are
//! averaged and every contributing pixel is consumed so it cannot support
//! a second point.

use nalgebra::{Point2, Vector3};

use crate::camera::CameraModel;
use crate::cloud::{CloudPoint, PointCloud};
use crate::config::FusionConfig;
use crate::geometry::{project_point, unproject};
use crate::par::{self, ExecMode};
use crate::raster::{DepthMapBuffer, NormalMap};

/// Per-view inputs. Normals are in each view's camera frame.
pub struct FusionView<'a> {
    pub camera: &'a CameraModel,
    pub depth: &'a DepthMapBuffer,
    pub normals: &'a NormalMap,
    pub colors: Option<&'a [[u8; 3]]>,
}

#[derive(Debug, Clone, Copy)]
struct Support {
    view: usize,
    pixel: usize,
    point: Vector3<f64>,
    normal: Vector3<f64>,
}

fn world_normal(cam: &CameraModel, n: &Vector3<f64>) -> Vector3<f64> {
    cam.r.transpose() * n
}

/// Consistent estimates of reference pixel `(x, y)` of view `i` in the other views.
fn supports(views: &[FusionView<'_>], consumed: &[Vec<bool>], i: usize, x: usize, y: usize, cfg: &FusionConfig) -> Option<(Support, Vec<Support>)> {
    let v = &views[i];
    let d = v.depth.get(x, y)? as f64;
    let p = Point2::new(x as f64, y as f64);
    let point = unproject(v.camera, &p, d);
    let normal = world_normal(v.camera, &v.normals.get(x, y));
    if !(normal.norm() > 0.5) {
        return None;
    }
    let own = Support {
        view: i,
        pixel: y * v.camera.width + x,
        point,
        normal,
    };
    let cos_max = cfg.max_normal_angle.to_radians().cos();
    let mut out = Vec::new();
    for (j, u) in views.iter().enumerate() {
        if j == i {
            continue;
        }
        let Ok((q, depth_in_j)) = project_point(u.camera, &point) else { continue };
        let (qx, qy) = (q.x.round(), q.y.round());
        if qx < 0.0 || qy < 0.0 || qx >= u.camera.width as f64 || qy >= u.camera.height as f64 {
            continue;
        }
        let (qx, qy) = (qx as usize, qy as usize);
        let qi = qy * u.camera.width + qx;
        if consumed[j][qi] {
            continue;
        }
        let Some(dj) = u.depth.get(qx, qy) else { continue };
        let dj = dj as f64;
        if (depth_in_j - dj).abs() / dj > cfg.max_rel_depth_diff {
            continue;
        }
        let xj = unproject(u.camera, &Point2::new(qx as f64, qy as f64), dj);
        let Ok((back, _)) = project_point(v.camera, &xj) else { continue };
        if (back - p).norm() > cfg.max_reproj_error {
            continue;
        }
        let nj = world_normal(u.camera, &u.normals.get(qx, qy));
        if !(nj.norm() > 0.5) || normal.dot(&nj) / nj.norm() / normal.norm() < cos_max {
            continue;
        }
        out.push(Support {
            view: j,
            pixel: qi,
            point: xj,
            normal: nj,
        });
    }
    Some((own, out))
}

/// Fuses all views. Colour is averaged when every view carries one.
pub fn fuse(views: &[FusionView<'_>], cfg: &FusionConfig, mode: ExecMode) -> PointCloud {
    let mut consumed: Vec<Vec<bool>> = views.iter().map(|v| vec![false; v.camera.width * v.camera.height]).collect();
    let with_color = !views.is_empty() && views.iter().all(|v| v.colors.is_some());
    let mut points = Vec::new();
    for i in 0..views.len() {
        let (w, h) = (views[i].camera.width, views[i].camera.height);
        let snapshot = &consumed;
        let candidates: Vec<Vec<(Support, Vec<Support>)>> = par::map_range(mode, h, |y| {
            (0..w)
                .filter(|&x| !snapshot[i][y * w + x])
                .filter_map(|x| supports(views, snapshot, i, x, y, cfg))
                .filter(|(_, s)| s.len() >= cfg.min_consistent_views)
                .collect()
        });
        for (own, sup) in candidates.into_iter().flatten() {
            if consumed[i][own.pixel] {
                continue;
            }
            let sup: Vec<Support> = sup.into_iter().filter(|s| !consumed[s.view][s.pixel]).collect();
            if sup.len() < cfg.min_consistent_views {
                continue;
            }
            let all: Vec<Support> = std::iter::once(own).chain(sup).collect();
            let k = all.len() as f64;
            let pos = all.iter().map(|s| s.point).sum::<Vector3<f64>>() / k;
            let nrm = all.iter().map(|s| s.normal.normalize()).sum::<Vector3<f64>>().normalize();
            let color = with_color.then(|| {
                let sum = all.iter().fold([0.0f64; 3], |mut acc, s| {
                    let c = views[s.view].colors.expect("checked")[s.pixel];
                    for (a, v) in acc.iter_mut().zip(c) {
                        *a += v as f64;
                    }
                    acc
                });
                sum.map(|v| (v / k).round() as u8)
            });
            for s in &all {
                consumed[s.view][s.pixel] = true;
            }
            points.push(CloudPoint {
                position: [pos.x as f32, pos.y as f32, pos.z as f32],
                normal: [nrm.x as f32, nrm.y as f32, nrm.z as f32],
                color,
            });
        }
    }
    PointCloud::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn cam(tx: f64) -> CameraModel {
        CameraModel::new(
            CameraModel::intrinsics(60.0, 60.0, 20.0, 15.0),
            Matrix3::identity(),
            Vector3::new(-tx, 0.0, 0.0),
            41,
            31,
        )
        .unwrap()
    }

    fn plane_maps(c: &CameraModel) -> (DepthMapBuffer, NormalMap) {
        let d = DepthMapBuffer::from_values(41, 31, vec![3.0; 41 * 31]);
        let n = NormalMap::from_values(41, 31, vec![[0.0, 0.0, -1.0]; 41 * 31]);
        let _ = c;
        (d, n)
    }

    #[test]
    fn single_view_is_empty() {
        let c = cam(0.0);
        let (d, n) = plane_maps(&c);
        let v = [FusionView {
            camera: &c,
            depth: &d,
            normals: &n,
            colors: None,
        }];
        assert!(fuse(&v, &FusionConfig::default(), ExecMode::Sequential).is_empty());
    }

    #[test]
    fn three_view_plane_fuses_without_reuse() {
        let cams = [cam(0.0), cam(0.1), cam(-0.1)];
        let maps: Vec<_> = cams.iter().map(plane_maps).collect();
        let views: Vec<FusionView<'_>> = cams
            .iter()
            .zip(&maps)
            .map(|(c, (d, n))| FusionView {
                camera: c,
                depth: d,
                normals: n,
                colors: None,
            })
            .collect();
        let cloud = fuse(&views, &FusionConfig::default(), ExecMode::Parallel);
        assert!(cloud.len() > 30 * 31 / 2, "{}", cloud.len());
        // Each point consumes three pixels.
        assert!(cloud.len() * 3 <= 3 * 41 * 31);
        assert!(cloud.points.iter().all(|p| (p.position[2] - 3.0).abs() < 1e-4));
        assert!(cloud.normals_are_unit());
        assert_eq!(cloud, fuse(&views, &FusionConfig::default(), ExecMode::Sequential));
    }
}

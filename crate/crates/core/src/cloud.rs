/// One oriented point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: [f32; 3],
    pub normal: [f32; 3],
    pub color: Option<[u8; 3]>,
}

impl CloudPoint {
    pub fn position_f64(&self) -> [f64; 3] {
        self.position.map(f64::from)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<CloudPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Colour is written only when every point carries one.
    pub fn has_color(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.color.is_some())
    }

    /// Normals within 1e-4 of unit length.
    pub fn normals_are_unit(&self) -> bool {
        self.points.iter().all(|p| {
            let n = p.normal.map(f64::from);
            ((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() <= 1e-4
        })
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(CloudPoint::position_f64).collect()
    }
}

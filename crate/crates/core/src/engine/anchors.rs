use arrayvec::ArrayVec;

/// Upper bound on the number of sectors.
pub const MAX_SECTORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub x: usize,
    pub y: usize,
    pub sector: u8,
}

impl Anchor {
    pub fn pos(&self) -> (usize, usize) {
        (self.x, self.y)
    }
}

/// At most one anchor per sector.
pub type AnchorSet = ArrayVec<Anchor, MAX_SECTORS>;

/// Reliable iff the aggregated cost is below `tau_rel`.
pub fn classify_reliability(costs: &[f64], tau_rel: f64) -> Vec<bool> {
    costs.iter().map(|&c| c < tau_rel).collect()
}

/// Walks the bisector of each of `sectors` equal sectors (sector 0
/// centred on +x, angles increasing towards +y) in `step`-pixel increments
/// up to `r_max`, keeping the first reliable pixel met.
pub fn search_anchors(
    p: (usize, usize),
    reliable: &[bool],
    width: usize,
    height: usize,
    sectors: usize,
    step: f64,
    r_max: f64,
) -> AnchorSet {
    let mut out = AnchorSet::new();
    let (px, py) = (p.0 as f64, p.1 as f64);
    for k in 0..sectors.min(MAX_SECTORS) {
        let theta = k as f64 * std::f64::consts::TAU / sectors as f64;
        let (dx, dy) = (theta.cos(), theta.sin());
        let mut r = step;
        while r <= r_max + 1e-9 {
            let x = (px + r * dx).round();
            let y = (py + r * dy).round();
            if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
                break;
            }
            let (xi, yi) = (x as usize, y as usize);
            if (xi, yi) != p && reliable[yi * width + xi] {
                out.push(Anchor {
                    x: xi,
                    y: yi,
                    sector: k as u8,
                });
                break;
            }
            r += step;
        }
    }
    out
}

/// Sector of the direction from `p` to `q`.
pub fn sector_of(p: (usize, usize), q: (usize, usize), sectors: usize) -> usize {
    let a = (q.1 as f64 - p.1 as f64).atan2(q.0 as f64 - p.0 as f64);
    let width = std::f64::consts::TAU / sectors as f64;
    let t = (a + width / 2.0).rem_euclid(std::f64::consts::TAU);
    (t / width) as usize % sectors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reliability_threshold() {
        assert_eq!(classify_reliability(&[0.1, 2.0, 0.5, 0.49], 0.5), vec![true, false, false, true]);
    }

    #[test]
    fn ring_of_reliable_pixels() {
        let (w, h) = (41, 41);
        let c = (20usize, 20usize);
        let reliable: Vec<bool> = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 - 20.0, (i / w) as f64 - 20.0);
                (x * x + y * y).sqrt() >= 3.5
            })
            .collect();
        let s = search_anchors(c, &reliable, w, h, 8, 2.0, 10.0);
        assert_eq!(s.len(), 8);
        for (k, a) in s.iter().enumerate() {
            assert_eq!(a.sector as usize, k);
            assert_eq!(sector_of(c, a.pos(), 8), k);
            let r = ((a.x as f64 - 20.0).powi(2) + (a.y as f64 - 20.0).powi(2)).sqrt();
            assert!((r - 4.0).abs() <= 2.0, "r = {r}");
        }
    }

    #[test]
    fn nothing_reliable() {
        assert!(search_anchors((5, 5), &[false; 100], 10, 10, 8, 2.0, 5.0).is_empty());
    }

    #[test]
    fn sector_zero_is_plus_x() {
        assert_eq!(sector_of((10, 10), (15, 10), 8), 0);
        assert_eq!(sector_of((10, 10), (10, 15), 8), 2);
        assert_eq!(sector_of((10, 10), (15, 8), 8), 0);
        assert_eq!(sector_of((10, 10), (5, 10), 8), 4);
    }
}

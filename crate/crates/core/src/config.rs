//! Run parameters. Every field has a default; a TOML file may override any subset.

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::par::ExecMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    /// Minimum region size for a plane fit (η).
    pub eta: usize,
    /// Similarity gate for splits and merges (σ).
    pub sigma: f64,
    /// Inlier-ratio gain required for a split (γ).
    pub gamma: f64,
    /// Minimum inlier ratio for merging and absorption (κ).
    pub kappa: f64,
    /// Point-to-plane distance for pixel absorption (δ).
    pub delta: f64,
    /// Relative-depth gradient above which a pixel is a depth edge.
    pub eps_grad: f64,
    /// Roberts magnitude above which a pixel is an image edge.
    pub roberts_threshold: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_distance: f64,
    pub max_erosion_rounds: usize,
    /// Penalise depth gaps in the similarity instead of rewarding them.
    pub depth_penalty_similarity: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            eta: 300,
            sigma: 0.5,
            gamma: 1.2,
            kappa: 0.7,
            delta: 0.8,
            eps_grad: 0.005,
            roberts_threshold: 0.03,
            ransac_iterations: 256,
            ransac_inlier_distance: 0.01,
            max_erosion_rounds: 5,
            depth_penalty_similarity: false,
        }
    }
}

/// Where the per-view anchor visibility test is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorVisibilityTest {
    /// Weight of the anchor pixel itself.
    AnchorPixel,
    /// Weight of the pixel that owns the anchor set.
    OwnerPixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityConfig {
    /// Reprojection gate for restoration, pixels (ε).
    pub eps_reproj: f64,
    /// Costs at or above this give zero initial weight.
    pub tau_good: f64,
    /// Gaussian bandwidth of the cost-to-weight map.
    pub bandwidth: f64,
    /// Weight given to restored entries.
    pub w_min_restored: f64,
    pub anchor_test: AnchorVisibilityTest,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            eps_reproj: 2.0,
            tau_good: 0.8,
            bandwidth: 0.3,
            w_min_restored: 0.1,
            anchor_test: AnchorVisibilityTest::AnchorPixel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub iterations: usize,
    /// Leading iterations run with plain patches.
    pub warmup_iterations: usize,
    /// First (1-based) iteration that applies the normal constraint.
    pub normal_constraint_from: usize,
    /// First (1-based) iteration that restores visibility.
    pub restore_from: usize,
    /// Reliability threshold on the aggregated cost.
    pub tau_rel: f64,
    /// Weight of the central patch in the deformable cost (λ).
    pub lambda: f64,
    /// Number of angular sectors searched for anchors (|S|).
    pub sectors: usize,
    pub sector_step: f64,
    /// Epipolar offsets α and α + β, in pixels.
    pub alpha: f64,
    pub beta: f64,
    /// Order statistic used when aggregating intervals (μ).
    pub mu: usize,
    /// Relative half-width of the interval when no view is usable.
    pub fallback_interval: f64,
    pub normal_cone_deg: f64,
    pub normal_attempts: usize,
    /// Propagation offsets sampled along each of the 8 directions.
    pub propagation_offsets: Vec<usize>,
    /// Depth range; `None` takes it from the scene.
    pub depth_range: Option<[f64; 2]>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            iterations: 8,
            warmup_iterations: 2,
            normal_constraint_from: 3,
            restore_from: 2,
            tau_rel: 0.5,
            lambda: 0.25,
            sectors: 8,
            sector_step: 2.0,
            alpha: 1.0,
            beta: 4.0,
            mu: 3,
            fallback_interval: 0.01,
            normal_cone_deg: 10.0,
            normal_attempts: 32,
            propagation_offsets: vec![1, 3, 5],
            depth_range: None,
        }
    }
}

/// Switches for ablation runs. All on is the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub deformable_patches: bool,
    pub edge_prior: bool,
    pub cross_view_prior: bool,
    pub geometry_constraints: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self::FULL
    }
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        deformable_patches: true,
        edge_prior: true,
        cross_view_prior: true,
        geometry_constraints: true,
    };
    /// Plain PatchMatch: fixed patches, cost-based view weights only.
    pub const CONVENTIONAL: Ablation = Ablation {
        deformable_patches: false,
        edge_prior: false,
        cross_view_prior: false,
        geometry_constraints: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub min_consistent_views: usize,
    pub max_reproj_error: f64,
    pub max_rel_depth_diff: f64,
    pub max_normal_angle: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            min_consistent_views: 2,
            max_reproj_error: 2.0,
            max_rel_depth_diff: 0.01,
            max_normal_angle: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Distance threshold; `None` uses 1% of the ground-truth diameter.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub exec: ExecMode,
    pub region: RegionConfig,
    pub visibility: VisibilityConfig,
    pub engine: EngineConfig,
    pub ablation: Ablation,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            exec: ExecMode::Parallel,
            region: RegionConfig::default(),
            visibility: VisibilityConfig::default(),
            engine: EngineConfig::default(),
            ablation: Ablation::FULL,
            fusion: FusionConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        let e = &self.engine;
        if e.iterations == 0 {
            return bad("engine.iterations must be at least 1");
        }
        if !(0.0..=1.0).contains(&e.lambda) {
            return bad("engine.lambda must lie in [0, 1]");
        }
        if e.mu == 0 || e.sectors == 0 {
            return bad("engine.mu and engine.sectors must be positive");
        }
        if e.sectors > crate::engine::MAX_SECTORS {
            return bad("engine.sectors must be at most 16");
        }
        if !(e.alpha > 0.0 && e.beta > 0.0 && e.sector_step > 0.0) {
            return bad("engine.alpha, engine.beta and engine.sector_step must be positive");
        }
        if e.propagation_offsets.is_empty() || e.propagation_offsets.contains(&0) {
            return bad("engine.propagation_offsets must be non-empty and positive");
        }
        if let Some([lo, hi]) = e.depth_range {
            if !(lo > 0.0 && hi > lo) {
                return bad("engine.depth_range must satisfy 0 < min < max");
            }
        }
        if self.region.eta == 0 || self.region.ransac_iterations == 0 {
            return bad("region.eta and region.ransac_iterations must be positive");
        }
        if self.fusion.min_consistent_views == 0 {
            return bad("fusion.min_consistent_views must be at least 1");
        }
        if let Some(t) = self.eval.tau {
            if !(t > 0.0) {
                return bad("eval.tau must be positive");
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Config = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_parameters() {
        let c = Config::default();
        let r = &c.region;
        let e = &c.engine;
        assert_eq!(
            (r.eta, r.sigma, r.gamma, r.kappa, r.delta),
            (300, 0.5, 1.2, 0.7, 0.8)
        );
        assert_eq!(c.visibility.eps_reproj, 2.0);
        assert_eq!((e.alpha, e.beta, e.mu), (1.0, 4.0, 3));
        assert_eq!((e.lambda, e.sectors, r.eps_grad), (0.25, 8, 0.005));
    }

    #[test]
    fn toml_roundtrip_and_partial_override() {
        let c = Config::default();
        assert_eq!(Config::from_toml(&c.to_toml()).unwrap(), c);
        let o = Config::from_toml("seed = 9\n[engine]\niterations = 3\n").unwrap();
        assert_eq!(o.seed, 9);
        assert_eq!(o.engine.iterations, 3);
        assert_eq!(o.engine.mu, 3);
        assert!(Config::from_toml("[engine]\nbogus = 1\n").is_err());
        assert!(Config::from_toml("[engine]\niterations = 0\n").is_err());
    }
}

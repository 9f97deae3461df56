//! Synthetic ground-truth scenes and point-cloud scoring.

mod metrics;
mod synth;

pub use metrics::{default_tau, evaluate, f1_score, EvalReport, PointGrid};
pub use synth::{
    generate_scene, normalized_inverse_depth, two_plane_crease_column, SceneKind, SceneMeta, SceneSpec, SyntheticScene,
    GT_DEPTH_DIR, GT_POINTS_FILE, META_FILE, TEXTURELESS_DIR, VISIBILITY_DIR,
};

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use deform_mvs::config::Config;
use deform_mvs::engine::{run_pipeline, RunOptions};
use deform_mvs::eval::{default_tau, evaluate, generate_scene, SceneKind, SceneSpec};
use deform_mvs::fusion::{fuse, FusionView};
use deform_mvs::par::ExecMode;

const MODES: [(&str, ExecMode); 2] = [("parallel", ExecMode::Parallel), ("sequential", ExecMode::Sequential)];

fn pipeline(c: &mut Criterion) {
    let s = generate_scene(&SceneSpec::new(SceneKind::TexturedPlane).with_size(128, 96));
    let scene = s.scene();
    let mono: Vec<_> = s.mono_depths().into_iter().map(Some).collect();
    let opts = RunOptions::new(s.depth_range());
    let mut group = c.benchmark_group("pipeline_128x96_2it");
    group.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = Config { exec, ..Config::default() };
        cfg.engine.iterations = 2;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_pipeline(&scene, &mono, &cfg, &opts).unwrap())
        });
    }
    group.finish();
}

fn fusion_and_eval(c: &mut Criterion) {
    let s = generate_scene(&SceneSpec::new(SceneKind::OcclusionBox).with_size(320, 240));
    let views: Vec<FusionView<'_>> = (0..s.cameras.len())
        .map(|i| FusionView {
            camera: &s.cameras[i],
            depth: &s.gt_depth[i],
            normals: &s.gt_normals[i],
            colors: None,
        })
        .collect();
    let cfg = Config::default();
    let gt = s.gt_points.positions();
    let tau = default_tau(&gt);
    let mut group = c.benchmark_group("fusion_eval_320x240");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("fuse", name), |b| b.iter(|| fuse(&views, &cfg.fusion, exec)));
        group.bench_function(BenchmarkId::new("evaluate", name), |b| b.iter(|| evaluate(&gt, &gt, tau, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pipeline, fusion_and_eval);
criterion_main!(benches);

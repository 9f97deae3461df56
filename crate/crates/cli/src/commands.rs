//! Subcommand bodies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use deform_mvs::config::Config;
use deform_mvs::edge_prior::{dump_regions, RegionPrior};
use deform_mvs::engine::{prior_seed, run_pipeline, RunOptions, ViewResult};
use deform_mvs::eval::{default_tau, evaluate, generate_scene, SceneMeta, SceneSpec, GT_POINTS_FILE, META_FILE};
use deform_mvs::fusion::{fuse, FusionView};
use deform_mvs::par;
use deform_mvs::scene_io::{
    load_mono_depths, read_point_cloud, write_depth_map, write_normal_map, write_pfm, write_point_cloud, PfmImage,
    Scene, MONO_DEPTH_DIR,
};
use deform_mvs::DepthMapBuffer;

use crate::{DumpPriorArgs, EvalArgs, ReconstructArgs, SceneOpts, SynthArgs};

pub const DEPTH_DIR: &str = "depth";
pub const NORMAL_DIR: &str = "normal";
pub const VISIBILITY_DIR: &str = "visibility";
pub const REGION_DIR: &str = "regions";
pub const FUSED_FILE: &str = "fused.ply";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Defaults, then the config file, then flags.
fn resolve_config(opts: &SceneOpts, iterations: Option<usize>) -> Result<Config> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Config::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => Config::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(n) = iterations {
        cfg.engine.iterations = n;
    }
    if cfg.engine.depth_range.is_none() {
        let meta = opts.scene.join(META_FILE);
        if meta.is_file() {
            cfg.engine.depth_range = Some(SceneMeta::read(&meta)?.depth_range);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mono_dir(opts: &SceneOpts) -> PathBuf {
    opts.mono_depth_dir.clone().unwrap_or_else(|| opts.scene.join(MONO_DEPTH_DIR))
}

fn load(opts: &SceneOpts) -> Result<Scene> {
    Scene::load_dir(&opts.scene).with_context(|| format!("loading scene {}", opts.scene.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

#[derive(Serialize)]
struct RunInfo {
    tool: &'static str,
    tool_version: &'static str,
    core_version: &'static str,
    seed: u64,
    scene: String,
    mono_depth_dir: Option<String>,
    threads: usize,
    views: Vec<String>,
    fused_points: usize,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    run: RunInfo,
    config: &'a Config,
}

pub fn reconstruct(args: &ReconstructArgs) -> Result<()> {
    let opts = &args.scene;
    let cfg = resolve_config(opts, args.iterations)?;
    if args.dry_run {
        println!("# scene = {}", opts.scene.display());
        println!("# out = {}", args.out.display());
        println!("# mono_depth_dir = {}", mono_dir(opts).display());
        println!("# threads = {}", opts.threads);
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some([lo, hi]) = cfg.engine.depth_range else {
        bail!("no depth range: set engine.depth_range in the config or provide {META_FILE} in the scene directory");
    };
    let scene = load(opts)?;
    let mono: Vec<Option<DepthMapBuffer>> = if cfg.ablation.edge_prior {
        let dir = mono_dir(opts);
        load_mono_depths(&dir, &scene)
            .with_context(|| format!("loading monocular depth from {}", dir.display()))?
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None; scene.len()]
    };

    let started = Instant::now();
    let (views, cloud) = par::with_threads(opts.threads, || -> Result<_> {
        let out = run_pipeline(&scene, &mono, &cfg, &RunOptions::new((lo, hi)))?;
        let fusion: Vec<FusionView<'_>> = out
            .views
            .iter()
            .zip(&scene.cameras)
            .zip(&scene.colors)
            .map(|((v, camera), colors)| FusionView {
                camera,
                depth: &v.depth,
                normals: &v.normals,
                colors: colors.as_deref(),
            })
            .collect();
        let cloud = fuse(&fusion, &cfg.fusion, cfg.exec);
        Ok((out.views, cloud))
    })?;
    let seconds = started.elapsed().as_secs_f64();
    log::info!("{} fused points in {seconds:.1} s", cloud.len());

    create_dir(&args.out.join(DEPTH_DIR))?;
    create_dir(&args.out.join(NORMAL_DIR))?;
    for (name, v) in scene.names.iter().zip(&views) {
        let s = stem(name);
        write_depth_map(&v.depth, &args.out.join(DEPTH_DIR).join(format!("{s}.pfm")))?;
        write_normal_map(&v.normals, &args.out.join(NORMAL_DIR).join(format!("{s}.pfm")))?;
    }
    if args.dump_visibility {
        dump_visibility(&args.out.join(VISIBILITY_DIR), &scene, &views)?;
    }
    if args.dump_regions {
        let dir = args.out.join(REGION_DIR);
        create_dir(&dir)?;
        for (name, v) in scene.names.iter().zip(&views) {
            match &v.prior {
                Some(prior) => {
                    let s = stem(name);
                    dump_regions(&prior.map, &dir.join(format!("{s}.png")), &dir.join(format!("{s}.txt")))?;
                }
                None => log::warn!("{name}: no region prior to dump"),
            }
        }
    }
    write_point_cloud(&cloud, &args.out.join(FUSED_FILE))?;

    let config_path = args.out.join(CONFIG_FILE);
    std::fs::write(&config_path, cfg.to_toml()).with_context(|| format!("writing {}", config_path.display()))?;
    let manifest = Manifest {
        run: RunInfo {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            core_version: deform_mvs::VERSION,
            seed: cfg.seed,
            scene: opts.scene.display().to_string(),
            mono_depth_dir: cfg.ablation.edge_prior.then(|| mono_dir(opts).display().to_string()),
            threads: opts.threads,
            views: scene.names.clone(),
            fused_points: cloud.len(),
            seconds,
        },
        config: &cfg,
    };
    let manifest_path = args.out.join(MANIFEST_FILE);
    let text = toml::to_string_pretty(&manifest).context("serialising manifest")?;
    std::fs::write(&manifest_path, text).with_context(|| format!("writing {}", manifest_path.display()))?;
    println!("wrote {} views and {} points to {}", views.len(), cloud.len(), args.out.display());
    Ok(())
}

/// One single-channel PFM of weights per (view, source) pair.
fn dump_visibility(dir: &Path, scene: &Scene, views: &[ViewResult]) -> Result<()> {
    create_dir(dir)?;
    for (i, v) in views.iter().enumerate() {
        let sources = (0..scene.len()).filter(|&j| j != i);
        for (k, j) in sources.enumerate() {
            let img = PfmImage {
                width: v.visibility.width(),
                height: v.visibility.height(),
                channels: 1,
                data: v.visibility.plane(k),
            };
            let path = dir.join(format!("{}_{}.pfm", stem(&scene.names[i]), stem(&scene.names[j])));
            write_pfm(&img, &path)?;
        }
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    if args.width < 64 || args.height < 48 {
        bail!("synthetic scenes need at least 64x48 pixels");
    }
    let spec = SceneSpec::new(args.kind).with_size(args.width, args.height).with_seed(args.seed);
    let scene = generate_scene(&spec);
    scene.write(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({} views, {}x{}) to {}",
        args.kind,
        scene.cameras.len(),
        args.width,
        args.height,
        args.out.display()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let gt_path = match (&args.gt, &args.scene) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join(GT_POINTS_FILE),
        (None, None) => bail!("either --gt or --scene is required"),
    };
    let recon = read_point_cloud(&args.cloud)?.positions();
    let gt = read_point_cloud(&gt_path)?.positions();
    let tau = args.tau.unwrap_or_else(|| default_tau(&gt));
    let report = evaluate(&recon, &gt, tau, Default::default())?;
    print!("{}", report.to_text());
    if let Some(path) = &args.report {
        std::fs::write(path, report.to_key_values()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

pub fn dump_prior(args: &DumpPriorArgs) -> Result<()> {
    let opts = &args.scene;
    let cfg = resolve_config(opts, None)?;
    let scene = load(opts)?;
    let dir = mono_dir(opts);
    let mono = load_mono_depths(&dir, &scene).with_context(|| format!("loading monocular depth from {}", dir.display()))?;
    create_dir(&args.out)?;
    par::with_threads(opts.threads, || -> Result<()> {
        for (i, (name, m)) in scene.names.iter().zip(&mono).enumerate() {
            let prior = RegionPrior::build(m, &scene.images[i], &cfg.region, prior_seed(cfg.seed, i));
            let s = stem(name);
            dump_regions(&prior.map, &args.out.join(format!("{s}.png")), &args.out.join(format!("{s}.txt")))?;
            log::info!(
                "{name}: {} regions, {} splits, {} merges",
                prior.map.region_count(),
                prior.splits.len(),
                prior.merges.len()
            );
        }
        Ok(())
    })
}

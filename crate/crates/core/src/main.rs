use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ncsdf::dataset::{load_dataset, Dataset, Layout, NormalFrame};
use ncsdf::experiment::{bias_angular_error, evaluate_mesh, EvalOptions};
use ncsdf::fields::SceneModel;
use ncsdf::mesh::{eval_metrics, extract_mesh, sample_surface, EvalReport, Mesh, MeshOptions};
use ncsdf::render::{normal_bias_map, render_view, unit_domain, RenderOptions, Stage};
use ncsdf::sampler::{informative_mask, InformativeSampler};
use ncsdf::scene::{AnalyticScene, AxisRule, BiasMode, BiasSpec, SynthConfig, SynthData};
use ncsdf::train::{load_state, TrainConfig, Trainer};
use ncsdf::{Error, Result};

#[derive(Parser)]
#[command(name = "ncsdf", version, about = "Neural SDF reconstruction with view-dependent normal compensation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset with biased normal priors.
    Synth(SynthArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Render color, normal and bias-map panels from a trained model.
    Render(RenderArgs),
    /// Extract the zero level set as a PLY mesh.
    Mesh(MeshArgs),
    /// Compare a mesh with a reference and print accuracy, completeness and F-score.
    Eval(EvalArgs),
    /// Compare learned compensation with the rotations injected by `synth`.
    BiasReport(BiasReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SceneName {
    DefaultRoom,
    TableRoom,
    SmokeBox,
    UnitSphere,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasKind {
    None,
    Constant,
    Direction,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasAxis {
    Horizontal,
    View,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Both,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Directory layout of the dataset.
    #[arg(long, value_enum, default_value = "canonical")]
    layout: Layout,
    /// Frame the stored normal priors are expressed in.
    #[arg(long, value_enum, default_value = "world")]
    normal_frame: NormalFrame,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.data, self.normal_frame, self.layout)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthesis config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default-room")]
    scene: SceneName,
    #[arg(long)]
    views: Option<usize>,
    /// Image width and height in pixels.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, value_enum, default_value = "constant")]
    bias: BiasKind,
    /// Bias rotation angle in degrees.
    #[arg(long, default_value_t = 10.0)]
    bias_deg: f64,
    #[arg(long, value_enum, default_value = "horizontal")]
    bias_axis: BiasAxis,
    /// Per-pixel rotation noise, degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_deg: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// TOML training config; missing keys take desk defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// `1` stops after stage one, `2` continues from the latest checkpoint
    /// in `--out`, `both` runs everything.
    #[arg(long, value_enum, default_value = "both")]
    stage: StageArg,
    /// Continue from the latest checkpoint in `--out` if there is one.
    #[arg(long)]
    resume: bool,
    /// Print a progress line every this many iterations (0 disables).
    #[arg(long, default_value_t = 100)]
    progress: u64,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Trained model or checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Views to render (default: all).
    #[arg(long)]
    view: Vec<usize>,
    /// Render every n-th pixel.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Bias-map value drawn as white.
    #[arg(long, default_value_t = 0.5)]
    bias_scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset whose world frame the mesh is written in; without it the
    /// mesh stays in normalized coordinates.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "canonical")]
    layout: Layout,
    #[arg(long, value_enum, default_value = "world")]
    normal_frame: NormalFrame,
    /// Grid cells per axis.
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    /// Points evaluated per field call; bounds memory.
    #[arg(long, default_value_t = 8192)]
    chunk: usize,
    /// Drop connected pieces with fewer triangles.
    #[arg(long, default_value_t = 50)]
    min_component: usize,
    /// Output PLY path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted mesh (PLY).
    #[arg(long)]
    mesh: PathBuf,
    /// Reference mesh (PLY); sampled with the same seed as the prediction.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    gt: Option<PathBuf>,
    /// Synthetic dataset whose oracle depth is the reference.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Distance threshold in world units.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Points sampled from each surface.
    #[arg(long, default_value_t = 200_000)]
    points: usize,
    /// Visibility margin for culling against oracle depth.
    #[arg(long, default_value_t = 0.1)]
    cull_margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BiasReportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Evaluate every n-th pixel.
    #[arg(long, default_value_t = 2)]
    stride: usize,
    /// Also write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each view's edge intensity map and its high/low threshold masks
    /// as PNGs into this directory.
    #[arg(long)]
    sampler_maps: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            report_error("config", 2, first.trim_start_matches("error: "));
            eprint!("{msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            report_error("config", 2, &e.to_string());
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            let (name, code) = match class {
                ncsdf::error::FailureClass::Config => ("config", 2),
                ncsdf::error::FailureClass::Data => ("data", 3),
                ncsdf::error::FailureClass::Numeric => ("numeric", 4),
            };
            report_error(name, code, &e.to_string());
            ExitCode::from(code)
        }
    }
}

/// One JSON object per failure on stderr.
fn report_error(class: &str, code: u8, message: &str) {
    let line = serde_json::json!({ "error": class, "code": code, "message": message });
    eprintln!("{line}");
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Render(a) => render(a),
        Command::Mesh(a) => mesh(a),
        Command::Eval(a) => eval(a),
        Command::BiasReport(a) => bias_report(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => {
            let scene = match a.scene {
                SceneName::DefaultRoom => AnalyticScene::default_room(),
                SceneName::TableRoom => AnalyticScene::table_room(),
                SceneName::SmokeBox => AnalyticScene::smoke_box(),
                SceneName::UnitSphere => AnalyticScene::unit_sphere(),
            };
            let axis = match a.bias_axis {
                BiasAxis::Horizontal => AxisRule::Horizontal,
                BiasAxis::View => AxisRule::ViewDirection,
            };
            let mut bias = match a.bias {
                BiasKind::None => BiasSpec::none(),
                BiasKind::Constant => BiasSpec::constant_per_view(a.bias_deg.to_radians(), axis),
                BiasKind::Direction => BiasSpec {
                    mode: BiasMode::DirectionDependent,
                    ..BiasSpec::constant_per_view(a.bias_deg.to_radians(), axis)
                },
            };
            bias.noise_std = a.noise_deg.to_radians();
            SynthConfig::new(scene, 12, bias, 0)
        }
    };
    if let Some(v) = a.views {
        cfg.n_views = v;
    }
    if let Some(r) = a.resolution {
        cfg.rig.width = r;
        cfg.rig.height = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.n_views == 0 || cfg.rig.width == 0 || cfg.rig.height == 0 {
        return Err(Error::InvalidArgument("views and resolution must be positive".into()));
    }
    let data = SynthData::generate(&cfg)?;
    let summary = ncsdf::scene::write_dataset(&a.out, &data)?;
    write_text(&a.out.join("synth.json"), &serde_json::to_string_pretty(&cfg)?)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = a.data.load()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let latest = Trainer::latest_checkpoint(&a.out);
    let continuing = a.resume || a.stage == StageArg::Two;
    let mut trainer = match (continuing, latest) {
        (true, Some(path)) => {
            if a.config.is_some() || a.seed.is_some() {
                eprintln!("note: resuming from {}; --config and --seed are taken from it", path.display());
            }
            Trainer::resume(&path, &ds)?
        }
        (true, None) if a.stage == StageArg::Two => {
            return Err(Error::Config(format!(
                "--stage 2 needs a checkpoint in {}",
                a.out.display()
            )))
        }
        _ => {
            let mut cfg = match &a.config {
                Some(p) => TrainConfig::load(p)?,
                None => TrainConfig::desk(),
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            Trainer::new(cfg, &ds)?
        }
    };
    trainer = trainer.with_output(&a.out)?;
    write_text(&a.out.join("config.toml"), &trainer.config.to_toml_string())?;
    let every = a.progress;
    let progress = |r: &ncsdf::train::StepReport| {
        if every > 0 && (r.iteration + 1) % every == 0 {
            println!(
                "iter {} stage {:?} color {:.5} normal {:.5} eikonal {:.5} total {:.5} r {:.3} lr {:.2e}",
                r.iteration + 1,
                r.stage,
                r.parts.color,
                r.parts.normal,
                r.parts.eikonal,
                r.total,
                r.r,
                r.lr
            );
        }
    };
    if a.stage == StageArg::One {
        let end = trainer.config.stage1_iters as u64;
        trainer.run_until(end, progress)?;
        trainer.checkpoint()?;
        ncsdf::train::save_state(&a.out.join("model.bin"), &trainer.config, &trainer.state)?;
    } else {
        trainer.run(progress)?;
    }
    println!("done at iteration {}; model in {}", trainer.state.iteration, a.out.join("model.bin").display());
    Ok(())
}

fn load_any_model(path: &Path) -> Result<(TrainConfig, SceneModel, u64)> {
    let (cfg, state) = load_state(path)?;
    Ok((cfg, state.model, state.iteration))
}

fn to_rgb8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn save_rgb(path: &Path, w: usize, h: usize, px: impl Iterator<Item = [f64; 3]>) -> Result<()> {
    let bytes: Vec<u8> = px.flat_map(|c| c.map(to_rgb8)).collect();
    image::RgbImage::from_raw(w as u32, h as u32, bytes)
        .ok_or_else(|| Error::ShapeMismatch(format!("{w}x{h} image buffer")))?
        .save(path)?;
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let ds = a.data.load()?;
    let (cfg, model, iteration) = load_any_model(&a.checkpoint)?;
    let views: Vec<usize> = if a.view.is_empty() { (0..ds.len()).collect() } else { a.view.clone() };
    if let Some(v) = views.iter().find(|v| **v >= ds.len()) {
        return Err(Error::InvalidArgument(format!("view {v} out of range (dataset has {})", ds.len())));
    }
    if !(a.bias_scale > 0.0) {
        return Err(Error::InvalidArgument("--bias-scale must be positive".into()));
    }
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let stage = if iteration >= cfg.stage1_iters as u64 && cfg.compensation {
        Stage::Two
    } else {
        Stage::One
    };
    let opts = RenderOptions {
        stage,
        sampling: cfg.sampling.clone(),
        background: cfg.background,
    };
    let map = |n: [f64; 3]| n.map(|c| 0.5 * (c + 1.0));
    for v in views {
        let r = render_view(&model, &ds.frames[v].pose, v, &opts, a.stride, cfg.ray_chunk);
        let (w, h) = (r.width, r.height);
        save_rgb(&a.out.join(format!("view{v:03}_color.png")), w, h, r.color.iter().copied())?;
        save_rgb(&a.out.join(format!("view{v:03}_normal_comp.png")), w, h, r.normal_comp.iter().map(|n| map(*n)))?;
        save_rgb(&a.out.join(format!("view{v:03}_normal_sdf.png")), w, h, r.normal_sdf.iter().map(|n| map(*n)))?;
        let bias = normal_bias_map(&r.normal_sdf, &r.normal_comp)?;
        save_gray(&a.out.join(format!("view{v:03}_bias.png")), w, h, bias.iter().map(|b| b / a.bias_scale))?;
        println!("view {v}: mean bias {:.5}", bias.iter().sum::<f64>() / bias.len().max(1) as f64);
    }
    Ok(())
}

fn mesh(a: MeshArgs) -> Result<()> {
    let (_, model, _) = load_any_model(&a.checkpoint)?;
    let opts = MeshOptions {
        resolution: a.resolution,
        min_component_triangles: a.min_component,
        chunk: a.chunk,
    };
    let mut m = extract_mesh(&model.geometry, &opts, &unit_domain())?;
    if let Some(dir) = &a.data {
        let ds = load_dataset(dir, a.normal_frame, a.layout)?;
        m = m.transformed(&ds.transform.inverse());
    }
    if m.is_empty() {
        return Err(Error::Empty("extracted mesh is empty".into()));
    }
    m.write_ply(&a.out)?;
    println!("{} vertices, {} triangles -> {}", m.vertices.len(), m.triangles.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = Mesh::read_ply(&a.mesh)?;
    let report: EvalReport = match (&a.gt, &a.data) {
        (Some(gt), _) => {
            let gt = Mesh::read_ply(gt)?;
            let p = sample_surface(&pred, a.points, a.seed)?;
            let g = sample_surface(&gt, a.points, a.seed)?;
            eval_metrics(&p, &g, a.threshold)?
        }
        (None, Some(dir)) => {
            let ds = load_dataset(dir, NormalFrame::World, Layout::Canonical)?;
            let opts = EvalOptions {
                points: a.points,
                threshold: a.threshold,
                cull_margin: a.cull_margin,
                seed: a.seed,
                ..Default::default()
            };
            evaluate_mesh(&pred, &ds, &opts)?
        }
        (None, None) => return Err(Error::Config("eval needs --gt or --data".into())),
    };
    println!("{}", EvalReport::CSV_HEADER);
    println!("{}", report.csv_row());
    if let Some(p) = &a.out {
        write_text(p, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn save_gray(path: &Path, w: usize, h: usize, px: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = px.map(to_rgb8).collect();
    image::GrayImage::from_raw(w as u32, h as u32, bytes)
        .ok_or_else(|| Error::ShapeMismatch(format!("{w}x{h} image buffer")))?
        .save(path)?;
    Ok(())
}

fn write_sampler_maps(dir: &Path, ds: &Dataset, cfg: &TrainConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sampler = InformativeSampler::new(ds, cfg.schedule.clone(), &cfg.canny);
    let dilation = cfg.schedule.dilation;
    let (w, h) = (ds.width, ds.height);
    for (v, map) in sampler.maps.iter().enumerate() {
        let peak = map.data.iter().copied().fold(0.0, f64::max);
        let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
        save_gray(&dir.join(format!("view{v:03}_intensity.png")), w, h, map.data.iter().map(|x| x * scale))?;
        for (name, t) in [("high", sampler.high[v]), ("low", sampler.low[v])] {
            let mask = informative_mask(map, t, dilation);
            save_gray(
                &dir.join(format!("view{v:03}_mask_{name}.png")),
                w,
                h,
                mask.iter().map(|m| if *m { 1.0 } else { 0.0 }),
            )?;
        }
    }
    Ok(())
}

fn bias_report(a: BiasReportArgs) -> Result<()> {
    let ds = a.data.load()?;
    let (cfg, model, _) = load_any_model(&a.checkpoint)?;
    if let Some(dir) = &a.sampler_maps {
        write_sampler_maps(dir, &ds, &cfg)?;
    }
    let r = bias_angular_error(&model, &ds, a.stride)?;
    println!("view,mean_angular_error_deg");
    for (v, e) in r.per_view.iter().enumerate() {
        println!("{v},{e:.4}");
    }
    println!("all,{:.4}", r.mean);
    if let Some(p) = &a.out {
        write_text(p, &serde_json::to_string_pretty(&r)?)?;
    }
    Ok(())
}

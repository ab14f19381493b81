//! Command-line definitions and dispatch.

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use forge_core::diffusion::{save_model, NoiseSchedule, SampleConfig, TrainConfig};
use forge_core::geom::{export_mesh, MeshFormat};
use forge_core::inpaint::{KernelModel, MaskDistribution};
use forge_core::pipeline::{self, run_pipeline, InpaintConfig, ModelHandle, ModelSource, PipelineConfig, ProjectStore};
use forge_core::raster::{decode_gray8, decode_mask_png, decode_rgb8, encode_gray8};
use forge_core::synth::{build_dataset, DatasetConfig, SketchParams};
use forge_core::{CameraIntrinsics, Error, Result};

use crate::api::{router, AppState};
use crate::config;
use crate::opts::{ExtractOpts, InpaintOpts, ReconstructOpts};

#[derive(Debug, Parser)]
#[command(name = "forge", version, about = "Reconstruct candidate 3D meshes from photographs of line sketches")]
pub struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with flag values; flags on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Photo to binary sketch.
    Extract(ExtractCmd),
    /// Fill the holes of a sketch.
    Inpaint(InpaintCmd),
    /// Render a synthetic training dataset.
    Synth(SynthCmd),
    /// Train the generation model on a synthetic dataset.
    Train(TrainCmd),
    /// Sample depth and normal variants for a restored sketch.
    Generate(GenerateCmd),
    /// Depth and normal maps to a mesh.
    Reconstruct(ReconstructCmd),
    /// Every stage on one photo, into a project directory.
    Run(RunCmd),
    /// Serve the HTTP API.
    Serve(ServeCmd),
}

#[derive(Debug, Args)]
pub struct ExtractCmd {
    #[arg(short, long, value_name = "PNG")]
    pub input: PathBuf,
    #[arg(short, long, value_name = "PNG")]
    pub output: PathBuf,
    #[command(flatten)]
    pub opts: ExtractOpts,
}

#[derive(Debug, Args)]
pub struct InpaintCmd {
    #[arg(short, long, value_name = "PNG")]
    pub input: PathBuf,
    /// Hole mask, 255 = hole. Without one the sketch is copied.
    #[arg(long, value_name = "PNG")]
    pub mask: Option<PathBuf>,
    #[arg(short, long, value_name = "PNG")]
    pub output: PathBuf,
    /// Learned kernel refinement model.
    #[arg(long, value_name = "FILE")]
    pub kernel: Option<PathBuf>,
    #[command(flatten)]
    pub opts: InpaintOpts,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub statues: usize,
    #[arg(long, default_value_t = 4)]
    pub views: usize,
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    /// Depth-discontinuity threshold of the derived sketches, meters.
    #[arg(long)]
    pub tau_d: Option<f32>,
    /// Crease angle threshold of the derived sketches, degrees.
    #[arg(long)]
    pub tau_n: Option<f32>,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Dataset directory written by `forge synth`.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Probability of dropping the condition during training.
    #[arg(long, default_value_t = 0.1)]
    pub p_uncond: f64,
    #[arg(long, default_value_t = 200)]
    pub schedule_steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 0.02)]
    pub beta_end: f64,
    /// Also train a kernel inpainting model and write it here.
    #[arg(long, value_name = "FILE")]
    pub kernel_out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub kernel_steps: usize,
}

#[derive(Debug, Args)]
pub struct SampleOpts {
    /// Number of variants.
    #[arg(short = 'n', long, default_value_t = 4)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub guidance_scale: f32,
    /// Conditioning tag id (0 = none).
    #[arg(long, default_value_t = 1)]
    pub tag_id: usize,
}

impl SampleOpts {
    fn resolve(&self, seed: Option<u64>) -> Result<SampleConfig> {
        let cfg = SampleConfig {
            n_samples: self.n_samples,
            guidance_scale: self.guidance_scale,
            seed: seed.unwrap_or(0),
            tag_id: self.tag_id,
        };
        pipeline::check_sample_config(&cfg)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenerateCmd {
    /// Restored sketch.
    #[arg(short, long, value_name = "PNG")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Directory receiving `<k>/depth.png` and `<k>/normal.png`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sample: SampleOpts,
}

#[derive(Debug, Args)]
pub struct ReconstructCmd {
    #[arg(long, value_name = "PNG")]
    pub depth: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub normal: PathBuf,
    /// Depth range the depth PNG is quantized against, meters.
    #[arg(long, required = true)]
    pub near: Option<f32>,
    #[arg(long, required = true)]
    pub far: Option<f32>,
    /// Focal length in pixels (default: 1.2 x width).
    #[arg(long)]
    pub focal: Option<f64>,
    /// Output mesh; the format follows the extension unless --format is given.
    #[arg(short, long, value_name = "FILE")]
    pub output: PathBuf,
    #[command(flatten)]
    pub opts: ReconstructOpts,
}

#[derive(Debug, Args)]
pub struct RunCmd {
    #[arg(short, long, value_name = "PNG")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Project directory; created when absent, its stages replaced otherwise.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, value_name = "PNG")]
    pub mask: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub kernel: Option<PathBuf>,
    #[command(flatten)]
    pub extract: ExtractOpts,
    #[command(flatten)]
    pub inpaint: InpaintOpts,
    #[command(flatten)]
    pub sample: SampleOpts,
    #[command(flatten)]
    pub reconstruct: ReconstructOpts,
}

#[derive(Debug, Args)]
pub struct ServeCmd {
    #[arg(long, env = "FORGE_PROJECTS_DIR", value_name = "DIR")]
    pub projects: PathBuf,
    /// Without a model, generation answers 503.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub kernel: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.display().to_string()),
        _ => e.into(),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn load_kernel(path: Option<&Path>) -> Result<Option<KernelModel>> {
    path.map(|p| KernelModel::from_bytes(&read(p)?)).transpose()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn progress_line(label: &str) -> impl FnMut(usize, usize) + '_ {
    let mut last = usize::MAX;
    move |done, total| {
        let pct = (done * 100).checked_div(total).unwrap_or(100);
        if pct / 10 != last / 10 || done == total {
            last = pct;
            eprintln!("{label}: {done}/{total}");
        }
    }
}

fn extract(c: &ExtractCmd) -> Result<()> {
    let cfg = c.opts.resolve()?;
    let photo = decode_rgb8(&read(&c.input)?)?;
    write(&c.output, &pipeline::extract_from_photo(&photo, &cfg)?)
}

fn inpaint(c: &InpaintCmd) -> Result<()> {
    let cfg: InpaintConfig = c.opts.resolve()?;
    let sketch = decode_gray8(&read(&c.input)?)?;
    let mask = c.mask.as_deref().map(|m| decode_mask_png(&read(m)?)).transpose()?;
    let kernel = load_kernel(c.kernel.as_deref())?;
    let restored = pipeline::restore_sketch(&sketch, mask.as_ref(), &cfg, kernel.as_ref())?;
    write(&c.output, &encode_gray8(&restored)?)
}

fn synth(c: &SynthCmd, seed: u64) -> Result<()> {
    let mut cfg = DatasetConfig::default();
    let d = SketchParams::default();
    cfg.sketch = SketchParams { tau_d: c.tau_d.unwrap_or(d.tau_d), tau_n: c.tau_n.unwrap_or(d.tau_n) };
    let m = build_dataset(&c.out, c.statues, c.views, c.resolution, seed, &cfg)?;
    eprintln!("wrote {} samples to {}", m.samples.len(), c.out.display());
    Ok(())
}

fn train(c: &TrainCmd, seed: u64) -> Result<()> {
    let manifest = forge_core::synth::load_dataset(&c.data)?.0;
    let cfg = TrainConfig {
        learning_rate: c.lr,
        batch_size: c.batch_size,
        steps: c.steps,
        p_uncond: c.p_uncond,
        seed,
        resolution: manifest.resolution,
        ..Default::default()
    };
    let schedule = NoiseSchedule::linear(c.schedule_steps, c.beta_start, c.beta_end)?;
    let every = (c.steps / 10).max(1);
    let (model, _) = pipeline::train_from_dataset(&c.data, &cfg, &schedule, |step, loss| {
        if step % every == 0 || step == c.steps {
            eprintln!("step {step}/{}: loss {loss:.5}", c.steps);
        }
    })?;
    if let Some(parent) = c.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_model(&model, &c.output)?;
    if let Some(path) = &c.kernel_out {
        let kcfg = TrainConfig { steps: c.kernel_steps, ..cfg };
        let (kernel, losses) = pipeline::train_kernel_from_dataset(
            &c.data,
            &kcfg,
            &MaskDistribution::default(),
            InpaintConfig::default().radius,
        )?;
        eprintln!("kernel model: final loss {:.5}", losses.last().copied().unwrap_or(f32::NAN));
        write(path, &kernel.to_bytes())?;
    }
    Ok(())
}

fn generate(c: &GenerateCmd, seed: Option<u64>) -> Result<()> {
    let cfg = c.sample.resolve(seed)?;
    let model = ModelHandle::load(&c.model)?;
    let restored = decode_gray8(&read(&c.input)?)?;
    let maps = pipeline::generate_variants(&model.model, &restored, &cfg, progress_line("sampling"))?;
    for (k, (depth, normal)) in pipeline::encode_variants(&maps)?.iter().enumerate() {
        let dir = c.out.join(k.to_string());
        write(&dir.join("depth.png"), depth)?;
        write(&dir.join("normal.png"), normal)?;
    }
    Ok(())
}

fn reconstruct(c: &ReconstructCmd) -> Result<()> {
    let mut opts = c.opts.clone();
    if opts.format.is_none() {
        opts.format = Some(MeshFormat::from_extension(&c.output).ok_or_else(|| {
            Error::InvalidArgument(format!("cannot infer the mesh format of {}; pass --format", c.output.display()))
        })?);
    }
    let cfg = opts.resolve()?;
    let (near, far) = (c.near.expect("required"), c.far.expect("required"));
    let (depth, normals) = pipeline::decode_variant(&read(&c.depth)?, &read(&c.normal)?, near, far)?;
    let (w, h) = (depth.width(), depth.height());
    let f = c.focal.unwrap_or(1.2 * w as f64);
    let k = CameraIntrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h)?;
    let mesh = pipeline::reconstruct_mesh(&depth, &normals, &k, &cfg)?;
    write(&c.output, &export_mesh(&mesh, cfg.format)?)
}

fn run(c: &RunCmd, seed: Option<u64>) -> Result<()> {
    let cfg = PipelineConfig {
        extract: c.extract.resolve()?,
        inpaint: c.inpaint.resolve()?,
        generate: c.sample.resolve(seed)?,
        reconstruct: c.reconstruct.resolve()?,
    };
    let photo = read(&c.input)?;
    let mask = c.mask.as_deref().map(read).transpose()?;
    let kernel = load_kernel(c.kernel.as_deref())?;
    let dir = std::path::absolute(&c.out)?;
    let (root, id) = match (dir.parent(), dir.file_name().and_then(|n| n.to_str())) {
        (Some(root), Some(id)) => (root.to_path_buf(), id.to_string()),
        _ => return Err(Error::InvalidArgument(format!("{} cannot be a project directory", c.out.display()))),
    };
    let store = ProjectStore::open(root)?;
    let p = run_pipeline(
        &store,
        &id,
        &id,
        now(),
        &photo,
        mask.as_deref(),
        &ModelSource::Path(c.model.clone()),
        kernel.as_ref(),
        &cfg,
        progress_line("sampling"),
    )?;
    for v in &p.runs.last().expect("one run").variants {
        if let Some(m) = &v.mesh {
            println!("{}", dir.join(&m.path).display());
        }
    }
    Ok(())
}

fn serve(c: &ServeCmd) -> Result<()> {
    let store = ProjectStore::open(&c.projects)?;
    let model = c.model.as_deref().map(ModelHandle::load).transpose()?.map(Arc::new);
    let kernel = load_kernel(c.kernel.as_deref())?.map(Arc::new);
    let app = router(AppState::new(store, model, kernel));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(c.listen).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await
    })?;
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.seed;
    match &cli.command {
        Command::Extract(c) => extract(c),
        Command::Inpaint(c) => inpaint(c),
        Command::Synth(c) => synth(c, seed.unwrap_or(0)),
        Command::Train(c) => train(c, seed.unwrap_or(0)),
        Command::Generate(c) => generate(c, seed),
        Command::Reconstruct(c) => reconstruct(c),
        Command::Run(c) => run(c, seed),
        Command::Serve(c) => serve(c),
    }
}

/// Parses `args` (program name first) with the config file merged in.
pub fn parse(args: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let cmd = Cli::command();
    let merged = config::merge(&cmd, args)?;
    let matches = cmd.try_get_matches_from(merged)?;
    Cli::from_arg_matches(&matches)
}

/// Runs the command line and returns the process exit code: 0 on
/// success, 1 on a usage error, 2 on a runtime failure.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let cli = match parse(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

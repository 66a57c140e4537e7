use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info, warn};

use rtm3d::config::RunConfig;
use rtm3d::eval::{evaluate, Difficulty, Interpolation};
use rtm3d::kitti::label_to_box3d;
use rtm3d::par;
use rtm3d::pipeline::{self, InputSource, ObjectOutcome, PipelineError};
use rtm3d::svg::{render_bev, BevView};

/// Monocular 3D box recovery from projected keypoints.
#[derive(Parser, Debug)]
#[command(name = "rtm3d", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// BEV and 3D IoU threshold; all configured thresholds when omitted.
    #[arg(long, global = true, value_parser = ["0.5", "0.7"])]
    iou: Option<String>,
    #[arg(long, global = true, value_enum)]
    difficulty: Option<DifficultyArg>,
    /// Overrides one configuration key, e.g. `--set noise.pixel_sigma=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DifficultyArg {
    Easy,
    Moderate,
    Hard,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SourceArg {
    Auto,
    Keypoints,
    Headmaps,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic frames with labels, calibration, keypoints, priors and head maps.
    Synth {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Recover 3D boxes and write KITTI result files.
    Solve {
        /// Dataset directory with keypoints/ or headmaps/ and calib/.
        #[arg(long, short)]
        input: PathBuf,
        /// Calibration directory, `<input>/calib` by default.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SourceArg::Auto)]
        source: SourceArg,
    },
    /// Score result files against ground-truth labels.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Summary file, `<results>/summary.txt` by default.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Draw ground truth and results of one frame from above as SVG.
    RenderBev {
        /// Ground-truth label file.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Result label file.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        /// Pixels per meter.
        #[arg(long, default_value_t = 10.0)]
        scale: f64,
    },
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

const USAGE: u8 = 1;
const INPUT: u8 = 2;
const INTERNAL: u8 = 3;

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |err| Failure { code, err }
}

fn from_pipeline(e: PipelineError) -> Failure {
    let code = match &e {
        PipelineError::Config(_) => USAGE,
        e if e.is_input_error() => INPUT,
        _ => INTERNAL,
    };
    Failure { code, err: e.into() }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(fail(INPUT))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display())).map_err(fail(INPUT))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(iou) = &common.iou {
        cfg.set("eval.iou", iou).map_err(|e| fail(USAGE)(e.into()))?;
    }
    if let Some(d) = common.difficulty {
        cfg.difficulties = vec![match d {
            DifficultyArg::Easy => Difficulty::Easy,
            DifficultyArg::Moderate => Difficulty::Moderate,
            DifficultyArg::Hard => Difficulty::Hard,
        }];
    }
    for kv in &common.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| fail(USAGE)(anyhow!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| fail(USAGE)(e.into()))?;
    }
    cfg.validate().map_err(|e| fail(USAGE)(e.into()))?;
    Ok(cfg)
}

fn cmd_synth(mut cfg: RunConfig, out: &Path, frames: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = frames {
        cfg.frames = n;
    }
    let s = pipeline::run_synth(&cfg, out).map_err(from_pipeline)?;
    println!(
        "wrote {} frames with {} objects ({} solvable) to {}",
        s.frames,
        s.objects,
        s.usable,
        out.display()
    );
    Ok(())
}

fn cmd_solve(cfg: RunConfig, input: &Path, calib: Option<&Path>, out: &Path, source: SourceArg) -> Result<(), Failure> {
    let source = match source {
        SourceArg::Auto => InputSource::Auto,
        SourceArg::Keypoints => InputSource::Keypoints,
        SourceArg::Headmaps => InputSource::Headmaps,
    };
    let summary = pipeline::run_solve(&cfg, input, calib, out, source).map_err(from_pipeline)?;
    for o in &summary.objects {
        match &o.outcome {
            ObjectOutcome::Solved { report, time } => debug!(
                "frame {} object {}: {} iterations, cost {:.3e}, converged {}, {:.3} ms",
                o.frame,
                o.index,
                report.iterations,
                report.final_cost,
                report.converged,
                time.as_secs_f64() * 1e3
            ),
            ObjectOutcome::Skipped { reason } => info!("frame {} object {}: skipped: {reason}", o.frame, o.index),
        }
    }
    let median = summary
        .median_time()
        .map(|t| format!("{:.3} ms", t.as_secs_f64() * 1e3))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "frames {} solved {} skipped {} failed {} median solve time per object {median}",
        summary.frames,
        summary.solved(),
        summary.skipped(),
        summary.failures.len()
    );
    if summary.failures.is_empty() {
        return Ok(());
    }
    for e in &summary.failures {
        eprintln!("error: {e}");
    }
    let code = if summary.failures.iter().all(PipelineError::is_input_error) { INPUT } else { INTERNAL };
    Err(Failure { code, err: anyhow!("{} frame(s) failed", summary.failures.len()) })
}

fn cmd_eval(cfg: RunConfig, results: &Path, gt: &Path, summary: Option<&Path>) -> Result<(), Failure> {
    let (_, frames) = pipeline::load_eval_frames(results, gt).map_err(from_pipeline)?;
    let interp: Interpolation = cfg.interpolation;
    let report = evaluate(&frames, &cfg.iou, &cfg.difficulties, interp);
    print!("{}", report.text());
    let path = summary.map(Path::to_path_buf).unwrap_or_else(|| results.join("summary.txt"));
    std::fs::write(&path, report.summary())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(fail(INTERNAL))?;
    info!("summary written to {}", path.display());
    Ok(())
}

fn read_boxes(path: Option<&Path>) -> Result<Vec<rtm3d::geometry::Box3D>, Failure> {
    let Some(path) = path else { return Ok(Vec::new()) };
    let labels = pipeline::read_labels(path).map_err(from_pipeline)?;
    Ok(labels.iter().filter(|l| !l.is_dontcare()).map(label_to_box3d).collect())
}

fn cmd_render(gt: Option<&Path>, results: Option<&Path>, out: &Path, scale: f64) -> Result<(), Failure> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(fail(USAGE)(anyhow!("--scale must be positive")));
    }
    let view = BevView { scale, ..BevView::default() };
    let svg = render_bev(&read_boxes(gt)?, &read_boxes(results)?, &view);
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display())).map_err(fail(INTERNAL))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    if !par::is_parallel() && cli.common.jobs > 1 {
        warn!("built without the parallel feature, --jobs ignored");
    }
    par::with_jobs(cli.common.jobs, move || match cli.cmd {
        Command::Synth { out, frames } => cmd_synth(cfg, &out, frames),
        Command::Solve { input, calib, out, source } => cmd_solve(cfg, &input, calib.as_deref(), &out, source),
        Command::Eval { results, gt, summary } => cmd_eval(cfg, &results, &gt, summary.as_deref()),
        Command::RenderBev { gt, results, out, scale } => cmd_render(gt.as_deref(), results.as_deref(), &out, scale),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RTM3D_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

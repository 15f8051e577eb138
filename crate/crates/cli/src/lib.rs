//! Command implementations behind the `ledloc` binary.
//!
//! `point` prints a plain-text report, one `key value...` line per scalar
//! and an indented row per matrix row:
//!
//! ```text
//! led_m                   x y z
//! e_ps_theory_m           v
//! e_ps_mc_m               v
//! mc_stderr_m             v
//! trials                  <valid> valid, <degenerate> degenerate
//! error_covariance_m2
//!   c11 c12 c13
//!   c21 c22 c23
//!   c31 c32 c33
//! incidence_covariance_1
//!   ...
//! incidence_covariance_2
//!   ...
//! ```
//!
//! Numbers use `{:.9e}`, failed values print as `nan`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ledloc_core::config::{load_config, preset, ExperimentConfig, SceneConfig};
use ledloc_core::harness::{evaluate_point, point_rng, sweep};
use ledloc_core::report::{read_csv, render_svg, sweep_csv};
use ledloc_core::{theoretical_breakdown, Error, Mat3, NoiseModel, Vec3};

#[derive(Debug, Parser)]
#[command(
    name = "ledloc",
    version,
    about = "Two-receiver AOA beacon localization: error maps and Monte Carlo checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theory and Monte Carlo error over the LED grid, written as CSV.
    Sweep(SweepArgs),
    /// Detailed error report for a single LED position.
    Point(PointArgs),
    /// Render a sweep CSV as an SVG heatmap.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SceneSource {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled configuration (fig3 or fig4).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Args)]
#[group(required = false, multiple = false)]
pub struct MarkerSource {
    /// Configuration whose estimator positions are marked on the plot.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled configuration whose estimator positions are marked.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Noise {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Monte Carlo trials per point.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Receiver noise; `off` zeroes both noise coefficients.
    #[arg(long, value_enum, default_value = "on")]
    pub noise: Noise,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SceneSource,
    #[arg(long)]
    pub out: PathBuf,
    /// Grid spacing in meters.
    #[arg(long)]
    pub step: Option<f64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub source: SceneSource,
    /// LED x coordinate (m).
    #[arg(long, allow_hyphen_values = true)]
    pub x: f64,
    /// LED y coordinate (m).
    #[arg(long, allow_hyphen_values = true)]
    pub y: f64,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub markers: MarkerSource,
}

/// A fatal command failure, reported on stderr.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

fn load(
    config: &Option<PathBuf>,
    preset_name: &Option<String>,
) -> Result<Option<(SceneConfig, ExperimentConfig)>, Error> {
    match (config, preset_name) {
        (Some(path), _) => load_config(path).map(Some),
        (None, Some(name)) => preset(name).map(Some),
        (None, None) => Ok(None),
    }
}

fn apply(exp: &mut ExperimentConfig, o: &Overrides) {
    if let Some(t) = o.trials {
        exp.trials = t;
    }
    if let Some(s) = o.seed {
        exp.seed = s;
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.9e}")
    }
}

fn write_matrix(out: &mut dyn Write, name: &str, m: &Mat3) -> std::io::Result<()> {
    writeln!(out, "{name}")?;
    for row in m.0 {
        writeln!(out, "  {:>16} {:>16} {:>16}", num(row[0]), num(row[1]), num(row[2]))?;
    }
    Ok(())
}

/// Runs `sweep`. Returns the messages of failed grid points; the CSV is
/// written either way.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<String>, Failure> {
    let (scene_cfg, mut exp) = load(&args.source.config, &args.source.preset)?.expect("clap enforces a source");
    apply(&mut exp, &args.overrides);
    if let Some(step) = args.step {
        exp.step_m = step;
    }
    let mut spec = exp.to_spec(&scene_cfg)?;
    if args.overrides.noise == Noise::Off {
        spec.scene.noise = NoiseModel::noiseless();
    }
    let result = match args.workers {
        Some(0) => return Err(Failure("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure(e.to_string()))?
            .install(|| sweep(&spec))?,
        None => sweep(&spec)?,
    };
    write_file(&args.out, &sweep_csv(&result)?)?;
    Ok(result
        .records
        .iter()
        .filter(|r| !r.errors.is_empty())
        .map(|r| format!("point ({}, {}): {}", r.led.x, r.led.y, r.errors.join("; ")))
        .collect())
}

/// Runs `point`, printing the report to `out`.
pub fn cmd_point(args: &PointArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let (scene_cfg, mut exp) = load(&args.source.config, &args.source.preset)?.expect("clap enforces a source");
    apply(&mut exp, &args.overrides);
    exp.validate(&scene_cfg)?;
    let room = &scene_cfg.room;
    for (name, v, r) in [("x", args.x, room.x), ("y", args.y, room.y)] {
        if !(v >= r[0] && v <= r[1]) {
            return Err(Failure(format!(
                "--{name} {v} lies outside the room [{}, {}]",
                r[0], r[1]
            )));
        }
    }
    let mut scene = scene_cfg.to_scene()?;
    if args.overrides.noise == Noise::Off {
        scene.noise = NoiseModel::noiseless();
    }
    let led = Vec3::new(args.x, args.y, scene_cfg.led.height);
    let theory = theoretical_breakdown(&scene, led).map_err(|e| match e {
        Error::DegenerateGeometry(_) => Failure(format!(
            "{e}; the two incidence rays are nearly parallel at this LED position, so the triangulation is ill-conditioned"
        )),
        e => e.into(),
    })?;
    let mut rng = point_rng(exp.seed, 0);
    let mc = evaluate_point(&scene, led, exp.trials, &mut rng);

    let io = |e: std::io::Error| Failure(format!("cannot write report: {e}"));
    writeln!(out, "{:<24}{} {} {}", "led_m", num(led.x), num(led.y), num(led.z)).map_err(io)?;
    writeln!(out, "{:<24}{}", "e_ps_theory_m", num(theory.report.e_ps)).map_err(io)?;
    writeln!(out, "{:<24}{}", "e_ps_mc_m", num(mc.e_ps_mc)).map_err(io)?;
    writeln!(out, "{:<24}{}", "mc_stderr_m", num(mc.mc_std_err)).map_err(io)?;
    writeln!(
        out,
        "{:<24}{} valid, {} degenerate",
        "trials", mc.valid_trials, mc.degenerate_trials
    )
    .map_err(io)?;
    write_matrix(out, "error_covariance_m2", &theory.report.covariance).map_err(io)?;
    write_matrix(out, "incidence_covariance_1", &theory.incidence_covariances[0]).map_err(io)?;
    write_matrix(out, "incidence_covariance_2", &theory.incidence_covariances[1]).map_err(io)?;
    if !mc.errors.is_empty() {
        return Err(Failure(mc.errors.join("; ")));
    }
    Ok(())
}

pub fn cmd_plot(args: &PlotArgs) -> Result<(), Failure> {
    let file =
        fs::File::open(&args.input).map_err(|e| Failure(format!("cannot read {}: {e}", args.input.display())))?;
    let rows = read_csv(file).map_err(|e| Failure(format!("{}: {e}", args.input.display())))?;
    let markers = match load(&args.markers.config, &args.markers.preset)? {
        Some((scene, _)) => scene.estimator_positions().to_vec(),
        None => Vec::new(),
    };
    write_file(&args.out, &render_svg(&rows, &markers)?)
}

/// Dispatches a parsed command line. Returns the process exit code: 0 when
/// every requested computation completed, 1 otherwise.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a).map(|failed| {
            for msg in &failed {
                let _ = writeln!(err, "ledloc: {msg}");
            }
            failed.is_empty()
        }),
        Command::Point(a) => cmd_point(a, out).map(|_| true),
        Command::Plot(a) => cmd_plot(a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => {
            let _ = writeln!(err, "ledloc: some grid points failed and were written as nan");
            1
        }
        Err(Failure(msg)) => {
            let _ = writeln!(err, "ledloc: error: {msg}");
            1
        }
    }
}

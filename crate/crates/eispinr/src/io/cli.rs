//! Command-line interface. Subcommands compose through the file formats
//! in the parent module; `pipeline` chains them end to end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::inversion::{bp_reconstruct, render, train, Reconstruction, TrainingReport};
use crate::metrics::evaluate as evaluate_metrics;
use crate::physics::{simulate_measurements, MeasurementSet};
use crate::scenes::{random_cylinders, Cylinder, Scene};
use crate::system::{streams, Rng, SystemConfig};
use crate::{Error, Result};

use super::{
    export_image, format_metrics_line, load_checkpoint, load_config, load_grid,
    load_measurements, load_scene, save_checkpoint, save_config, save_loss_log,
    save_measurements, save_metrics, save_scene, ImageScale, FORMAT_VERSION,
};

#[derive(Parser)]
#[command(
    name = "eispinr",
    about = "2D electromagnetic inverse scattering: simulate measurements and \
             reconstruct permittivity maps with coordinate networks or the \
             back-propagation baseline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scatterer scene document.
    SynthScene(SynthSceneArgs),
    /// Solve the forward problem for a scene and record noisy measurements.
    Simulate(SimulateArgs),
    /// Reconstruct with the non-iterative back-propagation baseline.
    ReconstructBp(ReconstructBpArgs),
    /// Train the coordinate networks against stored measurements.
    ReconstructInr(ReconstructInrArgs),
    /// Sample a trained checkpoint on a grid of any resolution.
    Render(RenderArgs),
    /// Compare two permittivity grids.
    Evaluate(EvaluateArgs),
    /// Scene, simulation, both reconstructions, and evaluation in one run.
    Pipeline(PipelineArgs),
}

/// Configuration source plus the overrides shared by most subcommands.
#[derive(Args)]
struct ConfigOpts {
    /// Configuration document; mutually exclusive with --preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration: "desk-cylinder" (default) or "paper-scale".
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the noise level (fraction of signal magnitude).
    #[arg(long)]
    noise: Option<f64>,
    /// Keep every k-th receiver so that this many remain.
    #[arg(long)]
    receivers: Option<usize>,
    /// Override the training iteration count.
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct SynthSceneArgs {
    #[command(flatten)]
    config: ConfigOpts,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene document to simulate.
    #[arg(long, value_name = "PATH")]
    scene: PathBuf,
    #[command(flatten)]
    config: ConfigOpts,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructBpArgs {
    /// Measurement document.
    #[arg(long, value_name = "PATH")]
    measurements: PathBuf,
    /// Configuration document; defaults to the one stored with the
    /// measurements.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructInrArgs {
    /// Measurement document.
    #[arg(long, value_name = "PATH")]
    measurements: PathBuf,
    /// Configuration document; defaults to the one stored with the
    /// measurements.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the training iteration count.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Checkpoint file from reconstruct-inr.
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,
    /// Output grid side length.
    #[arg(long)]
    resolution: usize,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reconstructed grid (comma-delimited sidecar).
    #[arg(long, value_name = "PATH")]
    pred: PathBuf,
    /// Ground-truth grid (comma-delimited sidecar).
    #[arg(long, value_name = "PATH")]
    truth: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    config: ConfigOpts,
    /// Extra render resolution on top of the evaluation render.
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// Where a resolved configuration came from; decides the default scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConfigSource {
    DeskCylinder,
    PaperScale,
    File,
}

fn resolve_config(opts: &ConfigOpts) -> Result<(SystemConfig, ConfigSource)> {
    let (mut config, source) = match (&opts.config, opts.preset.as_deref()) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--config and --preset are mutually exclusive".into(),
            ));
        }
        (Some(path), None) => (load_config(path)?, ConfigSource::File),
        (None, Some("desk-cylinder")) | (None, None) => {
            (SystemConfig::desk_preset(), ConfigSource::DeskCylinder)
        }
        (None, Some("paper-scale")) => (SystemConfig::paper_preset(), ConfigSource::PaperScale),
        (None, Some(other)) => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; available: desk-cylinder, paper-scale"
            )));
        }
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(noise) = opts.noise {
        config.noise_level = noise;
    }
    if let Some(n) = opts.receivers {
        if n == 0 || config.n_rx % n != 0 {
            return Err(Error::Config(format!(
                "--receivers {n} must evenly divide the configured {} receivers \
                 (every k-th receiver is kept)",
                config.n_rx
            )));
        }
        config.n_rx = n;
    }
    if let Some(iters) = opts.iters {
        config.iters = iters;
    }
    config.validate()?;
    Ok((config, source))
}

/// Default scene for a configuration source: the fixed centered cylinder
/// for the desk preset, randomly placed cylinders otherwise.
fn default_scene(source: ConfigSource, config: &SystemConfig) -> Result<Scene> {
    match source {
        ConfigSource::DeskCylinder => Ok(Scene::Cylinders {
            cylinders: vec![Cylinder {
                x: 0.0,
                y: 0.0,
                radius: 0.3,
                eps: 1.5,
            }],
        }),
        ConfigSource::PaperScale | ConfigSource::File => {
            let mut rng = Rng::with_stream(config.seed, streams::SCENE);
            let half = config.roi_side / 2.0;
            random_cylinders(
                &mut rng,
                config.roi_side,
                (1, 3),
                (0.15 * half, 0.5 * half),
                (1.1, 1.5),
            )
        }
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the resolved configuration into the output directory and logs
/// the run parameters.
fn record_config(out: &Path, config: &SystemConfig) -> Result<()> {
    save_config(&out.join("resolved_config.json"), config)?;
    println!(
        "config: grid {}x{} (gen {}), {} tx, {} rx, noise {}, {} iters, seed {}",
        config.grid_m,
        config.grid_m,
        config.grid_gen,
        config.n_tx,
        config.n_rx,
        config.noise_level,
        config.iters,
        config.seed
    );
    Ok(())
}

fn write_reconstruction(out: &Path, stem: &str, rec: &Reconstruction) -> Result<()> {
    export_image(&rec.eps_grid, rec.resolution, &out.join(stem), ImageScale::MinMax)
}

fn run_simulation(scene: &Scene, config: &SystemConfig) -> Result<MeasurementSet> {
    let mut rng = Rng::with_stream(config.seed, streams::NOISE);
    simulate_measurements(scene, config, &mut rng)
}

fn run_training(
    measurements: &MeasurementSet,
    config: &SystemConfig,
    out: &Path,
) -> Result<(crate::inr::InrCheckpoint, TrainingReport)> {
    let (ckpt, report) = train(measurements, config, config.seed)?;
    save_checkpoint(&out.join("inr_checkpoint.bin"), &ckpt)?;
    save_loss_log(&out.join("inr_loss.csv"), &report.history)?;
    let last = report.history.last();
    println!(
        "trained {} iterations, final total loss {:.6e}, checkpoint {}",
        report.history.len(),
        last.map_or(f64::NAN, |l| l.total),
        report.checkpoint
    );
    Ok((ckpt, report))
}

fn cmd_synth_scene(args: &SynthSceneArgs) -> Result<()> {
    let (config, source) = resolve_config(&args.config)?;
    ensure_out(&args.out)?;
    record_config(&args.out, &config)?;
    let scene = default_scene(source, &config)?;
    let path = args.out.join("scene.json");
    save_scene(&path, &scene, config.roi_side)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let (config, _) = resolve_config(&args.config)?;
    let (scene, roi_side) = load_scene(&args.scene)?;
    if roi_side != config.roi_side {
        return Err(Error::Config(format!(
            "scene was authored for a {roi_side} m ROI but the configuration uses {} m",
            config.roi_side
        )));
    }
    ensure_out(&args.out)?;
    record_config(&args.out, &config)?;
    let meas = run_simulation(&scene, &config)?;
    let path = args.out.join("measurements.json");
    save_measurements(&path, &meas)?;
    println!(
        "wrote {} ({} rx x {} tx, noise {})",
        path.display(),
        config.n_rx,
        config.n_tx,
        meas.noise_level_applied
    );
    Ok(())
}

fn cmd_reconstruct_bp(args: &ReconstructBpArgs) -> Result<()> {
    let meas = load_measurements(&args.measurements)?;
    let config = match &args.config {
        Some(path) => load_config(path)?,
        None => meas.config.clone(),
    };
    ensure_out(&args.out)?;
    record_config(&args.out, &config)?;
    let rec = bp_reconstruct(&meas, &config)?;
    write_reconstruction(&args.out, "bp_eps", &rec)?;
    println!("wrote {}", args.out.join("bp_eps.csv").display());
    Ok(())
}

fn cmd_reconstruct_inr(args: &ReconstructInrArgs) -> Result<()> {
    let meas = load_measurements(&args.measurements)?;
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => meas.config.clone(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(iters) = args.iters {
        config.iters = iters;
    }
    config.validate()?;
    ensure_out(&args.out)?;
    record_config(&args.out, &config)?;
    let (ckpt, _) = run_training(&meas, &config, &args.out)?;
    let rec = render(&ckpt, config.grid_m)?;
    write_reconstruction(&args.out, "inr_eps", &rec)?;
    println!("wrote {}", args.out.join("inr_eps.csv").display());
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    ensure_out(&args.out)?;
    let rec = render(&ckpt, args.resolution)?;
    let stem = format!("render_{}", args.resolution);
    write_reconstruction(&args.out, &stem, &rec)?;
    println!("wrote {}", args.out.join(stem + ".csv").display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (pred, pred_m) = load_grid(&args.pred)?;
    let (truth, truth_m) = load_grid(&args.truth)?;
    let report = evaluate_metrics(&pred, pred_m, &truth, truth_m)?;
    ensure_out(&args.out)?;
    save_metrics(&args.out.join("metrics.json"), &report)?;
    println!("{}", format_metrics_line(&report));
    Ok(())
}

#[derive(serde::Serialize)]
struct PipelineSummary {
    format_version: u32,
    seed: u64,
    bp: crate::metrics::MetricReport,
    inr: crate::metrics::MetricReport,
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let (config, source) = resolve_config(&args.config)?;
    ensure_out(&args.out)?;
    record_config(&args.out, &config)?;

    let scene = default_scene(source, &config)?;
    save_scene(&args.out.join("scene.json"), &scene, config.roi_side)?;

    let meas = run_simulation(&scene, &config)?;
    save_measurements(&args.out.join("measurements.json"), &meas)?;
    let truth = meas
        .ground_truth
        .clone()
        .expect("synthetic measurements carry ground truth");
    export_image(
        &truth,
        config.grid_gen,
        &args.out.join("truth_eps"),
        ImageScale::MinMax,
    )?;

    let bp = bp_reconstruct(&meas, &config)?;
    write_reconstruction(&args.out, "bp_eps", &bp)?;
    let bp_report = evaluate_metrics(&bp.eps_grid, bp.resolution, &truth, config.grid_gen)?;
    println!("bp:  {}", format_metrics_line(&bp_report));

    let (ckpt, _) = run_training(&meas, &config, &args.out)?;
    let inr_eval = render(&ckpt, config.grid_gen)?;
    write_reconstruction(&args.out, "inr_eps", &inr_eval)?;
    let inr_report =
        evaluate_metrics(&inr_eval.eps_grid, inr_eval.resolution, &truth, config.grid_gen)?;
    println!("inr: {}", format_metrics_line(&inr_report));

    if let Some(resolution) = args.resolution {
        let extra = render(&ckpt, resolution)?;
        write_reconstruction(&args.out, &format!("render_{resolution}"), &extra)?;
    }

    save_metrics(&args.out.join("bp_metrics.json"), &bp_report)?;
    save_metrics(&args.out.join("inr_metrics.json"), &inr_report)?;
    super::write_json(
        &args.out.join("summary.json"),
        &PipelineSummary {
            format_version: FORMAT_VERSION,
            seed: config.seed,
            bp: bp_report,
            inr: inr_report,
        },
    )?;
    println!("wrote {}", args.out.join("summary.json").display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Command::SynthScene(a) => cmd_synth_scene(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::ReconstructBp(a) => cmd_reconstruct_bp(a),
        Command::ReconstructInr(a) => cmd_reconstruct_inr(a),
        Command::Render(a) => cmd_render(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    }
}

/// Parses arguments (the first is the program name) and runs one
/// subcommand. Returns the process exit status: 0 on success, 2 on usage
/// errors, 1 on runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> ConfigOpts {
        ConfigOpts {
            config: None,
            preset: None,
            seed: None,
            noise: None,
            receivers: None,
            iters: None,
        }
    }

    #[test]
    fn default_resolution_is_desk_preset() {
        let (c, source) = resolve_config(&opts()).unwrap();
        assert_eq!(c, SystemConfig::desk_preset());
        assert_eq!(source, ConfigSource::DeskCylinder);
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut o = opts();
        o.seed = Some(42);
        o.noise = Some(0.3);
        o.receivers = Some(4);
        o.iters = Some(10);
        let (c, _) = resolve_config(&o).unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.noise_level, 0.3);
        assert_eq!(c.n_rx, 4);
        assert_eq!(c.iters, 10);
    }

    #[test]
    fn receiver_subsetting_requires_divisibility() {
        let mut o = opts();
        o.receivers = Some(5);
        assert!(resolve_config(&o).is_err(), "16 receivers do not split into 5");
        o.receivers = Some(0);
        assert!(resolve_config(&o).is_err());
    }

    #[test]
    fn preset_and_config_conflict() {
        let mut o = opts();
        o.preset = Some("desk-cylinder".into());
        o.config = Some(PathBuf::from("/nonexistent.json"));
        assert!(resolve_config(&o).is_err());
        o.config = None;
        o.preset = Some("galaxy".into());
        assert!(resolve_config(&o).is_err());
    }

    #[test]
    fn paper_preset_resolves() {
        let mut o = opts();
        o.preset = Some("paper-scale".into());
        let (c, source) = resolve_config(&o).unwrap();
        assert_eq!(c, SystemConfig::paper_preset());
        assert_eq!(source, ConfigSource::PaperScale);
    }

    #[test]
    fn desk_scene_is_the_reference_cylinder() {
        let (c, source) = resolve_config(&opts()).unwrap();
        let scene = default_scene(source, &c).unwrap();
        match scene {
            Scene::Cylinders { cylinders } => {
                assert_eq!(cylinders.len(), 1);
                assert_eq!(cylinders[0].radius, 0.3);
                assert_eq!(cylinders[0].eps, 1.5);
            }
            _ => panic!("desk preset must produce the cylinder scene"),
        }
    }

    #[test]
    fn random_scene_is_seed_deterministic() {
        let mut o = opts();
        o.preset = Some("paper-scale".into());
        o.seed = Some(9);
        let (c, source) = resolve_config(&o).unwrap();
        let a = default_scene(source, &c).unwrap();
        let b = default_scene(source, &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let code = cli_main(["eispinr", "simulate", "--frobnicate"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_is_a_successful_exit() {
        assert_eq!(cli_main(["eispinr", "--help"]), 0);
    }

    #[test]
    fn missing_file_is_a_runtime_error() {
        let code = cli_main([
            "eispinr",
            "render",
            "--checkpoint",
            "/nonexistent/ckpt.bin",
            "--resolution",
            "8",
            "--out",
            "/tmp/eispinr-cli-missing",
        ]);
        assert_eq!(code, 1);
    }
}

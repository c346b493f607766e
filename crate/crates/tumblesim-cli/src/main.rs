//! Command-line runner: single simulations, the standard experiment
//! scenarios and manufacturing-error sweeps, with CSV + manifest output.
//!
//! Exit codes: 0 on success, 2 for configuration/usage errors, 3 when a
//! simulation fails to converge.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use tumblesim::config::{ExecMode, RunConfig};
use tumblesim::geometry::ShapeKind;
use tumblesim::scenarios::{self, ScenarioError, SweepSpec};
use tumblesim::stepper::simulate;

#[derive(Parser)]
#[command(name = "tumblesim", version, about = "Tumbling microrobot dynamics simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Named preset: paper-gen1, aluminum-gen2, pdms-half.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML config file (may itself name a preset to override).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (also settable via TUMBLESIM_OUT).
    #[arg(long, env = "TUMBLESIM_OUT", default_value = "out")]
    out: PathBuf,
    /// Run sweep cells sequentially instead of on a thread pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write the trajectory.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Simulation duration in seconds (overrides the config).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Tumbling speed vs. field frequency, compared with no-slip rolling.
    Locomotion {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Frequencies to test, Hz.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 5.0, 10.0])]
        frequencies: Vec<f64>,
    },
    /// Climb tests over a list of substrate inclinations.
    Incline {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Inclination angles, degrees.
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 15.0, 30.0, 45.0, 60.0])]
        angles: Vec<f64>,
        /// Field periods per test.
        #[arg(long, default_value_t = 5)]
        periods: usize,
    },
    /// Speed comparison across the four robot shapes.
    Shapes {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 10.0)]
        frequency: f64,
    },
    /// Manufacturing-error sweep over magnetization and draft angles.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Draft angles, degrees (default 0..=15).
        #[arg(long, value_delimiter = ',')]
        drafts: Option<Vec<f64>>,
    },
}

fn load_config(args: &ConfigArgs) -> anyhow::Result<RunConfig> {
    match (&args.preset, &args.config) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(RunConfig::from_toml(&text)?)
        }
        (Some(name), None) => Ok(RunConfig::from_preset(name)?),
        (None, None) => anyhow::bail!("either --preset or --config is required"),
    }
}

fn exec_mode(args: &ConfigArgs) -> ExecMode {
    if args.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    }
}

fn config_hash(cfg: &RunConfig) -> anyhow::Result<String> {
    let canon = serde_json::to_vec(cfg)?;
    Ok(hex(&Sha256::digest(&canon)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn file_hash(path: &Path) -> anyhow::Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}

/// Write manifest.json describing the run and its output files.
fn write_manifest(
    out: &Path,
    cfg: &RunConfig,
    command: &str,
    files: &[PathBuf],
) -> anyhow::Result<()> {
    let mut outputs = serde_json::Map::new();
    for f in files {
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        outputs.insert(name, serde_json::Value::String(file_hash(f)?));
    }
    let manifest = serde_json::json!({
        "tool": "tumblesim",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": config_hash(cfg)?,
        "config": cfg,
        "outputs": outputs,
    });
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { cfg: args, duration } => {
            let mut cfg = load_config(&args)?;
            if let Some(d) = duration {
                cfg.stepping.duration_s = d;
            }
            std::fs::create_dir_all(&args.out)?;
            let params = cfg.build()?;
            let initial = scenarios::rest_state(&params);
            let n = cfg.n_steps();
            let records = simulate(params, initial, n, cfg.output.stride)?;
            let comments = vec![format!("config_sha256: {}", config_hash(&cfg)?)];
            let traj = args.out.join("trajectory.csv");
            scenarios::write_trajectory_csv(&traj, &records, &comments)?;
            write_manifest(&args.out, &cfg, "simulate", &[traj])?;
            let last = records.last().unwrap();
            println!(
                "{} steps, final position ({:.4}, {:.4}, {:.4}) mm",
                n, last.state.position.x, last.state.position.y, last.state.position.z
            );
        }
        Command::Locomotion { cfg: args, frequencies } => {
            let cfg = load_config(&args)?;
            std::fs::create_dir_all(&args.out)?;
            let mut rows = Vec::new();
            for f in &frequencies {
                let (res, _) = scenarios::locomotion_test(&cfg, *f, 3)?;
                println!(
                    "{:6.2} Hz  measured {:8.4} mm/s  ideal {:8.4} mm/s  ratio {:.3}",
                    f,
                    res.measured_speed,
                    res.ideal_speed,
                    res.measured_speed / res.ideal_speed
                );
                rows.push(res);
            }
            let path = args.out.join("metrics.csv");
            let mut w = csv::WriterBuilder::new().from_path(&path)?;
            w.write_record(["frequency_hz", "measured_speed_mm_s", "ideal_speed_mm_s"])?;
            for r in &rows {
                w.write_record([
                    format!("{:.4}", r.frequency_hz),
                    format!("{:.6}", r.measured_speed),
                    format!("{:.6}", r.ideal_speed),
                ])?;
            }
            w.flush()?;
            write_manifest(&args.out, &cfg, "locomotion", &[path])?;
        }
        Command::Incline { cfg: args, angles, periods } => {
            let cfg = load_config(&args)?;
            std::fs::create_dir_all(&args.out)?;
            let mut rows = Vec::new();
            for a in &angles {
                let (res, _) = scenarios::incline_test(&cfg, *a, periods)?;
                println!(
                    "{:5.1} deg  {}  net advance {:+.4} mm",
                    a,
                    if res.climbed { "climb" } else { "stall" },
                    res.net_advance_mm
                );
                rows.push(res);
            }
            let path = args.out.join("metrics.csv");
            let mut w = csv::WriterBuilder::new().from_path(&path)?;
            w.write_record(["incline_deg", "climbed", "net_advance_mm", "final_period_advance_mm"])?;
            for r in &rows {
                w.write_record([
                    format!("{:.2}", r.incline_deg),
                    r.climbed.to_string(),
                    format!("{:.6}", r.net_advance_mm),
                    format!("{:.6}", r.final_period_advance_mm),
                ])?;
            }
            w.flush()?;
            write_manifest(&args.out, &cfg, "incline", &[path])?;
        }
        Command::Shapes { cfg: args, frequency } => {
            let cfg = load_config(&args)?;
            std::fs::create_dir_all(&args.out)?;
            let kinds = [ShapeKind::Cuboid, ShapeKind::Spiked, ShapeKind::SpikedEnds, ShapeKind::Curved];
            let rows = scenarios::shape_comparison(&cfg, &kinds, frequency, 3, exec_mode(&args))?;
            for r in &rows {
                println!(
                    "{:12}  measured {:8.4} mm/s  ideal {:8.4} mm/s",
                    r.shape, r.measured_speed, r.ideal_speed
                );
            }
            let path = args.out.join("metrics.csv");
            let mut w = csv::WriterBuilder::new().from_path(&path)?;
            w.write_record(["shape", "measured_speed_mm_s", "ideal_speed_mm_s"])?;
            for r in &rows {
                w.write_record([
                    r.shape.clone(),
                    format!("{:.6}", r.measured_speed),
                    format!("{:.6}", r.ideal_speed),
                ])?;
            }
            w.flush()?;
            write_manifest(&args.out, &cfg, "shapes", &[path])?;
        }
        Command::Sweep { cfg: args, drafts } => {
            let cfg = load_config(&args)?;
            std::fs::create_dir_all(&args.out)?;
            let drafts = drafts.unwrap_or_else(scenarios::standard_drafts);
            let mut specs = Vec::new();
            for d in &drafts {
                for (t1, t2) in scenarios::standard_profiles() {
                    specs.push(SweepSpec { theta1_deg: t1, theta2_deg: t2, draft_deg: *d });
                }
            }
            let cells = scenarios::error_sweep(&cfg, &specs, exec_mode(&args))?;
            let flipped = cells.iter().filter(|c| c.flipped).count();
            println!("{} cells, {} flipped", cells.len(), flipped);
            let path = args.out.join("sweep.csv");
            let comments = vec![format!("config_sha256: {}", config_hash(&cfg)?)];
            scenarios::write_sweep_csv(&path, &cells, &comments)?;
            write_manifest(&args.out, &cfg, "sweep", &[path])?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let sim_failure = err
                .chain()
                .any(|c| c.downcast_ref::<tumblesim::stepper::StepError>().is_some()
                    || matches!(c.downcast_ref::<ScenarioError>(), Some(ScenarioError::Step(_))));
            // Convergence failures exit 3; bad usage/config exits 2.
            if sim_failure {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

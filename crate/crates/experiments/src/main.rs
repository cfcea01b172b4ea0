use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uwbloc_core::geometry::Position;
use uwbloc_experiments::micro::Axis;
use uwbloc_experiments::table::WALL_TIME_KEY;
use uwbloc_experiments::{
    run_ambiguity_maps, run_calibration_demo, run_heatmap, run_mac_tables, run_microbench, run_noise_sweep,
    run_tracking, ExpError, ResultTable, Result, Scenario,
};
use uwbloc_mac::{MacConfig, MacMode};

#[derive(Parser)]
#[command(name = "uwbloc", version, about = "Monte-Carlo localization and MAC experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML (MAC TOML for `mac`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV; companion tables go next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Lattice spacing in meters.
    #[arg(long, global = true)]
    grid_res: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Error statistics at every lattice point.
    Heatmap,
    /// Median error over a grid of PDoA and TDoA noise levels.
    SweepNoise {
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0])]
        sigma_theta_deg: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [3.0, 50.0, 150.0, 250.0, 300.0, 500.0])]
        sigma_t_ps: Vec<f64>,
    },
    /// One-factor sweeps: modality, aperture, antennas, pattern, calibration.
    Microbench {
        #[arg(long, value_delimiter = ',')]
        axis: Vec<String>,
    },
    /// Particle filter along the scenario trajectory.
    Track {
        /// Add per-update wall time (not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Likelihood surfaces for linear arrays of several sizes.
    Ambiguity {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
        apertures: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 5, 6])]
        antennas: Vec<usize>,
        /// Tag position, defaults to the room centre.
        #[arg(long, num_args = 2, value_names = ["X", "Y"])]
        tag: Option<Vec<f64>>,
    },
    /// TDMA or unslotted channel simulation.
    Mac {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Fit bias curves from three known positions and compare with the truth.
    CalibrateDemo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tdma,
    Unslotted,
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn scenario(c: &Common) -> Result<Scenario> {
    let mut s = match &c.config {
        Some(p) => Scenario::from_toml(&read(p)?)?,
        None => Scenario::default(),
    };
    if let Some(v) = c.seed {
        s.seed = v;
    }
    if let Some(v) = c.trials {
        s.trials = v;
    }
    if let Some(v) = c.grid_res {
        s.grid_res = v;
    }
    s.validate()?;
    Ok(s)
}

/// `dir/name.csv` → `dir/name{suffix}.csv`
fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.csv"))
}

fn save(mut table: ResultTable, path: &Path, started: Instant) -> Result<()> {
    table.set_meta(WALL_TIME_KEY, format!("{:.3}", started.elapsed().as_secs_f64()));
    table.save(path)?;
    log::info!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let c = &cli.common;
    let out = |default: &str| c.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match cli.command {
        Command::Heatmap => {
            let h = run_heatmap(&scenario(c)?)?;
            println!("median {:.4} m, p90 {:.4} m", h.median, h.p90);
            save(h.table, &out("heatmap.csv"), started)
        }
        Command::SweepNoise { sigma_theta_deg, sigma_t_ps } => {
            let th: Vec<f64> = sigma_theta_deg.iter().map(|d| d.to_radians()).collect();
            let t: Vec<f64> = sigma_t_ps.iter().map(|p| p * 1e-12).collect();
            save(run_noise_sweep(&scenario(c)?, &th, &t)?, &out("sweep_noise.csv"), started)
        }
        Command::Microbench { axis } => {
            let axes = if axis.is_empty() {
                Axis::ALL.to_vec()
            } else {
                axis.iter().map(|a| a.parse()).collect::<Result<Vec<Axis>>>()?
            };
            save(run_microbench(&scenario(c)?, &axes)?, &out("microbench.csv"), started)
        }
        Command::Track { timing } => {
            let mut s = scenario(c)?;
            s.trajectory.get_or_insert_with(Default::default);
            save(run_tracking(&s, timing)?, &out("track.csv"), started)
        }
        Command::Ambiguity { apertures, antennas, tag } => {
            let s = scenario(c)?;
            let tag = match tag.as_deref() {
                Some([x, y]) => Position::new(*x, *y),
                _ => s.environment.center(),
            };
            let maps = run_ambiguity_maps(&s, tag, &apertures, &antennas)?;
            let path = out("ambiguity.csv");
            save(maps.minima, &companion(&path, "_minima"), started)?;
            save(maps.surfaces, &path, started)
        }
        Command::Mac { mode, duration } => {
            let mut cfg = match &c.config {
                Some(p) => MacConfig::from_toml(&read(p)?)?,
                None => MacConfig::default(),
            };
            if let Some(m) = mode {
                cfg.mode = match m {
                    ModeArg::Tdma => MacMode::Tdma,
                    ModeArg::Unslotted => MacMode::Unslotted,
                };
            }
            if let Some(d) = duration {
                cfg.sim_duration = d;
            }
            cfg.validate()?;
            let run = run_mac_tables(&cfg, c.seed.unwrap_or(1))?;
            let (lo, hi) = run.report.ratio_range();
            println!(
                "overall success {:.4}, mean {:.4}, per-tag [{lo:.4}, {hi:.4}], {} corrections",
                run.report.overall_success(),
                run.report.mean_success(),
                run.report.corrections.len()
            );
            let path = out("mac.csv");
            save(run.windows, &companion(&path, "_windows"), started)?;
            save(run.summary, &path, started)
        }
        Command::CalibrateDemo => {
            let demo = run_calibration_demo(&scenario(c)?)?;
            println!("largest held-out bias error {:.3e} rad", demo.max_abs_err);
            save(demo.table, &out("calibration.csv"), started)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let ExpError::Config(_) = e {
                return ExitCode::from(2);
            }
            ExitCode::FAILURE
        }
    }
}

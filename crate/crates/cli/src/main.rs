use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use costar_cli::commands::{self, BatchArgs, CalibrateArgs, Output, RunArgs};
use costar_cli::server::{self, AppState, ServerConfig};
use costar_cli::{load_scene, CliError, EXIT_INVALID};
use costar_core::runtime::{NoiseOverrides, DEFAULT_TICK_BUDGET};

/// Behavior-tree task engine for a simulated robot workcell.
#[derive(Parser)]
#[command(name = "costar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Noise {
    /// Detection position noise, meters (overrides the scene).
    #[arg(long)]
    noise_pos: Option<f64>,
    /// Detection rotation noise, degrees (overrides the scene).
    #[arg(long)]
    noise_rot: Option<f64>,
    /// Probability that a detection is dropped (overrides the scene).
    #[arg(long)]
    dropout: Option<f64>,
}

impl Noise {
    fn overrides(&self) -> NoiseOverrides {
        NoiseOverrides {
            pos_sigma: self.noise_pos,
            rot_sigma: self.noise_rot.map(f64::to_radians),
            dropout_prob: self.dropout,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API and the /events stream.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory for stored plans; in memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Additional scene files.
        #[arg(long = "scene")]
        scenes: Vec<String>,
        /// Scene the live session starts in.
        #[arg(long, default_value = "assembly")]
        default_scene: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a plan once and print its report.
    Run {
        /// Plan file, or the name of a bundled plan.
        plan: String,
        /// Scene file or bundled scene name; defaults to the plan's name.
        #[arg(long)]
        scene: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        noise: Noise,
        #[arg(long, default_value_t = DEFAULT_TICK_BUDGET)]
        tick_budget: u64,
        /// Also print every node transition as a JSON line.
        #[arg(long)]
        trace: bool,
    },
    /// Run independent trials and print the aggregated report.
    Batch {
        plan: String,
        #[arg(long)]
        scene: Option<String>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[command(flatten)]
        noise: Noise,
        #[arg(long, default_value_t = DEFAULT_TICK_BUDGET)]
        tick_budget: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hand-eye calibration against the simulated camera.
    Calibrate {
        #[arg(long)]
        scene: Option<String>,
        #[arg(long, default_value_t = 11)]
        stations: usize,
        /// Marker rotation noise, degrees.
        #[arg(long, default_value_t = 0.0)]
        noise_rot: f64,
        /// Marker position noise, meters.
        #[arg(long, default_value_t = 0.0)]
        noise_pos: f64,
        /// Use every station pair instead of consecutive ones.
        #[arg(long)]
        all_pairs: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a plan's structure and operation bindings.
    Validate {
        plan: String,
        #[arg(long)]
        scene: Option<String>,
    },
    /// Print a plan in canonical form.
    Fmt { plan: String },
}

fn serve(
    addr: SocketAddr,
    data_dir: Option<PathBuf>,
    scenes: &[String],
    default_scene: String,
    seed: u64,
) -> Result<Output, CliError> {
    let scenes = scenes.iter().map(|s| load_scene(s)).collect::<Result<Vec<_>, _>>()?;
    let state = AppState::new(ServerConfig {
        data_dir,
        scenes,
        default_scene,
        seed,
    })
    .map_err(CliError::invalid)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::invalid(e.to_string()))?;
    rt.block_on(server::serve(addr, Arc::new(state))).map_err(|e| CliError {
        code: 1,
        message: e.to_string(),
    })?;
    Ok(Output {
        stdout: String::new(),
        code: 0,
    })
}

fn dispatch(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Serve {
            addr,
            data_dir,
            scenes,
            default_scene,
            seed,
        } => serve(addr, data_dir, &scenes, default_scene, seed),
        Command::Run {
            plan,
            scene,
            seed,
            noise,
            tick_budget,
            trace,
        } => commands::run(&RunArgs {
            plan: &plan,
            scene: scene.as_deref(),
            seed,
            noise: noise.overrides(),
            tick_budget,
            trace,
        }),
        Command::Batch {
            plan,
            scene,
            trials,
            seed_base,
            noise,
            tick_budget,
            out,
        } => {
            let output = commands::batch(&BatchArgs {
                plan: &plan,
                scene: scene.as_deref(),
                trials,
                seed_base,
                noise: noise.overrides(),
                tick_budget,
            })?;
            if let Some(path) = out {
                std::fs::write(&path, &output.stdout)
                    .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
            }
            Ok(output)
        }
        Command::Calibrate {
            scene,
            stations,
            noise_rot,
            noise_pos,
            all_pairs,
            seed,
        } => commands::calibrate(&CalibrateArgs {
            scene: scene.as_deref(),
            stations,
            noise_rot,
            noise_pos,
            all_pairs,
            seed,
        }),
        Command::Validate { plan, scene } => commands::validate(&plan, scene.as_deref()),
        Command::Fmt { plan } => commands::format(&plan),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.code == 0 { EXIT_INVALID } else { e.code })
        }
    }
}

//! The batch-style subcommands. Each returns its stdout text and exit code.

use std::fmt::Write as _;

use costar_core::btree::Diagnostic;
use costar_core::calibration::{collect_stations, pose_error, solve_hand_eye, StationOptions};
use costar_core::dsl::{self, PlanDocument};
use costar_core::object::ClassRegistry;
use costar_core::runtime::{run_batch, run_plan, single_report, validate_plan, NoiseOverrides, RunConfig, RunError};
use costar_core::sim::{Scene, Simulation};
use serde_json::json;

use crate::{load_plan, scene_for, CliError, EXIT_FAILURE, EXIT_INVALID, EXIT_SUCCESS};

pub struct Output {
    pub stdout: String,
    pub code: u8,
}

/// `line:col: node: message` for each diagnostic.
pub fn render_diagnostics(origin: &str, doc: &PlanDocument, diagnostics: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diagnostics {
        match doc.span_of(&d.node_id) {
            Some(s) => writeln!(out, "{origin}:{}:{}: {d}", s.line, s.column),
            None => writeln!(out, "{origin}: {d}"),
        }
        .expect("write to string");
    }
    out
}

fn run_error(origin: &str, doc: &PlanDocument, e: RunError) -> CliError {
    match e {
        RunError::ValidationFailed(d) => CliError::invalid(render_diagnostics(origin, doc, &d).trim_end().to_string()),
        other => CliError::invalid(other.to_string()),
    }
}

pub struct RunArgs<'a> {
    pub plan: &'a str,
    pub scene: Option<&'a str>,
    pub seed: u64,
    pub noise: NoiseOverrides,
    pub tick_budget: u64,
    /// Append the transition trace to the output as JSON lines.
    pub trace: bool,
}

pub fn run(args: &RunArgs) -> Result<Output, CliError> {
    let doc = load_plan(args.plan)?;
    let scene = scene_for(args.scene, &doc)?;
    let config = RunConfig {
        tick_budget: args.tick_budget,
        noise: args.noise,
        ..Default::default()
    };
    let trial = run_plan(&doc, &scene, &ClassRegistry::default(), args.seed, &config, None)
        .map_err(|e| run_error(args.plan, &doc, e))?;
    let report = single_report(&doc, &trial);
    let mut stdout = report.to_json();
    if args.trace {
        for e in &trial.events {
            stdout.push_str(&serde_json::to_string(e).expect("event serializes"));
            stdout.push('\n');
        }
    }
    let code = if report.all_succeeded() { EXIT_SUCCESS } else { EXIT_FAILURE };
    Ok(Output { stdout, code })
}

pub struct BatchArgs<'a> {
    pub plan: &'a str,
    pub scene: Option<&'a str>,
    pub trials: usize,
    pub seed_base: u64,
    pub noise: NoiseOverrides,
    pub tick_budget: u64,
}

pub fn batch(args: &BatchArgs) -> Result<Output, CliError> {
    let doc = load_plan(args.plan)?;
    let scene = scene_for(args.scene, &doc)?;
    let config = RunConfig {
        tick_budget: args.tick_budget,
        noise: args.noise,
        ..Default::default()
    };
    let report = run_batch(&doc, &scene, &ClassRegistry::default(), args.trials, args.seed_base, &config, None)
        .map_err(|e| run_error(args.plan, &doc, e))?;
    let code = if report.all_succeeded() { EXIT_SUCCESS } else { EXIT_FAILURE };
    Ok(Output {
        stdout: report.to_json(),
        code,
    })
}

pub fn validate(plan: &str, scene: Option<&str>) -> Result<Output, CliError> {
    let doc = load_plan(plan)?;
    let scene = match scene {
        Some(_) => scene_for(scene, &doc)?,
        None => scene_for(None, &doc).unwrap_or_else(|_| Scene::empty("validate")),
    };
    let diagnostics = validate_plan(&doc, &scene, &ClassRegistry::default());
    if diagnostics.is_empty() {
        return Ok(Output {
            stdout: format!("{plan}: ok ({} nodes)\n", doc.root.size()),
            code: EXIT_SUCCESS,
        });
    }
    Ok(Output {
        stdout: render_diagnostics(plan, &doc, &diagnostics),
        code: EXIT_INVALID,
    })
}

/// Canonical text of a plan.
pub fn format(plan: &str) -> Result<Output, CliError> {
    Ok(Output {
        stdout: dsl::serialize(&load_plan(plan)?),
        code: EXIT_SUCCESS,
    })
}

pub struct CalibrateArgs<'a> {
    pub scene: Option<&'a str>,
    pub stations: usize,
    /// Degrees.
    pub noise_rot: f64,
    pub noise_pos: f64,
    pub all_pairs: bool,
    pub seed: u64,
}

pub fn calibrate(args: &CalibrateArgs) -> Result<Output, CliError> {
    let scene = match args.scene {
        Some(s) => crate::load_scene(s)?,
        None => Scene::empty("calibration"),
    };
    let truth = scene.camera.pose;
    let mut sim = Simulation::new(scene, ClassRegistry::default(), args.seed);
    let opts = StationOptions {
        rot_sigma: args.noise_rot.to_radians(),
        pos_sigma: args.noise_pos,
        all_pairs: args.all_pairs,
        seed: args.seed,
    };
    let solved = collect_stations(&mut sim, args.stations, &opts).and_then(|pairs| solve_hand_eye(&pairs));
    match solved {
        Ok(r) => {
            let (dp, da) = pose_error(&r.x, &truth);
            let body = json!({
                "camera": r.x,
                "residual": r.residual,
                "pairCount": r.pair_count,
                "positionError": dp,
                "rotationErrorDeg": da.to_degrees(),
            });
            Ok(Output {
                stdout: format!("{}\n", serde_json::to_string_pretty(&body).expect("json")),
                code: EXIT_SUCCESS,
            })
        }
        Err(e) => Err(CliError {
            code: EXIT_FAILURE,
            message: e.to_string(),
        }),
    }
}

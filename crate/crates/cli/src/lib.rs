//! Front end for the costar engine: plan/scene loading shared by the
//! subcommands, and the HTTP server.

pub mod commands;
pub mod server;

use std::path::Path;

use costar_core::dsl::{self, PlanDocument};
use costar_core::runtime::{bundled_plan, bundled_scene};
use costar_core::sim::Scene;

/// Every trial succeeded.
pub const EXIT_SUCCESS: u8 = 0;
/// At least one trial failed.
pub const EXIT_FAILURE: u8 = 1;
/// The plan or scene was rejected before anything ran.
pub const EXIT_INVALID: u8 = 2;

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Reads a file, falling back to the bundled asset of that name.
fn read_source(arg: &str, bundled: fn(&str) -> Option<&'static str>) -> Result<(String, String), CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{arg}: {e}")))?;
        return Ok((arg.to_string(), text));
    }
    bundled(arg)
        .map(|t| (format!("<bundled {arg}>"), t.to_string()))
        .ok_or_else(|| CliError::invalid(format!("{arg}: no such file or bundled asset")))
}

/// A plan from a `.bt` file or a bundled plan name. Syntax errors are
/// reported as `file:line:col: message`.
pub fn load_plan(arg: &str) -> Result<PlanDocument, CliError> {
    let (origin, text) = read_source(arg, bundled_plan)?;
    dsl::parse(&text).map_err(|e| CliError::invalid(format!("{origin}:{e}")))
}

/// A scene from a YAML/JSON file or a bundled scene name.
pub fn load_scene(arg: &str) -> Result<Scene, CliError> {
    if Path::new(arg).exists() {
        return Scene::from_path(Path::new(arg)).map_err(|e| CliError::invalid(format!("{arg}: {e}")));
    }
    let (origin, text) = read_source(arg, bundled_scene)?;
    Scene::from_yaml(&text).map_err(|e| CliError::invalid(format!("{origin}: {e}")))
}

/// The scene named by `--scene`, or else the bundled scene sharing the
/// plan's name.
pub fn scene_for(scene: Option<&str>, plan: &PlanDocument) -> Result<Scene, CliError> {
    match (scene, plan.name.as_deref()) {
        (Some(s), _) => load_scene(s),
        (None, Some(name)) if bundled_scene(name).is_some() => load_scene(name),
        _ => Err(CliError::invalid("no scene given; pass --scene")),
    }
}

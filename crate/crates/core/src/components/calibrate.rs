use super::{
    param_f64, unknown_op, Component, ComponentClass, ComponentDescriptor, OpError, OpOutcome, OperationSignature,
    ParamKind, ParamSpec, Params, World,
};
use crate::calibration::{collect_stations, solve_hand_eye, StationOptions};
use crate::predicator::{Symbol, SymbolKind};

pub const CAMERA_SYMBOL: &str = "camera";
pub const DEFAULT_STATIONS: usize = 11;

/// Hand-eye calibration of the workcell camera. A successful run replaces
/// the camera pose that perception uses.
#[derive(Debug)]
pub struct CalibrationComponent {
    name: String,
}

impl CalibrationComponent {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string() }
    }
}

impl Component for CalibrationComponent {
    fn descriptor(&self) -> ComponentDescriptor {
        use ParamKind::*;
        ComponentDescriptor {
            name: self.name.clone(),
            class: ComponentClass::Calibration,
            operations: vec![OperationSignature::new(
                "Calibrate",
                vec![
                    ParamSpec::new("stations", Number, false, "station count, default 11"),
                    ParamSpec::new("noise_rot", Number, false, "observation rotation noise, degrees"),
                    ParamSpec::new("seed", Number, false, "noise seed"),
                ],
            )
            .knowledge()],
            predicates: vec![],
            symbol_kinds: vec![SymbolKind::Frame],
            input_topics: vec!["marker_pose".into()],
            output_topics: vec!["camera_frame".into()],
        }
    }

    fn start(&mut self, op: &str, params: &Params, world: &mut World) -> Result<OpOutcome, OpError> {
        if op != "Calibrate" {
            return Err(unknown_op(&self.name, op));
        }
        let stations = param_f64(params, "stations")?.map_or(DEFAULT_STATIONS, |n| n.max(0.0) as usize);
        let opts = StationOptions {
            rot_sigma: param_f64(params, "noise_rot")?.unwrap_or(0.0).to_radians(),
            seed: param_f64(params, "seed")?.unwrap_or(0.0).max(0.0) as u64,
            ..StationOptions::default()
        };
        let pairs = collect_stations(&mut world.sim, stations, &opts)?;
        let result = solve_hand_eye(&pairs)?;
        world.sim.set_calibrated_camera(Some(result.x));
        world
            .predicator
            .upsert_symbol(Symbol::frame(CAMERA_SYMBOL, result.x, &self.name));
        Ok(OpOutcome::Success(serde_json::to_value(result).expect("plain data")))
    }
}

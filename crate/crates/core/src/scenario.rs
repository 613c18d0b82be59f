//! TOML scenario files: load with strict key checking, validate, convert to
//! a runnable `Scenario`, and re-emit exactly.

use std::path::Path;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::cbf::{BarrierSpec, Poly2};
use crate::clf::Gains;
use crate::error::{Error, Result};
use crate::model::{CartesianState, RHO_MIN_DEFAULT, RHO_STOP_DEFAULT};
use crate::sim::{ControllerKind, Scenario};

/// `[robot]` section: the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

/// `[barrier]` section: h as the coefficient array
/// [c0, cx, cy, cxx, cxy, cyy], the symmetric H entries, and the class-K gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub h: [f64; 6],
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
    pub kappa: f64,
}

impl BarrierSection {
    pub fn to_spec(&self) -> Result<BarrierSpec> {
        let [c0, cx, cy, cxx, cxy, cyy] = self.h;
        BarrierSpec::new(
            Poly2 { c0, cx, cy, cxx, cxy, cyy },
            Matrix2::new(self.h11, self.h12, self.h12, self.h22),
            self.kappa,
        )
    }
}

fn default_rho_stop() -> f64 {
    RHO_STOP_DEFAULT
}
fn default_rho_min() -> f64 {
    RHO_MIN_DEFAULT
}
fn default_epsilon() -> f64 {
    1e-2
}

/// `[sim]` section: integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_rho_stop")]
    pub rho_stop: f64,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

/// `[controller]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
}

/// `[sweep]` section: batch sampling boxes for random initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub count: usize,
    pub seed: u64,
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub theta: [f64; 2],
    pub v: [f64; 2],
    pub omega: [f64; 2],
    /// Initial conditions are rejection-sampled to h >= h_margin.
    #[serde(default)]
    pub h_margin: f64,
}

/// Parsed scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub robot: RobotSection,
    pub gains: Gains,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierSection>,
    pub sim: SimSection,
    pub controller: ControllerSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ScenarioFile {
    /// Parses a document; TOML errors (including unknown keys) carry the
    /// offending location.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario sections serialize to TOML")
    }

    /// Builds the runnable scenario, revalidating every invariant.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let barrier = self.barrier.as_ref().map(|b| b.to_spec()).transpose()?;
        let sc = Scenario {
            initial_state: CartesianState::new(
                self.robot.x,
                self.robot.y,
                self.robot.theta,
                self.robot.v,
                self.robot.omega,
            ),
            gains: self.gains,
            barrier,
            controller: self.controller.kind,
            t_final: self.sim.t_final,
            dt: self.sim.dt,
            rho_stop: self.sim.rho_stop,
            rho_min: self.sim.rho_min,
            epsilon: self.sim.epsilon,
            seed: self.sweep.map_or(0, |s| s.seed),
        };
        sc.validate()?;
        Ok(sc)
    }
}

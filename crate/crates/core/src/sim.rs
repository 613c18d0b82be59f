//! Closed-loop integration of the unicycle under the nominal, PMN, or
//! gamma-m QP controller, with per-sample channel recording and offline
//! invariant monitoring.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cbf::{cascade_cbf, BarrierSpec};
use crate::clf::{composite_vr, error_state, nominal_control, weak_lyapunov_v1, Gains, LyapunovData};
use crate::error::{Error, Result};
use crate::model::{
    cartesian_dynamics, to_polar, CartesianState, ControlInput, PolarErrorState,
};
use crate::qp::{
    pmn_control_from_state, safety_critical_control, ActiveSet, ControlConfig, QpSolution,
};

/// Controller selector for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Nominal,
    Pmn,
    Qp,
}

impl ControllerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Nominal => "nominal",
            ControllerKind::Pmn => "pmn",
            ControllerKind::Qp => "qp",
        }
    }
}

/// Per-run configuration. The barrier is optional for nominal/PMN runs, where
/// it is monitored but not enforced.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial_state: CartesianState,
    pub gains: Gains,
    pub barrier: Option<BarrierSpec>,
    pub controller: ControllerKind,
    pub t_final: f64,
    pub dt: f64,
    pub rho_stop: f64,
    pub rho_min: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::Config(format!(
                "t_final ({}) must be at least dt ({})",
                self.t_final, self.dt
            )));
        }
        if !(self.rho_min > 0.0 && self.rho_stop > self.rho_min) {
            return Err(Error::Config(format!(
                "need rho_stop > rho_min > 0, got rho_stop = {}, rho_min = {}",
                self.rho_stop, self.rho_min
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        if self.controller == ControllerKind::Qp && self.barrier.is_none() {
            return Err(Error::Config("qp controller requires a barrier section".into()));
        }
        if let Some(spec) = &self.barrier {
            let h0 = spec.h(self.initial_state.x, self.initial_state.y);
            if h0 <= 0.0 {
                return Err(Error::Config(format!("initial state unsafe: h = {h0}")));
            }
        }
        Ok(())
    }

    fn control_config(&self) -> ControlConfig {
        ControlConfig { epsilon: self.epsilon, rho_stop: self.rho_stop, rho_min: self.rho_min }
    }
}

/// QP diagnostics attached to a sample when the QP controller ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QpSample {
    pub active_set: ActiveSet,
    pub kkt_residual: f64,
}

/// One recorded time point with all exported channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: CartesianState,
    pub chi: PolarErrorState,
    pub u: ControlInput,
    pub v1: f64,
    pub vr: f64,
    pub h: Option<f64>,
    pub b: Option<f64>,
    pub qp: Option<QpSample>,
}

impl Sample {
    fn qp_status(&self, controller: ControllerKind) -> &'static str {
        match (controller, &self.qp) {
            (ControllerKind::Qp, Some(d)) => d.active_set.as_str(),
            (ControllerKind::Qp, None) => "frozen",
            _ => "-",
        }
    }
}

/// Terminal disposition of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Reached t_final without convergence, violation, or fault.
    Completed,
    /// Stopped early with rho below rho_stop.
    Converged,
    /// Enforced barrier crossed (h <= 0); aborted at the crossing.
    SafetyViolation,
    /// The gamma-m QP had no feasible point; aborted.
    Infeasible,
    /// Domain error or non-finite state during integration; aborted.
    NumericFault,
}

/// Barrier-crossing handling for the recorded violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    /// Crossing under the QP controller: the run aborts.
    Enforced,
    /// Crossing under a monitor-only run: recorded, integration continues.
    Monitored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub h: f64,
}

/// Scenario parameters echoed into exports.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub controller: ControllerKind,
    pub dt: f64,
    pub t_final: f64,
    pub rho_stop: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub barrier_present: bool,
}

/// Recorded closed-loop run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub violation: Option<Violation>,
    pub converged_at: Option<f64>,
    pub status: RunStatus,
    /// Human-readable detail for Infeasible/NumericFault statuses.
    pub fault: Option<String>,
    pub meta: RunMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &CartesianState {
        &self.samples.last().expect("trajectory is nonempty").state
    }

    pub fn min_h(&self) -> Option<f64> {
        self.samples.iter().filter_map(|s| s.h).fold(None, |acc, h| {
            Some(acc.map_or(h, |a: f64| a.min(h)))
        })
    }

    /// CSV export, one row per sample, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y,theta,v,omega,u1,u2,rho,phi,alpha,z,omega_tilde,V1,Vr,h,B,qp_status")?;
        for s in &self.samples {
            let h = s.h.unwrap_or(f64::NAN);
            let b = s.b.unwrap_or(f64::NAN);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.t,
                s.state.x,
                s.state.y,
                s.state.theta,
                s.state.v,
                s.state.omega,
                s.u.u1,
                s.u.u2,
                s.chi.rho,
                s.chi.phi,
                s.chi.alpha,
                s.chi.z,
                s.chi.omega_tilde,
                s.v1,
                s.vr,
                h,
                b,
                s.qp_status(self.meta.controller)
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// JSON export: the CSV channels per sample plus run metadata.
    pub fn to_json(&self) -> serde_json::Value {
        let samples: Vec<serde_json::Value> = self
            .samples
            .iter()
            .map(|s| {
                serde_json::json!({
                    "t": s.t,
                    "x": s.state.x,
                    "y": s.state.y,
                    "theta": s.state.theta,
                    "v": s.state.v,
                    "omega": s.state.omega,
                    "u1": s.u.u1,
                    "u2": s.u.u2,
                    "rho": s.chi.rho,
                    "phi": s.chi.phi,
                    "alpha": s.chi.alpha,
                    "z": s.chi.z,
                    "omega_tilde": s.chi.omega_tilde,
                    "V1": s.v1,
                    "Vr": s.vr,
                    "h": s.h,
                    "B": s.b,
                    "qp_status": s.qp_status(self.meta.controller),
                })
            })
            .collect();
        serde_json::json!({
            "meta": self.meta,
            "status": self.status,
            "violation": self.violation,
            "converged_at": self.converged_at,
            "fault": self.fault,
            "samples": samples,
        })
    }
}

/// One classical RK4 step of the cartesian dynamics with the input held
/// constant across the step (zero-order hold).
pub fn step_rk4(s: &CartesianState, u: &ControlInput, dt: f64) -> CartesianState {
    let x = s.as_vector();
    let f = |v: &nalgebra::SVector<f64, 5>| cartesian_dynamics(&CartesianState::from_vector(v), u);
    let k1 = f(&x);
    let k2 = f(&(x + 0.5 * dt * k1));
    let k3 = f(&(x + 0.5 * dt * k2));
    let k4 = f(&(x + dt * k3));
    CartesianState::from_vector(&(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)))
}

fn eval_control(
    sc: &Scenario,
    lyap: &LyapunovData,
    s: &CartesianState,
) -> Result<(ControlInput, Option<QpSolution>)> {
    let cc = sc.control_config();
    match sc.controller {
        ControllerKind::Nominal => {
            let (rho, _, _) = to_polar(s);
            if rho < cc.rho_stop {
                return Ok((ControlInput::zero(), None));
            }
            let chi = error_state(s, &sc.gains, cc.rho_min)?;
            let u = nominal_control(&chi, s.v, s.omega, &sc.gains, cc.rho_min)?;
            Ok((u, None))
        }
        ControllerKind::Pmn => {
            let u = pmn_control_from_state(s, &sc.gains, lyap, &cc)?;
            Ok((u, None))
        }
        ControllerKind::Qp => {
            let spec = sc.barrier.as_ref().expect("validated: qp requires barrier");
            let (u, sol) = safety_critical_control(s, &sc.gains, lyap, spec, &cc)?;
            Ok((u, sol))
        }
    }
}

/// Certifies a recorded QP solve against freshly assembled rows.
fn qp_residual_at(
    sc: &Scenario,
    lyap: &LyapunovData,
    s: &CartesianState,
    sol: &QpSolution,
) -> Result<f64> {
    let spec = sc.barrier.as_ref().expect("validated: qp requires barrier");
    let chi = error_state(s, &sc.gains, sc.rho_min)?;
    let p = crate::qp::assemble_qp(&chi, s, &sc.gains, lyap, spec, sc.epsilon, sc.rho_min)?;
    Ok(sol.kkt_residual(&p))
}

/// One closed-loop RK4 step with the controller re-evaluated at every stage.
fn step_closed_loop(
    sc: &Scenario,
    lyap: &LyapunovData,
    s: &CartesianState,
    dt: f64,
) -> Result<CartesianState> {
    let deriv = |v: &nalgebra::SVector<f64, 5>| -> Result<nalgebra::SVector<f64, 5>> {
        let st = CartesianState::from_vector(v);
        let (u, _) = eval_control(sc, lyap, &st)?;
        Ok(cartesian_dynamics(&st, &u))
    };
    let x = s.as_vector();
    let k1 = deriv(&x)?;
    let k2 = deriv(&(x + 0.5 * dt * k1))?;
    let k3 = deriv(&(x + 0.5 * dt * k2))?;
    let k4 = deriv(&(x + dt * k3))?;
    Ok(CartesianState::from_vector(&(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))))
}

fn record_sample(
    sc: &Scenario,
    lyap: &LyapunovData,
    t: f64,
    s: &CartesianState,
    u: ControlInput,
    qp: Option<QpSample>,
) -> Result<Sample> {
    let chi = error_state(s, &sc.gains, sc.rho_min)?;
    let v1 = weak_lyapunov_v1((chi.rho, chi.phi, chi.alpha), &sc.gains);
    let vr = composite_vr(&chi, &sc.gains, lyap);
    let (h, b) = match &sc.barrier {
        Some(spec) => {
            let h = spec.h(s.x, s.y);
            // The cascade value is only defined on the safe side.
            let b = if h > 0.0 { Some(cascade_cbf(spec, s)?.0) } else { None };
            (Some(h), b)
        }
        None => (None, None),
    };
    Ok(Sample { t, state: *s, chi, u, v1, vr, h, b, qp })
}

/// Integrates a scenario from t = 0 to t_final, stopping early on
/// convergence (rho < rho_stop), on an enforced barrier violation, on QP
/// infeasibility, or on a numeric fault. All outcomes are recorded in the
/// returned trajectory; only scenario validation fails the call itself.
pub fn run(sc: &Scenario) -> Result<Trajectory> {
    sc.validate()?;
    let lyap = LyapunovData::from_gains(&sc.gains)?;
    let n_steps = (sc.t_final / sc.dt + 1e-9).floor() as usize;
    let meta = RunMeta {
        controller: sc.controller,
        dt: sc.dt,
        t_final: sc.t_final,
        rho_stop: sc.rho_stop,
        epsilon: sc.epsilon,
        seed: sc.seed,
        barrier_present: sc.barrier.is_some(),
    };

    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut violation: Option<Violation> = None;
    let mut converged_at = None;
    let mut fault = None;
    let mut status = RunStatus::Completed;
    let mut s = sc.initial_state;

    'integrate: for k in 0..=n_steps {
        let t = k as f64 * sc.dt;
        if !s.is_finite() {
            status = RunStatus::NumericFault;
            fault = Some(format!("non-finite state at t = {t}"));
            break;
        }
        let (u, sol) = match eval_control(sc, &lyap, &s) {
            Ok(out) => out,
            Err(Error::UnsafeState { h }) => {
                let _ = record_sample(sc, &lyap, t, &s, ControlInput::zero(), None)
                    .map(|sample| samples.push(sample));
                violation = Some(Violation { t, kind: ViolationKind::Enforced, h });
                status = RunStatus::SafetyViolation;
                break;
            }
            Err(Error::Infeasible { b2 }) => {
                status = RunStatus::Infeasible;
                fault = Some(format!("QP infeasible at t = {t} (b2 = {b2})"));
                break;
            }
            Err(e) => {
                status = RunStatus::NumericFault;
                fault = Some(format!("controller fault at t = {t}: {e}"));
                break;
            }
        };
        let qp = match sol {
            Some(sol) => match qp_residual_at(sc, &lyap, &s, &sol) {
                Ok(kkt_residual) => Some(QpSample { active_set: sol.active_set, kkt_residual }),
                Err(e) => {
                    status = RunStatus::NumericFault;
                    fault = Some(format!("diagnostic fault at t = {t}: {e}"));
                    break;
                }
            },
            None => None,
        };
        match record_sample(sc, &lyap, t, &s, u, qp) {
            Ok(sample) => samples.push(sample),
            Err(e) => {
                status = RunStatus::NumericFault;
                fault = Some(format!("channel fault at t = {t}: {e}"));
                break;
            }
        }

        if let Some(spec) = &sc.barrier {
            let h = spec.h(s.x, s.y);
            if h <= 0.0 && violation.is_none() {
                let kind = if sc.controller == ControllerKind::Qp {
                    ViolationKind::Enforced
                } else {
                    ViolationKind::Monitored
                };
                violation = Some(Violation { t, kind, h });
                if kind == ViolationKind::Enforced {
                    status = RunStatus::SafetyViolation;
                    break 'integrate;
                }
            }
        }

        let (rho, _, _) = to_polar(&s);
        if rho < sc.rho_stop {
            converged_at = Some(t);
            status = RunStatus::Converged;
            break;
        }
        if k == n_steps {
            status = RunStatus::Completed;
            break;
        }

        s = match step_closed_loop(sc, &lyap, &s, sc.dt) {
            Ok(next) => next,
            Err(Error::UnsafeState { h }) => {
                // An RK4 stage left the safe set: the boundary was pierced
                // somewhere inside this step.
                violation = Some(Violation { t: t + sc.dt, kind: ViolationKind::Enforced, h });
                status = RunStatus::SafetyViolation;
                break;
            }
            Err(Error::Infeasible { b2 }) => {
                status = RunStatus::Infeasible;
                fault = Some(format!("QP infeasible within step at t = {t} (b2 = {b2})"));
                break;
            }
            Err(e) => {
                status = RunStatus::NumericFault;
                fault = Some(format!("step fault at t = {t}: {e}"));
                break;
            }
        };
    }

    Ok(Trajectory { samples, violation, converged_at, status, fault, meta })
}

/// Offline invariant checks over a recorded trajectory.
#[derive(Debug, Clone, Copy)]
pub struct MonitorConfig {
    /// Allowed per-step increase of Vr for nominal runs, as a multiple of dt.
    pub vr_tol: f64,
    /// KKT residual bound for QP samples.
    pub kkt_tol: f64,
    /// Optional inter-step control jump bound (checked away from active-set
    /// switches).
    pub jump_bound: Option<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { vr_tol: 1e-6, kkt_tol: 1e-8, jump_bound: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierSection {
    pub min_h: f64,
    pub first_crossing: Option<Violation>,
    pub enforced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VrSection {
    pub breaches: usize,
    pub max_increase: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KktSection {
    pub max_residual: f64,
    pub breaches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpSection {
    pub max_jump: f64,
    pub switches_excluded: usize,
    pub breaches: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    pub status: RunStatus,
    pub barrier: Option<BarrierSection>,
    pub vr_decrease: Option<VrSection>,
    pub kkt: Option<KktSection>,
    pub jump: JumpSection,
    /// Samples whose recorded V1/Vr/h channels disagree with recomputation.
    pub channel_mismatches: usize,
}

impl MonitorReport {
    pub fn ok(&self) -> bool {
        let barrier_ok = self
            .barrier
            .as_ref()
            .map_or(true, |b| !(b.enforced && b.first_crossing.is_some()));
        let vr_ok = self.vr_decrease.as_ref().map_or(true, |v| v.breaches == 0);
        let kkt_ok = self.kkt.as_ref().map_or(true, |k| k.breaches == 0);
        let jump_ok = self.jump.breaches.map_or(true, |b| b == 0);
        barrier_ok
            && vr_ok
            && kkt_ok
            && jump_ok
            && self.channel_mismatches == 0
            && self.status != RunStatus::NumericFault
            && self.status != RunStatus::Infeasible
    }
}

/// Recomputes and checks per-sample invariants: barrier positivity, nominal
/// Vr decrease outside the stopping ball, QP KKT residual bounds, and control
/// continuity away from active-set switches.
pub fn monitor_invariants(
    tr: &Trajectory,
    g: &Gains,
    lyap: &LyapunovData,
    spec: Option<&BarrierSpec>,
    cfg: &MonitorConfig,
) -> MonitorReport {
    let mut channel_mismatches = 0usize;
    for s in &tr.samples {
        let vr = composite_vr(&s.chi, g, lyap);
        let v1 = weak_lyapunov_v1((s.chi.rho, s.chi.phi, s.chi.alpha), g);
        let scale = 1.0 + vr.abs();
        if (vr - s.vr).abs() > 1e-9 * scale || (v1 - s.v1).abs() > 1e-9 * (1.0 + v1.abs()) {
            channel_mismatches += 1;
            continue;
        }
        if let (Some(spec), Some(h_rec)) = (spec, s.h) {
            if (spec.h(s.state.x, s.state.y) - h_rec).abs() > 1e-9 * (1.0 + h_rec.abs()) {
                channel_mismatches += 1;
            }
        }
    }

    let barrier = if tr.meta.barrier_present {
        Some(BarrierSection {
            min_h: tr.min_h().unwrap_or(f64::NAN),
            first_crossing: tr.violation,
            enforced: tr.meta.controller == ControllerKind::Qp,
        })
    } else {
        None
    };

    let vr_decrease = (tr.meta.controller == ControllerKind::Nominal).then(|| {
        let mut breaches = 0usize;
        let mut max_increase = f64::NEG_INFINITY;
        for w in tr.samples.windows(2) {
            if w[0].chi.rho < tr.meta.rho_stop {
                continue;
            }
            let dvr = w[1].vr - w[0].vr;
            max_increase = max_increase.max(dvr);
            if dvr > cfg.vr_tol * tr.meta.dt {
                breaches += 1;
            }
        }
        VrSection { breaches, max_increase }
    });

    let kkt = (tr.meta.controller == ControllerKind::Qp).then(|| {
        let mut max_residual: f64 = 0.0;
        let mut breaches = 0usize;
        for s in &tr.samples {
            if let Some(d) = &s.qp {
                max_residual = max_residual.max(d.kkt_residual);
                if d.kkt_residual > cfg.kkt_tol {
                    breaches += 1;
                }
            }
        }
        KktSection { max_residual, breaches }
    });

    let mut max_jump: f64 = 0.0;
    let mut switches_excluded = 0usize;
    let mut jump_breaches = 0usize;
    for w in tr.samples.windows(2) {
        let switched = match (&w[0].qp, &w[1].qp) {
            (Some(a), Some(b)) => a.active_set != b.active_set,
            (a, b) => a.is_some() != b.is_some(),
        };
        if switched {
            switches_excluded += 1;
            continue;
        }
        let jump = (w[1].u.u1 - w[0].u.u1).abs().max((w[1].u.u2 - w[0].u.u2).abs());
        max_jump = max_jump.max(jump);
        if cfg.jump_bound.is_some_and(|b| jump > b) {
            jump_breaches += 1;
        }
    }
    let jump = JumpSection {
        max_jump,
        switches_excluded,
        breaches: cfg.jump_bound.map(|_| jump_breaches),
    };

    MonitorReport { status: tr.status, barrier, vr_decrease, kkt, jump, channel_mismatches }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbf::Poly2;
    use crate::model::{RHO_MIN_DEFAULT, RHO_STOP_DEFAULT};
    use nalgebra::Matrix2;

    fn gains() -> Gains {
        Gains {
            k_rho: 2.0,
            k_alpha: 4.0,
            k_z: 6.0,
            k_omega: 6.0,
            lambda: 3.0,
            nu: 10.0,
            mu: 1.0,
            m: 2.0,
            gamma: 1.5,
            r: 16.0,
        }
    }

    fn example1_barrier() -> BarrierSpec {
        BarrierSpec::new(
            Poly2 { c0: 1.0, cx: 1.0, cy: 0.0, cxx: 0.0, cxy: 0.0, cyy: -8.0 },
            Matrix2::identity() * 0.1,
            1.0,
        )
        .unwrap()
    }

    fn scenario(controller: ControllerKind, barrier: Option<BarrierSpec>, t_final: f64) -> Scenario {
        Scenario {
            initial_state: CartesianState::new(7.0, 0.63, 2.55, -3.73, 4.13),
            gains: gains(),
            barrier,
            controller,
            t_final,
            dt: 1e-3,
            rho_stop: RHO_STOP_DEFAULT,
            rho_min: RHO_MIN_DEFAULT,
            epsilon: 1.0,
            seed: 0,
        }
    }

    #[test]
    fn equilibrium_state_is_fixed_under_zero_input() {
        let s = CartesianState::new(1.0, -2.0, 0.7, 0.0, 0.0);
        let s1 = step_rk4(&s, &ControlInput::zero(), 0.05);
        assert_eq!(s1, s);
    }

    #[test]
    fn constant_velocity_slice_integrates_exactly() {
        let s = CartesianState::new(0.0, 0.0, 0.0, 1.0, 0.0);
        let s1 = step_rk4(&s, &ControlInput::zero(), 0.1);
        assert!((s1.x - 0.1).abs() < 1e-15);
        assert_eq!(s1.y, 0.0);
        assert_eq!(s1.v, 1.0);
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut sc = scenario(ControllerKind::Nominal, None, 1.0);
        sc.dt = 0.0;
        assert!(matches!(sc.validate(), Err(Error::Config(_))));

        let mut sc = scenario(ControllerKind::Qp, None, 1.0);
        assert!(matches!(sc.validate(), Err(Error::Config(_))));
        sc.barrier = Some(example1_barrier());
        sc.initial_state = CartesianState::new(-7.0, 0.0, 0.0, 0.0, 0.0);
        let err = sc.validate().unwrap_err().to_string();
        assert!(err.contains("unsafe"), "{err}");
    }

    #[test]
    fn closed_loop_z_tracks_exact_exponential() {
        // Along the nominal closed loop z obeys z_dot = -k_z z exactly, so the
        // integrated z must match z0 e^{-k_z t} to integrator accuracy.
        let sc = scenario(ControllerKind::Nominal, None, 1.0);
        let tr = run(&sc).unwrap();
        assert_eq!(tr.status, RunStatus::Completed);
        let z0 = tr.samples[0].chi.z;
        let last = tr.samples.last().unwrap();
        let expected = z0 * (-sc.gains.k_z * last.t).exp();
        assert!(
            (last.chi.z - expected).abs() < 1e-9,
            "z = {}, expected {expected}",
            last.chi.z
        );
    }

    #[test]
    fn timestamps_are_uniform_and_increasing() {
        let sc = scenario(ControllerKind::Nominal, None, 0.05);
        let tr = run(&sc).unwrap();
        assert_eq!(tr.samples.len(), 51);
        for (k, s) in tr.samples.iter().enumerate() {
            assert_eq!(s.t, k as f64 * sc.dt);
        }
    }

    #[test]
    fn identical_scenarios_give_bit_identical_trajectories() {
        let sc = scenario(ControllerKind::Qp, Some(example1_barrier()), 0.2);
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa, sb);
        }
    }

    #[test]
    fn monitored_nominal_run_records_crossing_and_continues() {
        let sc = scenario(ControllerKind::Nominal, Some(example1_barrier()), 1.0);
        let tr = run(&sc).unwrap();
        assert_eq!(tr.status, RunStatus::Completed);
        let v = tr.violation.expect("nominal path cuts the unsafe region");
        assert_eq!(v.kind, ViolationKind::Monitored);
        assert!(v.t > 0.0 && v.t < 1.0);
        // Integration continued past the crossing.
        let last = tr.samples.last().unwrap();
        assert!(last.t >= 1.0 - 1e-12);
        let report = monitor_invariants(
            &tr,
            &sc.gains,
            &LyapunovData::from_gains(&sc.gains).unwrap(),
            sc.barrier.as_ref(),
            &MonitorConfig::default(),
        );
        let barrier = report.barrier.as_ref().unwrap();
        assert!(barrier.min_h < 0.0);
        assert!(!barrier.enforced);
        assert!(report.ok());
    }

    #[test]
    fn coarse_step_violation_is_an_enforced_abort() {
        // At dt = 0.5 a fast approach pierces the boundary inside one step;
        // the run must abort with a recorded enforced violation.
        let mut sc = scenario(ControllerKind::Qp, Some(example1_barrier()), 4.0);
        sc.initial_state = CartesianState::new(0.2, 0.0, std::f64::consts::PI, 10.0, 0.0);
        sc.dt = 0.5;
        let tr = run(&sc).unwrap();
        assert_eq!(tr.status, RunStatus::SafetyViolation);
        let v = tr.violation.unwrap();
        assert_eq!(v.kind, ViolationKind::Enforced);
        assert!(v.h <= 0.0);
        assert!(!tr.samples.is_empty());
    }

    #[test]
    fn qp_run_keeps_kkt_residuals_small() {
        let sc = scenario(ControllerKind::Qp, Some(example1_barrier()), 0.5);
        let tr = run(&sc).unwrap();
        assert!(tr.violation.is_none());
        let report = monitor_invariants(
            &tr,
            &sc.gains,
            &LyapunovData::from_gains(&sc.gains).unwrap(),
            sc.barrier.as_ref(),
            &MonitorConfig::default(),
        );
        let kkt = report.kkt.as_ref().unwrap();
        assert!(kkt.max_residual <= 1e-8, "max residual {}", kkt.max_residual);
        assert_eq!(report.channel_mismatches, 0);
        assert!(report.ok());
    }

    #[test]
    fn nominal_vr_is_nonincreasing() {
        let sc = scenario(ControllerKind::Nominal, None, 2.0);
        let tr = run(&sc).unwrap();
        let report = monitor_invariants(
            &tr,
            &sc.gains,
            &LyapunovData::from_gains(&sc.gains).unwrap(),
            None,
            &MonitorConfig::default(),
        );
        assert!(report.barrier.is_none());
        let vr = report.vr_decrease.unwrap();
        assert_eq!(vr.breaches, 0, "max increase {}", vr.max_increase);
    }

    #[test]
    fn csv_round_trips_all_floats() {
        let sc = scenario(ControllerKind::Qp, Some(example1_barrier()), 0.01);
        let tr = run(&sc).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x,y,theta,v,omega,u1,u2,rho,phi,alpha,z,omega_tilde,V1,Vr,h,B,qp_status"
        );
        for (s, line) in tr.samples.iter().zip(lines) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 18);
            assert_eq!(cols[0].parse::<f64>().unwrap(), s.t);
            assert_eq!(cols[1].parse::<f64>().unwrap(), s.state.x);
            assert_eq!(cols[13].parse::<f64>().unwrap(), s.v1);
            assert_eq!(cols[16].parse::<f64>().unwrap(), s.b.unwrap());
            assert!(["empty", "clf", "cbf", "both"].contains(&cols[17]));
        }
    }

    #[test]
    fn json_export_carries_metadata() {
        let sc = scenario(ControllerKind::Nominal, None, 0.01);
        let tr = run(&sc).unwrap();
        let v = tr.to_json();
        assert_eq!(v["meta"]["controller"], "nominal");
        assert_eq!(v["samples"].as_array().unwrap().len(), tr.samples.len());
        assert!(v["samples"][0]["h"].is_null());
    }
}

//! Seeded random batches of closed-loop runs over a sampling box, executed in
//! parallel with order-independent aggregation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{to_polar, CartesianState};
use crate::scenario::SweepSection;
use crate::sim::{run, RunStatus, Scenario};

/// Final-rho threshold separating converged runs from stalls.
pub const CONVERGENCE_RADIUS: f64 = 0.05;

/// Attempts per initial condition before the sampling box is declared
/// incompatible with the safety margin.
const MAX_REJECTIONS: usize = 10_000;

/// Outcome of a single sweep run.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub index: usize,
    pub initial: [f64; 5],
    pub status: RunStatus,
    pub final_rho: f64,
    pub converged_at: Option<f64>,
    pub min_h: Option<f64>,
    pub violation_t: Option<f64>,
    /// Completed the horizon but ended outside the convergence radius.
    pub stalled: bool,
}

/// Aggregate over a sweep, deterministic for a fixed seed.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub count: usize,
    pub seed: u64,
    pub violations: usize,
    pub converged: usize,
    pub stalled: usize,
    pub faults: usize,
    pub records: Vec<SweepRecord>,
}

impl SweepSummary {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep summary serializes")
    }
}

/// Draws `sweep.count` initial conditions uniformly from the configured box,
/// rejection-sampled to h > max(h_margin, 0) when the base scenario carries a
/// barrier. Sampling is sequential and fully determined by `sweep.seed`.
pub fn draw_initial_conditions(
    base: &Scenario,
    sweep: &SweepSection,
) -> Result<Vec<CartesianState>> {
    for (name, [lo, hi]) in [
        ("x", sweep.x),
        ("y", sweep.y),
        ("theta", sweep.theta),
        ("v", sweep.v),
        ("omega", sweep.omega),
    ] {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "[sweep] {name} range [{lo}, {hi}] is not a finite interval"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed);
    let margin = sweep.h_margin.max(0.0);
    let mut out = Vec::with_capacity(sweep.count);
    for i in 0..sweep.count {
        let mut attempts = 0;
        loop {
            let s = CartesianState::new(
                rng.gen_range(sweep.x[0]..=sweep.x[1]),
                rng.gen_range(sweep.y[0]..=sweep.y[1]),
                rng.gen_range(sweep.theta[0]..=sweep.theta[1]),
                rng.gen_range(sweep.v[0]..=sweep.v[1]),
                rng.gen_range(sweep.omega[0]..=sweep.omega[1]),
            );
            let safe = match &base.barrier {
                Some(spec) => spec.h(s.x, s.y) > margin,
                None => true,
            };
            if safe {
                out.push(s);
                break;
            }
            attempts += 1;
            if attempts >= MAX_REJECTIONS {
                return Err(Error::Config(format!(
                    "[sweep] could not sample a safe initial condition (index {i}) after {MAX_REJECTIONS} attempts; h_margin = {margin}"
                )));
            }
        }
    }
    Ok(out)
}

fn record_one(base: &Scenario, index: usize, ic: CartesianState) -> SweepRecord {
    let sc = Scenario { initial_state: ic, ..base.clone() };
    let initial = [ic.x, ic.y, ic.theta, ic.v, ic.omega];
    match run(&sc) {
        Ok(tr) => {
            let (final_rho, _, _) = to_polar(tr.final_state());
            let stalled = tr.status == RunStatus::Completed && final_rho >= CONVERGENCE_RADIUS;
            SweepRecord {
                index,
                initial,
                status: tr.status,
                final_rho,
                converged_at: tr.converged_at,
                min_h: tr.min_h(),
                violation_t: tr.violation.map(|v| v.t),
                stalled,
            }
        }
        Err(_) => SweepRecord {
            index,
            initial,
            status: RunStatus::NumericFault,
            final_rho: f64::NAN,
            converged_at: None,
            min_h: None,
            violation_t: None,
            stalled: false,
        },
    }
}

/// Runs the sweep in parallel (optionally capped to `threads`) and aggregates.
pub fn run_sweep(
    base: &Scenario,
    sweep: &SweepSection,
    threads: Option<usize>,
) -> Result<SweepSummary> {
    base.validate()?;
    let ics = draw_initial_conditions(base, sweep)?;
    let work = || -> Vec<SweepRecord> {
        ics.par_iter()
            .enumerate()
            .map(|(i, ic)| record_one(base, i, *ic))
            .collect()
    };
    let records = match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        _ => work(),
    };

    let violations = records
        .iter()
        .filter(|r| r.status == RunStatus::SafetyViolation || r.violation_t.is_some())
        .count();
    let converged = records
        .iter()
        .filter(|r| r.final_rho.is_finite() && r.final_rho < CONVERGENCE_RADIUS)
        .count();
    let stalled = records.iter().filter(|r| r.stalled).count();
    let faults = records
        .iter()
        .filter(|r| matches!(r.status, RunStatus::NumericFault | RunStatus::Infeasible))
        .count();
    Ok(SweepSummary {
        count: records.len(),
        seed: sweep.seed,
        violations,
        converged,
        stalled,
        faults,
        records,
    })
}

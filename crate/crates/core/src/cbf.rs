//! Reciprocal barrier functions: B1 = 1/h for the kinematic model, the
//! backstepped cascade CBF B = B1 + eta^T H eta, gradients, and numerical
//! verification of the CBF implication condition.

use nalgebra::{Matrix2, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CartesianState;

/// Quadratic polynomial in (x, y): coefficients of 1, x, y, x^2, xy, y^2.
/// Both bundled safe-set functions are of this form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    pub c0: f64,
    pub cx: f64,
    pub cy: f64,
    pub cxx: f64,
    pub cxy: f64,
    pub cyy: f64,
}

impl Poly2 {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.c0 + self.cx * x + self.cy * y + self.cxx * x * x + self.cxy * x * y + self.cyy * y * y
    }

    pub fn grad(&self, x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(
            self.cx + 2.0 * self.cxx * x + self.cxy * y,
            self.cy + self.cxy * x + 2.0 * self.cyy * y,
        )
    }
}

/// Safe-set specification: h > 0 defines the safe interior, H weights the
/// velocity penalty of the cascade CBF, and alpha_B(s) = kappa * s is the
/// class-K rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub h_poly: Poly2,
    pub h_matrix: Matrix2<f64>,
    pub kappa: f64,
}

impl BarrierSpec {
    pub fn new(h_poly: Poly2, h_matrix: Matrix2<f64>, kappa: f64) -> Result<Self> {
        let spec = Self { h_poly, h_matrix, kappa };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let h = &self.h_matrix;
        if (h[(0, 1)] - h[(1, 0)]).abs() > 1e-12 {
            return Err(Error::Config("[barrier] H must be symmetric".into()));
        }
        if !(h[(0, 0)] > 0.0 && h.determinant() > 0.0) {
            return Err(Error::Config("[barrier] H must be positive definite".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("[barrier] kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    pub fn h(&self, x: f64, y: f64) -> f64 {
        self.h_poly.eval(x, y)
    }

    pub fn grad_h(&self, x: f64, y: f64) -> Vector2<f64> {
        self.h_poly.grad(x, y)
    }

    /// Class-K rate alpha_B(s) = kappa * s.
    pub fn alpha_b(&self, s: f64) -> f64 {
        self.kappa * s
    }
}

/// Kinematic reciprocal barrier B1 = 1/h with gradient -grad(h)/h^2.
pub fn b1(spec: &BarrierSpec, x: f64, y: f64) -> Result<(f64, Vector2<f64>)> {
    let h = spec.h(x, y);
    if h <= 0.0 {
        return Err(Error::UnsafeState { h });
    }
    Ok((1.0 / h, -spec.grad_h(x, y) / (h * h)))
}

/// Cascade CBF B = 1/h + eta^T H eta with analytic gradient over
/// (x, y, v, omega).
pub fn cascade_cbf(spec: &BarrierSpec, s: &CartesianState) -> Result<(f64, SVector<f64, 4>)> {
    let (b1_val, gb1) = b1(spec, s.x, s.y)?;
    let eta = s.eta();
    let h_eta = spec.h_matrix * eta;
    let b = b1_val + eta.dot(&h_eta);
    let grad = SVector::<f64, 4>::from([gb1[0], gb1[1], 2.0 * h_eta[0], 2.0 * h_eta[1]]);
    Ok((b, grad))
}

/// Rectangular state grid for `verify_backstepping_condition`: (lo, hi, n)
/// per axis, positions crossed with velocities.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x: (f64, f64, usize),
    pub y: (f64, f64, usize),
    pub v: (f64, f64, usize),
    pub omega: (f64, f64, usize),
}

/// Worst margins of the Theorem-1 implication check.
#[derive(Debug, Clone, Copy)]
pub struct BackstepReport {
    /// Grid points where L_G B = 2 eta^T H is zero despite eta != 0, or
    /// nonzero at eta = 0 (must be 0).
    pub lgb_mismatches: usize,
    /// Points on the eta = 0 slice with L_F B - alpha_B(1/B) >= 0 (must be 0).
    pub slice_violations: usize,
    /// max over the eta = 0 slice of L_F B - alpha_B(1/B); negative iff safe.
    pub worst_slice_margin: f64,
    /// max |(L_F B - alpha_B(1/B)) + alpha_B(h)| on the slice (identity check).
    pub max_identity_deviation: f64,
    /// Grid points skipped because h <= 0 there.
    pub skipped_unsafe: usize,
}

impl BackstepReport {
    pub fn ok(&self) -> bool {
        self.lgb_mismatches == 0 && self.slice_violations == 0 && self.worst_slice_margin < 0.0
    }
}

/// Numerically checks, over a safe grid, that (a) L_G B = 2 eta^T H vanishes
/// exactly iff eta = 0 and (b) on the eta = 0 slice (the zero virtual safety
/// law) L_F B - alpha_B(1/B) = -alpha_B(h) < 0.
pub fn verify_backstepping_condition(spec: &BarrierSpec, grid: &GridSpec) -> BackstepReport {
    use rayon::prelude::*;

    let lin = |(lo, hi, n): (f64, f64, usize), i: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };

    (0..grid.x.2)
        .into_par_iter()
        .map(|ix| {
            let x = lin(grid.x, ix);
            let mut rep = BackstepReport {
                lgb_mismatches: 0,
                slice_violations: 0,
                worst_slice_margin: f64::NEG_INFINITY,
                max_identity_deviation: 0.0,
                skipped_unsafe: 0,
            };
            for iy in 0..grid.y.2 {
                let y = lin(grid.y, iy);
                let h = spec.h(x, y);
                if h <= 0.0 {
                    rep.skipped_unsafe += grid.v.2 * grid.omega.2;
                    continue;
                }
                for iv in 0..grid.v.2 {
                    let v = lin(grid.v, iv);
                    for iw in 0..grid.omega.2 {
                        let omega = lin(grid.omega, iw);
                        let eta = Vector2::new(v, omega);
                        let lgb = 2.0 * (spec.h_matrix * eta);
                        let eta_zero = v == 0.0 && omega == 0.0;
                        if eta_zero != (lgb == Vector2::zeros()) {
                            rep.lgb_mismatches += 1;
                        }
                        if eta_zero {
                            // F = (v cos, v sin, omega, 0, 0) vanishes, so
                            // L_F B = 0 and the condition reduces to
                            // -alpha_B(1/B) with B = 1/h.
                            let b = 1.0 / h;
                            let lfb = 0.0;
                            let margin = lfb - spec.alpha_b(1.0 / b);
                            rep.worst_slice_margin = rep.worst_slice_margin.max(margin);
                            if margin >= 0.0 {
                                rep.slice_violations += 1;
                            }
                            rep.max_identity_deviation = rep
                                .max_identity_deviation
                                .max((margin + spec.alpha_b(h)).abs());
                        }
                    }
                }
            }
            rep
        })
        .reduce(
            || BackstepReport {
                lgb_mismatches: 0,
                slice_violations: 0,
                worst_slice_margin: f64::NEG_INFINITY,
                max_identity_deviation: 0.0,
                skipped_unsafe: 0,
            },
            |a, b| BackstepReport {
                lgb_mismatches: a.lgb_mismatches + b.lgb_mismatches,
                slice_violations: a.slice_violations + b.slice_violations,
                worst_slice_margin: a.worst_slice_margin.max(b.worst_slice_margin),
                max_identity_deviation: a.max_identity_deviation.max(b.max_identity_deviation),
                skipped_unsafe: a.skipped_unsafe + b.skipped_unsafe,
            },
        )
}

/// CBF row of the QP over the scaled input u_bar = [u1/rho, u2]^T:
/// a2^T u_bar <= b2 with a2 = (L_{g2} B)^T = (2 (H eta)_1 rho, 2 (H eta)_2)
/// and b2 = alpha_B(1/B) - L_{f2} B; the diag(rho, 1) factor converts the
/// scaled input to physical accelerations inside the B-dynamics.
pub fn barrier_constraint_row(
    spec: &BarrierSpec,
    s: &CartesianState,
    rho: f64,
    rho_min: f64,
) -> Result<(Vector2<f64>, f64)> {
    if rho <= rho_min {
        return Err(Error::Domain(format!(
            "barrier_constraint_row: rho = {rho} at or below the floor {rho_min}"
        )));
    }
    let h = spec.h(s.x, s.y);
    if h <= 0.0 {
        return Err(Error::UnsafeState { h });
    }
    let gh = spec.grad_h(s.x, s.y);
    let eta = s.eta();
    let b = 1.0 / h + eta.dot(&(spec.h_matrix * eta));
    let l_f2_b = -(gh[0] * s.v * s.theta.cos() + gh[1] * s.v * s.theta.sin()) / (h * h);
    let h_eta = spec.h_matrix * eta;
    let a2 = Vector2::new(2.0 * h_eta[0] * rho, 2.0 * h_eta[1]);
    let b2 = spec.alpha_b(1.0 / b) - l_f2_b;
    Ok((a2, b2))
}

//! State representations, coordinate transforms, and the open-loop dynamics
//! of the force-controlled unicycle.

use nalgebra::{SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor guarding divisions by rho; hitting it outside the stopping
/// ball is an error, never a silent clamp.
pub const RHO_MIN_DEFAULT: f64 = 1e-9;
/// Default radius of the stopping ball inside which the controllers freeze
/// their output at zero (the polar chart and z = v_tilde/rho are singular at
/// the origin).
pub const RHO_STOP_DEFAULT: f64 = 1e-3;

/// Robot configuration and velocities.
///
/// `theta` is stored unwrapped (no modular reduction); consumers needing a
/// wrapped angle must wrap explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    /// Position [m].
    pub x: f64,
    /// Position [m].
    pub y: f64,
    /// Heading [rad], unwrapped.
    pub theta: f64,
    /// Forward speed [m/s].
    pub v: f64,
    /// Angular rate [rad/s].
    pub omega: f64,
}

impl CartesianState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64, omega: f64) -> Self {
        Self { x, y, theta, v, omega }
    }

    /// Velocity sub-vector eta = [v, omega]^T.
    pub fn eta(&self) -> Vector2<f64> {
        Vector2::new(self.v, self.omega)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.theta, self.v, self.omega].iter().all(|c| c.is_finite())
    }

    pub fn as_vector(&self) -> SVector<f64, 5> {
        SVector::<f64, 5>::from([self.x, self.y, self.theta, self.v, self.omega])
    }

    pub fn from_vector(s: &SVector<f64, 5>) -> Self {
        Self { x: s[0], y: s[1], theta: s[2], v: s[3], omega: s[4] }
    }
}

/// Polar/error coordinates used by the CLF and the nominal controller.
///
/// chi = [rho, phi, alpha, z, omega_tilde]^T; xi = [alpha, phi]^T and
/// zeta = [z, omega_tilde]^T are sub-vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarErrorState {
    /// Distance to the origin [m]; rho > 0 is required for z to be defined.
    pub rho: f64,
    /// Bearing angle [rad], in (-pi, pi] at construction.
    pub phi: f64,
    /// Heading error theta - phi [rad], wrapped into (-pi, pi].
    pub alpha: f64,
    /// Scaled speed error v_tilde / rho [1/s].
    pub z: f64,
    /// Angular-rate error omega - omega_star [rad/s].
    pub omega_tilde: f64,
}

impl PolarErrorState {
    pub fn chi(&self) -> SVector<f64, 5> {
        SVector::<f64, 5>::from([self.rho, self.phi, self.alpha, self.z, self.omega_tilde])
    }

    /// xi = [alpha, phi]^T.
    pub fn xi(&self) -> Vector2<f64> {
        Vector2::new(self.alpha, self.phi)
    }

    /// zeta = [z, omega_tilde]^T.
    pub fn zeta(&self) -> Vector2<f64> {
        Vector2::new(self.z, self.omega_tilde)
    }
}

/// Physical acceleration input (u1 [m/s^2], u2 [rad/s^2]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
}

impl ControlInput {
    pub fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn zero() -> Self {
        Self { u1: 0.0, u2: 0.0 }
    }
}

/// Scaled input u_bar = [u1/rho, u2]^T, the QP decision variable; rows stay
/// well-scaled near small rho and `to_physical` undoes the scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledInput {
    pub ubar1: f64,
    pub u2: f64,
}

impl ScaledInput {
    pub fn from_vector(u: &Vector2<f64>) -> Self {
        Self { ubar1: u[0], u2: u[1] }
    }

    pub fn to_physical(self, rho: f64) -> ControlInput {
        ControlInput { u1: rho * self.ubar1, u2: self.u2 }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Polar transform: rho = sqrt(x^2 + y^2), phi = atan2(y, x), alpha =
/// theta - phi wrapped into (-pi, pi]. At x = y = 0, phi is 0 by convention.
pub fn to_polar(s: &CartesianState) -> (f64, f64, f64) {
    let rho = s.x.hypot(s.y);
    let phi = if rho == 0.0 { 0.0 } else { s.y.atan2(s.x) };
    let alpha = wrap_angle(s.theta - phi);
    (rho, phi, alpha)
}

/// Open-loop dynamics of the force-controlled unicycle: kinematics
/// (x_dot, y_dot, theta_dot) = (v cos(theta), v sin(theta), omega) and
/// kinetics (v_dot, omega_dot) = (u1, u2). `u` is physical (unscaled).
pub fn cartesian_dynamics(s: &CartesianState, u: &ControlInput) -> SVector<f64, 5> {
    SVector::<f64, 5>::from([
        s.v * s.theta.cos(),
        s.v * s.theta.sin(),
        s.omega,
        u.u1,
        u.u2,
    ])
}

/// Polar kinematics (rho_dot, phi_dot, alpha_dot) =
/// (v cos(alpha), (v/rho) sin(alpha), omega - (v/rho) sin(alpha)).
pub fn polar_kinematics(
    p: (f64, f64, f64),
    v: f64,
    omega: f64,
    rho_min: f64,
) -> Result<(f64, f64, f64)> {
    let (rho, _phi, alpha) = p;
    if rho <= rho_min {
        return Err(Error::Domain(format!(
            "polar_kinematics: rho = {rho} at or below the floor {rho_min}"
        )));
    }
    let rho_dot = v * alpha.cos();
    let phi_dot = v / rho * alpha.sin();
    let alpha_dot = omega - phi_dot;
    Ok((rho_dot, phi_dot, alpha_dot))
}

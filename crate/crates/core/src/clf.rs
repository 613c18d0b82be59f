//! Nominal stabilizing controller and the constructive strict Lyapunov
//! functions (V1, V2, V, Vr) with analytic gradients, serving as the CLF for
//! the QP.

use nalgebra::{Matrix2, Matrix3x2, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{polar_kinematics, to_polar, CartesianState, ControlInput, PolarErrorState};

/// Controller constants. `nu` weights V1 inside the strict Lyapunov function,
/// `mu` scales its logarithm inside Vr, `m` and `gamma` parametrize the QP,
/// and `r` is the radius of the compact set the certificates are checked on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    /// Radial gain [1/s].
    pub k_rho: f64,
    /// Heading-error gain [1/s].
    pub k_alpha: f64,
    /// Speed-error gain [1/s].
    pub k_z: f64,
    /// Angular-rate-error gain [1/s].
    pub k_omega: f64,
    /// Bearing coupling weight (dimensionless).
    pub lambda: f64,
    /// Strict-Lyapunov weight on V1.
    pub nu: f64,
    /// Log-scaling weight in Vr.
    pub mu: f64,
    /// QP relaxation weight, m >= 1.
    pub m: f64,
    /// QP CLF scaling, gamma >= 1.
    pub gamma: f64,
    /// Compact-set radius for certification grids.
    pub r: f64,
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("k_rho", self.k_rho),
            ("k_alpha", self.k_alpha),
            ("k_z", self.k_z),
            ("k_omega", self.k_omega),
            ("lambda", self.lambda),
            ("nu", self.nu),
            ("mu", self.mu),
            ("r", self.r),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Config(format!("[gains] {name} must be positive, got {value}")));
            }
        }
        if !(self.m >= 1.0) || !self.m.is_finite() {
            return Err(Error::Config(format!("[gains] m must be >= 1, got {}", self.m)));
        }
        if !(self.gamma >= 1.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("[gains] gamma must be >= 1, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Hurwitz matrix of the output-injection form, A = [[-k_alpha, lambda k_rho],
/// [-k_rho, 0]] (trace -k_alpha < 0, det lambda k_rho^2 > 0).
pub fn a_matrix(g: &Gains) -> Matrix2<f64> {
    Matrix2::new(-g.k_alpha, g.lambda * g.k_rho, -g.k_rho, 0.0)
}

/// Solution of the Lyapunov equation plus the interconnection bound constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovData {
    /// Symmetric positive-definite P with A^T P + P A = -I.
    pub p: Matrix2<f64>,
    /// Constant with |K(alpha, phi)| <= c |xi| |alpha| on |xi| <= r.
    pub c: f64,
    /// Largest eigenvalue of P.
    pub lambda_max_p: f64,
}

impl LyapunovData {
    pub fn from_gains(g: &Gains) -> Result<Self> {
        let p = solve_lyapunov_p(g)?;
        let half_tr = (p[(0, 0)] + p[(1, 1)]) / 2.0;
        let half_gap = (p[(0, 0)] - p[(1, 1)]) / 2.0;
        let lambda_max_p = half_tr + (half_gap * half_gap + p[(0, 1)] * p[(0, 1)]).sqrt();
        let c = estimate_c(g);
        Ok(Self { p, c, lambda_max_p })
    }
}

/// Lower bound nu(r) = 2 c^2 r^2 lambda_max(P)^2 / k_alpha under which V is
/// strict on the r-ball; reported as a diagnostic (configured nu takes
/// precedence).
pub fn nu_lower_bound(g: &Gains, lyap: &LyapunovData) -> f64 {
    2.0 * lyap.c * lyap.c * g.r * g.r * lyap.lambda_max_p * lyap.lambda_max_p / g.k_alpha
}

/// sin(s)/s extended smoothly by sinc(0) = 1; series fallback below |s| = 1e-4
/// avoids cancellation.
pub fn sinc(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        let s2 = s * s;
        1.0 - s2 / 6.0 + s2 * s2 / 120.0
    } else {
        s.sin() / s
    }
}

/// Derivative of sinc: (s cos s - sin s)/s^2, with series fallback
/// -s/3 + s^3/30 below |s| = 1e-4.
pub fn sinc_prime(s: f64) -> f64 {
    if s.abs() < 1e-4 {
        -s / 3.0 + s * s * s / 30.0
    } else {
        (s * s.cos() - s.sin()) / (s * s)
    }
}

/// Virtual control laws v* = -k_rho cos(alpha) rho and
/// omega* = -k_alpha alpha - k_rho sinc(2 alpha) (alpha - lambda phi).
pub fn virtual_law(p: (f64, f64, f64), g: &Gains) -> (f64, f64) {
    let (rho, phi, alpha) = p;
    let v_star = -g.k_rho * alpha.cos() * rho;
    let omega_star = -g.k_alpha * alpha - g.k_rho * sinc(2.0 * alpha) * (alpha - g.lambda * phi);
    (v_star, omega_star)
}

/// Time derivatives of the virtual laws by the chain rule through
/// `polar_kinematics` evaluated at the actual (v, omega).
pub fn virtual_law_rates(
    p: (f64, f64, f64),
    v: f64,
    omega: f64,
    g: &Gains,
    rho_min: f64,
) -> Result<(f64, f64)> {
    let (rho, phi, alpha) = p;
    let (rho_dot, phi_dot, alpha_dot) = polar_kinematics(p, v, omega, rho_min)?;
    let v_star_dot = -g.k_rho * (alpha.cos() * rho_dot - alpha.sin() * alpha_dot * rho);
    let omega_star_dot = -g.k_alpha * alpha_dot
        - g.k_rho
            * (2.0 * sinc_prime(2.0 * alpha) * alpha_dot * (alpha - g.lambda * phi)
                + sinc(2.0 * alpha) * (alpha_dot - g.lambda * phi_dot));
    Ok((v_star_dot, omega_star_dot))
}

/// Builds the polar/error state from a Cartesian one: z = (v - v*)/rho and
/// omega_tilde = omega - omega*.
pub fn error_state(s: &CartesianState, g: &Gains, rho_min: f64) -> Result<PolarErrorState> {
    let (rho, phi, alpha) = to_polar(s);
    if rho <= rho_min {
        return Err(Error::Domain(format!(
            "error_state: rho = {rho} at or below the floor {rho_min}; z is undefined"
        )));
    }
    let (v_star, omega_star) = virtual_law((rho, phi, alpha), g);
    Ok(PolarErrorState {
        rho,
        phi,
        alpha,
        z: (s.v - v_star) / rho,
        omega_tilde: s.omega - omega_star,
    })
}

/// Nominal control law
/// u1 = v*_dot - rho (k_rho cos^2(alpha) z - cos(alpha) z^2 + k_z z),
/// u2 = omega*_dot - k_omega omega_tilde,
/// which yields the closed-loop error dynamics z_dot = -k_z z and
/// omega_tilde_dot = -k_omega omega_tilde.
pub fn nominal_control(
    p: &PolarErrorState,
    v: f64,
    omega: f64,
    g: &Gains,
    rho_min: f64,
) -> Result<ControlInput> {
    let (v_star_dot, omega_star_dot) =
        virtual_law_rates((p.rho, p.phi, p.alpha), v, omega, g, rho_min)?;
    let ca = p.alpha.cos();
    let u1 = v_star_dot - p.rho * (g.k_rho * ca * ca * p.z - ca * p.z * p.z + g.k_z * p.z);
    let u2 = omega_star_dot - g.k_omega * p.omega_tilde;
    Ok(ControlInput::new(u1, u2))
}

/// Weak Lyapunov function V1 = (rho^2 + lambda phi^2 + alpha^2) / 2.
pub fn weak_lyapunov_v1(p: (f64, f64, f64), g: &Gains) -> f64 {
    let (rho, phi, alpha) = p;
    0.5 * (rho * rho + g.lambda * phi * phi + alpha * alpha)
}

/// Gradient of V1 over (rho, phi, alpha): (rho, lambda phi, alpha).
pub fn grad_v1(p: (f64, f64, f64), g: &Gains) -> Vector3<f64> {
    Vector3::new(p.0, g.lambda * p.1, p.2)
}

/// Solves A^T P + P A = -I for symmetric P via the 3-unknown linear system in
/// (p11, p12, p22).
pub fn solve_lyapunov_p(g: &Gains) -> Result<Matrix2<f64>> {
    let a = a_matrix(g);
    // Rows: d/dt of the (1,1), (1,2), (2,2) entries of x^T P x.
    let sys = nalgebra::Matrix3::new(
        2.0 * a[(0, 0)],
        2.0 * a[(1, 0)],
        0.0,
        a[(0, 1)],
        a[(0, 0)] + a[(1, 1)],
        a[(1, 0)],
        0.0,
        2.0 * a[(0, 1)],
        2.0 * a[(1, 1)],
    );
    let rhs = Vector3::new(-1.0, 0.0, -1.0);
    let lu = sys.lu();
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    Ok(Matrix2::new(sol[0], sol[1], sol[1], sol[2]))
}

/// Output-injection term K(alpha, phi) =
/// (-lambda k_rho (1 - sinc(2 alpha)) phi, k_rho (1 - sinc(2 alpha)) alpha).
pub fn output_injection_k(alpha: f64, phi: f64, g: &Gains) -> Vector2<f64> {
    let w = g.k_rho * (1.0 - sinc(2.0 * alpha));
    Vector2::new(-g.lambda * w * phi, w * alpha)
}

/// Grid estimate of the smallest c with |K(alpha, phi)| <= c |xi| |alpha| on
/// {|xi| <= r, alpha != 0}, inflated by a 10% safety margin.
pub fn estimate_c(g: &Gains) -> f64 {
    let n = 481;
    let r = g.r;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        let alpha = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        if alpha == 0.0 {
            continue;
        }
        for j in 0..n {
            let phi = -r + 2.0 * r * j as f64 / (n - 1) as f64;
            let xi_norm = alpha.hypot(phi);
            if xi_norm > r || xi_norm == 0.0 {
                continue;
            }
            let k = output_injection_k(alpha, phi, g);
            sup = sup.max(k.norm() / (xi_norm * alpha.abs()));
        }
    }
    1.1 * sup
}

/// Strict Lyapunov function V = nu V1 + xi^T P xi with xi = [alpha, phi]^T.
/// Logs a warning (does not fail) outside the certified ball |.| <= r.
pub fn strict_v(p: (f64, f64, f64), g: &Gains, lyap: &LyapunovData) -> f64 {
    let (rho, phi, alpha) = p;
    let norm = (rho * rho + phi * phi + alpha * alpha).sqrt();
    if norm > g.r {
        log::warn!("strict_v evaluated outside the certified ball: |(rho,phi,alpha)| = {norm} > r = {}", g.r);
    }
    let xi = Vector2::new(alpha, phi);
    g.nu * weak_lyapunov_v1(p, g) + (xi.transpose() * lyap.p * xi)[0]
}

/// Analytic gradient of `strict_v` over (rho, phi, alpha).
pub fn grad_strict_v(p: (f64, f64, f64), g: &Gains, lyap: &LyapunovData) -> Vector3<f64> {
    let (rho, phi, alpha) = p;
    let (p11, p12, p22) = (lyap.p[(0, 0)], lyap.p[(0, 1)], lyap.p[(1, 1)]);
    Vector3::new(
        g.nu * rho,
        g.nu * g.lambda * phi + 2.0 * (p12 * alpha + p22 * phi),
        g.nu * alpha + 2.0 * (p11 * alpha + p12 * phi),
    )
}

/// Composite function Vr = mu ln(V + 1) + U(z, omega_tilde) with
/// U = (z^2/k_z + omega_tilde^2/k_omega) / 2.
pub fn composite_vr(chi: &PolarErrorState, g: &Gains, lyap: &LyapunovData) -> f64 {
    let v = strict_v((chi.rho, chi.phi, chi.alpha), g, lyap);
    let u = 0.5 * (chi.z * chi.z / g.k_z + chi.omega_tilde * chi.omega_tilde / g.k_omega);
    g.mu * (v + 1.0).ln() + u
}

/// Analytic gradient of Vr over chi = (rho, phi, alpha, z, omega_tilde).
pub fn grad_composite_vr(chi: &PolarErrorState, g: &Gains, lyap: &LyapunovData) -> SVector<f64, 5> {
    let p = (chi.rho, chi.phi, chi.alpha);
    let v = strict_v(p, g, lyap);
    let gv = grad_strict_v(p, g, lyap) * (g.mu / (v + 1.0));
    SVector::<f64, 5>::from([gv[0], gv[1], gv[2], chi.z / g.k_z, chi.omega_tilde / g.k_omega])
}

/// Drift of the polar kinematics under the virtual laws, written without the
/// 1/rho division (well-defined down to rho = 0):
/// (-k_rho cos^2(alpha) rho, -k_rho cos(alpha) sin(alpha),
///  omega* + k_rho cos(alpha) sin(alpha)).
pub fn f_virtual(p: (f64, f64, f64), g: &Gains) -> Vector3<f64> {
    let (rho, _phi, alpha) = p;
    let (ca, sa) = (alpha.cos(), alpha.sin());
    let (_v_star, omega_star) = virtual_law(p, g);
    Vector3::new(-g.k_rho * ca * ca * rho, -g.k_rho * ca * sa, omega_star + g.k_rho * ca * sa)
}

/// Interconnection matrix g(rho, alpha) multiplying zeta = [z, omega_tilde]^T
/// in the error kinematics: rows (rho cos(alpha), 0), (sin(alpha), 0),
/// (-sin(alpha), 1).
pub fn g_interconnection(rho: f64, alpha: f64) -> Matrix3x2<f64> {
    let (ca, sa) = (alpha.cos(), alpha.sin());
    Matrix3x2::new(rho * ca, 0.0, sa, 0.0, -sa, 1.0)
}

/// Analytic derivative of Vr along the nominal closed loop:
/// mu (grad V . (f + g zeta)) / (V + 1) - |zeta|^2.
pub fn vr_dot_nominal(chi: &PolarErrorState, g: &Gains, lyap: &LyapunovData) -> f64 {
    let p = (chi.rho, chi.phi, chi.alpha);
    let v = strict_v(p, g, lyap);
    let gv = grad_strict_v(p, g, lyap);
    let zeta = chi.zeta();
    let flow = f_virtual(p, g) + g_interconnection(chi.rho, chi.alpha) * zeta;
    g.mu * gv.dot(&flow) / (v + 1.0) - zeta.norm_squared()
}

/// Grid resolution and velocity-error box for `certify_mu`.
#[derive(Debug, Clone, Copy)]
pub struct CertifyConfig {
    /// Radius of the zeta ball the certificate covers.
    pub zeta_max: f64,
    /// Points per axis for the (rho, phi, alpha) part (phi and alpha use
    /// 2*xi_points - 1 across [-r, r]).
    pub xi_points: usize,
    /// Points per axis for (z, omega_tilde) across [-zeta_max, zeta_max].
    pub zeta_points: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { zeta_max: 10.0, xi_points: 25, zeta_points: 13 }
    }
}

/// Outcome of the mu certification grid.
#[derive(Debug, Clone, Copy)]
pub struct CertifyReport {
    /// True when the worst sampled Vr_dot / |chi|^2 is strictly negative.
    pub ok: bool,
    /// Worst (most positive) sampled Vr_dot / |chi|^2 outside |chi| = 1e-3.
    pub margin: f64,
    /// Sample attaining the margin.
    pub worst_chi: [f64; 5],
}

/// Grid-checks that Vr decreases along the nominal closed loop over
/// {|(rho, phi, alpha)| <= r} x {|zeta| <= zeta_max}; the testable counterpart
/// of the existence argument for a sufficiently small mu.
pub fn certify_mu(g: &Gains, lyap: &LyapunovData, cfg: &CertifyConfig) -> CertifyReport {
    use rayon::prelude::*;

    let r = g.r;
    let n_rho = cfg.xi_points.max(2);
    let n_ang = 2 * cfg.xi_points - 1;
    let n_zeta = cfg.zeta_points.max(2);
    let lin = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;

    let (margin, worst_chi) = (0..n_rho)
        .into_par_iter()
        .map(|ir| {
            let rho = lin(0.0, r, n_rho, ir);
            let mut local = (f64::NEG_INFINITY, [0.0; 5]);
            for ip in 0..n_ang {
                let phi = lin(-r, r, n_ang, ip);
                for ia in 0..n_ang {
                    let alpha = lin(-r, r, n_ang, ia);
                    if rho * rho + phi * phi + alpha * alpha > r * r {
                        continue;
                    }
                    for iz in 0..n_zeta {
                        let z = lin(-cfg.zeta_max, cfg.zeta_max, n_zeta, iz);
                        for iw in 0..n_zeta {
                            let omega_tilde = lin(-cfg.zeta_max, cfg.zeta_max, n_zeta, iw);
                            if z * z + omega_tilde * omega_tilde > cfg.zeta_max * cfg.zeta_max {
                                continue;
                            }
                            let chi = PolarErrorState { rho, phi, alpha, z, omega_tilde };
                            let n2 = chi.chi().norm_squared();
                            if n2 <= 1e-6 {
                                continue;
                            }
                            let m = vr_dot_nominal(&chi, g, lyap) / n2;
                            if m > local.0 {
                                local = (m, [rho, phi, alpha, z, omega_tilde]);
                            }
                        }
                    }
                }
            }
            local
        })
        .reduce(|| (f64::NEG_INFINITY, [0.0; 5]), |a, b| if a.0 >= b.0 { a } else { b });

    CertifyReport { ok: margin < 0.0, margin, worst_chi }
}

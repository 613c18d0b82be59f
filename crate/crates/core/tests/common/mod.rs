//! Independent oracles and samplers shared by the acceptance tests. These
//! deliberately avoid the library's own closed forms: the Lyapunov solution
//! is checked against quadrature of the defining integral, and the QP against
//! an iterative dual ascent.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use safeguide::clf::Gains;
use safeguide::model::CartesianState;
use safeguide::qp::QpProblem;

pub fn section_gains() -> Gains {
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

/// Standard normal via Box-Muller.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// 2x2 matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let norm = m.amax() * 2.0;
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / 2f64.powi(k as i32);
    let mut term = Matrix2::identity();
    let mut sum = Matrix2::identity();
    for j in 1..=24 {
        term = term * scaled / j as f64;
        sum += term;
    }
    let mut out = sum;
    for _ in 0..k {
        out = out * out;
    }
    out
}

/// Quadrature oracle for the Lyapunov solution:
/// P = integral_0^inf e^{A^T t} e^{A t} dt, truncated at `t_max` and
/// integrated by composite Simpson with `n` (even) intervals.
pub fn lyapunov_p_quadrature(a: &Matrix2<f64>, t_max: f64, n: usize) -> Matrix2<f64> {
    assert!(n % 2 == 0);
    let h = t_max / n as f64;
    let integrand = |t: f64| {
        let e = expm2(&(a * t));
        e.transpose() * e
    };
    let mut acc = integrand(0.0) + integrand(t_max);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Iterative QP oracle: maximizes the dual
/// g(lambda) = -1/2 lambda^T G lambda - lambda^T b over lambda >= 0 by exact
/// per-coordinate ascent, then recovers the primal. Independent of the
/// library's active-set enumeration.
pub struct OracleSolution {
    pub u_bar: Vector2<f64>,
    pub delta: Vector2<f64>,
    pub objective: f64,
}

pub fn solve_qp_dual_ascent(p: &QpProblem) -> OracleSolution {
    let m = p.m_weight;
    let g11 = p.a1.norm_squared() * (m + 1.0) / m;
    let g12 = p.a1.dot(&p.a2);
    let g22 = p.a2.norm_squared();
    let mut l = [0.0f64; 2];
    for _ in 0..400 {
        let prev = l;
        if g11 > 0.0 {
            l[0] = ((-p.b1 - g12 * l[1]) / g11).max(0.0);
        }
        if g22 > 0.0 {
            l[1] = ((-p.b2 - g12 * l[0]) / g22).max(0.0);
        }
        if (l[0] - prev[0]).abs() + (l[1] - prev[1]).abs() < 1e-15 * (1.0 + l[0] + l[1]) {
            break;
        }
    }
    let u_bar = -l[0] * p.a1 - l[1] * p.a2;
    let delta = -(l[0] / m) * p.a1;
    let objective = 0.5 * (u_bar.norm_squared() + m * delta.norm_squared());
    OracleSolution { u_bar, delta, objective }
}

/// Central finite difference of a scalar function of n variables.
pub fn central_diff<const N: usize>(f: impl Fn(&[f64; N]) -> f64, x: &[f64; N]) -> [f64; N] {
    let mut grad = [0.0; N];
    for i in 0..N {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        grad[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    grad
}

/// Rebuilds the Cartesian state realizing a given polar/error tuple.
pub fn state_from_chi(chi: &[f64; 5], g: &Gains) -> CartesianState {
    let [rho, phi, alpha, z, omega_tilde] = *chi;
    let (v_star, omega_star) = safeguide::clf::virtual_law((rho, phi, alpha), g);
    CartesianState::new(
        rho * phi.cos(),
        rho * phi.sin(),
        phi + alpha,
        v_star + rho * z,
        omega_star + omega_tilde,
    )
}

//! Verification suites behind `safeguide verify`: re-runs the certification
//! grids and randomized property checks and prints one line per property.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safeguide::cbf::{verify_backstepping_condition, BarrierSpec, GridSpec, Poly2};
use safeguide::clf::{
    a_matrix, certify_mu, error_state, f_virtual, grad_v1, solve_lyapunov_p, vr_dot_nominal,
    CertifyConfig, Gains, LyapunovData,
};
use safeguide::model::{CartesianState, PolarErrorState, RHO_MIN_DEFAULT};
use safeguide::qp::{assemble_qp, solve_gamma_m_qp, ActiveSet, QpProblem};

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

pub fn example1_barrier() -> BarrierSpec {
    BarrierSpec::new(
        Poly2 { c0: 1.0, cx: 1.0, cy: 0.0, cxx: 0.0, cxy: 0.0, cyy: -8.0 },
        Matrix2::identity() * 0.1,
        1.0,
    )
    .expect("fixture barrier is valid")
}

pub fn example2_barrier() -> BarrierSpec {
    BarrierSpec::new(
        Poly2 { c0: 1.0, cx: -1.0, cy: 0.0, cxx: 0.0, cxy: 0.0, cyy: 8.0 },
        Matrix2::identity(),
        1.0,
    )
    .expect("fixture barrier is valid")
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("  {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn random_chi(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> PolarErrorState {
    let mut dir = [0.0; 5];
    loop {
        for d in &mut dir {
            *d = gauss(rng);
        }
        let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if n > 1e-6 {
            for d in &mut dir {
                *d /= n;
            }
            break;
        }
    }
    let radius = rng.gen_range(lo..=hi);
    PolarErrorState {
        rho: dir[0].abs() * radius,
        phi: dir[1] * radius,
        alpha: dir[2] * radius,
        z: dir[3] * radius,
        omega_tilde: dir[4] * radius,
    }
}

pub fn verify_clf(samples: usize, seed: u64) -> bool {
    let g = section_gains();
    let lyap = LyapunovData::from_gains(&g).expect("section gains are valid");
    let mut ok = true;

    let a = a_matrix(&g);
    let p = solve_lyapunov_p(&g).expect("A is Hurwitz");
    let residual = (a.transpose() * p + p * a + Matrix2::identity()).norm();
    ok &= report(
        "lyapunov_equation_residual",
        residual <= 1e-10,
        &format!("|A'P + PA + I| = {residual:.2e}"),
    );

    let cert = certify_mu(&g, &lyap, &CertifyConfig::default());
    ok &= report(
        "certify_mu_grid",
        cert.ok,
        &format!("worst Vr_dot/|chi|^2 = {:.3e} at {:?}", cert.margin, cert.worst_chi),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_rate = f64::NEG_INFINITY;
    let mut worst_dev: f64 = 0.0;
    let mut decrease_ok = true;
    for _ in 0..samples {
        let chi = random_chi(&mut rng, 1e-3, g.r);
        let rate = vr_dot_nominal(&chi, &g, &lyap);
        decrease_ok &= rate < 0.0;
        worst_rate = worst_rate.max(rate);

        let pt = (chi.rho, chi.phi, chi.alpha);
        let v1_dot = grad_v1(pt, &g).dot(&f_virtual(pt, &g));
        let ca = chi.alpha.cos();
        let closed =
            -g.k_rho * ca * ca * chi.rho * chi.rho - g.k_alpha * chi.alpha * chi.alpha;
        worst_dev = worst_dev.max((v1_dot - closed).abs());
    }
    ok &= report(
        "random_vr_decrease",
        decrease_ok,
        &format!("{samples} samples, worst rate = {worst_rate:.3e}"),
    );
    ok &= report(
        "v1_closed_form_identity",
        worst_dev <= 1e-12,
        &format!("worst deviation = {worst_dev:.2e}"),
    );
    ok
}

pub fn verify_cbf() -> bool {
    let mut ok = true;
    let cases = [
        ("example1_geometry", example1_barrier(), (-0.95, 8.0), (-1.0, 1.0)),
        ("example2_geometry", example2_barrier(), (-6.0, 0.95), (-4.0, 4.0)),
    ];
    for (name, spec, xb, yb) in cases {
        let grid = GridSpec {
            x: (xb.0, xb.1, 200),
            y: (yb.0, yb.1, 200),
            v: (-3.0, 3.0, 21),
            omega: (-3.0, 3.0, 21),
        };
        let r = verify_backstepping_condition(&spec, &grid);
        ok &= report(
            name,
            r.ok(),
            &format!(
                "L_G B mismatches = {}, slice violations = {}, worst slice margin = {:.3e}, identity dev = {:.2e}",
                r.lgb_mismatches, r.slice_violations, r.worst_slice_margin, r.max_identity_deviation
            ),
        );
    }
    ok
}

/// Exact per-coordinate dual ascent on the two-multiplier dual; independent
/// of the closed-form active-set enumeration.
fn oracle_objective(p: &QpProblem) -> f64 {
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
    0.5 * (u_bar.norm_squared() + m * delta.norm_squared())
}

pub fn verify_qp(samples: usize, seed: u64) -> bool {
    let mut ok = true;
    let ms = [1.0, 2.0, 5.0];
    let gammas = [1.0, 1.5, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_kkt: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    let mut solve_ok = true;
    for i in 0..samples {
        let p = QpProblem {
            m_weight: ms[i % 3],
            gamma: gammas[(i / 3) % 3],
            a1: Vector2::new(gauss(&mut rng), gauss(&mut rng)),
            b1: gauss(&mut rng),
            a2: Vector2::new(gauss(&mut rng), gauss(&mut rng)),
            b2: gauss(&mut rng),
        };
        match solve_gamma_m_qp(&p) {
            Ok(sol) => {
                max_kkt = max_kkt.max(sol.kkt_residual(&p));
                max_gap = max_gap.max((sol.objective(&p) - oracle_objective(&p)).abs());
            }
            Err(_) => solve_ok = false,
        }
    }
    ok &= report(
        "kkt_residuals",
        solve_ok && max_kkt <= 1e-9,
        &format!("{samples} instances, max residual = {max_kkt:.2e}"),
    );
    ok &= report(
        "oracle_objective_agreement",
        solve_ok && max_gap <= 1e-6,
        &format!("max gap = {max_gap:.2e}"),
    );

    let g = section_gains();
    let lyap = LyapunovData::from_gains(&g).expect("section gains are valid");
    let spec = example1_barrier();
    let mut slack_ok = true;
    let mut worst_slack = f64::NEG_INFINITY;
    for _ in 0..2_000 {
        let mut chi = random_chi(&mut rng, 1e-4, 0.01);
        chi.rho = chi.rho.max(1e-6);
        let (v_star, omega_star) =
            safeguide::clf::virtual_law((chi.rho, chi.phi, chi.alpha), &g);
        let s = CartesianState::new(
            chi.rho * chi.phi.cos(),
            chi.rho * chi.phi.sin(),
            chi.phi + chi.alpha,
            v_star + chi.rho * chi.z,
            omega_star + chi.omega_tilde,
        );
        let chi = error_state(&s, &g, RHO_MIN_DEFAULT).expect("rho above floor");
        let p = assemble_qp(&chi, &s, &g, &lyap, &spec, 1.0, RHO_MIN_DEFAULT)
            .expect("state is safe");
        let sol = solve_gamma_m_qp(&p).expect("feasible near the origin");
        let slack = p.a2.dot(&sol.u_bar) - p.b2;
        worst_slack = worst_slack.max(slack);
        slack_ok &= slack < 0.0 && !matches!(sol.active_set, ActiveSet::Cbf | ActiveSet::Both);
    }
    ok &= report(
        "near_origin_cbf_slack",
        slack_ok,
        &format!("2000 samples with |chi| <= 0.01, worst slack = {worst_slack:.3}"),
    );
    ok
}

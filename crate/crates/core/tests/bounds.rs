use proptest::prelude::*;

use unroll_core::audit::{output_bound_audit, perturbation_audit, psi_audit};
use unroll_core::bounds::{
    analytic_alpha, bound_report, class_constants, corollary_bound, klmoq, pointwise_alpha,
    z_closed_form, z_sequence, AlphaMode, ClassConstants, VerifyOptions,
};
use unroll_core::model::{Architecture, HypothesisClassSpec, MapKind, SharingSchedule};
use unroll_core::numkit::{random_gaussian_matrix, random_orthogonal, spectral_norm, Matrix, SeededRng};
use unroll_core::train::sample_params;
use unroll_core::Error;

fn constants(alpha: f64, tau_inf: f64, b_inf: f64, lambda_inf: f64, d_inf: f64) -> ClassConstants {
    ClassConstants {
        w_inf: b_inf / d_inf,
        d_l: vec![d_inf],
        d_inf,
        b_inf,
        tau_inf,
        lambda_inf,
        alpha,
        alpha_mode: AlphaMode::AnalyticClassBound,
        alpha_pointwise: None,
    }
}

fn spec(layers: usize, w_inf: f64, tau0: f64, r1: f64, lambda0: f64, r2: f64) -> HypothesisClassSpec {
    HypothesisClassSpec {
        w_inf,
        tau0: vec![tau0; layers],
        r1,
        lambda0: vec![lambda0; layers],
        r2,
        b_in: 1.0,
        b_out: 1.0,
        delta: 0.05,
        enforce_tau_b2_le_1: false,
    }
}

fn scaled(rng: &mut SeededRng, n: usize, big_n: usize, norm: f64) -> Matrix {
    let a = random_gaussian_matrix(rng, n, big_n);
    a.scale(norm / spectral_norm(&a).unwrap())
}

fn dense(a: Matrix, atoms: usize, schedule: SharingSchedule) -> Architecture {
    let spaces = vec![MapKind::Dense { a, atoms }; schedule.num_spaces()];
    Architecture::unpooled(schedule, spaces, 1.0).unwrap()
}

#[test]
fn z_closed_form_matches_explicit_sum() {
    let alphas = [0.0, 0.1, 0.5, 0.9, 0.999, 1.0, 1.001, 1.5, 2.0, 3.0];
    for &alpha in &alphas {
        for layers in [0usize, 1, 2, 5, 16, 64] {
            let z = z_sequence(alpha, 0.7, 1.3, layers);
            assert_eq!(z[0], 0.0);
            for (l, zl) in z.iter().enumerate() {
                let sum: f64 = (1..=l).map(|k| alpha.powi(k as i32)).sum::<f64>() * 0.7 * 1.3;
                let closed = z_closed_form(alpha, 0.7, 1.3, l);
                let scale = sum.abs().max(1e-300);
                assert!((zl - sum).abs() <= 1e-12 * scale, "alpha {alpha} l {l}");
                assert!((closed - sum).abs() <= 1e-12 * scale, "alpha {alpha} l {l}: {closed} vs {sum}");
            }
        }
    }
}

proptest! {
    #[test]
    fn constants_obey_their_recurrences(
        alpha in 0.0f64..3.0,
        tau in 0.0f64..2.0,
        b in 0.0f64..3.0,
        lambda in 0.0f64..1.0,
        y_fro in 0.0f64..10.0,
        m in 1usize..50,
        n_inf in 1usize..20,
        layers in 1usize..20,
    ) {
        let c = constants(alpha, tau, b, lambda, 1.0);
        let z = z_sequence(alpha, tau, b, layers + 1);
        let now = klmoq(&c, layers, y_fro, m, n_inf).unwrap();
        let next = klmoq(&c, layers + 1, y_fro, m, n_inf).unwrap();
        let root_nm = ((n_inf * m) as f64).sqrt();
        let beta = tau * y_fro * (1.0 + 2.0 * b * z[layers]);
        let kappa = lambda * root_nm + b * y_fro * (b * z[layers] + 1.0);
        let phi = tau * root_nm;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
        prop_assert!(close(next.k_l, alpha * now.k_l + beta));
        prop_assert!(close(next.m_l, alpha * now.m_l + kappa));
        prop_assert!(close(next.o_l, alpha * now.o_l + phi));
        prop_assert!(close(now.q_l, b * now.k_l + y_fro * z[layers]));
        for v in [now.k_l, now.m_l, now.o_l, now.q_l] {
            prop_assert!(v.is_finite() && v >= 0.0);
        }
    }
}

#[test]
fn corollary_proof_inequalities_hold_on_grid() {
    for layers in 1..=64usize {
        for &(tau, b) in &[(1.0, 1.0), (0.5, 1.2), (0.25, 2.0), (0.9, 0.3), (1.0, 0.999)] {
            for &d in &[1.0, 2.5] {
                for &m in &[1usize, 10, 500] {
                    let b_in = 0.8;
                    let c = constants(analytic_alpha(tau, b), tau, b, 0.3, d);
                    assert!(c.small_stepsize());
                    assert_eq!(c.alpha, 1.0);
                    let y_fro = (m as f64).sqrt() * b_in;
                    let k = klmoq(&c, layers, y_fro, m, 7).unwrap();
                    let lf = layers as f64;
                    let root_m = (m as f64).sqrt();
                    let k_cap = tau * lf * lf * root_m * b_in;
                    let q_cap = lf * (lf + 1.0) * tau * b * d * root_m * b_in;
                    assert!(k.k_l <= k_cap * (1.0 + 1e-12), "L {layers}: {} > {k_cap}", k.k_l);
                    assert!(k.q_l <= q_cap * (1.0 + 1e-12), "L {layers}: {} > {q_cap}", k.q_l);
                }
            }
        }
    }
}

#[test]
fn orthogonal_scenario_constants() {
    let mut rng = SeededRng::new(1);
    let q = random_orthogonal(&mut rng, 8);
    let a = Matrix::from_fn(5, 8, |i, j| 0.9 * q[(i, j)]);
    let arch = dense(a, 8, SharingSchedule::shared(4));
    let c = class_constants(&arch, &spec(4, 1.0, 1.0, 0.0, 0.1, 0.0), None).unwrap();
    assert!((c.b_inf - 1.0).abs() < 1e-12);
    assert!((c.d_inf - 1.0).abs() < 1e-12);
    assert_eq!(c.w_inf, 1.0);
    assert!((c.d_l[0] - 0.9).abs() < 1e-10);
    assert_eq!(c.d_l[4], 1.0);
    assert_eq!(c.alpha, 1.0);
    assert!(c.small_stepsize());
}

#[test]
fn scenario_b_inf_values() {
    let mut rng = SeededRng::new(2);
    let a = scaled(&mut rng, 4, 7, 1.7);
    let arch = dense(a.clone(), 7, SharingSchedule::alternating(3));
    let c = class_constants(&arch, &spec(3, 2.0, 0.5, 0.1, 0.1, 0.05), None).unwrap();
    assert!((c.b_inf - 2.0 * 1.7).abs() < 1e-10);
    assert!(c.b_inf <= c.w_inf * c.d_inf * (1.0 + 1e-15));
    assert!((c.tau_inf - 0.6).abs() < 1e-15);
    assert!((c.lambda_inf - 0.15).abs() < 1e-15);
    assert!((c.alpha - (0.6 * 3.4f64.powi(2) - 1.0)).abs() < 1e-9);

    let conv = Architecture::unpooled(
        SharingSchedule::shared(2),
        vec![MapKind::Conv {
            a: scaled(&mut rng, 4, 7, 0.5),
            kernel_len: 4,
        }],
        1.0,
    )
    .unwrap();
    let c = class_constants(&conv, &spec(2, 1.5, 0.5, 0.0, 0.1, 0.0), None).unwrap();
    // max{W∞√k‖A‖, W∞√k} with ‖A‖ < 1.
    assert!((c.b_inf - 1.5 * 2.0).abs() < 1e-12);
    assert!(c.b_inf <= c.w_inf * c.d_inf * (1.0 + 1e-15));
}

#[test]
fn pointwise_alpha_never_exceeds_class_bound() {
    let mut rng = SeededRng::new(3);
    for case in 0..50 {
        let layers = 1 + case % 5;
        let arch = dense(scaled(&mut rng, 3, 6, 1.2), 6, SharingSchedule::unshared(layers));
        let s = spec(layers, 1.5, 0.7, 0.2, 0.1, 0.0);
        let p = sample_params(&arch, &s, &mut rng).unwrap();
        let c = class_constants(&arch, &s, Some(&p)).unwrap();
        let pointwise = c.alpha_pointwise.unwrap();
        assert_eq!(pointwise, pointwise_alpha(&arch, &p).unwrap());
        // Rank-deficient interior maps keep the identity direction.
        assert!(pointwise >= 1.0 - 1e-12);
        assert!(pointwise <= c.alpha * (1.0 + 1e-9), "{pointwise} > {}", c.alpha);
    }
}

#[test]
fn corollary_simple_form_and_precondition() {
    let mut rng = SeededRng::new(4);
    let q = random_orthogonal(&mut rng, 6);
    let arch = dense(Matrix::from_fn(3, 6, |i, j| q[(i, j)]), 6, SharingSchedule::shared(5));
    let s = spec(5, 1.0, 1.0, 0.0, 0.1, 0.0);
    let c = class_constants(&arch, &s, None).unwrap();
    assert!((c.tau_inf * c.b_inf * c.w_inf * c.d_inf - 1.0).abs() < 1e-12);
    let m = 200;
    let got = corollary_bound(&arch, &s, &c, m, arch.max_hidden_width()).unwrap();
    let k = arch.weight_count() as f64;
    let want = 2.0 * 2f64.sqrt() * (k / m as f64 * (1.0 + (1.0 + 16.0 * 5.0 * 6.0f64).ln())).sqrt();
    assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");

    let big = spec(5, 2.0, 1.0, 0.0, 0.1, 0.0);
    let c = class_constants(&arch, &big, None).unwrap();
    assert!(matches!(
        corollary_bound(&arch, &big, &c, m, 6),
        Err(Error::PreconditionViolated(_))
    ));
    let strict = HypothesisClassSpec {
        enforce_tau_b2_le_1: true,
        ..big
    };
    assert!(matches!(
        class_constants(&arch, &strict, None),
        Err(Error::PreconditionViolated(_))
    ));
}

#[test]
fn corollary_grows_like_root_log_depth() {
    let mut rng = SeededRng::new(5);
    let q = random_orthogonal(&mut rng, 6);
    let a = Matrix::from_fn(3, 6, |i, j| 0.8 * q[(i, j)]);
    for &w_inf in &[0.3, 0.7, 1.0] {
        for layers in [1usize, 2, 4, 8, 16, 32] {
            let bound = |l: usize| {
                let arch = dense(a.clone(), 6, SharingSchedule::shared(l));
                let s = spec(l, w_inf, 1.0, 0.0, 0.1, 0.0);
                let c = class_constants(&arch, &s, None).unwrap();
                let cprime = c.tau_inf * c.b_inf * c.w_inf * c.d_inf * s.b_in / s.b_out;
                (corollary_bound(&arch, &s, &c, 100, 6).unwrap(), cprime)
            };
            let (short, cprime) = bound(layers);
            let (long, _) = bound(2 * layers);
            let c = 16.0 * std::f64::consts::E * cprime;
            let l = layers as f64;
            let cap = ((c * 4.0 * l * l).ln() / (c * l * l).ln()).sqrt();
            assert!(c * l * l > 1.0);
            assert!(long / short <= cap + 1e-9, "L {layers}: {} > {cap}", long / short);
            assert!(long >= short);
        }
    }
}

fn desk_arch(rng: &mut SeededRng) -> Architecture {
    dense(scaled(rng, 32, 64, 0.99), 64, SharingSchedule::shared(16))
}

#[test]
fn bound_decreases_with_sample_size() {
    let mut rng = SeededRng::new(6);
    let arch = desk_arch(&mut rng);
    let s = spec(16, 2.0, 1.0, 0.0, 0.05, 0.0);
    let full = |m: usize| {
        let y_fro = (m as f64).sqrt() * s.b_in;
        bound_report(&arch, &s, None, y_fro, m, 0.0).unwrap().full_bound
    };
    let mut k = 64;
    while k <= 16384 {
        assert!(full(4 * k) < full(k), "m = {k}");
        k *= 2;
    }
}

#[test]
fn report_is_flat_finite_and_gated() {
    let mut rng = SeededRng::new(7);
    let arch = desk_arch(&mut rng);
    let s = spec(16, 2.0, 1.0, 0.1, 0.05, 0.01);
    let p = sample_params(&arch, &s, &mut rng).unwrap();
    let r = bound_report(&arch, &s, Some(&p), 30.0, 900, 0.2).unwrap();
    assert!(r.corollary_bound.is_none());
    assert!(r.corollary_note.is_some());
    assert_eq!(r.z.len(), 17);
    assert_eq!(r.weights, 64 * 64);
    assert!(r.alpha_pointwise.unwrap() <= r.alpha);
    let json = serde_json::to_value(&r).unwrap();
    let obj = json.as_object().unwrap();
    for key in ["alpha", "k_l", "m_l", "o_l", "q_l", "rad_bound", "full_bound", "y_fro", "n_inf", "delta"] {
        let v = obj[key].as_f64().unwrap();
        assert!(v.is_finite() && v >= 0.0, "{key}");
    }
    assert_eq!(obj["alpha_mode"], "AnalyticClassBound");
    assert!(!obj.contains_key("corollary_bound"));

    let small = spec(16, 1.0, 0.9, 0.0, 0.05, 0.0);
    let r = bound_report(&arch, &small, None, 30.0, 900, 0.2).unwrap();
    let cor = r.corollary_bound.unwrap();
    assert!(cor.is_finite() && cor >= 0.0);
    assert!(r.full_bound >= r.lemp);
}

#[test]
fn output_bound_audit_has_no_violations() {
    let summary = output_bound_audit(11, 1000, &VerifyOptions::default()).unwrap();
    assert_eq!(summary.cases, 1000);
    assert!(summary.passed(), "{:?}", summary.failures);
    assert!(summary.checks.max_ratio > 0.5);
}

#[test]
fn perturbation_audit_has_no_violations() {
    let summary = perturbation_audit(12, 1000, &VerifyOptions::default()).unwrap();
    assert_eq!(summary.checks.checks, 3000);
    assert!(summary.passed(), "{:?}", summary.failures);
}

#[test]
fn inflated_left_sides_are_caught() {
    let opts = VerifyOptions { lhs_inflation: 100.0 };
    assert!(!output_bound_audit(11, 50, &opts).unwrap().passed());
    assert!(!perturbation_audit(12, 50, &opts).unwrap().passed());
}

#[test]
fn psi_grid_passes() {
    let summary = psi_audit(20).unwrap();
    assert_eq!(summary.cases, 400);
    assert!(summary.passed(), "{:?}", summary.failures);
}

//! Seeded randomized audits: gradients against finite differences, the
//! output and perturbation inequalities on random networks, and the
//! Ψ-integral grid.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    psi_integral_check, verify_output_bound_with, verify_perturbation_bound_with, InequalityReport,
    VerifyOptions,
};
use crate::error::Result;
use crate::model::{Architecture, HypothesisClassSpec, MapKind, Params, SharingSchedule};
use crate::numkit::{psi, random_gaussian_matrix, spectral_norm, Matrix, SeededRng};
use crate::train::{grad_check, project_params, sample_params, GradCheckOptions, LossKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// One dictionary shared by every layer.
    Dense,
    /// Two dictionaries, odd and even layers.
    Alternating,
    /// A separate dictionary per layer and for the final map.
    Unshared,
    /// One shared convolution kernel.
    Convolutional,
}

pub const FAMILIES: [Family; 4] = [
    Family::Dense,
    Family::Alternating,
    Family::Unshared,
    Family::Convolutional,
];

#[derive(Clone, Debug)]
pub struct AuditCase {
    pub family: Family,
    pub arch: Architecture,
    pub spec: HypothesisClassSpec,
}

fn measurement(rng: &mut SeededRng, n: usize, big_n: usize) -> Result<Matrix> {
    let a = random_gaussian_matrix(rng, n, big_n);
    let norm = spectral_norm(&a)?;
    Ok(a.scale(rng.uniform_range(0.5, 1.5) / norm))
}

/// Small random network of the given family with a random class around it.
pub fn sample_case(family: Family, rng: &mut SeededRng) -> Result<AuditCase> {
    let layers = 1 + rng.below(6);
    let n = 2 + rng.below(4);
    let big_n = n + 1 + rng.below(4);
    let kind = |rng: &mut SeededRng| -> Result<MapKind> {
        Ok(match family {
            Family::Convolutional => MapKind::Conv {
                a: measurement(rng, n, big_n)?,
                kernel_len: 1 + rng.below(big_n.min(4)),
            },
            _ => MapKind::Dense {
                a: measurement(rng, n, big_n)?,
                atoms: big_n + rng.below(3),
            },
        })
    };
    let schedule = match family {
        Family::Dense | Family::Convolutional => SharingSchedule::shared(layers),
        Family::Alternating => SharingSchedule::alternating(layers),
        Family::Unshared => SharingSchedule::unshared(layers),
    };
    let first = kind(rng)?;
    let mut spaces = vec![first.clone()];
    for _ in 1..schedule.num_spaces() {
        // Every space acts on the same code width.
        let mut next = kind(rng)?;
        if let (MapKind::Dense { atoms, .. }, MapKind::Dense { atoms: a0, .. }) = (&mut next, &first) {
            *atoms = *a0;
        }
        spaces.push(next);
    }
    let b_out = rng.uniform_range(0.5, 3.0);
    let arch = Architecture::unpooled(schedule, spaces, b_out)?;
    let tau0: Vec<f64> = (0..layers).map(|_| rng.uniform_range(0.3, 1.5)).collect();
    let lambda0: Vec<f64> = (0..layers).map(|_| rng.uniform_range(0.01, 0.3)).collect();
    let tau_min = tau0.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_min = lambda0.iter().copied().fold(f64::INFINITY, f64::min);
    let spec = HypothesisClassSpec {
        w_inf: rng.uniform_range(0.5, 2.0),
        r1: rng.uniform_range(0.0, 0.2) * tau_min,
        r2: rng.uniform_range(0.0, 0.5) * lambda_min,
        tau0,
        lambda0,
        b_in: 1.0,
        b_out,
        delta: 0.05,
        enforce_tau_b2_le_1: false,
    };
    Ok(AuditCase { family, arch, spec })
}

/// Where and how an audit case failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub case: usize,
    pub family: Option<Family>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    pub checks: InequalityReport,
    pub failures: Vec<AuditFailure>,
}

impl AuditSummary {
    fn new(suite: &str, seed: u64) -> Self {
        AuditSummary {
            suite: suite.to_string(),
            seed,
            cases: 0,
            checks: InequalityReport::default(),
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.violations == 0
    }
}

fn measurements(rng: &mut SeededRng, arch: &Architecture) -> Matrix {
    let m = 1 + rng.below(4);
    let scale = rng.uniform_range(0.1, 3.0);
    random_gaussian_matrix(rng, arch.input_dim(), m).scale(scale)
}

/// Analytic against central-difference gradients on `cases` random
/// networks, cycling through every family and every combination of the
/// stepsize/threshold flags, both losses, and the orthogonality penalty.
pub fn gradient_audit(seed: u64, cases: usize, tolerance: f64) -> Result<AuditSummary> {
    let mut summary = AuditSummary::new("gradient", seed);
    let mut rng = SeededRng::new(seed);
    for case in 0..cases {
        let family = FAMILIES[case % FAMILIES.len()];
        let c = sample_case(family, &mut rng)?;
        let flags = (case / FAMILIES.len()) % 4;
        let opts = GradCheckOptions {
            check_tau: flags & 1 == 1,
            check_lambda: flags & 2 == 2,
            loss: if case % 3 == 0 { LossKind::L2 } else { LossKind::Mse },
            ortho_weight: if case % 5 == 0 { 0.1 } else { 0.0 },
            ..GradCheckOptions::default()
        };
        let case_seed = rng.next_u64();
        summary.cases += 1;
        summary.checks.checks += 1;
        match grad_check(&c.arch, &c.spec, case_seed, tolerance, &opts) {
            Ok(report) => {
                summary.checks.max_ratio = summary.checks.max_ratio.max(report.max_rel_err);
            }
            Err(e) => {
                summary.checks.violations += 1;
                summary.failures.push(AuditFailure {
                    case,
                    family: Some(family),
                    detail: e.to_string(),
                });
            }
        }
    }
    Ok(summary)
}

/// Output bounds at `cases` random parameter points.
pub fn output_bound_audit(seed: u64, cases: usize, opts: &VerifyOptions) -> Result<AuditSummary> {
    let mut summary = AuditSummary::new("output_bound", seed);
    let mut rng = SeededRng::new(seed);
    for case in 0..cases {
        let family = FAMILIES[case % FAMILIES.len()];
        let c = sample_case(family, &mut rng)?;
        let params = sample_params(&c.arch, &c.spec, &mut rng)?;
        let y = measurements(&mut rng, &c.arch);
        let report = verify_output_bound_with(&c.arch, &params, &y, opts)?;
        summary.cases += 1;
        for part in [&report.product, &report.operator, &report.coarse] {
            summary.checks.merge(part);
        }
        if report.violations() > 0 {
            summary.failures.push(AuditFailure {
                case,
                family: Some(family),
                detail: format!("max lhs/rhs {:.6e}", report.max_ratio()),
            });
        }
    }
    Ok(summary)
}

fn perturb(
    rng: &mut SeededRng,
    params: &Params,
    spec: &HypothesisClassSpec,
    size: f64,
) -> Result<Params> {
    let mut out = params.clone();
    for leaf in out.leaves_mut() {
        for v in leaf.iter_mut() {
            *v += size * rng.normal();
        }
    }
    project_params(&out, spec)
}

/// Perturbation bounds on `cases` random pairs in a common class. Even cases
/// use two independent points, odd cases a small perturbation of one point.
pub fn perturbation_audit(seed: u64, cases: usize, opts: &VerifyOptions) -> Result<AuditSummary> {
    let mut summary = AuditSummary::new("perturbation_bound", seed);
    let mut rng = SeededRng::new(seed);
    for case in 0..cases {
        let family = FAMILIES[(case / 2) % FAMILIES.len()];
        let c = sample_case(family, &mut rng)?;
        let p1 = sample_params(&c.arch, &c.spec, &mut rng)?;
        let p2 = if case % 2 == 0 {
            sample_params(&c.arch, &c.spec, &mut rng)?
        } else {
            let size = 10f64.powf(rng.uniform_range(-6.0, -1.0));
            perturb(&mut rng, &p1, &c.spec, size)?
        };
        let y = measurements(&mut rng, &c.arch);
        let report = verify_perturbation_bound_with(&c.arch, &p1, &p2, &y, opts)?;
        summary.cases += 1;
        summary.checks.merge(&report.checks);
        if report.checks.violations > 0 {
            summary.failures.push(AuditFailure {
                case,
                family: Some(family),
                detail: format!(
                    "hidden {:.6e} vs {:.6e}, output {:.6e} vs {:.6e} / {:.6e}",
                    report.lhs_hidden,
                    report.rhs_hidden,
                    report.lhs_output,
                    report.rhs_output_operators,
                    report.rhs_output_weights
                ),
            });
        }
    }
    Ok(summary)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `Ψ(0) = 0`, the envelope `Ψ(t) ≤ √log(e(1+t))` on 200 points over
/// `[1e-2, 1e2]`, and the integral inequality on a `grid × grid` log-spaced
/// `(a, b)` grid over the same range.
pub fn psi_audit(grid: usize) -> Result<AuditSummary> {
    let mut summary = AuditSummary::new("psi", 0);
    summary.checks.record(psi(0.0), 0.0);
    for t in log_grid(1e-2, 1e2, 200) {
        summary.checks.record(psi(t), (1.0 + t.ln_1p()).sqrt());
    }
    let points = log_grid(1e-2, 1e2, grid);
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            summary.cases += 1;
            match psi_integral_check(a, b) {
                Ok(r) => {
                    summary.checks.record(r.integral, r.bound);
                    if !r.passed {
                        summary.failures.push(AuditFailure {
                            case: i * grid + j,
                            family: None,
                            detail: format!("a = {a}, b = {b}: {} > {}", r.integral, r.bound),
                        });
                    }
                }
                Err(e) => {
                    summary.checks.violations += 1;
                    summary.failures.push(AuditFailure {
                        case: i * grid + j,
                        family: None,
                        detail: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(summary)
}

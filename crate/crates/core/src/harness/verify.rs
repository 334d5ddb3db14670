//! Self-check suite behind `matdisc verify`.
//!
//! Each check re-derives a known identity or inequality on randomized
//! instances and reports pass/fail with its worst observed slack.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bounds::{
    goe_density_constant, hypercube_exp_lhs, hypercube_gaussian_rhs, log_vandermonde_sup,
    vandermonde_sup,
};
use crate::diagnostics::{estimate_maci, projection_moment_check, DirectionPolicy};
use crate::ensembles::{EnsembleSpec, RngStream};
use crate::error::Result;
use crate::signer::exact_discrepancy;
use crate::symlin::{matrix_func, numerical_rank, MatrixFunction, SymMatrix, DEFAULT_RANK_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {}", self.name, self.detail)
    }
}

/// Symmetric matrix with i.i.d. `N(0, 1)` entries on and above the diagonal.
pub fn gaussian_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    SymMatrix::from_upper_fn(n, |_, _| rng.sample(StandardNormal))
}

fn trace_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    a.inner(b)
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
        .qr()
        .q()
}

/// `Tr e^{X+Y} ≤ Tr(e^X e^Y)` on `instances` random pairs, `n ∈ [2, 8]`.
pub fn check_golden_thompson(instances: usize, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let n = rng.random_range(2..=8);
        let x = gaussian_symmetric(n, &mut rng);
        let y = gaussian_symmetric(n, &mut rng);
        let lhs = matrix_func(&x.add_scaled(&y, 1.0), MatrixFunction::Exp)?.trace();
        let rhs = trace_product(
            &matrix_func(&x, MatrixFunction::Exp)?,
            &matrix_func(&y, MatrixFunction::Exp)?,
        );
        worst = worst.max((lhs - rhs) / rhs.abs());
    }
    Ok(CheckResult {
        name: "golden_thompson",
        passed: worst <= 1e-9,
        detail: format!("{instances} pairs, max (lhs-rhs)/|rhs| = {worst:.3e}"),
    })
}

/// `Tr cosh(X+Y) ≤ Tr cosh X cosh Y + Tr sinh X sinh Y`, with equality for commuting pairs.
pub fn check_cosh_addition(instances: usize, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_commuting: f64 = 0.0;
    for k in 0..instances {
        let n = rng.random_range(2..=8);
        let (x, y) = if k % 2 == 0 {
            (
                gaussian_symmetric(n, &mut rng),
                gaussian_symmetric(n, &mut rng),
            )
        } else {
            let q = random_orthogonal(n, &mut rng);
            let dx: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let dy: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (
                SymMatrix::from_spectrum(&dx, &q)?,
                SymMatrix::from_spectrum(&dy, &q)?,
            )
        };
        let lhs = matrix_func(&x.add_scaled(&y, 1.0), MatrixFunction::Cosh)?.trace();
        let rhs = trace_product(
            &matrix_func(&x, MatrixFunction::Cosh)?,
            &matrix_func(&y, MatrixFunction::Cosh)?,
        ) + trace_product(
            &matrix_func(&x, MatrixFunction::Sinh)?,
            &matrix_func(&y, MatrixFunction::Sinh)?,
        );
        let rel = (lhs - rhs) / rhs.abs();
        worst = worst.max(rel);
        if k % 2 == 1 {
            worst_commuting = worst_commuting.max(rel.abs());
        }
    }
    Ok(CheckResult {
        name: "cosh_addition",
        passed: worst <= 1e-9 && worst_commuting <= 1e-9,
        detail: format!(
            "{instances} pairs, max rel excess {worst:.3e}, commuting max |gap| {worst_commuting:.3e}"
        ),
    })
}

/// For `X̃ = cosh X − I`: `X̃ ⪰ 0`, `rank X̃ = rank X` and `‖X̃‖ = cosh‖X‖ − 1`.
pub fn check_cosh_minus_identity(instances: usize, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut failures = 0;
    let mut worst_norm_gap: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(2..=8);
        let rank = rng.random_range(1..=n);
        let q = random_orthogonal(n, &mut rng);
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                if k < rank {
                    let mag = rng.random_range(0.2..3.0);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                } else {
                    0.0
                }
            })
            .collect();
        let x = SymMatrix::from_spectrum(&vals, &q)?;
        let tilde =
            matrix_func(&x, MatrixFunction::Cosh)?.add_scaled(&SymMatrix::identity(n), -1.0);
        let eigs = tilde.eigenvalues()?;
        let psd = *eigs.last().unwrap() >= -1e-10;
        let same_rank =
            numerical_rank(&tilde, DEFAULT_RANK_TOL)? == numerical_rank(&x, DEFAULT_RANK_TOL)?;
        let gap = (tilde.op_norm()? - (x.op_norm()?.cosh() - 1.0)).abs();
        worst_norm_gap = worst_norm_gap.max(gap);
        if !(psd && same_rank && gap <= 1e-9) {
            failures += 1;
        }
    }
    Ok(CheckResult {
        name: "cosh_minus_identity",
        passed: failures == 0,
        detail: format!(
            "{instances} matrices, {failures} failures, max norm gap {worst_norm_gap:.3e}"
        ),
    })
}

/// Spectral `exp` against the Taylor sum `Σ_{k≤20} A^k/k!` for `‖A‖ ≤ 1`.
pub fn check_exp_taylor(instances: usize, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let raw = gaussian_symmetric(n, &mut rng);
        let a = raw.scaled(rng.random_range(0.0..1.0) / raw.op_norm()?.max(1e-300));
        let m = a.as_matrix();
        let mut term = nalgebra::DMatrix::<f64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..=20 {
            term = &term * m / k as f64;
            sum += &term;
        }
        let spectral = matrix_func(&a, MatrixFunction::Exp)?;
        worst = worst.max((spectral.as_matrix() - sum).abs().max());
    }
    Ok(CheckResult {
        name: "exp_taylor",
        passed: worst <= 1e-10,
        detail: format!("{instances} matrices, max entry error {worst:.3e}"),
    })
}

/// Random `M` with `λ_max(M) ≤ 0.9/π`, `n ≤ max_n`, for the hypercube comparison.
pub fn hypercube_instance<R: Rng + ?Sized>(max_n: usize, rng: &mut R) -> Result<SymMatrix> {
    let n = rng.random_range(1..=max_n);
    let w = gaussian_symmetric(n, rng);
    let top = w.eigenvalues()?[0];
    let cap = 0.9 / PI;
    let norm = w.op_norm()?.max(1e-300);
    let scale = if top > 0.0 {
        rng.random_range(0.0..1.0) * cap / top
    } else {
        rng.random_range(0.0..1.0) / norm
    };
    Ok(w.scaled(scale))
}

pub fn check_hypercube_comparison(instances: usize, stream: &RngStream) -> Result<CheckResult> {
    let mut rng = stream.rng();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let m = hypercube_instance(12, &mut rng)?;
        let lhs = hypercube_exp_lhs(&m)?;
        let rhs = hypercube_gaussian_rhs(&m)?;
        worst = worst.max(lhs / rhs - 1.0);
    }
    Ok(CheckResult {
        name: "hypercube_comparison",
        passed: worst <= 1e-9,
        detail: format!("{instances} matrices, max lhs/rhs - 1 = {worst:.3e}"),
    })
}

/// Brute-force `max Π_{i<j}|λ_i − λ_j|` over a uniform grid on `[0,1]ⁿ`.
pub fn vandermonde_grid_max(n: usize, points: usize) -> f64 {
    let step = 1.0 / (points - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut best: f64 = 0.0;
    loop {
        let mut prod = 1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                prod *= (idx[i] as f64 - idx[j] as f64).abs() * step;
            }
        }
        best = best.max(prod);
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn check_vandermonde() -> CheckResult {
    let v2 = vandermonde_sup(2);
    let v3 = vandermonde_sup(3);
    let g2 = vandermonde_grid_max(2, 101);
    let g3 = vandermonde_grid_max(3, 101);
    let g4 = vandermonde_grid_max(4, 41);
    let g5 = vandermonde_grid_max(5, 17);
    let exponent = log_vandermonde_sup(200) / 200f64.powi(2);
    let passed = (v2 - 1.0).abs() < 1e-12
        && (v3 - 0.25).abs() < 1e-12
        && (v2 - g2).abs() <= 1e-3
        && (v3 - g3).abs() <= 1e-3
        && vandermonde_sup(4) >= g4
        && vandermonde_sup(5) >= g5
        && (exponent + 2f64.ln()).abs() <= 0.05;
    CheckResult {
        name: "vandermonde_sup",
        passed,
        detail: format!(
            "V(2)={v2:.6} V(3)={v3:.6} grid {g2:.6}/{g3:.6}, log V(200)/200^2 = {exponent:.4}"
        ),
    }
}

/// `∫_{λ₁>λ₂} C₂ e^{−(λ₁²+λ₂²)/4} (λ₁−λ₂) dλ` by the midpoint rule.
pub fn goe2_density_mass(half_width: f64, steps: usize) -> f64 {
    let c2 = goe_density_constant(2).exp();
    let h = 2.0 * half_width / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let l1 = -half_width + (i as f64 + 0.5) * h;
        for j in 0..steps {
            let l2 = -half_width + (j as f64 + 0.5) * h;
            if l1 > l2 {
                total += (-(l1 * l1 + l2 * l2) / 4.0).exp() * (l1 - l2);
            }
        }
    }
    c2 * total * h * h
}

pub fn check_goe_density() -> CheckResult {
    let mass = goe2_density_mass(20.0, 1000);
    CheckResult {
        name: "goe_density_normalization",
        passed: (mass - 1.0).abs() <= 0.01,
        detail: format!("n=2 mass {mass:.6}"),
    }
}

pub fn check_projection_moments(stream: &RngStream) -> Result<CheckResult> {
    let rep = projection_moment_check(16, 4, 20_000, stream)?;
    let full = projection_moment_check(6, 6, 20, &stream.child(1))?;
    Ok(CheckResult {
        name: "projection_moments",
        passed: rep.passed && full.passed,
        detail: format!(
            "E P12 = {:.2e} ± {:.1e}, E P12^2 = {:.5e} ± {:.1e} (exact {:.5e})",
            rep.mean_p12, rep.stderr_p12, rep.mean_p12_sq, rep.stderr_p12_sq, rep.exact_p12_sq
        ),
    })
}

pub fn check_rademacher_blind_direction(stream: &RngStream) -> Result<CheckResult> {
    let n = 8;
    let est = estimate_maci(
        &EnsembleSpec::rademacher_rank_one(n),
        n as f64,
        DirectionPolicy::default(),
        500,
        stream,
    )?;
    let blind = est
        .per_direction
        .iter()
        .find(|d| d.id == "traceless_pair")
        .map(|d| d.estimate);
    Ok(CheckResult {
        name: "rademacher_blind_direction",
        passed: blind == Some(0.0),
        detail: format!("traceless direction estimate {blind:?}"),
    })
}

pub fn check_exact_discrepancy() -> Result<CheckResult> {
    let a = SymMatrix::from_rows(&[vec![0.5, 0.25], vec![0.25, -0.125]])?;
    let (d_pair, _) = exact_discrepancy(&[a.clone(), a.clone()])?;
    let (d_single, _) = exact_discrepancy(std::slice::from_ref(&a))?;
    let one = SymMatrix::from_diagonal(&[1.0]);
    let (d_odd, _) = exact_discrepancy(&[one.clone(), one.clone(), one])?;
    let passed =
        d_pair == 0.0 && (d_single - a.op_norm()?).abs() < 1e-15 && (d_odd - 1.0).abs() < 1e-12;
    Ok(CheckResult {
        name: "exact_discrepancy",
        passed,
        detail: format!("duplicate pair {d_pair}, single {d_single:.6}, odd scalars {d_odd}"),
    })
}

/// Runs every check; randomized ones draw from `RngStream(seed) / k`.
pub fn run_verification(seed: u64) -> Result<Vec<CheckResult>> {
    let root = RngStream::new(seed);
    Ok(vec![
        check_golden_thompson(500, &root.child(0))?,
        check_cosh_addition(500, &root.child(1))?,
        check_cosh_minus_identity(500, &root.child(2))?,
        check_exp_taylor(100, &root.child(3))?,
        check_hypercube_comparison(200, &root.child(4))?,
        check_vandermonde(),
        check_goe_density(),
        check_projection_moments(&root.child(5))?,
        check_rademacher_blind_direction(&root.child(6))?,
        check_exact_discrepancy()?,
    ])
}

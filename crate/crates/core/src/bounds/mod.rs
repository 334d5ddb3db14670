//! First-moment lower bounds on discrepancy.
//!
//! `N_δ` counts signings with `‖Σ x_i A_i‖ ≤ δ`. Since
//! `E N_δ = 2^T · P[‖Σ y_i A_i‖ ≤ δ]` for uniform random `y`, any upper bound
//! on that small-ball probability that drives `E N_δ` below 1 shows that no
//! signing reaches `δ` with positive probability (Markov).

mod chernoff;
mod spectrum;

use std::f64::consts::{LN_2, PI};
use std::fmt;

use statrs::function::gamma::ln_gamma;

pub use chernoff::{
    chernoff_certificate, chernoff_from_spectra, chernoff_gamma_search, default_gamma_grid,
    gram_spectra, GramSpectrum,
};
pub use spectrum::{
    gram_spectrum_probe, marchenko_pastur_cdf, marchenko_pastur_density, write_histogram_csv,
    GramProbe, MarchenkoPastur,
};

use crate::ensembles::{EnsembleSpec, RngStream, SIGNS};
use crate::error::{Error, Result};
use crate::signer::{draw_stream, signing_norms};
use crate::stats::{mean, sample_sd};
use crate::symlin::SymMatrix;

/// `e^{3/4} / 2`, the constant in the GOE small-ball exponent.
pub const GOE_SMALL_BALL_CONSTANT: f64 = 1.058_500_008_306_337_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Excludes,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Excludes => "excludes",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundMethod {
    GoeClosedForm,
    ChernoffCertificate,
    MonteCarlo,
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundMethod::GoeClosedForm => "goe_closed_form",
            BoundMethod::ChernoffCertificate => "chernoff_certificate",
            BoundMethod::MonteCarlo => "monte_carlo",
        })
    }
}

/// Outcome of a first-moment computation at threshold `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBoundReport {
    pub delta: f64,
    /// `log E N_δ`, as a bound or an estimate depending on `method`.
    pub log_first_moment: f64,
    /// Monte Carlo standard error of `log_first_moment` (0 for closed forms).
    pub stderr: f64,
    pub verdict: Verdict,
    pub method: BoundMethod,
    /// Chernoff parameter, when applicable.
    pub gamma: Option<f64>,
}

impl LowerBoundReport {
    pub fn new(
        delta: f64,
        log_first_moment: f64,
        stderr: f64,
        method: BoundMethod,
        gamma: Option<f64>,
    ) -> Self {
        let verdict = if log_first_moment + 3.0 * stderr < 0.0 {
            Verdict::Excludes
        } else {
            Verdict::Inconclusive
        };
        LowerBoundReport {
            delta,
            log_first_moment,
            stderr,
            verdict,
            method,
            gamma,
        }
    }

    pub const CSV_HEADER: [&'static str; 6] = [
        "delta",
        "log_first_moment",
        "stderr",
        "verdict",
        "method",
        "gamma",
    ];

    pub fn csv_record(&self) -> [String; 6] {
        [
            format!("{:.16e}", self.delta),
            format!("{:.16e}", self.log_first_moment),
            format!("{:.16e}", self.stderr),
            self.verdict.to_string(),
            self.method.to_string(),
            self.gamma.map(|g| format!("{g:.16e}")).unwrap_or_default(),
        ]
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `log max_{λ ∈ [0,1]ⁿ} Π_{i<j} |λ_i − λ_j|`, from the closed-form product
/// `Π_{j<n} j^j (j+1)^{(j+1)/2} / (j+n−1)^{(j+n−1)/2}` with `0⁰ = 1`.
pub fn log_vandermonde_sup(n: usize) -> f64 {
    (0..n)
        .map(|j| {
            let j = j as f64;
            let m = j + n as f64 - 1.0;
            xlogx(j) + 0.5 * xlogx(j + 1.0) - 0.5 * xlogx(m)
        })
        .sum()
}

pub fn vandermonde_sup(n: usize) -> f64 {
    log_vandermonde_sup(n).exp()
}

/// `log C_n` for the ordered-eigenvalue density of `GOE(n, 1)`,
/// `C_n e^{−Σλ²/4} Π_{i<j}|λ_i − λ_j|`.
pub fn goe_density_constant(n: usize) -> f64 {
    let nf = n as f64;
    let half_ln_pi = 0.5 * PI.ln();
    -0.5 * nf * (2.0 * PI).ln() - nf * (nf + 1.0) / 4.0 * LN_2
        + (1..=n)
            .map(|j| half_ln_pi - ln_gamma(j as f64 / 2.0))
            .sum::<f64>()
}

/// Two forms of the bound on `log P[‖W‖ ≤ δ]`, `W ∼ GOE(n, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallBallBound {
    /// Density sup times unit volume; rigorous when `(2δ)ⁿ/n! ≤ 1`.
    pub rigorous: f64,
    /// `(n²/2) log(e^{3/4} δ / (2√n))`; only meaningful as `n → ∞`.
    pub asymptotic: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive, got {v}"
        )));
    }
    Ok(())
}

pub fn goe_small_ball_asymptotic(n: usize, delta: f64) -> f64 {
    let nf = n as f64;
    nf * nf / 2.0 * (GOE_SMALL_BALL_CONSTANT * delta / nf.sqrt()).ln()
}

pub fn goe_small_ball_log_bound(n: usize, delta: f64) -> Result<SmallBallBound> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    check_positive("delta", delta)?;
    let nf = n as f64;
    let log_volume = nf * (2.0 * delta).ln() - ln_gamma(nf + 1.0);
    if log_volume > 0.0 {
        return Err(Error::BoundVacuous(log_volume.exp()));
    }
    let rigorous = goe_density_constant(n)
        + nf * (nf - 1.0) / 2.0 * (2.0 * delta).ln()
        + log_vandermonde_sup(n);
    Ok(SmallBallBound {
        rigorous,
        asymptotic: goe_small_ball_asymptotic(n, delta),
    })
}

/// Largest `δ` with `T log 2 + (n²/2) log(C δ / √T) ≤ −ε n²` for GOE(n, 1/n) inputs:
/// `δ_max = √T · 4^{−T/n²} · e^{−2ε} / C`.
pub fn goe_first_moment_threshold(n: usize, t_steps: usize, epsilon: f64) -> Result<f64> {
    if n == 0 || t_steps == 0 {
        return Err(Error::InvalidInput("n and T must be at least 1".into()));
    }
    check_positive("epsilon", epsilon)?;
    let (nf, tf) = (n as f64, t_steps as f64);
    Ok(
        tf.sqrt() * (-2.0 * LN_2 * tf / (nf * nf)).exp() * (-2.0 * epsilon).exp()
            / GOE_SMALL_BALL_CONSTANT,
    )
}

/// `log E N_δ` for GOE(n, 1/n) inputs via the asymptotic small-ball form.
pub fn goe_first_moment_report(n: usize, t_steps: usize, delta: f64) -> Result<LowerBoundReport> {
    check_positive("delta", delta)?;
    let scaled = delta * (n as f64 / t_steps as f64).sqrt();
    let value = t_steps as f64 * LN_2 + goe_small_ball_asymptotic(n, scaled);
    Ok(LowerBoundReport::new(
        delta,
        value,
        0.0,
        BoundMethod::GoeClosedForm,
        None,
    ))
}

/// `√(rT/n) · 4^{−T/n²}`.
pub fn heuristic_prediction(n: usize, r: usize, t_steps: usize) -> Result<f64> {
    if n == 0 || r == 0 || t_steps == 0 {
        return Err(Error::InvalidInput("n, r and T must be positive".into()));
    }
    let (nf, rf, tf) = (n as f64, r as f64, t_steps as f64);
    Ok((rf * tf / nf).sqrt() * (-2.0 * LN_2 * tf / (nf * nf)).exp())
}

/// Largest dimension accepted by [`hypercube_exp_lhs`].
pub const MAX_HYPERCUBE_DIM: usize = 20;

/// `E_s exp(sᵀ M s)` over uniform `s ∈ {±1}ⁿ`, by exhaustive enumeration.
pub fn hypercube_exp_lhs(m: &SymMatrix) -> Result<f64> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    if n > MAX_HYPERCUBE_DIM {
        return Err(Error::InstanceTooLarge(format!(
            "n = {n} exceeds {MAX_HYPERCUBE_DIM}"
        )));
    }
    // s and −s give the same quadratic form; fix s_0 = +1 and walk the rest in Gray order.
    let mut s = vec![1.0; n];
    let mut ms: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).sum()).collect();
    let mut q: f64 = ms.iter().sum();
    let count = 1u64 << (n - 1);
    let mut total = q.exp();
    for g in 1..count {
        let k = g.trailing_zeros() as usize + 1;
        // flipping s_k changes sᵀMs by −4 s_k Σ_{j≠k} M_kj s_j
        let cross = ms[k] - m.get(k, k) * s[k];
        q -= 4.0 * s[k] * cross;
        let old = s[k];
        s[k] = -old;
        for (i, v) in ms.iter_mut().enumerate() {
            *v -= 2.0 * old * m.get(i, k);
        }
        total += q.exp();
    }
    Ok(total / count as f64)
}

/// `exp(−((π−2)/2) Tr M) · det(I − πM)^{−1/2}`; requires `λ_max(M) < 1/π`.
pub fn hypercube_gaussian_rhs(m: &SymMatrix) -> Result<f64> {
    let eigs = m.eigenvalues()?;
    let top = eigs.first().copied().unwrap_or(0.0);
    if top >= 1.0 / PI {
        return Err(Error::DomainViolation(format!(
            "largest eigenvalue {top} is not below 1/pi"
        )));
    }
    let log_value = -(PI - 2.0) / 2.0 * eigs.iter().sum::<f64>()
        - 0.5 * eigs.iter().map(|l| (1.0 - PI * l).ln()).sum::<f64>();
    Ok(log_value.exp())
}

/// Monte Carlo view of `E N_δ` on random instances.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstMomentEstimate {
    pub delta: f64,
    /// Mean of `N_δ` by exhaustive enumeration over signings.
    pub mean_count: f64,
    pub stderr_count: f64,
    /// Fraction of instances with `N_δ ≥ 1`.
    pub fraction_nonzero: f64,
    /// `2^T` times the fraction of (instance, random sign) draws with small norm.
    pub symmetrized: f64,
    pub stderr_symmetrized: f64,
}

/// Estimates `E N_δ` two ways on `n_instances` draws of `T` matrices from `spec`:
/// by enumerating signings, and as `2^T · P[‖Σ y_i A_i‖ ≤ δ]` with one uniform
/// sign vector per instance.
pub fn first_moment_monte_carlo(
    spec: &EnsembleSpec,
    t_steps: usize,
    deltas: &[f64],
    n_instances: usize,
    stream: &RngStream,
) -> Result<Vec<FirstMomentEstimate>> {
    use rand::Rng;
    use rayon::prelude::*;

    if n_instances < 2 {
        return Err(Error::InvalidInput("need at least 2 instances".into()));
    }
    struct Instance {
        norms: Vec<f64>,
        random_norm: f64,
    }
    let instances: Vec<Instance> = (0..n_instances)
        .into_par_iter()
        .map(|k| {
            let sub = stream.child(k as u64);
            let mats = draw_stream(spec, t_steps, &sub)?;
            let mut rng = sub.child(SIGNS).rng();
            let mut sum = SymMatrix::zeros(spec.n);
            for a in &mats {
                sum.add_scaled_mut(a, if rng.random::<bool>() { 1.0 } else { -1.0 });
            }
            Ok(Instance {
                norms: signing_norms(&mats)?,
                random_norm: sum.op_norm()?,
            })
        })
        .collect::<Result<_>>()?;
    let scale = 2f64.powi(t_steps as i32);
    let root = (n_instances as f64).sqrt();
    Ok(deltas
        .iter()
        .map(|&delta| {
            let counts: Vec<f64> = instances
                .iter()
                .map(|inst| 2.0 * inst.norms.iter().filter(|&&v| v <= delta).count() as f64)
                .collect();
            let hits: Vec<f64> = instances
                .iter()
                .map(|inst| {
                    if inst.random_norm <= delta {
                        scale
                    } else {
                        0.0
                    }
                })
                .collect();
            FirstMomentEstimate {
                delta,
                mean_count: mean(&counts),
                stderr_count: sample_sd(&counts) / root,
                fraction_nonzero: counts.iter().filter(|&&c| c >= 1.0).count() as f64
                    / n_instances as f64,
                symmetrized: mean(&hits),
                stderr_symmetrized: sample_sd(&hits) / root,
            }
        })
        .collect())
}

/// Monte Carlo `log E N_δ` report from enumeration counts.
pub fn monte_carlo_report(est: &FirstMomentEstimate) -> LowerBoundReport {
    let (value, se) = if est.mean_count > 0.0 {
        (est.mean_count.ln(), est.stderr_count / est.mean_count)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    LowerBoundReport::new(est.delta, value, se, BoundMethod::MonteCarlo, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vandermonde_values() {
        assert!((vandermonde_sup(1) - 1.0).abs() < 1e-15);
        assert!((vandermonde_sup(2) - 1.0).abs() < 1e-15);
        assert!((vandermonde_sup(3) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn vandermonde_large_n_exponent() {
        let v = log_vandermonde_sup(200) / (200.0 * 200.0);
        assert!((v + LN_2).abs() <= 0.05, "{v}");
    }

    #[test]
    fn density_constant_one_dimensional() {
        let expect = (1.0 / (2.0 * PI.sqrt())).ln();
        assert!((goe_density_constant(1) - expect).abs() < 1e-14);
        assert!(goe_density_constant(2).exp().is_finite());
        assert!(goe_density_constant(2).exp() > 0.0);
    }

    #[test]
    fn small_ball_bound_behaviour() {
        let a = goe_small_ball_log_bound(4, 0.3).unwrap();
        let b = goe_small_ball_log_bound(4, 0.4).unwrap();
        assert!(b.rigorous > a.rigorous && b.asymptotic > a.asymptotic);
        assert!(matches!(
            goe_small_ball_log_bound(2, 2.0),
            Err(Error::BoundVacuous(_))
        ));
        let n = 9.0;
        let asym = goe_small_ball_asymptotic(9, 3.0);
        assert!((asym - n * n / 2.0 * (0.75f64.exp() / 2.0).ln()).abs() < 1e-12);
        assert!(asym > 0.0);
        assert!(((0.75f64.exp() / 2.0) - GOE_SMALL_BALL_CONSTANT).abs() < 1e-14);
    }

    #[test]
    fn threshold_closed_form() {
        let eps = 0.01;
        let (n, t) = (8, 40);
        let d1 = goe_first_moment_threshold(n, t, eps).unwrap();
        let d2 = goe_first_moment_threshold(n, 2 * t, eps).unwrap();
        let expect = 2f64.sqrt() * 4f64.powf(-(t as f64) / (n * n) as f64);
        assert!((d2 / d1 - expect).abs() < 1e-12);

        let r8 = goe_first_moment_threshold(8, 64, eps).unwrap() / 8.0;
        let r16 = goe_first_moment_threshold(16, 256, eps).unwrap() / 16.0;
        assert!((r8 - r16).abs() < 1e-12);

        // the threshold sits exactly on the −εn² line
        let rep = goe_first_moment_report(n, t, d1).unwrap();
        assert!((rep.log_first_moment + eps * (n * n) as f64).abs() < 1e-9);
        assert_eq!(rep.verdict, Verdict::Excludes);
    }

    #[test]
    fn heuristic_examples() {
        assert!((heuristic_prediction(8, 8, 64).unwrap() - 2.0).abs() < 1e-12);
        assert!(heuristic_prediction(4, 4, 400).unwrap() < 1e-5);
        let v = heuristic_prediction(50, 1, 50).unwrap();
        assert!((v - 4f64.powf(-1.0 / 50.0)).abs() < 1e-12);
    }

    #[test]
    fn hypercube_examples() {
        let zero = SymMatrix::zeros(3);
        assert!((hypercube_exp_lhs(&zero).unwrap() - 1.0).abs() < 1e-15);
        assert!((hypercube_gaussian_rhs(&zero).unwrap() - 1.0).abs() < 1e-15);

        let m = SymMatrix::from_diagonal(&[0.1]);
        let lhs = hypercube_exp_lhs(&m).unwrap();
        let rhs = hypercube_gaussian_rhs(&m).unwrap();
        assert!((lhs - 0.1f64.exp()).abs() < 1e-14);
        assert!((rhs - 1.1405).abs() < 1e-4, "{rhs}");
        assert!(lhs <= rhs);

        let bad = SymMatrix::from_diagonal(&[0.4, 0.0]);
        assert!(matches!(
            hypercube_gaussian_rhs(&bad),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn hypercube_lhs_matches_direct_sum() {
        let m = crate::ensembles::sample_goe(5, 0.01, &mut RngStream::new(3).rng());
        let mut total = 0.0;
        for mask in 0..32u32 {
            let s: Vec<f64> = (0..5)
                .map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let mut q = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    q += s[i] * m.get(i, j) * s[j];
                }
            }
            total += f64::exp(q);
        }
        assert!((hypercube_exp_lhs(&m).unwrap() - total / 32.0).abs() < 1e-12);
    }
}

//! Monte Carlo estimators for the hypotheses the MHC guarantee rests on.
//!
//! - anti-concentration: `√n · E|⟨X, A⟩| ≥ η ‖X‖_*` over a finite pool of
//!   adversarial directions `X` (so `eta_hat` over-estimates the true constant);
//! - unbiasedness: `‖E P_row(A)‖ · n / r`;
//! - low-order moments of random projections.
//!
//! Samples are drawn from indexed sub-streams and reduced in index order, so
//! every estimate is a deterministic function of the stream address.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::ensembles::{
    sample_goe, sample_projection, EnsembleSpec, EntryDistribution, EntryLaw, RngStream, DRAWS,
};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};
use crate::symlin::{row_projection, symmat, symvec, SymMatrix, DEFAULT_RANK_TOL};

const DIRECTIONS: u64 = 3;

/// Named test direction with unit nuclear norm.
#[derive(Clone, Debug)]
pub struct Direction {
    pub id: String,
    pub matrix: SymMatrix,
}

impl Direction {
    /// Rescales `matrix` to nuclear norm 1.
    pub fn normalized(id: impl Into<String>, matrix: SymMatrix) -> Result<Self> {
        let nuclear = matrix.norms()?.nuclear;
        if !(nuclear > 0.0) {
            return Err(Error::InvalidInput("direction must be nonzero".into()));
        }
        Ok(Direction {
            id: id.into(),
            matrix: matrix.scaled(1.0 / nuclear),
        })
    }
}

/// Which directions enter the adversary pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DirectionPolicy {
    /// Identity, traceless diagonals, an off-diagonal pair and a corner entry.
    pub structured: bool,
    pub random_goe: usize,
    pub random_rank_one: usize,
}

impl Default for DirectionPolicy {
    fn default() -> Self {
        DirectionPolicy {
            structured: true,
            random_goe: 8,
            random_rank_one: 8,
        }
    }
}

/// Builds the direction pool for dimension `n`.
pub fn direction_pool<R: Rng + ?Sized>(
    n: usize,
    policy: DirectionPolicy,
    rng: &mut R,
) -> Result<Vec<Direction>> {
    let mut out = Vec::new();
    if policy.structured {
        out.push(Direction::normalized("identity", SymMatrix::identity(n))?);
        out.push(Direction::normalized(
            "corner",
            SymMatrix::from_upper_fn(n, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }),
        )?);
        if n >= 2 {
            let mut d = vec![0.0; n];
            d[0] = 1.0;
            d[1] = -1.0;
            out.push(Direction::normalized(
                "traceless_pair",
                SymMatrix::from_diagonal(&d),
            )?);
            let alt: Vec<f64> = (0..n)
                .map(|i| {
                    if n % 2 == 1 && i == n - 1 {
                        0.0
                    } else if i % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            out.push(Direction::normalized(
                "balanced_diagonal",
                SymMatrix::from_diagonal(&alt),
            )?);
            out.push(Direction::normalized(
                "offdiag_pair",
                SymMatrix::from_upper_fn(n, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 }),
            )?);
        }
    }
    for k in 0..policy.random_goe {
        out.push(Direction::normalized(
            format!("goe_{k}"),
            sample_goe(n, 1.0, rng),
        )?);
    }
    for k in 0..policy.random_rank_one {
        let v: Vec<f64> = (0..n)
            .map(|_| rng.sample(rand_distr::StandardNormal))
            .collect();
        out.push(Direction::normalized(
            format!("rank_one_{k}"),
            SymMatrix::from_upper_fn(n, |i, j| v[i] * v[j]),
        )?);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("direction pool is empty".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionEstimate {
    pub id: String,
    /// `√n · E|⟨X, prescale · A⟩| / ‖X‖_*`.
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug)]
pub struct MaciEstimate {
    /// Minimum over the pool; an upper estimate of the true constant.
    pub eta_hat: f64,
    pub worst_direction: SymMatrix,
    pub worst_id: String,
    pub n_directions: usize,
    pub n_samples: usize,
    /// Monte Carlo standard error of the worst direction's estimate.
    pub mc_stderr: f64,
    pub per_direction: Vec<DirectionEstimate>,
}

/// `√n · |⟨X, prescale · A⟩| / ‖X‖_*` averaged over `samples`.
pub fn maci_ratio(samples: &[SymMatrix], x: &SymMatrix, prescale: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyData("no samples".into()));
    }
    let n = x.dim() as f64;
    let nuclear = x.norms()?.nuclear;
    let vals: Vec<f64> = samples
        .iter()
        .map(|a| n.sqrt() * (prescale * x.inner(a)).abs() / nuclear)
        .collect();
    Ok((mean(&vals), sample_sd(&vals) / (vals.len() as f64).sqrt()))
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < 100 {
        return Err(Error::InvalidInput(format!(
            "at least 100 samples required, got {n_samples}"
        )));
    }
    Ok(())
}

/// Per-sample statistics `f(A_k)` for `k < n_samples`, in index order.
fn per_sample<T: Send>(
    spec: &EnsembleSpec,
    n_samples: usize,
    stream: &RngStream,
    f: impl Fn(&SymMatrix) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let draws = stream.child(DRAWS);
    (0..n_samples)
        .into_par_iter()
        .map(|k| f(&spec.sample_at(&draws.child(k as u64))?))
        .collect()
}

fn summarize_directions(
    ids: Vec<String>,
    matrices: Vec<SymMatrix>,
    rows: Vec<Vec<f64>>,
) -> Result<MaciEstimate> {
    let n_samples = rows.len();
    let mut per_direction = Vec::with_capacity(ids.len());
    for (d, id) in ids.into_iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
        per_direction.push(DirectionEstimate {
            id,
            estimate: mean(&col),
            stderr: sample_sd(&col) / (n_samples as f64).sqrt(),
        });
    }
    let worst = per_direction
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.estimate.total_cmp(&b.1.estimate))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::EmptyData("no directions".into()))?;
    Ok(MaciEstimate {
        eta_hat: per_direction[worst].estimate,
        worst_direction: matrices[worst].clone(),
        worst_id: per_direction[worst].id.clone(),
        n_directions: per_direction.len(),
        n_samples,
        mc_stderr: per_direction[worst].stderr,
        per_direction,
    })
}

/// Estimates the anti-concentration constant of `prescale · A`, `A ∼ spec`.
///
/// The signer's step size assumes `prescale = n / √r`.
pub fn estimate_maci(
    spec: &EnsembleSpec,
    prescale: f64,
    policy: DirectionPolicy,
    n_samples: usize,
    stream: &RngStream,
) -> Result<MaciEstimate> {
    let directions = direction_pool(spec.n, policy, &mut stream.child(DIRECTIONS).rng())?;
    estimate_maci_with_directions(spec, prescale, &directions, n_samples, stream)
}

pub fn estimate_maci_with_directions(
    spec: &EnsembleSpec,
    prescale: f64,
    directions: &[Direction],
    n_samples: usize,
    stream: &RngStream,
) -> Result<MaciEstimate> {
    check_samples(n_samples)?;
    let root_n = (spec.n as f64).sqrt();
    let nuclear: Vec<f64> = directions
        .iter()
        .map(|d| Ok(d.matrix.norms()?.nuclear))
        .collect::<Result<_>>()?;
    let rows = per_sample(spec, n_samples, stream, |a| {
        Ok(directions
            .iter()
            .zip(&nuclear)
            .map(|(d, nu)| root_n * (prescale * d.matrix.inner(a)).abs() / nu)
            .collect())
    })?;
    summarize_directions(
        directions.iter().map(|d| d.id.clone()).collect(),
        directions.iter().map(|d| d.matrix.clone()).collect(),
        rows,
    )
}

/// Same estimate computed in vectorized coordinates: `⟨symvec X, symvec A⟩`
/// with directions given as vectors of length `n(n+1)/2`.
pub fn estimate_maci_symvec(
    spec: &EnsembleSpec,
    prescale: f64,
    directions: &[(String, DVector<f64>)],
    n_samples: usize,
    stream: &RngStream,
) -> Result<MaciEstimate> {
    check_samples(n_samples)?;
    let root_n = (spec.n as f64).sqrt();
    let matrices: Vec<SymMatrix> = directions
        .iter()
        .map(|(_, v)| symmat(v))
        .collect::<Result<_>>()?;
    let nuclear: Vec<f64> = matrices
        .iter()
        .map(|m| Ok(m.norms()?.nuclear))
        .collect::<Result<_>>()?;
    let rows = per_sample(spec, n_samples, stream, |a| {
        let va = symvec(a);
        Ok(directions
            .iter()
            .zip(&nuclear)
            .map(|((_, x), nu)| root_n * (prescale * x.dot(&va)).abs() / nu)
            .collect())
    })?;
    summarize_directions(
        directions.iter().map(|d| d.0.clone()).collect(),
        matrices,
        rows,
    )
}

/// `E|⟨x, a⟩| / ‖x‖₂` and its standard error over vector samples.
pub fn kaci_ratio(samples: &[DVector<f64>], x: &DVector<f64>) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyData("no samples".into()));
    }
    let norm = x.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let vals: Vec<f64> = samples.iter().map(|a| x.dot(a).abs() / norm).collect();
    Ok((mean(&vals), sample_sd(&vals) / (vals.len() as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnbiasednessEstimate {
    /// `‖mean P_row(A)‖ · n / r`.
    pub theta_hat: f64,
    pub mc_stderr: f64,
    pub n_samples: usize,
}

/// Estimates the unbiasedness constant `θ` from the mean row-space projection.
///
/// The plug-in estimate is biased upward by roughly `2 σ √n · n/r`, where
/// `σ` is the per-entry Monte Carlo error, so low-rank ensembles need
/// ~10⁴ samples for a ±0.1 reading.
pub fn estimate_unbiasedness(
    spec: &EnsembleSpec,
    n_samples: usize,
    stream: &RngStream,
) -> Result<UnbiasednessEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be positive".into()));
    }
    spec.validate()?;
    let n = spec.n;
    let projections = per_sample(spec, n_samples, stream, |a| {
        row_projection(a, DEFAULT_RANK_TOL)
    })?;
    let mut acc = SymMatrix::zeros(n);
    for p in &projections {
        acc.add_scaled_mut(p, 1.0);
    }
    let mean_p = acc.scaled(1.0 / n_samples as f64);
    let pair = mean_p.eig()?;
    let top = pair
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let scale = n as f64 / spec.rank() as f64;
    let v = pair.eigenvectors.column(top).into_owned();
    let along: Vec<f64> = projections
        .iter()
        .map(|p| (v.transpose() * p.as_matrix() * &v)[(0, 0)])
        .collect();
    Ok(UnbiasednessEstimate {
        theta_hat: pair.eigenvalues[top].abs() * scale,
        mc_stderr: sample_sd(&along) / (n_samples as f64).sqrt() * scale,
        n_samples,
    })
}

/// Anti-concentration constant after truncating to an event of probability
/// `event_prob`: `η − √(C (1 − event_prob))`.
pub fn check_kaci_truncation(eta: f64, c: f64, event_prob: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&event_prob) || c < 0.0 {
        return Err(Error::InvalidInput(format!(
            "need 0 <= event_prob <= 1 and C >= 0, got {event_prob}, {c}"
        )));
    }
    let value = eta - (c * (1.0 - event_prob)).sqrt();
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::TruncationTooLossy(value))
    }
}

/// Certified constant `C₁ / (512 C₂)` for entry laws with variance bounds
/// `C₁²/n ≤ Var ≤ C₂²/n`. Known to be loose.
pub fn certified_kaci_constant(c1: f64, c2: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidInput("C1 and C2 must be positive".into()));
    }
    Ok(c1 / (512.0 * c2))
}

/// Exact `E[P_12²]` for the projection onto a uniform `r`-dimensional subspace.
///
/// `P_11 ∼ Beta(r/2, (n−r)/2)` gives `E P_11²`, and `P² = P` gives
/// `Σ_j P_1j² = P_11`, so `(n−1) E P_12² = E P_11 − E P_11²`.
pub fn projection_offdiag_second_moment(n: usize, r: usize) -> f64 {
    let (n, r) = (n as f64, r as f64);
    r * (n - r) / (n * (n - 1.0) * (n + 2.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMomentReport {
    pub n: usize,
    pub r: usize,
    pub n_samples: usize,
    pub mean_p12: f64,
    pub stderr_p12: f64,
    pub mean_p12_sq: f64,
    pub stderr_p12_sq: f64,
    pub exact_p12_sq: f64,
    /// `E[P_12² P_34²] − E[P_12²] E[P_34²]`; `NaN` when `n < 4`.
    pub cov_p12sq_p34sq: f64,
    pub stderr_cov: f64,
    /// Order-of-magnitude band `r²/n⁴ ≲ E P_12² ≲ r/n²`.
    pub band: (f64, f64),
    pub passed: bool,
}

/// Monte Carlo check of low-order projection moments.
pub fn projection_moment_check(
    n: usize,
    r: usize,
    n_samples: usize,
    stream: &RngStream,
) -> Result<ProjectionMomentReport> {
    if n < 2 || r == 0 || r > n {
        return Err(Error::InvalidInput(format!(
            "need n >= 2 and 1 <= r <= n, got n = {n}, r = {r}"
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let draws = stream.child(DRAWS);
    let entries: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let p = sample_projection(n, r, &mut draws.child(k as u64).rng())?;
            Ok((p.get(0, 1), if n >= 4 { p.get(2, 3) } else { f64::NAN }))
        })
        .collect::<Result<_>>()?;
    let p12: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let sq12: Vec<f64> = p12.iter().map(|v| v * v).collect();
    let sq34: Vec<f64> = entries.iter().map(|e| e.1 * e.1).collect();
    let root = (n_samples as f64).sqrt();

    let (cov, se_cov) = if n >= 4 {
        let (m12, m34) = (mean(&sq12), mean(&sq34));
        let centered: Vec<f64> = sq12
            .iter()
            .zip(&sq34)
            .map(|(a, b)| (a - m12) * (b - m34))
            .collect();
        (mean(&centered), sample_sd(&centered) / root)
    } else {
        (f64::NAN, f64::NAN)
    };

    let (nf, rf) = (n as f64, r as f64);
    let mut report = ProjectionMomentReport {
        n,
        r,
        n_samples,
        mean_p12: mean(&p12),
        stderr_p12: sample_sd(&p12) / root,
        mean_p12_sq: mean(&sq12),
        stderr_p12_sq: sample_sd(&sq12) / root,
        exact_p12_sq: projection_offdiag_second_moment(n, r),
        cov_p12sq_p34sq: cov,
        stderr_cov: se_cov,
        band: (rf * rf / nf.powi(4), rf / (nf * nf)),
        passed: false,
    };
    report.passed = if r == n {
        report.mean_p12 == 0.0 && report.mean_p12_sq == 0.0
    } else {
        let zero_mean = report.mean_p12.abs() <= 3.0 * report.stderr_p12;
        let exact = (report.mean_p12_sq - report.exact_p12_sq).abs() <= 3.0 * report.stderr_p12_sq;
        let slack = 3.0 * report.stderr_p12_sq;
        let in_band = report.mean_p12_sq + slack >= report.band.0
            && report.mean_p12_sq - slack <= report.band.1;
        zero_mean && exact && in_band
    };
    Ok(report)
}

/// Empirical anti-concentration constant of `a ⊗ a` for `a` with i.i.d.
/// entries from `law`: `min_X E|aᵀ X a| / ‖X‖_F` over structured and random
/// symmetric directions. No sharp value is known; this is a measurement only.
pub fn estimate_tensor_square_kaci(
    law: &EntryDistribution,
    dim: usize,
    n_random: usize,
    n_samples: usize,
    stream: &RngStream,
) -> Result<f64> {
    check_samples(n_samples)?;
    if dim < 2 {
        return Err(Error::InvalidInput("dimension must be at least 2".into()));
    }
    let mut dir_rng = stream.child(DIRECTIONS).rng();
    let mut dirs: Vec<SymMatrix> = vec![
        SymMatrix::identity(dim),
        SymMatrix::from_upper_fn(dim, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 }),
        SymMatrix::from_upper_fn(dim, |i, j| if i == 0 && j == 1 { 1.0 } else { 0.0 }),
        SymMatrix::from_upper_fn(dim, |i, j| match (i, j) {
            (0, 0) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        }),
    ];
    for _ in 0..n_random {
        dirs.push(sample_goe(dim, 1.0, &mut dir_rng));
    }
    let norms: Vec<f64> = dirs.iter().map(|d| d.frobenius_norm()).collect();
    let draws = stream.child(DRAWS);
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = draws.child(k as u64).rng();
            let a = DVector::from_fn(dim, |i, _| law.sample_entry(i, 0, &mut rng));
            dirs.iter()
                .zip(&norms)
                .map(|(d, nf)| (a.transpose() * d.as_matrix() * &a)[(0, 0)].abs() / nf)
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    for d in 0..dirs.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
        best = best.min(mean(&col));
    }
    Ok(best)
}

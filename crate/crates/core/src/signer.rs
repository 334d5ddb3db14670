//! Online signing algorithms and the exhaustive offline oracle.
//!
//! The MHC rule picks `x_t = argmin_{x=±1} Tr cosh(α(M + x A_t))`. Both
//! candidate sums are diagonalized once; the winning spectrum also yields the
//! new operator norm, so the inner loop costs two symmetric eigensolves.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::ensembles::{EnsembleSpec, RngStream, DRAWS, SIGNS, SUPPORT_SLACK};
use crate::error::{Error, Result};
use crate::symlin::{log_trace_cosh_from_eigenvalues, operator_norm_of, SymMatrix};

/// Absolute tolerance on log-potential and norm comparisons; closer values tie to `+1`.
pub const TIE_TOL: f64 = 1e-12;

/// Largest `T` accepted by the exhaustive enumerations.
pub const MAX_ENUMERATION_T: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Mhc,
    Random,
    Greedy,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Mhc => "mhc",
            Algorithm::Random => "random",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mhc" => Ok(Algorithm::Mhc),
            "random" => Ok(Algorithm::Random),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(Error::InvalidInput(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// How the potential's inverse temperature `α` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaPolicy {
    /// `α = η / (4√2 · θ · √(rn))`, clamped to at most 1.
    Auto {
        eta: f64,
        theta: f64,
    },
    Fixed(f64),
}

impl AlphaPolicy {
    pub fn resolve(&self, r: usize, n: usize) -> Result<f64> {
        match *self {
            AlphaPolicy::Auto { eta, theta } => mhc_alpha_auto(r, n, eta, theta),
            AlphaPolicy::Fixed(a) if a > 0.0 && a.is_finite() => Ok(a),
            AlphaPolicy::Fixed(a) => Err(Error::InvalidInput(format!(
                "alpha must be positive, got {a}"
            ))),
        }
    }
}

/// `min(η / (4√2 · θ · √(rn)), 1)`.
pub fn mhc_alpha_auto(r: usize, n: usize, eta: f64, theta: f64) -> Result<f64> {
    if r == 0 || n == 0 {
        return Err(Error::InvalidInput("r and n must be at least 1".into()));
    }
    if !(eta > 0.0) || !(theta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eta and theta must be positive, got eta = {eta}, theta = {theta}"
        )));
    }
    let value = eta / (4.0 * std::f64::consts::SQRT_2 * theta * ((r * n) as f64).sqrt());
    Ok(value.min(1.0))
}

/// One step of a signed-sum trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub x: Sign,
    pub op_norm: f64,
    pub log_potential: f64,
}

/// Running state of an online signer.
#[derive(Clone, Debug)]
pub struct SignerState {
    m: SymMatrix,
    t: usize,
    alpha: f64,
    op_norm: f64,
    max_norm_seen: f64,
    log_potential: f64,
}

impl SignerState {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(SignerState {
            m: SymMatrix::zeros(n),
            t: 0,
            alpha,
            op_norm: 0.0,
            max_norm_seen: 0.0,
            log_potential: (n as f64).ln(),
        })
    }

    /// State whose running sum is `m` (as if reached after `t` steps).
    pub fn from_sum(m: SymMatrix, t: usize, alpha: f64) -> Result<Self> {
        let mut s = SignerState::new(m.dim(), alpha)?;
        let eigs = m.eigenvalues()?;
        s.op_norm = operator_norm_of(&eigs);
        s.max_norm_seen = s.op_norm;
        s.log_potential = log_trace_cosh_from_eigenvalues(&eigs, alpha);
        s.m = m;
        s.t = t;
        Ok(s)
    }

    pub fn sum(&self) -> &SymMatrix {
        &self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    pub fn max_norm_seen(&self) -> f64 {
        self.max_norm_seen
    }

    /// `log Tr cosh(α M_t)`.
    pub fn log_potential(&self) -> f64 {
        self.log_potential
    }

    pub fn last_record(&self, x: Sign) -> TrajectoryRecord {
        TrajectoryRecord {
            t: self.t,
            x,
            op_norm: self.op_norm,
            log_potential: self.log_potential,
        }
    }

    fn check_dim(&self, a: &SymMatrix) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "input is {}x{}, state is {}x{}",
                a.dim(),
                a.dim(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn commit(&mut self, sum: SymMatrix, eigs: &[f64]) {
        self.m = sum;
        self.t += 1;
        self.op_norm = operator_norm_of(eigs);
        self.max_norm_seen = self.max_norm_seen.max(self.op_norm);
        self.log_potential = log_trace_cosh_from_eigenvalues(eigs, self.alpha);
    }

    fn apply_sign(&mut self, a: &SymMatrix, x: Sign) -> Result<()> {
        let sum = self.m.add_scaled(a, x.value());
        let eigs = sum.eigenvalues()?;
        self.commit(sum, &eigs);
        Ok(())
    }
}

fn check_support(a: &SymMatrix) -> Result<()> {
    // ‖A‖ ≤ ‖A‖_F, so the eigensolve is only needed when Frobenius is inconclusive.
    if a.frobenius_norm() <= 1.0 + SUPPORT_SLACK {
        return Ok(());
    }
    let norm = a.op_norm()?;
    if norm > 1.0 + SUPPORT_SLACK {
        return Err(Error::InvalidInput(format!(
            "MHC requires operator norm at most 1, got {norm}"
        )));
    }
    Ok(())
}

/// One MHC step. Requires `‖A‖ ≤ 1 + 1e-9`.
pub fn mhc_step(state: &mut SignerState, a: &SymMatrix) -> Result<Sign> {
    state.check_dim(a)?;
    check_support(a)?;
    mhc_step_unchecked(state, a)
}

fn mhc_step_unchecked(state: &mut SignerState, a: &SymMatrix) -> Result<Sign> {
    let plus = state.m.add_scaled(a, 1.0);
    let minus = state.m.add_scaled(a, -1.0);
    let eig_plus = plus.eigenvalues()?;
    let eig_minus = minus.eigenvalues()?;
    let lp_plus = log_trace_cosh_from_eigenvalues(&eig_plus, state.alpha);
    let lp_minus = log_trace_cosh_from_eigenvalues(&eig_minus, state.alpha);
    if lp_minus < lp_plus - TIE_TOL {
        state.commit(minus, &eig_minus);
        Ok(Sign::Minus)
    } else {
        state.commit(plus, &eig_plus);
        Ok(Sign::Plus)
    }
}

/// Uniform random sign, independent of `a`.
pub fn random_step<R: Rng + ?Sized>(
    state: &mut SignerState,
    a: &SymMatrix,
    rng: &mut R,
) -> Result<Sign> {
    state.check_dim(a)?;
    let x = if rng.random::<bool>() {
        Sign::Plus
    } else {
        Sign::Minus
    };
    state.apply_sign(a, x)?;
    Ok(x)
}

/// `argmin_x ‖M + xA‖`, ties to `+1`.
pub fn greedy_norm_step(state: &mut SignerState, a: &SymMatrix) -> Result<Sign> {
    state.check_dim(a)?;
    let plus = state.m.add_scaled(a, 1.0);
    let minus = state.m.add_scaled(a, -1.0);
    let eig_plus = plus.eigenvalues()?;
    let eig_minus = minus.eigenvalues()?;
    if operator_norm_of(&eig_minus) < operator_norm_of(&eig_plus) - TIE_TOL {
        state.commit(minus, &eig_minus);
        Ok(Sign::Minus)
    } else {
        state.commit(plus, &eig_plus);
        Ok(Sign::Plus)
    }
}

/// Dispatches one step of `algorithm`; `rng` is only consumed by random signing.
pub fn step<R: Rng + ?Sized>(
    algorithm: Algorithm,
    state: &mut SignerState,
    a: &SymMatrix,
    rng: &mut R,
) -> Result<Sign> {
    match algorithm {
        Algorithm::Mhc => mhc_step(state, a),
        Algorithm::Random => random_step(state, a, rng),
        Algorithm::Greedy => greedy_norm_step(state, a),
    }
}

/// Runs `algorithm` over an explicit matrix sequence.
pub fn run_on_matrices<R: Rng + ?Sized>(
    matrices: &[SymMatrix],
    algorithm: Algorithm,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<TrajectoryRecord>> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidInput("empty matrix stream".into()))?;
    let mut state = SignerState::new(first.dim(), alpha)?;
    matrices
        .iter()
        .map(|a| {
            let x = step(algorithm, &mut state, a, rng)?;
            Ok(state.last_record(x))
        })
        .collect()
}

/// Draws `A_1..A_T` from `spec` and signs them online.
///
/// Draw `t` comes from `stream / DRAWS / t` and random signs from
/// `stream / SIGNS`, so algorithms run on the same stream see identical
/// matrices, and the first `T'` records of a run equal a run of length `T'`.
pub fn run_stream(
    spec: &EnsembleSpec,
    algorithm: Algorithm,
    t_steps: usize,
    alpha_policy: AlphaPolicy,
    stream: &RngStream,
) -> Result<Vec<TrajectoryRecord>> {
    if t_steps == 0 {
        return Err(Error::InvalidInput("T must be at least 1".into()));
    }
    spec.validate()?;
    let alpha = alpha_policy.resolve(spec.rank(), spec.n)?;
    let mut state = SignerState::new(spec.n, alpha)?;
    let draws = stream.child(DRAWS);
    let mut sign_rng = stream.child(SIGNS).rng();
    let trusted = spec.bounded_by_one();
    let mut out = Vec::with_capacity(t_steps);
    for t in 0..t_steps {
        let a = spec.sample_at(&draws.child(t as u64))?;
        let x = match algorithm {
            Algorithm::Mhc if trusted => {
                state.check_dim(&a)?;
                mhc_step_unchecked(&mut state, &a)?
            }
            _ => step(algorithm, &mut state, &a, &mut sign_rng)?,
        };
        out.push(state.last_record(x));
    }
    Ok(out)
}

/// Largest operator norm along a trajectory.
pub fn max_running_norm(records: &[TrajectoryRecord]) -> f64 {
    records.iter().map(|r| r.op_norm).fold(0.0, f64::max)
}

/// The `T` matrices `run_stream` would draw from `stream`.
pub fn draw_stream(
    spec: &EnsembleSpec,
    t_steps: usize,
    stream: &RngStream,
) -> Result<Vec<SymMatrix>> {
    let draws = stream.child(DRAWS);
    (0..t_steps)
        .map(|t| spec.sample_at(&draws.child(t as u64)))
        .collect()
}

fn check_enumerable(matrices: &[SymMatrix]) -> Result<usize> {
    let t = matrices.len();
    if t == 0 {
        return Err(Error::InvalidInput("empty matrix list".into()));
    }
    if t > MAX_ENUMERATION_T {
        return Err(Error::InstanceTooLarge(format!(
            "T = {t} exceeds the enumeration limit {MAX_ENUMERATION_T}"
        )));
    }
    let n = matrices[0].dim();
    if matrices.iter().any(|a| a.dim() != n) {
        return Err(Error::InvalidInput(
            "matrices have differing dimensions".into(),
        ));
    }
    Ok(t)
}

/// Sign vector for enumeration index `mask`: `x_1 = +1`, `x_{k+2} = -1` iff bit `k` is set.
pub fn signs_from_mask(mask: u64, t: usize) -> Vec<Sign> {
    let mut out = Vec::with_capacity(t);
    out.push(Sign::Plus);
    for k in 0..t.saturating_sub(1) {
        out.push(if mask >> k & 1 == 1 {
            Sign::Minus
        } else {
            Sign::Plus
        });
    }
    out
}

const CHUNK_BITS: usize = 10;

/// Visits every signing with `x_1 = +1`, calling `visit(mask, ‖Σ x_i A_i‖)`.
///
/// The `2^{T-1}` masks are split into chunks by their high bits; each chunk
/// is walked in Gray-code order so consecutive sums differ by one `±2A_k`.
fn visit_chunk(
    matrices: &[SymMatrix],
    high: u64,
    low_bits: usize,
    mut visit: impl FnMut(u64, f64),
) -> Result<()> {
    let base_mask = high << low_bits;
    let mut sum = matrices[0].clone();
    for (k, a) in matrices[1..].iter().enumerate() {
        let x = if base_mask >> k & 1 == 1 { -1.0 } else { 1.0 };
        sum.add_scaled_mut(a, x);
    }
    let mut mask = base_mask;
    visit(mask, operator_norm_of(&sum.eigenvalues()?));
    for g in 1u64..(1u64 << low_bits) {
        let bit = g.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let now_minus = mask >> bit & 1 == 1;
        sum.add_scaled_mut(&matrices[bit + 1], if now_minus { -2.0 } else { 2.0 });
        visit(mask, operator_norm_of(&sum.eigenvalues()?));
    }
    Ok(())
}

fn chunk_layout(t: usize) -> (usize, u64) {
    let free = t - 1;
    let low_bits = free.min(CHUNK_BITS);
    (low_bits, 1u64 << (free - low_bits))
}

/// `Δ = min_x ‖Σ x_i A_i‖` by exhaustive enumeration (`T ≤ 24`).
///
/// Returns the minimum and the argmin with the lowest enumeration index.
pub fn exact_discrepancy(matrices: &[SymMatrix]) -> Result<(f64, Vec<Sign>)> {
    let t = check_enumerable(matrices)?;
    let (low_bits, chunks) = chunk_layout(t);
    let best = (0..chunks)
        .into_par_iter()
        .map(|high| {
            let mut best = (f64::INFINITY, u64::MAX);
            visit_chunk(matrices, high, low_bits, |mask, norm| {
                if norm < best.0 || (norm == best.0 && mask < best.1) {
                    best = (norm, mask);
                }
            })?;
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((f64::INFINITY, u64::MAX), |acc, b| {
            if b.0 < acc.0 || (b.0 == acc.0 && b.1 < acc.1) {
                b
            } else {
                acc
            }
        });
    Ok((best.0, signs_from_mask(best.1, t)))
}

/// Norms `‖Σ x_i A_i‖` of all `2^{T-1}` signings with `x_1 = +1`, in arbitrary order.
pub fn signing_norms(matrices: &[SymMatrix]) -> Result<Vec<f64>> {
    let t = check_enumerable(matrices)?;
    let (low_bits, chunks) = chunk_layout(t);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|high| {
            let mut out = Vec::with_capacity(1 << low_bits);
            visit_chunk(matrices, high, low_bits, |_, norm| out.push(norm))?;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.concat())
}

/// `N_δ`: number of the `2^T` signings with `‖Σ x_i A_i‖ ≤ δ`.
pub fn count_signings_below(matrices: &[SymMatrix], delta: f64) -> Result<u64> {
    let half = signing_norms(matrices)?
        .into_iter()
        .filter(|&v| v <= delta)
        .count() as u64;
    Ok(2 * half)
}

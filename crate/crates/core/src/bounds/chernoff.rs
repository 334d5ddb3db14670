//! Frobenius–Chernoff certificate for `log E N_δ`.
//!
//! For uniform signs `y` and `S = Σ y_i A_i`,
//! `P[‖S‖ ≤ δ] ≤ P[‖S‖_F² ≤ nδ²] ≤ e^{γnδ²} E e^{−γ yᵀMy}` with Gram matrix
//! `M_ij = ⟨A_i, A_j⟩`, and the hypercube–Gaussian comparison bounds the
//! inner expectation by `exp(((π−2)/2) γ Tr M) det(I + πγM)^{−1/2}`.
//! The outer expectation over the draws is estimated by Monte Carlo.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{BoundMethod, LowerBoundReport};
use crate::ensembles::{EnsembleSpec, RngStream};
use crate::error::{Error, Result};
use crate::signer::draw_stream;
use crate::stats::{log_mean_exp, sample_sd};
use crate::symlin::symmetrize;

/// Spectrum of one replication's `T × T` Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GramSpectrum {
    pub trace: f64,
    /// Eigenvalues with roundoff negatives clamped to 0.
    pub eigenvalues: Vec<f64>,
    /// How many eigenvalues needed clamping.
    pub clamped: usize,
}

/// Gram spectra of `n_mc` independent draws of `T` matrices; replication `j`
/// uses `stream / j`.
pub fn gram_spectra(
    spec: &EnsembleSpec,
    t_steps: usize,
    n_mc: usize,
    stream: &RngStream,
) -> Result<Vec<GramSpectrum>> {
    if t_steps == 0 || n_mc == 0 {
        return Err(Error::InvalidInput("T and n_mc must be positive".into()));
    }
    (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let mats = draw_stream(spec, t_steps, &stream.child(j as u64))?;
            let gram = DMatrix::from_fn(t_steps, t_steps, |a, b| mats[a].inner(&mats[b]));
            let raw = symmetrize(&gram)?.eigenvalues()?;
            let clamped = raw.iter().filter(|&&l| l < 0.0).count();
            Ok(GramSpectrum {
                trace: gram.trace(),
                eigenvalues: raw.into_iter().map(|l| l.max(0.0)).collect(),
                clamped,
            })
        })
        .collect()
}

/// Log of one replication's bound on `P[‖S‖ ≤ δ]`.
fn replication_log_bound(s: &GramSpectrum, n: usize, delta: f64, gamma: f64) -> f64 {
    gamma * delta * delta * n as f64 + (PI - 2.0) / 2.0 * gamma * s.trace
        - 0.5
            * s.eigenvalues
                .iter()
                .map(|mu| (PI * gamma * mu).ln_1p())
                .sum::<f64>()
}

/// Certificate `T log 2 + log mean_j exp(bound_j)` with its delta-method error.
pub fn chernoff_from_spectra(
    spectra: &[GramSpectrum],
    n: usize,
    t_steps: usize,
    delta: f64,
    gamma: f64,
) -> Result<LowerBoundReport> {
    if spectra.is_empty() {
        return Err(Error::EmptyData("no Gram spectra".into()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "delta must be non-negative, got {delta}"
        )));
    }
    let logs: Vec<f64> = spectra
        .iter()
        .map(|s| replication_log_bound(s, n, delta, gamma))
        .collect();
    let lme = log_mean_exp(&logs);
    let weights: Vec<f64> = logs.iter().map(|v| (v - lme).exp()).collect();
    let stderr = sample_sd(&weights) / (weights.len() as f64).sqrt();
    Ok(LowerBoundReport::new(
        delta,
        t_steps as f64 * LN_2 + lme,
        stderr,
        BoundMethod::ChernoffCertificate,
        Some(gamma),
    ))
}

pub fn chernoff_certificate(
    spec: &EnsembleSpec,
    t_steps: usize,
    delta: f64,
    gamma: f64,
    n_mc: usize,
    stream: &RngStream,
) -> Result<LowerBoundReport> {
    let spectra = gram_spectra(spec, t_steps, n_mc, stream)?;
    chernoff_from_spectra(&spectra, spec.n, t_steps, delta, gamma)
}

/// Log-spaced grid of 33 values around `1 / mean ‖A‖_F²`, four per decade.
pub fn default_gamma_grid(spectra: &[GramSpectrum], t_steps: usize) -> Vec<f64> {
    let per_matrix = spectra.iter().map(|s| s.trace).sum::<f64>()
        / (spectra.len().max(1) * t_steps.max(1)) as f64;
    let base = if per_matrix > 0.0 {
        1.0 / per_matrix
    } else {
        1.0
    };
    (-16..=16)
        .map(|k| base * 10f64.powf(k as f64 / 4.0))
        .collect()
}

/// Best certificate over `gammas` (default grid if `None`), all evaluated on
/// the same replications. "Best" minimizes `estimate + 3σ`.
pub fn chernoff_gamma_search(
    spec: &EnsembleSpec,
    t_steps: usize,
    delta: f64,
    gammas: Option<&[f64]>,
    n_mc: usize,
    stream: &RngStream,
) -> Result<LowerBoundReport> {
    let spectra = gram_spectra(spec, t_steps, n_mc, stream)?;
    let grid = match gammas {
        Some(g) if !g.is_empty() => g.to_vec(),
        Some(_) => return Err(Error::InvalidInput("empty gamma grid".into())),
        None => default_gamma_grid(&spectra, t_steps),
    };
    let mut best: Option<LowerBoundReport> = None;
    for gamma in grid {
        let rep = chernoff_from_spectra(&spectra, spec.n, t_steps, delta, gamma)?;
        let score = rep.log_first_moment + 3.0 * rep.stderr;
        if best.is_none_or(|b| score < b.log_first_moment + 3.0 * b.stderr) {
            best = Some(rep);
        }
    }
    best.ok_or_else(|| Error::EmptyData("empty gamma grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Verdict;

    #[test]
    fn zero_gamma_gives_trivial_count() {
        let spec = EnsembleSpec::projection(6, 2);
        let rep = chernoff_certificate(&spec, 9, 0.1, 0.0, 20, &RngStream::new(1)).unwrap();
        assert!((rep.log_first_moment - 9.0 * LN_2).abs() < 1e-12);
        assert_eq!(rep.stderr, 0.0);
        assert_eq!(rep.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn certificate_is_monotone_in_delta() {
        let spec = EnsembleSpec::projection(6, 2);
        let spectra = gram_spectra(&spec, 9, 30, &RngStream::new(2)).unwrap();
        let mut prev = f64::INFINITY;
        for k in (0..=10).rev() {
            let delta = 0.1 * k as f64;
            let v = chernoff_from_spectra(&spectra, 6, 9, delta, 0.5)
                .unwrap()
                .log_first_moment;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn gram_spectrum_has_expected_trace() {
        // projections of rank r have ‖P‖_F² = r
        let spec = EnsembleSpec::projection(5, 2);
        let spectra = gram_spectra(&spec, 4, 3, &RngStream::new(3)).unwrap();
        for s in &spectra {
            assert!((s.trace - 8.0).abs() < 1e-10);
            assert!((s.eigenvalues.iter().sum::<f64>() - 8.0).abs() < 1e-9);
        }
    }
}

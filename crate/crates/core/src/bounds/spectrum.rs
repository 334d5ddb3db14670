//! Spectral sanity probe: the vectorized sample covariance of the
//! off-diagonal coordinates against a fitted Marchenko–Pastur law.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;

use crate::ensembles::{EnsembleSpec, RngStream};
use crate::error::{Error, Result};
use crate::signer::draw_stream;
use crate::stats::ks_one_sample;
use crate::symlin::{offdiagonal_pairs, symmetrize};

/// Marchenko–Pastur law of `(1/T) X Xᵀ` for an `N × T` matrix `X` with
/// i.i.d. entries of variance `scale`, `ratio = N / T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchenkoPastur {
    pub ratio: f64,
    pub scale: f64,
}

impl MarchenkoPastur {
    pub fn edges(&self) -> (f64, f64) {
        let s = self.ratio.sqrt();
        (
            self.scale * (1.0 - s).powi(2),
            self.scale * (1.0 + s).powi(2),
        )
    }

    /// Point mass at zero, `max(0, 1 − 1/ratio)`.
    pub fn atom(&self) -> f64 {
        (1.0 - 1.0 / self.ratio).max(0.0)
    }
}

/// Density of the absolutely continuous part.
pub fn marchenko_pastur_density(law: &MarchenkoPastur, x: f64) -> f64 {
    let (a, b) = law.edges();
    if x <= a || x >= b || x <= 0.0 {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * law.scale * law.ratio * x)
}

/// `P[X ≤ x]`, including the atom at zero.
pub fn marchenko_pastur_cdf(law: &MarchenkoPastur, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let (a, b) = law.edges();
    let atom = law.atom();
    if x <= a {
        return atom;
    }
    let upto = x.min(b);
    // x = c − h cos θ removes the square-root endpoint singularities:
    // √((b−x)(x−a)) dx = h² sin²θ dθ
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    let theta_end = ((c - upto) / h).clamp(-1.0, 1.0).acos();
    let steps = 400;
    let dt = theta_end / steps as f64;
    let mut acc = 0.0;
    for k in 0..steps {
        let th = (k as f64 + 0.5) * dt;
        let xv = c - h * th.cos();
        acc += h * h * th.sin().powi(2) / xv;
    }
    let cont = acc * dt / (2.0 * PI * law.scale * law.ratio);
    (atom + cont).min(1.0)
}

/// Result of [`gram_spectrum_probe`].
#[derive(Clone, Debug, PartialEq)]
pub struct GramProbe {
    /// All `N = n(n−1)/2` eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub law: MarchenkoPastur,
    pub ks_distance: f64,
    /// `(bin_center, density)` over all eigenvalues.
    pub histogram: Vec<(f64, f64)>,
}

/// Eigenvalues of `(n²/(rT)) Σ_i u_i u_iᵀ`, where `u_i` holds the `√2`-scaled
/// off-diagonal coordinates of `A_i`, compared with a Marchenko–Pastur law
/// of ratio `N/T` whose scale is fitted to the mean eigenvalue.
pub fn gram_spectrum_probe(
    spec: &EnsembleSpec,
    t_steps: usize,
    bins: usize,
    stream: &RngStream,
) -> Result<GramProbe> {
    let n = spec.n;
    if n < 2 || t_steps == 0 || bins == 0 {
        return Err(Error::InvalidInput(
            "need n >= 2, T >= 1 and at least one bin".into(),
        ));
    }
    let pairs = offdiagonal_pairs(n);
    let big_n = pairs.len();
    let mats = draw_stream(spec, t_steps, stream)?;
    let u = DMatrix::from_fn(big_n, t_steps, |p, t| {
        let (i, j) = pairs[p];
        std::f64::consts::SQRT_2 * mats[t].get(i, j)
    });
    let factor = (n * n) as f64 / (spec.rank() * t_steps) as f64;
    // the nonzero spectrum of U Uᵀ equals that of the smaller Uᵀ U
    let small = if t_steps <= big_n {
        u.transpose() * &u
    } else {
        &u * u.transpose()
    };
    let mut eigenvalues: Vec<f64> = symmetrize(&(small * factor))?.eigenvalues()?;
    eigenvalues.resize(big_n, 0.0);
    eigenvalues.sort_by(f64::total_cmp);

    let mean = eigenvalues.iter().sum::<f64>() / big_n as f64;
    let law = MarchenkoPastur {
        ratio: big_n as f64 / t_steps as f64,
        scale: mean,
    };
    let ks_distance = ks_one_sample(
        &eigenvalues,
        |x| marchenko_pastur_cdf(&law, x),
        |x| {
            if x <= 0.0 {
                0.0
            } else {
                marchenko_pastur_cdf(&law, x)
            }
        },
    );
    Ok(GramProbe {
        histogram: histogram(&eigenvalues, bins),
        eigenvalues,
        law,
        ks_distance,
    })
}

fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = values.len() as f64;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / (total * width)))
        .collect()
}

/// Writes `bin_center,density` rows.
pub fn write_histogram_csv(path: &Path, histogram: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_center", "density"])?;
    for (c, d) in histogram {
        w.write_record([format!("{c:.16e}"), format!("{d:.16e}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reaches_one_and_matches_density() {
        for ratio in [0.25, 1.0, 4.0] {
            let law = MarchenkoPastur { ratio, scale: 2.0 };
            let (_, b) = law.edges();
            assert!(
                (marchenko_pastur_cdf(&law, b) - 1.0).abs() < 1e-6,
                "{ratio}"
            );
            // midpoint-rule check of the density against the cdf
            let (a, b) = law.edges();
            let (x0, x1) = (a + 0.3 * (b - a), a + 0.6 * (b - a));
            let steps = 20_000;
            let dx = (x1 - x0) / steps as f64;
            let integral: f64 = (0..steps)
                .map(|k| marchenko_pastur_density(&law, x0 + (k as f64 + 0.5) * dx) * dx)
                .sum();
            let diff = marchenko_pastur_cdf(&law, x1) - marchenko_pastur_cdf(&law, x0);
            assert!(
                (integral - diff).abs() < 1e-6,
                "{ratio}: {integral} vs {diff}"
            );
        }
    }

    #[test]
    fn rank_deficient_probe_is_mostly_zero() {
        let spec = EnsembleSpec::projection(10, 3);
        let probe = gram_spectrum_probe(&spec, 5, 10, &RngStream::new(1)).unwrap();
        assert_eq!(probe.eigenvalues.len(), 45);
        let zeros = probe
            .eigenvalues
            .iter()
            .filter(|&&l| l.abs() < 1e-10)
            .count();
        assert_eq!(zeros, 40);
        assert!(probe.eigenvalues.iter().all(|&l| l >= -1e-10));
        let mass: f64 = probe.histogram.iter().map(|(_, d)| d).sum::<f64>()
            * (probe.histogram[1].0 - probe.histogram[0].0);
        assert!((mass - 1.0).abs() < 1e-12);
    }
}

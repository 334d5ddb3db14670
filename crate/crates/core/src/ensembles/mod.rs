//! Samplers for the random symmetric matrix ensembles fed to the signers.
//!
//! All samplers take a caller-provided generator; reproducibility comes from
//! deriving that generator from an [`RngStream`] address.

mod stream;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub use stream::{RngStream, CALIBRATION, DRAWS, SIGNS};

use crate::error::{Error, Result};
use crate::symlin::{symmetrize, SymMatrix};

/// Tolerance on the operator-norm support condition `‖A‖ ≤ 1`.
pub const SUPPORT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleKind {
    Goe,
    WignerConditioned,
    WishartNormalized,
    Projection,
    RademacherRankOne,
}

impl EnsembleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Goe => "goe",
            EnsembleKind::WignerConditioned => "wigner_conditioned",
            EnsembleKind::WishartNormalized => "wishart_normalized",
            EnsembleKind::Projection => "projection",
            EnsembleKind::RademacherRankOne => "rademacher_rank_one",
        }
    }

    /// Whether the `r` parameter is meaningful for this kind.
    pub fn uses_rank(self) -> bool {
        matches!(
            self,
            EnsembleKind::WishartNormalized | EnsembleKind::Projection
        )
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "goe" => EnsembleKind::Goe,
            "wigner_conditioned" | "wigner" => EnsembleKind::WignerConditioned,
            "wishart_normalized" | "wishart" => EnsembleKind::WishartNormalized,
            "projection" => EnsembleKind::Projection,
            "rademacher_rank_one" => EnsembleKind::RademacherRankOne,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown ensemble kind `{other}`"
                )))
            }
        })
    }
}

/// Law of a single independent entry `A_ij`, `i ≤ j`, of a Wigner-type matrix.
///
/// Implementors must return mean-zero draws. The moment conditions
/// (variance in `[C₁²/n, C₂²/n]`, bounded kurtosis) are the caller's
/// responsibility and are not checked.
pub trait EntryLaw {
    fn sample_entry<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> f64;
}

/// Built-in entry laws; every entry on and above the diagonal has the same variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntryDistribution {
    Gaussian { variance: f64 },
    Rademacher { variance: f64 },
}

impl EntryDistribution {
    pub fn variance(&self) -> f64 {
        match *self {
            EntryDistribution::Gaussian { variance }
            | EntryDistribution::Rademacher { variance } => variance,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EntryDistribution::Gaussian { .. } => "gaussian",
            EntryDistribution::Rademacher { .. } => "rademacher",
        }
    }

    /// `E a⁴ / (E a²)²`.
    pub fn kurtosis(&self) -> f64 {
        match self {
            EntryDistribution::Gaussian { .. } => 3.0,
            EntryDistribution::Rademacher { .. } => 1.0,
        }
    }
}

impl EntryLaw for EntryDistribution {
    fn sample_entry<R: Rng + ?Sized>(&self, _i: usize, _j: usize, rng: &mut R) -> f64 {
        match *self {
            EntryDistribution::Gaussian { variance } => {
                variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            EntryDistribution::Rademacher { variance } => {
                if rng.random::<bool>() {
                    variance.sqrt()
                } else {
                    -variance.sqrt()
                }
            }
        }
    }
}

/// Tagged description of a random-matrix distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    /// Rank parameter; required for `wishart_normalized` and `projection`.
    pub r: Option<usize>,
    /// GOE off-diagonal variance, or the entry variance for `wigner_conditioned`.
    /// `None` selects the kind's default.
    pub sigma2: Option<f64>,
    /// Entry family for `wigner_conditioned`.
    pub entry_law: EntryFamily,
    /// Post-multiplier applied after sampling (and after conditioning).
    pub scale: f64,
    pub norm_cap: f64,
    pub max_rejections: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryFamily {
    Gaussian,
    Rademacher,
}

impl FromStr for EntryFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EntryFamily::Gaussian),
            "rademacher" => Ok(EntryFamily::Rademacher),
            other => Err(Error::InvalidInput(format!("unknown entry law `{other}`"))),
        }
    }
}

impl EnsembleSpec {
    fn base(kind: EnsembleKind, n: usize) -> Self {
        EnsembleSpec {
            kind,
            n,
            r: None,
            sigma2: None,
            entry_law: EntryFamily::Gaussian,
            scale: 1.0,
            norm_cap: 1.0,
            max_rejections: 1000,
        }
    }

    /// `GOE(n, 1/n)`.
    pub fn goe(n: usize) -> Self {
        Self::base(EnsembleKind::Goe, n)
    }

    /// Wigner matrix with i.i.d. `N(0, 1/(9n))` entries conditioned on `‖A‖ ≤ 1`.
    pub fn wigner_conditioned(n: usize) -> Self {
        Self::base(EnsembleKind::WignerConditioned, n)
    }

    pub fn wishart_normalized(n: usize, r: usize) -> Self {
        Self {
            r: Some(r),
            ..Self::base(EnsembleKind::WishartNormalized, n)
        }
    }

    pub fn projection(n: usize, r: usize) -> Self {
        Self {
            r: Some(r),
            ..Self::base(EnsembleKind::Projection, n)
        }
    }

    pub fn rademacher_rank_one(n: usize) -> Self {
        Self::base(EnsembleKind::RademacherRankOne, n)
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = Some(sigma2);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_norm_cap(mut self, cap: f64) -> Self {
        self.norm_cap = cap;
        self
    }

    pub fn with_entry_law(mut self, law: EntryFamily) -> Self {
        self.entry_law = law;
        self
    }

    pub fn with_max_rejections(mut self, max: usize) -> Self {
        self.max_rejections = max;
        self
    }

    /// Variance actually used: the explicit value or the kind's default.
    pub fn effective_sigma2(&self) -> f64 {
        self.sigma2.unwrap_or_else(|| match self.kind {
            EnsembleKind::WignerConditioned => 1.0 / (9.0 * self.n as f64),
            _ => 1.0 / self.n as f64,
        })
    }

    pub fn entry_distribution(&self) -> EntryDistribution {
        let variance = self.effective_sigma2();
        match self.entry_law {
            EntryFamily::Gaussian => EntryDistribution::Gaussian { variance },
            EntryFamily::Rademacher => EntryDistribution::Rademacher { variance },
        }
    }

    /// Rank sequence value `r(n)`: `r` for low-rank kinds, `1` for rank-one, `n` otherwise.
    pub fn rank(&self) -> usize {
        match self.kind {
            EnsembleKind::WishartNormalized | EnsembleKind::Projection => self.r.unwrap_or(self.n),
            EnsembleKind::RademacherRankOne => 1,
            EnsembleKind::Goe | EnsembleKind::WignerConditioned => self.n,
        }
    }

    /// Whether samples satisfy `‖A‖ ≤ 1` by construction.
    pub fn bounded_by_one(&self) -> bool {
        match self.kind {
            EnsembleKind::Goe => false,
            EnsembleKind::WignerConditioned => self.norm_cap * self.scale <= 1.0,
            _ => self.scale <= 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if self.kind.uses_rank() {
            match self.r {
                Some(r) if (1..=self.n).contains(&r) => {}
                Some(r) => {
                    return Err(Error::InvalidInput(format!(
                        "rank r = {r} must satisfy 1 <= r <= n = {}",
                        self.n
                    )))
                }
                None => {
                    return Err(Error::InvalidInput(format!(
                        "{} requires a rank parameter r",
                        self.kind
                    )))
                }
            }
        }
        if let Some(s) = self.sigma2 {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "sigma2 must be positive, got {s}"
                )));
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.norm_cap > 0.0) {
            return Err(Error::InvalidInput(format!(
                "norm_cap must be positive, got {}",
                self.norm_cap
            )));
        }
        Ok(())
    }

    /// Draws one matrix from this ensemble.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SymMatrix> {
        self.validate()?;
        let n = self.n;
        let a = match self.kind {
            EnsembleKind::Goe => sample_goe(n, self.effective_sigma2(), rng),
            EnsembleKind::WignerConditioned => sample_wigner_conditioned(
                n,
                &self.entry_distribution(),
                self.norm_cap,
                self.max_rejections,
                rng,
            )?,
            EnsembleKind::WishartNormalized => sample_wishart_normalized(n, self.rank(), rng)?,
            EnsembleKind::Projection => sample_projection(n, self.rank(), rng)?,
            EnsembleKind::RademacherRankOne => sample_rademacher_rank_one(n, rng),
        };
        Ok(if self.scale == 1.0 {
            a
        } else {
            a.scaled(self.scale)
        })
    }

    /// Draws the matrix addressed by `stream` (a fresh generator per draw).
    pub fn sample_at(&self, stream: &RngStream) -> Result<SymMatrix> {
        self.sample(&mut stream.rng())
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(n={}", self.kind, self.n)?;
        if self.kind.uses_rank() {
            write!(f, ", r={}", self.rank())?;
        }
        if matches!(
            self.kind,
            EnsembleKind::Goe | EnsembleKind::WignerConditioned
        ) {
            write!(f, ", sigma2={}", self.effective_sigma2())?;
        }
        if self.scale != 1.0 {
            write!(f, ", scale={}", self.scale)?;
        }
        write!(f, ")")
    }
}

/// `GOE(n, σ²)`: off-diagonal `N(0, σ²)`, diagonal `N(0, 2σ²)`.
pub fn sample_goe<R: Rng + ?Sized>(n: usize, sigma2: f64, rng: &mut R) -> SymMatrix {
    let sd = sigma2.sqrt();
    let diag_sd = (2.0 * sigma2).sqrt();
    SymMatrix::from_upper_fn(n, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        if i == j {
            diag_sd * z
        } else {
            sd * z
        }
    })
}

/// Wigner matrix with independent entries on and above the diagonal drawn from `law`.
pub fn sample_wigner<L: EntryLaw, R: Rng + ?Sized>(n: usize, law: &L, rng: &mut R) -> SymMatrix {
    SymMatrix::from_upper_fn(n, |i, j| law.sample_entry(i, j, rng))
}

/// Rejection-samples a Wigner matrix until `‖A‖ ≤ norm_cap`.
pub fn sample_wigner_conditioned<L: EntryLaw, R: Rng + ?Sized>(
    n: usize,
    law: &L,
    norm_cap: f64,
    max_rejections: usize,
    rng: &mut R,
) -> Result<SymMatrix> {
    for _ in 0..=max_rejections {
        let a = sample_wigner(n, law, rng);
        if norm_cap.is_infinite() || a.op_norm()? <= norm_cap {
            return Ok(a);
        }
    }
    Err(Error::ConditioningFailure {
        attempts: max_rejections + 1,
        norm_cap,
    })
}

fn gaussian_block<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `G Gᵀ / ‖G Gᵀ‖` for an `n × r` standard Gaussian `G`.
pub fn sample_wishart_normalized<R: Rng + ?Sized>(
    n: usize,
    r: usize,
    rng: &mut R,
) -> Result<SymMatrix> {
    check_rank(n, r)?;
    let g = gaussian_block(n, r, rng);
    // ‖G Gᵀ‖ = λ_max(Gᵀ G), an r × r problem.
    let small = symmetrize(&(g.transpose() * &g))?;
    let top = small.eigenvalues()?[0];
    if !(top > 0.0) {
        return Err(Error::NumericalFailure(
            "Gaussian block has zero norm".into(),
        ));
    }
    symmetrize(&((&g * g.transpose()) / top))
}

/// Orthogonal projection onto a uniformly random `r`-dimensional subspace.
pub fn sample_projection<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<SymMatrix> {
    check_rank(n, r)?;
    if r == n {
        return Ok(SymMatrix::identity(n));
    }
    let q = gaussian_block(n, r, rng).qr().q();
    symmetrize(&(&q * q.transpose()))
}

/// `u uᵀ` with `u_i ∈ {±1/√n}` i.i.d.; the diagonal is exactly `1/n`.
pub fn sample_rademacher_rank_one<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let signs: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let inv = 1.0 / n as f64;
    SymMatrix::from_upper_fn(n, |i, j| signs[i] * signs[j] * inv)
}

fn check_rank(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::InvalidInput(format!(
            "rank r = {r} must satisfy 1 <= r <= n = {n}"
        )));
    }
    Ok(())
}

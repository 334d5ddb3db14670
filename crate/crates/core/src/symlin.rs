//! Dense real symmetric matrices and their spectral calculus.
//!
//! Every matrix function here goes through one eigendecomposition
//! `A = V diag(λ) Vᵀ`, so `exp`, `cosh`, `sinh` and all three norms share the
//! same backend. Potentials of the form `Tr cosh(αM)` are evaluated in the
//! log domain because `cosh` overflows once `α‖M‖ > ~709`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold used to decide numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Real symmetric `n × n` matrix. Entries are kept exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub operator: f64,
    pub frobenius: f64,
    pub nuclear: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFunction {
    Exp,
    Cosh,
    Sinh,
}

impl MatrixFunction {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            MatrixFunction::Exp => x.exp(),
            MatrixFunction::Cosh => x.cosh(),
            MatrixFunction::Sinh => x.sinh(),
        }
    }
}

/// Returns `(raw + rawᵀ) / 2`.
pub fn symmetrize(raw: &DMatrix<f64>) -> Result<SymMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            raw.nrows(),
            raw.ncols()
        )));
    }
    if raw.nrows() == 0 {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let n = raw.nrows();
    let mut data = raw.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (raw[(i, j)] + raw[(j, i)]);
            data[(i, j)] = avg;
            data[(j, i)] = avg;
        }
    }
    Ok(SymMatrix { data })
}

impl SymMatrix {
    pub fn from_dmatrix(raw: DMatrix<f64>) -> Result<Self> {
        symmetrize(&raw)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("rows of unequal length".into()));
        }
        symmetrize(&DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// Builds `Σ_k c_k v_k v_kᵀ` from the columns of `vectors`.
    pub fn from_spectrum(values: &[f64], vectors: &DMatrix<f64>) -> Result<Self> {
        if vectors.ncols() != values.len() {
            return Err(Error::InvalidDimension(format!(
                "{} values for {} vectors",
                values.len(),
                vectors.ncols()
            )));
        }
        let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, k| {
            vectors[(i, k)] * values[k]
        });
        symmetrize(&(scaled * vectors.transpose()))
    }

    /// Fills the matrix from an entry generator evaluated on `i <= j` only.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        SymMatrix { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// `self + c · other`, computed entrywise so symmetry is preserved exactly.
    pub fn add_scaled(&self, other: &SymMatrix, c: f64) -> SymMatrix {
        debug_assert_eq!(self.dim(), other.dim());
        let mut data = self.data.clone();
        data.zip_apply(&other.data, |a, b| *a += c * b);
        SymMatrix { data }
    }

    pub fn add_scaled_mut(&mut self, other: &SymMatrix, c: f64) {
        debug_assert_eq!(self.dim(), other.dim());
        self.data.zip_apply(&other.data, |a, b| *a += c * b);
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix {
            data: &self.data * c,
        }
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// Frobenius inner product `⟨A, B⟩ = Tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.data.dot(&other.data)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let vals = self.data.clone().symmetric_eigenvalues();
        let mut out: Vec<f64> = vals.iter().copied().collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(
                "eigensolver produced non-finite values".into(),
            ));
        }
        out.sort_by(|a, b| b.total_cmp(a));
        Ok(out)
    }

    pub fn eig(&self) -> Result<EigenPair> {
        eig_sym(self)
    }

    pub fn op_norm(&self) -> Result<f64> {
        Ok(operator_norm_of(&self.eigenvalues()?))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn norms(&self) -> Result<Norms> {
        norms(self)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenPair> {
    let n = a.dim();
    let max_iter = 1000 * n.max(1) * n.max(1);
    let decomposition = SymmetricEigen::try_new(a.data.clone(), f64::EPSILON, max_iter)
        .ok_or_else(|| {
            Error::NumericalFailure(format!("symmetric eigensolver did not converge (n = {n})"))
        })?;
    if decomposition.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "eigensolver produced non-finite values".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| decomposition.eigenvalues[j].total_cmp(&decomposition.eigenvalues[i]));
    let eigenvalues = order
        .iter()
        .map(|&k| decomposition.eigenvalues[k])
        .collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| decomposition.eigenvectors[(i, order[k])]);
    Ok(EigenPair {
        eigenvalues,
        eigenvectors,
    })
}

/// `V · diag(f(λ_i)) · Vᵀ`.
pub fn matrix_func(a: &SymMatrix, f: MatrixFunction) -> Result<SymMatrix> {
    let pair = eig_sym(a)?;
    matrix_func_from_eig(&pair, f)
}

pub fn matrix_func_from_eig(pair: &EigenPair, f: MatrixFunction) -> Result<SymMatrix> {
    let mapped: Vec<f64> = pair.eigenvalues.iter().map(|&l| f.apply(l)).collect();
    if let Some(l) = pair
        .eigenvalues
        .iter()
        .zip(&mapped)
        .find(|(_, v)| !v.is_finite())
        .map(|(l, _)| *l)
    {
        return Err(Error::Overflow(format!("{f:?}({l}) is not finite")));
    }
    SymMatrix::from_spectrum(&mapped, &pair.eigenvectors)
}

/// `log Σ_i cosh(α λ_i)` for the given eigenvalues, without overflow.
pub fn log_trace_cosh_from_eigenvalues(eigenvalues: &[f64], alpha: f64) -> f64 {
    // log Σ cosh(x_i) = logsumexp({x_i} ∪ {-x_i}) - log 2
    let peak = eigenvalues
        .iter()
        .map(|l| (alpha * l).abs())
        .fold(0.0_f64, f64::max);
    let sum: f64 = eigenvalues
        .iter()
        .map(|l| {
            let x = alpha * l;
            (x - peak).exp() + (-x - peak).exp()
        })
        .sum();
    peak + sum.ln() - std::f64::consts::LN_2
}

/// `log Tr cosh(α A)`.
pub fn trace_cosh_stable(a: &SymMatrix, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(log_trace_cosh_from_eigenvalues(&a.eigenvalues()?, alpha))
}

pub fn operator_norm_of(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max)
}

pub fn norms_from_eigenvalues(eigenvalues: &[f64]) -> Norms {
    Norms {
        operator: operator_norm_of(eigenvalues),
        frobenius: eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt(),
        nuclear: eigenvalues.iter().map(|l| l.abs()).sum(),
    }
}

pub fn norms(a: &SymMatrix) -> Result<Norms> {
    Ok(norms_from_eigenvalues(&a.eigenvalues()?))
}

/// Length of `symvec` output for an `n × n` matrix.
pub fn symvec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Diagonal entries first, then `√2 · A_ij` for `i < j` in row-major order.
pub fn symvec(a: &SymMatrix) -> DVector<f64> {
    let n = a.dim();
    let mut out = DVector::zeros(symvec_len(n));
    for i in 0..n {
        out[i] = a.get(i, i);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            out[k] = std::f64::consts::SQRT_2 * a.get(i, j);
            k += 1;
        }
    }
    out
}

/// Inverse of [`symvec`].
pub fn symmat(v: &DVector<f64>) -> Result<SymMatrix> {
    let len = v.len();
    // n(n+1)/2 = len  =>  n = (sqrt(8 len + 1) - 1) / 2
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    if len == 0 || symvec_len(n) != len {
        return Err(Error::InvalidDimension(format!(
            "length {len} is not a triangular number"
        )));
    }
    let mut data = DMatrix::zeros(n, n);
    for i in 0..n {
        data[(i, i)] = v[i];
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let x = v[k] / std::f64::consts::SQRT_2;
            data[(i, j)] = x;
            data[(j, i)] = x;
            k += 1;
        }
    }
    Ok(SymMatrix { data })
}

/// Index pairs `(i, j)` with `i < j` in the order [`symvec`] lays them out.
pub fn offdiagonal_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// Count of eigenvalues with `|λ| > rank_tol · max |λ|`.
pub fn numerical_rank(a: &SymMatrix, rank_tol: f64) -> Result<usize> {
    let eigs = a.eigenvalues()?;
    let cutoff = rank_tol * operator_norm_of(&eigs);
    if operator_norm_of(&eigs) == 0.0 {
        return Ok(0);
    }
    Ok(eigs.iter().filter(|l| l.abs() > cutoff).count())
}

/// Orthogonal projection onto the row space of `a` at relative tolerance `rank_tol`.
pub fn row_projection(a: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rank_tol must be positive, got {rank_tol}"
        )));
    }
    let n = a.dim();
    let pair = eig_sym(a)?;
    let scale = operator_norm_of(&pair.eigenvalues);
    if scale == 0.0 {
        return Ok(SymMatrix::zeros(n));
    }
    let cutoff = rank_tol * scale;
    let kept: Vec<usize> = (0..n)
        .filter(|&k| pair.eigenvalues[k].abs() > cutoff)
        .collect();
    if kept.len() == n {
        return Ok(SymMatrix::identity(n));
    }
    let basis = DMatrix::from_fn(n, kept.len(), |i, c| pair.eigenvectors[(i, kept[c])]);
    symmetrize(&(&basis * basis.transpose()))
}

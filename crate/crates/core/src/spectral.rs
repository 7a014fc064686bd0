//! Symmetric operators, their spectral family and the splitting
//! `H = H₁ ⊕ H₂` around a spectral gap `(-δ, 0)`.
//!
//! At matrix scale the spectral family is `E_μ = Σ_{λᵢ ≤ μ} vᵢvᵢᵀ`. The left
//! limit `E_{μ-}` is the strict version `Σ_{λᵢ < μ}`. The splitting takes
//! `H₁ = ran E_{-δ}` and `H₂ = ker E_{0-}`, so eigenvalues within `zero_tol`
//! of zero land on the `H₂` side.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::linalg;
use crate::prelude::*;
use crate::sampling;

/// Relative asymmetry accepted (and symmetrised away) by [`SymOperator::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("operator must be square with dim >= 1, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("operator is not symmetric: |a_ij - a_ji| = {defect:e} at ({row}, {col})")]
    Asymmetric { row: usize, col: usize, defect: f64 },
    #[error("operator has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("symmetric eigen-solver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("function is undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },
    #[error("gap (-{delta}, 0) contains eigenvalues {offending:?}")]
    GapViolation { delta: f64, offending: Vec<f64> },
    #[error("gap width must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("H1 is trivial (s = 0); the check needs s >= 1")]
    TrivialH1,
}

/// Dense symmetric real operator, the finite proxy for a self-adjoint `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOperator {
    matrix: DMatrix<f64>,
}

impl SymOperator {
    /// Validates and symmetrises `matrix`.
    ///
    /// Asymmetry up to `1e-12 · max|entry|` is averaged away; anything larger
    /// is rejected.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, SpectralError> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 {
            return Err(SpectralError::Shape { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                if !matrix[(i, j)].is_finite() {
                    return Err(SpectralError::NonFinite { row: i, col: j });
                }
            }
        }
        let scale = linalg::max_abs(&matrix);
        for i in 0..rows {
            for j in (i + 1)..cols {
                let defect = (matrix[(i, j)] - matrix[(j, i)]).abs();
                if defect > SYMMETRY_TOL * scale {
                    return Err(SpectralError::Asymmetric { row: i, col: j, defect });
                }
            }
        }
        let mut m = matrix;
        for i in 0..rows {
            for j in (i + 1)..cols {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self { matrix: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpectralError> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SpectralError::Shape { rows: n, cols });
        }
        Self::new(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self, SpectralError> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * u
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    zero_tol: f64,
}

/// Eigendecomposition of a symmetric operator.
///
/// Eigenvectors are sign-normalised so that the entry of largest magnitude is
/// positive; for diagonal input this returns the standard basis.
pub fn eigendecompose(op: &SymOperator) -> Result<SpectralDecomposition, SpectralError> {
    let n = op.dim();
    let max_iter = 1000 * n.max(1);
    let eig = SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, max_iter)
        .ok_or(SpectralError::NoConvergence { iterations: max_iter })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let mut pivot = 0;
        for k in 1..n {
            // Strict comparison with a small slack keeps the pivot choice
            // stable between nearly equal entries.
            if col[k].abs() > col[pivot].abs() * (1.0 + 1e-12) {
                pivot = k;
            }
        }
        if col[pivot] < 0.0 {
            col = -col;
        }
        eigenvectors.set_column(dst, &col);
    }
    let radius = eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        zero_tol: 1e-12 * radius.max(1.0),
    })
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Eigenvalues with `|λ| ≤ zero_tol` count as zero.
    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    pub fn with_zero_tol(mut self, zero_tol: f64) -> Self {
        self.zero_tol = zero_tol.abs();
        self
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// `‖VᵀV − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        linalg::max_abs_diff(&gram, &DMatrix::identity(n, n))
    }

    /// `‖M − Σ λᵢvᵢvᵢᵀ‖_max`.
    pub fn reconstruction_defect(&self, op: &SymOperator) -> f64 {
        linalg::max_abs_diff(&self.reconstruct(), op.matrix())
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * self.eigenvectors.transpose()
    }

    fn sum_projectors<P: Fn(f64) -> bool>(&self, keep: P) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            if keep(self.eigenvalues[i]) {
                let v = self.eigenvectors.column(i);
                out += v * v.transpose();
            }
        }
        out
    }
}

/// `E_μ = Σ_{λᵢ ≤ μ} vᵢvᵢᵀ`.
pub fn spectral_projection(dec: &SpectralDecomposition, mu: f64) -> DMatrix<f64> {
    dec.sum_projectors(|l| l <= mu)
}

/// The left limit `E_{μ-} = Σ_{λᵢ < μ} vᵢvᵢᵀ`.
pub fn spectral_projection_strict(dec: &SpectralDecomposition, mu: f64) -> DMatrix<f64> {
    dec.sum_projectors(|l| l < mu)
}

/// Functional calculus `f(M) = Σ f(λᵢ)vᵢvᵢᵀ`.
pub fn apply_function<F>(dec: &SpectralDecomposition, f: F) -> Result<SymOperator, SpectralError>
where
    F: Fn(f64) -> f64,
{
    let values: Vec<f64> = dec.eigenvalues.iter().map(|&l| f(l)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::Domain { eigenvalue: dec.eigenvalues[i] });
    }
    let d = DMatrix::from_diagonal(&DVector::from_vec(values));
    let m = &dec.eigenvectors * d * dec.eigenvectors.transpose();
    SymOperator::new(symmetrize(m))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// How the gap width δ of a split was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeltaSource {
    Given,
    AutoDetected,
    /// No eigenvalue below `-zero_tol`; δ defaults to 1 and `H₁ = {0}`.
    Degenerate,
}

/// The splitting `H = H₁ ⊕ H₂` with the operator parts and certified bounds.
///
/// All operators are stored as full `n × n` matrices acting on `ℝⁿ`, so for
/// example `l1 = L P₁` and `k` is `L₁⁻¹ P₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSplit {
    pub delta: f64,
    pub delta_source: DeltaSource,
    /// `-γ = inf σ(L)`, clamped at 0.
    pub gamma: f64,
    /// `dim H₁`.
    pub s: usize,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Eigenvectors as columns; the first `s` span `H₁`.
    pub basis: DMatrix<f64>,
    /// Eigenvalue of each basis column.
    pub eigenvalues: Vec<f64>,
    /// Basis indices with `|λ| ≤ zero_tol`.
    pub kernel: Vec<usize>,
    /// Eigenvalues in `[-zero_tol, η]`, the essential-spectrum proxy.
    pub cluster: Vec<usize>,
    pub cluster_eta: f64,
    pub zero_tol: f64,
}

/// Splits around the gap `(-δ, 0)`.
///
/// `H₁` collects eigenvalues `≤ -δ` (with `zero_tol` slack at the gap edge),
/// `H₂` collects eigenvalues `≥ -zero_tol`. Anything in between violates the
/// declared gap.
pub fn decompose_space(dec: &SpectralDecomposition, delta: f64) -> Result<SpaceSplit, SpectralError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(SpectralError::InvalidDelta(delta));
    }
    let ztol = dec.zero_tol;
    let offending: Vec<f64> = dec
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > -delta + ztol && l < -ztol)
        .collect();
    if !offending.is_empty() {
        return Err(SpectralError::GapViolation { delta, offending });
    }
    Ok(build_split(dec, delta, DeltaSource::Given))
}

/// Splits with δ taken as the distance from 0 to the largest eigenvalue below
/// `-zero_tol`. With no such eigenvalue the split is degenerate (`s = 0`).
pub fn decompose_space_auto(dec: &SpectralDecomposition) -> SpaceSplit {
    let ztol = dec.zero_tol;
    let top_negative = dec
        .eigenvalues
        .iter()
        .copied()
        .filter(|&l| l < -ztol)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    match top_negative {
        Some(l) => build_split(dec, -l, DeltaSource::AutoDetected),
        None => build_split(dec, 1.0, DeltaSource::Degenerate),
    }
}

fn build_split(dec: &SpectralDecomposition, delta: f64, source: DeltaSource) -> SpaceSplit {
    let n = dec.dim();
    let ztol = dec.zero_tol;
    let vals: Vec<f64> = dec.eigenvalues.iter().copied().collect();
    let s = vals.iter().filter(|&&l| l <= -delta + ztol).count();
    let source = if s == 0 && source == DeltaSource::AutoDetected {
        DeltaSource::Degenerate
    } else {
        source
    };
    let v = &dec.eigenvectors;
    let mut p1 = DMatrix::zeros(n, n);
    let mut p2 = DMatrix::zeros(n, n);
    let mut l1 = DMatrix::zeros(n, n);
    let mut l2 = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for (i, &lam) in vals.iter().enumerate() {
        let col = v.column(i);
        let outer = col * col.transpose();
        if i < s {
            l1 += &outer * lam;
            k += &outer * (1.0 / lam);
            p1 += outer;
        } else {
            l2 += &outer * lam;
            p2 += outer;
        }
    }
    let lmin = vals.first().copied().unwrap_or(0.0);
    let lmax = vals.last().copied().unwrap_or(0.0);
    let gamma = (-lmin).max(0.0);
    let eta = 1e-3 * (lmax - lmin);
    let kernel = (0..n).filter(|&i| vals[i].abs() <= ztol).collect();
    let cluster = (0..n).filter(|&i| vals[i] >= -ztol && vals[i] <= eta.max(ztol)).collect();
    SpaceSplit {
        delta,
        delta_source: source,
        gamma,
        s,
        p1,
        p2,
        l1,
        l2,
        k,
        basis: v.clone(),
        eigenvalues: vals,
        kernel,
        cluster,
        cluster_eta: eta,
        zero_tol: ztol,
    }
}

impl SpaceSplit {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_degenerate(&self) -> bool {
        self.s == 0
    }

    /// Orthonormal basis of `H₁` as columns.
    pub fn h1_basis(&self) -> DMatrix<f64> {
        self.basis.columns(0, self.s).clone_owned()
    }

    /// Orthonormal basis of `H₂` as columns, in ascending eigenvalue order.
    pub fn h2_basis(&self) -> DMatrix<f64> {
        self.basis.columns(self.s, self.dim() - self.s).clone_owned()
    }

    pub fn kernel_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, self.kernel.len());
        for (j, &i) in self.kernel.iter().enumerate() {
            out.set_column(j, &self.basis.column(i));
        }
        out
    }

    /// Re-assembles `L = L₁ + L₂`.
    pub fn operator(&self) -> DMatrix<f64> {
        &self.l1 + &self.l2
    }

    pub fn k_norm(&self) -> f64 {
        self.eigenvalues[..self.s]
            .iter()
            .fold(0.0f64, |acc, l| acc.max(1.0 / l.abs()))
    }

    /// `‖L₁‖ ≤ γ`.
    pub fn l1_norm(&self) -> f64 {
        self.eigenvalues[..self.s].iter().fold(0.0f64, |acc, l| acc.max(l.abs()))
    }

    pub fn project1(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.p1 * u
    }

    pub fn project2(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.p2 * u
    }

    /// `L(ε) = L₁P₁ + εP₂`.
    pub fn l_eps(&self, eps: f64) -> DMatrix<f64> {
        &self.l1 + &self.p2 * eps
    }

    /// `L(ε)⁻¹ = K + P₂/ε`.
    pub fn l_eps_inverse(&self, eps: f64) -> DMatrix<f64> {
        &self.k + &self.p2 * (1.0 / eps)
    }

    /// `(L₂ + ε)⁻¹` on `H₂`, extended by zero on `H₁`.
    pub fn l2_shift_inverse(&self, eps: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in self.s..n {
            let col = self.basis.column(i);
            out += (col * col.transpose()) * (1.0 / (self.eigenvalues[i] + eps));
        }
        out
    }

    /// Projection algebra defects: `max(‖P₁+P₂−I‖, ‖P₁P₂‖, ‖P₁²−P₁‖,
    /// ‖P₂²−P₂‖, ‖P₁ᵀ−P₁‖, ‖P₂ᵀ−P₂‖)` in the max norm.
    pub fn projection_defect(&self) -> f64 {
        let n = self.dim();
        let id = DMatrix::identity(n, n);
        let zero = DMatrix::zeros(n, n);
        [
            linalg::max_abs_diff(&(&self.p1 + &self.p2), &id),
            linalg::max_abs_diff(&(&self.p1 * &self.p2), &zero),
            linalg::max_abs_diff(&(&self.p1 * &self.p1), &self.p1),
            linalg::max_abs_diff(&(&self.p2 * &self.p2), &self.p2),
            linalg::max_abs_diff(&self.p1.transpose(), &self.p1),
            linalg::max_abs_diff(&self.p2.transpose(), &self.p2),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> SplitSummary {
        SplitSummary {
            dim: self.dim(),
            s: self.s,
            delta: self.delta,
            delta_source: self.delta_source,
            gamma: self.gamma,
            k_norm: self.k_norm(),
            kernel_dim: self.kernel.len(),
            cluster_size: self.cluster.len(),
            cluster_eta: self.cluster_eta,
            zero_tol: self.zero_tol,
            eigenvalues: self.eigenvalues.clone(),
        }
    }
}

/// Serializable digest of a [`SpaceSplit`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSummary {
    pub dim: usize,
    pub s: usize,
    pub delta: f64,
    pub delta_source: DeltaSource,
    pub gamma: f64,
    pub k_norm: f64,
    pub kernel_dim: usize,
    pub cluster_size: usize,
    pub cluster_eta: f64,
    pub zero_tol: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBoundReport {
    pub samples: usize,
    /// `min ⟨L₁u₁,u₁⟩ + (γ/δ²)‖L₁u₁‖²` over the samples.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Margin of `⟨L₁u₁,u₁⟩ ≥ −(γ/δ²)‖L₁u₁‖²` at one vector (projected onto `H₁`
/// first).
pub fn lower_bound_margin(split: &SpaceSplit, u: &DVector<f64>) -> f64 {
    let u1 = split.project1(u);
    let lu = &split.l1 * &u1;
    lu.dot(&u1) + split.gamma / (split.delta * split.delta) * lu.norm_squared()
}

/// Samples `H₁` vectors and checks the lower bound on `⟨L₁u₁, u₁⟩`.
pub fn lower_bound_check(
    split: &SpaceSplit,
    samples: usize,
    seed: u64,
) -> Result<LowerBoundReport, SpectralError> {
    if split.s == 0 {
        return Err(SpectralError::TrivialH1);
    }
    let mut rng = sampling::rng(seed);
    let n = split.dim();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let g = sampling::gaussian(&mut rng, n);
        let m = lower_bound_margin(split, &g);
        // NaN must surface as a failure
        if !(m >= worst) {
            worst = m;
        }
    }
    Ok(LowerBoundReport {
        samples,
        worst_margin: worst,
        passed: worst >= -1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> SymOperator {
        SymOperator::from_diagonal(values).unwrap()
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(SymOperator::new(m), Err(SpectralError::Asymmetric { .. })));
    }

    #[test]
    fn symmetrises_tiny_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-15, 1.0]);
        let op = SymOperator::new(m).unwrap();
        assert_eq!(op.matrix()[(0, 1)], op.matrix()[(1, 0)]);
    }

    #[test]
    fn rejects_empty_and_rectangular() {
        assert!(SymOperator::new(DMatrix::zeros(0, 0)).is_err());
        assert!(SymOperator::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn diagonal_eigendecomposition_is_standard_basis() {
        let dec = eigendecompose(&diag(&[-2.0, -1.0, 0.0, 1.0])).unwrap();
        assert_eq!(dec.eigenvalues().as_slice(), &[-2.0, -1.0, 0.0, 1.0]);
        assert_abs_diff_eq!(dec.eigenvectors().clone(), DMatrix::identity(4, 4), epsilon = 1e-15);
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let op = SymOperator::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let dec = eigendecompose(&op).unwrap();
        assert_abs_diff_eq!(dec.eigenvalues()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.eigenvalues()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn projection_prefix_and_limits() {
        let dec = eigendecompose(&diag(&[-2.0, -1.0, 0.0, 1.0])).unwrap();
        let e = spectral_projection(&dec, -0.5);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        assert_abs_diff_eq!(e, expected, epsilon = 1e-15);
        assert_eq!(spectral_projection(&dec, -3.0), DMatrix::zeros(4, 4));
        assert_abs_diff_eq!(spectral_projection(&dec, 1.0), DMatrix::identity(4, 4), epsilon = 1e-15);
        // the left limit at an eigenvalue drops that eigenvalue
        let strict = spectral_projection_strict(&dec, -1.0);
        assert_abs_diff_eq!(strict[(1, 1)], 0.0);
        assert_abs_diff_eq!(spectral_projection(&dec, -1.0)[(1, 1)], 1.0);
    }

    #[test]
    fn functional_calculus_square() {
        let dec = eigendecompose(&diag(&[-2.0, 3.0])).unwrap();
        let sq = apply_function(&dec, |t| t * t).unwrap();
        assert_abs_diff_eq!(
            sq.matrix().clone(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])),
            epsilon = 1e-14
        );
    }

    #[test]
    fn functional_calculus_domain_error_names_eigenvalue() {
        let dec = eigendecompose(&diag(&[-2.0, 3.0])).unwrap();
        let err = apply_function(&dec, |t| t.sqrt()).unwrap_err();
        assert_eq!(err, SpectralError::Domain { eigenvalue: -2.0 });
    }

    #[test]
    fn diagonal_split() {
        let dec = eigendecompose(&diag(&[-2.0, -1.0, 0.0, 0.5])).unwrap();
        let split = decompose_space(&dec, 1.0).unwrap();
        assert_eq!(split.s, 2);
        assert_eq!(split.gamma, 2.0);
        assert_abs_diff_eq!(split.k_norm(), 1.0);
        assert_eq!(split.kernel, vec![2]);
        assert!(split.projection_defect() < 1e-15);
    }

    #[test]
    fn gap_violation_lists_offenders() {
        let dec = eigendecompose(&diag(&[-2.0, -0.5, 1.0])).unwrap();
        match decompose_space(&dec, 1.0) {
            Err(SpectralError::GapViolation { offending, .. }) => assert_eq!(offending, vec![-0.5]),
            other => panic!("expected gap violation, got {other:?}"),
        }
    }

    #[test]
    fn nonnegative_spectrum_gives_degenerate_split() {
        let dec = eigendecompose(&diag(&[0.0, 1.0, 2.0])).unwrap();
        let split = decompose_space_auto(&dec);
        assert_eq!(split.s, 0);
        assert_eq!(split.delta_source, DeltaSource::Degenerate);
        assert_eq!(split.gamma, 0.0);
        assert!(lower_bound_check(&split, 10, 1).is_err());
    }

    #[test]
    fn auto_delta_is_top_negative_eigenvalue() {
        let dec = eigendecompose(&diag(&[-3.0, -0.7, 0.0, 2.0])).unwrap();
        let split = decompose_space_auto(&dec);
        assert_eq!(split.delta, 0.7);
        assert_eq!(split.delta_source, DeltaSource::AutoDetected);
        assert_eq!(split.s, 2);
    }

    #[test]
    fn lower_bound_scalar_instance() {
        let dec = eigendecompose(&diag(&[-2.0, -1.0, 0.0])).unwrap();
        let split = decompose_space(&dec, 1.0).unwrap();
        let u = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        // ⟨L₁u,u⟩ = -2, (γ/δ²)‖L₁u‖² = 2·4 = 8
        assert_abs_diff_eq!(lower_bound_margin(&split, &u), -2.0 + 8.0);
        assert_eq!(lower_bound_margin(&split, &DVector::zeros(3)), 0.0);
    }

    #[test]
    fn near_zero_eigenvalues_go_to_h2() {
        let dec = eigendecompose(&diag(&[-1.0, -1e-14, 0.0, 1.0])).unwrap();
        let split = decompose_space(&dec, 0.9).unwrap();
        assert_eq!(split.s, 1);
        assert_eq!(split.kernel, vec![1, 2]);
    }

    #[test]
    fn l_eps_inverse_inverts_l_eps() {
        let dec = eigendecompose(&diag(&[-2.0, -1.0, 0.0, 3.0])).unwrap();
        let split = decompose_space(&dec, 1.0).unwrap();
        let prod = split.l_eps(0.25) * split.l_eps_inverse(0.25);
        assert_abs_diff_eq!(prod, DMatrix::identity(4, 4), epsilon = 1e-14);
    }
}

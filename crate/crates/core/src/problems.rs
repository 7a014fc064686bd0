//! Synthetic test operators: random spectra `QΛQᵀ` and finite-difference
//! 1-D Schrödinger operators `−d²/dx² + V` with Dirichlet boundary.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::prelude::*;
use crate::sampling;
use crate::spectral::{self, SpectralError, SymOperator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("spectrum must be non-empty and finite")]
    InvalidSpectrum,
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("box length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("potential has {got} values for {expected} grid points")]
    PotentialLength { expected: usize, got: usize },
    #[error("shift index {index} out of range for dim {dim}")]
    ShiftIndex { index: usize, dim: usize },
}

/// Seeded Haar-distributed orthogonal matrix: QR of a Gaussian matrix with
/// column signs fixed by the diagonal of `R`.
pub fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = sampling::rng(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| sampling::gaussian(&mut rng, 1)[0]);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            let neg = -q.column(j);
            q.set_column(j, &neg);
        }
    }
    q
}

/// `Q diag(eigs) Qᵀ` for a seeded random orthogonal `Q`.
pub fn synthetic_spectrum(eigs: &[f64], seed: u64) -> Result<SymOperator, ProblemError> {
    if eigs.is_empty() || eigs.iter().any(|e| !e.is_finite()) {
        return Err(ProblemError::InvalidSpectrum);
    }
    let q = random_orthogonal(eigs.len(), seed);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    let m = &q * d * q.transpose();
    let sym = (&m + m.transpose()) * 0.5;
    Ok(SymOperator::new(sym)?)
}

/// Which eigenvalue is moved to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Shift {
    None,
    GroundState,
    /// Zero-based eigenvalue index; index `k` leaves `k` negative eigenvalues.
    Index(usize),
}

/// Potentials on the interior nodes `xᵢ = −L/2 + (i+1)·h`, `h = L/(n+1)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Potential {
    Zero,
    Values(Vec<f64>),
    /// `−depth` on `|x| ≤ width/2`, zero elsewhere.
    Well { depth: f64, width: f64 },
    /// `strength · x²`.
    Harmonic { strength: f64 },
}

pub fn grid_nodes(n: usize, length: f64) -> Vec<f64> {
    let h = length / (n + 1) as f64;
    (0..n).map(|i| -0.5 * length + (i + 1) as f64 * h).collect()
}

impl Potential {
    pub fn values(&self, n: usize, length: f64) -> Result<Vec<f64>, ProblemError> {
        let xs = grid_nodes(n, length);
        Ok(match self {
            Potential::Zero => vec![0.0; n],
            Potential::Values(v) => {
                if v.len() != n {
                    return Err(ProblemError::PotentialLength { expected: n, got: v.len() });
                }
                v.clone()
            }
            Potential::Well { depth, width } => {
                xs.iter().map(|x| if x.abs() <= 0.5 * width { -depth } else { 0.0 }).collect()
            }
            Potential::Harmonic { strength } => xs.iter().map(|x| strength * x * x).collect(),
        })
    }
}

/// `(1/h²)·tridiag(−1, 2, −1) + diag(V)` on `n` interior points of a box of
/// the given length, with the chosen eigenvalue shifted to 0.
pub fn schrodinger_1d(n: usize, length: f64, potential: &[f64], shift: Shift) -> Result<SymOperator, ProblemError> {
    if n < 3 {
        return Err(ProblemError::GridTooSmall(n));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(ProblemError::InvalidLength(length));
    }
    if potential.len() != n {
        return Err(ProblemError::PotentialLength { expected: n, got: potential.len() });
    }
    let h = length / (n + 1) as f64;
    let c = 1.0 / (h * h);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * c + potential[i];
        if i + 1 < n {
            m[(i, i + 1)] = -c;
            m[(i + 1, i)] = -c;
        }
    }
    let index = match shift {
        Shift::None => None,
        Shift::GroundState => Some(0),
        Shift::Index(k) => Some(k),
    };
    if let Some(k) = index {
        if k >= n {
            return Err(ProblemError::ShiftIndex { index: k, dim: n });
        }
        let dec = spectral::eigendecompose(&SymOperator::new(m.clone())?)?;
        let lam = dec.eigenvalues()[k];
        for i in 0..n {
            m[(i, i)] -= lam;
        }
    }
    Ok(SymOperator::new(m)?)
}

/// Closed-form Dirichlet eigenvalues `(4/h²)sin²(kπ/(2(n+1)))` for `V ≡ 0`.
pub fn dirichlet_eigenvalues(n: usize, length: f64) -> Vec<f64> {
    let h = length / (n + 1) as f64;
    (1..=n)
        .map(|k| {
            let s = (k as f64 * core::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
            4.0 / (h * h) * s * s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{decompose_space, eigendecompose};

    #[test]
    fn synthetic_round_trip() {
        let op = synthetic_spectrum(&[-2.0, -1.0, 0.0, 1.0], 7).unwrap();
        let dec = eigendecompose(&op).unwrap();
        for (a, b) in dec.eigenvalues().iter().zip([-2.0, -1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_spectrum_is_scalar() {
        let op = synthetic_spectrum(&[3.0; 4], 11).unwrap();
        let diff = op.matrix() - DMatrix::identity(4, 4) * 3.0;
        assert!(diff.abs().max() < 1e-13);
    }

    #[test]
    fn cluster_lands_in_h2() {
        let op = synthetic_spectrum(&[-1.0, 0.0, 1e-4, 2e-4, 3e-4, 1.0], 3).unwrap();
        let split = decompose_space(&eigendecompose(&op).unwrap(), 0.9).unwrap();
        assert_eq!(split.s, 1);
        assert!(split.cluster.len() >= 4);
    }

    #[test]
    fn free_schrodinger_closed_form() {
        let op = schrodinger_1d(5, 1.0, &[0.0; 5], Shift::None).unwrap();
        let dec = eigendecompose(&op).unwrap();
        for (a, b) in dec.eigenvalues().iter().zip(dirichlet_eigenvalues(5, 1.0)) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn ground_state_shift() {
        let op = schrodinger_1d(7, 2.0, &[0.0; 7], Shift::GroundState).unwrap();
        let dec = eigendecompose(&op).unwrap();
        assert!(dec.eigenvalues()[0].abs() < 1e-12);
    }

    #[test]
    fn index_shift_with_well() {
        let n = 40;
        let v = Potential::Well { depth: 200.0, width: 0.5 }.values(n, 2.0).unwrap();
        let op = schrodinger_1d(n, 2.0, &v, Shift::Index(2)).unwrap();
        let dec = eigendecompose(&op).unwrap();
        let ev = dec.eigenvalues();
        assert!(ev[0] < 0.0 && ev[1] < 0.0);
        assert!(ev[2].abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(schrodinger_1d(2, 1.0, &[0.0; 2], Shift::None).is_err());
        assert!(schrodinger_1d(3, 1.0, &[0.0; 4], Shift::None).is_err());
        assert!(schrodinger_1d(3, 1.0, &[0.0; 3], Shift::Index(3)).is_err());
        assert!(synthetic_spectrum(&[], 0).is_err());
    }
}

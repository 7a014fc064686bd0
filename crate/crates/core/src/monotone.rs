//! Nonlinear maps with declared regularity, sampled verification of the
//! declarations and nonlinear resolvents `b ↦ u` solving `A(u) + λu = b`.

use alloc::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::newton::{self, NewtonOptions};
use crate::prelude::*;
use crate::sampling;

/// Margin below which a sampled inequality counts as violated.
pub const CHECK_MARGIN: f64 = -1e-10;
/// Default ball radius for sampled checks.
pub const DEFAULT_RADIUS: f64 = 10.0;
/// Default number of sampled pairs.
pub const DEFAULT_SAMPLES: usize = 1000;

const MAX_WITNESSES: usize = 8;

/// Regularity class a map claims for itself.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegularityClass {
    General,
    Monotone,
    StronglyMonotone(f64),
    Cocoercive(f64),
    QuasiMonotoneSufficient,
}

impl RegularityClass {
    /// Monotone, strongly monotone and cocoercive maps are all monotone.
    pub fn is_monotone(&self) -> bool {
        matches!(self, Self::Monotone | Self::StronglyMonotone(_) | Self::Cocoercive(_))
    }

    pub fn cocoercivity(&self) -> Option<f64> {
        match self {
            Self::Cocoercive(a) => Some(*a),
            _ => None,
        }
    }
}

/// Declared growth of `‖N(u)‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Growth {
    /// `‖N(u)‖ ≤ M`.
    Bounded(f64),
    /// `‖N(u)‖ ≤ coeff · ‖u‖^exponent` with `exponent < 1`.
    Sublinear { coeff: f64, exponent: f64 },
    /// `‖N(u)‖ ≤ a + b‖u‖`.
    Linear { a: f64, b: f64 },
    Unspecified,
}

impl Growth {
    /// Upper bound for `sup_{‖u‖ ≤ r} ‖N(u)‖`, if the declaration gives one.
    pub fn bound(&self, r: f64) -> Option<f64> {
        match *self {
            Growth::Bounded(m) => Some(m),
            Growth::Sublinear { coeff, exponent } => Some(coeff * r.max(0.0).powf(exponent)),
            Growth::Linear { a, b } => Some(a + b * r),
            Growth::Unspecified => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Growth::Bounded(_))
    }
}

/// Which sufficient condition certifies quasi-monotonicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QuasiMonotoneVerdict {
    Monotonicity,
    /// Continuity acknowledged by the map; in finite dimension weak and norm
    /// convergence coincide, so continuous maps are strongly continuous.
    StrongContinuity,
    /// Nonnegative radial factor times a metric projection.
    RadialStructure,
    Unknown,
}

/// A nonlinearity `N: ℝⁿ → ℝⁿ` with self-declared metadata.
///
/// Declarations are trusted by the solver and spot-checked by the `check_*`
/// functions below.
pub trait NonlinearMap: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &DVector<f64>) -> DVector<f64>;

    /// Analytic Jacobian, if available.
    fn jacobian(&self, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn declared_class(&self) -> RegularityClass {
        RegularityClass::General
    }

    fn growth(&self) -> Growth {
        Growth::Unspecified
    }

    fn zero_at_zero(&self) -> bool {
        false
    }

    /// Structural quasi-monotonicity certificate beyond the declared class.
    fn structural_certificate(&self) -> Option<QuasiMonotoneVerdict> {
        None
    }
}

macro_rules! forward_map {
    ($($ptr:ty),*) => {$(
        impl<T: NonlinearMap + ?Sized> NonlinearMap for $ptr {
            fn dim(&self) -> usize { (**self).dim() }
            fn eval(&self, u: &DVector<f64>) -> DVector<f64> { (**self).eval(u) }
            fn jacobian(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> { (**self).jacobian(u) }
            fn declared_class(&self) -> RegularityClass { (**self).declared_class() }
            fn growth(&self) -> Growth { (**self).growth() }
            fn zero_at_zero(&self) -> bool { (**self).zero_at_zero() }
            fn structural_certificate(&self) -> Option<QuasiMonotoneVerdict> {
                (**self).structural_certificate()
            }
        }
    )*};
}

forward_map!(&T, Box<T>, Arc<T>);

/// `N ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroMap {
    pub dim: usize,
}

impl NonlinearMap for ZeroMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _u: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn jacobian(&self, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(self.dim, self.dim))
    }
    fn declared_class(&self) -> RegularityClass {
        RegularityClass::Monotone
    }
    fn growth(&self) -> Growth {
        Growth::Bounded(0.0)
    }
    fn zero_at_zero(&self) -> bool {
        true
    }
}

/// `N(u) = Mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    class: RegularityClass,
}

impl LinearMap {
    /// Class is derived from the symmetric part: positive semidefinite with
    /// largest eigenvalue `μ > 0` gives cocoercivity `1/μ` when the matrix is
    /// symmetric, plain monotonicity otherwise.
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert!(matrix.is_square(), "linear map must be square");
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigenvalues();
        let lo = eig.iter().fold(f64::INFINITY, |a, x| a.min(*x));
        let hi = eig.iter().fold(f64::NEG_INFINITY, |a, x| a.max(*x));
        let symmetric = linalg::max_abs_diff(&matrix, &sym) <= 1e-12 * linalg::max_abs(&matrix);
        let class = if lo < -1e-12 * hi.abs().max(1.0) {
            RegularityClass::General
        } else if symmetric && hi > 0.0 {
            RegularityClass::Cocoercive(1.0 / hi)
        } else {
            RegularityClass::Monotone
        };
        Self { matrix, class }
    }

    /// `βI`. For `β > 0` this is `1/β`-cocoercive.
    pub fn scaled_identity(dim: usize, beta: f64) -> Self {
        let class = if beta > 0.0 {
            RegularityClass::Cocoercive(1.0 / beta)
        } else if beta == 0.0 {
            RegularityClass::Monotone
        } else {
            RegularityClass::General
        };
        Self { matrix: DMatrix::identity(dim, dim) * beta, class }
    }

    pub fn with_class(mut self, class: RegularityClass) -> Self {
        self.class = class;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl NonlinearMap for LinearMap {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * u
    }
    fn jacobian(&self, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }
    fn declared_class(&self) -> RegularityClass {
        self.class
    }
    fn growth(&self) -> Growth {
        Growth::Linear { a: 0.0, b: linalg::op_norm(&self.matrix) }
    }
    fn zero_at_zero(&self) -> bool {
        true
    }
}

type EvalFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Closure-backed map with caller-supplied metadata.
#[derive(Clone)]
pub struct FnMap {
    dim: usize,
    f: Arc<EvalFn>,
    jac: Option<Arc<JacFn>>,
    class: RegularityClass,
    growth: Growth,
    zero_at_zero: bool,
}

impl core::fmt::Debug for FnMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnMap")
            .field("dim", &self.dim)
            .field("class", &self.class)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl FnMap {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            f: Arc::new(f),
            jac: None,
            class: RegularityClass::General,
            growth: Growth::Unspecified,
            zero_at_zero: false,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    pub fn with_class(mut self, class: RegularityClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_growth(mut self, growth: Growth) -> Self {
        self.growth = growth;
        self
    }

    pub fn with_zero_at_zero(mut self, zero: bool) -> Self {
        self.zero_at_zero = zero;
        self
    }
}

impl NonlinearMap for FnMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(u)
    }
    fn jacobian(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(u))
    }
    fn declared_class(&self) -> RegularityClass {
        self.class
    }
    fn growth(&self) -> Growth {
        self.growth
    }
    fn zero_at_zero(&self) -> bool {
        self.zero_at_zero
    }
}

/// A sampled pair violating the checked inequality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Witness {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonotonicityReport {
    pub samples_tested: usize,
    pub worst_margin: f64,
    pub passed: bool,
    /// Up to eight violating pairs, in sample order.
    pub witnesses: Vec<Witness>,
}

/// Runs `margin(ΔN, Δu)` over seeded pairs in `B(0, radius)`.
pub fn check_pairs<N, M>(n: &N, samples: usize, seed: u64, radius: f64, margin: M) -> MonotonicityReport
where
    N: NonlinearMap + ?Sized,
    M: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let pairs = sampling::ball_pairs(seed, n.dim(), radius, samples);
    check_pair_list(n, &pairs, margin)
}

/// Like [`check_pairs`] on an explicit pair list.
pub fn check_pair_list<N, M>(n: &N, pairs: &[(DVector<f64>, DVector<f64>)], margin: M) -> MonotonicityReport
where
    N: NonlinearMap + ?Sized,
    M: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let mut worst = f64::INFINITY;
    let mut witnesses = Vec::new();
    let mut passed = true;
    for (u, v) in pairs {
        let dn = n.eval(u) - n.eval(v);
        let du = u - v;
        let m = margin(&dn, &du);
        if !(m >= worst) {
            worst = m;
        }
        if !(m >= CHECK_MARGIN) {
            passed = false;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(Witness { u: linalg::to_vec(u), v: linalg::to_vec(v), margin: m });
            }
        }
    }
    if pairs.is_empty() {
        worst = 0.0;
    }
    MonotonicityReport { samples_tested: pairs.len(), worst_margin: worst, passed, witnesses }
}

/// `⟨N(u)−N(u′), u−u′⟩ ≥ 0` on sampled pairs.
pub fn check_monotone<N: NonlinearMap + ?Sized>(n: &N, samples: usize, seed: u64, radius: f64) -> MonotonicityReport {
    check_pairs(n, samples, seed, radius, |dn, du| dn.dot(du))
}

/// `⟨N(u)−N(u′), u−u′⟩ ≥ α‖N(u)−N(u′)‖²` on sampled pairs.
pub fn check_cocoercive<N: NonlinearMap + ?Sized>(
    n: &N,
    alpha: f64,
    samples: usize,
    seed: u64,
    radius: f64,
) -> MonotonicityReport {
    check_pairs(n, samples, seed, radius, |dn, du| dn.dot(du) - alpha * dn.norm_squared())
}

/// `⟨N(u)−N(u′), u−u′⟩ ≥ C‖u−u′‖²` on sampled pairs.
pub fn check_strong_monotone<N: NonlinearMap + ?Sized>(
    n: &N,
    c: f64,
    samples: usize,
    seed: u64,
    radius: f64,
) -> MonotonicityReport {
    check_pairs(n, samples, seed, radius, |dn, du| dn.dot(du) - c * du.norm_squared())
}

/// `‖N(u)−N(u′)‖ ≤ lip·‖u−u′‖` on sampled pairs.
pub fn check_lipschitz<N: NonlinearMap + ?Sized>(
    n: &N,
    lip: f64,
    samples: usize,
    seed: u64,
    radius: f64,
) -> MonotonicityReport {
    check_pairs(n, samples, seed, radius, |dn, du| lip * du.norm() - dn.norm())
}

/// Certifies quasi-monotonicity through a sufficient condition. Never
/// returns a negative verdict.
pub fn classify_quasi_monotone<N: NonlinearMap + ?Sized>(n: &N) -> QuasiMonotoneVerdict {
    if n.declared_class().is_monotone() {
        return QuasiMonotoneVerdict::Monotonicity;
    }
    if let Some(v) = n.structural_certificate() {
        return v;
    }
    if n.declared_class() == RegularityClass::QuasiMonotoneSufficient {
        return QuasiMonotoneVerdict::StrongContinuity;
    }
    QuasiMonotoneVerdict::Unknown
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonotoneError {
    #[error("resolvent parameter must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("resolvent tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("resolvent requires a map declared monotone, got {0:?}")]
    NotMonotone(RegularityClass),
    #[error("dimension mismatch: map has dim {expected}, vector has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("resolvent did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
}

/// Iteration budget of the averaged fallback iteration.
pub const AVERAGED_BUDGET: usize = 200_000;

/// Solves `A(u) + λu = b` starting from `b/(1+λ)`.
pub fn resolvent<N: NonlinearMap + ?Sized>(
    a: &N,
    lambda: f64,
    b: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, MonotoneError> {
    resolvent_from(a, lambda, b, b / (1.0 + lambda), tol)
}

/// [`resolvent`] from a caller-chosen start.
///
/// Damped Newton runs first. If it stalls and `A` is declared
/// `α`-cocoercive, the averaged iteration `u ← u − τ(A(u)+λu−b)` with
/// `τ = min(α, 1/λ)/2` takes over; it contracts with factor `1 − τλ`.
pub fn resolvent_from<N: NonlinearMap + ?Sized>(
    a: &N,
    lambda: f64,
    b: &DVector<f64>,
    x0: DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, MonotoneError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(MonotoneError::InvalidLambda(lambda));
    }
    if !(tol > 0.0) {
        return Err(MonotoneError::InvalidTolerance(tol));
    }
    let class = a.declared_class();
    if !class.is_monotone() {
        return Err(MonotoneError::NotMonotone(class));
    }
    for len in [b.len(), x0.len()] {
        if len != a.dim() {
            return Err(MonotoneError::Dimension { expected: a.dim(), got: len });
        }
    }
    let residual = |u: &DVector<f64>| a.eval(u) + u * lambda - b;
    let jacobian = |u: &DVector<f64>| {
        a.jacobian(u).map(|mut j| {
            for i in 0..j.nrows() {
                j[(i, i)] += lambda;
            }
            j
        })
    };
    let opts = NewtonOptions { tol, max_iter: 200, ..Default::default() };
    let last = match newton::damped_newton(residual, jacobian, x0, &opts) {
        Ok(out) => return Ok(out.x),
        Err(out) => out,
    };
    let Some(alpha) = class.cocoercivity() else {
        return Err(MonotoneError::NonConvergence { residual: last.residual, iterations: last.iterations });
    };
    let tau = 0.5 * alpha.min(1.0 / lambda);
    let mut u = if last.residual.is_finite() { last.x } else { b / (1.0 + lambda) };
    let mut r = residual(&u);
    for it in 0..AVERAGED_BUDGET {
        let rn = r.norm();
        if rn <= tol {
            return Ok(u);
        }
        if !rn.is_finite() {
            return Err(MonotoneError::NonConvergence { residual: rn, iterations: it });
        }
        u -= &r * tau;
        r = residual(&u);
    }
    Err(MonotoneError::NonConvergence { residual: r.norm(), iterations: AVERAGED_BUDGET })
}

/// `u ↦ R_λ(u)` packaged as a map, for sampled checks on resolvents.
pub struct Resolvent<'a, N: NonlinearMap + ?Sized> {
    pub map: &'a N,
    pub lambda: f64,
    pub tol: f64,
}

impl<N: NonlinearMap + ?Sized> NonlinearMap for Resolvent<'_, N> {
    fn dim(&self) -> usize {
        self.map.dim()
    }
    fn eval(&self, b: &DVector<f64>) -> DVector<f64> {
        resolvent(self.map, self.lambda, b, self.tol)
            .unwrap_or_else(|_| DVector::from_element(b.len(), f64::NAN))
    }
    fn declared_class(&self) -> RegularityClass {
        RegularityClass::Cocoercive(self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> FnMap {
        FnMap::new(1, |u| u.map(|x| x * x * x))
            .with_jacobian(|u| DMatrix::from_element(1, 1, 3.0 * u[0] * u[0]))
            .with_class(RegularityClass::Monotone)
            .with_zero_at_zero(true)
    }

    #[test]
    fn identity_is_monotone_and_cocoercive() {
        let id = LinearMap::scaled_identity(3, 1.0);
        assert!(check_monotone(&id, 200, 1, 10.0).passed);
        assert!(check_cocoercive(&id, 1.0, 200, 1, 10.0).passed);
    }

    #[test]
    fn negative_identity_fails_with_witness() {
        let neg = LinearMap::scaled_identity(3, -1.0);
        let report = check_monotone(&neg, 50, 2, 10.0);
        assert!(!report.passed);
        assert!(!report.witnesses.is_empty());
        assert!(report.worst_margin < 0.0);
    }

    #[test]
    fn half_identity_cocoercive_two() {
        let half = LinearMap::scaled_identity(4, 0.5);
        assert!(check_cocoercive(&half, 2.0, 300, 3, 10.0).passed);
        assert_eq!(half.declared_class(), RegularityClass::Cocoercive(2.0));
    }

    #[test]
    fn strong_monotonicity_constants() {
        let two = LinearMap::scaled_identity(2, 2.0);
        assert!(check_strong_monotone(&two, 2.0, 200, 4, 10.0).passed);
        let id = LinearMap::scaled_identity(2, 1.0);
        assert!(!check_strong_monotone(&id, 1.5, 200, 4, 10.0).passed);
    }

    #[test]
    fn nan_margin_counts_as_failure() {
        let bad = FnMap::new(2, |u| u.map(|_| f64::NAN));
        let r = check_monotone(&bad, 10, 0, 1.0);
        assert!(!r.passed);
        assert!(r.worst_margin.is_nan());
    }

    #[test]
    fn resolvent_of_identity_halves() {
        let id = LinearMap::scaled_identity(3, 1.0);
        let b = DVector::from_vec(vec![1.0, -4.0, 2.5]);
        let u = resolvent(&id, 1.0, &b, 1e-12).unwrap();
        assert!((u - &b / 2.0).norm() < 1e-12);
    }

    #[test]
    fn resolvent_of_cube() {
        let u = resolvent(&cube(), 1.0, &DVector::from_vec(vec![2.0]), 1e-13).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolvent_rejects_bad_input() {
        let id = LinearMap::scaled_identity(2, 1.0);
        let b = DVector::zeros(2);
        assert_eq!(resolvent(&id, 0.0, &b, 1e-8), Err(MonotoneError::InvalidLambda(0.0)));
        let general = FnMap::new(2, |u| u.clone());
        assert!(matches!(resolvent(&general, 1.0, &b, 1e-8), Err(MonotoneError::NotMonotone(_))));
    }

    #[test]
    fn averaged_fallback_converges() {
        // No Jacobian and a kink at 0 to make Newton's job harder.
        let relu = FnMap::new(1, |u| u.map(|x| x.max(0.0)))
            .with_class(RegularityClass::Cocoercive(1.0));
        let u = resolvent_from(&relu, 0.5, &DVector::from_vec(vec![3.0]), DVector::from_vec(vec![-50.0]), 1e-12)
            .unwrap();
        assert!((u[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn quasi_monotone_classification() {
        assert_eq!(classify_quasi_monotone(&cube()), QuasiMonotoneVerdict::Monotonicity);
        let opaque = FnMap::new(2, |u| u.map(f64::sin));
        assert_eq!(classify_quasi_monotone(&opaque), QuasiMonotoneVerdict::Unknown);
        let declared = opaque.with_class(RegularityClass::QuasiMonotoneSufficient);
        assert_eq!(classify_quasi_monotone(&declared), QuasiMonotoneVerdict::StrongContinuity);
    }

    #[test]
    fn linear_map_class_from_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert_eq!(LinearMap::new(m).declared_class(), RegularityClass::Cocoercive(0.5));
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert_eq!(LinearMap::new(rot).declared_class(), RegularityClass::Monotone);
        let neg = DMatrix::from_row_slice(1, 1, &[-1.0]);
        assert_eq!(LinearMap::new(neg).declared_class(), RegularityClass::General);
    }
}

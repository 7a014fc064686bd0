//! Concrete nonlinearities: the radial map `N(u) = φ(‖u‖)P_B(u)` built on
//! the metric projection onto the closed unit ball, and the Nemytskii
//! (superposition) map `N(u)ᵢ = fᵢ(uᵢ)` on a grid.

use alloc::sync::Arc;
use core::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::monotone::{Growth, NonlinearMap, QuasiMonotoneVerdict, RegularityClass};
use crate::prelude::*;

type ScalarClosure = dyn Fn(f64) -> f64 + Send + Sync;

/// Scalar functions `ℝ → ℝ` used as radial factors and integrands.
#[derive(Clone)]
pub enum ScalarFn {
    Constant(f64),
    /// `slope · t`.
    Linear { slope: f64 },
    /// `slope · t + amplitude · sin t`.
    SinPerturbed { slope: f64, amplitude: f64 },
    /// `scale · arctan t`.
    Arctan { scale: f64 },
    /// `coeff · sign(t)|t|^exponent`.
    Power { coeff: f64, exponent: f64 },
    /// `Σ cₖ tᵏ`, lowest degree first.
    Polynomial { coefficients: Vec<f64> },
    Custom {
        f: Arc<ScalarClosure>,
        df: Option<Arc<ScalarClosure>>,
    },
}

impl core::fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Linear { slope } => write!(f, "Linear {{ slope: {slope} }}"),
            Self::SinPerturbed { slope, amplitude } => {
                write!(f, "SinPerturbed {{ slope: {slope}, amplitude: {amplitude} }}")
            }
            Self::Arctan { scale } => write!(f, "Arctan {{ scale: {scale} }}"),
            Self::Power { coeff, exponent } => write!(f, "Power {{ coeff: {coeff}, exponent: {exponent} }}"),
            Self::Polynomial { coefficients } => write!(f, "Polynomial {{ coefficients: {coefficients:?} }}"),
            Self::Custom { df, .. } => write!(f, "Custom {{ derivative: {} }}", df.is_some()),
        }
    }
}

impl ScalarFn {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom { f: Arc::new(f), df: None }
    }

    pub fn custom_with_derivative<F, D>(f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom { f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Linear { slope } => slope * t,
            Self::SinPerturbed { slope, amplitude } => slope * t + amplitude * t.sin(),
            Self::Arctan { scale } => scale * t.atan(),
            Self::Power { coeff, exponent } => {
                if t == 0.0 {
                    0.0
                } else {
                    coeff * t.signum() * t.abs().powf(*exponent)
                }
            }
            Self::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Self::Custom { f, .. } => f(t),
        }
    }

    /// Derivative where known analytically.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match self {
            Self::Constant(_) => Some(0.0),
            Self::Linear { slope } => Some(*slope),
            Self::SinPerturbed { slope, amplitude } => Some(slope + amplitude * t.cos()),
            Self::Arctan { scale } => Some(scale / (1.0 + t * t)),
            Self::Power { coeff, exponent } => {
                if t == 0.0 && *exponent < 1.0 {
                    None
                } else {
                    Some(coeff * exponent * t.abs().powf(exponent - 1.0))
                }
            }
            Self::Polynomial { coefficients } => Some(
                coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c),
            ),
            Self::Custom { df, .. } => df.as_ref().map(|d| d(t)),
        }
    }

    /// Derivative, falling back to a central difference.
    pub fn derivative_or_fd(&self, t: f64) -> f64 {
        self.derivative(t).unwrap_or_else(|| {
            let h = 1e-6 * t.abs().max(1.0);
            (self.eval(t + h) - self.eval(t - h)) / (2.0 * h)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearityError {
    #[error("radial factor phi is invalid at t = {t}: phi = {value}")]
    RadialFactor { t: f64, value: f64 },
    #[error("projection radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("integrand at node {node} rejected: {reason}")]
    Integrand { node: usize, reason: String },
    #[error("alpha and beta must be positive, got alpha = {alpha}, beta = {beta}")]
    InvalidBounds { alpha: f64, beta: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Nearest point of the closed ball `B(0, radius)`.
pub fn metric_projection(u: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = u.norm();
    if n <= radius {
        u.clone()
    } else {
        u * (radius / n)
    }
}

/// Sample points where `φ` is validated at construction.
fn radial_sample_points() -> impl Iterator<Item = f64> {
    (0..=200).map(|k| k as f64 * 0.01).chain((1..=80).map(|k| 2.0 * 10f64.powf(k as f64 / 20.0)))
}

/// `N(u) = φ(‖u‖)P_B(u)`, with `P_B` the projection onto the closed unit
/// ball.
#[derive(Debug, Clone)]
pub struct RadialMap {
    dim: usize,
    phi: ScalarFn,
}

impl RadialMap {
    /// Rejects `φ` that is negative or non-finite at any sampled `t ∈ [0, 2·10⁴]`.
    pub fn new(dim: usize, phi: ScalarFn) -> Result<Self, NonlinearityError> {
        for t in radial_sample_points() {
            let value = phi.eval(t);
            if !(value >= 0.0 && value.is_finite()) {
                return Err(NonlinearityError::RadialFactor { t, value });
            }
        }
        Ok(Self { dim, phi })
    }

    pub fn phi(&self) -> &ScalarFn {
        &self.phi
    }

    pub fn try_eval(&self, u: &DVector<f64>) -> Result<DVector<f64>, NonlinearityError> {
        if u.len() != self.dim {
            return Err(NonlinearityError::Dimension { expected: self.dim, got: u.len() });
        }
        let t = u.norm();
        let value = self.phi.eval(t);
        if !(value >= 0.0) || !value.is_finite() {
            return Err(NonlinearityError::RadialFactor { t, value });
        }
        Ok(metric_projection(u, 1.0) * value)
    }
}

impl NonlinearMap for RadialMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        self.try_eval(u).unwrap_or_else(|_| DVector::from_element(u.len(), f64::NAN))
    }

    fn jacobian(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.dim;
        let r = u.norm();
        let phi = self.phi.eval(r);
        let id = DMatrix::<f64>::identity(n, n);
        if r == 0.0 {
            return Some(id * phi);
        }
        let dphi = self.phi.derivative_or_fd(r);
        let uhat = u / r;
        let outer = &uhat * uhat.transpose();
        if r <= 1.0 {
            Some(id * phi + outer * (dphi * r))
        } else {
            Some((id - &outer) * (phi / r) + outer * dphi)
        }
    }

    fn declared_class(&self) -> RegularityClass {
        match self.phi {
            ScalarFn::Constant(c) if c > 0.0 => RegularityClass::Cocoercive(1.0 / c),
            ScalarFn::Constant(_) => RegularityClass::Monotone,
            _ => RegularityClass::QuasiMonotoneSufficient,
        }
    }

    fn growth(&self) -> Growth {
        match self.phi {
            ScalarFn::Constant(c) => Growth::Bounded(c),
            ScalarFn::Arctan { scale } => Growth::Bounded(scale.abs() * FRAC_PI_2),
            ScalarFn::Power { coeff, exponent } if (0.0..1.0).contains(&exponent) => {
                Growth::Sublinear { coeff: coeff.abs(), exponent }
            }
            ScalarFn::Power { coeff, exponent: 1.0 } => Growth::Linear { a: 0.0, b: coeff.abs() },
            _ => Growth::Unspecified,
        }
    }

    fn zero_at_zero(&self) -> bool {
        true
    }

    fn structural_certificate(&self) -> Option<QuasiMonotoneVerdict> {
        Some(QuasiMonotoneVerdict::RadialStructure)
    }
}

/// Settings for [`validate_integrand`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandBounds {
    pub alpha: f64,
    pub beta: f64,
    /// Growth bound `|f(t)| ≤ a + b|t|`.
    pub a: f64,
    pub b: f64,
    pub t_range: (f64, f64),
}

impl IntegrandBounds {
    /// Growth defaults to `a = 0`, `b = 1/α`, which every admissible
    /// integrand satisfies.
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, a: 0.0, b: 1.0 / alpha, t_range: (-20.0, 20.0) }
    }
}

pub const QUOTIENT_POINTS: usize = 400;
pub const QUOTIENT_OFFSETS: [f64; 3] = [1e-4, 1e-2, 1.0];
const QUOTIENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegrandVerdict {
    pub passed: bool,
    pub min_quotient: f64,
    pub max_quotient: f64,
    pub zero_value: f64,
    /// Largest `|f(t)| − a − b|t|` on the grid.
    pub growth_excess: f64,
    pub reasons: Vec<String>,
}

/// Checks the difference quotients of `f` against `[β, 1/α]`, `f(0) = 0`
/// and the growth bound on a 400-point grid with offsets `{1e-4, 1e-2, 1}`.
pub fn validate_integrand(f: &ScalarFn, bounds: &IntegrandBounds) -> IntegrandVerdict {
    let (lo, hi) = bounds.t_range;
    let mut qmin = f64::INFINITY;
    let mut qmax = f64::NEG_INFINITY;
    let mut growth_excess = f64::NEG_INFINITY;
    for i in 0..QUOTIENT_POINTS {
        let t = lo + (hi - lo) * i as f64 / (QUOTIENT_POINTS - 1) as f64;
        let ft = f.eval(t);
        let excess = ft.abs() - bounds.a - bounds.b * t.abs();
        if !(excess <= growth_excess) {
            growth_excess = excess;
        }
        for d in QUOTIENT_OFFSETS {
            let q = (f.eval(t + d) - ft) / d;
            if !(q >= qmin) {
                qmin = q;
            }
            if !(q <= qmax) {
                qmax = q;
            }
        }
    }
    let zero_value = f.eval(0.0);
    let mut reasons = Vec::new();
    if !(qmin >= bounds.beta - QUOTIENT_SLACK) {
        reasons.push(format!("difference quotient {qmin} below beta = {}", bounds.beta));
    }
    if !(qmax <= 1.0 / bounds.alpha + QUOTIENT_SLACK) {
        reasons.push(format!("difference quotient {qmax} above 1/alpha = {}", 1.0 / bounds.alpha));
    }
    if !(zero_value.abs() <= 1e-12) {
        reasons.push(format!("f(0) = {zero_value}, expected 0"));
    }
    if !(growth_excess <= QUOTIENT_SLACK) {
        reasons.push(format!("growth bound exceeded by {growth_excess}"));
    }
    IntegrandVerdict {
        passed: reasons.is_empty(),
        min_quotient: qmin,
        max_quotient: qmax,
        zero_value,
        growth_excess,
        reasons,
    }
}

/// `N(u)ᵢ = fᵢ(uᵢ)` with every `fᵢ` validated against `[β, 1/α]`.
#[derive(Debug, Clone)]
pub struct NemytskiiMap {
    integrands: Vec<ScalarFn>,
    alpha: f64,
    beta: f64,
    a: DVector<f64>,
    b: f64,
}

impl NemytskiiMap {
    /// One integrand shared by all `grid_dim` nodes.
    pub fn new(grid_dim: usize, f: ScalarFn, alpha: f64, beta: f64) -> Result<Self, NonlinearityError> {
        Self::build(vec![f; grid_dim], alpha, beta, None, (-20.0, 20.0))
    }

    pub fn per_node(fs: Vec<ScalarFn>, alpha: f64, beta: f64) -> Result<Self, NonlinearityError> {
        Self::build(fs, alpha, beta, None, (-20.0, 20.0))
    }

    /// Full constructor. `growth = None` takes `a = 0`, `b = 1/α`.
    pub fn build(
        fs: Vec<ScalarFn>,
        alpha: f64,
        beta: f64,
        growth: Option<(DVector<f64>, f64)>,
        t_range: (f64, f64),
    ) -> Result<Self, NonlinearityError> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(NonlinearityError::InvalidBounds { alpha, beta });
        }
        let n = fs.len();
        let (a, b) = growth.unwrap_or_else(|| (DVector::zeros(n), 1.0 / alpha));
        if a.len() != n {
            return Err(NonlinearityError::Dimension { expected: n, got: a.len() });
        }
        for (node, f) in fs.iter().enumerate() {
            let bounds = IntegrandBounds { alpha, beta, a: a[node], b, t_range };
            let verdict = validate_integrand(f, &bounds);
            if !verdict.passed {
                return Err(NonlinearityError::Integrand { node, reason: verdict.reasons.join("; ") });
            }
        }
        Ok(Self { integrands: fs, alpha, beta, a, b })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Coercivity constant: `⟨N(u),u⟩ ≥ β‖u‖²`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn growth_vector(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn growth_slope(&self) -> f64 {
        self.b
    }

    pub fn integrand(&self, node: usize) -> &ScalarFn {
        &self.integrands[node]
    }
}

impl NonlinearMap for NemytskiiMap {
    fn dim(&self) -> usize {
        self.integrands.len()
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(u.len(), |i, _| self.integrands[i].eval(u[i]))
    }

    fn jacobian(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = DVector::from_fn(u.len(), |i, _| self.integrands[i].derivative_or_fd(u[i]));
        Some(DMatrix::from_diagonal(&d))
    }

    fn declared_class(&self) -> RegularityClass {
        RegularityClass::Cocoercive(self.alpha)
    }

    fn growth(&self) -> Growth {
        Growth::Linear { a: self.a.norm(), b: self.b }
    }

    fn zero_at_zero(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn sin_perturbed() -> ScalarFn {
        ScalarFn::SinPerturbed { slope: 0.5, amplitude: 0.25 }
    }

    #[test]
    fn projection_inside_and_outside() {
        let inside = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(metric_projection(&inside, 1.0), inside);
        let outside = DVector::from_vec(vec![3.0, 4.0]);
        let p = metric_projection(&outside, 1.0);
        assert!((p - DVector::from_vec(vec![0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn radial_examples() {
        let one = RadialMap::new(2, ScalarFn::Constant(1.0)).unwrap();
        let u = DVector::from_vec(vec![0.3, -0.2]);
        assert_eq!(one.eval(&u), u);
        let id = RadialMap::new(2, ScalarFn::Linear { slope: 1.0 }).unwrap();
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert!((id.eval(&v) - &v).norm() < 1e-14);
    }

    #[test]
    fn radial_rejects_negative_phi() {
        assert!(RadialMap::new(2, ScalarFn::Linear { slope: -1.0 }).is_err());
        let shifted = ScalarFn::custom(|t| t - 5.0);
        assert!(matches!(RadialMap::new(1, shifted), Err(NonlinearityError::RadialFactor { .. })));
    }

    #[test]
    fn radial_jacobian_matches_differences() {
        let m = RadialMap::new(3, ScalarFn::Power { coeff: 1.0, exponent: 1.0 / 3.0 }).unwrap();
        for u in [DVector::from_vec(vec![0.2, -0.1, 0.3]), DVector::from_vec(vec![2.0, 1.0, -3.0])] {
            let fd = crate::linalg::fd_jacobian(|x| m.eval(x), &u);
            let an = m.jacobian(&u).unwrap();
            assert!((fd - an).abs().max() < 1e-7);
        }
    }

    #[test]
    fn radial_growth_metadata() {
        let c = RadialMap::new(2, ScalarFn::Constant(2.0)).unwrap();
        assert_eq!(c.growth(), Growth::Bounded(2.0));
        assert_eq!(c.declared_class(), RegularityClass::Cocoercive(0.5));
        let p = RadialMap::new(2, ScalarFn::Power { coeff: 1.0, exponent: 1.0 / 3.0 }).unwrap();
        assert!(matches!(p.growth(), Growth::Sublinear { .. }));
    }

    #[test]
    fn identity_integrand_is_identity() {
        let n = NemytskiiMap::new(3, ScalarFn::Linear { slope: 1.0 }, 1.0, 1.0).unwrap();
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(n.eval(&u), u);
    }

    #[test]
    fn sin_perturbed_values() {
        let n = NemytskiiMap::new(2, sin_perturbed(), 4.0 / 3.0, 0.25).unwrap();
        let out = n.eval(&DVector::from_vec(vec![0.0, PI]));
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn validation_verdicts() {
        assert!(validate_integrand(&sin_perturbed(), &IntegrandBounds::new(4.0 / 3.0, 0.25)).passed);
        let cube = ScalarFn::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 1.0] };
        assert!(!validate_integrand(&cube, &IntegrandBounds::new(1.0, 0.1)).passed);
        let atan = ScalarFn::Arctan { scale: 1.0 };
        let v = validate_integrand(&atan, &IntegrandBounds::new(1.0, 0.1));
        assert!(!v.passed);
        assert!(v.min_quotient < 0.1);
    }

    #[test]
    fn construction_rejects_bad_integrand() {
        let atan = ScalarFn::Arctan { scale: 1.0 };
        assert!(matches!(NemytskiiMap::new(4, atan, 1.0, 0.1), Err(NonlinearityError::Integrand { node: 0, .. })));
        let offset = ScalarFn::Polynomial { coefficients: vec![0.1, 1.0] };
        assert!(NemytskiiMap::new(2, offset, 1.0, 0.5).is_err());
    }

    #[test]
    fn polynomial_derivative() {
        let p = ScalarFn::Polynomial { coefficients: vec![1.0, 2.0, 3.0] };
        assert_eq!(p.eval(2.0), 1.0 + 4.0 + 12.0);
        assert_eq!(p.derivative(2.0), Some(2.0 + 12.0));
    }

    #[test]
    fn odd_power_extension() {
        let p = ScalarFn::Power { coeff: 2.0, exponent: 0.5 };
        assert_eq!(p.eval(4.0), 4.0);
        assert_eq!(p.eval(-4.0), -4.0);
        assert_eq!(p.eval(0.0), 0.0);
    }
}

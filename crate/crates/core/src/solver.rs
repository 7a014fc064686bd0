//! The perturbed equation `εP₂u + Lu + N(u) = h`, the `ε → 0` continuation
//! and the top-level [`solve`].
//!
//! Per `ε` the equation is solved by damped Newton, with the fixed point
//! `u = (L + εP₂)⁻¹(h − N(u))` as fallback. On `H₁` this reads
//! `u₁ = K(h₁ − N₁(u))` and on `H₂` it reads `u₂ = (L₂+ε)⁻¹(h₂ − N₂(u))`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::conditions::{self, ConditionOptions, ConditionReport};
use crate::degree::{self, Ball, DegreeOptions, FiniteMap, GalerkinLadder};
use crate::linalg;
use crate::monotone::{Growth, NonlinearMap, QuasiMonotoneVerdict, RegularityClass};
use crate::newton::{self, NewtonOptions};
use crate::prelude::*;
use crate::sampling;
use crate::spectral::{self, SpaceSplit, SpectralError, SymOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    /// Cocoercive `N` with `α > γ/δ²`: unique solution per `ε`.
    MonotoneInversion,
    /// Quasi-monotone sublinear `N`, certified by a Galerkin degree ladder.
    GalerkinDegree,
    DampedNewton,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),
    #[error("the degree strategy needs eps < 1, got {0}")]
    EpsTooLarge(f64),
    #[error("monotone inversion needs a cocoercive nonlinearity, got {0:?}")]
    NotCocoercive(RegularityClass),
    #[error("monotone inversion needs alpha > gamma/delta^2 = {bound}, got alpha = {alpha}")]
    AlphaTooSmall { alpha: f64, bound: f64 },
    #[error("dimension mismatch: operator has dim {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("schedule must be strictly decreasing, positive, and start below 1: {0}")]
    InvalidSchedule(String),
    #[error("perturbed solve did not converge at eps = {eps}: residual {residual:e}")]
    NonConvergence { eps: f64, residual: f64, history: Vec<f64> },
    #[error("Galerkin degree stabilized at 0; no existence certificate")]
    NoSolutionCertificate { ladder: GalerkinLadder },
}

/// `(L, N, h, ε)` with a solve strategy.
pub struct PerturbedProblem<'a> {
    split: &'a SpaceSplit,
    map: &'a dyn NonlinearMap,
    h: DVector<f64>,
    eps: f64,
    strategy: Strategy,
    operator: DMatrix<f64>,
}

impl core::fmt::Debug for PerturbedProblem<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PerturbedProblem")
            .field("dim", &self.h.len())
            .field("eps", &self.eps)
            .field("strategy", &self.strategy)
            .finish_non_exhaustive()
    }
}

impl<'a> PerturbedProblem<'a> {
    pub fn new(
        split: &'a SpaceSplit,
        map: &'a dyn NonlinearMap,
        h: DVector<f64>,
        eps: f64,
        strategy: Strategy,
    ) -> Result<Self, SolverError> {
        let n = split.dim();
        for got in [map.dim(), h.len()] {
            if got != n {
                return Err(SolverError::Dimension { expected: n, got });
            }
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SolverError::InvalidEps(eps));
        }
        match strategy {
            Strategy::MonotoneInversion => {
                let class = map.declared_class();
                let Some(alpha) = class.cocoercivity() else {
                    return Err(SolverError::NotCocoercive(class));
                };
                let bound = alpha_bound(split);
                if !(alpha > bound) {
                    return Err(SolverError::AlphaTooSmall { alpha, bound });
                }
            }
            Strategy::GalerkinDegree if eps >= 1.0 => return Err(SolverError::EpsTooLarge(eps)),
            _ => {}
        }
        Ok(Self { split, map, h, eps, strategy, operator: split.operator() })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn split(&self) -> &SpaceSplit {
        self.split
    }

    /// `εP₂u + Lu + N(u) − h`.
    pub fn residual(&self, u: &DVector<f64>) -> DVector<f64> {
        self.split.project2(u) * self.eps + &self.operator * u + self.map.eval(u) - &self.h
    }

    /// `Lu + N(u) − h`.
    pub fn unperturbed_residual(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.operator * u + self.map.eval(u) - &self.h
    }

    fn map_jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        self.map
            .jacobian(u)
            .unwrap_or_else(|| linalg::fd_jacobian(|x| self.map.eval(x), u))
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        &self.operator + &self.split.p2 * self.eps + self.map_jacobian(u)
    }
}

/// `γ/δ²`.
pub fn alpha_bound(split: &SpaceSplit) -> f64 {
    split.gamma / (split.delta * split.delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedOptions {
    pub tol: f64,
    pub newton_max_iter: usize,
    pub splitting_budget: usize,
    /// Compute a degree certificate before solving (degree strategy only).
    pub certify: bool,
    pub degree: DegreeOptions,
}

impl Default for PerturbedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            newton_max_iter: 100,
            splitting_budget: 20_000,
            certify: true,
            degree: DegreeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSolution {
    pub u: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub used_fallback: bool,
    pub ladder: Option<GalerkinLadder>,
    pub warnings: Vec<String>,
}

/// Solves the perturbed equation from `x0` (zero when `None`).
pub fn solve_perturbed(
    p: &PerturbedProblem<'_>,
    x0: Option<DVector<f64>>,
    opts: &PerturbedOptions,
) -> Result<PerturbedSolution, SolverError> {
    let mut warnings = Vec::new();
    let ladder = if p.strategy == Strategy::GalerkinDegree && opts.certify {
        match galerkin_certificate(p, &opts.degree) {
            Ok(Some(l)) => {
                match l.stabilized_degree() {
                    Ok(0) => return Err(SolverError::NoSolutionCertificate { ladder: l }),
                    Ok(_) => {}
                    Err(e) => warnings.push(format!("{e}")),
                }
                Some(l)
            }
            Ok(None) => {
                warnings.push(String::from("radius bound is infinite; degree certificate skipped"));
                None
            }
            Err(e) => {
                warnings.push(format!("degree certificate failed: {e}"));
                None
            }
        }
    } else {
        None
    };
    let n = p.h.len();
    let x0 = x0.unwrap_or_else(|| DVector::zeros(n));
    let nopts = NewtonOptions { tol: opts.tol, max_iter: opts.newton_max_iter, ..Default::default() };
    let residual = |u: &DVector<f64>| p.residual(u);
    let jacobian = |u: &DVector<f64>| Some(p.jacobian(u));
    let first = match newton::damped_newton(residual, jacobian, x0, &nopts) {
        Ok(out) => {
            return Ok(PerturbedSolution {
                u: out.x,
                residual: out.residual,
                iterations: out.iterations,
                used_fallback: false,
                ladder,
                warnings,
            })
        }
        Err(out) => out,
    };
    let start = if first.residual.is_finite() { first.x } else { DVector::zeros(n) };
    let (u, iters, hist) = splitting_iteration(p, start, opts);
    let out = newton::damped_newton(residual, jacobian, u, &nopts);
    match out {
        Ok(o) => Ok(PerturbedSolution {
            u: o.x,
            residual: o.residual,
            iterations: first.iterations + iters + o.iterations,
            used_fallback: true,
            ladder,
            warnings,
        }),
        Err(o) => {
            let mut history = first.history;
            history.extend(hist);
            history.extend(o.history);
            Err(SolverError::NonConvergence { eps: p.eps, residual: o.residual, history })
        }
    }
}

/// Relaxed fixed-point iteration `u ← u + θ(M(h − N(u)) − u)` with
/// `M = (L + εP₂)⁻¹`. The relaxation `θ` halves whenever the residual grows.
fn splitting_iteration(
    p: &PerturbedProblem<'_>,
    mut u: DVector<f64>,
    opts: &PerturbedOptions,
) -> (DVector<f64>, usize, Vec<f64>) {
    let m = &p.split.k + p.split.l2_shift_inverse(p.eps);
    let mut theta = 1.0;
    let mut rn = p.residual(&u).norm();
    let mut hist = Vec::new();
    let mut it = 0;
    while it < opts.splitting_budget && rn > opts.tol {
        it += 1;
        let target = &m * (&p.h - p.map.eval(&u));
        let cand = &u + (target - &u) * theta;
        let cn = p.residual(&cand).norm();
        if cn.is_finite() && cn < rn {
            u = cand;
            rn = cn;
            if it % 64 == 0 {
                hist.push(rn);
            }
        } else {
            theta *= 0.5;
            if theta < 1.0 / 1024.0 {
                break;
            }
        }
    }
    hist.push(rn);
    (u, it, hist)
}

/// Smallest `r` with `g(r) ≥ 0` for an increasing `g`, by doubling then
/// bisection. `None` when no such `r` exists below `1e300`.
fn increasing_root<G: Fn(f64) -> f64>(g: G) -> Option<f64> {
    if g(1e-12) >= 0.0 {
        return Some(0.0);
    }
    let mut hi = 1.0;
    while !(g(hi) >= 0.0) {
        hi *= 2.0;
        if hi > 1e300 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if g(lo) >= 0.0 {
        lo = 1e-12;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Some(hi)
}

/// Safety factor making every lower bound strict.
const RADIUS_FACTOR: f64 = 1.05;

/// Radius of a ball containing every solution of the perturbed equation
/// along the homotopies of the degree argument.
///
/// Takes the maximum of `2‖h₂‖/ε`, the root of
/// `ε²r²/2 = 2(‖h₂‖² + G(r)²)` for the growth bound `G`, the `H₁`
/// constraints `G(r)/r ≤ 1/(2√2‖K‖)` and `r ≥ 2√2‖K‖‖h₁‖`, and 1, then scales
/// by 1.05. Returns infinity when the growth is unspecified or too fast.
pub fn radius_bound(h: &DVector<f64>, eps: f64, split: &SpaceSplit, growth: Growth) -> f64 {
    if matches!(growth, Growth::Unspecified) {
        return f64::INFINITY;
    }
    let g = |r: f64| growth.bound(r).unwrap_or(f64::INFINITY);
    let h2 = split.project2(h).norm();
    let h1 = split.project1(h).norm();
    let mut r = (2.0 * h2 / eps).max(1.0);
    let step1 = increasing_root(|r: f64| {
        let gr = g(r);
        eps * eps / 2.0 - 2.0 * (h2 * h2 + gr * gr) / (r * r)
    });
    match step1 {
        Some(v) => r = r.max(v),
        None => return f64::INFINITY,
    }
    if split.s > 0 {
        let kn = split.k_norm();
        let c = 1.0 / (2.0 * core::f64::consts::SQRT_2 * kn);
        r = r.max(2.0 * core::f64::consts::SQRT_2 * kn * h1);
        match increasing_root(|r: f64| c - g(r) / r) {
            Some(v) => r = r.max(v),
            None => return f64::INFINITY,
        }
    }
    r * RADIUS_FACTOR
}

/// Degree ladder of `u₂ ↦ (L₂+ε)u₂ + P₂N(u₂)` on `B(0,r) ∩ H₂`, target
/// `h₂`, in eigen-coordinates of `H₂`, for `j = 1, …, min(8, dim H₂)`.
/// Returns `None` when the radius bound is infinite or `H₂ = {0}`.
pub fn galerkin_certificate(
    p: &PerturbedProblem<'_>,
    opts: &DegreeOptions,
) -> Result<Option<GalerkinLadder>, degree::DegreeError> {
    let split = p.split;
    let m = split.dim() - split.s;
    let r = radius_bound(&p.h, p.eps, split, p.map.growth());
    if m == 0 || !r.is_finite() {
        return Ok(None);
    }
    let e2 = split.h2_basis();
    let e2t = e2.transpose();
    let diag: Vec<f64> = split.eigenvalues[split.s..].iter().map(|l| l + p.eps).collect();
    let dmat = DMatrix::from_diagonal(&DVector::from_vec(diag));
    let (e2b, e2tb, dmatb) = (e2.clone(), e2t.clone(), dmat.clone());
    let map = p.map;
    let f = FiniteMap::new(m, move |y| &dmat * y + &e2t * map.eval(&(&e2 * y))).with_jacobian(move |y| {
        let u = &e2b * y;
        let j = map.jacobian(&u).unwrap_or_else(|| linalg::fd_jacobian(|x| map.eval(x), &u));
        &dmatb + &e2tb * j * &e2b
    });
    let target = split.h2_basis().transpose() * &p.h;
    let j_list: Vec<usize> = (1..=m.min(degree::MAX_SIGN_SUM_DIM)).collect();
    let basis = DMatrix::identity(m, m);
    degree::degree_ladder(&f, &basis, &Ball::centered(m, r), &target, &j_list, opts).map(Some)
}

/// `L(ε)⁻¹ = K + P₂/ε` and the target `L(ε)⁻¹h` of the inversion chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProblem {
    pub l_eps_inv: DMatrix<f64>,
    pub target: DVector<f64>,
    pub eps: f64,
    pub delta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumCheck {
    pub eigenvalues: Vec<f64>,
    pub passed: bool,
}

impl ResolventProblem {
    pub fn new(split: &SpaceSplit, eps: f64, h: &DVector<f64>) -> Self {
        let inv = split.l_eps_inverse(eps);
        let target = &inv * h;
        Self { l_eps_inv: inv, target, eps, delta: split.delta, gamma: split.gamma }
    }

    /// Eigenvalues of `L(ε)⁻¹` lie in `[−1/δ, −1/γ] ∪ {1/ε}`.
    pub fn spectrum_check(&self) -> SpectrumCheck {
        let eig = self.l_eps_inv.clone().symmetric_eigenvalues();
        let mut eigenvalues: Vec<f64> = eig.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let tol = 1e-9 * (1.0 / self.eps).max(1.0 / self.delta);
        let passed = eigenvalues.iter().all(|&m| {
            let neg = m >= -1.0 / self.delta - tol && self.gamma > 0.0 && m <= -1.0 / self.gamma + tol;
            let pos = (m - 1.0 / self.eps).abs() <= tol;
            neg || pos
        });
        SpectrumCheck { eigenvalues, passed }
    }
}

/// `A(ε)(v) = B⁻¹(v) + L(ε)⁻¹v` with `B = L₂P₂ + N`, the strongly monotone
/// operator of the inversion argument. `B⁻¹` is evaluated by Newton; a
/// failed inner solve yields NaN.
pub struct CompositeMap<'a> {
    split: &'a SpaceSplit,
    map: &'a dyn NonlinearMap,
    l_eps_inv: DMatrix<f64>,
    tol: f64,
}

impl<'a> CompositeMap<'a> {
    pub fn new(split: &'a SpaceSplit, map: &'a dyn NonlinearMap, eps: f64) -> Self {
        Self { split, map, l_eps_inv: split.l_eps_inverse(eps), tol: 1e-13 }
    }

    /// Solves `L₂P₂u + N(u) = v`.
    pub fn inverse_b(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        let l2 = &self.split.l2;
        let residual = |u: &DVector<f64>| l2 * u + self.map.eval(u) - v;
        let jacobian = |u: &DVector<f64>| {
            let j = self.map.jacobian(u).unwrap_or_else(|| linalg::fd_jacobian(|x| self.map.eval(x), u));
            Some(l2 + j)
        };
        let opts = NewtonOptions { tol: self.tol * (1.0 + v.norm()), max_iter: 200, ..Default::default() };
        newton::damped_newton(residual, jacobian, v.clone(), &opts).ok().map(|o| o.x)
    }
}

impl NonlinearMap for CompositeMap<'_> {
    fn dim(&self) -> usize {
        self.split.dim()
    }

    fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.inverse_b(v) {
            Some(u) => u + &self.l_eps_inv * v,
            None => DVector::from_element(v.len(), f64::NAN),
        }
    }

    fn declared_class(&self) -> RegularityClass {
        RegularityClass::Monotone
    }
}

/// `min{1/ε, α − γ/δ²}`.
pub fn composite_constant(split: &SpaceSplit, alpha: f64, eps: f64) -> f64 {
    (1.0 / eps).min(alpha - alpha_bound(split))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub solutions: Vec<DVector<f64>>,
    pub residuals: Vec<f64>,
    pub max_distance: f64,
}

/// Solves from `starts` seeded random points in `B(0, radius)` and records
/// the largest pairwise distance between the solutions.
pub fn uniqueness_check(
    p: &PerturbedProblem<'_>,
    starts: usize,
    radius: f64,
    seed: u64,
    opts: &PerturbedOptions,
) -> Result<UniquenessReport, SolverError> {
    let mut rng = sampling::rng(seed);
    let mut solutions = Vec::with_capacity(starts);
    let mut residuals = Vec::with_capacity(starts);
    let quiet = PerturbedOptions { certify: false, ..opts.clone() };
    for _ in 0..starts {
        let x0 = sampling::in_ball(&mut rng, p.h.len(), radius);
        let s = solve_perturbed(p, Some(x0), &quiet)?;
        residuals.push(p.residual(&s.u).norm());
        solutions.push(s.u);
    }
    let mut max_distance = 0.0f64;
    for i in 0..solutions.len() {
        for j in (i + 1)..solutions.len() {
            max_distance = max_distance.max((&solutions[i] - &solutions[j]).norm());
        }
    }
    Ok(UniquenessReport { solutions, residuals, max_distance })
}

/// Strictly decreasing positive `ε` values starting below 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Schedule {
    eps: Vec<f64>,
}

impl Schedule {
    pub fn new(eps: Vec<f64>) -> Result<Self, SolverError> {
        if eps.is_empty() {
            return Err(SolverError::InvalidSchedule(String::from("empty")));
        }
        if !(eps[0] < 1.0) {
            return Err(SolverError::InvalidSchedule(format!("first value {} is not below 1", eps[0])));
        }
        if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(SolverError::InvalidSchedule(String::from("values must be positive and finite")));
        }
        if eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(SolverError::InvalidSchedule(String::from("values must strictly decrease")));
        }
        Ok(Self { eps })
    }

    /// `start · factorᵏ` for `k = 0, …, steps−1`.
    pub fn geometric(start: f64, factor: f64, steps: usize) -> Result<Self, SolverError> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(SolverError::InvalidSchedule(format!("factor {factor} must lie in (0, 1)")));
        }
        let mut eps = Vec::with_capacity(steps);
        let mut e = start;
        for _ in 0..steps {
            eps.push(e);
            e *= factor;
        }
        Self::new(eps)
    }

    pub fn values(&self) -> &[f64] {
        &self.eps
    }
}

impl Default for Schedule {
    /// `0.5 · 2^{−k}`, 20 steps.
    fn default() -> Self {
        Self::geometric(0.5, 0.5, 20).expect("default schedule is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolveStatus {
    Converged,
    Unbounded,
    NonConvergence,
    NoSolutionCertificate,
    ScheduleExhausted,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsTraceRow {
    pub eps: f64,
    pub norm: f64,
    /// Residual of the perturbed equation.
    pub residual: f64,
    pub unperturbed_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Present only when `status` is `Converged`.
    pub solution: Option<Vec<f64>>,
    pub last_iterate: Vec<f64>,
    /// `‖Lu + N(u) − h‖` at the last iterate.
    pub residual: f64,
    pub eps_trace: Vec<EpsTraceRow>,
    pub bounded: bool,
    pub conditions: Option<ConditionReport>,
    pub degree_trace: Option<GalerkinLadder>,
    pub split: Option<spectral::SplitSummary>,
    pub strategy: Strategy,
    pub tol: f64,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub config_hash: u64,
}

impl SolveReport {
    pub fn succeeded(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub schedule: Schedule,
    /// Target for `‖Lu + N(u) − h‖`.
    pub tol: f64,
    /// Tolerance of each perturbed solve; `None` uses `min(tol, 1e-10)`.
    pub step_tol: Option<f64>,
    pub strategy: Strategy,
    pub warm_start: bool,
    pub ceiling: f64,
    /// Growth exponent of `‖u_ε‖` in `1/ε` treated as divergence.
    pub growth_exponent: f64,
    pub growth_steps: usize,
    /// Try an unperturbed Newton solve once `ε` drops below this.
    pub polish_below: f64,
    pub seed: u64,
    pub perturbed: PerturbedOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            tol: 1e-8,
            step_tol: None,
            strategy: Strategy::DampedNewton,
            warm_start: true,
            ceiling: 1e6,
            growth_exponent: 0.5,
            growth_steps: 3,
            polish_below: 1e-2,
            seed: 0,
            perturbed: PerturbedOptions::default(),
        }
    }
}

/// Solves the perturbed equation along the schedule and stops once the
/// unperturbed residual is within `tol`.
pub fn continuation(
    split: &SpaceSplit,
    map: &dyn NonlinearMap,
    h: &DVector<f64>,
    opts: &ContinuationOptions,
) -> Result<SolveReport, SolverError> {
    let n = split.dim();
    let step_tol = opts.step_tol.unwrap_or(opts.tol.min(1e-10));
    let operator = split.operator();
    let unperturbed = |u: &DVector<f64>| &operator * u + map.eval(u) - h;
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut degree_trace = None;
    let mut u = DVector::zeros(n);
    let mut status = SolveStatus::ScheduleExhausted;
    let mut fast_growth = 0;
    let mut solution = None;
    for (k, &eps) in opts.schedule.values().iter().enumerate() {
        let p = PerturbedProblem::new(split, map, h.clone(), eps, opts.strategy)?;
        let popts = PerturbedOptions { tol: step_tol, certify: k == 0, ..opts.perturbed.clone() };
        let x0 = if opts.warm_start { u.clone() } else { DVector::zeros(n) };
        let sol = match solve_perturbed(&p, Some(x0), &popts) {
            Ok(s) => s,
            Err(SolverError::NoSolutionCertificate { ladder }) => {
                degree_trace = Some(ladder);
                status = SolveStatus::NoSolutionCertificate;
                break;
            }
            Err(SolverError::NonConvergence { eps, residual, .. }) => {
                warnings.push(format!("perturbed solve failed at eps = {eps}: residual {residual:e}"));
                status = SolveStatus::NonConvergence;
                break;
            }
            Err(e) => return Err(e),
        };
        if sol.ladder.is_some() {
            degree_trace = sol.ladder.clone();
        }
        warnings.extend(sol.warnings.iter().cloned());
        let prev_norm = u.norm();
        u = sol.u;
        let norm = u.norm();
        let ur = unperturbed(&u).norm();
        trace.push(EpsTraceRow { eps, norm, residual: p.residual(&u).norm(), unperturbed_residual: ur });
        if !(norm <= opts.ceiling) {
            warnings.push(format!("|u_eps| = {norm:e} exceeds the ceiling {:e}", opts.ceiling));
            status = SolveStatus::Unbounded;
            break;
        }
        if k > 0 && norm >= 1.0 && prev_norm > 0.0 {
            let prev_eps = opts.schedule.values()[k - 1];
            let rate = (norm / prev_norm).ln() / (prev_eps / eps).ln();
            fast_growth = if rate >= opts.growth_exponent { fast_growth + 1 } else { 0 };
            if fast_growth >= opts.growth_steps {
                warnings.push(format!("|u_eps| grows like (1/eps)^{rate:.3} over {fast_growth} steps"));
                status = SolveStatus::Unbounded;
                break;
            }
        }
        if ur <= opts.tol {
            solution = Some(u.clone());
            status = SolveStatus::Converged;
            break;
        }
        if eps <= opts.polish_below {
            let nopts = NewtonOptions { tol: opts.tol, max_iter: 50, ..Default::default() };
            let jac = |x: &DVector<f64>| Some(&operator + p.map_jacobian(x));
            if let Ok(out) = newton::damped_newton(unperturbed, jac, u.clone(), &nopts) {
                if (&out.x - &u).norm() <= 1.0 + norm {
                    u = out.x;
                    solution = Some(u.clone());
                    status = SolveStatus::Converged;
                    break;
                }
            }
        }
    }
    let residual = unperturbed(&u).norm();
    Ok(SolveReport {
        status,
        solution: solution.map(|s| linalg::to_vec(&s)),
        last_iterate: linalg::to_vec(&u),
        residual,
        eps_trace: trace,
        bounded: status != SolveStatus::Unbounded,
        conditions: None,
        degree_trace,
        split: Some(split.summary()),
        strategy: opts.strategy,
        tol: opts.tol,
        warnings,
        seed: opts.seed,
        config_hash: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// `None` picks a strategy from the nonlinearity's declarations.
    pub strategy: Option<Strategy>,
    /// `None` detects δ from the spectrum.
    pub delta: Option<f64>,
    pub continuation: ContinuationOptions,
    pub check_conditions: bool,
    pub conditions: ConditionOptions,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            strategy: None,
            delta: None,
            continuation: ContinuationOptions::default(),
            check_conditions: true,
            conditions: ConditionOptions::default(),
            seed: 0,
        }
    }
}

/// Strategy chosen when none is configured: monotone inversion for
/// admissible cocoercive maps, the degree strategy for bounded-growth
/// quasi-monotone maps, Newton otherwise.
pub fn auto_strategy(split: &SpaceSplit, map: &dyn NonlinearMap) -> Strategy {
    if let Some(alpha) = map.declared_class().cocoercivity() {
        if alpha > alpha_bound(split) {
            return Strategy::MonotoneInversion;
        }
    }
    let sublinear = matches!(map.growth(), Growth::Bounded(_) | Growth::Sublinear { .. });
    if sublinear && crate::monotone::classify_quasi_monotone(map) != QuasiMonotoneVerdict::Unknown {
        return Strategy::GalerkinDegree;
    }
    Strategy::DampedNewton
}

fn advisory_conditions(
    split: &SpaceSplit,
    map: &dyn NonlinearMap,
    h: &DVector<f64>,
    strategy: Strategy,
    opts: &ConditionOptions,
    warnings: &mut Vec<String>,
) -> Option<ConditionReport> {
    let cocoercive = map.declared_class().cocoercivity().filter(|a| *a > alpha_bound(split));
    let result = match (strategy, cocoercive) {
        (Strategy::GalerkinDegree, _) | (Strategy::DampedNewton, None) => conditions::check_ch2(split, map, h, opts),
        (_, Some(alpha)) => conditions::check_ch3(split, map, h, alpha, opts),
        (Strategy::MonotoneInversion, None) => conditions::check_ch2(split, map, h, opts),
    };
    match result {
        Ok(r) => {
            for (name, v) in [("i", &r.condition_i), ("ii", &r.condition_ii), ("iii", &r.condition_iii)] {
                if !v.passed {
                    warnings.push(format!("condition ({name}) not verified: margin {}", v.margin));
                }
            }
            Some(r)
        }
        Err(e) => {
            warnings.push(format!("condition checks skipped: {e}"));
            None
        }
    }
}

/// Splits the space, runs the advisory condition checks and the continuation.
pub fn solve(
    op: &SymOperator,
    map: &dyn NonlinearMap,
    h: &DVector<f64>,
    config: &SolveConfig,
) -> Result<SolveReport, SolverError> {
    let dec = spectral::eigendecompose(op)?;
    let split = match config.delta {
        Some(d) => spectral::decompose_space(&dec, d)?,
        None => spectral::decompose_space_auto(&dec),
    };
    let strategy = config.strategy.unwrap_or_else(|| auto_strategy(&split, map));
    let mut warnings = Vec::new();
    if split.delta_source != spectral::DeltaSource::Given {
        warnings.push(format!("delta auto-detected as {} ({:?})", split.delta, split.delta_source));
    }
    let cond = if config.check_conditions {
        let copts = config.conditions.clone().with_seed(config.seed);
        advisory_conditions(&split, map, h, strategy, &copts, &mut warnings)
    } else {
        None
    };
    let copts = ContinuationOptions {
        strategy,
        seed: config.seed,
        perturbed: PerturbedOptions {
            degree: DegreeOptions { seed: config.seed, ..config.continuation.perturbed.degree.clone() },
            ..config.continuation.perturbed.clone()
        },
        ..config.continuation.clone()
    };
    let mut report = continuation(&split, map, h, &copts)?;
    report.conditions = cond;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotone::{LinearMap, ZeroMap};
    use crate::nonlinearities::{RadialMap, ScalarFn};
    use crate::spectral::{decompose_space, eigendecompose};

    fn split_of(diag: &[f64], delta: f64) -> SpaceSplit {
        let dec = eigendecompose(&SymOperator::from_diagonal(diag).unwrap()).unwrap();
        decompose_space(&dec, delta).unwrap()
    }

    #[test]
    fn linear_diagonal_perturbed_solve() {
        let split = split_of(&[-2.0, 1.0], 1.0);
        let zero = ZeroMap { dim: 2 };
        let p = PerturbedProblem::new(&split, &zero, DVector::from_vec(vec![2.0, 2.0]), 1.0, Strategy::DampedNewton)
            .unwrap();
        let s = solve_perturbed(&p, None, &PerturbedOptions::default()).unwrap();
        assert!((s.u - DVector::from_vec(vec![-1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn invariants_are_enforced() {
        let split = split_of(&[-2.0, 0.0, 1.0], 1.0);
        let id = LinearMap::scaled_identity(3, 1.0);
        let h = DVector::zeros(3);
        // alpha = 1 but gamma/delta^2 = 2
        let err = PerturbedProblem::new(&split, &id, h.clone(), 0.5, Strategy::MonotoneInversion).unwrap_err();
        assert_eq!(err, SolverError::AlphaTooSmall { alpha: 1.0, bound: 2.0 });
        assert!(matches!(
            PerturbedProblem::new(&split, &id, h.clone(), 1.0, Strategy::GalerkinDegree),
            Err(SolverError::EpsTooLarge(_))
        ));
        assert!(PerturbedProblem::new(&split, &id, h, 0.0, Strategy::DampedNewton).is_err());
    }

    #[test]
    fn radius_bound_examples() {
        let split = split_of(&[0.0, 1.0], 1.0);
        let h = DVector::from_vec(vec![1.0, 0.0]);
        let r = radius_bound(&h, 0.5, &split, Growth::Bounded(2.0));
        assert!(r > 4.0);
        // root of eps^2 r^2 / 2 = 2 (1 + 4)
        assert!((r / RADIUS_FACTOR - (80.0f64).sqrt()).abs() < 1e-9, "{r}");
        let floor = radius_bound(&DVector::zeros(2), 0.5, &split, Growth::Bounded(0.0));
        assert_eq!(floor, RADIUS_FACTOR);
        assert!(radius_bound(&h, 0.5, &split, Growth::Linear { a: 0.0, b: 1.0 }).is_infinite());
    }

    #[test]
    fn radius_bound_is_monotone_in_eps() {
        let split = split_of(&[-1.0, 0.0, 2.0], 1.0);
        let h = DVector::from_vec(vec![0.4, 1.0, -0.3]);
        let g = Growth::Sublinear { coeff: 0.1, exponent: 0.5 };
        let rs: Vec<f64> = [0.5, 0.25, 0.1, 0.01].iter().map(|&e| radius_bound(&h, e, &split, g)).collect();
        assert!(rs.windows(2).all(|w| w[1] >= w[0]), "{rs:?}");
    }

    #[test]
    fn resolvent_problem_spectrum() {
        let split = split_of(&[-3.0, -1.0, 0.0, 2.0], 1.0);
        let rp = ResolventProblem::new(&split, 0.25, &DVector::zeros(4));
        let c = rp.spectrum_check();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn zero_data_converges_immediately() {
        let split = split_of(&[-1.0, 0.0, 1.0], 1.0);
        let n = RadialMap::new(3, ScalarFn::Constant(2.0)).unwrap();
        let r = continuation(&split, &n, &DVector::zeros(3), &ContinuationOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_eq!(r.eps_trace.len(), 1);
        assert_eq!(r.solution, Some(vec![0.0; 3]));
    }

    #[test]
    fn inconsistent_linear_problem_is_unbounded() {
        let split = split_of(&[-1.0, 0.0, 1.0], 1.0);
        let zero = ZeroMap { dim: 3 };
        let h = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let r = continuation(&split, &zero, &h, &ContinuationOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
        assert!(!r.bounded);
        assert!(r.solution.is_none());
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![1.0, 0.5]).is_err());
        assert!(Schedule::new(vec![0.5, 0.5]).is_err());
        assert!(Schedule::new(vec![0.5, -0.1]).is_err());
        let s = Schedule::default();
        assert_eq!(s.values().len(), 20);
        assert_eq!(s.values()[1], 0.25);
    }
}

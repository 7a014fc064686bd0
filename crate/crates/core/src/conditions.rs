//! Recession-functional estimates and the sampled solvability checks.
//!
//! The recession functional is
//!
//! ```text
//! J_N(u) = inf { liminf ⟨N(t_k v_k), v_k⟩ : t_k → ∞, v_k → u }
//! ```
//!
//! and is estimated from finitely many sequences: the ray `v_k = u` plus
//! sequences `v_k = u + ρ(t₀/t_k)w` converging to `u` from random
//! directions `w`. The estimate is a heuristic lower estimate, not a bound.

use nalgebra::DVector;
use thiserror::Error;

use crate::linalg;
use crate::monotone::{self, Growth, NonlinearMap, QuasiMonotoneVerdict};
use crate::prelude::*;
use crate::sampling;
use crate::spectral::SpaceSplit;

/// `count` points geometrically spaced over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecessionOptions {
    pub t_grid: Vec<f64>,
    /// Initial radii `ρ` of the perturbed sequences.
    pub radii: Vec<f64>,
    pub directions_per_radius: usize,
    pub seed: u64,
}

impl Default for RecessionOptions {
    fn default() -> Self {
        Self {
            t_grid: geometric_grid(1.0, 1e4, 41),
            radii: vec![1.0, 0.1, 0.01],
            directions_per_radius: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecessionEstimate {
    pub direction: Vec<f64>,
    /// Smallest tail-inf over all sequences. When `minus_infinity` is set
    /// this is the last (finite) sampled value.
    pub lower_estimate: f64,
    pub minus_infinity: bool,
    pub t_grid: Vec<f64>,
    pub perturbation_count: usize,
    /// Largest distance `‖v_k − u‖` inside the tail window.
    pub resolution: f64,
}

impl RecessionEstimate {
    /// The estimate with the `−∞` marker applied.
    pub fn value(&self) -> f64 {
        if self.minus_infinity {
            f64::NEG_INFINITY
        } else {
            self.lower_estimate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionsError {
    #[error("direction must be a unit vector, got norm {0}")]
    NotUnit(f64),
    #[error("t grid must be positive and strictly increasing")]
    InvalidGrid,
    #[error("scaling factor must be positive, got {0}")]
    InvalidScale(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("alpha = {alpha} must exceed gamma/delta^2 = {bound} for the cocoercive existence theorem")]
    AlphaTooSmall { alpha: f64, bound: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Start of the tail window: the last quarter of the grid.
fn tail_start(len: usize) -> usize {
    len - (len / 4).max(1)
}

const MINUS_INFINITY_LEVEL: f64 = -1e6;

/// Estimates `J_N(u)` for a unit vector `u`.
pub fn recession_estimate<N: NonlinearMap + ?Sized>(
    n: &N,
    u: &DVector<f64>,
    opts: &RecessionOptions,
) -> Result<RecessionEstimate, ConditionsError> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(ConditionsError::NotUnit(norm));
    }
    estimate_raw(n, u, &opts.t_grid, &opts.radii, opts)
}

/// Estimates `J_N(λu)` on the grid `t/λ` with radii `λρ`, the substitution
/// of the homogeneity proof. For `λ` a power of two every sampled value is
/// exactly `λ` times the unscaled one.
pub fn recession_estimate_scaled<N: NonlinearMap + ?Sized>(
    n: &N,
    u: &DVector<f64>,
    lambda: f64,
    opts: &RecessionOptions,
) -> Result<RecessionEstimate, ConditionsError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ConditionsError::InvalidScale(lambda));
    }
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(ConditionsError::NotUnit(norm));
    }
    let grid: Vec<f64> = opts.t_grid.iter().map(|t| t / lambda).collect();
    let radii: Vec<f64> = opts.radii.iter().map(|r| r * lambda).collect();
    estimate_raw(n, &(u * lambda), &grid, &radii, opts)
}

fn estimate_raw<N: NonlinearMap + ?Sized>(
    n: &N,
    u: &DVector<f64>,
    grid: &[f64],
    radii: &[f64],
    opts: &RecessionOptions,
) -> Result<RecessionEstimate, ConditionsError> {
    if u.len() != n.dim() {
        return Err(ConditionsError::Dimension { expected: n.dim(), got: u.len() });
    }
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ConditionsError::InvalidGrid);
    }
    let dim = u.len();
    let t0 = grid[0];
    let start = tail_start(grid.len());
    let scale = u.norm().max(f64::MIN_POSITIVE);
    let mut rng = sampling::rng(opts.seed);
    let mut sequences: Vec<Option<(f64, DVector<f64>)>> = vec![None];
    for &rho in radii {
        for _ in 0..opts.directions_per_radius {
            sequences.push(Some((rho, sampling::unit_vector(&mut rng, dim))));
        }
    }
    let mut best = f64::INFINITY;
    let mut minus_infinity = false;
    let mut resolution = 0.0f64;
    for seq in &sequences {
        let mut tail_inf = f64::INFINITY;
        let mut decreasing = true;
        let mut prev = f64::INFINITY;
        let mut last = 0.0;
        for (k, &t) in grid.iter().enumerate() {
            let v = match seq {
                None => u.clone(),
                Some((rho, w)) => u + w * (rho * (t0 / t)),
            };
            if k < start {
                continue;
            }
            if let Some((rho, _)) = seq {
                resolution = resolution.max(rho * (t0 / t));
            }
            let value = n.eval(&(&v * t)).dot(&v);
            if !(value >= tail_inf) {
                tail_inf = value;
            }
            decreasing &= value < prev;
            prev = value;
            last = value;
        }
        if decreasing && last < MINUS_INFINITY_LEVEL * scale {
            minus_infinity = true;
        }
        if !(tail_inf >= best) {
            best = tail_inf;
        }
    }
    Ok(RecessionEstimate {
        direction: linalg::to_vec(u),
        lower_estimate: best,
        minus_infinity,
        t_grid: grid.to_vec(),
        perturbation_count: sequences.len() - 1,
        resolution,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomogeneityVerdict {
    pub lambdas: Vec<f64>,
    pub base: f64,
    pub scaled: Vec<f64>,
    /// Largest `|J(λu) − λJ(u)|`.
    pub max_defect: f64,
    pub passed: bool,
}

/// Compares `estimate(λu)` against `λ·estimate(u)` for every `λ`.
pub fn homogeneity_check<N: NonlinearMap + ?Sized>(
    n: &N,
    u: &DVector<f64>,
    lambdas: &[f64],
    opts: &RecessionOptions,
) -> Result<HomogeneityVerdict, ConditionsError> {
    let base = recession_estimate(n, u, opts)?.value();
    let mut scaled = Vec::with_capacity(lambdas.len());
    let mut max_defect = 0.0f64;
    let mut passed = true;
    for &l in lambdas {
        let s = recession_estimate_scaled(n, u, l, opts)?.value();
        let expected = l * base;
        let defect = if s == expected { 0.0 } else { (s - expected).abs() };
        passed &= defect <= 1e-9 * expected.abs().max(1.0);
        max_defect = max_defect.max(defect);
        scaled.push(s);
    }
    Ok(HomogeneityVerdict { lambdas: lambdas.to_vec(), base, scaled, max_defect, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Theorem {
    /// Bounded quasi-monotone `N` with decay, sign and kernel conditions.
    Ch2Main,
    /// `α`-cocoercive `N` with thresholded sign and kernel conditions.
    Ch3Main,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionVerdict {
    pub passed: bool,
    /// Worst sampled margin; positive means the condition holds with room.
    pub margin: f64,
    /// Nothing to check (empty kernel).
    pub vacuous: bool,
    pub failing_direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub theorem: Theorem,
    pub condition_i: ConditionVerdict,
    pub condition_ii: ConditionVerdict,
    pub condition_iii: ConditionVerdict,
    pub threshold: f64,
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub kernel_dim: usize,
    pub ray_directions: usize,
    pub kernel_mesh_size: usize,
    pub seed: u64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.condition_i.passed && self.condition_ii.passed && self.condition_iii.passed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOptions {
    pub ray_directions: usize,
    pub ray_grid: Vec<f64>,
    /// Extra random unit vectors in the kernel mesh when `dim ker L ≥ 2`.
    pub kernel_random: usize,
    pub recession: RecessionOptions,
    /// Pair count and radius of the cocoercivity check.
    pub samples: usize,
    pub radius: f64,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            ray_directions: 64,
            ray_grid: geometric_grid(1.0, 1e4, 41),
            kernel_random: 16,
            recession: RecessionOptions::default(),
            samples: monotone::DEFAULT_SAMPLES,
            radius: monotone::DEFAULT_RADIUS,
            seed: 0,
        }
    }
}

impl ConditionOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.recession.seed = seed;
        self
    }
}

const DECAY_SLACK: f64 = 0.05;

fn ray_directions(dim: usize, opts: &ConditionOptions) -> Vec<DVector<f64>> {
    let mut rng = sampling::rng(opts.seed ^ 0x7a75);
    (0..opts.ray_directions).map(|_| sampling::unit_vector(&mut rng, dim)).collect()
}

/// Condition (i) of the quasi-monotone theorem: `‖N(u)‖²/‖u‖ → 0`.
///
/// Per ray the tail values are fitted by `t^p`; the ray passes when
/// `p ≤ −0.05` or the values are below `1e-12`. The margin is `−p − 0.05`.
fn decay_condition<N: NonlinearMap + ?Sized>(n: &N, dirs: &[DVector<f64>], grid: &[f64]) -> ConditionVerdict {
    let start = tail_start(grid.len());
    let mut worst = f64::INFINITY;
    let mut failing = None;
    for d in dirs {
        let pts: Vec<(f64, f64)> = grid[start..]
            .iter()
            .map(|&t| (t, n.eval(&(d * t)).norm_squared() / t))
            .collect();
        let margin = if pts.iter().all(|&(_, y)| y <= 1e-12) {
            1.0
        } else if pts.iter().any(|&(_, y)| !(y > 0.0) || !y.is_finite()) {
            f64::NEG_INFINITY
        } else {
            -log_slope(&pts) - DECAY_SLACK
        };
        if !(margin >= worst) {
            worst = margin;
            failing = Some(linalg::to_vec(d));
        }
    }
    let passed = worst >= 0.0;
    ConditionVerdict { passed, margin: worst, vacuous: false, failing_direction: if passed { None } else { failing } }
}

fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in pts {
        let (x, z) = (t.ln(), y.ln());
        sx += x;
        sy += z;
        sxx += x * x;
        sxy += x * z;
    }
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Sign condition: along every ray, `limsup ⟨N(td),d⟩ > threshold`. The
/// margin is the smallest tail maximum minus the threshold.
fn sign_condition<N: NonlinearMap + ?Sized>(
    n: &N,
    dirs: &[DVector<f64>],
    grid: &[f64],
    threshold: f64,
) -> ConditionVerdict {
    let start = tail_start(grid.len());
    let mut worst = f64::INFINITY;
    let mut failing = None;
    for d in dirs {
        let tail_max = grid[start..]
            .iter()
            .map(|&t| n.eval(&(d * t)).dot(d))
            .fold(f64::NEG_INFINITY, |a, v| if v > a || v.is_nan() { v } else { a });
        let margin = tail_max - threshold;
        if !(margin >= worst) {
            worst = margin;
            failing = Some(linalg::to_vec(d));
        }
    }
    let passed = worst > 0.0;
    ConditionVerdict { passed, margin: worst, vacuous: false, failing_direction: if passed { None } else { failing } }
}

/// Unit kernel vectors checked by the kernel condition: `±` each kernel
/// basis vector, `±` the normalised kernel part of `h`, and random unit
/// combinations when the kernel has dimension at least two.
pub fn kernel_mesh(split: &SpaceSplit, h: &DVector<f64>, random: usize, seed: u64) -> Vec<DVector<f64>> {
    let kb = split.kernel_basis();
    let k = kb.ncols();
    let mut mesh = Vec::new();
    if k == 0 {
        return mesh;
    }
    for i in 0..k {
        let e = kb.column(i).clone_owned();
        mesh.push(-&e);
        mesh.push(e);
    }
    let coeffs = kb.transpose() * h;
    let c = coeffs.norm();
    if c > 1e-14 * h.norm().max(1.0) {
        let hk = &kb * coeffs / c;
        mesh.push(-&hk);
        mesh.push(hk);
    }
    if k >= 2 {
        let mut rng = sampling::rng(seed ^ 0x6b65);
        for _ in 0..random {
            mesh.push(&kb * sampling::unit_vector(&mut rng, k));
        }
    }
    mesh
}

/// Kernel condition: `J_N(u) > threshold + ⟨h,u⟩` on the kernel mesh.
fn kernel_condition<N: NonlinearMap + ?Sized>(
    n: &N,
    split: &SpaceSplit,
    h: &DVector<f64>,
    threshold: f64,
    opts: &ConditionOptions,
) -> Result<(ConditionVerdict, usize), ConditionsError> {
    let mesh = kernel_mesh(split, h, opts.kernel_random, opts.seed);
    if mesh.is_empty() {
        let v = ConditionVerdict { passed: true, margin: 0.0, vacuous: true, failing_direction: None };
        return Ok((v, 0));
    }
    let mut worst = f64::INFINITY;
    let mut worst_dir = None;
    let mut any_minus_infinity = false;
    for u in &mesh {
        let est = recession_estimate(n, u, &opts.recession)?;
        any_minus_infinity |= est.minus_infinity;
        let margin = est.lower_estimate - threshold - h.dot(u);
        if !(margin >= worst) || est.minus_infinity {
            worst = margin.min(worst);
            worst_dir = Some(linalg::to_vec(u));
        }
    }
    let passed = worst > 0.0 && !any_minus_infinity;
    let verdict = ConditionVerdict {
        passed,
        margin: worst,
        vacuous: false,
        failing_direction: if passed { None } else { worst_dir },
    };
    Ok((verdict, mesh.len()))
}

fn check_dims<N: NonlinearMap + ?Sized>(split: &SpaceSplit, n: &N, h: &DVector<f64>) -> Result<(), ConditionsError> {
    let d = split.dim();
    for got in [n.dim(), h.len()] {
        if got != d {
            return Err(ConditionsError::Dimension { expected: d, got });
        }
    }
    Ok(())
}

/// Conditions (i)–(iii) of the existence theorem for bounded quasi-monotone
/// nonlinearities: decay of `‖N(u)‖²/‖u‖`, positivity of
/// `limsup ⟨N(u),u⟩/‖u‖`, and `J_N(u) > ⟨h,u⟩` on unit kernel vectors.
pub fn check_ch2<N: NonlinearMap + ?Sized>(
    split: &SpaceSplit,
    n: &N,
    h: &DVector<f64>,
    opts: &ConditionOptions,
) -> Result<ConditionReport, ConditionsError> {
    check_dims(split, n, h)?;
    if n.growth() == Growth::Unspecified {
        return Err(ConditionsError::Precondition(String::from(
            "nonlinearity must declare a growth bound (bounded on bounded sets)",
        )));
    }
    if monotone::classify_quasi_monotone(n) == QuasiMonotoneVerdict::Unknown {
        return Err(ConditionsError::Precondition(String::from(
            "nonlinearity has no quasi-monotonicity certificate",
        )));
    }
    let dirs = ray_directions(n.dim(), opts);
    let condition_i = decay_condition(n, &dirs, &opts.ray_grid);
    let condition_ii = sign_condition(n, &dirs, &opts.ray_grid, 0.0);
    let (condition_iii, mesh) = kernel_condition(n, split, h, 0.0, opts)?;
    Ok(ConditionReport {
        theorem: Theorem::Ch2Main,
        condition_i,
        condition_ii,
        condition_iii,
        threshold: 0.0,
        alpha: None,
        gamma: split.gamma,
        delta: split.delta,
        kernel_dim: split.kernel.len(),
        ray_directions: dirs.len(),
        kernel_mesh_size: mesh,
        seed: opts.seed,
    })
}

/// `γ‖h‖/(δ²α − γ)`, the threshold of the cocoercive existence theorem.
pub fn ch3_threshold(gamma: f64, delta: f64, alpha: f64, h_norm: f64) -> f64 {
    gamma * h_norm / (delta * delta * alpha - gamma)
}

/// Conditions (i)–(iii) of the existence theorem for `α`-cocoercive
/// nonlinearities. Requires `α > γ/δ²`.
pub fn check_ch3<N: NonlinearMap + ?Sized>(
    split: &SpaceSplit,
    n: &N,
    h: &DVector<f64>,
    alpha: f64,
    opts: &ConditionOptions,
) -> Result<ConditionReport, ConditionsError> {
    let bound = split.gamma / (split.delta * split.delta);
    if !(alpha > bound) {
        return Err(ConditionsError::AlphaTooSmall { alpha, bound });
    }
    check_dims(split, n, h)?;
    let threshold = ch3_threshold(split.gamma, split.delta, alpha, h.norm());
    let coco = monotone::check_cocoercive(n, alpha, opts.samples, opts.seed, opts.radius);
    let condition_i = ConditionVerdict {
        passed: coco.passed,
        margin: coco.worst_margin,
        vacuous: false,
        failing_direction: coco.witnesses.first().map(|w| w.u.clone()),
    };
    let dirs = ray_directions(n.dim(), opts);
    let condition_ii = sign_condition(n, &dirs, &opts.ray_grid, threshold);
    let (condition_iii, mesh) = kernel_condition(n, split, h, threshold, opts)?;
    Ok(ConditionReport {
        theorem: Theorem::Ch3Main,
        condition_i,
        condition_ii,
        condition_iii,
        threshold,
        alpha: Some(alpha),
        gamma: split.gamma,
        delta: split.delta,
        kernel_dim: split.kernel.len(),
        ray_directions: dirs.len(),
        kernel_mesh_size: mesh,
        seed: opts.seed,
    })
}

//! Brouwer degree of finite-dimensional maps on balls, Galerkin truncations
//! `Aʲ(u) = Σ_{i≤j} ⟨A(u),eᵢ⟩eᵢ` and the degree ladder over increasing `j`.
//!
//! The degree is computed as `Σ sign det DF(xᵢ)` over roots found by
//! multistart Newton. In dimensions 1 to 3 an independent boundary oracle
//! (endpoint signs, winding number, solid-angle sum) recomputes it from
//! boundary values alone.

use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;
use crate::newton::{self, NewtonOptions};
use crate::prelude::*;
use crate::sampling;

/// Largest dimension accepted by [`brouwer_degree`].
pub const MAX_SIGN_SUM_DIM: usize = 8;
/// Largest dimension with a boundary oracle.
pub const MAX_ORACLE_DIM: usize = 3;

type MapFn<'a> = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a;
type JacFn<'a> = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'a;

/// A continuous map `ℝᵈ → ℝᵈ` with an optional analytic Jacobian.
pub struct FiniteMap<'a> {
    dim: usize,
    f: Box<MapFn<'a>>,
    jac: Option<Box<JacFn<'a>>>,
}

impl core::fmt::Debug for FiniteMap<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FiniteMap")
            .field("dim", &self.dim)
            .field("jacobian", &self.jac.is_some())
            .finish()
    }
}

impl<'a> FiniteMap<'a> {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'a,
    {
        Self { dim, f: Box::new(f), jac: None }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'a,
    {
        self.jac = Some(Box::new(jac));
        self
    }

    /// `x ↦ Mx + b`.
    pub fn affine(matrix: DMatrix<f64>, shift: DVector<f64>) -> Self {
        let dim = matrix.nrows();
        let jm = matrix.clone();
        Self::new(dim, move |x| &matrix * x + &shift).with_jacobian(move |_| jm.clone())
    }

    pub fn linear(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self::affine(matrix, DVector::zeros(n))
    }

    pub fn identity(dim: usize) -> Self {
        Self::linear(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    pub fn has_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    /// Analytic Jacobian, or central differences.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(x),
            None => linalg::fd_jacobian(|y| self.eval(y), x),
        }
    }
}

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn centered(dim: usize, radius: f64) -> Self {
        Self { center: vec![0.0; dim], radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn center_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.center)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeOptions {
    /// Newton starts per dimension.
    pub starts_per_dim: usize,
    /// Boundary points per dimension for `dim ≥ 3` (circle and interval
    /// meshes are fixed).
    pub boundary_samples_per_dim: usize,
    /// Boundary zero threshold; `None` means `1e-8·(‖target‖+1)`.
    pub boundary_margin: Option<f64>,
    /// Root dedup radius as a fraction of the ball radius.
    pub dedup_fraction: f64,
    /// `σ_min/σ_max` below which a root's Jacobian counts as singular.
    pub singular_ratio: f64,
    pub seed: u64,
    pub grid_oracle: bool,
    /// Recursion budget of the 2-D and 3-D oracles.
    pub oracle_max_depth: usize,
}

impl Default for DegreeOptions {
    fn default() -> Self {
        Self {
            starts_per_dim: 20,
            boundary_samples_per_dim: 100,
            boundary_margin: None,
            dedup_fraction: 1e-6,
            singular_ratio: 1e-10,
            seed: 0,
            grid_oracle: true,
            oracle_max_depth: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DegreeMethod {
    SignSum,
    GridOracle,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegreeResult {
    pub degree: i64,
    /// Method whose value is reported. The oracle wins on disagreement.
    pub method: DegreeMethod,
    pub sign_sum_degree: i64,
    pub oracle_degree: Option<i64>,
    pub roots_found: Vec<Vec<f64>>,
    /// Both methods ran and agree.
    pub certified: bool,
    /// Target shift applied after a singular root, if any.
    pub target_shift: Option<Vec<f64>>,
    /// Smallest `‖F(x) − target‖` seen on the boundary mesh.
    pub boundary_min: f64,
    pub newton_converged: usize,
    pub newton_starts: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DegreeError {
    #[error("target is (numerically) attained on the boundary: |F(x) - target| = {value:e} at {point:?}")]
    BoundaryZero { point: Vec<f64>, value: f64 },
    #[error("dimension {0} exceeds the supported maximum of 8")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: map has dim {map}, ball {ball}, target {target}")]
    Dimension { map: usize, ball: usize, target: usize },
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("Galerkin truncation j = {j} exceeds basis size {basis}")]
    Truncation { j: usize, basis: usize },
    #[error("degree ladder did not stabilize over j = {j_values:?} (degrees {degrees:?})")]
    Unstabilized { j_values: Vec<usize>, degrees: Vec<i64> },
}

/// Brouwer degree `deg(F, B, target)`.
pub fn brouwer_degree(
    f: &FiniteMap<'_>,
    ball: &Ball,
    target: &DVector<f64>,
    opts: &DegreeOptions,
) -> Result<DegreeResult, DegreeError> {
    let d = f.dim();
    if ball.dim() != d || target.len() != d {
        return Err(DegreeError::Dimension { map: d, ball: ball.dim(), target: target.len() });
    }
    if d > MAX_SIGN_SUM_DIM {
        return Err(DegreeError::DimensionTooLarge(d));
    }
    if !(ball.radius > 0.0 && ball.radius.is_finite()) {
        return Err(DegreeError::InvalidRadius(ball.radius));
    }
    let margin = opts.boundary_margin.unwrap_or(1e-8 * (target.norm() + 1.0));
    let boundary_min = boundary_check(f, ball, target, margin, opts)?;

    let mut warnings = Vec::new();
    let mut rng = sampling::rng(opts.seed ^ 0x5eed_de90_u64);
    let mut tgt = target.clone();
    let mut shift: Option<DVector<f64>> = None;
    let mut sweep = None;
    for _attempt in 0..4 {
        let s = sign_sum(f, ball, &tgt, opts);
        if !s.singular {
            sweep = Some(s);
            break;
        }
        let bump = sampling::unit_vector(&mut rng, d) * (1e-9 * (1.0 + target.norm()));
        tgt = target + &bump;
        shift = Some(bump);
    }
    let sweep = match sweep {
        Some(s) => s,
        None => {
            warnings.push(String::from("singular root persisted after target shifts"));
            sign_sum(f, ball, &tgt, opts)
        }
    };
    if shift.is_some() {
        warnings.push(String::from("singular Jacobian at a root; target shifted by 1e-9"));
    }
    if sweep.starts > 0 && (sweep.converged as f64) < 0.25 * sweep.starts as f64 {
        warnings.push(format!(
            "only {} of {} Newton starts converged; roots may have been missed",
            sweep.converged, sweep.starts
        ));
    }

    let oracle = if opts.grid_oracle && d <= MAX_ORACLE_DIM {
        match boundary_oracle(f, ball, &tgt, margin, opts.oracle_max_depth) {
            Ok(v) => Some(v),
            Err(OracleFailure::Zero(point, value)) => {
                return Err(DegreeError::BoundaryZero { point: linalg::to_vec(&point), value })
            }
            Err(OracleFailure::Unresolved(total)) => {
                warnings.push(format!("boundary oracle unresolved (angle sum {total})"));
                None
            }
        }
    } else {
        if d > MAX_ORACLE_DIM {
            warnings.push(format!("no boundary oracle in dimension {d}; result uncertified"));
        }
        None
    };

    let (degree, method, certified) = match oracle {
        Some(o) if o == sweep.degree => (o, DegreeMethod::SignSum, true),
        Some(o) => {
            warnings.push(format!("sign sum {} disagrees with boundary oracle {o}", sweep.degree));
            (o, DegreeMethod::GridOracle, false)
        }
        None => (sweep.degree, DegreeMethod::SignSum, false),
    };
    Ok(DegreeResult {
        degree,
        method,
        sign_sum_degree: sweep.degree,
        oracle_degree: oracle,
        roots_found: sweep.roots.iter().map(linalg::to_vec).collect(),
        certified,
        target_shift: shift.as_ref().map(linalg::to_vec),
        boundary_min,
        newton_converged: sweep.converged,
        newton_starts: sweep.starts,
        warnings,
    })
}

fn boundary_points(ball: &Ball, opts: &DegreeOptions) -> Vec<DVector<f64>> {
    let d = ball.dim();
    let c = ball.center_vec();
    let r = ball.radius;
    let mut dirs: Vec<DVector<f64>> = Vec::new();
    match d {
        1 => {
            dirs.push(DVector::from_element(1, 1.0));
            dirs.push(DVector::from_element(1, -1.0));
        }
        2 => {
            for k in 0..256 {
                let th = 2.0 * PI * k as f64 / 256.0;
                dirs.push(DVector::from_vec(vec![th.cos(), th.sin()]));
            }
        }
        _ => {
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = DVector::zeros(d);
                    e[i] = s;
                    dirs.push(e);
                }
            }
            let mut rng = sampling::rng(opts.seed ^ 0xb0_u64);
            for _ in 0..opts.boundary_samples_per_dim * d {
                dirs.push(sampling::unit_vector(&mut rng, d));
            }
        }
    }
    dirs.into_iter().map(|e| &c + e * r).collect()
}

fn boundary_check(
    f: &FiniteMap<'_>,
    ball: &Ball,
    target: &DVector<f64>,
    margin: f64,
    opts: &DegreeOptions,
) -> Result<f64, DegreeError> {
    let mut min = f64::INFINITY;
    for x in boundary_points(ball, opts) {
        let v = (f.eval(&x) - target).norm();
        if !(v > margin) {
            return Err(DegreeError::BoundaryZero { point: linalg::to_vec(&x), value: v });
        }
        min = min.min(v);
    }
    Ok(min)
}

struct Sweep {
    degree: i64,
    roots: Vec<DVector<f64>>,
    singular: bool,
    converged: usize,
    starts: usize,
}

fn sign_sum(f: &FiniteMap<'_>, ball: &Ball, target: &DVector<f64>, opts: &DegreeOptions) -> Sweep {
    let d = f.dim();
    let c = ball.center_vec();
    let r = ball.radius;
    let starts = (opts.starts_per_dim * d).max(1);
    let nopts = NewtonOptions {
        tol: 1e-11 * (1.0 + target.norm()),
        max_iter: 60,
        ..Default::default()
    };
    let residual = |x: &DVector<f64>| f.eval(x) - target;
    let jacobian = |x: &DVector<f64>| Some(f.jacobian(x));
    let dedup = opts.dedup_fraction * r;
    let mut roots: Vec<DVector<f64>> = Vec::new();
    let mut converged = 0;
    for k in 0..starts {
        let x0 = if k == 0 {
            c.clone()
        } else {
            let h = sampling::halton(k as u64, d);
            DVector::from_fn(d, |i, _| c[i] + r * (2.0 * h[i] - 1.0))
        };
        let Ok(out) = newton::damped_newton(residual, jacobian, x0, &nopts) else {
            continue;
        };
        converged += 1;
        if (&out.x - &c).norm() >= r {
            continue;
        }
        if roots.iter().all(|y| (y - &out.x).norm() > dedup) {
            roots.push(out.x);
        }
    }
    let mut degree = 0;
    let mut singular = false;
    for x in &roots {
        let j = f.jacobian(x);
        let sv = j.clone().svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0f64, |a, s| a.max(*s));
        let smin = sv.iter().fold(f64::INFINITY, |a, s| a.min(*s));
        if !(smax > 0.0) || smin / smax < opts.singular_ratio {
            singular = true;
            continue;
        }
        degree += if j.determinant() > 0.0 { 1 } else { -1 };
    }
    Sweep { degree, roots, singular, converged, starts }
}

enum OracleFailure {
    Zero(DVector<f64>, f64),
    Unresolved(f64),
}

fn boundary_oracle(
    f: &FiniteMap<'_>,
    ball: &Ball,
    target: &DVector<f64>,
    margin: f64,
    max_depth: usize,
) -> Result<i64, OracleFailure> {
    let c = ball.center_vec();
    let r = ball.radius;
    let g = |dir: &DVector<f64>| -> Result<DVector<f64>, OracleFailure> {
        let x = &c + dir * r;
        let v = f.eval(&x) - target;
        let n = v.norm();
        if !(n > margin) {
            return Err(OracleFailure::Zero(x, n));
        }
        Ok(v / n)
    };
    let total = match f.dim() {
        1 => {
            let a = g(&DVector::from_element(1, -1.0))?;
            let b = g(&DVector::from_element(1, 1.0))?;
            return Ok(((b[0].signum() - a[0].signum()) / 2.0) as i64);
        }
        2 => winding_number(&g, max_depth)?,
        3 => solid_angle_sum(&g, max_depth)?,
        _ => unreachable!("oracle only runs up to dimension 3"),
    };
    let rounded = total.round();
    if (total - rounded).abs() > 0.05 {
        return Err(OracleFailure::Unresolved(total));
    }
    Ok(rounded as i64)
}

const ARC_ANGLE: f64 = 0.3;

fn winding_number<G>(g: &G, max_depth: usize) -> Result<f64, OracleFailure>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>, OracleFailure>,
{
    let dir = |th: f64| DVector::from_vec(vec![th.cos(), th.sin()]);
    let pieces = 64;
    let mut total = 0.0;
    for k in 0..pieces {
        let a = 2.0 * PI * k as f64 / pieces as f64;
        let b = 2.0 * PI * (k + 1) as f64 / pieces as f64;
        let ga = g(&dir(a))?;
        let gb = g(&dir(b))?;
        total += arc_turn(g, &dir, a, b, ga, gb, max_depth)?;
    }
    Ok(total / (2.0 * PI))
}

fn arc_turn<G, D>(
    g: &G,
    dir: &D,
    a: f64,
    b: f64,
    ga: DVector<f64>,
    gb: DVector<f64>,
    depth: usize,
) -> Result<f64, OracleFailure>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>, OracleFailure>,
    D: Fn(f64) -> DVector<f64>,
{
    let turn = (ga[0] * gb[1] - ga[1] * gb[0]).atan2(ga[0] * gb[0] + ga[1] * gb[1]);
    if turn.abs() <= ARC_ANGLE || depth == 0 {
        if depth == 0 && turn.abs() > 0.5 * PI {
            return Err(OracleFailure::Unresolved(turn));
        }
        return Ok(turn);
    }
    let m = 0.5 * (a + b);
    let gm = g(&dir(m))?;
    Ok(arc_turn(g, dir, a, m, ga, gm.clone(), depth - 1)? + arc_turn(g, dir, m, b, gm, gb, depth - 1)?)
}

fn solid_angle_sum<G>(g: &G, max_depth: usize) -> Result<f64, OracleFailure>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>, OracleFailure>,
{
    let e = |x: f64, y: f64, z: f64| DVector::from_vec(vec![x, y, z]);
    let verts = [
        e(1.0, 0.0, 0.0),
        e(-1.0, 0.0, 0.0),
        e(0.0, 1.0, 0.0),
        e(0.0, -1.0, 0.0),
        e(0.0, 0.0, 1.0),
        e(0.0, 0.0, -1.0),
    ];
    // Outward-oriented octahedron faces.
    let faces = [
        (0, 2, 4),
        (2, 1, 4),
        (1, 3, 4),
        (3, 0, 4),
        (2, 0, 5),
        (1, 2, 5),
        (3, 1, 5),
        (0, 3, 5),
    ];
    let images: Vec<DVector<f64>> = verts.iter().map(g).collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for (i, j, k) in faces {
        total += spherical_patch(
            g,
            [&verts[i], &verts[j], &verts[k]],
            [&images[i], &images[j], &images[k]],
            max_depth,
        )?;
    }
    Ok(total / (4.0 * PI))
}

fn signed_solid_angle(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * triple.atan2(denom)
}

fn spherical_patch<G>(
    g: &G,
    v: [&DVector<f64>; 3],
    img: [&DVector<f64>; 3],
    depth: usize,
) -> Result<f64, OracleFailure>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>, OracleFailure>,
{
    let spread = [(0, 1), (1, 2), (2, 0)]
        .iter()
        .map(|&(p, q)| img[p].dot(img[q]).clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);
    if spread <= ARC_ANGLE || depth == 0 {
        if depth == 0 && spread > 0.5 * PI {
            return Err(OracleFailure::Unresolved(spread));
        }
        return Ok(signed_solid_angle(img[0], img[1], img[2]));
    }
    let mid = |p: &DVector<f64>, q: &DVector<f64>| {
        let m = p + q;
        let n = m.norm();
        m / n
    };
    let m01 = mid(v[0], v[1]);
    let m12 = mid(v[1], v[2]);
    let m20 = mid(v[2], v[0]);
    let g01 = g(&m01)?;
    let g12 = g(&m12)?;
    let g20 = g(&m20)?;
    Ok(spherical_patch(g, [v[0], &m01, &m20], [img[0], &g01, &g20], depth - 1)?
        + spherical_patch(g, [&m01, v[1], &m12], [&g01, img[1], &g12], depth - 1)?
        + spherical_patch(g, [&m20, &m12, v[2]], [&g20, &g12, img[2]], depth - 1)?
        + spherical_patch(g, [&m01, &m12, &m20], [&g01, &g12, &g20], depth - 1)?)
}

/// Galerkin truncation in coordinates: `y ↦ Eⱼᵀ A(Eⱼ y)` where `Eⱼ` holds
/// the first `j` basis columns. This is `Σ_{i≤j} ⟨A(u),eᵢ⟩eᵢ` restricted to
/// `span{e₁,…,eⱼ}`.
pub fn galerkin_map<'b>(
    a: &'b FiniteMap<'_>,
    basis: &DMatrix<f64>,
    j: usize,
) -> Result<FiniteMap<'b>, DegreeError> {
    if j > basis.ncols() || j == 0 {
        return Err(DegreeError::Truncation { j, basis: basis.ncols() });
    }
    if basis.nrows() != a.dim() {
        return Err(DegreeError::Dimension { map: a.dim(), ball: basis.nrows(), target: basis.nrows() });
    }
    let e = basis.columns(0, j).clone_owned();
    let et = e.transpose();
    let (e2, et2) = (e.clone(), et.clone());
    let map = FiniteMap::new(j, move |y| &et * a.eval(&(&e * y)));
    Ok(map.with_jacobian(move |y| &et2 * a.jacobian(&(&e2 * y)) * &e2))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GalerkinLadder {
    /// Number of basis vectors available.
    pub basis_size: usize,
    pub j_values: Vec<usize>,
    pub degrees: Vec<DegreeResult>,
    /// Index into `j_values` from which every rung agrees.
    pub stabilized_at: Option<usize>,
}

impl GalerkinLadder {
    pub fn degree_values(&self) -> Vec<i64> {
        self.degrees.iter().map(|d| d.degree).collect()
    }

    pub fn stabilized_degree(&self) -> Result<i64, DegreeError> {
        match self.stabilized_at {
            Some(i) => Ok(self.degrees[i].degree),
            None => Err(DegreeError::Unstabilized {
                j_values: self.j_values.clone(),
                degrees: self.degree_values(),
            }),
        }
    }
}

/// Degrees of the truncations `Aʲ` on `B(c, r) ∩ span{e₁,…,eⱼ}` for each `j`
/// in `j_list`.
///
/// Stabilization is declared at the first rung from which all later rungs
/// agree, provided at least two rungs agree or the rung already uses the
/// whole basis.
pub fn degree_ladder(
    a: &FiniteMap<'_>,
    basis: &DMatrix<f64>,
    ball: &Ball,
    target: &DVector<f64>,
    j_list: &[usize],
    opts: &DegreeOptions,
) -> Result<GalerkinLadder, DegreeError> {
    let center = ball.center_vec();
    let mut results = Vec::with_capacity(j_list.len());
    for &j in j_list {
        let fj = galerkin_map(a, basis, j)?;
        let e = basis.columns(0, j);
        let cj = e.transpose() * &center;
        let tj = e.transpose() * target;
        let ball_j = Ball::new(linalg::to_vec(&cj), ball.radius);
        results.push(brouwer_degree(&fj, &ball_j, &tj, opts)?);
    }
    let degs: Vec<i64> = results.iter().map(|r| r.degree).collect();
    let mut stabilized_at = None;
    for i in 0..degs.len() {
        if degs[i..].iter().all(|&d| d == degs[i]) {
            if degs.len() - i >= 2 || j_list[i] == basis.ncols() {
                stabilized_at = Some(i);
            }
            break;
        }
    }
    Ok(GalerkinLadder {
        basis_size: basis.ncols(),
        j_values: j_list.to_vec(),
        degrees: results,
        stabilized_at,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomotopyVerdict {
    pub t_grid: Vec<f64>,
    /// Stabilized degree per `t`, `None` where the ladder did not stabilize.
    pub degrees: Vec<Option<i64>>,
    pub passed: bool,
    /// First `t` at which the target hit the boundary image.
    pub inadmissible_at: Option<f64>,
    /// Set for affine paths whose degree varied: such homotopies need not
    /// be admissible, so the outcome says nothing about the degree theory.
    pub inconclusive: bool,
}

/// Stabilized ladder degree along `t ↦ path(t)` for every `t` in `t_grid`.
#[allow(clippy::too_many_arguments)]
pub fn homotopy_invariance_check<'a, P>(
    path: P,
    basis: &DMatrix<f64>,
    ball: &Ball,
    target: &DVector<f64>,
    t_grid: &[f64],
    j_list: &[usize],
    affine: bool,
    opts: &DegreeOptions,
) -> HomotopyVerdict
where
    P: Fn(f64) -> FiniteMap<'a>,
{
    let mut degrees = Vec::with_capacity(t_grid.len());
    let mut inadmissible_at = None;
    for &t in t_grid {
        let at = path(t);
        match degree_ladder(&at, basis, ball, target, j_list, opts) {
            Ok(l) => degrees.push(l.stabilized_degree().ok()),
            Err(DegreeError::BoundaryZero { .. }) => {
                inadmissible_at = Some(t);
                degrees.push(None);
                break;
            }
            Err(_) => degrees.push(None),
        }
    }
    let constant = inadmissible_at.is_none()
        && degrees.iter().all(|d| d.is_some())
        && degrees.windows(2).all(|w| w[0] == w[1]);
    HomotopyVerdict {
        t_grid: t_grid.to_vec(),
        degrees,
        passed: constant,
        inadmissible_at,
        inconclusive: affine && !constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn quadratic() -> FiniteMap<'static> {
        FiniteMap::new(1, |x| v(&[x[0] * x[0] - 1.0])).with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 * x[0]))
    }

    #[test]
    fn identity_has_degree_one() {
        for d in 1..=4 {
            let r = brouwer_degree(&FiniteMap::identity(d), &Ball::centered(d, 1.0), &DVector::zeros(d), &DegreeOptions::default())
                .unwrap();
            assert_eq!(r.degree, 1, "dim {d}");
            assert_eq!(r.certified, d <= 3);
        }
    }

    #[test]
    fn negative_identity_parity() {
        let opts = DegreeOptions::default();
        let neg = |d: usize| FiniteMap::linear(-DMatrix::identity(d, d));
        assert_eq!(brouwer_degree(&neg(1), &Ball::centered(1, 1.0), &v(&[0.0]), &opts).unwrap().degree, -1);
        assert_eq!(brouwer_degree(&neg(2), &Ball::centered(2, 1.0), &v(&[0.0, 0.0]), &opts).unwrap().degree, 1);
        assert_eq!(brouwer_degree(&neg(3), &Ball::centered(3, 1.0), &DVector::zeros(3), &opts).unwrap().degree, -1);
    }

    #[test]
    fn quadratic_degrees() {
        let opts = DegreeOptions::default();
        let q = quadratic();
        let whole = brouwer_degree(&q, &Ball::new(vec![0.0], 2.0), &v(&[0.0]), &opts).unwrap();
        assert_eq!(whole.degree, 0);
        assert_eq!(whole.roots_found.len(), 2);
        assert!(whole.certified);
        let right = brouwer_degree(&q, &Ball::new(vec![1.0], 1.0), &v(&[0.0]), &opts);
        // x = 2 is fine but x = 0 is not a root, so the boundary is clean
        assert_eq!(right.unwrap().degree, 1);
        let left = brouwer_degree(&q, &Ball::new(vec![-1.0], 1.0), &v(&[0.0]), &opts).unwrap();
        assert_eq!(left.degree, -1);
    }

    #[test]
    fn boundary_zero_is_an_error() {
        let q = quadratic();
        let err = brouwer_degree(&q, &Ball::new(vec![0.0], 1.0), &v(&[0.0]), &DegreeOptions::default());
        assert!(matches!(err, Err(DegreeError::BoundaryZero { .. })));
    }

    #[test]
    fn complex_square_has_degree_two() {
        // z ↦ z² as a map of ℝ²; the root at 0 is singular.
        let sq = FiniteMap::new(2, |x| v(&[x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1]]));
        let r = brouwer_degree(&sq, &Ball::centered(2, 1.0), &v(&[0.0, 0.0]), &DegreeOptions::default()).unwrap();
        assert_eq!(r.degree, 2);
        assert_eq!(r.oracle_degree, Some(2));
        assert!(r.target_shift.is_some());
    }

    #[test]
    fn three_dim_reflection_oracle() {
        let m = DMatrix::from_diagonal(&v(&[1.0, 2.0, -0.5]));
        let r = brouwer_degree(&FiniteMap::linear(m), &Ball::centered(3, 1.0), &DVector::zeros(3), &DegreeOptions::default())
            .unwrap();
        assert_eq!(r.degree, -1);
        assert_eq!(r.oracle_degree, Some(-1));
    }

    #[test]
    fn target_outside_image_gives_zero() {
        let r = brouwer_degree(&FiniteMap::identity(2), &Ball::centered(2, 1.0), &v(&[3.0, 0.0]), &DegreeOptions::default())
            .unwrap();
        assert_eq!(r.degree, 0);
        assert!(r.certified);
    }

    #[test]
    fn galerkin_truncation_of_diagonal() {
        let a = FiniteMap::linear(DMatrix::from_diagonal(&v(&[1.0, 2.0, 3.0])));
        let basis = DMatrix::identity(3, 3);
        let g = galerkin_map(&a, &basis, 2).unwrap();
        assert_eq!(g.eval(&v(&[1.0, 1.0])), v(&[1.0, 2.0]));
        let full = galerkin_map(&a, &basis, 3).unwrap();
        assert_eq!(full.eval(&v(&[1.0, 1.0, 1.0])), v(&[1.0, 2.0, 3.0]));
        assert!(galerkin_map(&a, &basis, 4).is_err());
    }

    #[test]
    fn ladder_of_identity_stabilizes_immediately() {
        let a = FiniteMap::identity(5);
        let l = degree_ladder(&a, &DMatrix::identity(5, 5), &Ball::centered(5, 1.0), &DVector::zeros(5), &[1, 2, 3, 5], &DegreeOptions::default())
            .unwrap();
        assert_eq!(l.degree_values(), vec![1, 1, 1, 1]);
        assert_eq!(l.stabilized_at, Some(0));
    }

    #[test]
    fn unstabilized_ladder_is_a_diagnostic() {
        // Alternating signs along the basis make the truncated degree flip.
        let m = DMatrix::from_diagonal(&v(&[1.0, -1.0, -1.0, 1.0]));
        let a = FiniteMap::linear(m);
        let l = degree_ladder(&a, &DMatrix::identity(4, 4), &Ball::centered(4, 1.0), &DVector::zeros(4), &[1, 2], &DegreeOptions::default())
            .unwrap();
        assert_eq!(l.degree_values(), vec![1, -1]);
        assert!(matches!(l.stabilized_degree(), Err(DegreeError::Unstabilized { .. })));
    }

    #[test]
    fn identity_to_double_homotopy() {
        let basis = DMatrix::identity(3, 3);
        let verdict = homotopy_invariance_check(
            |t| FiniteMap::linear(DMatrix::identity(3, 3) * (1.0 + t)),
            &basis,
            &Ball::centered(3, 1.0),
            &DVector::zeros(3),
            &[0.0, 0.5, 1.0],
            &[2, 3],
            true,
            &DegreeOptions::default(),
        );
        assert!(verdict.passed);
        assert_eq!(verdict.degrees, vec![Some(1); 3]);
    }

    #[test]
    fn homotopy_through_boundary_is_inadmissible() {
        let basis = DMatrix::identity(1, 1);
        let verdict = homotopy_invariance_check(
            |t| FiniteMap::affine(DMatrix::identity(1, 1), v(&[-2.0 * t])),
            &basis,
            &Ball::centered(1, 1.0),
            &DVector::zeros(1),
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            &[1],
            false,
            &DegreeOptions::default(),
        );
        assert_eq!(verdict.inadmissible_at, Some(0.5));
        assert!(!verdict.passed);
    }
}

//! Problem files: the JSON schema, loading with field-path diagnostics, and
//! construction of the operator, nonlinearity and right-hand side.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use semilinear_core::monotone::{LinearMap, NonlinearMap, ZeroMap};
use semilinear_core::nonlinearities::{NemytskiiMap, RadialMap, ScalarFn};
use semilinear_core::problems::{self, Potential, Shift};
use semilinear_core::sampling;
use semilinear_core::solver::{ContinuationOptions, Schedule, SolveConfig, Strategy};
use semilinear_core::spectral::{self, SymOperator};
use semilinear_core::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub nonlinearity: NonlinearitySpec,
    pub h: VectorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Dense { rows: Vec<Vec<f64>> },
    SyntheticSpectrum { eigenvalues: Vec<f64>, seed: u64 },
    #[serde(rename = "schrodinger_1d")]
    Schrodinger1d { n: usize, length: f64, potential: Potential, shift: Shift },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant { value: f64 },
    Linear { slope: f64 },
    SinPerturbed { slope: f64, amplitude: f64 },
    Arctan { scale: f64 },
    Power { coeff: f64, exponent: f64 },
    Polynomial { coefficients: Vec<f64> },
}

impl ScalarSpec {
    pub fn to_fn(&self) -> ScalarFn {
        match self {
            ScalarSpec::Constant { value } => ScalarFn::Constant(*value),
            ScalarSpec::Linear { slope } => ScalarFn::Linear { slope: *slope },
            ScalarSpec::SinPerturbed { slope, amplitude } => {
                ScalarFn::SinPerturbed { slope: *slope, amplitude: *amplitude }
            }
            ScalarSpec::Arctan { scale } => ScalarFn::Arctan { scale: *scale },
            ScalarSpec::Power { coeff, exponent } => ScalarFn::Power { coeff: *coeff, exponent: *exponent },
            ScalarSpec::Polynomial { coefficients } => ScalarFn::Polynomial { coefficients: coefficients.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Zero,
    /// `βI`.
    Linear { beta: f64 },
    Matrix { rows: Vec<Vec<f64>> },
    /// `φ(‖u‖)·P(u)` with `P` the projection onto the unit ball.
    Radial { phi: ScalarSpec },
    /// Componentwise `f` with `β ≤ f′ ≤ 1/α`.
    Nemytskii { f: ScalarSpec, alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Values(Vec<f64>),
    Generator(VectorGenerator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorGenerator {
    Constant { value: f64 },
    /// Seeded Gaussian direction scaled to `norm`.
    Random { seed: u64, norm: f64 },
    /// `scale` times the eigenvector of the `index`-th smallest eigenvalue.
    Eigenvector { index: usize, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default = "default_eps_start")]
    pub eps_start: f64,
    #[serde(default = "default_eps_factor")]
    pub eps_factor: f64,
    #[serde(default = "default_eps_steps")]
    pub eps_steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default = "default_true")]
    pub check_conditions: bool,
}

fn default_eps_start() -> f64 {
    0.5
}
fn default_eps_factor() -> f64 {
    0.5
}
fn default_eps_steps() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            strategy: None,
            eps_start: default_eps_start(),
            eps_factor: default_eps_factor(),
            eps_steps: default_eps_steps(),
            tol: default_tol(),
            seed: 0,
            warm_start: true,
            check_conditions: true,
        }
    }
}

/// A problem ready for the solver.
pub struct Problem {
    pub operator: SymOperator,
    pub map: Box<dyn NonlinearMap>,
    pub h: DVector<f64>,
    pub delta: Option<f64>,
    pub config: SolveConfig,
}

fn invalid(msg: impl std::fmt::Display) -> SpecError {
    SpecError::Invalid(msg.to_string())
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| SpecError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Pretty JSON with a trailing newline; fields in declaration order.
    pub fn to_json(&self) -> String {
        to_canonical_json(self)
    }

    pub fn build_operator(&self) -> Result<SymOperator, SpecError> {
        match &self.operator {
            OperatorSpec::Dense { rows } => SymOperator::from_rows(rows).map_err(invalid),
            OperatorSpec::SyntheticSpectrum { eigenvalues, seed } => {
                problems::synthetic_spectrum(eigenvalues, *seed).map_err(invalid)
            }
            OperatorSpec::Schrodinger1d { n, length, potential, shift } => {
                let v = potential.values(*n, *length).map_err(invalid)?;
                problems::schrodinger_1d(*n, *length, &v, *shift).map_err(invalid)
            }
        }
    }

    pub fn build_map(&self, dim: usize) -> Result<Box<dyn NonlinearMap>, SpecError> {
        Ok(match &self.nonlinearity {
            NonlinearitySpec::Zero => Box::new(ZeroMap { dim }),
            NonlinearitySpec::Linear { beta } => {
                if !beta.is_finite() {
                    return Err(invalid("beta must be finite"));
                }
                Box::new(LinearMap::scaled_identity(dim, *beta))
            }
            NonlinearitySpec::Matrix { rows } => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(invalid(format!("nonlinearity matrix must be {dim}x{dim}")));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("nonlinearity matrix has non-finite entries"));
                }
                Box::new(LinearMap::new(DMatrix::from_fn(dim, dim, |i, j| rows[i][j])))
            }
            NonlinearitySpec::Radial { phi } => Box::new(RadialMap::new(dim, phi.to_fn()).map_err(invalid)?),
            NonlinearitySpec::Nemytskii { f, alpha, beta } => {
                Box::new(NemytskiiMap::new(dim, f.to_fn(), *alpha, *beta).map_err(invalid)?)
            }
        })
    }

    pub fn build_h(&self, op: &SymOperator) -> Result<DVector<f64>, SpecError> {
        let n = op.dim();
        let h = match &self.h {
            VectorSpec::Values(v) => {
                if v.len() != n {
                    return Err(invalid(format!("h has {} entries, operator has dim {n}", v.len())));
                }
                DVector::from_column_slice(v)
            }
            VectorSpec::Generator(VectorGenerator::Constant { value }) => DVector::from_element(n, *value),
            VectorSpec::Generator(VectorGenerator::Random { seed, norm }) => {
                let mut rng = sampling::rng(*seed);
                sampling::unit_vector(&mut rng, n) * *norm
            }
            VectorSpec::Generator(VectorGenerator::Eigenvector { index, scale }) => {
                if *index >= n {
                    return Err(invalid(format!("eigenvector index {index} out of range for dim {n}")));
                }
                let dec = spectral::eigendecompose(op).map_err(invalid)?;
                dec.eigenvectors().column(*index) * *scale
            }
        };
        if h.iter().any(|v| !v.is_finite()) {
            return Err(invalid("h has non-finite entries"));
        }
        Ok(h)
    }

    pub fn solve_config(&self) -> Result<SolveConfig, SpecError> {
        let s = &self.solver;
        let schedule = Schedule::geometric(s.eps_start, s.eps_factor, s.eps_steps).map_err(invalid)?;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(invalid(format!("tol must be positive, got {}", s.tol)));
        }
        Ok(SolveConfig {
            strategy: s.strategy,
            delta: self.delta,
            continuation: ContinuationOptions {
                schedule,
                tol: s.tol,
                warm_start: s.warm_start,
                ..Default::default()
            },
            check_conditions: s.check_conditions,
            seed: s.seed,
            ..Default::default()
        })
    }

    pub fn build(&self) -> Result<Problem, SpecError> {
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid(format!("delta must be positive, got {d}")));
            }
        }
        let operator = self.build_operator()?;
        let map = self.build_map(operator.dim())?;
        let h = self.build_h(&operator)?;
        let config = self.solve_config()?;
        Ok(Problem { operator, map, h, delta: self.delta, config })
    }
}

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, SpecError> {
    let text = fs::read_to_string(path).map_err(|source| SpecError::Read { path: path.to_path_buf(), source })?;
    ProblemSpec::from_json(&text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), SpecError> {
    fs::write(path, text).map_err(|source| SpecError::Write { path: path.to_path_buf(), source })
}

pub fn save_report<T: Serialize + ?Sized>(report: &T, path: &Path) -> Result<(), SpecError> {
    write_text(path, &to_canonical_json(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_dense_problem_loads() {
        let spec = ProblemSpec::from_json(
            r#"{"operator":{"kind":"dense","rows":[[-1,0],[0,1]]},"nonlinearity":{"name":"zero"},"h":[1,2]}"#,
        )
        .unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.operator.dim(), 2);
        assert_eq!(p.h, DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(spec.solver, SolverSpec::default());
    }

    #[test]
    fn unknown_nonlinearity_names_the_field() {
        let err = ProblemSpec::from_json(
            r#"{"operator":{"kind":"dense","rows":[[1]]},"nonlinearity":{"name":"cubic"},"h":[0]}"#,
        )
        .unwrap_err();
        match err {
            SpecError::Schema { path, message } => {
                assert!(path.starts_with("nonlinearity"), "{path}");
                assert!(message.contains("cubic"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = ProblemSpec::from_json(
            r#"{"operator":{"kind":"dense","rows":[[1,0],[0,1]]},"nonlinearity":{"name":"zero"},"h":[1]}"#,
        )
        .unwrap();
        assert!(matches!(spec.build(), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn generated_h() {
        let spec = ProblemSpec::from_json(
            r#"{"operator":{"kind":"synthetic_spectrum","eigenvalues":[-1,0,2],"seed":4},
                "nonlinearity":{"name":"linear","beta":1},
                "h":{"kind":"random","seed":9,"norm":2}}"#,
        )
        .unwrap();
        let p = spec.build().unwrap();
        assert!((p.h.norm() - 2.0).abs() < 1e-12);
    }
}

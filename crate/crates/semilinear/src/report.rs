//! Report output: CSV traces and the configuration hash.

use std::hash::{DefaultHasher, Hash, Hasher};

use semilinear_core::solver::{EpsTraceRow, SolveReport, SolveStatus};
use semilinear_core::spectral::SplitSummary;
use serde::{Deserialize, Serialize};

/// Stable 64-bit hash of the canonical problem and the effective options.
pub fn config_hash(canonical_problem: &str, options: &str) -> u64 {
    let mut h = DefaultHasher::new();
    canonical_problem.hash(&mut h);
    options.hash(&mut h);
    h.finish()
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("csv rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// `eps,norm,residual,unperturbed_residual` rows.
pub fn trace_csv(report: &SolveReport) -> String {
    if report.eps_trace.is_empty() {
        return String::from("eps,norm,residual,unperturbed_residual\n");
    }
    to_csv::<EpsTraceRow>(&report.eps_trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub block: String,
    pub kernel: bool,
}

pub fn eigen_rows(summary: &SplitSummary) -> Vec<EigenRow> {
    summary
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &eigenvalue)| EigenRow {
            index,
            eigenvalue,
            block: String::from(if index < summary.s { "h1" } else { "h2" }),
            kernel: eigenvalue.abs() <= summary.zero_tol,
        })
        .collect()
}

pub fn eigen_csv(summary: &SplitSummary) -> String {
    to_csv(&eigen_rows(summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub input: String,
    pub seed: u64,
    pub status: String,
    pub exit_code: i32,
    pub residual: Option<f64>,
    pub steps: usize,
    pub final_eps: Option<f64>,
    pub norm: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_report(input: String, seed: u64, report: &SolveReport) -> Self {
        let last = report.eps_trace.last();
        Self {
            input,
            seed,
            status: status_name(report.status).to_string(),
            exit_code: status_exit_code(report.status),
            residual: Some(report.residual),
            steps: report.eps_trace.len(),
            final_eps: last.map(|r| r.eps),
            norm: last.map(|r| r.norm),
            error: None,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    to_csv(rows)
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::NonConvergence => "non_convergence",
        SolveStatus::NoSolutionCertificate => "no_solution_certificate",
        SolveStatus::ScheduleExhausted => "schedule_exhausted",
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_NO_CERTIFICATE: i32 = 4;

pub fn status_exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::NonConvergence | SolveStatus::ScheduleExhausted => EXIT_NONCONVERGENCE,
        SolveStatus::Unbounded | SolveStatus::NoSolutionCertificate => EXIT_NO_CERTIFICATE,
    }
}

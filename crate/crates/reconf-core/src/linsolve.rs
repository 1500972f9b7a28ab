//! Dense-basis linear programming: equality rows over box-bounded variables.
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b,   lo <= x <= hi   (entries may be infinite)
//! ```
//!
//! [`solve_lp`] is a two-phase primal simplex with Bland's anti-cycling rule
//! over bounded variables: a triangular crash basis covers as many rows as
//! possible (on tree-structured power-flow problems, all of them), uncovered
//! rows get artificials, and phase 1 drives the total bound violation of the
//! basic variables to zero before phase 2 minimizes the true objective.
//!
//! The [`oracle`] module holds an intentionally naive full-tableau simplex
//! used as an independent cross-check in tests and benches; it shares no code
//! with the production path.

use std::fmt::Write as _;

use thiserror::Error;

pub mod oracle;

/// Primal feasibility tolerance on equality residuals and bound violations.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost tolerance for optimality.
pub const OPT_TOL: f64 = 1e-9;
/// Certificate verification tolerance.
pub const CERT_TOL: f64 = 1e-6;

/// An equality-constrained LP over box-bounded variables.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub n_vars: usize,
    /// Minimization coefficients, one per variable.
    pub objective: Vec<f64>,
    /// Sparse equality rows: (column, coefficient) with columns strictly
    /// increasing after `add_eq` normalization.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Where a variable sits in the returned basis.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable pinned at zero.
    FreeZero,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values; meaningful only when status is Optimal.
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Basis statement backing the certificate check.
    pub basis: Vec<VarStatus>,
    /// Equality-row multipliers at the final basis.
    pub duals: Vec<f64>,
}

#[derive(Error, Debug)]
pub enum LpError {
    #[error("row {row} references column {col}, but the problem has {n_vars} variables")]
    ColumnOutOfRange { row: usize, col: usize, n_vars: usize },
    #[error("row count mismatch: {rows} rows, {rhs} right-hand sides")]
    RowRhsMismatch { rows: usize, rhs: usize },
    #[error("bounds arrays must have one entry per variable")]
    BoundLength,
    #[error("variable {0}: lower bound {1} exceeds upper bound {2}")]
    EmptyBox(usize, f64, f64),
    #[error("non-finite coefficient in row {0}")]
    BadCoefficient(usize),
    #[error("non-finite objective coefficient on variable {0}")]
    BadObjective(usize),
    #[error("non-finite right-hand side on row {0}")]
    BadRhs(usize),
    #[error("simplex exceeded {0} iterations; aborting rather than looping")]
    IterationLimit(usize),
    #[error("basis refactorization failed (numerically singular basis)")]
    SingularBasis,
}

impl LpProblem {
    pub fn new(n_vars: usize) -> LpProblem {
        LpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
        }
    }

    pub fn set_objective(&mut self, col: usize, c: f64) {
        self.objective[col] = c;
    }

    pub fn set_bounds(&mut self, col: usize, lo: f64, hi: f64) {
        self.lower[col] = lo;
        self.upper[col] = hi;
    }

    /// Append an equality row; duplicate columns are merged by summation.
    pub fn add_eq(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let mut row: Vec<(usize, f64)> = entries.to_vec();
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (col, v) in row {
            match merged.last_mut() {
                Some((c, acc)) if *c == col => *acc += v,
                _ => merged.push((col, v)),
            }
        }
        merged.retain(|(_, v)| *v != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.rows.len() != self.rhs.len() {
            return Err(LpError::RowRhsMismatch { rows: self.rows.len(), rhs: self.rhs.len() });
        }
        if self.lower.len() != self.n_vars || self.upper.len() != self.n_vars || self.objective.len() != self.n_vars {
            return Err(LpError::BoundLength);
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::BadObjective(j));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            for (col, v) in row {
                if *col >= self.n_vars {
                    return Err(LpError::ColumnOutOfRange { row: i, col: *col, n_vars: self.n_vars });
                }
                if !v.is_finite() {
                    return Err(LpError::BadCoefficient(i));
                }
            }
            if !self.rhs[i].is_finite() {
                return Err(LpError::BadRhs(i));
            }
        }
        for j in 0..self.n_vars {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(LpError::EmptyBox(j, lo, hi));
            }
        }
        Ok(())
    }

    /// Plain-text fixed-column tableau of the problem, for eyeballing and
    /// for cross-checks against external tools.
    pub fn dump_tableau(&self) -> String {
        let mut out = String::new();
        let w = 12;
        let _ = write!(out, "{:>w$}", "row");
        for j in 0..self.n_vars {
            let _ = write!(out, "{:>w$}", format!("x{j}"));
        }
        let _ = writeln!(out, "{:>w$}", "rhs");
        let _ = write!(out, "{:>w$}", "cost");
        for j in 0..self.n_vars {
            let _ = write!(out, "{:>w$.6}", self.objective[j]);
        }
        let _ = writeln!(out, "{:>w$}", "");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:>w$}", format!("eq{i}"));
            let mut dense = vec![0.0; self.n_vars];
            for (col, v) in row {
                dense[*col] = *v;
            }
            for v in &dense {
                let _ = write!(out, "{:>w$.6}", v);
            }
            let _ = writeln!(out, "{:>w$.6}", self.rhs[i]);
        }
        let fmt_bound = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v:.6}")
            }
        };
        let _ = write!(out, "{:>w$}", "lower");
        for j in 0..self.n_vars {
            let _ = write!(out, "{:>w$}", fmt_bound(self.lower[j]));
        }
        let _ = writeln!(out, "{:>w$}", "");
        let _ = write!(out, "{:>w$}", "upper");
        for j in 0..self.n_vars {
            let _ = write!(out, "{:>w$}", fmt_bound(self.upper[j]));
        }
        let _ = writeln!(out, "{:>w$}", "");
        out
    }
}

/// Why a certificate was rejected.
#[derive(Error, Debug)]
pub enum CertificateError {
    #[error("solution status is {0:?}, not Optimal")]
    NotOptimal(LpStatus),
    #[error("equality row {row} residual {residual} exceeds tolerance")]
    PrimalResidual { row: usize, residual: f64 },
    #[error("variable {col} violates its bounds by {violation}")]
    BoundViolation { col: usize, violation: f64 },
    #[error("variable {col} ({status:?}) has inconsistent reduced cost {reduced}")]
    ReducedCostSign { col: usize, status: VarStatus, reduced: f64 },
    #[error("objective mismatch: stated {stated}, recomputed {actual}")]
    ObjectiveMismatch { stated: f64, actual: f64 },
    #[error("solution shape does not match the problem")]
    Shape,
}

/// Verify an optimality certificate: primal feasibility, reduced-cost signs
/// for the stated basis, and the stated objective, all within [`CERT_TOL`].
pub fn check_certificate(p: &LpProblem, s: &LpSolution) -> Result<(), CertificateError> {
    if s.status != LpStatus::Optimal {
        return Err(CertificateError::NotOptimal(s.status));
    }
    if s.x.len() != p.n_vars || s.basis.len() != p.n_vars || s.duals.len() != p.rows.len() {
        return Err(CertificateError::Shape);
    }
    let scale = 1.0 + p.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for (i, row) in p.rows.iter().enumerate() {
        let lhs: f64 = row.iter().map(|(c, v)| v * s.x[*c]).sum();
        let residual = (lhs - p.rhs[i]).abs();
        if residual > CERT_TOL * scale {
            return Err(CertificateError::PrimalResidual { row: i, residual });
        }
    }
    for j in 0..p.n_vars {
        let below = p.lower[j] - s.x[j];
        let above = s.x[j] - p.upper[j];
        let violation = below.max(above);
        if violation > CERT_TOL {
            return Err(CertificateError::BoundViolation { col: j, violation });
        }
    }
    // Reduced costs d = c - A'y against the stated basis.
    let mut reduced = p.objective.clone();
    for (i, row) in p.rows.iter().enumerate() {
        for (col, v) in row {
            reduced[*col] -= v * s.duals[i];
        }
    }
    for j in 0..p.n_vars {
        let d = reduced[j];
        let bad = match s.basis[j] {
            VarStatus::Basic => d.abs() > CERT_TOL,
            VarStatus::AtLower => d < -CERT_TOL,
            VarStatus::AtUpper => d > CERT_TOL,
            VarStatus::FreeZero => d.abs() > CERT_TOL,
        };
        if bad {
            return Err(CertificateError::ReducedCostSign { col: j, status: s.basis[j], reduced: d });
        }
    }
    let actual: f64 = (0..p.n_vars).map(|j| p.objective[j] * s.x[j]).sum();
    if (actual - s.objective_value).abs() > CERT_TOL * (1.0 + actual.abs()) {
        return Err(CertificateError::ObjectiveMismatch { stated: s.objective_value, actual });
    }
    Ok(())
}

mod simplex;

pub use simplex::solve_lp;

//! Linear programming layer: sparse rows, the oracle interface used by the
//! branch-and-bound driver, and two engines behind it.

mod engine;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{LpEngine, MinilpEngine, ReferenceEngine};
pub use simplex::BoundedSimplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A sparse linear constraint `Σ coef·x  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coefs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Largest coefficient magnitude, at least 1.
    pub fn scale(&self) -> f64 {
        self.coefs.iter().fold(1.0f64, |m, &(_, a)| m.max(a.abs()))
    }
}

/// `min c·x` subject to rows and `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Solves one LP from scratch. `fixes` pins variables to values on top of
/// the given bounds (branching decisions).
pub trait LpOracle {
    fn solve(
        &self,
        rows: &[Row],
        lower: &[f64],
        upper: &[f64],
        objective: &[f64],
        fixes: &[(usize, f64)],
    ) -> Result<LpSolution, LpError>;
}

/// Oracle backed by the `minilp` crate (dual simplex with sparse LU).
#[derive(Debug, Clone, Copy, Default)]
pub struct MinilpOracle;

impl LpOracle for MinilpOracle {
    fn solve(
        &self,
        rows: &[Row],
        lower: &[f64],
        upper: &[f64],
        objective: &[f64],
        fixes: &[(usize, f64)],
    ) -> Result<LpSolution, LpError> {
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        for &(j, v) in fixes {
            lo[j] = v;
            hi[j] = v;
        }
        let problem = LpProblem {
            objective: objective.to_vec(),
            lower: lo,
            upper: hi,
            rows: rows.to_vec(),
        };
        MinilpEngine.root(&problem).map(|(_, s)| s)
    }
}

//! Incremental LP engines for branch-and-bound: a node inherits its
//! parent's state and extends it with new rows and variable fixes.

use std::sync::Arc;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use super::{BoundedSimplex, LpError, LpOracle, LpProblem, LpSolution, Row, Sense};

pub trait LpEngine {
    type State: Clone + std::fmt::Debug;

    fn root(&self, problem: &LpProblem) -> Result<(Self::State, LpSolution), LpError>;

    fn extend(
        &self,
        state: &Self::State,
        rows: &[Row],
        fixes: &[(usize, f64)],
    ) -> Result<(Self::State, LpSolution), LpError>;
}

/// Re-solves every node from scratch with an [`LpOracle`]. Slow but simple;
/// used to cross-check the warm-started engine.
#[derive(Debug, Clone, Default)]
pub struct ReferenceEngine<O = BoundedSimplex> {
    pub oracle: O,
}

#[derive(Debug, Clone)]
pub struct ReferenceState {
    base: Arc<LpProblem>,
    rows: Vec<Row>,
    fixes: Vec<(usize, f64)>,
}

impl<O: LpOracle> ReferenceEngine<O> {
    fn run(&self, st: &ReferenceState) -> Result<LpSolution, LpError> {
        let mut rows = st.base.rows.clone();
        rows.extend(st.rows.iter().cloned());
        self.oracle.solve(
            &rows,
            &st.base.lower,
            &st.base.upper,
            &st.base.objective,
            &st.fixes,
        )
    }
}

impl<O: LpOracle> LpEngine for ReferenceEngine<O> {
    type State = ReferenceState;

    fn root(&self, problem: &LpProblem) -> Result<(Self::State, LpSolution), LpError> {
        let st = ReferenceState {
            base: Arc::new(problem.clone()),
            rows: Vec::new(),
            fixes: Vec::new(),
        };
        let sol = self.run(&st)?;
        Ok((st, sol))
    }

    fn extend(
        &self,
        state: &Self::State,
        rows: &[Row],
        fixes: &[(usize, f64)],
    ) -> Result<(Self::State, LpSolution), LpError> {
        let mut st = state.clone();
        st.rows.extend_from_slice(rows);
        st.fixes.extend_from_slice(fixes);
        let sol = self.run(&st)?;
        Ok((st, sol))
    }
}

/// Warm-started engine on top of `minilp`: children reuse the parent's
/// factorized basis and continue with dual simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinilpEngine;

#[derive(Clone)]
pub struct MinilpState {
    sol: Solution,
    vars: Arc<Vec<Variable>>,
    base: Arc<LpProblem>,
    rows: Vec<Row>,
    fixes: Vec<(usize, f64)>,
}

impl std::fmt::Debug for MinilpState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MinilpState")
            .field("objective", &self.sol.objective())
            .finish()
    }
}

fn op(sense: Sense) -> ComparisonOp {
    match sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    }
}

fn map_err(e: minilp::Error) -> LpError {
    match e {
        minilp::Error::Infeasible => LpError::Infeasible,
        minilp::Error::Unbounded => LpError::Unbounded,
    }
}

fn extract(st: &MinilpState) -> LpSolution {
    LpSolution {
        x: st.vars.iter().map(|&v| st.sol[v]).collect(),
        objective: st.sol.objective(),
    }
}

fn cold(problem: &LpProblem, rows: &[Row], fixes: &[(usize, f64)]) -> Result<(Solution, Vec<Variable>), LpError> {
    let (mut lower, mut upper) = (problem.lower.clone(), problem.upper.clone());
    for &(j, v) in fixes {
        lower[j] = v;
        upper[j] = v;
    }
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Variable> = (0..problem.n_vars())
        .map(|j| p.add_var(problem.objective[j], (lower[j], upper[j])))
        .collect();
    for r in problem.rows.iter().chain(rows) {
        let expr: Vec<(Variable, f64)> = r.coefs.iter().map(|&(j, a)| (vars[j], a)).collect();
        p.add_constraint(expr.as_slice(), op(r.sense), r.rhs);
    }
    Ok((p.solve().map_err(map_err)?, vars))
}

impl LpEngine for MinilpEngine {
    type State = MinilpState;

    fn root(&self, problem: &LpProblem) -> Result<(Self::State, LpSolution), LpError> {
        let (sol, vars) = cold(problem, &[], &[])?;
        let st = MinilpState {
            sol,
            vars: Arc::new(vars),
            base: Arc::new(problem.clone()),
            rows: Vec::new(),
            fixes: Vec::new(),
        };
        let out = extract(&st);
        Ok((st, out))
    }

    fn extend(
        &self,
        state: &Self::State,
        rows: &[Row],
        fixes: &[(usize, f64)],
    ) -> Result<(Self::State, LpSolution), LpError> {
        let mut all_rows = state.rows.clone();
        all_rows.extend_from_slice(rows);
        let mut all_fixes = state.fixes.clone();
        all_fixes.extend_from_slice(fixes);
        let warm = || -> Result<Solution, minilp::Error> {
            let mut sol = state.sol.clone();
            for &(j, v) in fixes {
                sol = sol.fix_var(state.vars[j], v)?;
            }
            for r in rows {
                let expr: Vec<(Variable, f64)> = r.coefs.iter().map(|&(j, a)| (state.vars[j], a)).collect();
                sol = sol.add_constraint(expr.as_slice(), op(r.sense), r.rhs)?;
            }
            Ok(sol)
        };
        let (sol, vars) = match warm() {
            Ok(sol) => (sol, state.vars.clone()),
            // dual simplex occasionally reports infeasibility on a degenerate
            // warm basis; only a cold solve is trusted to prune
            Err(minilp::Error::Infeasible) => {
                let (sol, vars) = cold(&state.base, &all_rows, &all_fixes)?;
                (sol, Arc::new(vars))
            }
            Err(e) => return Err(map_err(e)),
        };
        let st = MinilpState {
            sol,
            vars,
            base: state.base.clone(),
            rows: all_rows,
            fixes: all_fixes,
        };
        let out = extract(&st);
        Ok((st, out))
    }
}

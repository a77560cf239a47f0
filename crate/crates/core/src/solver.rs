//! Best-first branch and bound over a linearized model, with lazy rows and
//! user cuts.
//!
//! The active row set is global and append-only. A node remembers how many
//! active rows its parent had seen, so rows reinstated after it was created
//! are picked up when it is finally solved.
//!
//! Rows held out of the relaxation still sit in the LP, each with its own
//! nonnegative slack column large enough to make it vacuous. Reinstating a
//! row fixes its slack at zero, which the warm-started engine handles as a
//! bound change instead of a refactorization.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use web_time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{check_feasible, Design};
use crate::instance::Instance;
use crate::lp::{LpEngine, LpError, LpProblem, LpSolution, MinilpEngine, Row, Sense};
use crate::milp::{design_from_point, LinearizedModel};
use crate::queueing::{average_response, QueueError, ServiceMoments};

const INT_TOL: f64 = 1e-6;
const SEP_TOL: f64 = 1e-7;
/// Allowed relative gap between a verified incumbent's model objective and
/// its exact mean response.
const MISMATCH_TOL: f64 = 1e-6;
/// Open nodes allowed to keep their parent's LP state for warm starts;
/// the rest restart from the root state.
const STORED_STATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// Every model row active from the start.
    Refo,
    /// Fortet and τ-McCormick rows held back until an integer point needs them.
    Oa,
    /// OA plus separated user cuts and lazily held optimality cuts.
    OaBc,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Refo, Mode::Oa, Mode::OaBc];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Refo => "REFO",
            Mode::Oa => "OA",
            Mode::OaBc => "OA_BC",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "REFO" => Ok(Mode::Refo),
            "OA" => Ok(Mode::Oa),
            "OA_BC" | "OABC" => Ok(Mode::OaBc),
            _ => Err(format!("unknown mode {s:?} (expected REFO, OA or OA_BC)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Relative optimality gap at which the search stops.
    pub gap_tol: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    /// Record one trace line per node.
    pub trace: bool,
    /// Starting incumbent, used when it is feasible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<Design>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            gap_tol: 1e-4,
            time_limit: None,
            node_limit: None,
            trace: false,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub status: SolveStatus,
    pub design: Option<Design>,
    /// Mean response time of the incumbent, seconds.
    pub objective: Option<f64>,
    /// Best proven lower bound, seconds.
    pub lower_bound: f64,
    pub gap: f64,
    pub nodes: u64,
    pub lazy_reinstated: u64,
    pub user_cuts: u64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("LP oracle failed: {0}")]
    OracleFailure(LpError),
    #[error("incumbent objective {model} s disagrees with queueing value {exact} s")]
    IncumbentMismatch { model: f64, exact: f64 },
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("no fractional binary to branch on")]
    NoFractionalVar,
}

/// Rows of `pool` violated by `point` beyond 1e-7 (relative to the row's
/// largest coefficient).
pub fn separate(model: &LinearizedModel, point: &[f64], pool: &[usize]) -> Vec<usize> {
    pool.iter()
        .copied()
        .filter(|&r| {
            let row = &model.rows[r];
            row.violation(point) > SEP_TOL * row.scale()
        })
        .collect()
}

/// Lazy rows violated at an integer point.
pub fn separate_lazy(model: &LinearizedModel, point: &[f64]) -> Vec<usize> {
    separate(model, point, &model.lazy_pool)
}

/// VI3/VI4 (or the general-M analogue) rows violated at a possibly
/// fractional point.
pub fn separate_usercuts(model: &LinearizedModel, point: &[f64]) -> Vec<usize> {
    separate(model, point, &model.usercut_pool)
}

/// Most fractional binary column, ties to the lower index.
pub fn branch_variable(model: &LinearizedModel, point: &[f64]) -> Result<usize, SolveError> {
    let mut best: Option<(f64, usize)> = None;
    for c in model.vars.binaries() {
        let f = (point[c] - point[c].floor()).min(point[c].ceil() - point[c]);
        if f > INT_TOL && best.is_none_or(|(b, _)| f > b) {
            best = Some((f, c));
        }
    }
    best.map(|(_, c)| c).ok_or(SolveError::NoFractionalVar)
}

/// Children of a branch on column `c`: fixed to 0, then fixed to 1.
pub fn branch(model: &LinearizedModel, point: &[f64]) -> Result<[(usize, f64); 2], SolveError> {
    let c = branch_variable(model, point)?;
    Ok([(c, 0.0), (c, 1.0)])
}

fn is_integral(model: &LinearizedModel, point: &[f64]) -> bool {
    model
        .vars
        .binaries()
        .all(|c| (point[c] - point[c].round()).abs() <= INT_TOL)
}

struct Node<S> {
    bound: f64,
    depth: u32,
    seq: u64,
    parent: Option<Arc<S>>,
    seen: usize,
    /// Branching fixes from the root down to this node.
    path: Vec<(usize, f64)>,
}

impl<S> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S> Eq for Node<S> {}
impl<S> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S> Ord for Node<S> {
    // max-heap: smallest bound first, then deepest, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    value: f64,
    design: Design,
    exact: f64,
}

struct Search<'a, E: LpEngine> {
    engine: &'a E,
    model: &'a LinearizedModel,
    instance: &'a Instance,
    moments: &'a ServiceMoments,
    mode: Mode,
    active: Vec<usize>,
    in_active: Vec<bool>,
    lazy: Vec<usize>,
    cuts: Vec<usize>,
    /// Slack columns of each held row (empty for rows active from the start).
    slack: Vec<Vec<usize>>,
    incumbent: Option<Incumbent>,
    lazy_reinstated: u64,
    user_cuts: u64,
    trace: Option<Vec<String>>,
}

impl<E: LpEngine> Search<'_, E> {
    /// Marks rows active and returns the slack fixes that enforce them.
    fn activate(&mut self, rows: &[usize]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for &r in rows {
            if !self.in_active[r] {
                self.in_active[r] = true;
                self.active.push(r);
                out.extend(self.slack[r].iter().map(|&c| (c, 0.0)));
            }
        }
        out
    }

    fn fixes_since(&self, seen: usize) -> Vec<(usize, f64)> {
        self.active[seen..]
            .iter()
            .flat_map(|&r| self.slack[r].iter().map(|&c| (c, 0.0)))
            .collect()
    }

    fn pending(&self, pool: &[usize]) -> Vec<usize> {
        pool.iter().copied().filter(|&r| !self.in_active[r]).collect()
    }

    fn cutoff(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.value)
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            t.push(line());
        }
    }

    /// Re-solves with extra fixes; None when the LP becomes infeasible.
    fn resolve(
        &self,
        state: &E::State,
        fixes: &[(usize, f64)],
    ) -> Result<Option<(E::State, LpSolution)>, SolveError> {
        match self.engine.extend(state, &[], fixes) {
            Ok(mut v) => {
                v.1.x.truncate(self.model.n_vars());
                Ok(Some(v))
            }
            Err(LpError::Infeasible) => Ok(None),
            Err(e) => Err(SolveError::OracleFailure(e)),
        }
    }

    /// Processes one LP solution to completion. Returns the state and
    /// bound for children when the node must branch.
    fn process(
        &mut self,
        id: u64,
        mut state: E::State,
        mut sol: LpSolution,
    ) -> Result<Option<(E::State, LpSolution)>, SolveError> {
        loop {
            if sol.objective >= self.cutoff() {
                let b = sol.objective;
                self.log(|| format!("{id} {b:.9} prune"));
                return Ok(None);
            }
            let integral = is_integral(self.model, &sol.x);
            if !integral && self.mode == Mode::OaBc {
                let pool = self.pending(&self.cuts);
                let hit = separate(self.model, &sol.x, &pool);
                if !hit.is_empty() {
                    let n = hit.len();
                    let rows = self.activate(&hit);
                    self.user_cuts += n as u64;
                    self.log(|| format!("{id} {:.9} cut {n}", sol.objective));
                    match self.resolve(&state, &rows)? {
                        Some((s, x)) => (state, sol) = (s, x),
                        None => return Ok(None),
                    }
                    continue;
                }
            }
            if !integral {
                return Ok(Some((state, sol)));
            }
            let pool = self.pending(&self.lazy);
            let hit = separate(self.model, &sol.x, &pool);
            if !hit.is_empty() {
                let n = hit.len();
                let rows = self.activate(&hit);
                self.lazy_reinstated += n as u64;
                self.log(|| format!("{id} {:.9} lazy {n}", sol.objective));
                match self.resolve(&state, &rows)? {
                    Some((s, x)) => (state, sol) = (s, x),
                    None => return Ok(None),
                }
                continue;
            }
            self.accept(id, &sol)?;
            return Ok(None);
        }
    }

    fn accept(&mut self, id: u64, sol: &LpSolution) -> Result<(), SolveError> {
        let design = match design_from_point(self.model, self.instance, &sol.x) {
            Ok(d) if check_feasible(self.instance, &d).is_empty() => d,
            _ => {
                // integral but off by a rounding hair on a structural row
                self.log(|| format!("{id} {:.9} reject", sol.objective));
                return Ok(());
            }
        };
        let exact = average_response(self.instance, self.moments, &design)?.avg_resp;
        let model_value = self.model.objective_seconds(&sol.x);
        if (model_value - exact).abs() > MISMATCH_TOL * exact.abs().max(1e-12) {
            return Err(SolveError::IncumbentMismatch {
                model: model_value,
                exact,
            });
        }
        let value = exact / self.model.time_unit;
        if value < self.cutoff() {
            self.log(|| format!("{id} {:.9} incumbent {exact:.9}", sol.objective));
            self.incumbent = Some(Incumbent {
                value,
                design,
                exact,
            });
        }
        Ok(())
    }
}

/// Solves with the warm-started sparse engine.
pub fn solve(
    instance: &Instance,
    moments: &ServiceMoments,
    model: &LinearizedModel,
    mode: Mode,
    params: &SolveParams,
) -> Result<SolveReport, SolveError> {
    solve_with(&MinilpEngine, instance, moments, model, mode, params)
}

pub fn solve_with<E: LpEngine>(
    engine: &E,
    instance: &Instance,
    moments: &ServiceMoments,
    model: &LinearizedModel,
    mode: Mode,
    params: &SolveParams,
) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let n_rows = model.n_rows();
    let mut lazy = Vec::new();
    let mut cuts = Vec::new();
    let held: Vec<bool> = {
        let mut h = vec![false; n_rows];
        match mode {
            Mode::Refo => {}
            Mode::Oa => lazy.extend_from_slice(&model.lazy_pool),
            Mode::OaBc => {
                lazy.extend_from_slice(&model.lazy_pool);
                lazy.extend_from_slice(&model.vi5_pool);
                cuts.extend_from_slice(&model.usercut_pool);
            }
        }
        for &r in lazy.iter().chain(&cuts) {
            h[r] = true;
        }
        h
    };
    let active: Vec<usize> = (0..n_rows)
        .filter(|&r| model.classes[r].is_model_row() && !held[r])
        .collect();
    let mut in_active = vec![false; n_rows];
    for &r in &active {
        in_active[r] = true;
    }
    let held_rows: Vec<usize> = (0..n_rows).filter(|&r| held[r]).collect();
    let (relaxation, slack) = held_relaxation(model, &active, &held_rows);
    let mut search = Search {
        engine,
        model,
        instance,
        moments,
        mode,
        active,
        in_active,
        lazy,
        cuts,
        slack,
        incumbent: None,
        lazy_reinstated: 0,
        user_cuts: 0,
        trace: params.trace.then(Vec::new),
    };

    let t0 = model.time_unit;
    if let Some(d) = &params.warm_start {
        if check_feasible(instance, d).is_empty() {
            if let Ok(m) = average_response(instance, moments, d) {
                search.log(|| format!("warm start {:.9}", m.avg_resp));
                search.incumbent = Some(Incumbent {
                    value: m.avg_resp / t0,
                    design: d.clone(),
                    exact: m.avg_resp,
                });
            }
        }
    }
    let mut nodes = 0u64;
    let mut seq = 0u64;
    let mut heap: BinaryHeap<Node<E::State>> = BinaryHeap::new();
    let mut stopped = None;

    let root = match engine.root(&relaxation) {
        Ok(mut v) => {
            v.1.x.truncate(model.n_vars());
            Some(v)
        }
        Err(LpError::Infeasible) => None,
        Err(e) => return Err(SolveError::OracleFailure(e)),
    };
    nodes += 1;
    let mut lower = f64::INFINITY;
    let mut stored = 0usize;
    let mut base = None;
    if let Some((state, sol)) = root {
        lower = sol.objective;
        base = Some((Arc::new(state.clone()), search.active.len()));
        if let Some((state, sol)) = search.process(0, state, sol)? {
            push_children(&mut heap, &mut search, &mut seq, &mut stored, state, &sol, &[], 0, 0)?;
        }
    }

    while let Some(top) = heap.peek() {
        let ub = search.cutoff();
        lower = top.bound.min(ub);
        if ub.is_finite() && ub - lower <= params.gap_tol * ub.abs() {
            break;
        }
        if params.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            stopped = Some(SolveStatus::TimeLimit);
            break;
        }
        if params.node_limit.is_some_and(|n| nodes >= n) {
            stopped = Some(SolveStatus::NodeLimit);
            break;
        }
        let node = heap.pop().expect("peeked");
        if node.bound >= search.cutoff() {
            continue;
        }
        let id = nodes;
        nodes += 1;
        let (from, fixes) = match &node.parent {
            Some(p) => {
                stored -= 1;
                let mut f = search.fixes_since(node.seen);
                f.extend(node.path.last().copied());
                (Arc::clone(p), f)
            }
            None => {
                let (b, seen) = base.as_mut().expect("root was solved");
                if *seen < search.active.len() {
                    match engine.extend(b, &[], &search.fixes_since(*seen)) {
                        Ok((st, _)) => *b = Arc::new(st),
                        Err(LpError::Infeasible) => {
                            heap.clear();
                            continue;
                        }
                        Err(e) => return Err(SolveError::OracleFailure(e)),
                    }
                    *seen = search.active.len();
                }
                (Arc::clone(b), node.path.clone())
            }
        };
        let solved = engine.extend(&from, &[], &fixes).map(|mut v| {
            v.1.x.truncate(model.n_vars());
            v
        });
        let (state, sol) = match solved {
            Ok(v) => v,
            Err(LpError::Infeasible) => {
                search.log(|| format!("{id} {:.9} infeasible", node.bound));
                continue;
            }
            Err(e) => return Err(SolveError::OracleFailure(e)),
        };
        if let Some((state, sol)) = search.process(id, state, sol)? {
            push_children(&mut heap, &mut search, &mut seq, &mut stored, state, &sol, &node.path, id, node.depth + 1)?;
        }
    }
    let ub = search.cutoff();
    if heap.is_empty() {
        lower = ub;
    }

    let status = match (stopped, &search.incumbent) {
        (Some(s), _) => s,
        (None, Some(_)) => SolveStatus::Optimal,
        (None, None) => SolveStatus::Infeasible,
    };
    let (design, objective) = match search.incumbent.take() {
        Some(i) => (Some(i.design), Some(i.exact)),
        None => (None, None),
    };
    let gap = if ub.is_finite() && ub > 0.0 {
        ((ub - lower) / ub).max(0.0)
    } else if ub.is_finite() {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SolveReport {
        mode,
        status,
        design,
        objective,
        lower_bound: if lower.is_finite() { lower * t0 } else { lower },
        gap,
        nodes,
        lazy_reinstated: search.lazy_reinstated,
        user_cuts: search.user_cuts,
        wall_seconds: start.elapsed().as_secs_f64(),
        trace: search.trace.unwrap_or_default(),
    })
}

/// LP with the `active` rows as they are and every `held` row relaxed by
/// slack columns bounded by the row's largest possible violation.
fn held_relaxation(
    model: &LinearizedModel,
    active: &[usize],
    held: &[usize],
) -> (LpProblem, Vec<Vec<usize>>) {
    let mut lp = model.relaxation(active);
    let mut slack = vec![Vec::new(); model.n_rows()];
    for &r in held {
        let row = &model.rows[r];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(c, a) in &row.coefs {
            let (x, y) = (a * model.vars.lower[c], a * model.vars.upper[c]);
            lo += x.min(y);
            hi += x.max(y);
        }
        let mut coefs = row.coefs.clone();
        let mut add = |lp: &mut LpProblem, sign: f64, room: f64| {
            let c = lp.objective.len();
            lp.objective.push(0.0);
            lp.lower.push(0.0);
            lp.upper.push(room.max(0.0));
            coefs.push((c, sign));
            slack[r].push(c);
        };
        if row.sense != Sense::Ge {
            add(&mut lp, -1.0, hi - row.rhs);
        }
        if row.sense != Sense::Le {
            add(&mut lp, 1.0, row.rhs - lo);
        }
        lp.rows.push(Row::new(coefs, row.sense, row.rhs));
    }
    (lp, slack)
}

fn push_children<E: LpEngine>(
    heap: &mut BinaryHeap<Node<E::State>>,
    search: &mut Search<'_, E>,
    seq: &mut u64,
    stored: &mut usize,
    state: E::State,
    sol: &LpSolution,
    path: &[(usize, f64)],
    id: u64,
    depth: u32,
) -> Result<(), SolveError> {
    let children = branch(search.model, &sol.x)?;
    let parent = (*stored + 2 <= STORED_STATES).then(|| Arc::new(state));
    let seen = search.active.len();
    for fix in children {
        *seq += 1;
        *stored += usize::from(parent.is_some());
        heap.push(Node {
            bound: sol.objective,
            depth,
            seq: *seq,
            parent: parent.clone(),
            seen,
            path: path.iter().copied().chain([fix]).collect(),
        });
    }
    let (c, v) = (children[0].0, sol.x[children[0].0]);
    search.log(|| format!("{id} {:.9} branch x{c}={v:.6}", sol.objective));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_tiny, TinySpec};
    use crate::geo::GeoPoint;
    use crate::instance::{CandidateBase, DemandPoint, NetworkParams};
    use crate::lp::ReferenceEngine;
    use crate::milp::{encode_design, linearize_m2, RowClass};
    use crate::oracle::{enumerate_optimum, for_each_feasible_design, EnumerationBudget, OracleError};
    use crate::queueing::service_moments;

    fn tight() -> SolveParams {
        SolveParams {
            gap_tol: 1e-9,
            ..SolveParams::default()
        }
    }

    fn tiny(seed: u64) -> (Instance, ServiceMoments, LinearizedModel) {
        let inst = random_tiny(seed, &TinySpec::default());
        let mo = service_moments(&inst);
        let model = linearize_m2(&inst, &mo).unwrap();
        (inst, mo, model)
    }

    #[test]
    fn most_fractional_wins_and_ties_go_low() {
        let (_, _, model) = tiny(1);
        let mut p = vec![0.0; model.n_vars()];
        let y = model.vars.y[0][0].1;
        let g = model.vars.gamma[0][0];
        p[y] = 0.5;
        p[g] = 0.4;
        assert_eq!(branch_variable(&model, &p), Ok(y));
        p[g] = 0.5;
        assert_eq!(branch_variable(&model, &p), Ok(y.min(g)));
        assert_eq!(branch(&model, &p).unwrap()[1], (y.min(g), 1.0));
        let zero = vec![0.0; model.n_vars()];
        assert_eq!(branch_variable(&model, &zero), Err(SolveError::NoFractionalVar));
    }

    #[test]
    fn separation_examples() {
        for seed in 0..6 {
            let (inst, mo, model) = tiny(seed);
            for_each_feasible_design(&inst, |d| {
                let p = encode_design(&model, &inst, &mo, d);
                assert!(separate_lazy(&model, &p).is_empty());
                assert!(separate_usercuts(&model, &p).is_empty());
                // a Fortet row catches z = 0 under y_l = y_t = 1
                if let Some(j) = (0..inst.n_bases()).find(|&j| d.assignees(j).count() >= 2) {
                    let mut q = p.clone();
                    let z = model
                        .vars
                        .defs
                        .iter()
                        .position(|v| matches!(v, crate::milp::VarDef::Z { j: b, .. } if *b == j))
                        .unwrap();
                    if q[z] == 1.0 {
                        q[z] = 0.0;
                        let hit = separate_lazy(&model, &q);
                        assert!(hit.iter().any(|&r| model.classes[r] == RowClass::Fortet));
                        let brute: Vec<usize> = model
                            .lazy_pool
                            .iter()
                            .copied()
                            .filter(|&r| model.rows[r].violation(&q) > 1e-7 * model.rows[r].scale())
                            .collect();
                        assert_eq!(hit, brute);
                    }
                }
            });
        }
        let (_, _, model) = tiny(0);
        let mut p = vec![0.0; model.n_vars()];
        let u = model.vars.delay[0][0];
        p[u] = 0.5 * model.vars.upper[u];
        assert!(separate_usercuts(&model, &p)
            .iter()
            .any(|&r| model.classes[r] == RowClass::Vi3));
        let mut p = vec![0.0; model.n_vars()];
        p[model.vars.delay[0][1]] = 1e-3;
        assert!(separate_usercuts(&model, &p)
            .iter()
            .any(|&r| model.classes[r] == RowClass::Vi4));
    }

    #[test]
    fn modes_match_the_oracle() {
        let mut checked = 0;
        for seed in 0..15 {
            let (inst, mo, model) = tiny(seed);
            let want = enumerate_optimum(&inst, &mo, EnumerationBudget::default());
            for mode in Mode::ALL {
                let r = solve(&inst, &mo, &model, mode, &tight()).unwrap();
                match &want {
                    Ok(o) => {
                        assert_eq!(r.status, SolveStatus::Optimal);
                        let got = r.objective.unwrap();
                        assert!(
                            (got - o.objective).abs() <= 1e-6 * o.objective,
                            "seed {seed} {mode}: {got} vs {}",
                            o.objective
                        );
                        assert!(r.gap <= 1e-9 && r.lower_bound <= got * (1.0 + 1e-9));
                        checked += 1;
                    }
                    Err(OracleError::NoFeasibleDesign) => {
                        assert_eq!(r.status, SolveStatus::Infeasible)
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
        assert!(checked >= 15);
    }

    #[test]
    fn degenerate_warm_basis_does_not_prune_the_optimum() {
        // the warm dual simplex once declared both children of a feasible
        // node infeasible here and OA settled on a design worth 6510 s
        let inst = random_tiny(2, &TinySpec::default());
        let mo = service_moments(&inst);
        let model = linearize_m2(&inst, &mo).unwrap();
        let want = enumerate_optimum(&inst, &mo, EnumerationBudget::default()).unwrap().objective;
        for mode in Mode::ALL {
            let r = solve(&inst, &mo, &model, mode, &tight()).unwrap();
            let got = r.objective.unwrap();
            assert!((got - want).abs() <= 1e-6 * want, "{mode}: {got} vs {want}");
        }
    }

    #[test]
    fn reference_engine_agrees_with_warm_start() {
        for seed in [3, 5] {
            let (inst, mo, model) = tiny(seed);
            let a = solve(&inst, &mo, &model, Mode::OaBc, &tight()).unwrap();
            let b = solve_with(&ReferenceEngine::<crate::lp::BoundedSimplex>::default(), &inst, &mo, &model, Mode::OaBc, &tight())
                .unwrap();
            assert_eq!(a.status, b.status);
            if let (Some(x), Some(y)) = (a.objective, b.objective) {
                assert!((x - y).abs() <= 1e-6 * x);
            }
        }
    }

    #[test]
    fn coverage_needing_two_bases_with_one_allowed_is_infeasible() {
        let d = |id: &str, x: f64| DemandPoint::new(id, GeoPoint::on_equator(x), 1e-4, 600.0);
        let inst = Instance::build(
            vec![d("a", 0.0), d("b", 5_000.0)],
            vec![
                CandidateBase::new("u", GeoPoint::on_equator(0.0)),
                CandidateBase::new("v", GeoPoint::on_equator(5_000.0)),
            ],
            NetworkParams {
                radius: 1_000.0,
                fleet_size: 1,
                max_open: 1,
                max_per_base: 2,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let mo = service_moments(&inst);
        let model = linearize_m2(&inst, &mo).unwrap();
        for mode in Mode::ALL {
            let r = solve(&inst, &mo, &model, mode, &SolveParams::default()).unwrap();
            assert_eq!(r.status, SolveStatus::Infeasible);
            assert!(r.design.is_none());
        }
    }

    #[test]
    fn forced_assignment_reduces_to_capacity_split() {
        // every demand sees exactly one base
        let d = |id: &str, x: f64, lam: f64| DemandPoint::new(id, GeoPoint::on_equator(x), lam, 1_200.0);
        let inst = Instance::build(
            vec![d("a", 300.0, 3e-4), d("b", -400.0, 2e-4), d("c", 6_200.0, 1e-4), d("e", 5_500.0, 2e-4)],
            vec![
                CandidateBase::new("u", GeoPoint::on_equator(0.0)),
                CandidateBase::new("v", GeoPoint::on_equator(6_000.0)),
            ],
            NetworkParams {
                radius: 1_000.0,
                fleet_size: 3,
                max_open: 2,
                max_per_base: 2,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let mo = service_moments(&inst);
        let model = linearize_m2(&inst, &mo).unwrap();
        let assignment = vec![0, 0, 1, 1];
        let best = [[1, 2], [2, 1]]
            .iter()
            .filter_map(|k| {
                let design = Design::from_counts(k.to_vec(), assignment.clone(), 2);
                check_feasible(&inst, &design).is_empty().then(|| {
                    average_response(&inst, &mo, &design).unwrap().avg_resp
                })
            })
            .fold(f64::INFINITY, f64::min);
        let r = solve(&inst, &mo, &model, Mode::OaBc, &tight()).unwrap();
        assert!((r.objective.unwrap() - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn solve_is_deterministic_and_traced() {
        let (inst, mo, model) = tiny(7);
        let p = SolveParams {
            trace: true,
            ..tight()
        };
        let mut a = solve(&inst, &mo, &model, Mode::OaBc, &p).unwrap();
        let mut b = solve(&inst, &mo, &model, Mode::OaBc, &p).unwrap();
        a.wall_seconds = 0.0;
        b.wall_seconds = 0.0;
        assert_eq!(a, b);
        assert!(!a.trace.is_empty());
    }

    #[test]
    fn node_limit_stops_early() {
        let (inst, mo, model) = tiny(3);
        let p = SolveParams {
            node_limit: Some(1),
            ..tight()
        };
        let r = solve(&inst, &mo, &model, Mode::Oa, &p).unwrap();
        assert!(matches!(r.status, SolveStatus::NodeLimit | SolveStatus::Optimal));
        assert!(r.nodes <= 1 || r.status == SolveStatus::Optimal);
    }

    #[test]
    fn warm_start_keeps_the_optimum() {
        for seed in 0..12 {
            let (inst, mo, model) = tiny(seed);
            let Ok(g) = crate::heuristic::greedy_design(&inst) else { continue };
            if !check_feasible(&inst, &g).is_empty() {
                continue;
            }
            let cold = solve(&inst, &mo, &model, Mode::OaBc, &tight()).unwrap();
            let p = SolveParams {
                warm_start: Some(g.clone()),
                ..tight()
            };
            let warm = solve(&inst, &mo, &model, Mode::OaBc, &p).unwrap();
            let (a, b) = (cold.objective.unwrap(), warm.objective.unwrap());
            assert!((a - b).abs() <= 1e-9 * a, "seed {seed}");
            let capped = SolveParams {
                node_limit: Some(1),
                ..p
            };
            let r = solve(&inst, &mo, &model, Mode::Oa, &capped).unwrap();
            assert!(r.design.is_some(), "seed {seed}");
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>(), Ok(m));
        }
        assert_eq!("oa-bc".parse::<Mode>(), Ok(Mode::OaBc));
        assert!("fast".parse::<Mode>().is_err());
    }
}

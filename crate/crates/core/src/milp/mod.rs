//! Mixed-integer linear reformulations of the network design problem.
//!
//! Two builders share one model type: [`linearize_m2`] introduces the
//! delay variables U_j^m = 2·E[Q_j | K_j = m] with Fortet and McCormick
//! products, and [`linearize_general_m`] multiplies out the queueing
//! denominator for any M and linearizes the resulting multilinear terms.
//!
//! Internally every time is divided by a unit `time_unit` (seconds) so the
//! LP coefficients stay near 1; reported objectives are converted back.

mod bounds;
mod encode;
mod general;
mod lp_format;
mod m2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpProblem, Row};

pub use bounds::{compute_u_bounds, delay_shape, UBounds};
pub use encode::{design_from_point, encode_design, RecoverError};
pub use general::{linearize_general_m, linearize_general_m_unchecked, GENERAL_M_LIMIT};
pub use lp_format::write_lp;
pub use m2::linearize_m2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("steady-state slack must lie in (0, 1), got {0}")]
    DegenerateBound(f64),
    #[error("this builder needs M = {expected}, instance has M = {got}")]
    WrongMaxPerBase { expected: String, got: usize },
    #[error("general-M model with M = {m} would have about {estimated_rows} rows")]
    ComplexityWarning { m: usize, estimated_rows: usize },
    #[error("base {base} covers {count} demands, more than the {limit} supported by subset expansion")]
    CatchmentTooLarge { base: usize, count: usize, limit: usize },
}

/// What a model column stands for. Product columns carry enough to be
/// recomputed from a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarDef {
    X(usize),
    Y { i: usize, j: usize },
    Gamma { j: usize, m: usize },
    /// U_j^m in the M = 2 model, V_j^m in the general model.
    Delay { j: usize, m: usize },
    Mu { j: usize, m: usize, l: usize },
    Z { j: usize, l: usize, t: usize },
    Tau { j: usize, l: usize, t: usize },
    Omega { j: usize, m: usize, i: usize },
    /// γ_j^m · Π_{l∈S} y_lj.
    P1 { j: usize, m: usize, set: Vec<usize> },
    /// V_j^m · Π_{l∈S} y_lj.
    P2 { j: usize, m: usize, set: Vec<usize> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VarSpace {
    pub defs: Vec<VarDef>,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    /// x_j column per base.
    pub x: Vec<usize>,
    /// (base, column) pairs of y_ij per demand, bases ascending.
    pub y: Vec<Vec<(usize, usize)>>,
    /// γ_j^m column at `[j][m-1]`.
    pub gamma: Vec<Vec<usize>>,
    /// Delay column at `[j][m-1]`.
    pub delay: Vec<Vec<usize>>,
}

impl VarSpace {
    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub(crate) fn push(&mut self, def: VarDef, name: String, lo: f64, hi: f64, binary: bool) -> usize {
        self.defs.push(def);
        self.names.push(name);
        self.lower.push(lo);
        self.upper.push(hi);
        self.binary.push(binary);
        self.defs.len() - 1
    }

    pub fn y_col(&self, i: usize, j: usize) -> Option<usize> {
        self.y[i].iter().find(|(b, _)| *b == j).map(|&(_, c)| c)
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.binary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k)
    }
}

/// Constraint family of a model row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowClass {
    Assignment,
    AssignOpen,
    OpenLimit,
    SteadyState,
    OpenNeedsDrone,
    DroneCapacity,
    Fleet,
    OneLevel,
    DelayDef,
    DelayGate,
    Fortet,
    McMu,
    McTau,
    McOmega,
    /// P1 products of degree `n`.
    P1(u8),
    /// P2 products of degree `n`.
    P2(u8),
    /// γ-support of the delay variables.
    Vi3,
    /// Delay decreasing in the drone count.
    Vi4,
    /// Open exactly when some level is chosen.
    Vi5,
}

impl RowClass {
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            RowClass::Assignment
                | RowClass::AssignOpen
                | RowClass::OpenLimit
                | RowClass::SteadyState
                | RowClass::OpenNeedsDrone
                | RowClass::DroneCapacity
                | RowClass::Fleet
                | RowClass::OneLevel
        )
    }

    /// Rows of the full constraint set (everything except the cut pools).
    pub fn is_model_row(self) -> bool {
        !matches!(self, RowClass::Vi3 | RowClass::Vi4 | RowClass::Vi5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    TwoLevel,
    GeneralM,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearizedModel {
    pub kind: ModelKind,
    pub max_per_base: usize,
    pub vars: VarSpace,
    /// Objective coefficients in units of `time_unit`.
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub classes: Vec<RowClass>,
    /// Row ids held back as lazy constraints by outer approximation.
    pub lazy_pool: Vec<usize>,
    /// Optimality cuts added to the lazy pool by branch-and-cut.
    pub vi5_pool: Vec<usize>,
    /// Valid inequalities separated at fractional nodes.
    pub usercut_pool: Vec<usize>,
    /// Seconds per model time unit.
    pub time_unit: f64,
    /// Delay bounds in seconds, `[j][m-1]`.
    pub u_bounds: Vec<Vec<f64>>,
}

impl LinearizedModel {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// The LP relaxation with the given rows active.
    pub fn relaxation(&self, active: &[usize]) -> LpProblem {
        LpProblem {
            objective: self.objective.clone(),
            lower: self.vars.lower.clone(),
            upper: self.vars.upper.clone(),
            rows: active.iter().map(|&r| self.rows[r].clone()).collect(),
        }
    }

    /// Objective of a point, in seconds.
    pub fn objective_seconds(&self, point: &[f64]) -> f64 {
        self.time_unit
            * self
                .objective
                .iter()
                .zip(point)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn row_ids(&self, pred: impl Fn(RowClass) -> bool) -> Vec<usize> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, &c)| pred(c))
            .map(|(r, _)| r)
            .collect()
    }

    pub(crate) fn push_row(&mut self, row: Row, class: RowClass) -> usize {
        self.rows.push(row);
        self.classes.push(class);
        self.rows.len() - 1
    }
}

/// Per-pair coefficients in model units: a = λE[S] (dimensionless) and
/// b = λE[S²] / time_unit.
pub(crate) struct Coefs {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub time_unit: f64,
}

pub(crate) fn scaled_coefs(
    instance: &crate::instance::Instance,
    moments: &crate::queueing::ServiceMoments,
) -> Coefs {
    let ni = instance.n_demands();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..ni {
        for &j in instance.bases_covering(i) {
            total += moments.mean[i][j];
            count += 1;
        }
    }
    let time_unit = total / count as f64;
    let nj = instance.n_bases();
    let mut a = vec![vec![0.0; nj]; ni];
    let mut b = vec![vec![0.0; nj]; ni];
    for i in 0..ni {
        let lam = instance.demands[i].lambda;
        for &j in instance.bases_covering(i) {
            a[i][j] = lam * moments.mean[i][j];
            b[i][j] = lam * moments.second[i][j] / time_unit;
        }
    }
    Coefs { a, b, time_unit }
}

/// Structural rows and x/y/γ columns shared by both builders.
pub(crate) fn structural(
    instance: &crate::instance::Instance,
    coefs: &Coefs,
    kind: ModelKind,
    u_bounds: Vec<Vec<f64>>,
) -> LinearizedModel {
    use crate::lp::Sense;

    let ni = instance.n_demands();
    let nj = instance.n_bases();
    let mm = instance.params.max_per_base;
    let mut vars = VarSpace::default();
    for j in 0..nj {
        let c = vars.push(VarDef::X(j), format!("x_{j}"), 0.0, 1.0, true);
        vars.x.push(c);
    }
    for i in 0..ni {
        let mut v = Vec::new();
        for &j in instance.bases_covering(i) {
            let c = vars.push(VarDef::Y { i, j }, format!("y_{i}_{j}"), 0.0, 1.0, true);
            v.push((j, c));
        }
        vars.y.push(v);
    }
    for j in 0..nj {
        let mut g = Vec::new();
        for m in 1..=mm {
            g.push(vars.push(VarDef::Gamma { j, m }, format!("gamma_{j}_{m}"), 0.0, 1.0, true));
        }
        vars.gamma.push(g);
    }

    let mut model = LinearizedModel {
        kind,
        max_per_base: mm,
        vars,
        objective: Vec::new(),
        rows: Vec::new(),
        classes: Vec::new(),
        lazy_pool: Vec::new(),
        vi5_pool: Vec::new(),
        usercut_pool: Vec::new(),
        time_unit: coefs.time_unit,
        u_bounds,
    };
    let eps = instance.params.epsilon_ss;
    let levels = |model: &LinearizedModel, j: usize, scale: f64| -> Vec<(usize, f64)> {
        (1..=mm)
            .map(|m| (model.vars.gamma[j][m - 1], scale * m as f64))
            .collect()
    };

    for i in 0..ni {
        let coefs = model.vars.y[i].iter().map(|&(_, c)| (c, 1.0)).collect();
        model.push_row(Row::new(coefs, Sense::Eq, 1.0), RowClass::Assignment);
    }
    for i in 0..ni {
        for k in 0..model.vars.y[i].len() {
            let (j, c) = model.vars.y[i][k];
            let row = Row::new(vec![(c, 1.0), (model.vars.x[j], -1.0)], Sense::Le, 0.0);
            model.push_row(row, RowClass::AssignOpen);
        }
    }
    let open = model.vars.x.iter().map(|&c| (c, 1.0)).collect();
    model.push_row(
        Row::new(open, Sense::Le, instance.params.max_open as f64),
        RowClass::OpenLimit,
    );
    for j in 0..nj {
        // Σ a y − Σ m γ + ε x ≤ 0: load stays ε below capacity at open
        // bases and the row is vacuous at closed ones
        let mut r: Vec<(usize, f64)> = instance
            .demands_covered(j)
            .iter()
            .map(|&l| (model.vars.y_col(l, j).unwrap(), coefs.a[l][j]))
            .collect();
        r.extend(levels(&model, j, -1.0));
        r.push((model.vars.x[j], eps));
        model.push_row(Row::new(r, Sense::Le, 0.0), RowClass::SteadyState);
    }
    for j in 0..nj {
        let mut r = vec![(model.vars.x[j], 1.0)];
        r.extend(levels(&model, j, -1.0));
        model.push_row(Row::new(r, Sense::Le, 0.0), RowClass::OpenNeedsDrone);
        let mut r = levels(&model, j, 1.0);
        r.push((model.vars.x[j], -(mm as f64)));
        model.push_row(Row::new(r, Sense::Le, 0.0), RowClass::DroneCapacity);
    }
    let fleet = (0..nj).flat_map(|j| levels(&model, j, 1.0)).collect();
    model.push_row(
        Row::new(fleet, Sense::Eq, instance.params.fleet_size as f64),
        RowClass::Fleet,
    );
    for j in 0..nj {
        let r = model.vars.gamma[j].iter().map(|&c| (c, 1.0)).collect();
        model.push_row(Row::new(r, Sense::Le, 1.0), RowClass::OneLevel);
    }
    model
}

/// Optimality cuts Σ_m γ_j^m = x_j.
pub(crate) fn add_vi5(model: &mut LinearizedModel) {
    use crate::lp::Sense;
    for j in 0..model.vars.x.len() {
        let mut r: Vec<(usize, f64)> = model.vars.gamma[j].iter().map(|&c| (c, 1.0)).collect();
        r.push((model.vars.x[j], -1.0));
        let id = model.push_row(Row::new(r, Sense::Eq, 0.0), RowClass::Vi5);
        model.vi5_pool.push(id);
    }
}

/// Row-count tally of the structural block: assignment, linking, open limit,
/// steady state, two drone links, fleet and one-level rows.
pub fn structural_row_count(instance: &crate::instance::Instance) -> usize {
    let ni = instance.n_demands();
    let nj = instance.n_bases();
    let pairs: usize = (0..ni).map(|i| instance.bases_covering(i).len()).sum();
    ni + pairs + 1 + nj + 2 * nj + 1 + nj
}

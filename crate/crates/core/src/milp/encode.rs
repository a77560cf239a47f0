//! Mapping between designs and model points.

use thiserror::Error;

use super::{LinearizedModel, ModelKind, VarDef};
use crate::design::Design;
use crate::instance::Instance;
use crate::queueing::{congestion_factor, ServiceMoments};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoverError {
    #[error("column {0} is not integral")]
    NonIntegral(usize),
    #[error("row {0} is violated")]
    RowInfeasible(usize),
}

const INT_TOL: f64 = 1e-6;
const ROW_TOL: f64 = 1e-6;

/// Reads (x, K, y, γ) off an integral point and checks the structural rows.
pub fn design_from_point(
    model: &LinearizedModel,
    instance: &Instance,
    point: &[f64],
) -> Result<Design, RecoverError> {
    let mut rounded = point.to_vec();
    for c in model.vars.binaries() {
        let r = point[c].round();
        if (point[c] - r).abs() > INT_TOL || !(0.0..=1.0).contains(&r) {
            return Err(RecoverError::NonIntegral(c));
        }
        rounded[c] = r;
    }
    for (r, row) in model.rows.iter().enumerate() {
        if model.classes[r].is_structural() && row.violation(&rounded) > ROW_TOL * row.scale() {
            return Err(RecoverError::RowInfeasible(r));
        }
    }
    let nj = instance.n_bases();
    let open: Vec<bool> = model.vars.x.iter().map(|&c| rounded[c] > 0.5).collect();
    let gamma: Vec<Vec<bool>> = (0..nj)
        .map(|j| model.vars.gamma[j].iter().map(|&c| rounded[c] > 0.5).collect())
        .collect();
    let drones = gamma
        .iter()
        .map(|g: &Vec<bool>| g.iter().enumerate().filter(|(_, &b)| b).map(|(m, _)| m + 1).sum())
        .collect();
    let assignment = model
        .vars
        .y
        .iter()
        .map(|cols| {
            cols.iter()
                .find(|&&(_, c)| rounded[c] > 0.5)
                .map(|&(j, _)| j)
                .expect("assignment row holds")
        })
        .collect();
    Ok(Design {
        open,
        drones,
        assignment,
        gamma,
    })
}

/// Full model point of a feasible design: every auxiliary column at the
/// value the rows force (free delay columns of inactive levels sit at their
/// upper bound, which keeps all cuts satisfied).
pub fn encode_design(
    model: &LinearizedModel,
    instance: &Instance,
    moments: &ServiceMoments,
    design: &Design,
) -> Vec<f64> {
    let t0 = model.time_unit;
    let nj = instance.n_bases();
    let mm = model.max_per_base;
    let mut rho = vec![0.0; nj];
    let mut big_n = vec![0.0; nj];
    for (i, &j) in design.assignment.iter().enumerate() {
        let lam = instance.demands[i].lambda;
        rho[j] += lam * moments.mean[i][j];
        big_n[j] += lam * moments.second[i][j] / t0;
    }
    let assigned = |l: usize, j: usize| design.assignment[l] == j;
    let level = |j: usize, m: usize| design.gamma[j][m - 1];
    let shape = |j: usize, m: usize| {
        if big_n[j] == 0.0 {
            0.0
        } else {
            big_n[j] * congestion_factor(rho[j], m).unwrap_or(f64::INFINITY)
        }
    };

    let mut delay = vec![vec![0.0; mm]; nj];
    for j in 0..nj {
        for m in 1..=mm {
            delay[j][m - 1] = match model.kind {
                ModelKind::TwoLevel => {
                    let gated = mm == 2 && m == 1;
                    if !gated || level(j, m) {
                        shape(j, m)
                    } else if design.drones[j] == 0 {
                        0.0
                    } else {
                        model.vars.upper[model.vars.delay[j][m - 1]]
                    }
                }
                ModelKind::GeneralM => {
                    if level(j, m) {
                        0.5 * shape(j, m)
                    } else {
                        0.0
                    }
                }
            };
        }
    }

    let mut x = vec![0.0; model.n_vars()];
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    for (c, def) in model.vars.defs.iter().enumerate() {
        x[c] = match def {
            VarDef::X(j) => b(design.open[*j]),
            VarDef::Y { i, j } => b(assigned(*i, *j)),
            VarDef::Gamma { j, m } => b(level(*j, *m)),
            VarDef::Delay { j, m } => delay[*j][*m - 1],
            VarDef::Mu { j, m, l } => b(assigned(*l, *j)) * delay[*j][*m - 1],
            VarDef::Z { j, l, t } => b(assigned(*l, *j) && assigned(*t, *j)),
            VarDef::Tau { j, l, t } => b(assigned(*l, *j) && assigned(*t, *j)) * delay[*j][1],
            VarDef::Omega { j, m, i } => {
                b(level(*j, *m) && assigned(*i, *j)) * delay[*j][*m - 1]
            }
            VarDef::P1 { j, m, set } => b(level(*j, *m) && set.iter().all(|&l| assigned(l, *j))),
            VarDef::P2 { j, m, set } => {
                b(set.iter().all(|&l| assigned(l, *j))) * delay[*j][*m - 1]
            }
        };
    }
    x
}

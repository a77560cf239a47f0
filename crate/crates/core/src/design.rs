//! Network designs (open bases, drone counts, assignment) and the
//! structural feasibility check.

use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::queueing::mean_service_time;

/// A candidate solution: which bases are open, how many drones each holds,
/// and which base answers each demand point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Design {
    pub open: Vec<bool>,
    /// K_j.
    pub drones: Vec<usize>,
    /// y as a function: demand i is served by base `assignment[i]`.
    pub assignment: Vec<usize>,
    /// γ_j^m for m = 1..=M, stored at index m-1.
    pub gamma: Vec<Vec<bool>>,
}

impl Design {
    /// Builds a design whose level indicators γ encode `drones`.
    /// Bases are open exactly when they hold at least one drone.
    pub fn from_counts(drones: Vec<usize>, assignment: Vec<usize>, max_per_base: usize) -> Self {
        let open = drones.iter().map(|&k| k > 0).collect();
        let gamma = drones
            .iter()
            .map(|&k| (1..=max_per_base).map(|m| m == k).collect())
            .collect();
        Self {
            open,
            drones,
            assignment,
            gamma,
        }
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn fleet(&self) -> usize {
        self.drones.iter().sum()
    }

    /// Demands assigned to base `j`, ascending.
    pub fn assignees(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &b)| b == j)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    DimensionMismatch(String),
    AssignmentOutOfRange { demand: usize, base: usize },
    AssignedToClosedBase { demand: usize, base: usize },
    TooManyOpenBases { open: usize, limit: usize },
    OpenWithoutDrones(usize),
    DronesAtClosedBase(usize),
    CapacityExceeded { base: usize, drones: usize, limit: usize },
    FleetNotFullyDeployed { deployed: usize, fleet: usize },
    GammaInconsistent(usize),
    SteadyState { base: usize, load: f64, drones: usize },
}

/// Lists every violated constraint of the base formulation plus the
/// per-base steady-state requirement load_j ≤ K_j − ε.
pub fn check_feasible(instance: &Instance, design: &Design) -> Vec<Violation> {
    let mut out = Vec::new();
    let nj = instance.n_bases();
    let ni = instance.n_demands();
    let m_max = instance.params.max_per_base;
    if design.open.len() != nj || design.drones.len() != nj || design.gamma.len() != nj {
        out.push(Violation::DimensionMismatch(format!(
            "expected {nj} bases in open/drones/gamma"
        )));
        return out;
    }
    if design.assignment.len() != ni {
        out.push(Violation::DimensionMismatch(format!(
            "expected {ni} assignments, got {}",
            design.assignment.len()
        )));
        return out;
    }
    if design.gamma.iter().any(|g| g.len() != m_max) {
        out.push(Violation::DimensionMismatch(format!(
            "gamma rows must have {m_max} levels"
        )));
        return out;
    }

    for (i, &j) in design.assignment.iter().enumerate() {
        if j >= nj || !instance.covers(i, j) {
            out.push(Violation::AssignmentOutOfRange { demand: i, base: j });
        } else if !design.open[j] {
            out.push(Violation::AssignedToClosedBase { demand: i, base: j });
        }
    }
    let n_open = design.n_open();
    if n_open > instance.params.max_open {
        out.push(Violation::TooManyOpenBases {
            open: n_open,
            limit: instance.params.max_open,
        });
    }
    for j in 0..nj {
        let k = design.drones[j];
        if design.open[j] && k == 0 {
            out.push(Violation::OpenWithoutDrones(j));
        }
        if !design.open[j] && k > 0 {
            out.push(Violation::DronesAtClosedBase(j));
        }
        if k > m_max {
            out.push(Violation::CapacityExceeded {
                base: j,
                drones: k,
                limit: m_max,
            });
        }
        let g = &design.gamma[j];
        let level_sum: usize = g.iter().filter(|&&b| b).count();
        let weighted: usize = g
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(m, _)| m + 1)
            .sum();
        if level_sum > 1 || weighted != k {
            out.push(Violation::GammaInconsistent(j));
        }
    }
    let fleet = design.fleet();
    if fleet != instance.params.fleet_size {
        out.push(Violation::FleetNotFullyDeployed {
            deployed: fleet,
            fleet: instance.params.fleet_size,
        });
    }

    let eps = instance.params.epsilon_ss;
    let mut load = vec![0.0; nj];
    for (i, &j) in design.assignment.iter().enumerate() {
        if j < nj {
            load[j] += instance.demands[i].lambda * mean_service_time(instance, i, j);
        }
    }
    for j in 0..nj {
        if load[j] > 0.0 {
            let k = design.drones[j] as f64;
            if load[j] > k - eps + STEADY_STATE_TOL * k.max(1.0) {
                out.push(Violation::SteadyState {
                    base: j,
                    load: load[j],
                    drones: design.drones[j],
                });
            }
        }
    }
    out
}

/// Relative slack accepted on the steady-state row (floating point only).
pub(crate) const STEADY_STATE_TOL: f64 = 1e-12;

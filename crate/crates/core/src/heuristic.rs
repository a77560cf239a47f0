//! Greedy baseline: open the busiest candidate bases, give the busiest an
//! extra drone, and send every request to the nearest open base.

use thiserror::Error;

use crate::design::Design;
use crate::instance::Instance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("demand {0} has no open base in range")]
    UncoveredDemand(usize),
    #[error("fleet of {fleet} does not fit in {open} bases of {per_base} drones")]
    FleetDoesNotFit {
        fleet: usize,
        open: usize,
        per_base: usize,
    },
}

/// Request volume in each base's catchment (Σ λ, proportional to the
/// number of historical requests when each one carries the same rate).
pub fn catchment_volume(instance: &Instance) -> Vec<f64> {
    (0..instance.n_bases())
        .map(|j| {
            instance
                .demands_covered(j)
                .iter()
                .map(|&i| instance.demands[i].lambda)
                .sum()
        })
        .collect()
}

/// Opens the q bases with the largest catchment volume (ties to the lower
/// index). Every open base gets one drone; the p − q spare drones are dealt
/// out one at a time in descending volume order, cycling until the fleet is
/// placed, never exceeding M. With p = q + 1 the top base holds two.
pub fn greedy_design(instance: &Instance) -> Result<Design, HeuristicError> {
    let nj = instance.n_bases();
    let p = instance.params.fleet_size;
    let q = instance.params.max_open;
    let mm = instance.params.max_per_base;
    let volume = catchment_volume(instance);
    let mut order: Vec<usize> = (0..nj).collect();
    order.sort_by(|&a, &b| volume[b].total_cmp(&volume[a]).then(a.cmp(&b)));
    let chosen = &order[..q];
    if p > q * mm {
        return Err(HeuristicError::FleetDoesNotFit {
            fleet: p,
            open: q,
            per_base: mm,
        });
    }
    let mut drones = vec![0usize; nj];
    for &j in chosen {
        drones[j] = 1;
    }
    let mut spare = p - q;
    while spare > 0 {
        for &j in chosen {
            if spare > 0 && drones[j] < mm {
                drones[j] += 1;
                spare -= 1;
            }
        }
    }
    let assignment = (0..instance.n_demands())
        .map(|i| {
            instance
                .bases_covering(i)
                .iter()
                .copied()
                .filter(|&j| drones[j] > 0)
                .min_by(|&a, &b| instance.distance(i, a).total_cmp(&instance.distance(i, b)).then(a.cmp(&b)))
                .ok_or(HeuristicError::UncoveredDemand(i))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Design::from_counts(drones, assignment, mm))
}

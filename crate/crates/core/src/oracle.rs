//! Exhaustive enumeration of designs on tiny instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{check_feasible, Design, STEADY_STATE_TOL};
use crate::instance::Instance;
use crate::queueing::{average_response, congestion_factor, QueueError, ServiceMoments};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration budget of {0} designs exceeded")]
    BudgetExceeded(u64),
    #[error("no design satisfies the constraints")]
    NoFeasibleDesign,
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_designs: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_designs: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub design: Design,
    /// R̄ in seconds, from [`average_response`].
    pub objective: f64,
    pub evaluated: u64,
    /// Assignments skipped for violating the steady-state rows.
    pub pruned: u64,
}

/// Drone-count vectors with Σ K = p, at most q open bases and K_j ≤ M, in
/// lexicographic order of (x, K).
pub fn drone_splits(instance: &Instance) -> Vec<Vec<usize>> {
    let nj = instance.n_bases();
    let p = instance.params.fleet_size;
    let q = instance.params.max_open;
    let mm = instance.params.max_per_base;
    let mut out = Vec::new();
    let mut cur = vec![0usize; nj];
    fn rec(
        j: usize,
        left: usize,
        open: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        q: usize,
        mm: usize,
    ) {
        let nj = cur.len();
        if j == nj {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if left > (nj - j) * mm {
            return;
        }
        for k in 0..=mm.min(left) {
            if k > 0 && open == q {
                break;
            }
            cur[j] = k;
            rec(j + 1, left - k, open + usize::from(k > 0), cur, out, q, mm);
        }
        cur[j] = 0;
    }
    rec(0, p, 0, &mut cur, &mut out, q, mm);
    out.sort_by(|a, b| {
        let xa: Vec<bool> = a.iter().map(|&k| k > 0).collect();
        let xb: Vec<bool> = b.iter().map(|&k| k > 0).collect();
        xa.cmp(&xb).then_with(|| a.cmp(b))
    });
    out
}

/// Calls `visit` on every design passing [`check_feasible`], in the same
/// order as [`enumerate_optimum`]. Intended for tiny instances.
pub fn for_each_feasible_design(instance: &Instance, mut visit: impl FnMut(&Design)) {
    let ni = instance.n_demands();
    let mm = instance.params.max_per_base;
    for drones in drone_splits(instance) {
        let options: Vec<Vec<usize>> = (0..ni)
            .map(|i| {
                instance
                    .bases_covering(i)
                    .iter()
                    .copied()
                    .filter(|&j| drones[j] > 0)
                    .collect()
            })
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; ni];
        loop {
            let assignment = (0..ni).map(|i| options[i][pick[i]]).collect();
            let design = Design::from_counts(drones.clone(), assignment, mm);
            if check_feasible(instance, &design).is_empty() {
                visit(&design);
            }
            let mut k = ni;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    break;
                }
                pick[k] = 0;
            }
            if pick.iter().all(|&v| v == 0) {
                break;
            }
        }
    }
}

/// Returns the design minimizing R̄ over every feasible (x, K, y), ties
/// broken toward the smallest design in lexicographic order.
pub fn enumerate_optimum(
    instance: &Instance,
    moments: &ServiceMoments,
    budget: EnumerationBudget,
) -> Result<OracleResult, OracleError> {
    let ni = instance.n_demands();
    let nj = instance.n_bases();
    let mm = instance.params.max_per_base;
    let eps = instance.params.epsilon_ss;
    let total_lambda = instance.total_lambda();
    let mut evaluated = 0u64;
    let mut pruned = 0u64;
    let mut best: Option<(f64, Design)> = None;

    let mut eta = vec![0.0; nj];
    let mut load = vec![0.0; nj];
    let mut second = vec![0.0; nj];
    for drones in drone_splits(instance) {
        let options: Vec<Vec<usize>> = (0..ni)
            .map(|i| {
                instance
                    .bases_covering(i)
                    .iter()
                    .copied()
                    .filter(|&j| drones[j] > 0)
                    .collect()
            })
            .collect();
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; ni];
        loop {
            evaluated += 1;
            if evaluated > budget.max_designs {
                return Err(OracleError::BudgetExceeded(budget.max_designs));
            }
            eta.iter_mut().for_each(|v| *v = 0.0);
            load.iter_mut().for_each(|v| *v = 0.0);
            second.iter_mut().for_each(|v| *v = 0.0);
            let mut travel = 0.0;
            for i in 0..ni {
                let j = options[i][pick[i]];
                let lam = instance.demands[i].lambda;
                eta[j] += lam;
                load[j] += lam * moments.mean[i][j];
                second[j] += lam * moments.second[i][j];
                travel += lam * instance.flight_time(i, j);
            }
            let stable = (0..nj).all(|j| {
                let k = drones[j] as f64;
                load[j] <= 0.0 || load[j] <= k - eps + STEADY_STATE_TOL * k.max(1.0)
            });
            if stable {
                // Σ_j η_j E[Q_j] with E[Q_j] = ½ N_j g_K(ρ_j), N_j = Σ λ E[S²]
                let mut queue = 0.0;
                for j in 0..nj {
                    if eta[j] > 0.0 {
                        queue += 0.5 * eta[j] * second[j] * congestion_factor(load[j], drones[j])?;
                    }
                }
                let value = (travel + queue) / total_lambda;
                let better = match &best {
                    None => true,
                    Some((b, d)) => {
                        if value < b - 1e-12 * b.abs() {
                            true
                        } else if value <= b + 1e-12 * b.abs() {
                            let assignment: Vec<usize> =
                                (0..ni).map(|i| options[i][pick[i]]).collect();
                            let cand = Design::from_counts(drones.clone(), assignment, mm);
                            cand < *d
                        } else {
                            false
                        }
                    }
                };
                if better {
                    let assignment = (0..ni).map(|i| options[i][pick[i]]).collect();
                    best = Some((value, Design::from_counts(drones.clone(), assignment, mm)));
                }
            } else {
                pruned += 1;
            }
            // odometer over assignments, last demand fastest
            let mut done = true;
            let mut k = ni;
            while k > 0 {
                k -= 1;
                pick[k] += 1;
                if pick[k] < options[k].len() {
                    done = false;
                    break;
                }
                pick[k] = 0;
            }
            if done {
                break;
            }
        }
    }
    let (_, design) = best.ok_or(OracleError::NoFeasibleDesign)?;
    let objective = average_response(instance, moments, &design)?.avg_resp;
    Ok(OracleResult {
        design,
        objective,
        evaluated,
        pruned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_tiny, TinySpec};
    use crate::geo::GeoPoint;
    use crate::instance::{CandidateBase, DemandPoint, NetworkParams};
    use crate::queueing::{mgk_delay, service_moments};

    #[test]
    fn single_candidate() {
        let inst = Instance::build(
            vec![DemandPoint::new("d", GeoPoint::on_equator(556.0), 1e-4, 1500.0)],
            vec![CandidateBase::new("b", GeoPoint::on_equator(0.0))],
            NetworkParams {
                radius: 1_000.0,
                fleet_size: 1,
                max_open: 1,
                max_per_base: 1,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let mo = service_moments(&inst);
        let r = enumerate_optimum(&inst, &mo, EnumerationBudget::default()).unwrap();
        let s = mo.mean[0][0];
        let wq = mgk_delay(1e-4, s, mo.second[0][0], 1).unwrap();
        assert!((r.objective - (wq + inst.flight_time(0, 0))).abs() < 1e-9);
        assert_eq!(r.evaluated, 1);
    }

    #[test]
    fn symmetric_bases_tie_to_lexicographic_design() {
        // both bases on top of each other: every demand is equidistant
        let p = GeoPoint::on_equator(0.0);
        let inst = Instance::build(
            vec![
                DemandPoint::new("a", GeoPoint::on_equator(300.0), 1e-4, 900.0),
                DemandPoint::new("b", GeoPoint::on_equator(-300.0), 1e-4, 900.0),
            ],
            vec![CandidateBase::new("u", p), CandidateBase::new("v", p)],
            NetworkParams {
                radius: 1_000.0,
                fleet_size: 1,
                max_open: 1,
                max_per_base: 1,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let mo = service_moments(&inst);
        let r = enumerate_optimum(&inst, &mo, EnumerationBudget::default()).unwrap();
        // (x = [false, true]) sorts before (x = [true, false])
        assert_eq!(r.design.drones, vec![0, 1]);
    }

    #[test]
    fn splits_for_two_bases() {
        let inst = Instance::build(
            vec![DemandPoint::new("d", GeoPoint::on_equator(0.0), 1e-4, 100.0)],
            vec![
                CandidateBase::new("u", GeoPoint::on_equator(0.0)),
                CandidateBase::new("v", GeoPoint::on_equator(10.0)),
            ],
            NetworkParams {
                radius: 100.0,
                fleet_size: 3,
                max_open: 2,
                max_per_base: 2,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        assert_eq!(drone_splits(&inst), vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn optimum_is_feasible_and_budget_enforced() {
        let spec = TinySpec::default();
        let mut solved = None;
        for seed in 0..10 {
            let inst = random_tiny(seed, &spec);
            let mo = service_moments(&inst);
            match enumerate_optimum(&inst, &mo, EnumerationBudget::default()) {
                Ok(r) => {
                    assert!(check_feasible(&inst, &r.design).is_empty());
                    solved.get_or_insert((inst, mo, r.evaluated));
                }
                Err(OracleError::NoFeasibleDesign) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let (inst, mo, evaluated) = solved.expect("some seed is feasible");
        let tight = EnumerationBudget { max_designs: evaluated - 1 };
        assert_eq!(
            enumerate_optimum(&inst, &mo, tight),
            Err(OracleError::BudgetExceeded(evaluated - 1))
        );
        let exact = EnumerationBudget { max_designs: evaluated };
        assert!(enumerate_optimum(&inst, &mo, exact).is_ok());
    }

    #[test]
    fn fast_evaluation_ranks_like_average_response() {
        for seed in 0..30 {
            let inst = random_tiny(seed, &TinySpec::default());
            let mo = service_moments(&inst);
            let mut best: Option<(f64, Design)> = None;
            for_each_feasible_design(&inst, |d| {
                let v = average_response(&inst, &mo, d).unwrap().avg_resp;
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, d.clone()));
                }
            });
            match (best, enumerate_optimum(&inst, &mo, EnumerationBudget::default())) {
                (Some((v, _)), Ok(r)) => assert!((r.objective - v).abs() <= 1e-12 * v, "seed {seed}"),
                (None, Err(OracleError::NoFeasibleDesign)) => {}
                (b, r) => panic!("seed {seed}: {b:?} vs {r:?}"),
            }
        }
    }
}

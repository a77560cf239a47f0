//! Upper bounds on the delay variables.
//!
//! U_j^m = N_j(y)·g_m(ρ_j(y)) with N = Σ λE[S²]y, ρ = Σ λE[S]y and
//! g_m(ρ) = ρ^{m-1} / ((m-1)!(m-ρ)²Σ_{n<m}ρⁿ/n! + (m-ρ)ρ^m). Whenever the
//! level m is in force the load satisfies ρ ≤ m − ε, so N is bounded by a
//! fractional knapsack with capacity m − ε and g_m, which is increasing,
//! by its value at min(m − ε, Σ_l λ_l E[S_l]).

use serde::{Deserialize, Serialize};

use super::MilpError;
use crate::instance::Instance;
use crate::queueing::{congestion_factor, ServiceMoments};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UBounds {
    /// Ū_j^m in seconds, `[j][m-1]`, non-increasing in m.
    pub values: Vec<Vec<f64>>,
}

/// g_m(ρ); +∞ once ρ ≥ m.
pub fn delay_shape(load: f64, m: usize) -> f64 {
    congestion_factor(load, m).unwrap_or(f64::INFINITY)
}

fn knapsack(items: &mut [(f64, f64)], capacity: f64) -> f64 {
    // (weight, value), best value density first
    items.sort_by(|p, q| (q.1 / q.0).total_cmp(&(p.1 / p.0)));
    let mut room = capacity;
    let mut value = 0.0;
    for &(w, v) in items.iter() {
        if room <= 0.0 {
            break;
        }
        let take = (room / w).min(1.0);
        value += take * v;
        room -= take * w;
    }
    value
}

pub fn compute_u_bounds(
    instance: &Instance,
    moments: &ServiceMoments,
    epsilon: f64,
) -> Result<UBounds, MilpError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MilpError::DegenerateBound(epsilon));
    }
    let mm = instance.params.max_per_base;
    let mut values = Vec::with_capacity(instance.n_bases());
    for j in 0..instance.n_bases() {
        let items: Vec<(f64, f64)> = instance
            .demands_covered(j)
            .iter()
            .map(|&l| {
                let lam = instance.demands[l].lambda;
                (lam * moments.mean[l][j], lam * moments.second[l][j])
            })
            .collect();
        let total_load: f64 = items.iter().map(|p| p.0).sum();
        let mut row: Vec<f64> = (1..=mm)
            .map(|m| {
                if items.is_empty() {
                    return 0.0;
                }
                let cap = m as f64 - epsilon;
                let n_bar = knapsack(&mut items.clone(), cap);
                n_bar * delay_shape(cap.min(total_load), m)
            })
            .collect();
        for m in (0..mm.saturating_sub(1)).rev() {
            row[m] = row[m].max(row[m + 1]);
        }
        values.push(row);
    }
    Ok(UBounds { values })
}

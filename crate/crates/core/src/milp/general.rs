//! Linearization for any number of drones per base.
//!
//! For each base j and level m a variable V_j^m carries γ_j^m·E[Q_j | K=m]:
//!
//!   V · den_m(ρ(y)) = ½ γ · N(y) · ρ(y)^{m-1},
//!   den_m(ρ) = (m-1)!(m-ρ)² Σ_{n<m} ρⁿ/n! + (m-ρ)ρ^m.
//!
//! Both sides are polynomials in ρ = Σ a_l y_l, which become multilinear in
//! y once y_l² = y_l is used. The coefficient of Π_{l∈S} y_l in ρ^k is
//! Σ_{T⊆S} (−1)^{|S|−|T|} (Σ_{l∈T} a_l)^k. Products V·y_S (P2) and γ·y_S
//! (P1) are then linearized exactly.

use super::{
    add_vi5, compute_u_bounds, scaled_coefs, structural, LinearizedModel, MilpError, ModelKind,
    RowClass, VarDef,
};
use crate::instance::Instance;
use crate::lp::{Row, Sense};
use crate::queueing::ServiceMoments;

/// Largest M built without [`MilpError::ComplexityWarning`].
pub const GENERAL_M_LIMIT: usize = 4;

const MAX_CATCHMENT: usize = 63;

pub fn linearize_general_m(
    instance: &Instance,
    moments: &ServiceMoments,
) -> Result<LinearizedModel, MilpError> {
    let mm = instance.params.max_per_base;
    if mm > GENERAL_M_LIMIT {
        return Err(MilpError::ComplexityWarning {
            m: mm,
            estimated_rows: estimate_rows(instance),
        });
    }
    linearize_general_m_unchecked(instance, moments)
}

/// Coefficients of den_m(ρ) as a polynomial in ρ, lowest degree first.
pub(crate) fn den_poly(m: usize) -> Vec<f64> {
    let mf = m as f64;
    let mut fact = 1.0;
    let mut series = Vec::with_capacity(m);
    for n in 0..m {
        if n > 0 {
            fact *= n as f64;
        }
        series.push(1.0 / fact);
    }
    // fact is now (m-1)!
    let sq = [mf * mf, -2.0 * mf, 1.0];
    let mut out = vec![0.0; m + 2];
    for (p, &s) in sq.iter().enumerate() {
        for (q, &t) in series.iter().enumerate() {
            out[p + q] += fact * s * t;
        }
    }
    out[m] += mf;
    out[m + 1] -= 1.0;
    out
}

/// Multilinear coefficient of y_S in (Σ_l a_l y_l)^k, S a bitmask over `a`.
pub(crate) fn power_coef(a: &[f64], set: u64, k: usize) -> f64 {
    let size = set.count_ones() as usize;
    if size > k {
        return 0.0;
    }
    let mut total = 0.0;
    let mut sub = set;
    loop {
        let s: f64 = (0..a.len()).filter(|&l| sub & (1 << l) != 0).map(|l| a[l]).sum();
        let sign = if (size - sub.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * s.powi(k as i32);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & set;
    }
    total
}

/// Bitmasks over n items with 1 ≤ size ≤ d, by size then lexicographically.
fn subsets(n: usize, d: usize) -> Vec<u64> {
    let mut out = Vec::new();
    for size in 1..=d.min(n) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().fold(0u64, |m, &k| m | (1 << k)));
            let mut p = size;
            while p > 0 && idx[p - 1] == n - size + p - 1 {
                p -= 1;
            }
            if p == 0 {
                break;
            }
            idx[p - 1] += 1;
            for q in p..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn estimate_rows(instance: &Instance) -> usize {
    let mm = instance.params.max_per_base;
    let mut rows = 0usize;
    for j in 0..instance.n_bases() {
        let n = instance.demands_covered(j).len();
        for m in 1..=mm {
            rows += 1;
            for s in 1..=m {
                rows = rows.saturating_add(binom(n, s) * (s + 2));
            }
            for s in 1..=m + 1 {
                rows = rows.saturating_add(binom(n, s) * (s + 2));
            }
        }
    }
    rows
}

pub fn linearize_general_m_unchecked(
    instance: &Instance,
    moments: &ServiceMoments,
) -> Result<LinearizedModel, MilpError> {
    let mm = instance.params.max_per_base;
    let nj = instance.n_bases();
    let ni = instance.n_demands();
    for j in 0..nj {
        let count = instance.demands_covered(j).len();
        if count > MAX_CATCHMENT {
            return Err(MilpError::CatchmentTooLarge {
                base: j,
                count,
                limit: MAX_CATCHMENT,
            });
        }
    }
    let ub = compute_u_bounds(instance, moments, instance.params.epsilon_ss)?;
    let coefs = scaled_coefs(instance, moments);
    let t0 = coefs.time_unit;
    let mut model = structural(instance, &coefs, ModelKind::GeneralM, ub.values.clone());
    let vbar = |j: usize, m: usize| 0.5 * ub.values[j][m - 1] / t0;

    for j in 0..nj {
        let mut d = Vec::new();
        for m in 1..=mm {
            d.push(model.vars.push(
                VarDef::Delay { j, m },
                format!("V_{j}_{m}"),
                0.0,
                vbar(j, m),
                false,
            ));
        }
        model.vars.delay.push(d);
    }

    let set_of = |cov: &[usize], mask: u64| -> Vec<usize> {
        (0..cov.len()).filter(|&k| mask & (1 << k) != 0).map(|k| cov[k]).collect()
    };
    let name_of = |set: &[usize]| set.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("_");

    // (j, m) -> [(mask, column)]
    let mut p1 = vec![vec![Vec::new(); mm]; nj];
    let mut p2 = vec![vec![Vec::new(); mm]; nj];
    for j in 0..nj {
        let cov = instance.demands_covered(j);
        for m in 1..=mm {
            for mask in subsets(cov.len(), m) {
                let set = set_of(cov, mask);
                let name = format!("p_{j}_{m}_{}", name_of(&set));
                let c = model.vars.push(VarDef::P1 { j, m, set }, name, 0.0, 1.0, false);
                p1[j][m - 1].push((mask, c));
            }
            for mask in subsets(cov.len(), m + 1) {
                let set = set_of(cov, mask);
                let name = format!("w_{j}_{m}_{}", name_of(&set));
                let c = model.vars.push(VarDef::P2 { j, m, set }, name, 0.0, vbar(j, m), false);
                p2[j][m - 1].push((mask, c));
            }
        }
    }

    let total = instance.total_lambda();
    let mut obj = vec![0.0; model.vars.len()];
    for i in 0..ni {
        let w = instance.demands[i].lambda / total;
        for &(j, c) in &model.vars.y[i] {
            obj[c] = w * instance.flight_time(i, j) / t0;
        }
    }
    for j in 0..nj {
        let cov = instance.demands_covered(j);
        for m in 0..mm {
            for &(mask, c) in &p2[j][m] {
                if mask.count_ones() == 1 {
                    let l = cov[mask.trailing_zeros() as usize];
                    obj[c] = instance.demands[l].lambda / total;
                }
            }
        }
    }
    model.objective = obj;

    // defining rows
    for j in 0..nj {
        let cov = instance.demands_covered(j);
        let a: Vec<f64> = cov.iter().map(|&l| coefs.a[l][j]).collect();
        let b: Vec<f64> = cov.iter().map(|&l| coefs.b[l][j]).collect();
        for m in 1..=mm {
            let den = den_poly(m);
            let mut r = vec![(model.vars.delay[j][m - 1], den[0])];
            for &(mask, c) in &p2[j][m - 1] {
                let d: f64 = (mask.count_ones() as usize..=m + 1)
                    .map(|k| den[k] * power_coef(&a, mask, k))
                    .sum();
                r.push((c, d));
            }
            for &(mask, c) in &p1[j][m - 1] {
                let mut e = 0.0;
                for l in 0..cov.len() {
                    if mask & (1 << l) != 0 {
                        e += b[l]
                            * (power_coef(&a, mask, m - 1) + power_coef(&a, mask & !(1 << l), m - 1));
                    }
                }
                r.push((c, -0.5 * e));
            }
            r.retain(|&(_, v)| v != 0.0);
            model.push_row(Row::new(r, Sense::Eq, 0.0), RowClass::DelayDef);
        }
    }

    // product rows
    for j in 0..nj {
        let cov = instance.demands_covered(j);
        let ycols: Vec<usize> = cov.iter().map(|&l| model.vars.y_col(l, j).unwrap()).collect();
        for m in 1..=mm {
            let g = model.vars.gamma[j][m - 1];
            let v = model.vars.delay[j][m - 1];
            let hi = vbar(j, m);
            for &(mask, c) in &p1[j][m - 1].clone() {
                let s = mask.count_ones() as usize;
                let class = RowClass::P1(s as u8);
                let members: Vec<usize> = (0..cov.len()).filter(|&k| mask & (1 << k) != 0).collect();
                let mut ids = vec![model.push_row(Row::new(vec![(c, 1.0), (g, -1.0)], Sense::Le, 0.0), class)];
                for &k in &members {
                    ids.push(model.push_row(
                        Row::new(vec![(c, 1.0), (ycols[k], -1.0)], Sense::Le, 0.0),
                        class,
                    ));
                }
                let mut lo = vec![(c, 1.0), (g, -1.0)];
                lo.extend(members.iter().map(|&k| (ycols[k], -1.0)));
                ids.push(model.push_row(Row::new(lo, Sense::Ge, -(s as f64)), class));
                if s >= 2 {
                    model.lazy_pool.extend(ids);
                }
            }
            for &(mask, c) in &p2[j][m - 1].clone() {
                let s = mask.count_ones() as usize;
                let class = RowClass::P2(s as u8);
                let members: Vec<usize> = (0..cov.len()).filter(|&k| mask & (1 << k) != 0).collect();
                let mut ids = vec![model.push_row(Row::new(vec![(c, 1.0), (v, -1.0)], Sense::Le, 0.0), class)];
                for &k in &members {
                    ids.push(model.push_row(
                        Row::new(vec![(c, 1.0), (ycols[k], -hi)], Sense::Le, 0.0),
                        class,
                    ));
                }
                let mut lo = vec![(c, 1.0), (v, -1.0)];
                lo.extend(members.iter().map(|&k| (ycols[k], -hi)));
                ids.push(model.push_row(Row::new(lo, Sense::Ge, -hi * s as f64), class));
                if s >= 2 {
                    model.lazy_pool.extend(ids);
                }
            }
        }
    }

    // user cuts V^m ≤ V̄^m γ^m
    for j in 0..nj {
        for m in 1..=mm {
            let hi = vbar(j, m);
            if hi <= 0.0 {
                continue;
            }
            let r = vec![(model.vars.delay[j][m - 1], 1.0), (model.vars.gamma[j][m - 1], -hi)];
            let id = model.push_row(Row::new(r, Sense::Le, 0.0), RowClass::Vi3);
            model.usercut_pool.push(id);
        }
    }
    add_vi5(&mut model);
    Ok(model)
}

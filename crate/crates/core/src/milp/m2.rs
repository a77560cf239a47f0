//! Linearization with at most two drones per base.
//!
//! With ρ = Σ a_l y_l and N = Σ b_l y_l the delay variables satisfy
//!
//!   U¹ (1 − ρ)   = N            (one drone)
//!   U² (4 − ρ²)  = N ρ          (two drones)
//!
//! Expanding ρU¹, ρ²U² and Nρ over binary y gives products y·U (μ),
//! y_l·y_t (z) and y_l·y_t·U² (τ), and the objective needs γ·μ (ω).
//! The one-drone row is only imposed when γ_j^1 = 1 in a two-level model:
//! a two-drone base may carry a load above 1, where U¹ has no finite value.

use super::{
    add_vi5, compute_u_bounds, scaled_coefs, structural, LinearizedModel, MilpError, ModelKind,
    RowClass, VarDef,
};
use crate::instance::Instance;
use crate::lp::{Row, Sense};
use crate::queueing::ServiceMoments;

pub fn linearize_m2(
    instance: &Instance,
    moments: &ServiceMoments,
) -> Result<LinearizedModel, MilpError> {
    let mm = instance.params.max_per_base;
    if !(1..=2).contains(&mm) {
        return Err(MilpError::WrongMaxPerBase {
            expected: "1 or 2".into(),
            got: mm,
        });
    }
    let ub = compute_u_bounds(instance, moments, instance.params.epsilon_ss)?;
    let coefs = scaled_coefs(instance, moments);
    let t0 = coefs.time_unit;
    let mut model = structural(instance, &coefs, ModelKind::TwoLevel, ub.values.clone());
    let nj = instance.n_bases();
    let ni = instance.n_demands();
    let ubar = |j: usize, m: usize| ub.values[j][m - 1] / t0;

    // delay columns
    for j in 0..nj {
        let mut d = Vec::new();
        for m in 1..=mm {
            d.push(model.vars.push(
                VarDef::Delay { j, m },
                format!("U_{j}_{m}"),
                0.0,
                ubar(j, m),
                false,
            ));
        }
        model.vars.delay.push(d);
    }
    // μ_lj^m = y_lj U_j^m
    let mut mu = vec![vec![Vec::new(); mm]; nj];
    for j in 0..nj {
        for m in 1..=mm {
            for &l in instance.demands_covered(j) {
                let c = model.vars.push(
                    VarDef::Mu { j, m, l },
                    format!("mu_{l}_{j}_{m}"),
                    0.0,
                    ubar(j, m),
                    false,
                );
                mu[j][m - 1].push((l, c));
            }
        }
    }
    // z_lt^j = y_lj y_tj and τ_lt^j = z_lt^j U_j^2
    let mut pairs = vec![Vec::new(); nj];
    if mm == 2 {
        for j in 0..nj {
            let cov = instance.demands_covered(j);
            for (p, &l) in cov.iter().enumerate() {
                for &t in &cov[p + 1..] {
                    let z = model.vars.push(
                        VarDef::Z { j, l, t },
                        format!("z_{l}_{t}_{j}"),
                        0.0,
                        1.0,
                        false,
                    );
                    pairs[j].push((l, t, z, 0usize));
                }
            }
            for k in 0..pairs[j].len() {
                let (l, t, _, _) = pairs[j][k];
                let tau = model.vars.push(
                    VarDef::Tau { j, l, t },
                    format!("tau_{l}_{t}_{j}"),
                    0.0,
                    ubar(j, 2),
                    false,
                );
                pairs[j][k].3 = tau;
            }
        }
    }
    // ω_ij^m = γ_j^m μ_ij^m
    let mut omega = vec![vec![Vec::new(); mm]; nj];
    for j in 0..nj {
        for m in 1..=mm {
            for &i in instance.demands_covered(j) {
                let c = model.vars.push(
                    VarDef::Omega { j, m, i },
                    format!("omega_{i}_{j}_{m}"),
                    0.0,
                    ubar(j, m),
                    false,
                );
                omega[j][m - 1].push((i, c));
            }
        }
    }

    // objective
    let total = instance.total_lambda();
    let mut obj = vec![0.0; model.vars.len()];
    for i in 0..ni {
        let w = instance.demands[i].lambda / total;
        for &(j, c) in &model.vars.y[i] {
            obj[c] = w * instance.flight_time(i, j) / t0;
        }
    }
    for j in 0..nj {
        for m in 0..mm {
            for &(i, c) in &omega[j][m] {
                obj[c] = 0.5 * instance.demands[i].lambda / total;
            }
        }
    }
    model.objective = obj;

    let y = |model: &LinearizedModel, l: usize, j: usize| model.vars.y_col(l, j).unwrap();

    // delay definitions
    for j in 0..nj {
        let u1 = model.vars.delay[j][0];
        let g1 = model.vars.gamma[j][0];
        let mut r = vec![(u1, 1.0)];
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for (k, &l) in instance.demands_covered(j).iter().enumerate() {
            r.push((mu[j][0][k].1, -coefs.a[l][j]));
            r.push((y(&model, l, j), -coefs.b[l][j]));
            sum_a += coefs.a[l][j];
            sum_b += coefs.b[l][j];
        }
        if mm == 1 {
            model.push_row(Row::new(r, Sense::Eq, 0.0), RowClass::DelayDef);
        } else {
            // residual ≤ Ū(1 − γ¹) and ≥ −(ŪΣa + Σb)(1 − γ¹)
            let hi = ubar(j, 1);
            let lo = hi * sum_a + sum_b;
            let mut up = r.clone();
            up.push((g1, hi));
            model.push_row(Row::new(up, Sense::Le, hi), RowClass::DelayGate);
            let mut dn = r;
            dn.push((g1, -lo));
            model.push_row(Row::new(dn, Sense::Ge, -lo), RowClass::DelayGate);
        }
        if mm == 2 {
            // 4U² − Σa²μ² − 2Σ a_l a_t τ − Σ a b y − Σ (b_l a_t + b_t a_l) z = 0
            let mut r = vec![(model.vars.delay[j][1], 4.0)];
            for (k, &l) in instance.demands_covered(j).iter().enumerate() {
                let (a, b) = (coefs.a[l][j], coefs.b[l][j]);
                r.push((mu[j][1][k].1, -a * a));
                r.push((y(&model, l, j), -a * b));
            }
            for &(l, t, z, tau) in &pairs[j] {
                let (al, at) = (coefs.a[l][j], coefs.a[t][j]);
                let (bl, bt) = (coefs.b[l][j], coefs.b[t][j]);
                r.push((tau, -2.0 * al * at));
                r.push((z, -(bl * at + bt * al)));
            }
            model.push_row(Row::new(r, Sense::Eq, 0.0), RowClass::DelayDef);
        }
    }

    // Fortet rows for z
    for j in 0..nj {
        for &(l, t, z, _) in &pairs[j] {
            let (yl, yt) = (y(&model, l, j), y(&model, t, j));
            let ids = [
                model.push_row(
                    Row::new(vec![(z, 1.0), (yl, -1.0), (yt, -1.0)], Sense::Ge, -1.0),
                    RowClass::Fortet,
                ),
                model.push_row(Row::new(vec![(z, 1.0), (yl, -1.0)], Sense::Le, 0.0), RowClass::Fortet),
                model.push_row(Row::new(vec![(z, 1.0), (yt, -1.0)], Sense::Le, 0.0), RowClass::Fortet),
            ];
            model.lazy_pool.extend(ids);
        }
    }
    // McCormick rows: μ = yU, τ = zU², ω = γμ (all lower bounds are 0)
    for j in 0..nj {
        for m in 1..=mm {
            let u = model.vars.delay[j][m - 1];
            let hi = ubar(j, m);
            for &(l, c) in &mu[j][m - 1] {
                let yl = y(&model, l, j);
                mccormick(&mut model, c, u, yl, hi, RowClass::McMu);
            }
        }
        if mm == 2 {
            let u2 = model.vars.delay[j][1];
            let hi = ubar(j, 2);
            for &(_, _, z, tau) in &pairs[j] {
                let ids = mccormick(&mut model, tau, u2, z, hi, RowClass::McTau);
                model.lazy_pool.extend(ids);
            }
        }
        for m in 1..=mm {
            let g = model.vars.gamma[j][m - 1];
            let hi = ubar(j, m);
            for (k, &(_, w)) in omega[j][m - 1].iter().enumerate() {
                let muc = mu[j][m - 1][k].1;
                mccormick(&mut model, w, muc, g, hi, RowClass::McOmega);
            }
        }
    }

    // user cuts: Ū^m Σγ ≥ U^m and U¹ ≥ U²
    for j in 0..nj {
        for m in 1..=mm {
            let hi = ubar(j, m);
            if hi <= 0.0 {
                continue;
            }
            let mut r = vec![(model.vars.delay[j][m - 1], 1.0)];
            r.extend(model.vars.gamma[j].iter().map(|&g| (g, -hi)));
            let id = model.push_row(Row::new(r, Sense::Le, 0.0), RowClass::Vi3);
            model.usercut_pool.push(id);
        }
        if mm == 2 {
            let r = vec![(model.vars.delay[j][0], 1.0), (model.vars.delay[j][1], -1.0)];
            let id = model.push_row(Row::new(r, Sense::Ge, 0.0), RowClass::Vi4);
            model.usercut_pool.push(id);
        }
    }
    add_vi5(&mut model);
    Ok(model)
}

/// w = b·c for binary b and c ∈ [0, hi]: w ≥ c − hi(1 − b), w ≤ hi·b, w ≤ c.
fn mccormick(
    model: &mut LinearizedModel,
    w: usize,
    c: usize,
    b: usize,
    hi: f64,
    class: RowClass,
) -> [usize; 3] {
    [
        model.push_row(
            Row::new(vec![(w, 1.0), (c, -1.0), (b, -hi)], Sense::Ge, -hi),
            class,
        ),
        model.push_row(Row::new(vec![(w, 1.0), (b, -hi)], Sense::Le, 0.0), class),
        model.push_row(Row::new(vec![(w, 1.0), (c, -1.0)], Sense::Le, 0.0), class),
    ]
}

//! Dense bounded-variable primal simplex.
//!
//! Each row gets a logical variable s_i = a_i·x whose bounds encode the row
//! sense, so the system is `A x − s = 0` with every column boxed (possibly by
//! infinite bounds). Rows whose logical starts outside its box receive an
//! artificial column and phase 1 minimizes their sum. Pricing is Dantzig
//! with a switch to Bland's rule after a run of degenerate pivots; every tie
//! goes to the lowest variable index.

use super::{LpError, LpOracle, LpSolution, Row, Sense};

#[derive(Debug, Clone, Copy)]
pub struct BoundedSimplex {
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub feas_tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to Bland.
    pub degenerate_switch: usize,
}

impl Default for BoundedSimplex {
    fn default() -> Self {
        Self {
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            feas_tol: 1e-7,
            degenerate_switch: 50,
        }
    }
}

struct Tableau {
    m: usize,
    ncol: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    d: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, k: usize) -> f64 {
        self.t[i * self.ncol + k]
    }

    fn reprice(&mut self, cost: &[f64]) {
        for k in 0..self.ncol {
            let mut v = cost[k];
            for i in 0..self.m {
                v -= cost[self.basis[i]] * self.at(i, k);
            }
            self.d[k] = if self.is_basic[k] { 0.0 } else { v };
        }
    }

    // x_B = −T_N x_N, which removes drift accumulated by incremental updates
    fn recompute_basic(&mut self) {
        for i in 0..self.m {
            let mut v = 0.0;
            for k in 0..self.ncol {
                if !self.is_basic[k] {
                    v -= self.at(i, k) * self.x[k];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.ncol;
        let p = self.at(r, q);
        for k in 0..n {
            self.t[r * n + k] /= p;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, q);
            if f != 0.0 {
                for k in 0..n {
                    self.t[i * n + k] -= f * self.t[r * n + k];
                }
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for k in 0..n {
                self.d[k] -= f * self.t[r * n + k];
            }
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.d[q] = 0.0;
    }
}

impl BoundedSimplex {
    fn optimize(&self, tab: &mut Tableau, max_iter: usize) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            let bland = degenerate_run >= self.degenerate_switch;
            // entering variable
            let mut enter: Option<(usize, f64)> = None;
            for k in 0..tab.ncol {
                if tab.is_basic[k] || tab.hi[k] - tab.lo[k] <= 0.0 {
                    continue;
                }
                let dk = tab.d[k];
                let can_up = dk < -self.opt_tol && tab.x[k] < tab.hi[k];
                let can_down = dk > self.opt_tol && tab.x[k] > tab.lo[k];
                if !(can_up || can_down) {
                    continue;
                }
                match enter {
                    None => enter = Some((k, dk.abs())),
                    Some((_, best)) if !bland && dk.abs() > best => enter = Some((k, dk.abs())),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((q, _)) = enter else {
                return Ok(());
            };
            let dir = if tab.d[q] < 0.0 { 1.0 } else { -1.0 };

            // ratio test; `None` row means the entering variable flips bounds
            let mut step = tab.hi[q] - tab.lo[q];
            let mut leave: Option<usize> = None;
            for i in 0..tab.m {
                let rate = -tab.at(i, q) * dir;
                if rate.abs() <= self.pivot_tol {
                    continue;
                }
                let b = tab.basis[i];
                let lim = if rate < 0.0 {
                    (tab.x[b] - tab.lo[b]) / -rate
                } else {
                    (tab.hi[b] - tab.x[b]) / rate
                };
                let lim = lim.max(0.0);
                if lim < step - 1e-12 {
                    step = lim;
                    leave = Some(i);
                } else if lim <= step + 1e-12 {
                    // ties between rows go to the lowest variable index;
                    // a tie with the bound flip keeps the flip
                    if let Some(r) = leave {
                        if b < tab.basis[r] {
                            leave = Some(i);
                            step = step.min(lim);
                        }
                    }
                }
            }
            if step.is_infinite() {
                return Err(LpError::Unbounded);
            }
            degenerate_run = if step <= 1e-12 { degenerate_run + 1 } else { 0 };

            // move along the edge
            for i in 0..tab.m {
                let a = tab.at(i, q);
                if a != 0.0 {
                    let b = tab.basis[i];
                    tab.x[b] -= a * dir * step;
                }
            }
            tab.x[q] += dir * step;
            match leave {
                None => {
                    tab.x[q] = if dir > 0.0 { tab.hi[q] } else { tab.lo[q] };
                }
                Some(r) => {
                    let b = tab.basis[r];
                    let rate = -tab.at(r, q) * dir;
                    tab.x[b] = if rate < 0.0 { tab.lo[b] } else { tab.hi[b] };
                    tab.pivot(r, q);
                }
            }
        }
        Err(LpError::IterationLimit)
    }
}

fn nearest_finite(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

impl LpOracle for BoundedSimplex {
    fn solve(
        &self,
        rows: &[Row],
        lower: &[f64],
        upper: &[f64],
        objective: &[f64],
        fixes: &[(usize, f64)],
    ) -> Result<LpSolution, LpError> {
        let n = objective.len();
        let m = rows.len();
        let ncol = n + 2 * m;
        let mut lo = Vec::with_capacity(ncol);
        let mut hi = Vec::with_capacity(ncol);
        lo.extend_from_slice(lower);
        hi.extend_from_slice(upper);
        for &(j, v) in fixes {
            lo[j] = v;
            hi[j] = v;
        }
        if (0..n).any(|j| lo[j] > hi[j] + self.feas_tol) {
            return Err(LpError::Infeasible);
        }
        for r in rows {
            let (l, h) = match r.sense {
                Sense::Le => (f64::NEG_INFINITY, r.rhs),
                Sense::Ge => (r.rhs, f64::INFINITY),
                Sense::Eq => (r.rhs, r.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        lo.resize(ncol, 0.0);
        hi.resize(ncol, 0.0);

        let mut x = vec![0.0; ncol];
        for j in 0..n {
            x[j] = nearest_finite(lo[j], hi[j]);
        }
        let mut t = vec![0.0; m * ncol];
        let mut basis = vec![0; m];
        let mut is_basic = vec![false; ncol];
        let mut phase1_cost = vec![0.0; ncol];
        for (i, r) in rows.iter().enumerate() {
            let w = r.activity(&x);
            let s = n + i;
            let a = n + m + i;
            let (sl, sh) = (lo[s], hi[s]);
            // B is diagonal at the start: the basic column of row i is
            // either −e_i (logical) or σ·e_i (artificial)
            let (pivot, target) = if w >= sl - self.feas_tol && w <= sh + self.feas_tol {
                x[s] = w;
                basis[i] = s;
                (-1.0, s)
            } else {
                let bound = if w < sl { sl } else { sh };
                let sigma = if bound > w { 1.0 } else { -1.0 };
                x[s] = bound;
                x[a] = (bound - w) * sigma;
                hi[a] = f64::INFINITY;
                phase1_cost[a] = 1.0;
                basis[i] = a;
                (sigma, a)
            };
            is_basic[target] = true;
            let row = &mut t[i * ncol..(i + 1) * ncol];
            for &(j, c) in &r.coefs {
                row[j] += c / pivot;
            }
            row[s] = -1.0 / pivot;
            let sigma = if target == a { pivot } else { 1.0 };
            row[a] = sigma / pivot;
        }

        let mut tab = Tableau {
            m,
            ncol,
            t,
            basis,
            is_basic,
            x,
            lo,
            hi,
            d: vec![0.0; ncol],
        };
        let max_iter = 50 * (ncol + m) + 1000;

        if phase1_cost.iter().any(|&c| c > 0.0) {
            tab.reprice(&phase1_cost);
            self.optimize(&mut tab, max_iter)?;
            tab.recompute_basic();
            let infeas: f64 = (n + m..ncol).map(|a| tab.x[a]).sum();
            let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0, f64::max);
            if infeas > self.feas_tol * scale {
                return Err(LpError::Infeasible);
            }
        }
        for a in n + m..ncol {
            tab.hi[a] = 0.0;
            if !tab.is_basic[a] {
                tab.x[a] = 0.0;
            }
        }
        let mut cost = objective.to_vec();
        cost.resize(ncol, 0.0);
        tab.reprice(&cost);
        self.optimize(&mut tab, max_iter)?;
        tab.recompute_basic();

        let xs: Vec<f64> = tab.x[..n].to_vec();
        let obj = xs.iter().zip(objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x: xs, objective: obj })
    }
}

//! Closed-form M/G/K metrics for a fixed design.
//!
//! Every base is an M/G/K_j queue whose arrival rate and service-time
//! moments are λ-weighted mixtures over the demands assigned to it. The
//! queueing delay uses the Nozaki–Ross approximation, which is exact for
//! exponential service and reduces to Pollaczek–Khinchine for K = 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::Design;
use crate::instance::Instance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("unstable queue: load {load} with {servers} servers")]
    UnstableQueue { load: f64, servers: usize },
    #[error("number of servers must be at least 1")]
    InvalidCapacity,
    #[error("base {0} has no assigned demand")]
    EmptyBase(usize),
}

/// E[S_ij] = β·d_ij/v + E[ξ_i].
pub fn mean_service_time(instance: &Instance, i: usize, j: usize) -> f64 {
    instance.params.beta * instance.flight_time(i, j) + instance.demands[i].xi_mean
}

/// Per-pair service time moments, travel treated as deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments {
    /// E[S_ij], seconds.
    pub mean: Vec<Vec<f64>>,
    /// E[S_ij²], seconds².
    pub second: Vec<Vec<f64>>,
}

pub fn service_moments(instance: &Instance) -> ServiceMoments {
    let ni = instance.n_demands();
    let nj = instance.n_bases();
    let mut mean = vec![vec![0.0; nj]; ni];
    let mut second = vec![vec![0.0; nj]; ni];
    for i in 0..ni {
        let xi = &instance.demands[i];
        for j in 0..nj {
            let travel = instance.params.beta * instance.flight_time(i, j);
            mean[i][j] = travel + xi.xi_mean;
            second[i][j] = travel * travel + 2.0 * travel * xi.xi_mean + xi.xi_second_moment;
        }
    }
    ServiceMoments { mean, second }
}

/// Arrival rate and mixed service moments at one base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseLoad {
    pub eta: f64,
    pub s_mean: f64,
    pub s_second: f64,
}

impl BaseLoad {
    /// Offered load ρ = η·E[S].
    pub fn load(&self) -> f64 {
        self.eta * self.s_mean
    }
}

pub fn base_moments(
    instance: &Instance,
    moments: &ServiceMoments,
    design: &Design,
    j: usize,
) -> Result<BaseLoad, QueueError> {
    let mut eta = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in design.assignees(j) {
        let lam = instance.demands[i].lambda;
        eta += lam;
        m1 += lam * moments.mean[i][j];
        m2 += lam * moments.second[i][j];
    }
    if eta == 0.0 {
        return Err(QueueError::EmptyBase(j));
    }
    Ok(BaseLoad {
        eta,
        s_mean: m1 / eta,
        s_second: m2 / eta,
    })
}

/// The dimensionless factor g_K(ρ) with E[Q] = η·E[S²]·g_K(ρ) / 2.
///
/// g_K(ρ) = t_{K-1} / ((K-ρ)²·Σ_{n<K} t_n + (K-ρ)·ρ·t_{K-1}), t_n = ρⁿ/n!,
/// evaluated with iteratively accumulated terms so K up to a few dozen
/// stays finite.
pub fn congestion_factor(load: f64, servers: usize) -> Result<f64, QueueError> {
    if servers == 0 {
        return Err(QueueError::InvalidCapacity);
    }
    let k = servers as f64;
    if !(load < k) {
        return Err(QueueError::UnstableQueue { load, servers });
    }
    let mut term = 1.0;
    let mut partial = 0.0;
    for n in 0..servers {
        if n > 0 {
            term *= load / n as f64;
        }
        partial += term;
    }
    // `term` is now t_{K-1}
    let gap = k - load;
    Ok(term / (gap * gap * partial + gap * load * term))
}

/// Expected queueing delay of an M/G/K queue.
pub fn mgk_delay(eta: f64, s_mean: f64, s_second: f64, servers: usize) -> Result<f64, QueueError> {
    if servers == 0 {
        return Err(QueueError::InvalidCapacity);
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let g = congestion_factor(eta * s_mean, servers)?;
    Ok(0.5 * eta * s_second * g)
}

/// Queueing metrics of a whole design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueMetrics {
    /// η_j, per second (0 for bases without assignees).
    pub eta: Vec<f64>,
    pub s_mean: Vec<f64>,
    pub s_second: Vec<f64>,
    /// E[Q_j], seconds.
    pub wq: Vec<f64>,
    /// E[R_i], seconds.
    pub resp: Vec<f64>,
    /// R̄, seconds.
    pub avg_resp: f64,
}

impl QueueMetrics {
    pub fn utilization(&self, j: usize) -> f64 {
        self.eta[j] * self.s_mean[j]
    }
}

/// Exact objective of a design: the λ-weighted mean of E[Q_{y(i)}] + d/v.
pub fn average_response(
    instance: &Instance,
    moments: &ServiceMoments,
    design: &Design,
) -> Result<QueueMetrics, QueueError> {
    let metrics = evaluate(instance, moments, design)?;
    Ok(metrics)
}

fn evaluate(
    instance: &Instance,
    moments: &ServiceMoments,
    design: &Design,
) -> Result<QueueMetrics, QueueError> {
    let nj = instance.n_bases();
    let mut eta = vec![0.0; nj];
    let mut s_mean = vec![0.0; nj];
    let mut s_second = vec![0.0; nj];
    let mut wq = vec![0.0; nj];
    for j in 0..nj {
        match base_moments(instance, moments, design, j) {
            Ok(b) => {
                eta[j] = b.eta;
                s_mean[j] = b.s_mean;
                s_second[j] = b.s_second;
                wq[j] = mgk_delay(b.eta, b.s_mean, b.s_second, design.drones[j])?;
            }
            Err(QueueError::EmptyBase(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(finish(instance, design, eta, s_mean, s_second, wq))
}

fn finish(
    instance: &Instance,
    design: &Design,
    eta: Vec<f64>,
    s_mean: Vec<f64>,
    s_second: Vec<f64>,
    wq: Vec<f64>,
) -> QueueMetrics {
    let resp: Vec<f64> = design
        .assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| wq[j] + instance.flight_time(i, j))
        .collect();
    let total = instance.total_lambda();
    let avg_resp = resp
        .iter()
        .zip(&instance.demands)
        .map(|(r, d)| d.lambda * r)
        .sum::<f64>()
        / total;
    QueueMetrics {
        eta,
        s_mean,
        s_second,
        wq,
        resp,
        avg_resp,
    }
}

/// Like [`average_response`] but never fails on congestion: unstable bases
/// get an infinite delay and are listed, so R̄ becomes +∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LenientEvaluation {
    pub metrics: QueueMetrics,
    pub unstable_bases: Vec<usize>,
}

pub fn evaluate_lenient(
    instance: &Instance,
    moments: &ServiceMoments,
    design: &Design,
) -> LenientEvaluation {
    let nj = instance.n_bases();
    let mut eta = vec![0.0; nj];
    let mut s_mean = vec![0.0; nj];
    let mut s_second = vec![0.0; nj];
    let mut wq = vec![0.0; nj];
    let mut unstable = Vec::new();
    for j in 0..nj {
        if let Ok(b) = base_moments(instance, moments, design, j) {
            eta[j] = b.eta;
            s_mean[j] = b.s_mean;
            s_second[j] = b.s_second;
            wq[j] = match mgk_delay(b.eta, b.s_mean, b.s_second, design.drones[j]) {
                Ok(w) => w,
                Err(_) => {
                    unstable.push(j);
                    f64::INFINITY
                }
            };
        }
    }
    LenientEvaluation {
        metrics: finish(instance, design, eta, s_mean, s_second, wq),
        unstable_bases: unstable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::instance::{CandidateBase, DemandPoint, NetworkParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single(d_m: f64, lambda: f64, xi: f64, xi2: f64, k: usize) -> (Instance, Design) {
        let inst = Instance::build(
            vec![DemandPoint::new("d", GeoPoint::on_equator(d_m), lambda, xi)
                .with_xi_second_moment(xi2)],
            vec![CandidateBase::new("b", GeoPoint::on_equator(0.0))],
            NetworkParams {
                radius: d_m + 1.0,
                fleet_size: k,
                max_open: 1,
                max_per_base: k.max(1),
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let design = Design::from_counts(vec![k], vec![0], k.max(1));
        (inst, design)
    }

    // Erlang-C written from the textbook definition, independent of
    // congestion_factor.
    fn erlang_c_wait(eta: f64, s: f64, k: usize) -> f64 {
        let a = eta * s;
        let fact = |n: usize| (1..=n).fold(1.0, |acc, x| acc * x as f64);
        let head: f64 = (0..k).map(|n| a.powi(n as i32) / fact(n)).sum();
        let tail = a.powi(k as i32) / fact(k) * k as f64 / (k as f64 - a);
        let c = tail / (head + tail);
        c * s / (k as f64 - a)
    }

    #[test]
    fn service_moments_hand_value() {
        let (inst, _) = single(1668.0, 1e-4, 1500.0, 1500.0 * 1500.0, 1);
        let m = service_moments(&inst);
        assert_relative_eq!(m.mean[0][0], 1620.0, max_relative = 1e-9);
    }

    #[test]
    fn zero_travel_service_equals_non_travel() {
        let (inst, _) = single(0.0, 1e-4, 900.0, 900.0 * 900.0, 1);
        let m = service_moments(&inst);
        assert_eq!(m.mean[0][0], 900.0);
        assert_eq!(m.second[0][0], 900.0 * 900.0);
    }

    #[test]
    fn base_moments_weighted() {
        // Two demands on the same spot, E[S] = 100 and 200 via ξ.
        let p = GeoPoint::on_equator(0.0);
        let mk = |lam: f64, lam2: f64| {
            Instance::build(
                vec![
                    DemandPoint::new("a", p, lam, 100.0),
                    DemandPoint::new("b", p, lam2, 200.0),
                ],
                vec![CandidateBase::new("b", p)],
                NetworkParams {
                    radius: 1.0,
                    fleet_size: 1,
                    max_open: 1,
                    max_per_base: 1,
                    ..NetworkParams::default()
                },
            )
            .unwrap()
        };
        let design = Design::from_counts(vec![1], vec![0, 0], 1);
        let inst = mk(1e-4, 1e-4);
        let b = base_moments(&inst, &service_moments(&inst), &design, 0).unwrap();
        assert_relative_eq!(b.s_mean, 150.0, max_relative = 1e-12);
        let inst = mk(1e-4, 3e-4);
        let b = base_moments(&inst, &service_moments(&inst), &design, 0).unwrap();
        assert_relative_eq!(b.s_mean, 175.0, max_relative = 1e-12);
        assert_relative_eq!(b.eta, 4e-4, max_relative = 1e-12);
    }

    #[test]
    fn singleton_base_moments() {
        let (inst, design) = single(300.0, 2e-4, 600.0, 5e5, 1);
        let m = service_moments(&inst);
        let b = base_moments(&inst, &m, &design, 0).unwrap();
        assert_eq!(b.eta, 2e-4);
        assert_eq!(b.s_mean, m.mean[0][0]);
        assert_eq!(b.s_second, m.second[0][0]);
    }

    #[test]
    fn empty_base_reported() {
        let (inst, mut design) = single(0.0, 1e-4, 10.0, 100.0, 1);
        design.assignment.clear();
        let err = base_moments(&inst, &service_moments(&inst), &design, 0).unwrap_err();
        assert_eq!(err, QueueError::EmptyBase(0));
    }

    #[test]
    fn pk_example() {
        let w = mgk_delay(5e-4, 1000.0, 1e6, 1).unwrap();
        assert_relative_eq!(w, 500.0, max_relative = 1e-12);
    }

    #[test]
    fn mm2_example() {
        let w = mgk_delay(1.0, 1.0, 2.0, 2).unwrap();
        assert_relative_eq!(w, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn idle_queue_has_no_delay() {
        assert_eq!(mgk_delay(0.0, 100.0, 1e4, 3).unwrap(), 0.0);
    }

    #[test]
    fn unstable_and_invalid_rejected() {
        assert!(matches!(
            mgk_delay(1.0, 2.0, 8.0, 2),
            Err(QueueError::UnstableQueue { .. })
        ));
        assert_eq!(mgk_delay(1.0, 0.5, 1.0, 0), Err(QueueError::InvalidCapacity));
    }

    #[test]
    fn large_server_counts_stay_finite() {
        for k in [10usize, 20, 40] {
            let w = mgk_delay(1.0, 0.9 * k as f64, 2.0 * (0.9 * k as f64).powi(2), k).unwrap();
            assert!(w.is_finite() && w > 0.0);
            assert_relative_eq!(w, erlang_c_wait(1.0, 0.9 * k as f64, k), max_relative = 1e-9);
        }
    }

    #[test]
    fn no_congestion_limit_is_flight_time() {
        let (inst, design) = single(2780.0, 1e-12, 1.0, 1.0, 1);
        let m = average_response(&inst, &service_moments(&inst), &design).unwrap();
        assert_relative_eq!(m.avg_resp, 100.0, max_relative = 1e-9);
    }

    #[test]
    fn symmetric_pair_shares_delay() {
        let inst = Instance::build(
            vec![
                DemandPoint::new("w", GeoPoint::on_equator(-500.0), 1e-4, 1200.0),
                DemandPoint::new("e", GeoPoint::on_equator(500.0), 1e-4, 1200.0),
            ],
            vec![CandidateBase::new("b", GeoPoint::on_equator(0.0))],
            NetworkParams {
                radius: 600.0,
                fleet_size: 1,
                max_open: 1,
                max_per_base: 1,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let design = Design::from_counts(vec![1], vec![0, 0], 1);
        let m = average_response(&inst, &service_moments(&inst), &design).unwrap();
        let d = inst.flight_time(0, 0);
        assert_relative_eq!(m.avg_resp, m.wq[0] + d, max_relative = 1e-9);
        assert_relative_eq!(inst.flight_time(1, 0), d, max_relative = 1e-9);
    }

    #[test]
    fn colocated_mm2_response() {
        // λ = 1/s, E[ξ] = 1 s, E[ξ²] = 2 s² (exponential), two drones.
        let (inst, design) = single(0.0, 1.0, 1.0, 2.0, 2);
        let m = average_response(&inst, &service_moments(&inst), &design).unwrap();
        assert_relative_eq!(m.avg_resp, 1.0 / 3.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn reduces_to_pollaczek_khinchine(rho in 0.0f64..0.999, s in 0.1f64..1e4, scv in 0.0f64..5.0) {
            let eta = rho / s;
            let s2 = s * s * (1.0 + scv);
            let pk = eta * s2 / (2.0 * (1.0 - rho));
            let w = mgk_delay(eta, s, s2, 1).unwrap();
            prop_assert!((w - pk).abs() <= 1e-12 * pk.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn more_servers_never_wait_longer(rho in 0.01f64..5.9, s in 0.1f64..100.0, scv in 0.0f64..3.0, k in 1usize..6) {
            let eta = rho / s;
            let s2 = s * s * (1.0 + scv);
            if rho < k as f64 {
                let a = mgk_delay(eta, s, s2, k).unwrap();
                let b = mgk_delay(eta, s, s2, k + 1).unwrap();
                prop_assert!(b <= a * (1.0 + 1e-12));
            }
        }

        #[test]
        fn scaling_time_scales_delay(rho in 0.01f64..1.9, s in 0.1f64..100.0, c in 0.01f64..100.0) {
            let eta = rho / s;
            let a = mgk_delay(eta, s, 2.0 * s * s, 2).unwrap();
            let b = mgk_delay(eta / c, s * c, 2.0 * s * s * c * c, 2).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-9 * (c * a));
        }
    }

    #[test]
    fn erlang_c_grid() {
        for k in 1..=6usize {
            for step in 1..=50 {
                let rho = k as f64 * step as f64 / 51.0;
                let s = 1.7;
                let eta = rho / s;
                let w = mgk_delay(eta, s, 2.0 * s * s, k).unwrap();
                assert_relative_eq!(w, erlang_c_wait(eta, s, k), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn delay_blows_up_near_capacity() {
        let mut prev = 0.0;
        for gap in [0.5, 0.1, 1e-2, 1e-4, 1e-8] {
            let w = mgk_delay(1.0, 2.0 - gap, 2.0 * (2.0 - gap).powi(2), 2).unwrap();
            assert!(w > prev);
            prev = w;
        }
        assert!(prev > 1e6);
    }
}

//! Discrete-event simulation of the dispatch system for a fixed design.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{check_feasible, Design};
use crate::geo::GeoPoint;
use crate::instance::{DemandPoint, Instance};
use crate::queueing::{average_response, service_moments, QueueError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    /// Nearest available in-range drone anywhere in the network.
    Nearest,
    /// Only drones of the base the design assigns the request to.
    StaticAssignment,
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NEAREST" => Ok(Policy::Nearest),
            "STATIC_ASSIGNMENT" | "STATIC" => Ok(Policy::StaticAssignment),
            _ => Err(format!("unknown policy {s:?}")),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Nearest => "NEAREST",
            Policy::StaticAssignment => "STATIC_ASSIGNMENT",
        })
    }
}

/// How the non-travel service time ξ of each request is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum XiDraw {
    /// Always E[ξ] of the serving demand point.
    Deterministic,
    /// Exponential with mean E[ξ].
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub policy: Policy,
    pub xi: XiDraw,
    /// Seconds.
    pub takeoff: f64,
    /// Seconds.
    pub landing: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Nearest,
            xi: XiDraw::Deterministic,
            takeoff: 10.0,
            landing: 10.0,
        }
    }
}

/// One overdose-triggered request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    /// Seconds from the start of the run.
    pub time: f64,
    pub location: GeoPoint,
    /// Demand point the request belongs to, when known. Supplies E[ξ] and
    /// the static assignment.
    pub demand: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub arrival: f64,
    pub base: Option<usize>,
    pub drone: Option<usize>,
    pub wait: f64,
    /// One-way flight time to the scene.
    pub flight: f64,
    pub response: f64,
    /// Time the drone is back at its base.
    pub busy_until: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub requests: Vec<RequestOutcome>,
    pub served: usize,
    pub unservable: usize,
    pub queued_at_end: usize,
    pub mean_response: f64,
    pub median_response: f64,
    pub max_response: f64,
    pub mean_wait: f64,
    pub max_queue: usize,
    /// Time-average number of waiting requests.
    pub mean_queue: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("design is infeasible for this instance: {0}")]
    InfeasibleDesign(String),
    #[error("request {0} is outside every open base's radius")]
    UnservableRequest(usize),
    #[error("request {0} refers to unknown demand point")]
    UnknownDemand(usize),
    #[error("request times must be finite and nondecreasing (request {0})")]
    BadTimestamps(usize),
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    // availability sorts first at equal times
    Available(usize),
    Arrival(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: Kind,
    seq: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let rank = |k: Kind| match k {
            Kind::Available(_) => 0,
            Kind::Arrival(_) => 1,
        };
        other
            .time
            .total_cmp(&self.time)
            .then(rank(other.kind).cmp(&rank(self.kind)))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Poisson arrivals for every demand point over `[0, horizon)`, merged in
/// time order.
pub fn poisson_arrivals(instance: &Instance, horizon: f64, rng: &mut impl Rng) -> Vec<Request> {
    let mut out = Vec::new();
    for (i, d) in instance.demands.iter().enumerate() {
        let exp = Exp::new(d.lambda).expect("positive rate");
        let mut t = exp.sample(rng);
        while t < horizon {
            out.push(Request {
                time: t,
                location: d.location,
                demand: Some(i),
            });
            t += exp.sample(rng);
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.demand.cmp(&b.demand)));
    out
}

struct Fleet {
    base_of: Vec<usize>,
    free: Vec<bool>,
}

/// Replays `arrivals` against the design. `seed` drives the ξ draws.
pub fn simulate(
    instance: &Instance,
    design: &Design,
    arrivals: &[Request],
    config: &SimConfig,
    seed: u64,
) -> Result<SimOutcome, SimError> {
    let violations = check_feasible(instance, design);
    if let Some(v) = violations.first() {
        return Err(SimError::InfeasibleDesign(format!("{v:?}")));
    }
    let mut last = 0.0;
    for (k, r) in arrivals.iter().enumerate() {
        if !r.time.is_finite() || r.time < last {
            return Err(SimError::BadTimestamps(k));
        }
        last = r.time;
        if r.demand.is_some_and(|i| i >= instance.n_demands()) {
            return Err(SimError::UnknownDemand(k));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = &instance.params;
    let mut fleet = Fleet {
        base_of: Vec::new(),
        free: Vec::new(),
    };
    for (j, &k) in design.drones.iter().enumerate() {
        for _ in 0..k {
            fleet.base_of.push(j);
            fleet.free.push(true);
        }
    }
    let open: Vec<usize> = (0..instance.n_bases()).filter(|&j| design.open[j]).collect();
    let dist: Vec<Vec<f64>> = arrivals
        .iter()
        .map(|r| {
            instance
                .bases
                .iter()
                .map(|b| b.location.distance(&r.location))
                .collect()
        })
        .collect();
    // bases allowed to serve each request
    let allowed: Vec<Vec<usize>> = arrivals
        .iter()
        .enumerate()
        .map(|(k, r)| match (config.policy, r.demand) {
            (Policy::StaticAssignment, Some(i)) => vec![design.assignment[i]],
            (Policy::StaticAssignment, None) => open
                .iter()
                .copied()
                .filter(|&j| dist[k][j] <= params.radius)
                .min_by(|&a, &b| dist[k][a].total_cmp(&dist[k][b]).then(a.cmp(&b)))
                .into_iter()
                .collect(),
            (Policy::Nearest, _) => open
                .iter()
                .copied()
                .filter(|&j| dist[k][j] <= params.radius)
                .collect(),
        })
        .collect();
    let xi_mean = |k: usize| -> f64 {
        match arrivals[k].demand {
            Some(i) => instance.demands[i].xi_mean,
            None => {
                instance.demands.iter().map(|d| d.xi_mean).sum::<f64>()
                    / instance.n_demands() as f64
            }
        }
    };

    let mut events = BinaryHeap::new();
    let mut seq = 0u64;
    for (k, r) in arrivals.iter().enumerate() {
        seq += 1;
        events.push(Event {
            time: r.time,
            kind: Kind::Arrival(k),
            seq,
        });
    }
    let mut outcome: Vec<RequestOutcome> = arrivals
        .iter()
        .map(|r| RequestOutcome {
            arrival: r.time,
            base: None,
            drone: None,
            wait: 0.0,
            flight: 0.0,
            response: f64::NAN,
            busy_until: f64::NAN,
        })
        .collect();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut unservable = 0usize;
    let mut max_queue = 0usize;
    let mut queue_area = 0.0;
    let mut clock = arrivals.first().map_or(0.0, |r| r.time);
    let start = clock;

    // nearest free drone among allowed bases, ties to the lowest drone id
    let pick = |fleet: &Fleet, k: usize| -> Option<usize> {
        (0..fleet.free.len())
            .filter(|&d| fleet.free[d] && allowed[k].contains(&fleet.base_of[d]))
            .min_by(|&a, &b| {
                dist[k][fleet.base_of[a]]
                    .total_cmp(&dist[k][fleet.base_of[b]])
                    .then(a.cmp(&b))
            })
    };

    let mut dispatch = |fleet: &mut Fleet,
                        events: &mut BinaryHeap<Event>,
                        seq: &mut u64,
                        k: usize,
                        d: usize,
                        now: f64,
                        rng: &mut ChaCha8Rng| {
        let j = fleet.base_of[d];
        fleet.free[d] = false;
        let flight = dist[k][j] / params.speed;
        let xi = match config.xi {
            XiDraw::Deterministic => xi_mean(k),
            XiDraw::Exponential => Exp::new(1.0 / xi_mean(k)).expect("positive mean").sample(rng),
        };
        let busy = config.takeoff + params.beta * flight + xi + config.landing;
        let o = &mut outcome[k];
        o.base = Some(j);
        o.drone = Some(d);
        o.wait = now - o.arrival;
        o.flight = flight;
        o.response = o.wait + config.takeoff + flight + config.landing;
        o.busy_until = now + busy;
        *seq += 1;
        events.push(Event {
            time: now + busy,
            kind: Kind::Available(d),
            seq: *seq,
        });
    };

    while let Some(ev) = events.pop() {
        queue_area += queue.len() as f64 * (ev.time - clock);
        clock = ev.time;
        match ev.kind {
            Kind::Arrival(k) => {
                if allowed[k].is_empty() {
                    unservable += 1;
                    continue;
                }
                match pick(&fleet, k) {
                    Some(d) => dispatch(&mut fleet, &mut events, &mut seq, k, d, clock, &mut rng),
                    None => {
                        queue.push_back(k);
                        max_queue = max_queue.max(queue.len());
                    }
                }
            }
            Kind::Available(d) => {
                fleet.free[d] = true;
                // oldest queued request some free drone can reach
                while let Some(pos) = queue.iter().position(|&k| pick(&fleet, k).is_some()) {
                    let k = queue.remove(pos).expect("position is valid");
                    let d = pick(&fleet, k).expect("checked above");
                    dispatch(&mut fleet, &mut events, &mut seq, k, d, clock, &mut rng);
                }
            }
        }
    }

    let served: Vec<f64> = outcome
        .iter()
        .filter(|o| o.drone.is_some())
        .map(|o| o.response)
        .collect();
    let n = served.len();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let mut sorted = served.clone();
    sorted.sort_by(f64::total_cmp);
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    let waits: Vec<f64> = outcome
        .iter()
        .filter(|o| o.drone.is_some())
        .map(|o| o.wait)
        .collect();
    let span = clock - start;
    Ok(SimOutcome {
        served: n,
        unservable,
        queued_at_end: queue.len(),
        mean_response: mean(&served),
        median_response: median,
        max_response: sorted.last().copied().unwrap_or(0.0),
        mean_wait: mean(&waits),
        max_queue,
        mean_queue: if span > 0.0 { queue_area / span } else { 0.0 },
        requests: outcome,
    })
}

/// Simulated value with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseComparison {
    pub base: usize,
    pub served: usize,
    pub simulated_wait: Estimate,
    pub analytic_wait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub bases: Vec<BaseComparison>,
    pub simulated_response: Estimate,
    pub analytic_response: f64,
    pub served: usize,
}

const BATCHES: usize = 20;

fn batch_means(values: &[f64]) -> Estimate {
    let n = values.len();
    if n < 2 * BATCHES {
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        return Estimate {
            mean,
            std_error: f64::INFINITY,
        };
    }
    let size = n / BATCHES;
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Estimate {
        mean: values[..BATCHES * size].iter().sum::<f64>() / (BATCHES * size) as f64,
        std_error: (var / BATCHES as f64).sqrt(),
    }
}

/// The instance as the simulator experiences it: takeoff and landing are
/// part of the non-travel time, and ξ has the second moment of `draw`.
pub fn simulated_service_instance(
    instance: &Instance,
    config: &SimConfig,
) -> Result<Instance, SimError> {
    let t = config.takeoff + config.landing;
    let demands: Vec<DemandPoint> = instance
        .demands
        .iter()
        .map(|d| {
            let second = match config.xi {
                XiDraw::Deterministic => d.xi_mean * d.xi_mean,
                XiDraw::Exponential => 2.0 * d.xi_mean * d.xi_mean,
            };
            DemandPoint::new(d.id.clone(), d.location, d.lambda, d.xi_mean + t)
                .with_xi_second_moment(second + 2.0 * t * d.xi_mean + t * t)
        })
        .collect();
    Instance::build(demands, instance.bases.clone(), instance.params.clone())
        .map_err(|e| SimError::InfeasibleDesign(e.to_string()))
}

/// Long synthetic run under the static assignment, compared against the
/// queueing formulas evaluated with the simulated service distribution.
/// The first tenth of the horizon is discarded as warm-up.
pub fn long_run_validate(
    instance: &Instance,
    design: &Design,
    horizon: f64,
    seed: u64,
    xi: XiDraw,
) -> Result<Validation, SimError> {
    let config = SimConfig {
        policy: Policy::StaticAssignment,
        xi,
        ..SimConfig::default()
    };
    long_run_validate_with(instance, design, horizon, seed, &config)
}

pub fn long_run_validate_with(
    instance: &Instance,
    design: &Design,
    horizon: f64,
    seed: u64,
    config: &SimConfig,
) -> Result<Validation, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arrivals = poisson_arrivals(instance, horizon, &mut rng);
    let out = simulate(instance, design, &arrivals, config, rng.gen())?;
    let warm = 0.1 * horizon;
    let kept: Vec<&RequestOutcome> = out
        .requests
        .iter()
        .filter(|o| o.arrival >= warm && o.drone.is_some())
        .collect();

    let shifted = simulated_service_instance(instance, config)?;
    let metrics = average_response(&shifted, &service_moments(&shifted), design)?;
    let bases = (0..instance.n_bases())
        .filter(|&j| design.open[j])
        .map(|j| {
            let w: Vec<f64> = kept
                .iter()
                .filter(|o| o.base == Some(j))
                .map(|o| o.wait)
                .collect();
            BaseComparison {
                base: j,
                served: w.len(),
                simulated_wait: batch_means(&w),
                analytic_wait: metrics.wq[j],
            }
        })
        .collect();
    let responses: Vec<f64> = kept.iter().map(|o| o.response).collect();
    Ok(Validation {
        bases,
        simulated_response: batch_means(&responses),
        analytic_response: metrics.avg_resp + config.takeoff + config.landing,
        served: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CandidateBase, NetworkParams};
    use crate::queueing::mgk_delay;

    fn one_base(demand_x: &[f64], lam: f64, xi: f64, k: usize) -> (Instance, Design) {
        let demands = demand_x
            .iter()
            .enumerate()
            .map(|(i, &x)| DemandPoint::new(format!("d{i}"), GeoPoint::on_equator(x), lam, xi))
            .collect();
        let inst = Instance::build(
            demands,
            vec![CandidateBase::new("b", GeoPoint::on_equator(0.0))],
            NetworkParams {
                radius: 5_000.0,
                fleet_size: k,
                max_open: 1,
                max_per_base: k.max(1),
                epsilon_ss: 1e-4,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let d = Design::from_counts(vec![k], vec![0; demand_x.len()], k.max(1));
        (inst, d)
    }

    fn at(inst: &Instance, t: f64, i: usize) -> Request {
        Request {
            time: t,
            location: inst.demands[i].location,
            demand: Some(i),
        }
    }

    #[test]
    fn single_request_hand_trace() {
        let (inst, d) = one_base(&[278.0], 1e-6, 600.0, 1);
        let flight = inst.distance(0, 0) / 27.8;
        let out = simulate(&inst, &d, &[at(&inst, 5.0, 0)], &SimConfig::default(), 0).unwrap();
        let r = &out.requests[0];
        assert!((r.response - (20.0 + flight)).abs() < 1e-12);
        assert!((flight - 10.0).abs() < 1e-3);
        assert!((out.mean_response - 30.0).abs() < 1e-2);
        assert_eq!(out.served, 1);
    }

    #[test]
    fn second_simultaneous_request_waits_a_busy_interval() {
        let (inst, d) = one_base(&[278.0], 1e-6, 600.0, 1);
        let reqs = [at(&inst, 0.0, 0), at(&inst, 0.0, 0)];
        let out = simulate(&inst, &d, &reqs, &SimConfig::default(), 0).unwrap();
        let busy = 20.0 + 2.0 * inst.distance(0, 0) / 27.8 + 600.0;
        assert_eq!(out.requests[0].wait, 0.0);
        assert!((out.requests[1].wait - busy).abs() < 1e-9);
        assert_eq!(out.max_queue, 1);
    }

    #[test]
    fn availability_precedes_arrival_at_equal_times() {
        let (inst, d) = one_base(&[0.0], 1e-6, 100.0, 1);
        let busy = 120.0;
        let reqs = [at(&inst, 0.0, 0), at(&inst, busy, 0)];
        let out = simulate(&inst, &d, &reqs, &SimConfig::default(), 0).unwrap();
        assert_eq!(out.requests[1].wait, 0.0);
        assert_eq!(out.max_queue, 0);
    }

    #[test]
    fn out_of_range_requests_are_counted() {
        let (inst, d) = one_base(&[100.0], 1e-6, 100.0, 1);
        let far = Request {
            time: 1.0,
            location: GeoPoint::on_equator(50_000.0),
            demand: None,
        };
        let out = simulate(&inst, &d, &[at(&inst, 0.0, 0), far], &SimConfig::default(), 0).unwrap();
        assert_eq!((out.served, out.unservable, out.queued_at_end), (1, 1, 0));
    }

    #[test]
    fn zero_congestion_limit() {
        let xs = [300.0, 900.0, 1_500.0];
        let (inst, d) = one_base(&xs, 1e-7, 300.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let arr = poisson_arrivals(&inst, 3.0e8, &mut rng);
        let out = simulate(&inst, &d, &arr, &SimConfig::default(), 1).unwrap();
        assert!(out.served > 50);
        assert!(out.mean_wait < 1e-3 * out.mean_response);
        let expect: f64 = out
            .requests
            .iter()
            .map(|o| o.flight + 20.0)
            .sum::<f64>()
            / out.served as f64;
        assert!((out.mean_response - expect).abs() < 1e-6);
    }

    #[test]
    fn nearest_drone_is_dispatched() {
        let inst = Instance::build(
            vec![DemandPoint::new("d", GeoPoint::on_equator(900.0), 1e-6, 60.0)],
            vec![
                CandidateBase::new("u", GeoPoint::on_equator(0.0)),
                CandidateBase::new("v", GeoPoint::on_equator(1_000.0)),
            ],
            NetworkParams {
                radius: 2_000.0,
                fleet_size: 2,
                max_open: 2,
                max_per_base: 1,
                ..NetworkParams::default()
            },
        )
        .unwrap();
        let d = Design::from_counts(vec![1, 1], vec![0], 1);
        let req = [at(&inst, 0.0, 0), at(&inst, 1.0, 0)];
        let out = simulate(&inst, &d, &req, &SimConfig::default(), 0).unwrap();
        assert_eq!(out.requests[0].base, Some(1));
        assert_eq!(out.requests[1].base, Some(0));
        let st = SimConfig {
            policy: Policy::StaticAssignment,
            ..SimConfig::default()
        };
        let out = simulate(&inst, &d, &req, &st, 0).unwrap();
        assert_eq!(out.requests[0].base, Some(0));
        assert!(out.requests[1].wait > 0.0);
    }

    #[test]
    fn mm1_matches_pollaczek_khinchine() {
        let mean = 100.0;
        let (inst, d) = one_base(&[0.0], 0.5 / mean, mean, 1);
        let cfg = SimConfig {
            policy: Policy::StaticAssignment,
            xi: XiDraw::Exponential,
            takeoff: 0.0,
            landing: 0.0,
        };
        let v = long_run_validate_with(&inst, &d, 4.0e6, 9, &cfg).unwrap();
        let pk = mgk_delay(0.5 / mean, mean, 2.0 * mean * mean, 1).unwrap();
        assert!((pk - mean).abs() < 1e-9);
        assert!((v.bases[0].analytic_wait - pk).abs() < 1e-9);
        assert!(v.served >= 10_000);
        assert!(v.bases[0].simulated_wait.covers(pk, 3.0), "{v:?}");
    }

    #[test]
    fn mm2_matches_erlang_c() {
        // offered load 1, per-drone utilization 0.5: P(wait) = 1/3, Wq = E[S]/3
        let mean = 100.0;
        let (inst, d) = one_base(&[0.0], 1.0 / mean, mean, 2);
        let cfg = SimConfig {
            policy: Policy::StaticAssignment,
            xi: XiDraw::Exponential,
            takeoff: 0.0,
            landing: 0.0,
        };
        let v = long_run_validate_with(&inst, &d, 2.0e6, 4, &cfg).unwrap();
        let want = mean / 3.0;
        assert!((v.bases[0].analytic_wait - want).abs() < 1e-9);
        assert!(v.served >= 10_000);
        assert!(v.bases[0].simulated_wait.covers(want, 3.0), "{v:?}");
    }

    #[test]
    fn runs_are_reproducible() {
        let (inst, d) = one_base(&[100.0, 700.0], 1e-3, 300.0, 2);
        let cfg = SimConfig {
            xi: XiDraw::Exponential,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arr = poisson_arrivals(&inst, 1e5, &mut rng);
        let a = simulate(&inst, &d, &arr, &cfg, 3).unwrap();
        let b = simulate(&inst, &d, &arr, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}

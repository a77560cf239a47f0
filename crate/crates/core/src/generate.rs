//! Seeded synthetic instances: tiny ones for exhaustive cross-checks and
//! larger clustered ones for scaling runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;
use crate::instance::{CandidateBase, DemandPoint, Instance, NetworkParams};

/// Meters per degree near the equator, used to lay out local coordinates.
const M_PER_DEG: f64 = 111_320.0;

/// Local planar offset (meters east, meters north) from (0°, 0°).
pub fn local_point(east: f64, north: f64) -> GeoPoint {
    GeoPoint::new(north / M_PER_DEG, east / M_PER_DEG).expect("local offsets stay in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinySpec {
    pub demands: (usize, usize),
    pub bases: (usize, usize),
    pub max_open: usize,
    pub fleet: usize,
    pub max_per_base: usize,
    /// Mean non-travel service time, seconds.
    pub xi_mean: f64,
    /// Target mean utilization of a deployed drone.
    pub utilization: f64,
}

impl Default for TinySpec {
    fn default() -> Self {
        Self {
            demands: (3, 8),
            bases: (2, 4),
            max_open: 3,
            fleet: 4,
            max_per_base: 2,
            xi_mean: 1500.0,
            utilization: 0.45,
        }
    }
}

/// Random instance with sizes drawn from `spec`: bases scattered over a
/// 6 km square, each demand dropped within the radius of some base so the
/// instance is always coverable. q and p are drawn with q ≤ p ≤ q·M.
pub fn random_tiny(seed: u64, spec: &TinySpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nj = rng.gen_range(spec.bases.0..=spec.bases.1);
    let ni = rng.gen_range(spec.demands.0..=spec.demands.1);
    let mm = spec.max_per_base;
    let q = rng.gen_range(1..=spec.max_open.min(nj));
    let p_hi = spec.fleet.min(q * mm).max(q);
    let p = rng.gen_range(q..=p_hi);
    let radius = 2_500.0;
    let bases: Vec<CandidateBase> = (0..nj)
        .map(|j| {
            CandidateBase::new(
                format!("b{j}"),
                local_point(rng.gen_range(0.0..6_000.0), rng.gen_range(0.0..6_000.0)),
            )
        })
        .collect();
    let speed = 27.8;
    let mean_service = spec.xi_mean + 2.0 * 1_200.0 / speed;
    let lam_mean = spec.utilization * p as f64 / (ni as f64 * mean_service);
    let demands: Vec<DemandPoint> = (0..ni)
        .map(|i| {
            let home = &bases[rng.gen_range(0..nj)].location;
            let r = radius * 0.95 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let east = home.longitude * M_PER_DEG + r * th.cos();
            let north = home.latitude * M_PER_DEG + r * th.sin();
            let xi = spec.xi_mean * rng.gen_range(0.6..1.4);
            DemandPoint::new(
                format!("d{i}"),
                local_point(east, north),
                lam_mean * rng.gen_range(0.3..1.7),
                xi,
            )
            .with_xi_second_moment(xi * xi * rng.gen_range(1.0..2.0))
        })
        .collect();
    let params = NetworkParams {
        speed,
        beta: 2.0,
        radius,
        fleet_size: p,
        max_open: q,
        max_per_base: mm,
        epsilon_ss: 0.05,
    };
    Instance::build(demands, bases, params).expect("generator keeps demands coverable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub demands: usize,
    /// Candidate bases; default |I|/10, at least 3.
    pub bases: Option<usize>,
    /// Open-base limit q; default |J| − 1.
    pub max_open: Option<usize>,
    /// Fleet p; default q + 1.
    pub fleet: Option<usize>,
    pub max_per_base: usize,
    /// Grid spacing between candidate bases, meters.
    pub spacing: f64,
    pub radius: f64,
    pub xi_mean: f64,
    pub utilization: f64,
}

impl ScalingSpec {
    pub fn new(demands: usize) -> Self {
        Self {
            demands,
            bases: None,
            max_open: None,
            fleet: None,
            max_per_base: 2,
            spacing: 3_000.0,
            radius: 3_500.0,
            xi_mean: 1500.0,
            utilization: 0.5,
        }
    }
}

/// Bases on a jittered grid with demands clustered around them. Draws are
/// repeated (from the same seeded stream) until the greedy design is
/// feasible, so every instance has at least one feasible design.
pub fn scaling_instance(seed: u64, spec: &ScalingSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let inst = draw_scaling(&mut rng, spec);
        if let Ok(d) = crate::heuristic::greedy_design(&inst) {
            if crate::design::check_feasible(&inst, &d).is_empty() {
                return inst;
            }
        }
    }
}

fn draw_scaling(rng: &mut ChaCha8Rng, spec: &ScalingSpec) -> Instance {
    let nj = spec.bases.unwrap_or((spec.demands / 10).max(3));
    let cols = (nj as f64).sqrt().ceil() as usize;
    let jitter = 0.1 * spec.spacing;
    let bases: Vec<CandidateBase> = (0..nj)
        .map(|j| {
            let (cx, cy) = ((j % cols) as f64, (j / cols) as f64);
            CandidateBase::new(
                format!("b{j}"),
                local_point(
                    cx * spec.spacing + rng.gen_range(-jitter..jitter),
                    cy * spec.spacing + rng.gen_range(-jitter..jitter),
                ),
            )
        })
        .collect();
    let q = spec.max_open.unwrap_or(nj.saturating_sub(1).max(1)).clamp(1, nj);
    let p = spec
        .fleet
        .unwrap_or(q + 1)
        .clamp(q, q * spec.max_per_base);
    let speed = 27.8;
    let mean_service = spec.xi_mean + spec.radius / speed;
    let lam_mean = spec.utilization * p as f64 / (spec.demands as f64 * mean_service);
    let demands = (0..spec.demands)
        .map(|i| {
            let home = &bases[rng.gen_range(0..nj)].location;
            let r = spec.radius * 0.9 * rng.gen::<f64>().sqrt();
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let xi = spec.xi_mean * rng.gen_range(0.8..1.2);
            DemandPoint::new(
                format!("d{i}"),
                local_point(
                    home.longitude * M_PER_DEG + r * th.cos(),
                    home.latitude * M_PER_DEG + r * th.sin(),
                ),
                lam_mean * rng.gen_range(0.3..1.7),
                xi,
            )
        })
        .collect();
    let params = NetworkParams {
        speed,
        beta: 2.0,
        radius: spec.radius,
        fleet_size: p,
        max_open: q,
        max_per_base: spec.max_per_base,
        epsilon_ss: 0.05,
    };
    Instance::build(demands, bases, params).expect("demands lie within a base radius")
}

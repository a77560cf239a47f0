//! Problem instance: demand points, candidate bases, fleet parameters and
//! the catchment structure derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{euclid, GeoPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("demand {0} has no candidate base within the catchment radius")]
    UncoverableDemand(usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// A location generating overdose-triggered requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPoint {
    pub id: String,
    pub location: GeoPoint,
    /// Arrival rate in requests per second.
    pub lambda: f64,
    /// Mean non-travel service time (on-scene plus reset), seconds.
    pub xi_mean: f64,
    /// Second moment of the non-travel service time, seconds².
    pub xi_second_moment: f64,
}

impl DemandPoint {
    /// Demand with deterministic non-travel time (E[ξ²] = E[ξ]²).
    pub fn new(id: impl Into<String>, location: GeoPoint, lambda: f64, xi_mean: f64) -> Self {
        Self {
            id: id.into(),
            location,
            lambda,
            xi_mean,
            xi_second_moment: xi_mean * xi_mean,
        }
    }

    pub fn with_xi_second_moment(mut self, second: f64) -> Self {
        self.xi_second_moment = second;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateBase {
    pub id: String,
    pub location: GeoPoint,
}

impl CandidateBase {
    pub fn new(id: impl Into<String>, location: GeoPoint) -> Self {
        Self {
            id: id.into(),
            location,
        }
    }
}

/// Fleet and physical parameters of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Drone speed v, m/s.
    pub speed: f64,
    /// Round-trip travel coefficient β.
    pub beta: f64,
    /// Catchment radius r, meters.
    pub radius: f64,
    /// Fleet size p.
    pub fleet_size: usize,
    /// Maximum number of open bases q.
    pub max_open: usize,
    /// Maximum drones per base M.
    pub max_per_base: usize,
    /// Steady-state slack ε in utilization units: load ≤ K − ε.
    pub epsilon_ss: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            speed: 27.8,
            beta: 2.0,
            radius: 10_000.0,
            fleet_size: 11,
            max_open: 10,
            max_per_base: 2,
            epsilon_ss: 0.05,
        }
    }
}

/// Immutable problem instance. Construct with [`Instance::build`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub demands: Vec<DemandPoint>,
    pub bases: Vec<CandidateBase>,
    pub params: NetworkParams,
    distances: Vec<Vec<f64>>,
    demand_catchment: Vec<Vec<usize>>,
    base_catchment: Vec<Vec<usize>>,
}

impl Instance {
    pub fn build(
        demands: Vec<DemandPoint>,
        bases: Vec<CandidateBase>,
        params: NetworkParams,
    ) -> Result<Self, InstanceError> {
        validate(&demands, &bases, &params)?;
        let distances: Vec<Vec<f64>> = demands
            .iter()
            .map(|d| {
                bases
                    .iter()
                    .map(|b| euclid(&d.location.ecef, &b.location.ecef))
                    .collect()
            })
            .collect();
        let demand_catchment: Vec<Vec<usize>> = distances
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &d)| d <= params.radius)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        if let Some(i) = demand_catchment.iter().position(|c| c.is_empty()) {
            return Err(InstanceError::UncoverableDemand(i));
        }
        let mut base_catchment = vec![Vec::new(); bases.len()];
        for (i, js) in demand_catchment.iter().enumerate() {
            for &j in js {
                base_catchment[j].push(i);
            }
        }
        Ok(Self {
            demands,
            bases,
            params,
            distances,
            demand_catchment,
            base_catchment,
        })
    }

    pub fn n_demands(&self) -> usize {
        self.demands.len()
    }

    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    /// d_ij in meters.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    /// J_i: bases within the radius of demand `i`, ascending.
    pub fn bases_covering(&self, i: usize) -> &[usize] {
        &self.demand_catchment[i]
    }

    /// I_j: demands within the radius of base `j`, ascending.
    pub fn demands_covered(&self, j: usize) -> &[usize] {
        &self.base_catchment[j]
    }

    pub fn covers(&self, i: usize, j: usize) -> bool {
        self.distances[i][j] <= self.params.radius
    }

    pub fn total_lambda(&self) -> f64 {
        self.demands.iter().map(|d| d.lambda).sum()
    }

    /// One-way flight time d_ij / v in seconds.
    pub fn flight_time(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j] / self.params.speed
    }

    /// Same instance with different fleet parameters (geometry unchanged
    /// except for the catchment, which depends on the radius).
    pub fn with_params(&self, params: NetworkParams) -> Result<Self, InstanceError> {
        Self::build(self.demands.clone(), self.bases.clone(), params)
    }
}

fn validate(
    demands: &[DemandPoint],
    bases: &[CandidateBase],
    p: &NetworkParams,
) -> Result<(), InstanceError> {
    let bad = |m: String| Err(InstanceError::InvalidParam(m));
    if demands.is_empty() {
        return bad("no demand points".into());
    }
    if bases.is_empty() {
        return bad("no candidate bases".into());
    }
    if !(p.speed > 0.0 && p.speed.is_finite()) {
        return bad(format!("speed must be positive, got {}", p.speed));
    }
    if !(p.radius > 0.0) {
        return bad(format!("radius must be positive, got {}", p.radius));
    }
    if !(p.beta >= 1.0 && p.beta.is_finite()) {
        return bad(format!("beta must be at least 1, got {}", p.beta));
    }
    if p.fleet_size == 0 || p.max_open == 0 || p.max_per_base == 0 {
        return bad("fleet size, max open bases and drones per base must be positive".into());
    }
    if p.max_open > bases.len() {
        return bad(format!(
            "max open bases {} exceeds candidate count {}",
            p.max_open,
            bases.len()
        ));
    }
    if p.fleet_size < p.max_open {
        return bad(format!(
            "fleet size {} smaller than max open bases {}",
            p.fleet_size, p.max_open
        ));
    }
    if !(p.epsilon_ss > 0.0 && p.epsilon_ss < 1.0) {
        return bad(format!("epsilon_ss must lie in (0, 1), got {}", p.epsilon_ss));
    }
    let mut ids: Vec<&str> = bases.iter().map(|b| b.id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return bad("duplicate base ids".into());
    }
    for (i, d) in demands.iter().enumerate() {
        if !(d.lambda > 0.0 && d.lambda.is_finite()) {
            return bad(format!("demand {i}: lambda must be positive"));
        }
        if !(d.xi_mean > 0.0) {
            return bad(format!("demand {i}: xi_mean must be positive"));
        }
        if d.xi_second_moment < d.xi_mean * d.xi_mean * (1.0 - 1e-12) {
            return bad(format!("demand {i}: xi second moment below mean squared"));
        }
    }
    Ok(())
}

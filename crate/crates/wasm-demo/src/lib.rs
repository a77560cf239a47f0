//! Browser bindings for the static demo page in `www/`.

use dronenet::analytics::{analyze, survival, AnalysisInput, CostParams, QalyParams, SurvivalKind};
use dronenet::generate::{scaling_instance, ScalingSpec};
use dronenet::heuristic::greedy_design;
use dronenet::milp::linearize_m2;
use dronenet::queueing::{average_response, mgk_delay, service_moments};
use dronenet::solver::{solve, Mode, SolveParams};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Mean queueing delay against per-drone utilization for an M/G/K base.
/// `scv` is the squared coefficient of variation of the service time.
#[wasm_bindgen]
pub fn delay_curve(servers: usize, mean_service: f64, scv: f64, points: usize) -> String {
    let k = servers.max(1);
    let second = (1.0 + scv.max(0.0)) * mean_service * mean_service;
    let n = points.clamp(2, 500);
    let curve: Vec<_> = (1..n)
        .map(|s| {
            let rho = 0.98 * s as f64 / n as f64;
            let eta = rho * k as f64 / mean_service;
            let wait = mgk_delay(eta, mean_service, second, k).unwrap_or(f64::NAN);
            json!({ "rho": rho, "wait": wait })
        })
        .collect();
    json!({ "servers": k, "curve": curve }).to_string()
}

/// Survival curves over 0..20 minutes plus the survivor, QALY and cost
/// table for one drone/ambulance comparison.
#[wasm_bindgen]
pub fn survival_report(drone_minutes: f64, ems_minutes: f64, overdoses: f64, drones: usize) -> String {
    let curves: Vec<_> = SurvivalKind::ALL
        .iter()
        .map(|&k| {
            let pts: Vec<[f64; 2]> = (0..=80)
                .map(|s| {
                    let m = s as f64 * 0.25;
                    [m, survival(k, m)]
                })
                .collect();
            json!({ "kind": k, "points": pts })
        })
        .collect();
    let report = analyze(&AnalysisInput {
        overdoses,
        ohca_rate: 0.15,
        drone_response_minutes: drone_minutes,
        ems_response_minutes: ems_minutes,
        drones,
        qaly: QalyParams::default(),
        cost: CostParams::default(),
        drone_responses: vec![],
        ems_responses: vec![],
    });
    json!({ "curves": curves, "report": report }).to_string()
}

/// Random network with `demands` request points and three candidate bases,
/// solved exactly and by the greedy rule.
#[wasm_bindgen]
pub fn random_network(seed: u32, demands: usize) -> String {
    let spec = ScalingSpec {
        bases: Some(3),
        radius: 2_200.0,
        utilization: 0.3,
        ..ScalingSpec::new(demands.clamp(6, 30))
    };
    let inst = scaling_instance(seed as u64, &spec);
    let mo = service_moments(&inst);
    let points: Vec<_> = inst
        .demands
        .iter()
        .map(|d| json!([d.location.latitude, d.location.longitude, d.lambda]))
        .collect();
    let bases: Vec<_> = inst
        .bases
        .iter()
        .map(|b| json!([b.location.latitude, b.location.longitude]))
        .collect();
    let greedy = greedy_design(&inst).ok().and_then(|d| {
        let m = average_response(&inst, &mo, &d).ok()?;
        Some(json!({ "design": d, "objective": m.avg_resp, "wait": m.wq }))
    });
    let optimal = linearize_m2(&inst, &mo).ok().and_then(|model| {
        let params = SolveParams {
            time_limit: Some(10.0),
            ..SolveParams::default()
        };
        let r = solve(&inst, &mo, &model, Mode::OaBc, &params).ok()?;
        let d = r.design?;
        let m = average_response(&inst, &mo, &d).ok()?;
        Some(json!({
            "design": d,
            "objective": m.avg_resp,
            "wait": m.wq,
            "status": r.status,
            "nodes": r.nodes,
        }))
    });
    json!({
        "radius": inst.params.radius,
        "fleet": inst.params.fleet_size,
        "max_open": inst.params.max_open,
        "points": points,
        "bases": bases,
        "greedy": greedy,
        "optimal": optimal,
    })
    .to_string()
}

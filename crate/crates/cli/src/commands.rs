//! Subcommand implementations. Each returns the JSON (or text) to emit and
//! an exit status.

use std::fmt::Write as _;
use std::path::Path;

use dronenet::analytics::{analyze, AnalysisInput};
use dronenet::design::{check_feasible, Design};
use dronenet::generate::{scaling_instance, ScalingSpec};
use dronenet::heuristic::greedy_design;
use dronenet::instance::Instance;
use dronenet::milp::{linearize_general_m, linearize_m2, LinearizedModel, MilpError};
use dronenet::oracle::{enumerate_optimum, EnumerationBudget, OracleError};
use dronenet::queueing::{average_response, evaluate_lenient, service_moments, ServiceMoments};
use dronenet::simulator::{poisson_arrivals, simulate, Request, SimError};
use dronenet::solver::{solve, Mode, SolveReport, SolveStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::data::{load_arrivals_csv, load_bases_csv, load_otr_csv, DataError, OtrData};
use crate::CliError;

const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;

/// Exit status of a command that produced output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Infeasible,
    LimitWithIncumbent,
    NoResult,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::NoResult => 1,
            Status::Infeasible => 4,
            Status::LimitWithIncumbent => 5,
        }
    }
}

pub struct Output {
    pub body: String,
    pub status: Status,
}

fn json_out(v: &impl Serialize, status: Status) -> Output {
    Output {
        body: serde_json::to_string_pretty(v).expect("outputs serialize") + "\n",
        status,
    }
}

pub struct Loaded {
    pub instance: Instance,
    pub moments: ServiceMoments,
    pub otr: OtrData,
}

pub fn load_instance(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let requests = cfg.data.requests.as_deref().ok_or(ConfigError::Invalid {
        field: "data.requests",
        msg: "no request file configured".into(),
    })?;
    let bases = cfg.data.bases.as_deref().ok_or(ConfigError::Invalid {
        field: "data.bases",
        msg: "no base file configured".into(),
    })?;
    let otr = load_otr_csv(
        requests,
        cfg.horizon_seconds,
        cfg.data.merge_duplicates,
        cfg.network.xi_mean,
        cfg.network.xi_second_moment,
    )?;
    let bases = load_bases_csv(bases)?;
    let instance = Instance::build(otr.demands.clone(), bases, cfg.network_params())
        .map_err(|e| DataError::Other(e.to_string()))?;
    let moments = service_moments(&instance);
    Ok(Loaded {
        instance,
        moments,
        otr,
    })
}

pub fn build_model(instance: &Instance, moments: &ServiceMoments) -> Result<LinearizedModel, CliError> {
    let model = if instance.params.max_per_base == 2 {
        linearize_m2(instance, moments)
    } else {
        linearize_general_m(instance, moments)
    };
    model.map_err(|e| match e {
        MilpError::ComplexityWarning { .. } | MilpError::DegenerateBound(_) => {
            CliError::Config(ConfigError::Invalid {
                field: "network",
                msg: e.to_string(),
            })
        }
        other => CliError::Failed(other.to_string()),
    })
}

fn solve_loaded(cfg: &RunConfig, l: &Loaded, mode: Mode) -> Result<SolveReport, CliError> {
    let model = build_model(&l.instance, &l.moments)?;
    let mut params = cfg.solve_params();
    if cfg.solver.warm_start {
        params.warm_start = greedy_design(&l.instance).ok();
    }
    solve(&l.instance, &l.moments, &model, mode, &params)
        .map_err(|e| CliError::Failed(e.to_string()))
}

fn report_status(r: &SolveReport) -> Status {
    match (r.status, &r.design) {
        (SolveStatus::Optimal, _) => Status::Success,
        (SolveStatus::Infeasible, _) => Status::Infeasible,
        (_, Some(_)) => Status::LimitWithIncumbent,
        (_, None) => Status::NoResult,
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let l = load_instance(cfg)?;
    let r = solve_loaded(cfg, &l, cfg.mode()?)?;
    let status = report_status(&r);
    Ok(json_out(&r, status))
}

pub fn cmd_oracle(cfg: &RunConfig, budget: u64) -> Result<Output, CliError> {
    let l = load_instance(cfg)?;
    match enumerate_optimum(&l.instance, &l.moments, EnumerationBudget { max_designs: budget }) {
        Ok(r) => Ok(json_out(&r, Status::Success)),
        Err(OracleError::NoFeasibleDesign) => Ok(json_out(
            &json!({ "error": "no feasible design" }),
            Status::Infeasible,
        )),
        Err(e) => Err(CliError::Failed(e.to_string())),
    }
}

pub fn cmd_heuristic(cfg: &RunConfig) -> Result<Output, CliError> {
    let l = load_instance(cfg)?;
    let design = match greedy_design(&l.instance) {
        Ok(d) => d,
        Err(e) => {
            return Ok(json_out(&json!({ "error": e.to_string() }), Status::Infeasible));
        }
    };
    let eval = evaluate_lenient(&l.instance, &l.moments, &design);
    let violations: Vec<String> = check_feasible(&l.instance, &design)
        .iter()
        .map(|v| format!("{v:?}"))
        .collect();
    let objective = eval.metrics.avg_resp;
    let status = if violations.is_empty() {
        Status::Success
    } else {
        Status::Infeasible
    };
    Ok(json_out(
        &json!({
            "design": design,
            "objective": objective.is_finite().then_some(objective),
            "unstable_bases": eval.unstable_bases,
            "violations": violations,
        }),
        status,
    ))
}

pub fn read_design(path: &Path) -> Result<Design, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    // either a bare design or any report carrying a "design" field
    let v: Value = serde_json::from_str(&text).map_err(|e| DataError::Other(format!("{}: {e}", path.display())))?;
    let v = match v.get("design") {
        Some(d) => d.clone(),
        None => v,
    };
    serde_json::from_value(v).map_err(|e| DataError::Other(format!("{}: {e}", path.display())).into())
}

/// The design to simulate or analyze: from a file, else solved.
fn obtain_design(cfg: &RunConfig, l: &Loaded, design: Option<&Path>) -> Result<Design, CliError> {
    if let Some(p) = design {
        let d = read_design(p)?;
        if d.assignment.len() != l.instance.n_demands() || d.drones.len() != l.instance.n_bases() {
            return Err(DataError::Other("design does not match the instance dimensions".into()).into());
        }
        return Ok(d);
    }
    let r = solve_loaded(cfg, l, cfg.mode()?)?;
    r.design.ok_or(CliError::NoDesign(r.status))
}

#[derive(Serialize)]
struct Replication {
    seed: u64,
    requests: usize,
    served: usize,
    unservable: usize,
    queued_at_end: usize,
    mean_response: f64,
    median_response: f64,
    max_response: f64,
    mean_wait: f64,
    max_queue: usize,
    mean_queue: f64,
}

pub fn cmd_simulate(cfg: &RunConfig, design: Option<&Path>, seed: u64) -> Result<Output, CliError> {
    let l = load_instance(cfg)?;
    let d = obtain_design(cfg, &l, design)?;
    let sim = cfg.sim_config();
    let fixed: Option<Vec<Request>> = match &cfg.data.arrivals {
        Some(p) => Some(load_arrivals_csv(p)?),
        None if cfg.simulator.replay => Some(l.otr.replay()),
        None => None,
    };
    let horizon = cfg.simulator.horizon.unwrap_or(cfg.horizon_seconds);
    let mut reps = Vec::new();
    for k in 0..cfg.simulator.replications as u64 {
        let s = seed.wrapping_add(k);
        let arrivals = match &fixed {
            Some(a) => a.clone(),
            None => poisson_arrivals(&l.instance, horizon, &mut ChaCha8Rng::seed_from_u64(s)),
        };
        let out = simulate(&l.instance, &d, &arrivals, &sim, s).map_err(|e| match e {
            SimError::InfeasibleDesign(_) | SimError::Queue(_) => CliError::Failed(e.to_string()),
            other => DataError::Other(other.to_string()).into(),
        })?;
        reps.push(Replication {
            seed: s,
            requests: out.requests.len(),
            served: out.served,
            unservable: out.unservable,
            queued_at_end: out.queued_at_end,
            mean_response: out.mean_response,
            median_response: out.median_response,
            max_response: out.max_response,
            mean_wait: out.mean_wait,
            max_queue: out.max_queue,
            mean_queue: out.mean_queue,
        });
    }
    let analytic = average_response(&l.instance, &l.moments, &d).ok().map(|m| m.avg_resp);
    let mean = reps.iter().map(|r| r.mean_response).sum::<f64>() / reps.len() as f64;
    Ok(json_out(
        &json!({
            "design": d,
            "policy": sim.policy,
            "replications": reps,
            "mean_response": mean,
            "analytic_response": analytic,
        }),
        Status::Success,
    ))
}

pub fn cmd_analyze(cfg: &RunConfig, design: Option<&Path>) -> Result<Output, CliError> {
    let a = &cfg.analytics;
    let have_data = cfg.data.requests.is_some() && cfg.data.bases.is_some();
    let loaded = if have_data { Some(load_instance(cfg)?) } else { None };
    let mut drones = cfg.network.fleet_size;
    let mut drone_responses = Vec::new();
    let drone_minutes = match (a.drone_response_minutes, &loaded) {
        (Some(m), _) => m,
        (None, Some(l)) => {
            let d = obtain_design(cfg, l, design)?;
            drones = d.fleet();
            let m = average_response(&l.instance, &l.moments, &d)
                .map_err(|e| CliError::Failed(e.to_string()))?;
            drone_responses = l.otr.demand_of_row.iter().map(|&i| m.resp[i] / 60.0).collect();
            m.avg_resp / 60.0
        }
        (None, None) => {
            return Err(ConfigError::Invalid {
                field: "analytics.drone_response_minutes",
                msg: "set it or configure request and base files".into(),
            }
            .into())
        }
    };
    let ems: Vec<f64> = loaded
        .as_ref()
        .map(|l| l.otr.ems_responses().iter().map(|s| s / 60.0).collect())
        .unwrap_or_default();
    let ems_minutes = match a.ems_response_minutes {
        Some(m) => m,
        None if !ems.is_empty() => ems.iter().sum::<f64>() / ems.len() as f64,
        None => {
            return Err(ConfigError::Invalid {
                field: "analytics.ems_response_minutes",
                msg: "set it or supply response_time_seconds in the request file".into(),
            }
            .into())
        }
    };
    let overdoses = match (a.overdoses_per_year, &loaded) {
        (Some(n), _) => n,
        (None, Some(l)) => l.otr.times.len() as f64 * SECONDS_PER_YEAR / cfg.horizon_seconds,
        (None, None) => {
            return Err(ConfigError::Invalid {
                field: "analytics.overdoses_per_year",
                msg: "set it or configure a request file".into(),
            }
            .into())
        }
    };
    let mut report = analyze(&AnalysisInput {
        overdoses,
        ohca_rate: a.ohca_rate,
        drone_response_minutes: drone_minutes,
        ems_response_minutes: ems_minutes,
        drones,
        qaly: a.qaly,
        cost: a.cost.clone(),
        drone_responses,
        ems_responses: ems,
    });
    report.rows.retain(|r| a.kinds.contains(&r.kind));
    Ok(json_out(
        &json!({
            "overdoses_per_year": overdoses,
            "drone_response_minutes": drone_minutes,
            "ems_response_minutes": ems_minutes,
            "drones": drones,
            "report": report,
        }),
        Status::Success,
    ))
}

/// One cell of the benchmark matrix.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub demands: usize,
    pub bases: usize,
    pub mode: Mode,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub lower_bound: f64,
    pub gap: f64,
    pub nodes: u64,
    pub seconds: f64,
}

pub struct BenchSpec {
    pub sizes: Vec<usize>,
    pub per_size: usize,
    pub seed: u64,
    pub time_limit: f64,
    pub modes: Vec<Mode>,
}

pub fn bench_instances(spec: &BenchSpec) -> Vec<(String, Instance)> {
    let mut out = Vec::new();
    let mut k = 0u64;
    for &n in &spec.sizes {
        for _ in 0..spec.per_size {
            let s = ScalingSpec {
                bases: Some(if n <= 20 { 3 } else { 4 }),
                radius: 2_200.0,
                utilization: 0.3,
                ..ScalingSpec::new(n)
            };
            let seed = spec.seed + k;
            out.push((format!("n{n}_s{seed}"), scaling_instance(seed, &s)));
            k += 1;
        }
    }
    out
}

pub fn run_bench(spec: &BenchSpec, instances: &[(String, Instance)]) -> Result<Vec<BenchRow>, CliError> {
    let mut rows = Vec::new();
    for (name, inst) in instances {
        let mo = service_moments(inst);
        let model = build_model(inst, &mo)?;
        for &mode in &spec.modes {
            let params = dronenet::solver::SolveParams {
                time_limit: Some(spec.time_limit),
                ..Default::default()
            };
            let r = solve(inst, &mo, &model, mode, &params).map_err(|e| CliError::Failed(e.to_string()))?;
            rows.push(BenchRow {
                instance: name.clone(),
                demands: inst.n_demands(),
                bases: inst.n_bases(),
                mode,
                status: r.status,
                objective: r.objective,
                lower_bound: r.lower_bound,
                gap: r.gap,
                nodes: r.nodes,
                seconds: r.wall_seconds,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

/// Cumulative instances solved against time, per mode: one CSV row per
/// solved instance in order of solve time.
pub fn profile_csv(rows: &[BenchRow], modes: &[Mode]) -> String {
    let mut out = String::from("mode,seconds,solved\n");
    for &m in modes {
        let mut times: Vec<f64> = rows
            .iter()
            .filter(|r| r.mode == m && r.status == SolveStatus::Optimal)
            .map(|r| r.seconds)
            .collect();
        times.sort_by(f64::total_cmp);
        for (k, t) in times.iter().enumerate() {
            let _ = writeln!(out, "{m},{t:.6},{}", k + 1);
        }
    }
    out
}

pub fn profile_summary(rows: &[BenchRow], modes: &[Mode], time_limit: f64) -> String {
    let n_inst = rows.iter().map(|r| &r.instance).collect::<std::collections::BTreeSet<_>>().len();
    let checkpoints = [0.1, 0.25, 0.5, 1.0].map(|f| f * time_limit);
    let mut s = format!("performance profile over {n_inst} instances, limit {time_limit}s\n");
    let _ = write!(s, "{:<6}", "mode");
    for c in checkpoints {
        let _ = write!(s, " {:>9}", format!("≤{c:.1}s"));
    }
    let _ = writeln!(s, " {:>10} {:>10}", "mean nodes", "mean secs");
    for &m in modes {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.mode == m).collect();
        let _ = write!(s, "{:<6}", m.to_string());
        for c in checkpoints {
            let solved = mine
                .iter()
                .filter(|r| r.status == SolveStatus::Optimal && r.seconds <= c)
                .count();
            let _ = write!(s, " {:>9}", format!("{solved}/{}", mine.len()));
        }
        let cnt = mine.len().max(1) as f64;
        let nodes = mine.iter().map(|r| r.nodes as f64).sum::<f64>() / cnt;
        let secs = mine.iter().map(|r| r.seconds).sum::<f64>() / cnt;
        let _ = writeln!(s, " {nodes:>10.1} {secs:>10.2}");
    }
    s
}

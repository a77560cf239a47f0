//! Survival, QALY and cost arithmetic for comparing response networks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SurvivalKind {
    /// max(0.594 − 0.055x, 0)
    Bandara,
    /// 1 / (1 + e^(0.679 + 0.262x))
    Demaio,
    /// 1 / (1 + e^(−0.015 + 0.245x))
    Chanta,
}

impl SurvivalKind {
    pub const ALL: [SurvivalKind; 3] = [
        SurvivalKind::Bandara,
        SurvivalKind::Demaio,
        SurvivalKind::Chanta,
    ];
}

impl fmt::Display for SurvivalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurvivalKind::Bandara => "BANDARA",
            SurvivalKind::Demaio => "DEMAIO",
            SurvivalKind::Chanta => "CHANTA",
        })
    }
}

impl FromStr for SurvivalKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace([' ', '_'], "").as_str() {
            "BANDARA" => Ok(SurvivalKind::Bandara),
            "DEMAIO" => Ok(SurvivalKind::Demaio),
            "CHANTA" => Ok(SurvivalKind::Chanta),
            _ => Err(format!("unknown survival function {s:?}")),
        }
    }
}

/// Probability of surviving an OHCA reached after `minutes`.
pub fn survival(kind: SurvivalKind, minutes: f64) -> f64 {
    match kind {
        SurvivalKind::Bandara => (0.594 - 0.055 * minutes).max(0.0),
        SurvivalKind::Demaio => 1.0 / (1.0 + (0.679 + 0.262 * minutes).exp()),
        SurvivalKind::Chanta => 1.0 / (1.0 + (-0.015 + 0.245 * minutes).exp()),
    }
}

/// Survival averaged over individual response times instead of evaluated
/// at their mean.
pub fn mean_survival(kind: SurvivalKind, minutes: &[f64]) -> f64 {
    if minutes.is_empty() {
        return 0.0;
    }
    minutes.iter().map(|&m| survival(kind, m)).sum::<f64>() / minutes.len() as f64
}

pub fn expected_survivors(overdoses: f64, ohca_rate: f64, kind: SurvivalKind, minutes: f64) -> f64 {
    overdoses * ohca_rate * survival(kind, minutes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QalyParams {
    /// Remaining life expectancy, years.
    pub years: f64,
    /// Quality weight of a surviving year, in [0, 1].
    pub quality: f64,
    /// Annual discount rate.
    pub discount: f64,
}

impl Default for QalyParams {
    fn default() -> Self {
        Self {
            years: 11.4,
            quality: 0.85,
            discount: 0.03,
        }
    }
}

/// T-QALY reported alongside the default parameters. The annuity below
/// gives about 8.10 for them.
pub const REPORTED_T_QALY: f64 = 8.47;

/// Σ_{t=1}^{n} (1+c)^(−t).
pub fn annuity_factor(years: u32, discount: f64) -> f64 {
    (1..=years).map(|t| (1.0 + discount).powi(-(t as i32))).sum()
}

/// Discounted quality-adjusted years: a full year of weight `quality` for
/// each whole year, plus the fractional remainder discounted one year later.
pub fn t_qaly(p: &QalyParams) -> f64 {
    let whole = p.years.floor();
    let frac = p.years - whole;
    let tail = frac * (1.0 + p.discount).powf(-(whole + 1.0));
    p.quality * (annuity_factor(whole as u32, p.discount) + tail)
}

/// Purchase price plus discounted maintenance over the lifespan.
pub fn network_cost(
    drones: usize,
    unit_price: f64,
    annual_maintenance: f64,
    lifespan_years: u32,
    discount: f64,
) -> f64 {
    let n = drones as f64;
    n * unit_price + n * annual_maintenance * annuity_factor(lifespan_years, discount)
}

/// Cost per incremental QALY; infinite when nothing is gained.
pub fn cost_per_qaly(
    network_cost: f64,
    additional_survivors_per_year: f64,
    t_qaly: f64,
    lifespan_years: f64,
) -> f64 {
    let gained = additional_survivors_per_year * lifespan_years * t_qaly;
    if gained > 0.0 {
        network_cost / gained
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub unit_price: f64,
    pub annual_maintenance: f64,
    pub lifespan_years: u32,
    pub discount: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            unit_price: 15_000.0,
            annual_maintenance: 3_000.0,
            lifespan_years: 4,
            discount: 0.03,
        }
    }
}

/// Inputs of a drone-versus-ambulance comparison over one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisInput {
    pub overdoses: f64,
    pub ohca_rate: f64,
    pub drone_response_minutes: f64,
    pub ems_response_minutes: f64,
    pub drones: usize,
    #[serde(default)]
    pub qaly: QalyParams,
    #[serde(default)]
    pub cost: CostParams,
    /// Individual drone response times for the per-incident mode.
    #[serde(default)]
    pub drone_responses: Vec<f64>,
    #[serde(default)]
    pub ems_responses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub kind: SurvivalKind,
    pub drone_probability: f64,
    pub ems_probability: f64,
    pub drone_survivors: f64,
    pub ems_survivors: f64,
    /// Whole survivors (floored), as tables usually print them.
    pub drone_survivors_whole: u64,
    pub ems_survivors_whole: u64,
    pub additional_survivors: f64,
    pub additional_qaly: f64,
    pub cost_per_qaly: f64,
    /// Survival averaged over individual responses, when supplied.
    pub drone_probability_per_incident: Option<f64>,
    pub ems_probability_per_incident: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub ohcas: f64,
    pub t_qaly: f64,
    pub reported_t_qaly: f64,
    pub network_cost: f64,
    pub rows: Vec<SurvivalRow>,
    pub notes: Vec<String>,
}

/// Survivors, QALY gained and cost effectiveness for every survival
/// function. Whole survivor counts drive the QALY and cost columns.
pub fn analyze(input: &AnalysisInput) -> AnalysisReport {
    let tq = t_qaly(&input.qaly);
    let c = &input.cost;
    let cost = network_cost(
        input.drones,
        c.unit_price,
        c.annual_maintenance,
        c.lifespan_years,
        c.discount,
    );
    let rows = SurvivalKind::ALL
        .into_iter()
        .map(|kind| {
            let dp = survival(kind, input.drone_response_minutes);
            let ep = survival(kind, input.ems_response_minutes);
            let ds = input.overdoses * input.ohca_rate * dp;
            let es = input.overdoses * input.ohca_rate * ep;
            let (dw, ew) = (ds.floor() as u64, es.floor() as u64);
            let extra = dw.saturating_sub(ew) as f64;
            let per = |v: &[f64]| (!v.is_empty()).then(|| mean_survival(kind, v));
            SurvivalRow {
                kind,
                drone_probability: dp,
                ems_probability: ep,
                drone_survivors: ds,
                ems_survivors: es,
                drone_survivors_whole: dw,
                ems_survivors_whole: ew,
                additional_survivors: extra,
                additional_qaly: extra * tq,
                cost_per_qaly: cost_per_qaly(cost, extra, tq, c.lifespan_years as f64),
                drone_probability_per_incident: per(&input.drone_responses),
                ems_probability_per_incident: per(&input.ems_responses),
            }
        })
        .collect();
    AnalysisReport {
        ohcas: input.overdoses * input.ohca_rate,
        t_qaly: tq,
        reported_t_qaly: REPORTED_T_QALY,
        network_cost: cost,
        rows,
        notes: vec![format!(
            "t_qaly uses a discounted annuity ({tq:.3}); the commonly reported value for \
             these parameters is {REPORTED_T_QALY}"
        )],
    }
}

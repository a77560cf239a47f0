//! CSV ingestion: historical requests, candidate bases and arrival streams.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use dronenet::geo::GeoPoint;
use dronenet::instance::{CandidateBase, DemandPoint};
use dronenet::simulator::Request;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path}:{line}: {msg}")]
    Row {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("{0}: no data rows")]
    Empty(PathBuf),
    #[error("{0}")]
    Other(String),
}

/// Demand points built from historical requests.
#[derive(Debug, Clone, PartialEq)]
pub struct OtrData {
    pub demands: Vec<DemandPoint>,
    /// Seconds since the earliest request, one per row, in file order.
    pub times: Vec<f64>,
    /// Demand point of each row.
    pub demand_of_row: Vec<usize>,
    /// Historical ambulance response of each row, when the column exists.
    pub response_seconds: Vec<Option<f64>>,
}

impl OtrData {
    /// Requests in time order for replay through the simulator.
    pub fn replay(&self) -> Vec<Request> {
        let mut out: Vec<Request> = self
            .times
            .iter()
            .zip(&self.demand_of_row)
            .map(|(&t, &i)| Request {
                time: t,
                location: self.demands[i].location,
                demand: Some(i),
            })
            .collect();
        out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.demand.cmp(&b.demand)));
        out
    }

    pub fn ems_responses(&self) -> Vec<f64> {
        self.response_seconds.iter().flatten().copied().collect()
    }
}

struct Table {
    path: PathBuf,
    reader: csv::Reader<std::fs::File>,
    columns: HashMap<String, usize>,
}

impl Table {
    fn open(path: &Path) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| DataError::Io {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?;
        let columns = reader
            .headers()
            .map_err(|e| DataError::Io {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })?
            .iter()
            .enumerate()
            .map(|(k, h)| (h.to_ascii_lowercase(), k))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            columns,
        })
    }

    fn column(&self, names: &[&'static str]) -> Result<usize, DataError> {
        names
            .iter()
            .find_map(|n| self.columns.get(*n).copied())
            .ok_or(DataError::MissingColumn {
                path: self.path.clone(),
                column: names[0],
            })
    }

    /// Visits each record with its 1-based line number.
    fn rows(
        &mut self,
        mut visit: impl FnMut(u64, &csv::StringRecord) -> Result<(), String>,
    ) -> Result<usize, DataError> {
        let mut n = 0;
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| DataError::Row {
                path: self.path.clone(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            visit(line, &rec).map_err(|msg| DataError::Row {
                path: self.path.clone(),
                line,
                msg,
            })?;
            n += 1;
        }
        if n == 0 {
            return Err(DataError::Empty(self.path.clone()));
        }
        Ok(n)
    }
}

fn field<'a>(rec: &'a csv::StringRecord, k: usize, name: &str) -> Result<&'a str, String> {
    rec.get(k)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| format!("empty {name}"))
}

fn number(rec: &csv::StringRecord, k: usize, name: &str) -> Result<f64, String> {
    let s = field(rec, k, name)?;
    let v: f64 = s.parse().map_err(|_| format!("{name} {s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} is not finite"))
    }
}

fn point(rec: &csv::StringRecord, lat: usize, lon: usize) -> Result<GeoPoint, String> {
    GeoPoint::new(number(rec, lat, "latitude")?, number(rec, lon, "longitude")?)
        .map_err(|e| e.to_string())
}

/// Seconds since the Unix epoch. Accepts plain seconds, RFC 3339 and
/// `YYYY-MM-DD HH:MM[:SS]` (read as UTC).
pub fn parse_timestamp(s: &str) -> Result<f64, String> {
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp() as f64 + t.timestamp_subsec_nanos() as f64 * 1e-9);
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%m/%d/%Y %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc().timestamp() as f64);
        }
    }
    Err(format!("unrecognized timestamp {s:?}"))
}

/// Loads historical requests. Each row becomes a demand point with rate
/// 1/horizon; with `merge`, rows at identical coordinates share one point
/// whose rate is the sum.
pub fn load_otr_csv(
    path: &Path,
    horizon: f64,
    merge: bool,
    xi_mean: f64,
    xi_second: Option<f64>,
) -> Result<OtrData, DataError> {
    if !(horizon > 0.0) {
        return Err(DataError::Other(format!("horizon must be positive, got {horizon}")));
    }
    let mut t = Table::open(path)?;
    let ts = t.column(&["timestamp", "time"])?;
    let lat = t.column(&["latitude", "lat"])?;
    let lon = t.column(&["longitude", "lon", "lng"])?;
    let resp = t.column(&["response_time_seconds"]).ok();
    let mut stamps = Vec::new();
    let mut demands: Vec<DemandPoint> = Vec::new();
    let mut demand_of_row = Vec::new();
    let mut response_seconds = Vec::new();
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    let rate = 1.0 / horizon;
    t.rows(|line, rec| {
        stamps.push(parse_timestamp(field(rec, ts, "timestamp")?)?);
        let p = point(rec, lat, lon)?;
        let r = match resp.and_then(|k| rec.get(k)).filter(|s| !s.is_empty()) {
            Some(s) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| format!("response_time_seconds {s:?} is not a number"))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err("response_time_seconds must be nonnegative".into());
                }
                Some(v)
            }
            None => None,
        };
        response_seconds.push(r);
        let key = (p.latitude.to_bits(), p.longitude.to_bits());
        let idx = match seen.get(&key) {
            Some(&i) if merge => {
                demands[i].lambda += rate;
                i
            }
            _ => {
                let mut d = DemandPoint::new(format!("r{line}"), p, rate, xi_mean);
                if let Some(s) = xi_second {
                    d = d.with_xi_second_moment(s);
                }
                demands.push(d);
                seen.insert(key, demands.len() - 1);
                demands.len() - 1
            }
        };
        demand_of_row.push(idx);
        Ok(())
    })?;
    let t0 = stamps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OtrData {
        demands,
        times: stamps.iter().map(|s| s - t0).collect(),
        demand_of_row,
        response_seconds,
    })
}

pub fn load_bases_csv(path: &Path) -> Result<Vec<CandidateBase>, DataError> {
    let mut t = Table::open(path)?;
    let id = t.column(&["id", "name"])?;
    let lat = t.column(&["latitude", "lat"])?;
    let lon = t.column(&["longitude", "lon", "lng"])?;
    let mut out = Vec::new();
    t.rows(|_, rec| {
        out.push(CandidateBase::new(field(rec, id, "id")?, point(rec, lat, lon)?));
        Ok(())
    })?;
    Ok(out)
}

/// Arrival stream for the simulator, sorted by time.
pub fn load_arrivals_csv(path: &Path) -> Result<Vec<Request>, DataError> {
    let mut t = Table::open(path)?;
    let time = t.column(&["time_seconds", "time"])?;
    let lat = t.column(&["latitude", "lat"])?;
    let lon = t.column(&["longitude", "lon", "lng"])?;
    let mut out = Vec::new();
    t.rows(|_, rec| {
        let s = number(rec, time, "time_seconds")?;
        if s < 0.0 {
            return Err("time_seconds must be nonnegative".into());
        }
        out.push(Request {
            time: s,
            location: point(rec, lat, lon)?,
            demand: None,
        });
        Ok(())
    })?;
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

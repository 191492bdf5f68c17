//! Long-format results, aggregation and persistence.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Averaging, ExperimentConfig};
use crate::linalg::{from_db, to_db};
use crate::maxsnr::AoTrace;
use crate::minsnr::CcpTrace;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One iteration of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep: Option<f64>,
    pub realization: usize,
    pub iteration: usize,
    pub rho_db: Option<f64>,
    /// One entry per UE, empty when unknown.
    pub sinr: Vec<f64>,
    pub feasible: Option<bool>,
    pub slack_xi: Option<f64>,
    pub slack_v: Option<f64>,
    pub rank_ratio: Option<f64>,
    pub time_ms: Option<f64>,
}

/// Per-realization provenance and traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationInfo {
    pub sweep: Option<f64>,
    pub realization: usize,
    pub seed: u64,
    /// Failure that excluded the realization.
    pub error: Option<String>,
    pub note: Option<String>,
    /// Algorithm 1 value (deployed phases).
    pub pre_attack_rho_db: Option<f64>,
    /// Value at the phases returned by Algorithm 2 (deployed).
    pub post_attack_rho_db: Option<f64>,
    pub ao: Option<AoTrace>,
    pub ccp: Option<CcpTrace>,
}

impl RealizationInfo {
    /// Zeroes the wall-clock fields of the traces.
    pub fn clear_timing(&mut self) {
        if let Some(ao) = &mut self.ao {
            ao.records.iter_mut().for_each(|r| r.wall_ms = 0.0);
        }
        if let Some(ccp) = &mut self.ccp {
            ccp.records.iter_mut().for_each(|r| r.wall_ms = 0.0);
        }
    }
}

/// Mean over realizations of one curve at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub experiment: String,
    pub sweep: Option<f64>,
    pub iteration: usize,
    pub mean_rho_db: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub averaging: Averaging,
    pub points: Vec<AggregatePoint>,
    /// Realizations left out because they failed.
    pub excluded: usize,
}

impl Aggregates {
    /// Last point of every curve, in curve order.
    pub fn finals(&self) -> Vec<&AggregatePoint> {
        let mut out: Vec<&AggregatePoint> = Vec::new();
        for p in &self.points {
            match out.last_mut() {
                Some(last) if last.experiment == p.experiment && last.sweep == p.sweep => *last = p,
                _ => out.push(p),
            }
        }
        out
    }

    pub fn curve(&self, experiment: &str, sweep: Option<f64>) -> Vec<&AggregatePoint> {
        self.points.iter().filter(|p| p.experiment == experiment && p.sweep == sweep).collect()
    }

    pub fn value(&self, experiment: &str, sweep: Option<f64>, iteration: usize) -> Option<f64> {
        self.curve(experiment, sweep).into_iter().find(|p| p.iteration == iteration).map(|p| p.mean_rho_db)
    }

    pub fn final_value(&self, experiment: &str, sweep: Option<f64>) -> Option<f64> {
        self.curve(experiment, sweep).last().map(|p| p.mean_rho_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub ues: usize,
    pub rows: Vec<ResultRow>,
    pub realizations: Vec<RealizationInfo>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    schema_version: u32,
    config: &'a ExperimentConfig,
    averaging: Averaging,
    aggregates: Aggregates,
    rows: &'a [ResultRow],
    realizations: &'a [RealizationInfo],
}

#[derive(Deserialize)]
struct JsonDocumentOwned {
    schema_version: u32,
    config: ExperimentConfig,
    rows: Vec<ResultRow>,
    realizations: Vec<RealizationInfo>,
}

fn key(sweep: Option<f64>) -> u64 {
    sweep.map_or(u64::MAX, f64::to_bits)
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn parse_opt<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("line {line}: bad {name} `{field}`")))
}

impl ResultsTable {
    pub fn new(ues: usize) -> Self {
        Self {
            ues,
            rows: Vec::new(),
            realizations: Vec::new(),
        }
    }

    pub fn header(ues: usize) -> Vec<String> {
        let mut h: Vec<String> = ["experiment", "sweep", "realization", "iteration", "rho_db"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend((1..=ues).map(|k| format!("sinr_{k}")));
        h.extend(["feasible", "slack_xi", "slack_v", "rank_ratio", "time_ms"].iter().map(|s| s.to_string()));
        h
    }

    /// Mean `rho` per iteration for every `(experiment, sweep)` curve.
    /// Realizations with a row lacking `rho_db` are excluded; shorter
    /// traces contribute their last value to later iterations.
    pub fn aggregate(&self, averaging: Averaging) -> Aggregates {
        // curve -> realization -> iteration -> rho_db
        type Series = BTreeMap<usize, Option<f64>>;
        let mut order: Vec<(String, Option<f64>)> = Vec::new();
        let mut curves: BTreeMap<(String, u64), BTreeMap<usize, Series>> = BTreeMap::new();
        for r in &self.rows {
            let k = (r.experiment.clone(), key(r.sweep));
            if !curves.contains_key(&k) {
                order.push((r.experiment.clone(), r.sweep));
            }
            curves.entry(k).or_default().entry(r.realization).or_default().insert(r.iteration, r.rho_db);
        }
        let mut excluded = std::collections::BTreeSet::new();
        let mut points = Vec::new();
        for (exp, sweep) in order {
            let reals = &curves[&(exp.clone(), key(sweep))];
            let mut series: Vec<Vec<(usize, f64)>> = Vec::new();
            for (&i, s) in reals {
                if s.values().any(Option::is_none) {
                    excluded.insert((key(sweep), i));
                    continue;
                }
                series.push(s.iter().map(|(&t, v)| (t, v.expect("checked"))).collect());
            }
            let iters: std::collections::BTreeSet<usize> = series.iter().flatten().map(|(t, _)| *t).collect();
            for t in iters {
                let vals: Vec<f64> = series
                    .iter()
                    .filter_map(|s| s.iter().take_while(|(it, _)| *it <= t).last().map(|(_, v)| *v))
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let n = vals.len() as f64;
                let mean = match averaging {
                    Averaging::Db => vals.iter().sum::<f64>() / n,
                    Averaging::Linear => to_db(vals.iter().map(|v| from_db(*v)).sum::<f64>() / n),
                };
                points.push(AggregatePoint {
                    experiment: exp.clone(),
                    sweep,
                    iteration: t,
                    mean_rho_db: mean,
                    count: vals.len(),
                });
            }
        }
        Aggregates {
            averaging,
            points,
            excluded: excluded.len(),
        }
    }

    /// A copy without wall times.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for r in &mut t.rows {
            r.time_ms = None;
        }
        t.realizations.iter_mut().for_each(RealizationInfo::clear_timing);
        t
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(Self::header(self.ues)).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.experiment.clone(),
                opt(&r.sweep),
                r.realization.to_string(),
                r.iteration.to_string(),
                opt(&r.rho_db),
            ];
            for k in 0..self.ues {
                rec.push(r.sinr.get(k).map(ToString::to_string).unwrap_or_default());
            }
            rec.extend([opt(&r.feasible), opt(&r.slack_xi), opt(&r.slack_v), opt(&r.rank_ratio), opt(&r.time_ms)]);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses rows written by [`ResultsTable::write_csv`]; realization
    /// provenance is not part of the CSV.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header: Vec<String> = rd
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let ues = header.iter().filter(|h| h.starts_with("sinr_")).count();
        if header != Self::header(ues) {
            return Err(Error::Parse(format!("unexpected header `{}`", header.join(","))));
        }
        let mut table = Self::new(ues);
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let f = |j: usize| rec.get(j).unwrap_or("");
            let req = |j: usize, name: &str| -> Result<usize> {
                f(j).parse().map_err(|_| Error::Parse(format!("line {line}: bad {name} `{}`", f(j))))
            };
            let mut sinr = Vec::new();
            for k in 0..ues {
                if let Some(v) = parse_opt::<f64>(f(5 + k), "sinr", line)? {
                    sinr.push(v);
                }
            }
            let b = 5 + ues;
            table.rows.push(ResultRow {
                experiment: f(0).to_string(),
                sweep: parse_opt(f(1), "sweep", line)?,
                realization: req(2, "realization")?,
                iteration: req(3, "iteration")?,
                rho_db: parse_opt(f(4), "rho_db", line)?,
                sinr,
                feasible: parse_opt(f(b), "feasible", line)?,
                slack_xi: parse_opt(f(b + 1), "slack_xi", line)?,
                slack_v: parse_opt(f(b + 2), "slack_v", line)?,
                rank_ratio: parse_opt(f(b + 3), "rank_ratio", line)?,
                time_ms: parse_opt(f(b + 4), "time_ms", line)?,
            });
        }
        Ok(table)
    }

    pub fn to_json(&self, config: &ExperimentConfig) -> Result<String> {
        let doc = JsonDocument {
            schema_version: SCHEMA_VERSION,
            config,
            averaging: config.averaging,
            aggregates: self.aggregate(config.averaging),
            rows: &self.rows,
            realizations: &self.realizations,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<(Self, ExperimentConfig)> {
        let doc: JsonDocumentOwned = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema version {}", doc.schema_version)));
        }
        let table = Self {
            ues: doc.config.system.K,
            rows: doc.rows,
            realizations: doc.realizations,
        };
        Ok((table, doc.config))
    }

    /// Writes CSV or JSON to `path`.
    pub fn export(&self, config: &ExperimentConfig, path: &Path, format: Format) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        match format {
            Format::Csv => self.write_csv(&mut w).map_err(|e| match e {
                Error::Parse(m) => Error::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::other(m),
                },
                other => other,
            })?,
            Format::Json => {
                use std::io::Write;
                w.write_all(self.to_json(config)?.as_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
        use std::io::Write;
        w.flush().map_err(|e| io_err(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(exp: &str, sweep: Option<f64>, i: usize, t: usize, rho: Option<f64>) -> ResultRow {
        ResultRow {
            experiment: exp.into(),
            sweep,
            realization: i,
            iteration: t,
            rho_db: rho,
            sinr: vec![2.5, 3.0],
            feasible: Some(true),
            slack_xi: None,
            slack_v: None,
            rank_ratio: Some(1e-9),
            time_ms: Some(0.1),
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        ResultsTable::new(2).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,sweep,realization,iteration,rho_db,sinr_1,sinr_2,feasible,slack_xi,slack_v,rank_ratio,time_ms\n"
        );
    }

    #[test]
    fn shorter_traces_carry_forward() {
        let mut t = ResultsTable::new(2);
        t.rows = vec![
            row("a", None, 0, 1, Some(10.0)),
            row("a", None, 0, 2, Some(12.0)),
            row("a", None, 1, 1, Some(20.0)),
        ];
        let agg = t.aggregate(Averaging::Db);
        assert_eq!(agg.value("a", None, 1), Some(15.0));
        assert_eq!(agg.value("a", None, 2), Some(16.0));
        let lin = t.aggregate(Averaging::Linear);
        assert!((lin.value("a", None, 1).unwrap() - to_db((10.0 + 100.0) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn failed_realizations_are_excluded() {
        let mut t = ResultsTable::new(2);
        t.rows = vec![row("a", Some(1.0), 0, 1, Some(10.0)), row("a", Some(1.0), 1, 0, None)];
        let agg = t.aggregate(Averaging::Db);
        assert_eq!(agg.excluded, 1);
        assert_eq!(agg.points.len(), 1);
        assert_eq!(agg.points[0].count, 1);
    }

    #[test]
    fn csv_round_trip_preserves_aggregates() {
        let mut t = ResultsTable::new(2);
        for i in 0..3 {
            for it in 1..4 {
                t.rows.push(row("b", Some(0.1 * i as f64 + 0.3), i, it, Some(1.0 / 3.0 + i as f64 * 0.7 + it as f64)));
            }
        }
        t.rows[4].sinr.clear();
        t.rows[4].feasible = None;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ResultsTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, t.rows);
        let (a, b) = (t.aggregate(Averaging::Db), back.aggregate(Averaging::Db));
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.mean_rho_db - q.mean_rho_db).abs() <= 1e-12);
        }
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(ResultsTable::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}

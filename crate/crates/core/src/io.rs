//! CSV artifacts: trajectories, filter diagnostics, BO histories, model sets
//! and benchmark tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back yields bit-identical values. Multi-dimensional parameters are
//! joined with `;` inside one field.

use std::fs;
use std::path::Path;

use crate::bench::{CellSummary, Method, RunRecord};
use crate::bmapf::BmapfRun;
use crate::bo::BoResult;
use crate::bomsd::ModelSet;
use crate::error::{Error, Result};
use crate::models::Trajectory;

fn fmt_theta(theta: &[f64]) -> String {
    theta.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// A parsed table with its header and 1-based file line numbers per row.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data.as_slice());
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: match e.position() {
            Some(p) => format!("line {}: {e}", p.line()),
            None => e.to_string(),
        },
    };
    let header = r.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { header, rows })
}

impl Table {
    fn column(&self, path: &Path, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line 1: missing column `{name}`"),
        })
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn field<'a>(path: &Path, line: u64, rec: &'a csv::StringRecord, col: usize) -> Result<&'a str> {
    rec.get(col).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: missing field {}", col + 1),
    })
}

fn parse<T: std::str::FromStr>(path: &Path, line: u64, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: cannot parse `{s}`"),
    })
}

fn parse_theta(path: &Path, line: u64, s: &str) -> Result<Vec<f64>> {
    s.split(';').map(|p| parse(path, line, p.trim())).collect()
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = traj
        .times()
        .zip(traj.states.iter().zip(&traj.observations))
        .map(|(t, (x, y))| vec![t.to_string(), x.to_string(), y.to_string()]);
    write_table(path, &header(&["t", "x", "y"]), rows)
}

/// Observations read from a `t,x,y` (or `t,y`) file; `states` is present only
/// when every row carries a ground-truth `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFile {
    pub times: Vec<usize>,
    pub states: Option<Vec<f64>>,
    pub observations: Vec<f64>,
}

pub fn read_observations(path: &Path) -> Result<ObservationFile> {
    let table = read_table(path)?;
    let ct = table.column(path, "t")?;
    let cy = table.column(path, "y")?;
    let cx = table.optional_column("x");
    let mut out = ObservationFile {
        times: Vec::with_capacity(table.rows.len()),
        states: cx.map(|_| Vec::with_capacity(table.rows.len())),
        observations: Vec::with_capacity(table.rows.len()),
    };
    let mut all_states = cx.is_some();
    for (line, rec) in &table.rows {
        out.times.push(parse(path, *line, field(path, *line, rec, ct)?)?);
        out.observations.push(parse(path, *line, field(path, *line, rec, cy)?)?);
        if let (Some(c), Some(states)) = (cx, out.states.as_mut()) {
            let s = field(path, *line, rec, c)?;
            if s.is_empty() {
                all_states = false;
            } else {
                states.push(parse(path, *line, s)?);
            }
        }
    }
    if !all_states {
        out.states = None;
    }
    if out.observations.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "no observations".into(),
        });
    }
    Ok(out)
}

pub fn write_estimates(path: &Path, run: &BmapfRun) -> Result<()> {
    let rows = run
        .times
        .iter()
        .zip(&run.estimates)
        .map(|(t, e)| vec![t.to_string(), e.to_string()]);
    write_table(path, &header(&["t", "estimate"]), rows)
}

/// `t,estimate,pi_1..pi_K,logL_1..logL_K`.
pub fn write_diagnostics(path: &Path, run: &BmapfRun) -> Result<()> {
    let k = run.posterior_trace.first().map_or(0, Vec::len);
    let mut head = header(&["t", "estimate"]);
    head.extend((1..=k).map(|i| format!("pi_{i}")));
    head.extend((1..=k).map(|i| format!("logL_{i}")));
    let rows = (0..run.times.len()).map(|i| {
        let mut row = vec![run.times[i].to_string(), run.estimates[i].to_string()];
        row.extend(run.posterior_trace[i].iter().map(f64::to_string));
        row.extend(run.log_evidence_trace[i].iter().map(f64::to_string));
        row
    });
    write_table(path, &head, rows)
}

/// `iter,theta,f_value,is_incumbent`; exactly one row is the incumbent.
pub fn write_bo_history(path: &Path, result: &BoResult) -> Result<()> {
    let rows = result.queries.iter().enumerate().map(|(i, q)| {
        vec![
            (i + 1).to_string(),
            fmt_theta(&q.theta),
            q.value.to_string(),
            (i == result.best_index).to_string(),
        ]
    });
    write_table(path, &header(&["iter", "theta", "f_value", "is_incumbent"]), rows)
}

/// `k,m_k,theta,f_best`.
pub fn write_model_set(path: &Path, set: &ModelSet) -> Result<()> {
    let rows = set.components.iter().map(|c| {
        vec![
            c.k.to_string(),
            c.m_k.to_string(),
            fmt_theta(&c.theta),
            c.f_best.to_string(),
        ]
    });
    write_table(path, &header(&["k", "m_k", "theta", "f_best"]), rows)
}

/// Parameter vectors of a model-set file, ordered by `k`.
pub fn read_model_set(path: &Path) -> Result<Vec<Vec<f64>>> {
    let table = read_table(path)?;
    let ck = table.column(path, "k")?;
    let ct = table.column(path, "theta")?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let k: usize = parse(path, *line, field(path, *line, rec, ck)?)?;
        rows.push((k, parse_theta(path, *line, field(path, *line, rec, ct)?)?));
    }
    rows.sort_by_key(|(k, _)| *k);
    Ok(rows.into_iter().map(|(_, t)| t).collect())
}

/// `experiment,method,K,Po,run,mse`.
pub fn write_run_records(path: &Path, runs: &[RunRecord]) -> Result<()> {
    let rows = runs.iter().map(|r| {
        vec![
            r.experiment.clone(),
            r.method.label().to_string(),
            r.k.to_string(),
            fmt_opt(r.po),
            r.run.to_string(),
            r.mse.to_string(),
        ]
    });
    write_table(path, &header(&["experiment", "method", "K", "Po", "run", "mse"]), rows)
}

/// `experiment,method,K,Po,mse_mean,mse_std,n_runs`.
pub fn write_cells(path: &Path, cells: &[CellSummary]) -> Result<()> {
    let rows = cells.iter().map(|c| {
        vec![
            c.experiment.clone(),
            c.method.label().to_string(),
            c.k.to_string(),
            fmt_opt(c.po),
            c.mse_mean.to_string(),
            c.mse_std.to_string(),
            c.n_runs.to_string(),
        ]
    });
    write_table(
        path,
        &header(&["experiment", "method", "K", "Po", "mse_mean", "mse_std", "n_runs"]),
        rows,
    )
}

pub fn read_cells(path: &Path) -> Result<Vec<CellSummary>> {
    let table = read_table(path)?;
    let cols: Vec<usize> = ["experiment", "method", "K", "Po", "mse_mean", "mse_std", "n_runs"]
        .iter()
        .map(|n| table.column(path, n))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let line = *line;
        let f = |i: usize| field(path, line, rec, cols[i]);
        let method = Method::parse(f(1)?).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {line}: unknown method `{}`", f(1).unwrap_or_default()),
        })?;
        let po = match f(3)? {
            "" => None,
            s => Some(parse(path, line, s)?),
        };
        out.push(CellSummary {
            experiment: f(0)?.to_string(),
            method,
            k: parse(path, line, f(2)?)?,
            po,
            mse_mean: parse(path, line, f(4)?)?,
            mse_std: parse(path, line, f(5)?)?,
            n_runs: parse(path, line, f(6)?)?,
        });
    }
    Ok(out)
}

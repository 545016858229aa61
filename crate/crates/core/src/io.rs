//! CSV formats for datasets and curve exports.
//!
//! * events: `id,time,kind` with `kind` either `event` or `censor`; exactly one
//!   censor row per id, event rows in ascending time order.
//! * static: `id,x1,...,xp`; row order defines individual order.
//! * dynamic: `id,feature,time,value` with 1-based `feature`.
//! * curves: `id,t,value,masked` where `masked` is 1 past the censoring time.
//!
//! Reals are written in shortest round-trip form so save/load is exact.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::data::{Curve, Dataset, DynamicSeries, EventHistory, Individual};
use crate::error::{BoostError, Result};

pub const EVENTS_FILE: &str = "events.csv";
pub const STATIC_FILE: &str = "static.csv";
pub const DYNAMIC_FILE: &str = "dynamic.csv";

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| BoostError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn open_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| BoostError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> BoostError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    BoostError::Parse {
        file: path.display().to_string(),
        row,
        reason: e.to_string(),
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> BoostError {
    BoostError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

struct RowCtx<'a> {
    file: &'a Path,
    row: usize,
}

impl RowCtx<'_> {
    fn err(&self, reason: impl Into<String>) -> BoostError {
        BoostError::Parse {
            file: self.file.display().to_string(),
            row: self.row,
            reason: reason.into(),
        }
    }

    fn real(&self, field: Option<&str>, name: &str) -> Result<f64> {
        let s = field.ok_or_else(|| self.err(format!("missing column {name}")))?;
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(format!("column {name}: cannot parse {s:?} as a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("column {name}: non-finite value")));
        }
        Ok(v)
    }
}

fn check_header(path: &Path, got: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != expected {
        return Err(BoostError::Parse {
            file: path.display().to_string(),
            row: 1,
            reason: format!("expected header {}, got {}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Loads a dataset and places it on a grid of `m` points over `[0, max censor]`.
pub fn load_dataset(
    events_path: &Path,
    static_path: &Path,
    dynamic_path: Option<&Path>,
    m: usize,
) -> Result<Dataset> {
    // Static features define the individual order.
    let mut rdr = open_reader(static_path)?;
    let header = rdr.headers().map_err(|e| csv_err(static_path, e))?.clone();
    if header.get(0) != Some("id") {
        return Err(BoostError::Parse {
            file: static_path.display().to_string(),
            row: 1,
            reason: "first column must be id".into(),
        });
    }
    let p = header.len() - 1;
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=p).map(|k| format!("x{k}")))
        .collect();
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    check_header(static_path, &header, &expected)?;

    let mut order: Vec<String> = Vec::new();
    let mut xs: HashMap<String, Vec<f64>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(static_path, e))?;
        let ctx = RowCtx {
            file: static_path,
            row: rec.position().map(|p| p.line() as usize).unwrap_or(0),
        };
        let id = rec.get(0).unwrap_or_default().to_string();
        if xs.contains_key(&id) {
            return Err(ctx.err(format!("duplicate id {id}")));
        }
        let x = (1..=p)
            .map(|k| ctx.real(rec.get(k), &format!("x{k}")))
            .collect::<Result<Vec<_>>>()?;
        order.push(id.clone());
        xs.insert(id, x);
    }

    let mut rdr = open_reader(events_path)?;
    let header = rdr.headers().map_err(|e| csv_err(events_path, e))?.clone();
    check_header(events_path, &header, &["id", "time", "kind"])?;
    let mut events: HashMap<String, Vec<f64>> = HashMap::new();
    let mut censors: HashMap<String, (f64, usize)> = HashMap::new();
    let mut event_rows: HashMap<String, Vec<usize>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(events_path, e))?;
        let ctx = RowCtx {
            file: events_path,
            row: rec.position().map(|p| p.line() as usize).unwrap_or(0),
        };
        let id = rec.get(0).unwrap_or_default().to_string();
        if !xs.contains_key(&id) {
            return Err(ctx.err(format!("id {id} has no static features")));
        }
        let time = ctx.real(rec.get(1), "time")?;
        match rec.get(2) {
            Some("event") => {
                if time <= 0.0 {
                    return Err(ctx.err(format!("event time {time} is not positive")));
                }
                let list = events.entry(id.clone()).or_default();
                if let Some(&prev) = list.last() {
                    if time <= prev {
                        return Err(ctx.err(format!(
                            "event times for {id} not strictly ascending ({time} after {prev})"
                        )));
                    }
                }
                list.push(time);
                event_rows.entry(id).or_default().push(ctx.row);
            }
            Some("censor") => {
                if censors.insert(id.clone(), (time, ctx.row)).is_some() {
                    return Err(ctx.err(format!("second censor row for {id}")));
                }
            }
            other => {
                return Err(ctx.err(format!("kind must be event or censor, got {other:?}")));
            }
        }
    }

    let mut dynamic: HashMap<String, Vec<(usize, f64, f64, usize)>> = HashMap::new();
    let mut q = 0;
    if let Some(dpath) = dynamic_path {
        let mut rdr = open_reader(dpath)?;
        let header = rdr.headers().map_err(|e| csv_err(dpath, e))?.clone();
        check_header(dpath, &header, &["id", "feature", "time", "value"])?;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(dpath, e))?;
            let ctx = RowCtx {
                file: dpath,
                row: rec.position().map(|p| p.line() as usize).unwrap_or(0),
            };
            let id = rec.get(0).unwrap_or_default().to_string();
            if !xs.contains_key(&id) {
                return Err(ctx.err(format!("id {id} has no static features")));
            }
            let feature: usize = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .filter(|&f| f >= 1)
                .ok_or_else(|| ctx.err("feature must be a 1-based integer"))?;
            let time = ctx.real(rec.get(2), "time")?;
            let value = ctx.real(rec.get(3), "value")?;
            q = q.max(feature);
            dynamic.entry(id).or_default().push((feature, time, value, ctx.row));
        }
    }

    let mut individuals = Vec::with_capacity(order.len());
    for id in order {
        let (censor, crow) = *censors.get(&id).ok_or_else(|| BoostError::Parse {
            file: events_path.display().to_string(),
            row: 0,
            reason: format!("id {id} has no censor row"),
        })?;
        let times = events.remove(&id).unwrap_or_default();
        if let Some(k) = times.iter().position(|&t| t > censor) {
            return Err(BoostError::Parse {
                file: events_path.display().to_string(),
                row: event_rows[&id][k],
                reason: format!("event time {} is after censoring time {censor}", times[k]),
            });
        }
        let history = EventHistory::new(times, censor).map_err(|e| BoostError::Parse {
            file: events_path.display().to_string(),
            row: crow,
            reason: e.to_string(),
        })?;

        let mut z = Vec::with_capacity(q);
        if q > 0 {
            let rows = dynamic.remove(&id).unwrap_or_default();
            for l in 1..=q {
                let mut ts = Vec::new();
                let mut vs = Vec::new();
                let mut last_row = 0;
                for &(f, t, v, row) in rows.iter().filter(|r| r.0 == l) {
                    debug_assert_eq!(f, l);
                    ts.push(t);
                    vs.push(v);
                    last_row = row;
                }
                let dpath = dynamic_path.expect("q > 0 only with a dynamic file");
                let series = DynamicSeries::new(ts, vs).map_err(|e| BoostError::Parse {
                    file: dpath.display().to_string(),
                    row: last_row,
                    reason: format!("id {id} feature {l}: {e}"),
                })?;
                z.push(series);
            }
        }
        let x = xs.remove(&id).expect("id present");
        individuals.push(Individual {
            id,
            x,
            z,
            events: history,
        });
    }
    Dataset::new(individuals, m)
}

/// Loads `events.csv`, `static.csv` and, if present, `dynamic.csv` from `dir`.
pub fn load_dataset_dir(dir: &Path, m: usize) -> Result<Dataset> {
    let dynamic = dir.join(DYNAMIC_FILE);
    load_dataset(
        &dir.join(EVENTS_FILE),
        &dir.join(STATIC_FILE),
        dynamic.exists().then_some(dynamic.as_path()),
        m,
    )
}

/// Writes the dataset files into `dir` (created if needed).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| BoostError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let path = dir.join(EVENTS_FILE);
    let mut w = open_writer(&path)?;
    w.write_record(["id", "time", "kind"]).map_err(|e| write_err(&path, e))?;
    for ind in dataset.individuals() {
        for t in ind.events.times() {
            w.write_record([ind.id.as_str(), &t.to_string(), "event"])
                .map_err(|e| write_err(&path, e))?;
        }
        w.write_record([ind.id.as_str(), &ind.events.censor().to_string(), "censor"])
            .map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|e| write_err(&path, e))?;

    let path = dir.join(STATIC_FILE);
    let mut w = open_writer(&path)?;
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((1..=dataset.p()).map(|k| format!("x{k}")))
        .collect();
    w.write_record(&header).map_err(|e| write_err(&path, e))?;
    for ind in dataset.individuals() {
        let row: Vec<String> = std::iter::once(ind.id.clone())
            .chain(ind.x.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|e| write_err(&path, e))?;

    if dataset.q() > 0 {
        let path = dir.join(DYNAMIC_FILE);
        let mut w = open_writer(&path)?;
        w.write_record(["id", "feature", "time", "value"])
            .map_err(|e| write_err(&path, e))?;
        for ind in dataset.individuals() {
            for (l, series) in ind.z.iter().enumerate() {
                for (t, v) in series.times().iter().zip(series.values()) {
                    w.write_record([
                        ind.id.as_str(),
                        &(l + 1).to_string(),
                        &t.to_string(),
                        &v.to_string(),
                    ])
                    .map_err(|e| write_err(&path, e))?;
                }
            }
        }
        w.flush().map_err(|e| write_err(&path, e))?;
    }
    Ok(())
}

/// One exported curve sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub id: String,
    pub t: f64,
    pub value: f64,
    pub masked: bool,
}

/// Flattens `(id, curve)` pairs into export rows on the curve's grid.
pub fn curve_rows<'a>(curves: impl IntoIterator<Item = (&'a str, &'a Curve)>) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for (id, curve) in curves {
        for (j, (&v, &obs)) in curve.values().iter().zip(curve.mask()).enumerate() {
            rows.push(CurveRow {
                id: id.to_string(),
                t: curve.grid().point(j),
                value: v,
                masked: !obs,
            });
        }
    }
    rows
}

pub fn save_curves(rows: &[CurveRow], path: &Path) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(["id", "t", "value", "masked"])
        .map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            &r.t.to_string(),
            &r.value.to_string(),
            if r.masked { "1" } else { "0" },
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

pub fn load_curves(path: &Path) -> Result<Vec<CurveRow>> {
    let mut rdr = open_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &["id", "t", "value", "masked"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let ctx = RowCtx {
            file: path,
            row: rec.position().map(|p| p.line() as usize).unwrap_or(0),
        };
        let masked = match rec.get(3) {
            Some("0") => false,
            Some("1") => true,
            other => return Err(ctx.err(format!("masked must be 0 or 1, got {other:?}"))),
        };
        rows.push(CurveRow {
            id: rec.get(0).unwrap_or_default().to_string(),
            t: ctx.real(rec.get(1), "t")?,
            value: ctx.real(rec.get(2), "value")?,
            masked,
        });
    }
    Ok(rows)
}

/// Writes a header and rows of already formatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(header).map_err(|e| write_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| write_err(path, e))
}

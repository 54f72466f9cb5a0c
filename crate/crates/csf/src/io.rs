//! CSV and text file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value written and read back is bit-identical.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use csf_core::flowgraph::{FlowGraph, Grid, Grouping, Station};
use csf_core::numcore::SparseMatrix;
use csf_core::pipeline::BasinData;
use csf_core::synth::{Forcings, N_FORCINGS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// First day of every synthetic dataset.
pub const SYNTHETIC_START: NaiveDate = match NaiveDate::from_ymd_opt(2000, 1, 1) {
    Some(d) => d,
    None => panic!("valid date"),
};

pub const FORCING_HEADER: [&str; 6] = ["station_id", "date", "precip_mm", "tmax_c", "tmin_c", "wind_ms"];

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| CliError::input(format!("bad date {s:?}: {e}")))
}

pub fn day_offset(start: NaiveDate, day: usize) -> NaiveDate {
    start + Days::new(day as u64)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = reader(path)?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::input(format!("{} row {}: {e}", path.display(), i + 1))))
        .collect()
}

fn write_records<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Write a CSV from a header and pre-formatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_stations(path: &Path) -> Result<Vec<Station>> {
    records(path)
}

pub fn write_stations(path: &Path, stations: &[Station]) -> Result<()> {
    write_records(path, stations)
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    upstream_id: String,
    downstream_id: String,
}

pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(records::<EdgeRow>(path)?
        .into_iter()
        .map(|r| (r.upstream_id, r.downstream_id))
        .collect())
}

pub fn write_edges(path: &Path, graph: &FlowGraph) -> Result<()> {
    let s = graph.stations();
    write_records(
        path,
        graph.edges().iter().map(|&(u, d)| EdgeRow {
            upstream_id: s[u].id.clone(),
            downstream_id: s[d].id.clone(),
        }),
    )
}

/// `rows cols` on the first line, then whitespace-separated values in
/// row-major order.
pub fn read_grid(path: &Path) -> Result<Grid<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CliError::input(format!("{}: missing {what}", path.display())))
    };
    let (rows, cols) = (dim("row count")?, dim("column count")?);
    let data: Vec<f64> = tokens
        .map(|t| t.parse::<f64>().map_err(|e| CliError::input(format!("{}: {t:?}: {e}", path.display()))))
        .collect::<Result<_>>()?;
    Grid::new(rows, cols, data)
        .ok_or_else(|| CliError::input(format!("{}: expected {rows}×{cols} values", path.display())))
}

/// Station mask in the grid format; any non-zero value marks a station.
pub fn read_mask(path: &Path) -> Result<Grid<bool>> {
    let g = read_grid(path)?;
    Ok(Grid {
        rows: g.rows,
        cols: g.cols,
        data: g.data.iter().map(|&v| v != 0.0).collect(),
    })
}

pub fn write_grouping(path: &Path, graph: &FlowGraph, grouping: &Grouping) -> Result<()> {
    write_table(
        path,
        &["station_id", "huc8", "huc4", "group"],
        graph.stations().iter().zip(&grouping.assignment).map(|(s, g)| {
            vec![s.id.clone(), s.huc8.clone(), s.huc4.clone(), g.to_string()]
        }),
    )
}

/// Non-zero entries as `station_id,neighbor_id,weight`.
pub fn write_matrix(path: &Path, ids: &[String], m: &SparseMatrix) -> Result<()> {
    write_table(
        path,
        &["station_id", "neighbor_id", "weight"],
        (0..m.n_rows()).flat_map(|i| {
            m.row(i)
                .iter()
                .map(move |&(j, w)| vec![ids[i].clone(), ids[j].clone(), w.to_string()])
                .collect::<Vec<_>>()
        }),
    )
}

/// Per-station daily series keyed by station id, spanning a contiguous
/// date range. Days a station has no row for are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct DatedSeries<T> {
    pub start: NaiveDate,
    pub values: Vec<Vec<T>>,
}

impl<T> DatedSeries<T> {
    pub fn n_days(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        day_offset(self.start, day)
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start).num_days();
        (d >= 0 && (d as usize) < self.n_days()).then_some(d as usize)
    }
}

/// Read `station_id,date,<value columns>` rows into a dense grid over
/// `ids` and the file's date range.
fn read_dated(path: &Path, ids: &[String], columns: &[&str]) -> Result<DatedSeries<Vec<f64>>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("{}: missing column {name}", path.display())))
    };
    let (sc, dc) = (col("station_id")?, col("date")?);
    let vcs: Vec<usize> = columns.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let where_ = || format!("{} row {}", path.display(), n + 1);
        let id = &rec[sc];
        let i = *index
            .get(id)
            .ok_or_else(|| CliError::input(format!("{}: unknown station {id:?}", where_())))?;
        let date = parse_date(&rec[dc])?;
        let mut v = vec![f64::NAN; vcs.len()];
        for (k, &c) in vcs.iter().enumerate() {
            let cell = rec[c].trim();
            if !cell.is_empty() {
                v[k] = cell
                    .parse()
                    .map_err(|e| CliError::input(format!("{}: {cell:?}: {e}", where_())))?;
            }
        }
        rows.push((i, date, v));
    }
    let (Some(start), Some(end)) = (rows.iter().map(|r| r.1).min(), rows.iter().map(|r| r.1).max()) else {
        return Err(CliError::input(format!("{}: no rows", path.display())));
    };
    let n_days = (end - start).num_days() as usize + 1;
    let mut values = vec![vec![vec![f64::NAN; columns.len()]; n_days]; ids.len()];
    let mut seen = vec![vec![false; n_days]; ids.len()];
    for (i, date, v) in rows {
        let t = (date - start).num_days() as usize;
        if std::mem::replace(&mut seen[i][t], true) {
            return Err(CliError::input(format!("{}: duplicate row for {} on {date}", path.display(), ids[i])));
        }
        values[i][t] = v;
    }
    Ok(DatedSeries { start, values })
}

pub fn read_forcings(path: &Path, ids: &[String]) -> Result<DatedSeries<[f64; N_FORCINGS]>> {
    let s = read_dated(path, ids, &FORCING_HEADER[2..])?;
    Ok(DatedSeries {
        start: s.start,
        values: s
            .values
            .into_iter()
            .map(|r| r.into_iter().map(|v| core::array::from_fn(|c| v[c])).collect())
            .collect(),
    })
}

/// Single-value series; `column` is e.g. `flow_cms`, `flow` or `runoff_mm`.
pub fn read_scalar_series(path: &Path, ids: &[String], column: &str) -> Result<DatedSeries<f64>> {
    let s = read_dated(path, ids, &[column])?;
    Ok(DatedSeries {
        start: s.start,
        values: s.values.into_iter().map(|r| r.into_iter().map(|v| v[0]).collect()).collect(),
    })
}

pub fn write_forcings(path: &Path, ids: &[String], start: NaiveDate, forcings: &Forcings) -> Result<()> {
    write_table(
        path,
        &FORCING_HEADER,
        ids.iter().zip(forcings).flat_map(|(id, f)| {
            f.iter()
                .enumerate()
                .map(|(t, v)| {
                    let mut r = vec![id.clone(), day_offset(start, t).to_string()];
                    r.extend(v.iter().map(f64::to_string));
                    r
                })
                .collect::<Vec<_>>()
        }),
    )
}

pub fn write_scalar_series(path: &Path, column: &str, ids: &[String], start: NaiveDate, values: &[Vec<f64>]) -> Result<()> {
    write_table(
        path,
        &["station_id", "date", column],
        ids.iter().zip(values).flat_map(|(id, v)| {
            v.iter()
                .enumerate()
                .map(|(t, x)| vec![id.clone(), day_offset(start, t).to_string(), x.to_string()])
                .collect::<Vec<_>>()
        }),
    )
}

/// Forcings and streamflow of a data directory aligned on a common range.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedData {
    pub start: NaiveDate,
    pub data: BasinData,
}

pub fn read_basin_data(dir: &Path, ids: &[String]) -> Result<LoadedData> {
    let f = read_forcings(&dir.join("forcings.csv"), ids)?;
    let q = read_scalar_series(&dir.join("streamflow.csv"), ids, "flow_cms")?;
    if f.start != q.start || f.n_days() != q.n_days() {
        return Err(CliError::input(format!(
            "forcings cover {} + {} days but streamflow covers {} + {} days",
            f.start,
            f.n_days(),
            q.start,
            q.n_days()
        )));
    }
    Ok(LoadedData {
        start: f.start,
        data: BasinData {
            forcings: f.values,
            flow: q.values,
        },
    })
}

/// `station_id,date,z0..z{d-1}` rows, `values[station][day]` over `ids`.
pub fn read_embeddings(path: &Path, ids: &[String]) -> Result<DatedSeries<Vec<f64>>> {
    let header = reader(path)?.headers().map_err(|e| CliError::io(path, e))?.clone();
    let d = header.iter().filter(|h| h.starts_with('z')).count();
    if d == 0 {
        return Err(CliError::input(format!("{}: no z columns", path.display())));
    }
    let cols: Vec<String> = (0..d).map(|k| format!("z{k}")).collect();
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    read_dated(path, ids, &refs)
}

/// `emb[day][station][d]` starting at `start`.
pub fn write_embeddings(path: &Path, ids: &[String], start: NaiveDate, emb: &[Vec<Vec<f64>>]) -> Result<()> {
    let d = emb.first().and_then(|e| e.first()).map_or(0, Vec::len);
    let mut header = vec!["station_id".to_string(), "date".to_string()];
    header.extend((0..d).map(|k| format!("z{k}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        path,
        &h,
        (0..ids.len()).flat_map(|i| {
            emb.iter()
                .enumerate()
                .map(|(t, day)| {
                    let mut r = vec![ids[i].clone(), day_offset(start, t).to_string()];
                    r.extend(day[i].iter().map(f64::to_string));
                    r
                })
                .collect::<Vec<_>>()
        }),
    )
}

/// One forecast value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub station_id: String,
    pub date: NaiveDate,
    pub flow: f64,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_records(path, rows)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    records(path)
}

/// Group prediction rows by station, preserving first-seen station order.
pub fn group_predictions(rows: &[PredictionRow]) -> Result<BTreeMap<String, Vec<(NaiveDate, f64)>>> {
    let mut out: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for r in rows {
        out.entry(r.station_id.clone()).or_default().push((r.date, r.flow));
    }
    for (id, v) in out.iter_mut() {
        v.sort_by_key(|p| p.0);
        if v.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(CliError::input(format!("station {id} has more than one prediction for a date")));
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

//! Series preprocessing, chronological splits and window indexing.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::flowgraph::{Station, N_STATIC};
use crate::math;
use crate::synth::{Forcings, N_FORCINGS};

/// Raw per-station series. Missing values are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct BasinData {
    pub forcings: Forcings,
    /// `flow[station][day]`.
    pub flow: Vec<Vec<f64>>,
}

impl BasinData {
    pub fn n_stations(&self) -> usize {
        self.flow.len()
    }

    pub fn n_days(&self) -> usize {
        self.flow.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskName {
    Short,
    Medium,
    Long,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub name: TaskName,
    pub t_in: usize,
    pub t_out: usize,
}

impl ForecastTask {
    pub const SHORT: Self = Self {
        name: TaskName::Short,
        t_in: 7,
        t_out: 1,
    };
    pub const MEDIUM: Self = Self {
        name: TaskName::Medium,
        t_in: 14,
        t_out: 3,
    };
    pub const LONG: Self = Self {
        name: TaskName::Long,
        t_in: 28,
        t_out: 7,
    };

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "short" => Some(Self::SHORT),
            "medium" => Some(Self::MEDIUM),
            "long" => Some(Self::LONG),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.name {
            TaskName::Short => "short",
            TaskName::Medium => "medium",
            TaskName::Long => "long",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapMode {
    /// Each station capped at its own training-split percentile.
    #[default]
    PerStation,
    /// One percentile over all stations' training flows.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub flow_cap: Vec<f64>,
    pub flow_mean: Vec<f64>,
    pub flow_std: Vec<f64>,
    pub forcing_mean: Vec<[f64; N_FORCINGS]>,
    pub forcing_std: Vec<[f64; N_FORCINGS]>,
    pub static_mean: [f64; N_STATIC],
    pub static_std: [f64; N_STATIC],
}

impl PreprocessStats {
    pub fn standardize_flow(&self, station: usize, q: f64) -> f64 {
        (q.min(self.flow_cap[station]) - self.flow_mean[station]) / self.flow_std[station]
    }

    pub fn inverse_flow(&self, station: usize, z: f64) -> f64 {
        z * self.flow_std[station] + self.flow_mean[station]
    }

    pub fn standardize_forcing(&self, station: usize, f: &[f64; N_FORCINGS]) -> [f64; N_FORCINGS] {
        let (m, s) = (&self.forcing_mean[station], &self.forcing_std[station]);
        core::array::from_fn(|c| (f[c] - m[c]) / s[c])
    }

    pub fn standardize_static(&self, s: &[f64; N_STATIC]) -> [f64; N_STATIC] {
        core::array::from_fn(|c| (s[c] - self.static_mean[c]) / self.static_std[c])
    }
}

/// Standardised model inputs plus the statistics that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub flow: Vec<Vec<f64>>,
    pub forcings: Forcings,
    pub statics: Vec<[f64; N_STATIC]>,
    /// Observed flow capped at the training percentile, physical units.
    pub capped_flow: Vec<Vec<f64>>,
    pub stats: PreprocessStats,
}

/// Linear interpolation across interior gaps, nearest value at the ends.
pub fn impute(series: &mut [f64]) -> bool {
    let known: Vec<usize> = (0..series.len()).filter(|&t| series[t].is_finite()).collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return false;
    };
    for t in 0..first {
        series[t] = series[first];
    }
    for t in last + 1..series.len() {
        series[t] = series[last];
    }
    for w in known.windows(2) {
        let (a, b) = (w[0], w[1]);
        for t in a + 1..b {
            let f = (t - a) as f64 / (b - a) as f64;
            series[t] = series[a] + f * (series[b] - series[a]);
        }
    }
    true
}

fn fill_gaps(data: &BasinData, impute_missing: bool) -> Result<BasinData> {
    let mut out = data.clone();
    for (i, q) in out.flow.iter_mut().enumerate() {
        if let Some(day) = q.iter().position(|v| !v.is_finite()) {
            if !impute_missing || !impute(q) {
                return Err(PipelineError::MissingData { station: i, day });
            }
        }
    }
    for (i, series) in out.forcings.iter_mut().enumerate() {
        for c in 0..N_FORCINGS {
            let mut col: Vec<f64> = series.iter().map(|d| d[c]).collect();
            if let Some(day) = col.iter().position(|v| !v.is_finite()) {
                if !impute_missing || !impute(&mut col) {
                    return Err(PipelineError::MissingData { station: i, day });
                }
                for (d, v) in series.iter_mut().zip(col) {
                    d[c] = v;
                }
            }
        }
    }
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    (math::mean(xs), math::std_dev(xs))
}

/// Cap, then z-score every dynamic series with training-split statistics.
pub fn preprocess(
    data: &BasinData,
    stations: &[Station],
    train: Range<usize>,
    cap_percentile: f64,
    cap_mode: CapMode,
    impute_missing: bool,
) -> Result<Prepared> {
    let n = data.n_stations();
    if stations.len() != n || data.forcings.len() != n {
        return Err(PipelineError::ConfigInvalid(alloc::format!(
            "{} stations, {} flow series, {} forcing series",
            stations.len(),
            n,
            data.forcings.len()
        )));
    }
    let data = fill_gaps(data, impute_missing)?;
    let flow_cap: Vec<f64> = match cap_mode {
        CapMode::PerStation => data
            .flow
            .iter()
            .map(|q| math::percentile(&q[train.clone()], cap_percentile))
            .collect(),
        CapMode::Global => {
            let all: Vec<f64> = data.flow.iter().flat_map(|q| q[train.clone()].iter().copied()).collect();
            vec![math::percentile(&all, cap_percentile); n]
        }
    };
    let capped_flow: Vec<Vec<f64>> = data
        .flow
        .iter()
        .zip(&flow_cap)
        .map(|(q, &cap)| q.iter().map(|v| v.min(cap)).collect())
        .collect();

    let mut flow_mean = Vec::with_capacity(n);
    let mut flow_std = Vec::with_capacity(n);
    let mut forcing_mean = Vec::with_capacity(n);
    let mut forcing_std = Vec::with_capacity(n);
    for i in 0..n {
        let (m, s) = mean_std(&capped_flow[i][train.clone()]);
        if !(s > 0.0) {
            return Err(PipelineError::DegenerateSeries { station: i, feature: "flow" });
        }
        flow_mean.push(m);
        flow_std.push(s);
        let mut fm = [0.0; N_FORCINGS];
        let mut fs = [0.0; N_FORCINGS];
        for c in 0..N_FORCINGS {
            let col: Vec<f64> = data.forcings[i][train.clone()].iter().map(|d| d[c]).collect();
            let (m, s) = mean_std(&col);
            if !(s > 0.0) {
                return Err(PipelineError::DegenerateSeries {
                    station: i,
                    feature: FORCING_NAMES[c],
                });
            }
            fm[c] = m;
            fs[c] = s;
        }
        forcing_mean.push(fm);
        forcing_std.push(fs);
    }

    let raw_static: Vec<[f64; N_STATIC]> = stations.iter().map(Station::static_features).collect();
    let mut static_mean = [0.0; N_STATIC];
    let mut static_std = [1.0; N_STATIC];
    for c in 0..N_STATIC {
        let col: Vec<f64> = raw_static.iter().map(|s| s[c]).collect();
        let (m, s) = mean_std(&col);
        static_mean[c] = m;
        // a static shared by every station carries no information; keep it at 0
        static_std[c] = if s > 0.0 { s } else { 1.0 };
    }

    let stats = PreprocessStats {
        flow_cap,
        flow_mean,
        flow_std,
        forcing_mean,
        forcing_std,
        static_mean,
        static_std,
    };
    let flow = (0..n)
        .map(|i| data.flow[i].iter().map(|&q| stats.standardize_flow(i, q)).collect())
        .collect();
    let forcings = (0..n)
        .map(|i| data.forcings[i].iter().map(|f| stats.standardize_forcing(i, f)).collect())
        .collect();
    let statics = raw_static.iter().map(|s| stats.standardize_static(s)).collect();
    Ok(Prepared {
        flow,
        forcings,
        statics,
        capped_flow,
        stats,
    })
}

pub const FORCING_NAMES: [&str; N_FORCINGS] = ["precip_mm", "tmax_c", "tmin_c", "wind_ms"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Contiguous chronological segments; train and validation lengths are
/// rounded, test takes the remainder.
pub fn temporal_split(n_days: usize, fractions: (f64, f64, f64)) -> Result<SplitRanges> {
    let (a, b, c) = fractions;
    if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(PipelineError::ConfigInvalid(alloc::format!(
            "split fractions {a}, {b}, {c} must be non-negative and sum to 1"
        )));
    }
    let n_train = math::round(n_days as f64 * a) as usize;
    let n_val = (math::round(n_days as f64 * b) as usize).min(n_days - n_train.min(n_days));
    let n_train = n_train.min(n_days);
    let split = SplitRanges {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_days,
    };
    for (name, r) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        if r.is_empty() {
            return Err(PipelineError::TooShort {
                what: name,
                needed: 1,
                got: 0,
            });
        }
    }
    Ok(split)
}

/// Start days of every window lying entirely inside `segment`. A window
/// starting at `s` reads inputs `s..s+t_in` and targets
/// `s+t_in..s+t_in+t_out`.
pub fn make_windows(segment: Range<usize>, task: ForecastTask) -> Result<Vec<usize>> {
    let span = task.t_in + task.t_out;
    if segment.len() < span {
        return Err(PipelineError::TooShort {
            what: "window",
            needed: span,
            got: segment.len(),
        });
    }
    Ok((segment.start..=segment.end - span).collect())
}

//! Hydrologic skill scores and the kNN embedding-alignment metric.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("observed series is constant")]
    ConstantObserved,
    #[error("observed mean is zero")]
    ZeroMeanObserved,
    #[error("series is constant")]
    ConstantSeries,
    #[error("observed volume is zero")]
    ZeroVolume,
    #[error("k = {k} needs more than {n} points")]
    KTooLarge { k: usize, n: usize },
    #[error("index mismatch: {0}")]
    IndexMismatch(String),
}

pub type Result<T> = core::result::Result<T, MetricError>;

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(MetricError::LengthMismatch(y.len(), y_hat.len()));
    }
    if y.len() < 2 {
        return Err(MetricError::TooShort(y.len()));
    }
    Ok(())
}

/// Nash-Sutcliffe efficiency `1 − Σ(y−ŷ)² / Σ(y−ȳ)²`.
pub fn nse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let m = math::mean(y);
    let den: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if den == 0.0 {
        return Err(MetricError::ConstantObserved);
    }
    let num: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - num / den)
}

pub fn pearson_rho(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat)?;
    let (my, mh) = (math::mean(y), math::mean(y_hat));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantSeries);
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Variability term of KGE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KgeVariability {
    /// Ratio of coefficients of variation.
    #[default]
    CvRatio,
    /// Ratio of standard deviations.
    StdRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgeParts {
    pub r: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kge: f64,
}

pub fn kge_parts(y: &[f64], y_hat: &[f64], variability: KgeVariability) -> Result<KgeParts> {
    check_pair(y, y_hat)?;
    let (my, mh) = (math::mean(y), math::mean(y_hat));
    if my == 0.0 {
        return Err(MetricError::ZeroMeanObserved);
    }
    let r = match pearson_rho(y, y_hat) {
        Err(MetricError::ConstantSeries) if math::variance(y) > 0.0 => 0.0,
        other => other?,
    };
    let (sy, sh) = (math::std_dev(y), math::std_dev(y_hat));
    let beta = mh / my;
    let gamma = match variability {
        KgeVariability::CvRatio => (sh / mh) / (sy / my),
        KgeVariability::StdRatio => sh / sy,
    };
    let kge = 1.0 - math::sqrt((r - 1.0) * (r - 1.0) + (beta - 1.0) * (beta - 1.0) + (gamma - 1.0) * (gamma - 1.0));
    Ok(KgeParts { r, beta, gamma, kge })
}

/// Kling-Gupta efficiency with the coefficient-of-variation ratio. A
/// constant prediction of a varying observation counts as `r = 0`.
pub fn kge(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    kge_parts(y, y_hat, KgeVariability::CvRatio).map(|p| p.kge)
}

/// `1 − Σ|ŷ−y| / Σy`.
pub fn volumetric_efficiency(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(MetricError::LengthMismatch(y.len(), y_hat.len()));
    }
    let vol: f64 = y.iter().sum();
    if vol <= 0.0 {
        return Err(MetricError::ZeroVolume);
    }
    let err: f64 = y.iter().zip(y_hat).map(|(a, b)| (b - a).abs()).sum();
    Ok(1.0 - err / vol)
}

/// Indices of the `k` nearest neighbours of `i` (self excluded). Ties go
/// to the lower index.
pub fn nearest<D: Fn(usize, usize) -> f64>(n: usize, i: usize, k: usize, dist: D) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)).collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(k);
    cand.into_iter().map(|(_, j)| j).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Per-point overlap `|S_z(i) ∩ S_r(i)| / k`.
pub fn knn_overlaps(z: &[Vec<f64>], r: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = z.len();
    if r.len() != n {
        return Err(MetricError::LengthMismatch(n, r.len()));
    }
    if k == 0 || k >= n {
        return Err(MetricError::KTooLarge { k, n });
    }
    Ok((0..n)
        .map(|i| {
            let sz = nearest(n, i, k, |a, b| euclid(&z[a], &z[b]));
            let sr = nearest(n, i, k, |a, b| (r[a] - r[b]).abs());
            sz.iter().filter(|j| sr.contains(j)).count() as f64 / k as f64
        })
        .collect())
}

pub fn knn_alignment(z: &[Vec<f64>], r: &[f64], k: usize) -> Result<f64> {
    Ok(math::mean(&knn_overlaps(z, r, k)?))
}

/// Alignment computed per day and averaged over days. `z[t][i]` is the
/// embedding of station `i` on day `t`, `r[t][i]` the reference runoff.
/// Also returns the per-station overlap averaged over days.
pub fn knn_alignment_over_days(z: &[Vec<Vec<f64>>], r: &[Vec<f64>], k: usize) -> Result<(f64, Vec<f64>)> {
    if z.len() != r.len() || z.is_empty() {
        return Err(MetricError::LengthMismatch(z.len(), r.len()));
    }
    let n = z[0].len();
    let mut per_station = alloc::vec![0.0; n];
    for (zt, rt) in z.iter().zip(r) {
        if zt.len() != n {
            return Err(MetricError::IndexMismatch(alloc::format!("{} stations on one day, {} on another", zt.len(), n)));
        }
        for (acc, o) in per_station.iter_mut().zip(knn_overlaps(zt, rt, k)?) {
            *acc += o;
        }
    }
    per_station.iter_mut().for_each(|v| *v /= z.len() as f64);
    Ok((math::mean(&per_station), per_station))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationMetrics {
    pub station_id: String,
    pub nse: f64,
    pub kge: f64,
    pub ve: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub nse: f64,
    pub kge: f64,
    pub ve: f64,
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub stations: Vec<StationMetrics>,
    pub mean: MeanMetrics,
    pub knn_alignment: Option<f64>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

/// Embeddings and reference runoff for the alignment entry of a report.
pub struct AlignmentInput<'a> {
    pub embeddings: &'a [Vec<Vec<f64>>],
    pub runoff: &'a [Vec<f64>],
    pub k: usize,
}

/// Pearson correlation, with a constant prediction scored as 0 rather than
/// rejected, so one flat forecast does not void a whole report.
pub fn rho_or_zero(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    match pearson_rho(y, y_hat) {
        Err(MetricError::ConstantSeries) if math::variance(y) > 0.0 => Ok(0.0),
        other => other,
    }
}

/// Per-station scores plus unweighted means. `observed[i]` and
/// `predicted[i]` are the series of `station_ids[i]`.
pub fn build_report(
    station_ids: &[String],
    observed: &[Vec<f64>],
    predicted: &[Vec<f64>],
    task: &str,
    alignment: Option<AlignmentInput<'_>>,
) -> Result<MetricsReport> {
    if observed.len() != station_ids.len() || predicted.len() != station_ids.len() {
        return Err(MetricError::IndexMismatch(alloc::format!(
            "{} ids, {} observed, {} predicted",
            station_ids.len(),
            observed.len(),
            predicted.len()
        )));
    }
    let stations = station_ids
        .iter()
        .zip(observed.iter().zip(predicted))
        .map(|(id, (y, p))| {
            Ok(StationMetrics {
                station_id: id.clone(),
                nse: nse(y, p)?,
                kge: kge(y, p)?,
                ve: volumetric_efficiency(y, p)?,
                rho: rho_or_zero(y, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let avg = |f: fn(&StationMetrics) -> f64| math::mean(&stations.iter().map(f).collect::<Vec<_>>());
    let mean = MeanMetrics {
        nse: avg(|s| s.nse),
        kge: avg(|s| s.kge),
        ve: avg(|s| s.ve),
        rho: avg(|s| s.rho),
    };
    let knn_alignment = match alignment {
        Some(a) => Some(knn_alignment_over_days(a.embeddings, a.runoff, a.k)?.0),
        None => None,
    };
    Ok(MetricsReport {
        task: task.into(),
        stations,
        mean,
        knn_alignment,
        seed: None,
        config_hash: None,
    })
}

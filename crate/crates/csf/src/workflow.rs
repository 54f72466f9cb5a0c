//! In-memory steps shared by the commands and the acceptance suite.

use std::path::Path;
use std::time::Instant;

use csf_core::flowgraph::{build_from_edges, hierarchical_groups, FlowGraph, Grouping};
use csf_core::metrics::{self, AlignmentInput, MetricsReport};
use csf_core::pipeline::{evaluate_split, prepare, train, BasinData, EvalSeries, TrainConfig, TrainOutcome};
use csf_core::rng::{streams, SeedRng};

use crate::error::Result;
use crate::io::{read_edges, read_stations};

/// Read `stations.csv` and `edges.csv` from `dir` and group the stations.
pub fn load_graph(dir: &Path) -> Result<(FlowGraph, Grouping)> {
    let stations = read_stations(&dir.join("stations.csv"))?;
    let edges = read_edges(&dir.join("edges.csv"))?;
    let graph = build_from_edges(stations, &edges)?;
    let grouping = hierarchical_groups(graph.stations())?;
    Ok((graph, grouping))
}

pub fn station_ids(graph: &FlowGraph) -> Vec<String> {
    graph.stations().iter().map(|s| s.id.clone()).collect()
}

/// Result of one training run plus its test-split evaluation.
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub outcome: TrainOutcome,
    pub test: EvalSeries,
    pub report: MetricsReport,
    /// Test-split embeddings `[day][station][d]`, when the model has them.
    pub embeddings: Option<Vec<Vec<Vec<f64>>>>,
    pub split: csf_core::pipeline::SplitRanges,
    pub prepared: csf_core::pipeline::Prepared,
    pub train_seconds: f64,
}

/// Preprocess, train, and score the test split. `runoff[station][day]`
/// adds a kNN alignment entry (k = `k`) to the report when embeddings are on.
pub fn train_and_evaluate(
    config: &TrainConfig,
    graph: &FlowGraph,
    grouping: &Grouping,
    data: &BasinData,
    runoff: Option<&[Vec<f64>]>,
    k: usize,
) -> Result<TrainArtifacts> {
    let (prepared, split) = prepare(config, data, graph)?;
    let clock = Instant::now();
    let outcome = train(config, &prepared, &split, graph, grouping)?;
    let train_seconds = clock.elapsed().as_secs_f64();
    let test = evaluate_split(&outcome.model, &prepared, split.test.clone())?;
    let embeddings = match outcome.model.vae {
        Some(_) => Some(outcome.model.embeddings(&prepared.forcings, split.test.clone())?),
        None => None,
    };
    let reference = runoff.map(|r| daily_rows(r, split.test.clone()));
    let alignment = match (&embeddings, &reference) {
        (Some(e), Some(r)) => Some(AlignmentInput {
            embeddings: e,
            runoff: r,
            k,
        }),
        _ => None,
    };
    let ids = station_ids(graph);
    let mut report = metrics::build_report(&ids, &test.observed, &test.predicted, config.task.label(), alignment)?;
    report.seed = Some(config.seed);
    report.config_hash = Some(crate::manifest::sha256_hex(config.to_text().as_bytes()));
    Ok(TrainArtifacts {
        outcome,
        test,
        report,
        embeddings,
        split,
        prepared,
        train_seconds,
    })
}

/// `series[station][day]` restricted to `days`, as `[day][station]`.
pub fn daily_rows(series: &[Vec<f64>], days: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    days.map(|t| series.iter().map(|s| s[t]).collect()).collect()
}

/// Standard-normal embeddings shaped like `like`, drawn from the
/// random-embedding stream of `seed`.
pub fn random_embeddings(like: &[Vec<Vec<f64>>], seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = SeedRng::new(seed).split(streams::RANDOM_EMBEDDING);
    like.iter()
        .map(|day| day.iter().map(|z| z.iter().map(|_| rng.standard_normal()).collect()).collect())
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

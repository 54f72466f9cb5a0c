//! Command implementations: read inputs, call into `csf_core`, write
//! outputs and the manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use csf_core::flowgraph::{
    aggregation_matrix, build_from_d8, build_from_edges, causal_adjacency, hierarchical_groups, validation_report, Grid,
};
use csf_core::metrics::{self, MeanMetrics, MetricsReport};
use csf_core::pipeline::{rolling_forecast, Arm, CsfModel, OneStepForecaster, TrainConfig};
use csf_core::synth::{generate_dataset, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::cli::{AblateArgs, AlignArgs, BuildGraphArgs, Cli, Command, EvaluateArgs, ForecastArgs, TrainArgs};
use crate::error::{CliError, Result};
use crate::io::{self, PredictionRow};
use crate::manifest::ManifestBuilder;
use crate::run::{self, ModelMeta};
use crate::svg;
use crate::workflow::{self, load_graph, median, random_embeddings, station_ids};

pub fn dispatch(cli: &Cli, argv: &[String]) -> Result<()> {
    let out = cli.out_dir()?;
    io::create_dir(out)?;
    let name = match &cli.command {
        Command::BuildGraph(_) => "build-graph",
        Command::Simulate => "simulate",
        Command::Train(_) => "train",
        Command::Forecast(_) => "forecast",
        Command::Evaluate(_) => "evaluate",
        Command::Align(_) => "align",
        Command::Ablate(_) => "ablate",
    };
    let mut mf = ManifestBuilder::start(name, argv);
    if let Some(s) = cli.seed {
        mf.seed(s);
    }
    if let Some(c) = &cli.config {
        mf.input(c)?;
        mf.config_text(&io::read_text(c)?);
    }
    match &cli.command {
        Command::BuildGraph(a) => build_graph(a, out, &mut mf)?,
        Command::Simulate => simulate(cli, out, &mut mf)?,
        Command::Train(a) => train(cli, a, out, &mut mf)?,
        Command::Forecast(a) => forecast(a, out, &mut mf)?,
        Command::Evaluate(a) => evaluate(cli, a, out, &mut mf)?,
        Command::Align(a) => align(cli, a, out, &mut mf)?,
        Command::Ablate(a) => ablate(cli, a, out, &mut mf)?,
    }
    mf.finish(out)?;
    Ok(())
}

fn build_graph(a: &BuildGraphArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    let graph = match (&a.edges, &a.dem) {
        (Some(edges), _) => {
            let sp = a.stations.as_ref().ok_or_else(|| CliError::input("--edges needs --stations"))?;
            mf.input(sp)?;
            mf.input(edges)?;
            build_from_edges(io::read_stations(sp)?, &io::read_edges(edges)?)?
        }
        (None, Some(dem)) => {
            mf.input(dem)?;
            let g = io::read_grid(dem)?;
            let mask = match &a.mask {
                Some(m) => {
                    mf.input(m)?;
                    io::read_mask(m)?
                }
                None => Grid::filled(g.rows, g.cols, true),
            };
            build_from_d8(&g, &mask)?
        }
        (None, None) => return Err(CliError::input("build-graph needs --stations/--edges or --dem")),
    };
    let grouping = hierarchical_groups(graph.stations())?;
    let m = aggregation_matrix(&causal_adjacency(&graph), true, true);
    let report = validation_report(&graph, &grouping, &m);
    let ids = station_ids(&graph);
    io::write_stations(&out.join("stations.csv"), graph.stations())?;
    io::write_edges(&out.join("edges.csv"), &graph)?;
    io::write_matrix(&out.join("aggregation.csv"), &ids, &m)?;
    io::write_grouping(&out.join("grouping.csv"), &graph, &grouping)?;
    io::write_json(&out.join("report.json"), &report)?;
    println!(
        "{} nodes, {} edges, acyclic={}, {} outlets",
        report.nodes, report.edges, report.acyclic, report.outlets
    );
    Ok(())
}

fn simulate(cli: &Cli, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::parse(&io::read_text(p)?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    mf.seed(cfg.seed);
    mf.config_text(&cfg.to_text());
    let ds = generate_dataset(&cfg);
    let sc = &ds.scenario;
    let ids = station_ids(&sc.graph);
    let start = io::SYNTHETIC_START;
    io::write_text(&out.join("scenario.txt"), &cfg.to_text())?;
    io::write_stations(&out.join("stations.csv"), sc.graph.stations())?;
    io::write_edges(&out.join("edges.csv"), &sc.graph)?;
    io::write_forcings(&out.join("forcings.csv"), &ids, start, &ds.forcings)?;
    io::write_scalar_series(&out.join("streamflow.csv"), "flow_cms", &ids, start, &ds.flow)?;
    io::write_scalar_series(&out.join("runoff_truth.csv"), "runoff_mm", &ids, start, &ds.runoff)?;
    io::write_table(
        &out.join("station_params.csv"),
        &["station_id", "kappa", "runoff_fraction", "area", "delay_days", "alpha"],
        (0..ids.len()).map(|i| {
            vec![
                ids[i].clone(),
                sc.kappa[i].to_string(),
                sc.runoff_fraction[i].to_string(),
                sc.area[i].to_string(),
                sc.delay[i].to_string(),
                sc.alpha[i].to_string(),
            ]
        }),
    )?;
    println!("{} stations, {} days -> {}", ids.len(), cfg.n_days, out.display());
    Ok(())
}

fn train_config(cli: &Cli) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => TrainConfig::parse(&io::read_text(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Inputs {
    graph: csf_core::FlowGraph,
    grouping: csf_core::Grouping,
    ids: Vec<String>,
    loaded: io::LoadedData,
    runoff: Option<Vec<Vec<f64>>>,
}

fn load_inputs(data: &Path, graph_dir: Option<&PathBuf>, mf: &mut ManifestBuilder) -> Result<Inputs> {
    let gdir = graph_dir.map_or(data, |p| p.as_path());
    mf.input(&gdir.join("stations.csv"))?;
    mf.input(&gdir.join("edges.csv"))?;
    mf.input(&data.join("forcings.csv"))?;
    mf.input(&data.join("streamflow.csv"))?;
    let (graph, grouping) = load_graph(gdir)?;
    let ids = station_ids(&graph);
    let loaded = io::read_basin_data(data, &ids)?;
    let truth = data.join("runoff_truth.csv");
    let runoff = if truth.exists() {
        mf.input(&truth)?;
        let r = io::read_scalar_series(&truth, &ids, "runoff_mm")?;
        (r.start == loaded.start && r.n_days() == loaded.data.n_days()).then_some(r.values)
    } else {
        None
    };
    Ok(Inputs {
        graph,
        grouping,
        ids,
        loaded,
        runoff,
    })
}

fn train(cli: &Cli, a: &TrainArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    let cfg = train_config(cli)?;
    mf.seed(cfg.seed);
    mf.config_text(&cfg.to_text());
    let inp = load_inputs(&a.data, a.graph.as_ref(), mf)?;
    let art = workflow::train_and_evaluate(&cfg, &inp.graph, &inp.grouping, &inp.loaded.data, inp.runoff.as_deref(), a.k)?;
    let model = &art.outcome.model;
    let meta = ModelMeta {
        station_ids: inp.ids.clone(),
        start: inp.loaded.start,
        split: art.split.clone(),
        best_epoch: art.outcome.best_epoch,
        stats: model.stats.clone(),
        statics: model.statics.clone(),
        matrix: run::MatrixEntries::from_matrix(&model.basin.m),
    };
    io::write_text(&out.join("config.txt"), &cfg.to_text())?;
    run::save_model(out, model, &meta)?;
    run::write_log(&out.join(run::LOG_FILE), &art.outcome.log)?;
    io::write_json(&out.join("metrics.json"), &art.report)?;
    if let Some(emb) = &art.embeddings {
        let start = io::day_offset(inp.loaded.start, art.split.test.start);
        io::write_embeddings(&out.join("embeddings.csv"), &inp.ids, start, emb)?;
    }
    println!(
        "epochs {} best {:?} test NSE {:.4} KGE {:.4}{}",
        art.outcome.log.len(),
        art.outcome.best_epoch,
        art.report.mean.nse,
        art.report.mean.kge,
        art.report.knn_alignment.map(|v| format!(" kNN {v:.4}")).unwrap_or_default()
    );
    Ok(())
}

fn parse_targets(spec: Option<&String>, ids: &[String]) -> Result<Vec<usize>> {
    match spec {
        None => Ok((0..ids.len()).collect()),
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                ids.iter()
                    .position(|x| x == t)
                    .ok_or_else(|| CliError::input(format!("unknown target station {t:?}")))
            })
            .collect::<Result<BTreeSet<_>>>()
            .map(|s| s.into_iter().collect()),
    }
}

/// Roll `horizon` steps from day `origin` (the first forecast day).
fn roll_from(model: &mut CsfModel, data: &csf_core::pipeline::BasinData, origin: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
    let t_in = model.t_in();
    if origin < t_in {
        return Err(CliError::input(format!("origin day {origin} leaves fewer than {t_in} days of history")));
    }
    if origin + horizon - 1 > data.n_days() {
        return Err(CliError::input(format!(
            "forcings end on day {}, horizon {horizon} from day {origin} needs day {}",
            data.n_days() - 1,
            origin + horizon - 2
        )));
    }
    let hist: Vec<Vec<f64>> = data.flow.iter().map(|q| q[origin - t_in..origin].to_vec()).collect();
    if hist.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::input(format!("missing observed flow in the {t_in} days before origin day {origin}")));
    }
    let forc: Vec<Vec<[f64; 4]>> = data
        .forcings
        .iter()
        .map(|f| f[origin - t_in..origin + horizon - 1].to_vec())
        .collect();
    Ok(rolling_forecast(model, &hist, &forc, horizon)?)
}

fn forecast(a: &ForecastArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    if a.horizon == 0 {
        return Err(CliError::input("--horizon must be at least 1"));
    }
    for f in ["checkpoint.json", "params.bin", run::META_FILE] {
        mf.input(&a.run.join(f))?;
    }
    mf.input(&a.data.join("forcings.csv"))?;
    mf.input(&a.data.join("streamflow.csv"))?;
    let (mut model, meta) = run::load_model(&a.run)?;
    mf.seed(model.config.seed);
    mf.config_text(&model.config.to_text());
    let ids = &meta.station_ids;
    let loaded = io::read_basin_data(&a.data, ids)?;
    let targets = parse_targets(a.targets.as_ref(), ids)?;
    let day = |date: chrono::NaiveDate| -> Result<usize> {
        let d = (date - loaded.start).num_days();
        if d < 0 {
            return Err(CliError::input(format!("{date} precedes the data ({})", loaded.start)));
        }
        Ok(d as usize)
    };
    let mut rows = Vec::new();
    match (&a.origin, &a.split) {
        (Some(o), _) => {
            let origin = day(io::parse_date(o)?)?;
            let pred = roll_from(&mut model, &loaded.data, origin, a.horizon)?;
            for &i in &targets {
                for (h, &v) in pred[i].iter().enumerate() {
                    rows.push(PredictionRow {
                        station_id: ids[i].clone(),
                        date: io::day_offset(loaded.start, origin + h),
                        flow: v,
                    });
                }
            }
        }
        (None, Some(name)) => {
            let range = match name.as_str() {
                "train" => meta.split.train.clone(),
                "val" => meta.split.val.clone(),
                "test" => meta.split.test.clone(),
                other => return Err(CliError::input(format!("unknown split {other:?}"))),
            };
            // shift into this data file's day numbering
            let shift = (meta.start - loaded.start).num_days();
            let start = range.start as i64 + shift;
            let end = range.end as i64 + shift;
            if start < 0 || end as usize > loaded.data.n_days() {
                return Err(CliError::input(format!("data does not cover the {name} split")));
            }
            let t_in = model.t_in() as i64;
            let mut by_station: Vec<Vec<PredictionRow>> = vec![Vec::new(); ids.len()];
            for origin in (start + t_in)..(end - a.horizon as i64 + 1) {
                let pred = roll_from(&mut model, &loaded.data, origin as usize, a.horizon)?;
                let date = io::day_offset(loaded.start, origin as usize + a.horizon - 1);
                for &i in &targets {
                    by_station[i].push(PredictionRow {
                        station_id: ids[i].clone(),
                        date,
                        flow: pred[i][a.horizon - 1],
                    });
                }
            }
            rows = by_station.into_iter().flatten().collect();
        }
        (None, None) => return Err(CliError::input("forecast needs --origin or --split")),
    }
    io::write_predictions(&out.join("predictions.csv"), &rows)?;
    println!("{} predictions -> {}", rows.len(), out.join("predictions.csv").display());
    Ok(())
}

/// Station ids in first-seen order.
fn ids_in_order(rows: &[PredictionRow]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    rows.iter()
        .filter(|r| seen.insert(r.station_id.clone()))
        .map(|r| r.station_id.clone())
        .collect()
}

fn evaluate(cli: &Cli, a: &EvaluateArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    mf.input(&a.predictions)?;
    mf.input(&a.observed)?;
    let rows = io::read_predictions(&a.predictions)?;
    let ids = ids_in_order(&rows);
    let grouped = io::group_predictions(&rows)?;
    let obs = io::read_scalar_series(&a.observed, &ids, "flow_cms")
        .or_else(|_| io::read_scalar_series(&a.observed, &ids, "flow"))?;
    let hydro = out.join("hydrographs");
    io::create_dir(&hydro)?;
    let mut observed = Vec::with_capacity(ids.len());
    let mut predicted = Vec::with_capacity(ids.len());
    for id in &ids {
        let i = ids.iter().position(|x| x == id).expect("id listed");
        let mut dates = Vec::new();
        let (mut y, mut p) = (Vec::new(), Vec::new());
        for &(date, v) in &grouped[id] {
            let Some(t) = obs.day_of(date) else { continue };
            let o = obs.values[i][t];
            if o.is_finite() && v.is_finite() {
                dates.push(date);
                y.push(o);
                p.push(v);
            }
        }
        if y.is_empty() {
            return Err(CliError::input(format!("station {id}: no predictions overlap observed flow")));
        }
        io::write_table(
            &hydro.join(format!("{id}.csv")),
            &["date", "observed", "predicted"],
            (0..y.len()).map(|t| vec![dates[t].to_string(), y[t].to_string(), p[t].to_string()]),
        )?;
        if a.svg {
            io::write_text(&hydro.join(format!("{id}.svg")), &svg::hydrograph(id, &dates, &y, &p))?;
        }
        observed.push(y);
        predicted.push(p);
    }
    let mut report = metrics::build_report(&ids, &observed, &predicted, &a.task, None)?;
    report.seed = cli.seed;
    report.config_hash = match &cli.config {
        Some(c) => Some(crate::manifest::file_digest(c)?),
        None => None,
    };
    write_report(out, &report)?;
    let m = report.mean;
    println!("NSE {:.4} KGE {:.4} VE {:.4} rho {:.4}", m.nse, m.kge, m.ve, m.rho);
    Ok(())
}

pub fn write_report(out: &Path, report: &MetricsReport) -> Result<()> {
    io::write_json(&out.join("metrics.json"), report)?;
    io::write_table(
        &out.join("metrics.csv"),
        &["station_id", "nse", "kge", "ve", "rho"],
        report.stations.iter().map(|s| {
            vec![
                s.station_id.clone(),
                s.nse.to_string(),
                s.kge.to_string(),
                s.ve.to_string(),
                s.rho.to_string(),
            ]
        }),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub mode: String,
    pub k: usize,
    pub days: usize,
    pub alignment: f64,
    pub random_alignment: Option<f64>,
    pub seed: Option<u64>,
}

fn align(cli: &Cli, a: &AlignArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    mf.input(&a.embeddings)?;
    mf.input(&a.runoff)?;
    let ids = embedding_ids(&a.embeddings)?;
    let emb = io::read_embeddings(&a.embeddings, &ids)?;
    let runoff = io::read_scalar_series(&a.runoff, &ids, "runoff_mm")?;
    // [day][station] over days present and finite in both files
    let mut z: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::new();
    for t in 0..emb.n_days() {
        let Some(u) = runoff.day_of(emb.date(t)) else { continue };
        let zt: Vec<Vec<f64>> = (0..ids.len()).map(|i| emb.values[i][t].clone()).collect();
        let rt: Vec<f64> = (0..ids.len()).map(|i| runoff.values[i][u]).collect();
        if zt.iter().flatten().chain(&rt).all(|v| v.is_finite()) {
            z.push(zt);
            r.push(rt);
        }
    }
    if z.is_empty() {
        return Err(CliError::input("embeddings and runoff share no complete day"));
    }
    let score = |z: &[Vec<Vec<f64>>]| -> Result<(f64, Vec<f64>)> {
        if a.per_station_mean {
            let zm: Vec<Vec<f64>> = (0..ids.len())
                .map(|i| {
                    let d = z[0][i].len();
                    (0..d).map(|c| z.iter().map(|day| day[i][c]).sum::<f64>() / z.len() as f64).collect()
                })
                .collect();
            let rm: Vec<f64> = (0..ids.len())
                .map(|i| r.iter().map(|day| day[i]).sum::<f64>() / r.len() as f64)
                .collect();
            let o = metrics::knn_overlaps(&zm, &rm, a.k)?;
            Ok((o.iter().sum::<f64>() / o.len() as f64, o))
        } else {
            Ok(metrics::knn_alignment_over_days(z, &r, a.k)?)
        }
    };
    let (value, per_station) = score(&z)?;
    let seed = cli.seed.unwrap_or(0);
    let random_alignment = if a.random_baseline {
        Some(score(&random_embeddings(&z, seed))?.0)
    } else {
        None
    };
    let result = AlignmentResult {
        mode: if a.per_station_mean { "per_station_mean" } else { "per_day" }.into(),
        k: a.k,
        days: z.len(),
        alignment: value,
        random_alignment,
        seed: a.random_baseline.then_some(seed),
    };
    io::write_json(&out.join("alignment.json"), &result)?;
    io::write_table(
        &out.join("overlaps.csv"),
        &["station_id", "overlap"],
        ids.iter().zip(&per_station).map(|(id, v)| vec![id.clone(), v.to_string()]),
    )?;
    println!(
        "kNN alignment {value:.4}{}",
        random_alignment.map(|v| format!(" (random {v:.4})")).unwrap_or_default()
    );
    Ok(())
}

fn embedding_ids(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let id = rec.get(0).unwrap_or_default().trim().to_string();
        if seen.insert(id.clone()) {
            ids.push(id);
        }
    }
    Ok(ids)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: String,
    pub seed: u64,
    pub nse: f64,
    pub kge: f64,
    pub ve: f64,
    pub rho: f64,
    pub epochs: usize,
    pub train_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    /// Median over seeds per arm.
    pub median: BTreeMap<String, MeanMetrics>,
}

/// Train every arm for every seed on already loaded inputs.
pub fn ablation_table(
    base: &TrainConfig,
    seeds: &[u64],
    graph: &csf_core::FlowGraph,
    grouping: &csf_core::Grouping,
    data: &csf_core::pipeline::BasinData,
    mut on_row: impl FnMut(&AblationRow),
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for &seed in seeds {
        for arm in Arm::ALL {
            let mut cfg = arm.apply(base);
            cfg.seed = seed;
            let art = workflow::train_and_evaluate(&cfg, graph, grouping, data, None, 10)?;
            let m = art.report.mean;
            let row = AblationRow {
                arm: arm.label().into(),
                seed,
                nse: m.nse,
                kge: m.kge,
                ve: m.ve,
                rho: m.rho,
                epochs: art.outcome.log.len(),
                train_seconds: art.train_seconds,
            };
            on_row(&row);
            rows.push(row);
        }
    }
    let median = Arm::ALL
        .iter()
        .map(|arm| {
            let of = |f: fn(&AblationRow) -> f64| {
                median(&rows.iter().filter(|r| r.arm == arm.label()).map(f).collect::<Vec<_>>())
            };
            (
                arm.label().to_string(),
                MeanMetrics {
                    nse: of(|r| r.nse),
                    kge: of(|r| r.kge),
                    ve: of(|r| r.ve),
                    rho: of(|r| r.rho),
                },
            )
        })
        .collect();
    Ok(AblationTable { rows, median })
}

fn ablate(cli: &Cli, a: &AblateArgs, out: &Path, mf: &mut ManifestBuilder) -> Result<()> {
    let base = train_config(cli)?;
    mf.config_text(&base.to_text());
    let seeds: Vec<u64> = match &a.seeds {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| CliError::input(format!("bad seed {x:?}"))))
            .collect::<Result<_>>()?,
        None => vec![base.seed],
    };
    if seeds.is_empty() {
        return Err(CliError::input("--seeds lists no seed"));
    }
    mf.seed(seeds[0]);
    let inp = load_inputs(&a.data, a.graph.as_ref(), mf)?;
    let table = ablation_table(&base, &seeds, &inp.graph, &inp.grouping, &inp.loaded.data, |r| {
        println!(
            "{:<8} seed {:<3} NSE {:.4} KGE {:.4} VE {:.4} rho {:.4} ({} epochs, {:.1}s)",
            r.arm, r.seed, r.nse, r.kge, r.ve, r.rho, r.epochs, r.train_seconds
        )
    })?;
    io::write_table(
        &out.join("ablation.csv"),
        &["arm", "seed", "nse", "kge", "ve", "rho", "epochs", "train_seconds"],
        table.rows.iter().map(|r| {
            vec![
                r.arm.clone(),
                r.seed.to_string(),
                r.nse.to_string(),
                r.kge.to_string(),
                r.ve.to_string(),
                r.rho.to_string(),
                r.epochs.to_string(),
                format!("{:.3}", r.train_seconds),
            ]
        }),
    )?;
    io::write_json(&out.join("ablation.json"), &table)?;
    Ok(())
}

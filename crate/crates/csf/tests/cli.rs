use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use csf::checkpoint::{load_store, save_store};
use csf::error::CliError;
use csf::io;
use csf::manifest::{file_digest, RunManifest, MANIFEST_FILE};
use csf_core::numcore::{ParamStore, Tensor};
use csf_core::pipeline::{evaluate_split, prepare, PipelineError};
use csf_core::synth::{generate_dataset, ScenarioConfig};
use csf_core::SeedRng;

const SCENARIO: &str = "n_stations = 8\nn_groups = 2\nn_days = 240\nseed = 5\n";
const TRAIN: &str = "epochs = 2\nhidden_dim = 8\nvae_hidden = 8\nlatent_dim = 3\nlookback = 2\nbatch_size = 16\n";

fn csf(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_csf")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let mut full = vec!["csf"];
    full.extend_from_slice(args);
    if let Err(e) = csf::cli::run(full) {
        panic!("{args:?}: {e}");
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(root: &Path) -> PathBuf {
    let cfg = root.join("scenario.txt");
    fs::write(&cfg, SCENARIO).unwrap();
    let data = root.join("data");
    run_ok(&["simulate", "--config", p(&cfg), "--out", p(&data)]);
    data
}

fn train(root: &Path, data: &Path, name: &str) -> PathBuf {
    let cfg = root.join("train.txt");
    fs::write(&cfg, TRAIN).unwrap();
    let out = root.join(name);
    run_ok(&["train", "--config", p(&cfg), "--data", p(data), "--k", "3", "--out", p(&out)]);
    out
}

fn manifest(dir: &Path) -> RunManifest {
    io::read_json(&dir.join(MANIFEST_FILE)).unwrap()
}

fn fixtures(dir: &Path) {
    fs::write(
        dir.join("stations.csv"),
        "id,lat,lon,elevation,huc8,huc4,soil_class\nA,0,0,10,12060001,1206,1\nB,0,1,5,12060001,1206,1\nC,0,2,1,12060001,1206,1\n",
    )
    .unwrap();
    fs::write(dir.join("chain.csv"), "upstream_id,downstream_id\nA,B\nB,C\n").unwrap();
    fs::write(dir.join("cycle.csv"), "upstream_id,downstream_id\nA,B\nB,C\nC,A\n").unwrap();
    fs::write(dir.join("bowl.txt"), "3 3\n5 5 5\n5 1 5\n5 5 5\n").unwrap();
}

#[test]
fn build_graph_chain_cycle_and_bowl() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fixtures(d);
    let out = d.join("chain");
    run_ok(&["build-graph", "--stations", p(&d.join("stations.csv")), "--edges", p(&d.join("chain.csv")), "--out", p(&out)]);
    let report: serde_json::Value = io::read_json(&out.join("report.json")).unwrap();
    assert_eq!(report["edges"], 2);
    assert_eq!(report["acyclic"], true);
    for f in ["stations.csv", "edges.csv", "aggregation.csv", "grouping.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let cyc = csf(&["build-graph", "--stations", p(&d.join("stations.csv")), "--edges", p(&d.join("cycle.csv")), "--out", p(&d.join("cyc"))]);
    assert_eq!(cyc.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cyc.stderr).contains("CycleDetected"));

    let bowl = d.join("bowl");
    run_ok(&["build-graph", "--dem", p(&d.join("bowl.txt")), "--out", p(&bowl)]);
    let edges = io::read_edges(&bowl.join("edges.csv")).unwrap();
    assert_eq!(edges.len(), 8);
    assert!(edges.iter().all(|(_, down)| down == "r1c1"));
}

#[test]
fn simulated_files_round_trip_exactly() {
    let t = tempfile::tempdir().unwrap();
    let data = simulate(t.path());
    let ds = generate_dataset(&ScenarioConfig::parse(SCENARIO).unwrap());
    let ids: Vec<String> = ds.scenario.graph.stations().iter().map(|s| s.id.clone()).collect();
    let loaded = io::read_basin_data(&data, &ids).unwrap();
    assert_eq!(loaded.start, io::SYNTHETIC_START);
    let bits = |v: &[Vec<f64>]| v.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&loaded.data.flow), bits(&ds.flow));
    assert_eq!(loaded.data.forcings, ds.forcings);
    let runoff = io::read_scalar_series(&data.join("runoff_truth.csv"), &ids, "runoff_mm").unwrap();
    assert_eq!(bits(&runoff.values), bits(&ds.runoff));
    assert_eq!(io::read_stations(&data.join("stations.csv")).unwrap(), ds.scenario.graph.stations());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let t = tempfile::tempdir().unwrap();
    let mut rng = SeedRng::new(3);
    let mut store = ParamStore::new();
    for (name, shape) in [("a.w", vec![3, 4]), ("a.b", vec![1, 4]), ("s", vec![])] {
        let n: usize = shape.iter().product();
        let mut data: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 1e3).collect();
        if let Some(x) = data.first_mut() {
            *x = f64::MIN_POSITIVE / 3.0;
        }
        store.add(name, Tensor::new(shape, data).unwrap());
    }
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        fs::create_dir(d).unwrap();
        save_store(d, &store, None, None).unwrap();
    }
    let (_, back) = load_store(&a).unwrap();
    assert_eq!(back.len(), store.len());
    for ((_, n1, t1), (_, n2, t2)) in store.iter().zip(back.iter()) {
        assert_eq!(n1, n2);
        assert_eq!(t1.shape(), t2.shape());
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(t1), bits(t2));
    }
    for f in ["checkpoint.json", "params.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_forecast_evaluate_align() {
    let t = tempfile::tempdir().unwrap();
    let root = t.path();
    let data = simulate(root);
    let run1 = train(root, &data, "run1");
    let run2 = train(root, &data, "run2");
    for f in ["checkpoint.json", "params.bin", "training_log.jsonl", "model.json", "metrics.json", "embeddings.csv"] {
        assert_eq!(fs::read(run1.join(f)).unwrap(), fs::read(run2.join(f)).unwrap(), "{f} differs");
    }
    let log = csf::run::read_log(&run1.join("training_log.jsonl")).unwrap();
    assert_eq!(log.len(), 2);

    // manifests: one per directory, digests match the inputs
    let m = manifest(&run1);
    assert_eq!(m.command, "train");
    let fc = data.join("forcings.csv").display().to_string();
    assert_eq!(m.inputs[&fc], file_digest(&data.join("forcings.csv")).unwrap());
    assert!(m.outputs.contains(&"params.bin".to_string()));
    assert!(!m.outputs.contains(&MANIFEST_FILE.to_string()));

    // horizon 1 is the first step of horizon 3
    let f1 = root.join("f1");
    let f3 = root.join("f3");
    let origin = "2000-06-01";
    run_ok(&["forecast", "--run", p(&run1), "--data", p(&data), "--origin", origin, "--horizon", "1", "--out", p(&f1)]);
    run_ok(&["forecast", "--run", p(&run1), "--data", p(&data), "--origin", origin, "--horizon", "3", "--targets", "S002,S001", "--out", p(&f3)]);
    let r1 = io::read_predictions(&f1.join("predictions.csv")).unwrap();
    let r3 = io::read_predictions(&f3.join("predictions.csv")).unwrap();
    assert_eq!(r3.len(), 6);
    for id in ["S001", "S002"] {
        let a = r1.iter().find(|r| r.station_id == id).unwrap();
        let b = r3.iter().find(|r| r.station_id == id).unwrap();
        assert_eq!(a.date, b.date);
        assert_eq!(a.flow.to_bits(), b.flow.to_bits());
    }

    // split forecasts agree with the batched evaluation path
    let ft = root.join("ft");
    run_ok(&["forecast", "--run", p(&run1), "--data", p(&data), "--split", "test", "--out", p(&ft)]);
    let rows = io::read_predictions(&ft.join("predictions.csv")).unwrap();
    let (model, meta) = csf::run::load_model(&run1).unwrap();
    let (graph, _) = csf::workflow::load_graph(&data).unwrap();
    let loaded = io::read_basin_data(&data, &meta.station_ids).unwrap();
    let (prepared, split) = prepare(&model.config, &loaded.data, &graph).unwrap();
    let ev = evaluate_split(&model, &prepared, split.test.clone()).unwrap();
    let per_station = ev.days.len();
    assert_eq!(rows.len(), per_station * meta.station_ids.len());
    for (i, id) in meta.station_ids.iter().enumerate() {
        let mine: Vec<_> = rows.iter().filter(|r| &r.station_id == id).collect();
        for (k, r) in mine.iter().enumerate() {
            assert_eq!(r.date, io::day_offset(loaded.start, ev.days[k]));
            assert!((r.flow - ev.predicted[i][k]).abs() <= 1e-9 * (1.0 + r.flow.abs()));
        }
    }

    // observed against itself scores 1 everywhere
    let obs = root.join("obs_as_pred.csv");
    let text = fs::read_to_string(data.join("streamflow.csv")).unwrap().replacen("flow_cms", "flow", 1);
    fs::write(&obs, text).unwrap();
    let ev_dir = root.join("ev");
    run_ok(&["evaluate", "--predictions", p(&obs), "--observed", p(&data.join("streamflow.csv")), "--svg", "--out", p(&ev_dir)]);
    let rep: csf_core::metrics::MetricsReport = io::read_json(&ev_dir.join("metrics.json")).unwrap();
    for s in &rep.stations {
        assert_eq!((s.nse, s.kge, s.ve, s.rho), (1.0, 1.0, 1.0, 1.0), "{}", s.station_id);
    }
    assert!(ev_dir.join("hydrographs/S001.csv").exists());
    assert!(fs::read_to_string(ev_dir.join("hydrographs/S001.svg")).unwrap().starts_with("<svg"));
    let csv = fs::read_to_string(ev_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("station_id,nse,kge,ve,rho\n"));

    // alignment over the exported embeddings
    let al = root.join("al");
    run_ok(&["align", "--embeddings", p(&run1.join("embeddings.csv")), "--runoff", p(&data.join("runoff_truth.csv")), "--k", "3", "--random-baseline", "--out", p(&al)]);
    let res: csf::commands::AlignmentResult = io::read_json(&al.join("alignment.json")).unwrap();
    assert!((0.0..=1.0).contains(&res.alignment));
    assert_eq!(res.days, split.test.len());
    let from_train: csf_core::metrics::MetricsReport = io::read_json(&run1.join("metrics.json")).unwrap();
    assert!(from_train.knn_alignment.is_some());
    let overlaps = fs::read_to_string(al.join("overlaps.csv")).unwrap();
    assert_eq!(overlaps.lines().count(), 1 + meta.station_ids.len());

    for dir in [&data, &run1, &f1, &f3, &ft, &ev_dir, &al] {
        let n = fs::read_dir(dir)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() == MANIFEST_FILE)
            .count();
        assert_eq!(n, 1, "{}", dir.display());
    }
}

#[test]
fn ablate_writes_four_arms() {
    let t = tempfile::tempdir().unwrap();
    let root = t.path();
    let data = simulate(root);
    let cfg = root.join("train.txt");
    fs::write(&cfg, TRAIN.replace("epochs = 2", "epochs = 1")).unwrap();
    let out = root.join("ab");
    run_ok(&["ablate", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    let table: csf::commands::AblationTable = io::read_json(&out.join("ablation.json")).unwrap();
    let arms: Vec<&str> = table.rows.iter().map(|r| r.arm.as_str()).collect();
    assert_eq!(arms, ["Vanilla", "+HN", "+RG", "+HN+RG"]);
    assert_eq!(table.median.len(), 4);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let t = tempfile::tempdir().unwrap();
    let root = t.path();
    let data = simulate(root);
    let cfg = root.join("typo.txt");
    fs::write(&cfg, "epochs = 1\nlamda = 0.2\n").unwrap();
    let out = csf(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&root.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    let missing = csf(&["train", "--data", p(&root.join("nope")), "--out", p(&root.join("y"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(csf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(csf(&["simulate"]).status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_class() {
    let diverged: CliError = PipelineError::NonFinite {
        epoch: 3,
        detail: "loss".into(),
    }
    .into();
    assert_eq!(diverged.exit_code(), 3);
    let nan: CliError = PipelineError::Num(csf_core::numcore::NumError::NonFinite { op: "exp" }).into();
    assert_eq!(nan.exit_code(), 3);
    let shape: CliError = PipelineError::Num(csf_core::numcore::NumError::ShapeMismatch {
        op: "matmul",
        detail: "[1, 2] x [3, 4]".into(),
    })
    .into();
    assert_eq!(shape.exit_code(), 4);
    assert_eq!(CliError::input("x").exit_code(), 2);
}

use std::collections::BTreeSet;

use csf_core::flowgraph::{aggregation_matrix, causal_adjacency, upstream_closure, FlowGraph, Station};
use csf_core::numcore::{check_param_gradients, Adam, AdamConfig, OptimizerState, ParamStore, SparseMatrix, Tape, Tensor};
use csf_core::stgcn::{Activation, BasinModel, FeatureLayout, StgcnConfig, StgcnError};
use csf_core::vae::{elbo_loss_tape, kl_divergence, reparameterize_tape, standard_normal_like, VaeDims, VaeParams};
use csf_core::SeedRng;
use proptest::prelude::*;

fn station(i: usize) -> Station {
    Station {
        id: format!("s{i}"),
        lat: 30.0 + i as f64 * 0.01,
        lon: -97.0,
        elevation: 100.0,
        huc8: "12060001".into(),
        huc4: "1206".into(),
        soil_class: 1,
    }
}

/// Random forest: node `i > 0` drains into a lower index with probability 0.8.
fn random_forest(n: usize, rng: &mut SeedRng) -> FlowGraph {
    let edges = (1..n)
        .filter_map(|i| (rng.uniform() < 0.8).then(|| (i, rng.below(i))))
        .collect();
    FlowGraph::from_index_edges((0..n).map(station).collect(), edges).unwrap()
}

fn causal_m(g: &FlowGraph) -> SparseMatrix {
    aggregation_matrix(&causal_adjacency(g), true, true)
}

fn small_config(latent: usize) -> StgcnConfig {
    StgcnConfig {
        hidden: 6,
        ..StgcnConfig::new(FeatureLayout {
            latent_dim: latent,
            forcings: 2,
        })
    }
}

fn random_window(time: usize, n: usize, f: usize, rng: &mut SeedRng) -> Tensor {
    let data = (0..time * n * f).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    Tensor::new(vec![time * n, f], data).unwrap()
}

fn model(n_seed: u64, g: &FlowGraph, config: StgcnConfig) -> (ParamStore, BasinModel) {
    let mut store = ParamStore::new();
    let mut rng = SeedRng::new(n_seed);
    let m = BasinModel::init(&mut store, "basin", config, causal_m(g), &mut rng);
    // random biases, so zero inputs do not produce zero hidden states
    for id in m.param_ids() {
        if store.name(id).ends_with(".b") {
            store
                .get_mut(id)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.uniform_range(-0.3, 0.3));
        }
    }
    (store, m)
}

#[test]
fn vae_elbo_gradients_match_finite_differences() {
    let dims = VaeDims {
        input_dim: 5,
        hidden_dim: 4,
        latent_dim: 3,
    };
    for seed in 0..3 {
        let mut store = ParamStore::new();
        let mut rng = SeedRng::new(seed);
        let vae = VaeParams::init(&mut store, "vae", dims, &mut rng);
        let x = random_window(4, 1, 5, &mut rng);
        let eps = standard_normal_like(&[4, 3], &mut rng);
        let report = check_param_gradients(&store, 1e-5, |tape| {
            let xv = tape.constant(x.clone());
            let (mu, lv) = vae.encode_tape(tape, xv)?;
            let z = reparameterize_tape(tape, mu, lv, eps.clone())?;
            let x_hat = vae.decode_tape(tape, z)?;
            elbo_loss_tape(tape, xv, x_hat, mu, lv, 0.7)
        })
        .unwrap();
        assert!(report.passes(1e-4), "seed {seed}: {report:?}");
    }
}

#[test]
fn vae_training_lowers_elbo() {
    let dims = VaeDims {
        input_dim: 6,
        hidden_dim: 32,
        latent_dim: 4,
    };
    let mut store = ParamStore::new();
    let mut rng = SeedRng::new(11);
    let vae = VaeParams::init(&mut store, "vae", dims, &mut rng);
    let x = random_window(64, 1, 6, &mut rng);
    let eps = standard_normal_like(&[64, 4], &mut SeedRng::new(12));
    let loss_of = |store: &ParamStore| {
        let mut tape = Tape::with_params(store);
        let xv = tape.constant(x.clone());
        let (mu, lv) = vae.encode_tape(&mut tape, xv).unwrap();
        let z = reparameterize_tape(&mut tape, mu, lv, eps.clone()).unwrap();
        let x_hat = vae.decode_tape(&mut tape, z).unwrap();
        let loss = elbo_loss_tape(&mut tape, xv, x_hat, mu, lv, 1.0).unwrap();
        (tape.value(loss).item(), tape.backward(loss).unwrap().into_params())
    };
    let initial = loss_of(&store).0;
    let mut state = OptimizerState::new(AdamConfig::default(), &store);
    for _ in 0..200 {
        let (_, grads) = loss_of(&store);
        Adam::step(&mut store, &grads, &mut state, &|_| false).unwrap();
    }
    let last = loss_of(&store).0;
    assert!(last < initial, "{initial} -> {last}");
}

#[test]
fn stgcn_gradients_on_four_node_graph() {
    // 0 -> 2, 1 -> 2, 2 -> 3
    let g = FlowGraph::from_index_edges((0..4).map(station).collect(), vec![(0, 2), (1, 2), (2, 3)]).unwrap();
    let (store, model) = model(3, &g, small_config(2));
    let mut rng = SeedRng::new(4);
    let x = random_window(2 * 5, 4, 5, &mut rng);
    let y = random_window(2, 4, 1, &mut rng);
    let report = check_param_gradients(&store, 1e-5, |tape| {
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let out = model.forward_tape(tape, xv, 2, 5, &model.m).map_err(|e| match e {
            StgcnError::Num(n) => n,
            other => panic!("{other}"),
        })?;
        tape.mse(out, yv)
    });
    let report = report.unwrap();
    assert!(report.passes(1e-4), "{report:?}");
}

#[test]
fn forward_shape_short_task() {
    let mut rng = SeedRng::new(5);
    let g = random_forest(73, &mut rng);
    let cfg = StgcnConfig::new(FeatureLayout {
        latent_dim: 8,
        forcings: 4,
    });
    let (store, model) = model(6, &g, cfg);
    let out = model.forward(&store, &random_window(7, 73, 13, &mut rng)).unwrap();
    assert_eq!(out.shape(), &[73, 1]);
    let wrong = random_window(7, 73, 12, &mut rng);
    assert!(matches!(model.forward(&store, &wrong), Err(StgcnError::Num(_))));
}

#[test]
fn single_node_graph_is_a_temporal_model() {
    let g = FlowGraph::from_index_edges(vec![station(0)], vec![]).unwrap();
    let (store, model) = model(7, &g, small_config(0));
    let w = random_window(6, 1, 3, &mut SeedRng::new(1));
    let a = model.forward(&store, &w).unwrap();
    let b = model.forward_with(&store, &w, &SparseMatrix::identity(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn masked_inference_touches_closure_only() {
    // 5-node tree: 0,1 -> 2; 3 -> 4; 2 -> 4
    let g = FlowGraph::from_index_edges((0..5).map(station).collect(), vec![(0, 2), (1, 2), (3, 4), (2, 4)]).unwrap();
    let (store, model) = model(8, &g, small_config(1));
    let w = random_window(7, 5, 4, &mut SeedRng::new(2));
    let head = model.masked_inference(&store, &w, &BTreeSet::from([0])).unwrap();
    assert_eq!(head.nodes, vec![0]);
    let outlet = model.masked_inference(&store, &w, &BTreeSet::from([4])).unwrap();
    assert_eq!(outlet.nodes.len(), 5);
    assert_eq!(
        model.masked_inference(&store, &w, &BTreeSet::new()),
        Err(StgcnError::EmptyTargets)
    );
}

#[test]
fn masked_inference_matches_full_forward() {
    let mut rng = SeedRng::new(9);
    let g = random_forest(30, &mut rng);
    let (store, model) = model(10, &g, small_config(2));
    let w = random_window(7, 30, 5, &mut rng);
    let full = model.forward(&store, &w).unwrap();
    for _ in 0..20 {
        let targets: BTreeSet<usize> = (0..1 + rng.below(4)).map(|_| rng.below(30)).collect();
        let masked = model.masked_inference(&store, &w, &targets).unwrap();
        assert_eq!(masked.nodes, upstream_closure(&g, &targets).into_iter().collect::<Vec<_>>());
        for (t, p) in masked.predictions {
            assert!((p[0] - full.data()[t]).abs() <= 1e-9);
        }
    }
}

fn permuted(m: &SparseMatrix, perm: &[usize]) -> SparseMatrix {
    // node i becomes perm[i]
    let mut out = SparseMatrix::new(m.n_rows(), m.n_cols());
    for i in 0..m.n_rows() {
        for &(j, v) in m.row(i) {
            out.set(perm[i], perm[j], v);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perturbing_outside_closure_changes_nothing(seed in 0u64..10_000, n in 2usize..20) {
        let mut rng = SeedRng::new(seed);
        let g = random_forest(n, &mut rng);
        let (store, model) = model(seed + 1, &g, small_config(1));
        let f = model.config.features.width();
        let w = random_window(6, n, f, &mut rng);
        let base = model.forward(&store, &w).unwrap();
        let target = rng.below(n);
        let closure = upstream_closure(&g, &BTreeSet::from([target]));
        let outside: Vec<usize> = (0..n).filter(|v| !closure.contains(v)).collect();
        prop_assume!(!outside.is_empty());
        let v = outside[rng.below(outside.len())];
        let mut w2 = w.clone();
        let (t, c) = (rng.below(6), rng.below(f));
        w2.data_mut()[(t * n + v) * f + c] += rng.uniform_range(-50.0, 50.0);
        let out = model.forward(&store, &w2).unwrap();
        prop_assert_eq!(out.data()[target].to_bits(), base.data()[target].to_bits());
    }

    #[test]
    fn relabelling_nodes_permutes_predictions(seed in 0u64..10_000, n in 2usize..12) {
        let mut rng = SeedRng::new(seed);
        let g = random_forest(n, &mut rng);
        let (store, model) = model(seed + 2, &g, small_config(0));
        let f = model.config.features.width();
        let w = random_window(5, n, f, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let mut pw = vec![0.0; w.len()];
        for t in 0..5 {
            for i in 0..n {
                let (src, dst) = ((t * n + i) * f, (t * n + perm[i]) * f);
                pw[dst..dst + f].copy_from_slice(&w.data()[src..src + f]);
            }
        }
        let pw = Tensor::new(w.shape().to_vec(), pw).unwrap();
        let a = model.forward(&store, &w).unwrap();
        let b = model.forward_with(&store, &pw, &permuted(&model.m, &perm)).unwrap();
        for i in 0..n {
            prop_assert!((a.data()[i] - b.data()[perm[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_is_nonnegative(mu in prop::collection::vec(-5.0f64..5.0, 1..6), lv in prop::collection::vec(-8.0f64..8.0, 6)) {
        let lv = &lv[..mu.len()];
        let kl = kl_divergence(&mu, lv);
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_divergence(&vec![0.0; mu.len()], &vec![0.0; mu.len()]), 0.0);
        if mu.iter().chain(lv).any(|v| v.abs() > 1e-3) {
            prop_assert!(kl > 1e-12);
        }
    }
}

#[test]
fn linear_activation_is_available() {
    let g = FlowGraph::from_index_edges((0..2).map(station).collect(), vec![(0, 1)]).unwrap();
    let cfg = StgcnConfig {
        activation: Activation::Linear,
        ..small_config(0)
    };
    let (store, model) = model(1, &g, cfg);
    // linear model: forward is affine in the window
    let mut rng = SeedRng::new(3);
    let a = random_window(4, 2, 3, &mut rng);
    let b = random_window(4, 2, 3, &mut rng);
    let zero = Tensor::zeros(&[8, 3]);
    let sum = Tensor::new(vec![8, 3], a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect()).unwrap();
    let f = |w: &Tensor| model.forward(&store, w).unwrap().into_data();
    let (fa, fb, f0, fs) = (f(&a), f(&b), f(&zero), f(&sum));
    for i in 0..2 {
        assert!((fs[i] - (fa[i] + fb[i] - f0[i])).abs() < 1e-12);
    }
}

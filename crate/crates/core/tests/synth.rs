use std::collections::BTreeSet;

use csf_core::flowgraph::{hierarchical_groups, upstream_closure, FlowGraph, Station};
use csf_core::synth::*;
use proptest::prelude::*;

fn station(i: usize) -> Station {
    Station {
        id: format!("s{i}"),
        lat: 0.0,
        lon: i as f64,
        elevation: 0.0,
        huc8: "00000001".into(),
        huc4: "0000".into(),
        soil_class: 0,
    }
}

fn hand_scenario(n: usize, edges: Vec<(usize, usize)>, kappa: f64) -> BasinScenario {
    let stations: Vec<Station> = (0..n).map(station).collect();
    BasinScenario {
        grouping: hierarchical_groups(&stations).unwrap(),
        graph: FlowGraph::from_index_edges(stations, edges).unwrap(),
        kappa: vec![kappa; n],
        runoff_fraction: vec![1.0; n],
        area: vec![1.0; n],
        delay: vec![1; n],
        alpha: vec![1.0; n],
        et_coeff: 0.0,
        weather: WeatherConfig::default(),
        seed: 0,
    }
}

fn precip_only(rows: &[Vec<f64>]) -> Forcings {
    rows.iter()
        .map(|r| r.iter().map(|&p| [p, 20.0, 10.0, 3.0]).collect())
        .collect()
}

#[test]
fn single_station_basin() {
    let s = generate_basin(&ScenarioConfig {
        n_stations: 1,
        n_groups: 1,
        ..Default::default()
    });
    assert_eq!(s.graph.len(), 1);
    assert!(s.graph.edges().is_empty());
    assert_eq!(s.graph.outlets(), vec![0]);
}

#[test]
fn default_basin_shape() {
    for seed in 0..20 {
        let cfg = ScenarioConfig {
            seed,
            ..Default::default()
        };
        let s = generate_basin(&cfg);
        assert_eq!(s.graph.len(), 30);
        assert_eq!(s.graph.outlets().len(), 3);
        for (g, &size) in s.grouping.histogram().iter().enumerate() {
            assert!((5..=15).contains(&size), "seed {seed}: group size {size}");
            let outlets: BTreeSet<usize> = s.grouping.members(g).iter().map(|&i| s.graph.outlet_of(i)).collect();
            assert_eq!(outlets.len(), 1, "one tree per group");
        }
        assert!(s.kappa.iter().all(|k| (0.2..=0.6).contains(k)));
        assert!(s.alpha.iter().all(|a| (0.8..=1.0).contains(a)));
        assert!(s.delay.iter().all(|d| [1, 2].contains(d)));
        assert_eq!(s, generate_basin(&cfg));
    }
}

#[test]
fn some_cross_group_pairs_are_closer_than_intra_group_pairs() {
    let s = generate_basin(&ScenarioConfig::default());
    let st = s.graph.stations();
    let d = |i: usize, j: usize| ((st[i].lat - st[j].lat).powi(2) + (st[i].lon - st[j].lon).powi(2)).sqrt();
    let n = st.len();
    let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    let max_intra = pairs.clone().filter(|&(i, j)| s.grouping.same_group(i, j)).map(|(i, j)| d(i, j)).fold(0.0, f64::max);
    let min_cross = pairs.filter(|&(i, j)| !s.grouping.same_group(i, j)).map(|(i, j)| d(i, j)).fold(f64::MAX, f64::min);
    assert!(min_cross < max_intra);
}

#[test]
fn forcing_support_and_wet_frequency() {
    let s = generate_basin(&ScenarioConfig::default());
    let f = generate_forcings(&s, 3650);
    let target = s.weather.wet_fraction();
    for series in &f {
        assert!(series.iter().all(|d| d[PRECIP] >= 0.0 && d[TMAX] > d[TMIN] && d[WIND] > 0.0));
        let wet = series.iter().filter(|d| d[PRECIP] > 0.0).count() as f64 / 3650.0;
        assert!((wet - target).abs() <= 0.05, "wet fraction {wet} vs {target}");
    }
    assert_eq!(f, generate_forcings(&s, 3650));
}

#[test]
fn reservoir_examples() {
    let s = hand_scenario(1, vec![], 0.3);
    assert!(simulate_runoff(&s, &precip_only(&[vec![0.0; 50]]))[0].iter().all(|&r| r == 0.0));

    let mut p = vec![0.0; 400];
    p[0] = 1.0;
    let r = &simulate_runoff(&s, &precip_only(&[p.clone()]))[0];
    // the pulse enters storage on day 0 and is released from day 1 on
    assert_eq!(r[0], 0.0);
    for t in 1..30 {
        assert!((r[t] - 0.3 * 0.7f64.powi(t as i32 - 1)).abs() < 1e-15);
    }
    assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let s1 = hand_scenario(1, vec![], 1.0);
    let p: Vec<f64> = (0..20).map(|t| ((t * 7) % 5) as f64).collect();
    let r = &simulate_runoff(&s1, &precip_only(&[p.clone()]))[0];
    assert_eq!(r[0], 0.0);
    for t in 0..19 {
        assert_eq!(r[t + 1], p[t]);
    }
}

#[test]
fn routing_examples() {
    // A(0) -> B(1)
    let mut s = hand_scenario(2, vec![(0, 1)], 0.5);
    s.area = vec![2.5, 1.0];
    let r_a: Vec<f64> = (0..10).map(|t| (t as f64).sin().abs()).collect();
    let q = route_streamflow(&s, &[r_a.clone(), vec![0.0; 10]]);
    for t in 0..10 {
        assert_eq!(q[0][t], 2.5 * r_a[t]);
    }
    assert_eq!(q[1][0], 0.0);
    for t in 1..10 {
        assert_eq!(q[1][t], q[0][t - 1]);
    }
}

fn conservative(seed: u64) -> (BasinScenario, ScenarioConfig) {
    let cfg = ScenarioConfig {
        alpha_range: (1.0, 1.0),
        et_coeff: 0.0,
        seed,
        ..Default::default()
    };
    (generate_basin(&cfg), cfg)
}

#[test]
fn mass_is_conserved_after_drain_out() {
    let (s, cfg) = conservative(42);
    let mut f = generate_forcings(&s, cfg.n_days);
    let extra = drain_out_days(&s, 1e-15);
    for series in &mut f {
        series.extend(std::iter::repeat_n([0.0, 20.0, 10.0, 3.0], extra));
    }
    let r = simulate_runoff(&s, &f);
    let q = route_streamflow(&s, &r);
    let outlet_volume: f64 = s.graph.outlets().iter().map(|&o| q[o].iter().sum::<f64>()).sum();
    let runoff_volume: f64 = (0..s.graph.len()).map(|i| s.area[i] * r[i].iter().sum::<f64>()).sum();
    let rain_volume: f64 = (0..s.graph.len())
        .map(|i| s.area[i] * s.runoff_fraction[i] * f[i].iter().map(|d| d[PRECIP]).sum::<f64>())
        .sum();
    assert!((outlet_volume - runoff_volume).abs() <= 1e-9 * runoff_volume);
    assert!((outlet_volume - rain_volume).abs() <= 1e-9 * rain_volume);
}

#[test]
fn streamflow_is_nonnegative_and_deterministic() {
    let cfg = ScenarioConfig::default();
    let a = generate_dataset(&cfg);
    assert!(a.flow.iter().flatten().all(|&q| q >= 0.0));
    assert!(a.runoff.iter().flatten().all(|&r| r >= 0.0));
    assert_eq!(a, generate_dataset(&cfg));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn perturbing_outside_the_closure_leaves_flow_untouched(seed in 0u64..1000, target in 0usize..30, day in 0usize..200, bump in 0.1f64..30.0) {
        let cfg = ScenarioConfig { n_days: 200, seed, ..Default::default() };
        let data = generate_dataset(&cfg);
        let s = &data.scenario;
        let closure = upstream_closure(&s.graph, &BTreeSet::from([target]));
        let outside: Vec<usize> = (0..30).filter(|v| !closure.contains(v)).collect();
        prop_assume!(!outside.is_empty());
        let mut f = data.forcings.clone();
        let v = outside[(seed as usize) % outside.len()];
        f[v][day][PRECIP] += bump;
        f[v][day][TMAX] += bump;
        let q = route_streamflow(s, &simulate_runoff(s, &f));
        prop_assert!(q[target].iter().zip(&data.flow[target]).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn scenario_text_round_trip() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_days = 365;
    cfg.delays = vec![1, 3];
    cfg.seed = 7;
    assert_eq!(ScenarioConfig::parse(&cfg.to_text()).unwrap(), cfg);
    assert_eq!(
        ScenarioConfig::parse("n_statoins = 3"),
        Err(ScenarioError::UnknownKey("n_statoins".into()))
    );
    assert!(matches!(ScenarioConfig::parse("n_groups = 0"), Err(ScenarioError::Invalid(_))));
    assert!(matches!(ScenarioConfig::parse("delays = 0,1"), Err(ScenarioError::Invalid(_))));
}

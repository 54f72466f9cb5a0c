//! Synthetic basins with known ground truth.
//!
//! Each HUC8-like group holds one drainage tree. Weather follows a wet/dry
//! Markov chain shared within a group, runoff comes from a linear
//! reservoir per station and streamflow is routed down the tree with
//! per-edge delay and attenuation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::flowgraph::{hierarchical_groups, FlowGraph, Grouping, Station};
use crate::math;
use crate::rng::{streams, SeedRng};

/// Forcing columns in file order.
pub const N_FORCINGS: usize = 4;
pub const PRECIP: usize = 0;
pub const TMAX: usize = 1;
pub const TMIN: usize = 2;
pub const WIND: usize = 3;

/// `forcings[station][day] = [precip_mm, tmax_c, tmin_c, wind_ms]`.
pub type Forcings = Vec<Vec<[f64; N_FORCINGS]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherConfig {
    /// P(wet today | dry yesterday).
    pub p_wet_after_dry: f64,
    /// P(wet today | wet yesterday).
    pub p_wet_after_wet: f64,
    pub gamma_shape: f64,
    pub gamma_scale_mm: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            p_wet_after_dry: 0.2,
            p_wet_after_wet: 0.6,
            gamma_shape: 0.8,
            gamma_scale_mm: 12.0,
        }
    }
}

impl WeatherConfig {
    /// Stationary wet-day probability of the two-state chain.
    pub fn wet_fraction(&self) -> f64 {
        self.p_wet_after_dry / (self.p_wet_after_dry + 1.0 - self.p_wet_after_wet)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_stations: usize,
    pub n_groups: usize,
    pub n_days: usize,
    pub kappa_range: (f64, f64),
    pub delays: Vec<usize>,
    pub alpha_range: (f64, f64),
    pub runoff_fraction_range: (f64, f64),
    pub area_range: (f64, f64),
    /// Evaporative loss coefficient ε per °C of tmax; 0 disables it.
    pub et_coeff: f64,
    pub weather: WeatherConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_stations: 30,
            n_groups: 3,
            n_days: 2000,
            kappa_range: (0.2, 0.6),
            delays: vec![1, 2],
            alpha_range: (0.8, 1.0),
            runoff_fraction_range: (0.3, 0.9),
            area_range: (0.5, 2.0),
            et_coeff: 0.02,
            weather: WeatherConfig::default(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for scenario key {key}")]
    BadValue { key: String, value: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Keys accepted by [`ScenarioConfig::set`].
pub const SCENARIO_KEYS: &[&str] = &[
    "n_stations",
    "n_groups",
    "n_days",
    "kappa_min",
    "kappa_max",
    "delays",
    "alpha_min",
    "alpha_max",
    "runoff_fraction_min",
    "runoff_fraction_max",
    "area_min",
    "area_max",
    "et_coeff",
    "p_wet_after_dry",
    "p_wet_after_wet",
    "gamma_shape",
    "gamma_scale_mm",
    "seed",
];

impl ScenarioConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ScenarioError> {
        fn num<T: core::str::FromStr>(key: &str, v: &str) -> Result<T, ScenarioError> {
            v.parse().map_err(|_| ScenarioError::BadValue {
                key: key.into(),
                value: v.into(),
            })
        }
        match key {
            "n_stations" => self.n_stations = num(key, v)?,
            "n_groups" => self.n_groups = num(key, v)?,
            "n_days" => self.n_days = num(key, v)?,
            "kappa_min" => self.kappa_range.0 = num(key, v)?,
            "kappa_max" => self.kappa_range.1 = num(key, v)?,
            "delays" => {
                self.delays = v
                    .split(',')
                    .map(|d| num(key, d.trim()))
                    .collect::<Result<Vec<usize>, _>>()?
            }
            "alpha_min" => self.alpha_range.0 = num(key, v)?,
            "alpha_max" => self.alpha_range.1 = num(key, v)?,
            "runoff_fraction_min" => self.runoff_fraction_range.0 = num(key, v)?,
            "runoff_fraction_max" => self.runoff_fraction_range.1 = num(key, v)?,
            "area_min" => self.area_range.0 = num(key, v)?,
            "area_max" => self.area_range.1 = num(key, v)?,
            "et_coeff" => self.et_coeff = num(key, v)?,
            "p_wet_after_dry" => self.weather.p_wet_after_dry = num(key, v)?,
            "p_wet_after_wet" => self.weather.p_wet_after_wet = num(key, v)?,
            "gamma_shape" => self.weather.gamma_shape = num(key, v)?,
            "gamma_scale_mm" => self.weather.gamma_scale_mm = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            _ => return Err(ScenarioError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Flat `key = value` text over the defaults, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut cfg = Self::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ScenarioError::Invalid(format!("expected key = value, got {line:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: String| Err(ScenarioError::Invalid(m));
        let within = |(lo, hi): (f64, f64), a: f64, b: f64| lo <= hi && lo > a && hi <= b;
        if self.n_groups == 0 || self.n_stations < self.n_groups {
            return fail(format!("need n_stations ≥ n_groups ≥ 1, got {} and {}", self.n_stations, self.n_groups));
        }
        if self.n_days == 0 {
            return fail("n_days must be positive".into());
        }
        if !within(self.kappa_range, 0.0, 1.0) {
            return fail("kappa range must lie in (0, 1]".into());
        }
        if !within(self.alpha_range, 0.0, 1.0) || !within(self.runoff_fraction_range, 0.0, 1.0) {
            return fail("alpha and runoff fraction ranges must lie in (0, 1]".into());
        }
        if !within(self.area_range, 0.0, f64::INFINITY) {
            return fail("area range must be positive".into());
        }
        if self.delays.is_empty() || self.delays.contains(&0) {
            return fail("delays must be a non-empty list of whole days ≥ 1".into());
        }
        let w = &self.weather;
        if !(0.0..=1.0).contains(&w.p_wet_after_dry) || !(0.0..=1.0).contains(&w.p_wet_after_wet) {
            return fail("wet/dry transition probabilities must lie in [0, 1]".into());
        }
        if !(w.gamma_shape > 0.0 && w.gamma_scale_mm > 0.0 && self.et_coeff >= 0.0) {
            return fail("gamma parameters must be positive and et_coeff non-negative".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let d: Vec<String> = self.delays.iter().map(|d| format!("{d}")).collect();
        let values: [String; 18] = [
            format!("{}", self.n_stations),
            format!("{}", self.n_groups),
            format!("{}", self.n_days),
            format!("{}", self.kappa_range.0),
            format!("{}", self.kappa_range.1),
            d.join(","),
            format!("{}", self.alpha_range.0),
            format!("{}", self.alpha_range.1),
            format!("{}", self.runoff_fraction_range.0),
            format!("{}", self.runoff_fraction_range.1),
            format!("{}", self.area_range.0),
            format!("{}", self.area_range.1),
            format!("{}", self.et_coeff),
            format!("{}", self.weather.p_wet_after_dry),
            format!("{}", self.weather.p_wet_after_wet),
            format!("{}", self.weather.gamma_shape),
            format!("{}", self.weather.gamma_scale_mm),
            format!("{}", self.seed),
        ];
        SCENARIO_KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinScenario {
    pub graph: FlowGraph,
    pub grouping: Grouping,
    /// Reservoir storage coefficient per station, day⁻¹.
    pub kappa: Vec<f64>,
    /// Fraction of precipitation entering storage.
    pub runoff_fraction: Vec<f64>,
    /// Area coefficient converting runoff to flow units.
    pub area: Vec<f64>,
    /// Delay in days of the edge leaving each station (unused for outlets).
    pub delay: Vec<usize>,
    /// Attenuation of the edge leaving each station.
    pub alpha: Vec<f64>,
    pub et_coeff: f64,
    pub weather: WeatherConfig,
    pub seed: u64,
}

/// Soil class determines how fast a station's reservoir drains.
fn kappa_for_class(class: u8, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * class as f64 / 4.0
}

fn group_sizes(n: usize, g: usize, rng: &mut SeedRng) -> Vec<usize> {
    let w: Vec<f64> = (0..g).map(|_| rng.uniform_range(0.75, 1.25)).collect();
    let total: f64 = w.iter().sum();
    let mut sizes: Vec<usize> = w
        .iter()
        .map(|x| (math::floor(n as f64 * x / total) as usize).max(1))
        .collect();
    // hand out (or take back) the rounding remainder one station at a time
    let mut i = 0;
    while sizes.iter().sum::<usize>() < n {
        sizes[i % g] += 1;
        i += 1;
    }
    while sizes.iter().sum::<usize>() > n {
        let j = (0..g).max_by_key(|&j| sizes[j]).expect("non-empty");
        sizes[j] -= 1;
    }
    sizes
}

/// Random forest with one tree per group; see the module docs.
pub fn generate_basin(config: &ScenarioConfig) -> BasinScenario {
    let (n, g) = (config.n_stations, config.n_groups);
    assert!(n >= g && g >= 1, "need n_stations >= n_groups >= 1");
    let mut rng = SeedRng::new(config.seed).split(streams::BASIN);
    let sizes = group_sizes(n, g, &mut rng);

    let mut stations = Vec::with_capacity(n);
    let mut edges = Vec::new();
    let mut depth = Vec::with_capacity(n);
    let mut pos: Vec<(f64, f64)> = Vec::with_capacity(n);
    for (grp, &size) in sizes.iter().enumerate() {
        let first = stations.len();
        // neighbouring groups overlap spatially near their shared border
        let centre = (grp as f64 * 0.7, 0.0);
        let heading = rng.uniform_range(0.0, 2.0 * PI);
        for k in 0..size {
            let idx = first + k;
            let (p, d) = if k == 0 {
                (centre, 0)
            } else {
                // prefer recent nodes so trees grow long branches
                let back = 1 + rng.below(k.min(3));
                let parent = idx - back;
                edges.push((idx, parent));
                let ang = heading + rng.uniform_range(-1.2, 1.2);
                let step = rng.uniform_range(0.06, 0.14);
                let pp = pos[parent];
                ((pp.0 + step * math::cos(ang), pp.1 + step * math::sin(ang)), depth[parent] + 1)
            };
            pos.push(p);
            depth.push(d);
            stations.push(Station {
                id: format!("S{:03}", idx + 1),
                lat: 31.0 + p.1,
                lon: -97.0 + p.0,
                elevation: 80.0 + 25.0 * d as f64 + rng.uniform_range(0.0, 15.0),
                huc8: format!("1206{:04}", grp + 1),
                huc4: "1206".into(),
                soil_class: rng.below(5) as u8,
            });
        }
    }

    let kappa = stations
        .iter()
        .map(|s| kappa_for_class(s.soil_class, config.kappa_range))
        .collect();
    let runoff_fraction = (0..n)
        .map(|_| rng.uniform_range(config.runoff_fraction_range.0, config.runoff_fraction_range.1))
        .collect();
    let area = (0..n)
        .map(|_| rng.uniform_range(config.area_range.0, config.area_range.1))
        .collect();
    let delay = (0..n)
        .map(|_| config.delays[rng.below(config.delays.len())])
        .collect();
    let alpha = (0..n)
        .map(|_| rng.uniform_range(config.alpha_range.0, config.alpha_range.1))
        .collect();
    let grouping = hierarchical_groups(&stations).expect("generated HUC codes are consistent");
    let graph = FlowGraph::from_index_edges(stations, edges).expect("generated forest is valid");
    BasinScenario {
        graph,
        grouping,
        kappa,
        runoff_fraction,
        area,
        delay,
        alpha,
        et_coeff: config.et_coeff,
        weather: config.weather.clone(),
        seed: config.seed,
    }
}

/// Daily forcings for every station. Wet/dry state, amount and
/// temperature anomaly are drawn per group; stations add local noise.
pub fn generate_forcings(scenario: &BasinScenario, n_days: usize) -> Forcings {
    let n = scenario.graph.len();
    let groups = scenario.grouping.n_groups();
    let w = &scenario.weather;
    let mut rng = SeedRng::new(scenario.seed).split(streams::FORCINGS);
    let mut wet = vec![false; groups];
    let mut anomaly = vec![0.0; groups];
    let mut out = vec![Vec::with_capacity(n_days); n];
    let scale: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.8, 1.2)).collect();
    for t in 0..n_days {
        let season = math::sin(2.0 * PI * (t as f64 - 100.0) / 365.25);
        let mut amount = vec![0.0; groups];
        for g in 0..groups {
            let p = if wet[g] { w.p_wet_after_wet } else { w.p_wet_after_dry };
            wet[g] = rng.uniform() < p;
            if wet[g] {
                amount[g] = rng.gamma(w.gamma_shape, w.gamma_scale_mm);
            }
            anomaly[g] = 0.7 * anomaly[g] + 1.5 * rng.standard_normal();
        }
        for (i, series) in out.iter_mut().enumerate() {
            let g = scenario.grouping.assignment[i];
            let precip = if wet[g] {
                amount[g] * scale[i] * rng.uniform_range(0.7, 1.3)
            } else {
                0.0
            };
            let tmean = 20.0 + 9.0 * season + anomaly[g] + 0.5 * rng.standard_normal()
                - 0.004 * scenario.graph.stations()[i].elevation;
            let tmax = tmean + 4.0 + 2.0 * rng.uniform();
            let tmin = tmean - 4.0 - 2.0 * rng.uniform();
            let wind = 3.0 * math::exp(0.3 * rng.standard_normal());
            series.push([precip, tmax, tmin, wind]);
        }
    }
    out
}

/// Linear-reservoir runoff in mm/day, `runoff[station][day]`.
///
/// Storage starts empty. On day `t` the evaporative loss
/// `min(s, ε·max(0, tmax))` is removed, `κ·s` is released as runoff, and
/// `c·p_t` enters storage for the next day.
pub fn simulate_runoff(scenario: &BasinScenario, forcings: &Forcings) -> Vec<Vec<f64>> {
    forcings
        .iter()
        .enumerate()
        .map(|(i, series)| {
            let (kappa, c) = (scenario.kappa[i], scenario.runoff_fraction[i]);
            let mut s = 0.0;
            series
                .iter()
                .map(|f| {
                    s -= f64::min(s, scenario.et_coeff * f64::max(0.0, f[TMAX]));
                    let r = kappa * s;
                    s = s - r + c * f[PRECIP];
                    r
                })
                .collect()
        })
        .collect()
}

/// `q[i][t] = a_i·r[i][t] + Σ_{j→i} α_j · q[j][t − delay_j]`.
pub fn route_streamflow(scenario: &BasinScenario, runoff: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = scenario.graph.len();
    let days = runoff.first().map_or(0, Vec::len);
    let mut q = vec![vec![0.0; days]; n];
    for i in scenario.graph.topological_order() {
        let mut qi: Vec<f64> = runoff[i].iter().map(|r| scenario.area[i] * r).collect();
        for &j in scenario.graph.upstream(i) {
            let (d, a) = (scenario.delay[j], scenario.alpha[j]);
            for t in d..days {
                qi[t] += a * q[j][t - d];
            }
        }
        q[i] = qi;
    }
    q
}

/// Days of zero precipitation after which every reservoir holds less than
/// `tol` of its storage and every routed pulse has reached its outlet.
pub fn drain_out_days(scenario: &BasinScenario, tol: f64) -> usize {
    let k_min = scenario.kappa.iter().copied().fold(1.0, f64::min);
    let reservoir = if k_min >= 1.0 {
        1
    } else {
        (math::ln(tol) / math::ln(1.0 - k_min)) as usize + 1
    };
    let mut path = vec![0usize; scenario.graph.len()];
    for i in scenario.graph.topological_order() {
        path[i] = scenario
            .graph
            .upstream(i)
            .iter()
            .map(|&j| path[j] + scenario.delay[j])
            .max()
            .unwrap_or(0);
    }
    reservoir + path.into_iter().max().unwrap_or(0)
}

/// Everything a dataset directory needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub scenario: BasinScenario,
    pub forcings: Forcings,
    pub runoff: Vec<Vec<f64>>,
    pub flow: Vec<Vec<f64>>,
}

pub fn generate_dataset(config: &ScenarioConfig) -> SyntheticDataset {
    let scenario = generate_basin(config);
    let forcings = generate_forcings(&scenario, config.n_days);
    let runoff = simulate_runoff(&scenario, &forcings);
    let flow = route_streamflow(&scenario, &runoff);
    SyntheticDataset {
        scenario,
        forcings,
        runoff,
        flow,
    }
}

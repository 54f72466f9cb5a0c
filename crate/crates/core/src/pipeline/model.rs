//! The combined station + basin model and its batch inputs.

use alloc::vec;
use alloc::vec::Vec;

use super::config::TrainConfig;
use super::data::PreprocessStats;
use super::forecast::OneStepForecaster;
use super::{PipelineError, Result};
use crate::flowgraph::{aggregation_matrix, causal_adjacency, restrict_to_groups, FlowGraph, Grouping, Station, N_STATIC};
use crate::math;
use crate::numcore::{ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};
use crate::rng::{streams, SeedRng};
use crate::stgcn::{BasinModel, FeatureLayout, StgcnConfig};
use crate::synth::N_FORCINGS;
use crate::vae::{elbo_loss_tape, reparameterize_tape, VaeDims, VaeParams};

/// Gaussian-kernel adjacency on great-circle distance: `w = exp(−d²/σ²)`
/// with σ the median pairwise distance, `k` nearest neighbours per node,
/// symmetrised, with self loops, rows normalised.
pub fn distance_adjacency(stations: &[Station], k: usize) -> SparseMatrix {
    let n = stations.len();
    let d = |i: usize, j: usize| {
        let (a, b) = (&stations[i], &stations[j]);
        math::haversine_km(a.lat, a.lon, b.lat, b.lon)
    };
    let mut pair: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| d(i, j)).collect();
    pair.sort_by(f64::total_cmp);
    let sigma = if pair.is_empty() {
        1.0
    } else if pair.len() % 2 == 1 {
        pair[pair.len() / 2]
    } else {
        0.5 * (pair[pair.len() / 2 - 1] + pair[pair.len() / 2])
    };
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let mut m = SparseMatrix::new(n, n);
    for i in 0..n {
        m.set(i, i, 1.0);
        for j in crate::metrics::nearest(n, i, k.min(n.saturating_sub(1)), d) {
            let dij = d(i, j);
            let w = math::exp(-(dij * dij) / (sigma * sigma));
            m.set(i, j, w);
            m.set(j, i, w);
        }
    }
    m.row_normalized()
}

/// Aggregation matrix used in both training and evaluation for `config`.
pub fn effective_matrix(config: &TrainConfig, graph: &FlowGraph, grouping: &Grouping) -> SparseMatrix {
    let m = if config.use_rg {
        aggregation_matrix(&causal_adjacency(graph), true, true)
    } else {
        distance_adjacency(graph.stations(), 4)
    };
    if config.use_hn {
        restrict_to_groups(&m, grouping, true)
    } else {
        m
    }
}

/// Trained (or freshly initialised) forecaster with everything needed to
/// turn physical-unit windows into physical-unit predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct CsfModel {
    pub config: TrainConfig,
    pub store: ParamStore,
    pub vae: Option<VaeParams>,
    pub basin: BasinModel,
    pub stats: PreprocessStats,
    /// Standardised static features per station.
    pub statics: Vec<[f64; N_STATIC]>,
}

/// Column blocks of one batch, rows ordered `(window, day, node)`.
pub(crate) struct BatchInputs {
    pub windows: usize,
    pub time: usize,
    pub vae_x: Tensor,
    pub flow: Tensor,
    pub forcings: Tensor,
}

impl CsfModel {
    pub fn feature_layout(config: &TrainConfig) -> FeatureLayout {
        FeatureLayout {
            latent_dim: if config.use_embeddings { config.latent_dim } else { 0 },
            forcings: if config.raw_forcings { N_FORCINGS } else { 0 },
        }
    }

    pub fn vae_dims(config: &TrainConfig) -> VaeDims {
        VaeDims {
            input_dim: N_FORCINGS * (1 + config.lookback) + N_STATIC,
            hidden_dim: config.vae_hidden,
            latent_dim: config.latent_dim,
        }
    }

    pub fn stgcn_config(config: &TrainConfig) -> StgcnConfig {
        StgcnConfig {
            hidden: config.hidden_dim,
            kernel_width: config.kernel_width,
            blocks: config.blocks,
            out_steps: config.out_steps(),
            ..StgcnConfig::new(Self::feature_layout(config))
        }
    }

    pub fn init(config: TrainConfig, m: SparseMatrix, stats: PreprocessStats, statics: Vec<[f64; N_STATIC]>) -> Self {
        let mut rng = SeedRng::new(config.seed).split(streams::INIT);
        let mut store = ParamStore::new();
        let vae = config
            .use_embeddings
            .then(|| VaeParams::init(&mut store, "vae", Self::vae_dims(&config), &mut rng));
        let basin = BasinModel::init(&mut store, "basin", Self::stgcn_config(&config), m, &mut rng);
        Self {
            config,
            store,
            vae,
            basin,
            stats,
            statics,
        }
    }

    /// Rebuild handles over a loaded parameter store.
    pub fn from_parts(
        config: TrainConfig,
        store: ParamStore,
        m: SparseMatrix,
        stats: PreprocessStats,
        statics: Vec<[f64; N_STATIC]>,
    ) -> Option<Self> {
        let vae = if config.use_embeddings {
            Some(VaeParams::bind(&store, "vae", Self::vae_dims(&config))?)
        } else {
            None
        };
        let basin = BasinModel::bind(&store, "basin", Self::stgcn_config(&config), m)?;
        Some(Self {
            config,
            store,
            vae,
            basin,
            stats,
            statics,
        })
    }

    pub fn n_stations(&self) -> usize {
        self.basin.n_nodes()
    }

    pub fn vae_param_ids(&self) -> Vec<ParamId> {
        self.vae.as_ref().map(|v| v.param_ids().to_vec()).unwrap_or_default()
    }

    /// Assemble inputs for windows starting at `starts` over `nodes`, from
    /// standardised series indexed `[station][day]`.
    pub(crate) fn inputs(
        &self,
        flow: &[Vec<f64>],
        forcings: &[Vec<[f64; N_FORCINGS]>],
        starts: &[usize],
        nodes: &[usize],
    ) -> Result<BatchInputs> {
        let t_in = self.config.task.t_in;
        let lookback = self.config.lookback;
        let rows = starts.len() * t_in * nodes.len();
        let vae_w = N_FORCINGS * (1 + lookback) + N_STATIC;
        let mut vae_x = Vec::with_capacity(if self.vae.is_some() { rows * vae_w } else { 0 });
        let mut fl = Vec::with_capacity(rows);
        let mut fx = Vec::with_capacity(rows * N_FORCINGS);
        for &s in starts {
            for t in s..s + t_in {
                for &i in nodes {
                    fl.push(flow[i][t]);
                    fx.extend_from_slice(&forcings[i][t]);
                    if self.vae.is_some() {
                        // lookback never reaches before the window start
                        for l in 0..=lookback {
                            vae_x.extend_from_slice(&forcings[i][t.saturating_sub(l).max(s)]);
                        }
                        vae_x.extend_from_slice(&self.statics[i]);
                    }
                }
            }
        }
        Ok(BatchInputs {
            windows: starts.len(),
            time: t_in,
            vae_x: if self.vae.is_some() {
                Tensor::new(vec![rows, vae_w], vae_x)?
            } else {
                Tensor::zeros(&[0, vae_w])
            },
            flow: Tensor::new(vec![rows, 1], fl)?,
            forcings: Tensor::new(vec![rows, N_FORCINGS], fx)?,
        })
    }

    /// Record the forward pass. Returns standardised predictions
    /// `[windows·nodes × out_steps]` and, when `elbo_noise` is given and the
    /// model has a VAE, the station (ELBO) loss.
    pub(crate) fn forward_tape(
        &self,
        tape: &mut Tape,
        inputs: &BatchInputs,
        m: &SparseMatrix,
        elbo_noise: Option<Tensor>,
    ) -> Result<(Var, Option<Var>)> {
        let flow = tape.constant(inputs.flow.clone());
        let mut cols = vec![flow];
        let mut station_loss = None;
        if let Some(vae) = &self.vae {
            let x = tape.constant(inputs.vae_x.clone());
            let (mu, logvar) = vae.encode_tape(tape, x)?;
            if let Some(eps) = elbo_noise {
                let z = reparameterize_tape(tape, mu, logvar, eps)?;
                let x_hat = vae.decode_tape(tape, z)?;
                station_loss = Some(elbo_loss_tape(tape, x, x_hat, mu, logvar, self.config.kl_weight)?);
            }
            cols.push(mu);
        }
        if self.config.raw_forcings {
            cols.push(tape.constant(inputs.forcings.clone()));
        }
        let features = if cols.len() == 1 { cols[0] } else { tape.concat(&cols, 1)? };
        let pred = self
            .basin
            .forward_tape(tape, features, inputs.windows, inputs.time, m)?;
        Ok((pred, station_loss))
    }

    /// Standardised predictions for windows over all stations, rows
    /// `(window, station)`.
    pub(crate) fn predict_std(&self, flow: &[Vec<f64>], forcings: &[Vec<[f64; N_FORCINGS]>], starts: &[usize]) -> Result<Vec<f64>> {
        let nodes: Vec<usize> = (0..self.n_stations()).collect();
        let inputs = self.inputs(flow, forcings, starts, &nodes)?;
        let mut tape = Tape::with_params(&self.store);
        let (pred, _) = self.forward_tape(&mut tape, &inputs, &self.basin.m, None)?;
        Ok(tape.value(pred).data().to_vec())
    }

    /// Deterministic (`z = μ`) runoff embeddings of every station-day,
    /// `[day][station][latent]`, from standardised forcings.
    pub fn embeddings(&self, forcings: &[Vec<[f64; N_FORCINGS]>], days: core::ops::Range<usize>) -> Result<Vec<Vec<Vec<f64>>>> {
        let vae = self
            .vae
            .as_ref()
            .ok_or_else(|| PipelineError::ConfigInvalid("model has no station-level embeddings".into()))?;
        let n = self.n_stations();
        let d = self.config.latent_dim;
        let lookback = self.config.lookback;
        let mut rows = Vec::with_capacity(days.len() * n);
        for t in days.clone() {
            for i in 0..n {
                let mut r = Vec::with_capacity(N_FORCINGS * (1 + lookback) + N_STATIC);
                for l in 0..=lookback {
                    r.extend_from_slice(&forcings[i][t.saturating_sub(l).max(days.start)]);
                }
                r.extend_from_slice(&self.statics[i]);
                rows.push(r);
            }
        }
        let mut tape = Tape::with_params(&self.store);
        let x = tape.constant(Tensor::from_rows(&rows)?);
        let (mu, _) = vae.encode_tape(&mut tape, x)?;
        let mu = tape.value(mu).data();
        Ok((0..days.len())
            .map(|t| (0..n).map(|i| mu[(t * n + i) * d..(t * n + i + 1) * d].to_vec()).collect())
            .collect())
    }
}

impl OneStepForecaster for CsfModel {
    fn t_in(&self) -> usize {
        self.config.task.t_in
    }

    fn predict_next(&mut self, flows: &[Vec<f64>], forcings: &[Vec<[f64; N_FORCINGS]>]) -> Result<Vec<f64>> {
        let n = self.n_stations();
        let t_in = self.config.task.t_in;
        if flows.len() != n || forcings.len() != n {
            return Err(PipelineError::ConfigInvalid(alloc::format!(
                "window covers {} stations, model has {}",
                flows.len(),
                n
            )));
        }
        if flows.iter().any(|q| q.len() < t_in) || forcings.iter().any(|f| f.len() < t_in) {
            return Err(PipelineError::HistoryTooShort {
                needed: t_in,
                got: flows.iter().map(Vec::len).min().unwrap_or(0),
            });
        }
        let fz: Vec<Vec<f64>> = (0..n)
            .map(|i| flows[i][flows[i].len() - t_in..].iter().map(|&q| self.stats.standardize_flow(i, q)).collect())
            .collect();
        let xz: Vec<Vec<[f64; N_FORCINGS]>> = (0..n)
            .map(|i| {
                forcings[i][forcings[i].len() - t_in..]
                    .iter()
                    .map(|f| self.stats.standardize_forcing(i, f))
                    .collect()
            })
            .collect();
        let z = self.predict_std(&fz, &xz, &[0])?;
        let k = self.config.out_steps();
        Ok((0..n).map(|i| self.stats.inverse_flow(i, z[i * k])).collect())
    }
}

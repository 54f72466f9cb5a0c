//! Training loop, validation and split evaluation.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use serde::{Deserialize, Serialize};

use super::batching::cluster_batches;
use super::config::{TrainConfig, TrainingMode};
use super::data::{make_windows, preprocess, temporal_split, BasinData, Prepared, SplitRanges};
use super::forecast::rolling_forecast;
use super::model::{effective_matrix, CsfModel};
use super::{PipelineError, Result};
use crate::flowgraph::{FlowGraph, Grouping};
use crate::metrics;
use crate::numcore::{Adam, NumError, OptimizerState, ParamId, SparseMatrix, Tape, Tensor};
use crate::rng::{streams, SeedRng};
use crate::stgcn::{total_loss_tape, StgcnError};
use crate::vae::standard_normal_like;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub station_loss: f64,
    pub prediction_loss: f64,
    pub val_nse: f64,
}

pub type TrainingLog = Vec<EpochRecord>;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (initial ones if no epoch ran).
    pub model: CsfModel,
    pub log: TrainingLog,
    pub best_epoch: Option<usize>,
}

/// Observed (capped) and predicted flow per station in physical units,
/// all lead times pooled.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSeries {
    pub observed: Vec<Vec<f64>>,
    pub predicted: Vec<Vec<f64>>,
    /// Target day of every pooled value (same for all stations).
    pub days: Vec<usize>,
}

impl EvalSeries {
    pub fn mean_nse(&self) -> Result<f64> {
        let v = self
            .observed
            .iter()
            .zip(&self.predicted)
            .map(|(y, p)| metrics::nse(y, p))
            .collect::<core::result::Result<Vec<_>, _>>()?;
        Ok(crate::math::mean(&v))
    }
}

/// Split the days and preprocess with training-split statistics.
pub fn prepare(config: &TrainConfig, data: &BasinData, graph: &FlowGraph) -> Result<(Prepared, SplitRanges)> {
    config.validate()?;
    let split = temporal_split(data.n_days(), config.split)?;
    let prepared = preprocess(
        data,
        graph.stations(),
        split.train.clone(),
        config.cap_percentile,
        config.cap_mode,
        config.impute,
    )?;
    Ok((prepared, split))
}

fn diverged(epoch: usize) -> impl Fn(PipelineError) -> PipelineError {
    move |e| match e {
        PipelineError::Num(n @ NumError::NonFinite { .. }) | PipelineError::Model(StgcnError::Num(n @ NumError::NonFinite { .. })) => {
            PipelineError::NonFinite {
                epoch,
                detail: n.to_string(),
            }
        }
        other => other,
    }
}

/// Predict every window of `range` and pool the results.
pub fn evaluate_split(model: &CsfModel, prepared: &Prepared, range: Range<usize>) -> Result<EvalSeries> {
    let task = model.config.task;
    let starts = make_windows(range, task)?;
    let n = model.n_stations();
    let mut observed = vec![Vec::new(); n];
    let mut predicted = vec![Vec::new(); n];
    let mut days = Vec::new();
    let k = model.config.out_steps();
    if k == task.t_out {
        // direct output covers every lead time
        for chunk in starts.chunks(64) {
            let z = model.predict_std(&prepared.flow, &prepared.forcings, chunk)?;
            for (b, &s) in chunk.iter().enumerate() {
                for h in 0..k {
                    let day = s + task.t_in + h;
                    days.push(day);
                    for i in 0..n {
                        observed[i].push(prepared.capped_flow[i][day]);
                        predicted[i].push(model.stats.inverse_flow(i, z[(b * n + i) * k + h]));
                    }
                }
            }
        }
    } else {
        let mut m = model.clone();
        for &s in &starts {
            let hist: Vec<Vec<f64>> = prepared.capped_flow.iter().map(|q| q[s..s + task.t_in].to_vec()).collect();
            let forc: Vec<Vec<[f64; 4]>> = (0..n)
                .map(|i| {
                    let raw = &prepared.forcings[i][s..s + task.t_in + task.t_out - 1];
                    // rolling works in physical units
                    raw.iter()
                        .map(|z| {
                            let (mu, sd) = (&m.stats.forcing_mean[i], &m.stats.forcing_std[i]);
                            core::array::from_fn(|c| z[c] * sd[c] + mu[c])
                        })
                        .collect()
                })
                .collect();
            let out = rolling_forecast(&mut m, &hist, &forc, task.t_out)?;
            for h in 0..task.t_out {
                let day = s + task.t_in + h;
                days.push(day);
                for i in 0..n {
                    observed[i].push(prepared.capped_flow[i][day]);
                    predicted[i].push(out[i][h]);
                }
            }
        }
    }
    Ok(EvalSeries {
        observed,
        predicted,
        days,
    })
}

struct Totals {
    total: f64,
    station: f64,
    prediction: f64,
    batches: usize,
}

/// Run the configured optimisation and return the best-validation model.
pub fn train(
    config: &TrainConfig,
    prepared: &Prepared,
    split: &SplitRanges,
    graph: &FlowGraph,
    grouping: &Grouping,
) -> Result<TrainOutcome> {
    config.validate()?;
    let m = effective_matrix(config, graph, grouping);
    let mut model = CsfModel::init(config.clone(), m, prepared.stats.clone(), prepared.statics.clone());
    let train_windows = make_windows(split.train.clone(), config.task)?;
    make_windows(split.val.clone(), config.task)?;

    let root = SeedRng::new(config.seed);
    let mut shuffle_rng = root.split(streams::SHUFFLE);
    let mut noise_rng = root.split(streams::REPARAM);
    let mut opt = OptimizerState::new(config.optimizer, &model.store);

    let all: Vec<usize> = (0..model.n_stations()).collect();
    let groups: Vec<(Vec<usize>, SparseMatrix)> = (0..grouping.n_groups())
        .map(|g| {
            let nodes = grouping.members(g);
            let sub = model.basin.m.submatrix(&nodes);
            (nodes, sub)
        })
        .collect();

    let vae_ids = model.vae_param_ids();
    let staged = config.mode == TrainingMode::Staged && model.vae.is_some();
    let mut log = TrainingLog::new();
    let mut best: Option<(f64, usize, crate::numcore::ParamStore)> = None;
    let mut stale = 0;

    let stage1 = if staged { config.stage1_epochs } else { 0 };
    for epoch in 0..config.epochs {
        let pretraining = epoch < stage1;
        let mut windows = train_windows.clone();
        if config.windows_per_epoch > 0 && config.windows_per_epoch < windows.len() {
            shuffle_rng.shuffle(&mut windows);
            windows.truncate(config.windows_per_epoch);
            windows.sort_unstable();
        }
        let batches = cluster_batches(&windows, grouping, &mut shuffle_rng, config.use_hn, config.batch_size);
        let mut totals = Totals {
            total: 0.0,
            station: 0.0,
            prediction: 0.0,
            batches: 0,
        };
        for batch in &batches {
            let (nodes, m_sub) = match batch.group {
                Some(g) => (&groups[g].0, &groups[g].1),
                None => (&all, &model.basin.m),
            };
            let inputs = model.inputs(&prepared.flow, &prepared.forcings, &batch.windows, nodes)?;
            let targets = targets(prepared, &batch.windows, nodes, config);
            let noise = model
                .vae
                .as_ref()
                .map(|_| standard_normal_like(&[inputs.vae_x.rows(), config.latent_dim], &mut noise_rng));
            let mut tape = Tape::with_params(&model.store);
            let step = (|| -> Result<_> {
                let (pred, station) = model.forward_tape(&mut tape, &inputs, m_sub, noise)?;
                let y = tape.constant(targets);
                let l_pred = tape.mse(pred, y)?;
                let loss = match station {
                    Some(l_st) if pretraining => l_st,
                    Some(l_st) if !staged => total_loss_tape(&mut tape, l_st, l_pred, config.lambda)?,
                    _ => l_pred,
                };
                let grads = tape.backward(loss)?.into_params();
                let station_value = station.map_or(0.0, |v| tape.value(v).item());
                Ok((tape.value(loss).item(), station_value, tape.value(l_pred).item(), grads))
            })();
            let (loss, l_st, l_pred, grads) = step.map_err(diverged(epoch))?;
            let frozen = |id: ParamId| {
                let is_vae = vae_ids.contains(&id);
                if pretraining {
                    !is_vae
                } else {
                    staged && is_vae
                }
            };
            Adam::step(&mut model.store, &grads, &mut opt, &frozen).map_err(|e| diverged(epoch)(e.into()))?;
            totals.total += loss;
            totals.station += l_st;
            totals.prediction += l_pred;
            totals.batches += 1;
        }
        let val_nse = evaluate_split(&model, prepared, split.val.clone())?.mean_nse()?;
        if !val_nse.is_finite() {
            return Err(PipelineError::NonFinite {
                epoch,
                detail: format!("validation NSE {val_nse}"),
            });
        }
        let nb = totals.batches.max(1) as f64;
        log.push(EpochRecord {
            epoch,
            total_loss: totals.total / nb,
            station_loss: totals.station / nb,
            prediction_loss: totals.prediction / nb,
            val_nse,
        });
        if pretraining {
            continue;
        }
        if best.as_ref().is_none_or(|b| val_nse > b.0) {
            best = Some((val_nse, epoch, model.store.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, store)) = best {
        model.store = store;
    }
    Ok(TrainOutcome { model, log, best_epoch })
}

fn targets(prepared: &Prepared, starts: &[usize], nodes: &[usize], config: &TrainConfig) -> Tensor {
    let k = config.out_steps();
    let mut y = Vec::with_capacity(starts.len() * nodes.len() * k);
    for &s in starts {
        for &i in nodes {
            for h in 0..k {
                y.push(prepared.flow[i][s + config.task.t_in + h]);
            }
        }
    }
    Tensor::new(vec![starts.len() * nodes.len(), k], y).expect("target shape")
}

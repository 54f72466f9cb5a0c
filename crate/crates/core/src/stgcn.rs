//! Basin-level spatio-temporal graph convolution.
//!
//! Node features live on a tape as a `[batches·time·nodes × features]`
//! matrix, rows ordered `(batch, time, node)`. Each block is a causal
//! temporal convolution, a spatial aggregation through the (causal)
//! aggregation matrix `M`, and a second temporal convolution. The head
//! reads the last time step.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::flowgraph::dependency_closure;
use crate::numcore::{glorot_uniform, ConvLayout, NumError, ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};
use crate::rng::SeedRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StgcnError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("window of {time} steps is shorter than kernel width {kernel}")]
    WindowTooShort { time: usize, kernel: usize },
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("masked inference needs at least one target")]
    EmptyTargets,
    #[error("target node {0} out of range")]
    UnknownTarget(usize),
}

pub type Result<T> = core::result::Result<T, StgcnError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> core::result::Result<Var, NumError> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Linear => Ok(x),
        }
    }
}

/// Per node-day input columns: `[flow, z_0..z_{d-1}, forcings..]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub latent_dim: usize,
    pub forcings: usize,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        1 + self.latent_dim + self.forcings
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StgcnConfig {
    pub features: FeatureLayout,
    pub hidden: usize,
    pub kernel_width: usize,
    pub blocks: usize,
    /// Values emitted per node by the head.
    pub out_steps: usize,
    pub activation: Activation,
}

impl StgcnConfig {
    pub fn new(features: FeatureLayout) -> Self {
        Self {
            features,
            hidden: 32,
            kernel_width: 3,
            blocks: 2,
            out_steps: 1,
            activation: Activation::Relu,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StBlockParams {
    pub t1_w: ParamId,
    pub t1_b: ParamId,
    pub w_s: ParamId,
    pub t2_w: ParamId,
    pub t2_b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasinModel {
    pub config: StgcnConfig,
    pub blocks: Vec<StBlockParams>,
    pub head_w: ParamId,
    pub head_b: ParamId,
    /// Aggregation matrix over all nodes, `m[i][j] != 0` iff `j` feeds `i`.
    pub m: SparseMatrix,
}

/// Causal temporal convolution of `x` (rows `(batch, time, node)`) with
/// kernel `w: [k × c_in × c_out]`.
pub fn temporal_conv(tape: &mut Tape, x: Var, w: Var, layout: ConvLayout) -> Result<Var> {
    let k = tape.value(w).shape().first().copied().unwrap_or(0);
    if layout.time < k {
        return Err(StgcnError::WindowTooShort {
            time: layout.time,
            kernel: k,
        });
    }
    Ok(tape.causal_conv1d(x, w, layout)?)
}

/// `h'_i = σ(Σ_j m[i][j] · h_j · W_s)` for every `(batch, time)` slice.
pub fn spatial_conv(
    tape: &mut Tape,
    h: Var,
    m: &SparseMatrix,
    w_s: Var,
    layout: ConvLayout,
    activation: Activation,
) -> Result<Var> {
    let agg = tape.aggregate(h, m, layout)?;
    let y = tape.matmul(agg, w_s)?;
    Ok(activation.apply(tape, y)?)
}

impl BasinModel {
    pub fn init(store: &mut ParamStore, prefix: &str, config: StgcnConfig, m: SparseMatrix, rng: &mut SeedRng) -> Self {
        let (k, h) = (config.kernel_width, config.hidden);
        let mut blocks = Vec::with_capacity(config.blocks);
        let mut c_in = config.features.width();
        for b in 0..config.blocks {
            let name = |s: &str| format!("{prefix}.block{b}.{s}");
            let t1_w = store.add(name("t1.w"), conv_kernel(k, c_in, h, rng));
            let t1_b = store.add(name("t1.b"), Tensor::zeros(&[h]));
            let w_s = store.add(name("ws"), glorot_uniform(h, h, rng));
            let t2_w = store.add(name("t2.w"), conv_kernel(k, h, h, rng));
            let t2_b = store.add(name("t2.b"), Tensor::zeros(&[h]));
            blocks.push(StBlockParams {
                t1_w,
                t1_b,
                w_s,
                t2_w,
                t2_b,
            });
            c_in = h;
        }
        let head_w = store.add(format!("{prefix}.head.w"), glorot_uniform(c_in, config.out_steps, rng));
        let head_b = store.add(format!("{prefix}.head.b"), Tensor::zeros(&[config.out_steps]));
        Self {
            config,
            blocks,
            head_w,
            head_b,
            m,
        }
    }

    /// Re-bind to a store populated by [`BasinModel::init`] with the same prefix.
    pub fn bind(store: &ParamStore, prefix: &str, config: StgcnConfig, m: SparseMatrix) -> Option<Self> {
        let f = |s: String| store.find(&s);
        let blocks = (0..config.blocks)
            .map(|b| {
                Some(StBlockParams {
                    t1_w: f(format!("{prefix}.block{b}.t1.w"))?,
                    t1_b: f(format!("{prefix}.block{b}.t1.b"))?,
                    w_s: f(format!("{prefix}.block{b}.ws"))?,
                    t2_w: f(format!("{prefix}.block{b}.t2.w"))?,
                    t2_b: f(format!("{prefix}.block{b}.t2.b"))?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            head_w: f(format!("{prefix}.head.w"))?,
            head_b: f(format!("{prefix}.head.b"))?,
            config,
            blocks,
            m,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.m.n_rows()
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self
            .blocks
            .iter()
            .flat_map(|b| [b.t1_w, b.t1_b, b.w_s, b.t2_w, b.t2_b])
            .collect();
        ids.extend([self.head_w, self.head_b]);
        ids
    }

    /// Forward over `batches` windows of `time` steps on the node set of
    /// `m`. Returns `[batches·nodes × out_steps]`, rows `(batch, node)`.
    pub fn forward_tape(&self, tape: &mut Tape, x: Var, batches: usize, time: usize, m: &SparseMatrix) -> Result<Var> {
        let layout = ConvLayout {
            batches,
            time,
            lanes: m.n_rows(),
        };
        let act = self.config.activation;
        let mut h = x;
        for blk in &self.blocks {
            let w = tape.param(blk.t1_w);
            let b = tape.param(blk.t1_b);
            h = temporal_conv(tape, h, w, layout)?;
            h = tape.add_row(h, b)?;
            h = act.apply(tape, h)?;
            let ws = tape.param(blk.w_s);
            h = spatial_conv(tape, h, m, ws, layout, act)?;
            let w = tape.param(blk.t2_w);
            let b = tape.param(blk.t2_b);
            h = temporal_conv(tape, h, w, layout)?;
            h = tape.add_row(h, b)?;
            h = act.apply(tape, h)?;
        }
        let n = layout.lanes;
        let last: Vec<usize> = (0..batches)
            .flat_map(|b| (0..n).map(move |i| (b * time + time - 1) * n + i))
            .collect();
        let h_last = tape.gather_rows(h, &last)?;
        let w = tape.param(self.head_w);
        let b = tape.param(self.head_b);
        let y = tape.matmul(h_last, w)?;
        Ok(tape.add_row(y, b)?)
    }

    /// Single-window forward on the full graph. `window` is
    /// `[time·nodes × features]`, rows `(time, node)`; returns `[nodes × out_steps]`.
    pub fn forward(&self, store: &ParamStore, window: &Tensor) -> Result<Tensor> {
        self.forward_with(store, window, &self.m)
    }

    pub fn forward_with(&self, store: &ParamStore, window: &Tensor, m: &SparseMatrix) -> Result<Tensor> {
        let n = m.n_rows();
        let rows = window.shape().first().copied().unwrap_or(0);
        if window.rank() != 2 || n == 0 || rows % n != 0 || window.cols() != self.config.features.width() {
            return Err(NumError::ShapeMismatch {
                op: "forward",
                detail: format!(
                    "window {:?} for {} nodes × {} features",
                    window.shape(),
                    n,
                    self.config.features.width()
                ),
            }
            .into());
        }
        let mut tape = Tape::with_params(store);
        let x = tape.constant(window.clone());
        let y = self.forward_tape(&mut tape, x, 1, rows / n, m)?;
        Ok(tape.value(y).clone())
    }

    /// Predict only at `targets`, computing over the nodes that can reach
    /// them through `m`.
    pub fn masked_inference(&self, store: &ParamStore, window: &Tensor, targets: &BTreeSet<usize>) -> Result<MaskedPrediction> {
        if targets.is_empty() {
            return Err(StgcnError::EmptyTargets);
        }
        let n = self.n_nodes();
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            return Err(StgcnError::UnknownTarget(bad));
        }
        if window.rank() != 2 || !window.rows().is_multiple_of(n) {
            return Err(NumError::ShapeMismatch {
                op: "masked_inference",
                detail: format!("window {:?} for {} nodes", window.shape(), n),
            }
            .into());
        }
        let nodes: Vec<usize> = dependency_closure(&self.m, targets).into_iter().collect();
        let sub_m = self.m.submatrix(&nodes);
        let time = window.rows() / n;
        let f = window.cols();
        let mut data = Vec::with_capacity(time * nodes.len() * f);
        for t in 0..time {
            for &v in &nodes {
                let r = t * n + v;
                data.extend_from_slice(&window.data()[r * f..(r + 1) * f]);
            }
        }
        let sub = Tensor::new(vec![time * nodes.len(), f], data)?;
        let out = self.forward_with(store, &sub, &sub_m)?;
        let k = self.config.out_steps;
        let predictions = targets
            .iter()
            .map(|&t| {
                let local = nodes.binary_search(&t).expect("target inside its closure");
                (t, out.data()[local * k..(local + 1) * k].to_vec())
            })
            .collect();
        Ok(MaskedPrediction { nodes, predictions })
    }
}

fn conv_kernel(k: usize, c_in: usize, c_out: usize, rng: &mut SeedRng) -> Tensor {
    glorot_uniform(k * c_in, c_out, rng)
        .reshape(&[k, c_in, c_out])
        .expect("kernel shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedPrediction {
    /// Nodes the computation touched, ascending.
    pub nodes: Vec<usize>,
    pub predictions: Vec<(usize, Vec<f64>)>,
}

/// Mean squared error over stations and horizon steps.
pub fn prediction_loss(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(NumError::ShapeMismatch {
            op: "prediction_loss",
            detail: format!("{} vs {}", y.len(), y_hat.len()),
        }
        .into());
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(StgcnError::LambdaOutOfRange(lambda))
    }
}

/// `λ · l_station + (1 − λ) · l_prediction`.
pub fn total_loss(l_station: f64, l_prediction: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(lambda * l_station + (1.0 - lambda) * l_prediction)
}

pub fn total_loss_tape(tape: &mut Tape, l_station: Var, l_prediction: Var, lambda: f64) -> Result<Var> {
    check_lambda(lambda)?;
    let a = tape.scale(l_station, lambda)?;
    let b = tape.scale(l_prediction, 1.0 - lambda)?;
    Ok(tape.add(a, b)?)
}

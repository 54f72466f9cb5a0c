//! Station-level variational autoencoder.
//!
//! Each station-day is encoded independently: the input row holds that
//! day's (standardised) forcing vector, optionally a trailing lookback of
//! earlier days, and the station's static features. Encoder and decoder are
//! single-hidden-layer ReLU networks; the encoder trunk feeds two linear
//! heads for the posterior mean and log-variance.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::numcore::{glorot_uniform, NumError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::rng::SeedRng;

/// Log-variance is clamped to this range before use.
pub const LOGVAR_MIN: f64 = -30.0;
pub const LOGVAR_MAX: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
}

/// Parameter handles of one VAE inside a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct VaeParams {
    pub dims: VaeDims,
    enc_w: ParamId,
    enc_b: ParamId,
    mu_w: ParamId,
    mu_b: ParamId,
    logvar_w: ParamId,
    logvar_b: ParamId,
    dec_w: ParamId,
    dec_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

fn linear(tape: &mut Tape, x: Var, w: ParamId, b: ParamId) -> Result<Var, NumError> {
    let wv = tape.param(w);
    let bv = tape.param(b);
    let y = tape.matmul(x, wv)?;
    tape.add_row(y, bv)
}

impl VaeParams {
    /// Register freshly initialised weights under `prefix`.
    pub fn init(store: &mut ParamStore, prefix: &str, dims: VaeDims, rng: &mut SeedRng) -> Self {
        let VaeDims {
            input_dim: i,
            hidden_dim: h,
            latent_dim: d,
        } = dims;
        let mut w = |name: &str, rows: usize, cols: usize, rng: &mut SeedRng| {
            store.add(alloc::format!("{prefix}.{name}"), glorot_uniform(rows, cols, rng))
        };
        let enc_w = w("enc.w", i, h, rng);
        let mu_w = w("mu.w", h, d, rng);
        let logvar_w = w("logvar.w", h, d, rng);
        let dec_w = w("dec.w", d, h, rng);
        let out_w = w("out.w", h, i, rng);
        let mut b = |name: &str, n: usize| store.add(alloc::format!("{prefix}.{name}"), Tensor::zeros(&[n]));
        Self {
            dims,
            enc_w,
            enc_b: b("enc.b", h),
            mu_w,
            mu_b: b("mu.b", d),
            logvar_w,
            logvar_b: b("logvar.b", d),
            dec_w,
            dec_b: b("dec.b", h),
            out_w,
            out_b: b("out.b", i),
        }
    }

    /// Re-bind to an existing store whose names follow [`VaeParams::init`].
    pub fn bind(store: &ParamStore, prefix: &str, dims: VaeDims) -> Option<Self> {
        let f = |name: &str| store.find(&alloc::format!("{prefix}.{name}"));
        Some(Self {
            dims,
            enc_w: f("enc.w")?,
            enc_b: f("enc.b")?,
            mu_w: f("mu.w")?,
            mu_b: f("mu.b")?,
            logvar_w: f("logvar.w")?,
            logvar_b: f("logvar.b")?,
            dec_w: f("dec.w")?,
            dec_b: f("dec.b")?,
            out_w: f("out.w")?,
            out_b: f("out.b")?,
        })
    }

    pub fn param_ids(&self) -> [ParamId; 10] {
        [
            self.enc_w,
            self.enc_b,
            self.mu_w,
            self.mu_b,
            self.logvar_w,
            self.logvar_b,
            self.dec_w,
            self.dec_b,
            self.out_w,
            self.out_b,
        ]
    }

    /// `x[rows × input_dim]` to posterior `(mu, logvar)`, each `[rows × d]`.
    pub fn encode_tape(&self, tape: &mut Tape, x: Var) -> Result<(Var, Var), NumError> {
        let h = linear(tape, x, self.enc_w, self.enc_b)?;
        let h = tape.relu(h)?;
        let mu = linear(tape, h, self.mu_w, self.mu_b)?;
        let logvar = linear(tape, h, self.logvar_w, self.logvar_b)?;
        Ok((mu, logvar))
    }

    /// `z[rows × d]` to reconstruction `[rows × input_dim]`.
    pub fn decode_tape(&self, tape: &mut Tape, z: Var) -> Result<Var, NumError> {
        let h = linear(tape, z, self.dec_w, self.dec_b)?;
        let h = tape.relu(h)?;
        linear(tape, h, self.out_w, self.out_b)
    }

    pub fn encode(&self, store: &ParamStore, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NumError> {
        let mut tape = Tape::with_params(store);
        let xv = tape.constant(Tensor::new(vec![1, x.len()], x.to_vec())?);
        let (mu, lv) = self.encode_tape(&mut tape, xv)?;
        Ok((tape.value(mu).data().to_vec(), tape.value(lv).data().to_vec()))
    }

    pub fn decode(&self, store: &ParamStore, z: &[f64]) -> Result<Vec<f64>, NumError> {
        let mut tape = Tape::with_params(store);
        let zv = tape.constant(Tensor::new(vec![1, z.len()], z.to_vec())?);
        let out = self.decode_tape(&mut tape, zv)?;
        Ok(tape.value(out).data().to_vec())
    }
}

/// `z = mu + exp(logvar / 2) ⊙ eps`, with `eps` supplied as a constant so
/// gradients reach `mu` and `logvar` only.
pub fn reparameterize_tape(tape: &mut Tape, mu: Var, logvar: Var, eps: Tensor) -> Result<Var, NumError> {
    let lv = tape.clamp(logvar, LOGVAR_MIN, LOGVAR_MAX)?;
    let half = tape.scale(lv, 0.5)?;
    let std = tape.exp(half)?;
    let e = tape.constant(eps);
    let noise = tape.mul(std, e)?;
    tape.add(mu, noise)
}

pub fn standard_normal_like(shape: &[usize], rng: &mut SeedRng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.standard_normal()).collect()).expect("shape")
}

/// Plain-vector reparameterisation with noise drawn from `rng`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], rng: &mut SeedRng) -> Vec<f64> {
    let eps: Vec<f64> = (0..mu.len()).map(|_| rng.standard_normal()).collect();
    reparameterize_with(mu, logvar, &eps)
}

pub fn reparameterize_with(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + math::exp(lv.clamp(LOGVAR_MIN, LOGVAR_MAX) / 2.0) * e)
        .collect()
}

/// Negative ELBO: `mse(x, x_hat) + kl_weight · KL`, with KL averaged over
/// rows and summed over latent dimensions.
pub fn elbo_loss_tape(
    tape: &mut Tape,
    x: Var,
    x_hat: Var,
    mu: Var,
    logvar: Var,
    kl_weight: f64,
) -> Result<Var, NumError> {
    let recon = tape.mse(x, x_hat)?;
    let kl = kl_tape(tape, mu, logvar)?;
    let kl = tape.scale(kl, kl_weight)?;
    tape.add(recon, kl)
}

/// `0.5 · Σ_d (mu² + exp(logvar) − logvar − 1)`, mean over rows.
pub fn kl_tape(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var, NumError> {
    let rows = tape.value(mu).rows() as f64;
    let mu2 = tape.square(mu)?;
    let ev = tape.exp(logvar)?;
    let a = tape.add(mu2, ev)?;
    let b = tape.sub(a, logvar)?;
    let c = tape.add_scalar(b, -1.0)?;
    let s = tape.sum_all(c)?;
    tape.scale(s, 0.5 / rows)
}

pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + math::exp(*lv) - lv - 1.0)
        .sum::<f64>()
}

pub fn elbo_loss(x: &[f64], x_hat: &[f64], mu: &[f64], logvar: &[f64], kl_weight: f64) -> f64 {
    let recon = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    recon + kl_weight * kl_divergence(mu, logvar)
}

/// Latent runoff embedding of one station on one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunoffEmbedding {
    pub station: usize,
    pub day: usize,
    pub z: Vec<f64>,
}

pub enum EmbedMode<'r> {
    /// `z = mu`.
    Deterministic,
    /// `z ~ q(z | x)`.
    Sampled(&'r mut SeedRng),
}

/// Embed every day of one station. `rows[t]` is the encoder input for day
/// `t` (forcings plus statics).
pub fn embed_series(
    vae: &VaeParams,
    store: &ParamStore,
    station: usize,
    rows: &[Vec<f64>],
    mode: EmbedMode<'_>,
) -> Result<Vec<RunoffEmbedding>, NumError> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let x = Tensor::from_rows(rows)?;
    let mut tape = Tape::with_params(store);
    let xv = tape.constant(x);
    let (mu, lv) = vae.encode_tape(&mut tape, xv)?;
    let d = vae.dims.latent_dim;
    let mu = tape.value(mu).data();
    let lv = tape.value(lv).data();
    let mut rng = match mode {
        EmbedMode::Deterministic => None,
        EmbedMode::Sampled(r) => Some(r),
    };
    Ok((0..rows.len())
        .map(|t| {
            let m = &mu[t * d..(t + 1) * d];
            let z = match rng.as_deref_mut() {
                None => m.to_vec(),
                Some(r) => reparameterize(m, &lv[t * d..(t + 1) * d], r),
            };
            RunoffEmbedding { station, day: t, z }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims() -> VaeDims {
        VaeDims {
            input_dim: 6,
            hidden_dim: 5,
            latent_dim: 3,
        }
    }

    fn zeroed(store: &mut ParamStore) {
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    #[test]
    fn zero_weights_encode_to_prior() {
        let mut store = ParamStore::new();
        let vae = VaeParams::init(&mut store, "vae", dims(), &mut SeedRng::new(1));
        zeroed(&mut store);
        let (mu, lv) = vae.encode(&store, &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap();
        assert_eq!(mu, vec![0.0; 3]);
        assert_eq!(lv, vec![0.0; 3]);
    }

    #[test]
    fn zero_weights_decode_to_bias() {
        let mut store = ParamStore::new();
        let vae = VaeParams::init(&mut store, "vae", dims(), &mut SeedRng::new(1));
        zeroed(&mut store);
        let bias = store.find("vae.out.b").unwrap();
        store.get_mut(bias).data_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = vae.decode(&store, &[0.3, -0.1, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn decode_shape_contract() {
        let d = VaeDims {
            input_dim: 11,
            hidden_dim: 32,
            latent_dim: 8,
        };
        let mut store = ParamStore::new();
        let vae = VaeParams::init(&mut store, "vae", d, &mut SeedRng::new(2));
        assert_eq!(vae.decode(&store, &[0.1; 8]).unwrap().len(), 11);
    }

    #[test]
    fn encode_is_pure_and_per_sample() {
        let mut store = ParamStore::new();
        let vae = VaeParams::init(&mut store, "vae", dims(), &mut SeedRng::new(3));
        let x = [0.2, -0.4, 1.0, 0.0, 0.3, -1.1];
        assert_eq!(vae.encode(&store, &x).unwrap(), vae.encode(&store, &x).unwrap());

        // batch encoding of [x; x'] equals separate encodings: no cross-row leakage
        let mut x2 = x;
        x2[2] += 0.5;
        let batch = Tensor::from_rows(&[x.to_vec(), x2.to_vec()]).unwrap();
        let mut tape = Tape::with_params(&store);
        let xv = tape.constant(batch);
        let (mu, _) = vae.encode_tape(&mut tape, xv).unwrap();
        let rows = tape.value(mu).data();
        assert_eq!(&rows[..3], vae.encode(&store, &x).unwrap().0.as_slice());
        assert_eq!(&rows[3..], vae.encode(&store, &x2).unwrap().0.as_slice());
    }

    #[test]
    fn reparameterize_examples() {
        assert_eq!(reparameterize_with(&[0.0], &[0.0], &[0.5]), vec![0.5]);
        let mut r1 = SeedRng::new(5);
        let mut r2 = SeedRng::new(5);
        assert_eq!(
            reparameterize(&[0.1, 0.2], &[0.3, -0.2], &mut r1),
            reparameterize(&[0.1, 0.2], &[0.3, -0.2], &mut r2)
        );
    }

    #[test]
    fn reparameterize_collapses_at_tiny_variance() {
        // exp(-15) ≈ 3.06e-7, so |z - mu| ≤ 3.06e-7·|eps|
        let bound = math::exp(-15.0);
        let mut rng = SeedRng::new(9);
        for _ in 0..10_000 {
            let eps = rng.standard_normal();
            if eps.abs() > 5.0 {
                continue;
            }
            let z = reparameterize_with(&[1.5], &[-30.0], &[eps])[0];
            assert!((z - 1.5).abs() <= bound * eps.abs() + 1e-15);
            if eps.abs() <= 3.0 {
                assert!((z - 1.5).abs() < 1e-6);
            }
        }
        // below the clamp floor behaves like the floor
        let z = reparameterize_with(&[0.0], &[-1e6], &[1.0])[0];
        assert!((z - bound).abs() < 1e-18);
    }

    #[test]
    fn elbo_examples() {
        assert_eq!(kl_divergence(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(kl_divergence(&[1.0], &[0.0]), 0.5);
        assert_eq!(elbo_loss(&[1.0, 2.0], &[1.0, 2.0], &[0.0], &[0.0], 1.0), 0.0);
    }

    #[test]
    fn embed_series_shapes_and_determinism() {
        let mut store = ParamStore::new();
        let vae = VaeParams::init(&mut store, "vae", dims(), &mut SeedRng::new(4));
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64 * 0.1; 6]).collect();
        let a = embed_series(&vae, &store, 0, &rows, EmbedMode::Deterministic).unwrap();
        let b = embed_series(&vae, &store, 0, &rows, EmbedMode::Deterministic).unwrap();
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|e| e.z.len() == 3));
        assert_eq!(a, b);
        // identical inputs at another station give identical embeddings
        let c = embed_series(&vae, &store, 1, &rows, EmbedMode::Deterministic).unwrap();
        assert!(a.iter().zip(&c).all(|(x, y)| x.z == y.z));
        let mut rng = SeedRng::new(1);
        let s = embed_series(&vae, &store, 0, &rows, EmbedMode::Sampled(&mut rng)).unwrap();
        assert_ne!(s[0].z, a[0].z);
    }
}

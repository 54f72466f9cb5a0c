//! Rolling multi-step forecasting.

use alloc::vec::Vec;

use super::{PipelineError, Result};
use crate::synth::N_FORCINGS;

/// Anything that maps a `t_in`-day window (all stations) to next-day flow.
pub trait OneStepForecaster {
    fn t_in(&self) -> usize;

    /// `flows[i]` and `forcings[i]` hold exactly `t_in` days for station
    /// `i`. Returns one flow per station.
    fn predict_next(&mut self, flows: &[Vec<f64>], forcings: &[Vec<[f64; N_FORCINGS]>]) -> Result<Vec<f64>>;
}

/// Predict `horizon` days past the end of `history`, feeding each
/// prediction back into the flow channel. `history[i]` ends at the last
/// observed day; `forcings[i]` starts on the same day as `history[i]` and
/// covers at least `history[i].len() + horizon - 1` days (observed weather
/// is used for the future days). Returns `[station][step]`.
pub fn rolling_forecast<F: OneStepForecaster + ?Sized>(
    model: &mut F,
    history: &[Vec<f64>],
    forcings: &[Vec<[f64; N_FORCINGS]>],
    horizon: usize,
) -> Result<Vec<Vec<f64>>> {
    if horizon == 0 {
        return Err(PipelineError::ConfigInvalid("horizon must be at least 1".into()));
    }
    let t_in = model.t_in();
    let n = history.len();
    let len = history.first().map_or(0, Vec::len);
    if len < t_in || history.iter().any(|h| h.len() != len) {
        return Err(PipelineError::HistoryTooShort { needed: t_in, got: len });
    }
    let need = len + horizon - 1;
    if forcings.len() != n || forcings.iter().any(|f| f.len() < need) {
        return Err(PipelineError::TooShort {
            what: "forcings for the forecast horizon",
            needed: need,
            got: forcings.iter().map(Vec::len).min().unwrap_or(0),
        });
    }
    let mut flows: Vec<Vec<f64>> = history.to_vec();
    let mut out = alloc::vec![Vec::with_capacity(horizon); n];
    for step in 0..horizon {
        let end = len + step;
        let fw: Vec<Vec<f64>> = flows.iter().map(|q| q[end - t_in..end].to_vec()).collect();
        let xw: Vec<Vec<[f64; N_FORCINGS]>> = forcings.iter().map(|f| f[end - t_in..end].to_vec()).collect();
        let next = model.predict_next(&fw, &xw)?;
        for (i, v) in next.into_iter().enumerate() {
            flows[i].push(v);
            out[i].push(v);
        }
    }
    Ok(out)
}

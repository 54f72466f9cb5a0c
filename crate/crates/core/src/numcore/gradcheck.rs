//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward pass, so it is an
//! oracle independent of the backward rules it checks.

use alloc::vec::Vec;

use super::{NumError, ParamStore, Tape, Tensor, Var};

/// Denominator floor for relative error; gradients smaller than this are
/// compared absolutely.
const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, element index) of the worst element.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }

    fn record(&mut self, analytic: f64, numeric: f64, at: (usize, usize)) {
        let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        let err = (analytic - numeric).abs() / denom;
        self.checked += 1;
        if err > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = self.max_rel_error.max(err);
            if err >= self.max_rel_error {
                self.worst = Some(at);
            }
        }
    }
}

/// Compare the tape gradient of `f` with respect to each input tensor
/// against central differences with step `eps`.
pub fn check_gradients<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradCheckReport, NumError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, NumError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |inputs: &[Tensor]| -> Result<f64, NumError> {
        let mut t = Tape::new();
        let vs: Vec<Var> = inputs.iter().map(|x| t.constant(x.clone())).collect();
        let l = f(&mut t, &vs)?;
        Ok(t.value(l).item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (a, var) in vars.iter().enumerate() {
        let zeros = Tensor::zeros(inputs[a].shape());
        let analytic = grads.wrt(*var).unwrap_or(&zeros);
        for e in 0..inputs[a].len() {
            let orig = inputs[a].data()[e];
            work[a].data_mut()[e] = orig + eps;
            let up = eval(&work)?;
            work[a].data_mut()[e] = orig - eps;
            let down = eval(&work)?;
            work[a].data_mut()[e] = orig;
            report.record(analytic.data()[e], (up - down) / (2.0 * eps), (a, e));
        }
    }
    Ok(report)
}

/// Same check for every parameter of a store, with `f` reading parameters
/// through [`Tape::param`].
pub fn check_param_gradients<F>(store: &ParamStore, eps: f64, f: F) -> Result<GradCheckReport, NumError>
where
    F: Fn(&mut Tape) -> Result<Var, NumError>,
{
    let grads = {
        let mut tape = Tape::with_params(store);
        let loss = f(&mut tape)?;
        tape.backward(loss)?.into_params()
    };
    let eval = |s: &ParamStore| -> Result<f64, NumError> {
        let mut t = Tape::with_params(s);
        let l = f(&mut t)?;
        Ok(t.value(l).item())
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let mut work = store.clone();
    for id in store.ids() {
        let zeros = Tensor::zeros(store.get(id).shape());
        let analytic = grads.get(id).unwrap_or(&zeros).clone();
        for e in 0..store.get(id).len() {
            let orig = store.get(id).data()[e];
            work.get_mut(id).data_mut()[e] = orig + eps;
            let up = eval(&work)?;
            work.get_mut(id).data_mut()[e] = orig - eps;
            let down = eval(&work)?;
            work.get_mut(id).data_mut()[e] = orig;
            report.record(analytic.data()[e], (up - down) / (2.0 * eps), (id.index(), e));
        }
    }
    Ok(report)
}

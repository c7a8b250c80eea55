//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::param::{ParamId, ParamSet};
use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Entries checked per parameter tensor; `None` checks every entry.
    pub max_entries_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-3,
            tolerance: 1e-4,
            max_entries_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub params_checked: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

fn evaluate<F>(params: &ParamSet, forward: &mut F) -> Result<f64>
where
    F: FnMut(&ParamSet) -> Result<(Tape, Var)>,
{
    let (tape, loss) = forward(params)?;
    let shape = tape.shape(loss);
    if shape != [1, 1] {
        return Err(Error::NonScalarLoss(shape));
    }
    Ok(tape.value(loss).item())
}

/// Computes analytic gradients with `backward`, then compares them against
/// central differences. Existing gradient buffers are overwritten.
pub fn grad_check<F>(
    params: &mut ParamSet,
    mut forward: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(Tape, Var)>,
{
    params.zero_grad();
    let (tape, loss) = forward(params)?;
    tape.backward(loss, params)?;
    let analytic: Vec<Tensor> = params.iter().map(|p| p.grad.clone()).collect();
    params.zero_grad();
    check_against(params, &analytic, forward, opts)
}

/// Compares the supplied gradients (one tensor per parameter) against
/// central differences `(f(θ+ε) − f(θ−ε)) / 2ε`.
pub fn check_against<F>(
    params: &mut ParamSet,
    analytic: &[Tensor],
    mut forward: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(Tape, Var)>,
{
    assert_eq!(analytic.len(), params.len(), "one gradient per parameter");
    let first = evaluate(params, &mut forward)?;
    let second = evaluate(params, &mut forward)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut entries = Vec::new();
    for (pi, grad) in analytic.iter().enumerate() {
        let id = ParamId(pi);
        let len = params.get(id).value.len();
        let indices: Vec<usize> = match opts.max_entries_per_param {
            Some(k) if k < len => {
                let mut idx = sample(&mut rng, len, k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..len).collect(),
        };
        for index in indices {
            let original = params.get(id).value.data()[index];
            params.get_mut(id).value.data_mut()[index] = original + opts.step;
            let plus = evaluate(params, &mut forward);
            params.get_mut(id).value.data_mut()[index] = original - opts.step;
            let minus = evaluate(params, &mut forward);
            params.get_mut(id).value.data_mut()[index] = original;
            let numeric = (plus? - minus?) / (2.0 * opts.step);
            let a = grad.data()[index];
            entries.push(GradCheckEntry {
                param: params.get(id).name.clone(),
                index,
                analytic: a,
                numeric,
                relative_error: relative_error(a, numeric),
            });
        }
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params_checked: analytic.len(),
        passed: max_relative_error < opts.tolerance,
        max_relative_error,
        tolerance: opts.tolerance,
        entries,
    })
}

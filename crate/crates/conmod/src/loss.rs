//! Training objectives: error-to-signal ratio, multi-resolution spectral
//! loss, and their weighted sum. Each has a plain-value form for
//! evaluation and a graph form for training; the two share the same
//! spectrogram plans so they agree bitwise.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::spectral::MagPlan;

pub const ESR_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda: f64,
    pub fft_sizes: Vec<usize>,
    pub esr_epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 2.0,
            fft_sizes: vec![512, 1024, 2048],
            esr_epsilon: ESR_EPSILON,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("loss lambda must be finite and nonnegative"));
        }
        if self.fft_sizes.is_empty() {
            return Err(Error::invalid("loss needs at least one fft size"));
        }
        if !(self.esr_epsilon.is_finite() && self.esr_epsilon > 0.0) {
            return Err(Error::invalid("esr epsilon must be positive"));
        }
        Ok(())
    }
}

fn check_pair(target: &[f64], pred: &[f64]) -> Result<()> {
    if target.is_empty() || target.len() != pred.len() {
        return Err(Error::invalid(format!(
            "loss inputs must be equal nonempty lengths, got {} vs {}",
            target.len(),
            pred.len()
        )));
    }
    Ok(())
}

/// Relative energy of the residual: sum((y - y_hat)^2) / (sum(y^2) + eps).
pub fn esr(target: &[f64], pred: &[f64]) -> Result<f64> {
    esr_with_epsilon(target, pred, ESR_EPSILON)
}

pub fn esr_with_epsilon(target: &[f64], pred: &[f64], epsilon: f64) -> Result<f64> {
    check_pair(target, pred)?;
    let num: f64 = target
        .iter()
        .zip(pred)
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum();
    let den: f64 = target.iter().map(|&y| y * y).sum::<f64>() + epsilon;
    Ok(num / den)
}

/// Per-resolution magnitude plans plus the weights, built once and reused
/// across training steps.
pub struct LossPlan {
    pub weights: LossWeights,
    plans: Vec<MagPlan>,
}

/// Target-side quantities that never change during training.
pub struct PreparedTarget {
    pub samples: Vec<f64>,
    pub sum_sq: f64,
    mags: Vec<Array2<f64>>,
    log_mags: Vec<Array2<f64>>,
}

impl LossPlan {
    pub fn new(weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        let plans = weights
            .fft_sizes
            .iter()
            .map(|&n| MagPlan::new(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(LossPlan { weights, plans })
    }

    pub fn min_len(&self) -> usize {
        self.plans.iter().map(|p| p.fft_size).max().unwrap_or(1)
    }

    pub fn prepare(&self, target: &[f64]) -> Result<PreparedTarget> {
        if target.len() < self.min_len() {
            return Err(Error::invalid(format!(
                "target of {} samples is shorter than the largest fft size {}",
                target.len(),
                self.min_len()
            )));
        }
        let mags = self
            .plans
            .iter()
            .map(|p| p.magnitude(target))
            .collect::<Result<Vec<_>>>()?;
        let log_mags = mags.iter().map(|m| m.mapv(f64::ln)).collect();
        Ok(PreparedTarget {
            sum_sq: target.iter().map(|&y| y * y).sum(),
            samples: target.to_vec(),
            mags,
            log_mags,
        })
    }

    /// Sum over resolutions of the L1 magnitude and L1 log-magnitude
    /// distances. Each L1 term is an entrywise mean, keeping every
    /// resolution at unit scale regardless of signal length so the
    /// lambda-weighted time-domain term stays commensurate.
    pub fn mrsl(&self, target: &[f64], pred: &[f64]) -> Result<f64> {
        check_pair(target, pred)?;
        let prepared = self.prepare(target)?;
        self.mrsl_prepared(&prepared, pred)
    }

    pub fn mrsl_prepared(&self, prepared: &PreparedTarget, pred: &[f64]) -> Result<f64> {
        check_pair(&prepared.samples, pred)?;
        let mut total = 0.0;
        for (i, plan) in self.plans.iter().enumerate() {
            let mag = plan.magnitude(pred)?;
            let lin = (&mag - &prepared.mags[i]).mapv(f64::abs).sum();
            let log = (mag.mapv(f64::ln) - &prepared.log_mags[i])
                .mapv(f64::abs)
                .sum();
            total += (lin + log) / mag.len() as f64;
        }
        Ok(total)
    }

    /// lambda * esr + mrsl, plus the two components.
    pub fn total(&self, target: &[f64], pred: &[f64]) -> Result<LossBreakdown> {
        let prepared = self.prepare(target)?;
        self.total_prepared(&prepared, pred)
    }

    pub fn total_prepared(&self, prepared: &PreparedTarget, pred: &[f64]) -> Result<LossBreakdown> {
        let esr = esr_with_epsilon(&prepared.samples, pred, self.weights.esr_epsilon)?;
        let mrsl = self.mrsl_prepared(prepared, pred)?;
        Ok(LossBreakdown {
            esr,
            mrsl,
            total: self.weights.lambda * esr + mrsl,
        })
    }

    // --- differentiable path ---------------------------------------------

    /// ESR of a 1 x L prediction variable against the prepared target.
    pub fn esr_graph<'g>(
        &self,
        g: &'g Graph,
        prepared: &PreparedTarget,
        pred: Var<'g>,
    ) -> Result<Var<'g>> {
        if pred.shape() != (1, prepared.samples.len()) {
            return Err(Error::shape(
                "esr prediction",
                pred.shape(),
                (1, prepared.samples.len()),
            ));
        }
        let target = g.row(&prepared.samples);
        let diff = target.sub(pred)?;
        let num = diff.mul(diff)?.sum();
        Ok(num.scale(1.0 / (prepared.sum_sq + self.weights.esr_epsilon)))
    }

    pub fn mrsl_graph<'g>(
        &self,
        g: &'g Graph,
        prepared: &PreparedTarget,
        pred: Var<'g>,
    ) -> Result<Var<'g>> {
        if pred.shape() != (1, prepared.samples.len()) {
            return Err(Error::shape(
                "mrsl prediction",
                pred.shape(),
                (1, prepared.samples.len()),
            ));
        }
        let mut total: Option<Var<'g>> = None;
        for (i, plan) in self.plans.iter().enumerate() {
            let mag = plan.magnitude_graph(g, pred)?;
            let lin = mag.sub(g.constant(prepared.mags[i].clone()))?.abs().sum();
            let log = mag
                .ln()
                .sub(g.constant(prepared.log_mags[i].clone()))?
                .abs()
                .sum();
            let term = lin.add(log)?.scale(1.0 / prepared.mags[i].len() as f64);
            total = Some(match total {
                None => term,
                Some(t) => t.add(term)?,
            });
        }
        total.ok_or_else(|| Error::invalid("loss needs at least one fft size"))
    }

    pub fn total_graph<'g>(
        &self,
        g: &'g Graph,
        prepared: &PreparedTarget,
        pred: Var<'g>,
    ) -> Result<Var<'g>> {
        let esr = self.esr_graph(g, prepared, pred)?;
        let mrsl = self.mrsl_graph(g, prepared, pred)?;
        esr.scale(self.weights.lambda).add(mrsl)
    }
}

/// Component values of one loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub esr: f64,
    pub mrsl: f64,
    pub total: f64,
}

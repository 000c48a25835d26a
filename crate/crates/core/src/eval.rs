//! Metrics, the naive baseline, the classical-gate ablation and report assembly.

use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::decoder::Forecast;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::Model;
use crate::parallel::{map_indexed, Stopwatch};
use crate::qgate::clipped_sigmoid;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn check_same_shape(pred: &Matrix, truth: &Matrix) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(invalid(format!(
            "prediction is {:?} but truth is {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if pred.as_slice().is_empty() {
        return Err(invalid("cannot score an empty forecast"));
    }
    Ok(())
}

pub fn mse(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_same_shape(pred, truth)?;
    let n = pred.as_slice().len() as f64;
    Ok(pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn mae(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    check_same_shape(pred, truth)?;
    let n = pred.as_slice().len() as f64;
    Ok(pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

/// Repeats the last observation over the horizon.
pub fn naive_last_value(sample: &WindowSample) -> Forecast {
    let mut values = Matrix::zeros(sample.y.rows(), sample.x_last.len());
    for r in 0..values.rows() {
        values.row_mut(r).copy_from_slice(&sample.x_last);
    }
    Forecast { values }
}

/// `clamp(σ(wᵀx̄ + b), g_min, g_max)`
pub fn classical_gate_ablation(x_mean: &[f64], w: &[f64], b: f64, g_min: f64, g_max: f64) -> Result<f64> {
    if x_mean.len() != w.len() {
        return Err(invalid(format!(
            "gate weight has length {}, input has {}",
            w.len(),
            x_mean.len()
        )));
    }
    Ok(clipped_sigmoid(dot(w, x_mean) + b, g_min, g_max).0)
}

/// Input-driven sigmoid gate used as the ablation baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalGate {
    pub w: Vec<f64>,
    pub b: f64,
    /// One gate per step from `x_t` instead of one per window from `x̄`.
    pub per_step: bool,
    pub g_min: f64,
    pub g_max: f64,
}

impl ClassicalGate {
    fn gate_of(&self, x: &[f64]) -> (f64, f64, bool) {
        clipped_sigmoid(dot(&self.w, x) + self.b, self.g_min, self.g_max)
    }

    pub fn step_gates(&self, window: &Matrix) -> Vec<f64> {
        if self.per_step {
            (0..window.rows()).map(|t| self.gate_of(window.row(t)).0).collect()
        } else {
            vec![self.gate_of(&window_mean(window)).0; window.rows()]
        }
    }

    /// Gradient of the loss with respect to `(w, b)` given `∂L/∂g_t` for every step.
    pub fn backward(&self, window: &Matrix, dgate_per_step: &[f64]) -> (Vec<f64>, f64) {
        let mut dw = vec![0.0; self.w.len()];
        let mut db = 0.0;
        let mut accumulate = |x: &[f64], dg: f64| {
            let (_, sig, clipped) = self.gate_of(x);
            if clipped {
                return;
            }
            let ds = dg * sig * (1.0 - sig);
            crate::linalg::axpy(ds, x, &mut dw);
            db += ds;
        };
        if self.per_step {
            for (t, &dg) in dgate_per_step.iter().enumerate() {
                accumulate(window.row(t), dg);
            }
        } else {
            accumulate(&window_mean(window), dgate_per_step.iter().sum());
        }
        (dw, db)
    }
}

pub fn window_mean(window: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; window.cols()];
    for t in 0..window.rows() {
        crate::linalg::add_assign(&mut mean, window.row(t));
    }
    let n = window.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub schema_version: u32,
    pub dataset: String,
    pub horizon: usize,
    pub split: String,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
    pub seconds: f64,
}

pub const REPORT_CSV_HEADER: &str = "dataset,H,split,mse,mae,n,seed,config_hash,seconds";

impl ForecastReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "unsupported report schema version {}",
                r.schema_version
            )));
        }
        Ok(r)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.horizon,
            self.split,
            self.mse,
            self.mae,
            self.n,
            self.seed,
            self.config_hash,
            self.seconds
        )
    }
}

/// Labels carried into a report.
#[derive(Debug, Clone, Default)]
pub struct ReportLabels {
    pub dataset: String,
    pub split: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Per-sample MSE/MAE of an eval-mode forward pass.
pub fn score_samples(model: &Model, samples: &[WindowSample]) -> Result<Vec<(f64, f64)>> {
    let quantum = model.quantum_gate()?;
    map_indexed(samples, |_, s| {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let trace = model.forward_sample(quantum.as_ref(), s, crate::decoder::Mode::Eval, &mut rng)?;
        Ok((mse(&trace.forecast.values, &s.y)?, mae(&trace.forecast.values, &s.y)?))
    })
    .into_iter()
    .collect()
}

/// Mean of per-sample metrics over every window of a split.
pub fn evaluate(model: &Model, samples: &[WindowSample], labels: &ReportLabels) -> Result<ForecastReport> {
    if samples.is_empty() {
        return Err(invalid(format!("split '{}' has no windows", labels.split)));
    }
    let clock = Stopwatch::start();
    let scores = score_samples(model, samples)?;
    let n = scores.len() as f64;
    let mse = scores.iter().map(|s| s.0).sum::<f64>() / n;
    let mae = scores.iter().map(|s| s.1).sum::<f64>() / n;
    Ok(ForecastReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: labels.dataset.clone(),
        horizon: model.decoder.horizon,
        split: labels.split.clone(),
        mse,
        mae,
        n: scores.len(),
        seed: labels.seed,
        config_hash: labels.config_hash.clone(),
        seconds: clock.seconds(),
    })
}

/// Same aggregation for the last-value baseline.
pub fn evaluate_naive(samples: &[WindowSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(invalid("no windows to score"));
    }
    let mut acc = (0.0, 0.0);
    for s in samples {
        let f = naive_last_value(s);
        acc.0 += mse(&f.values, &s.y)?;
        acc.1 += mae(&f.values, &s.y)?;
    }
    let n = samples.len() as f64;
    Ok((acc.0 / n, acc.1 / n))
}

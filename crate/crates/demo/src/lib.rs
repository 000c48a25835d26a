//! Browser bindings for three interactive views: the gate surface, the
//! contraction of hidden-state differences, and a small sine forecaster trained
//! epoch by epoch.
//!
//! Every exported function is a thin wrapper over a plain Rust function with a
//! `String` error so the logic is testable off the browser.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use qssm::backbone::{step, BackboneParams, HiddenState};
use qssm::data::{prepare, synthetic_sine, CalendarMode, DataOptions, PreparedData};
use qssm::engine::{TrainConfig, Trainer};
use qssm::eval::{evaluate_naive, score_samples};
use qssm::linalg::{norm2, Matrix};
use qssm::qgate::{gate_backward, gate_forward, param_shift_gate_grad, Angle, GateParams};
use qssm::GateKind;

fn js(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

/// Gate value on an `n×n` grid of `(θ₁, θ₂) ∈ [−π, π]²`, row-major with θ₁ on
/// rows.
pub fn gate_surface_values(
    phi1: f64,
    phi2: f64,
    w1: f64,
    w2: f64,
    b_g: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    use std::f64::consts::PI;
    if !(2..=512).contains(&n) {
        return Err(format!("grid size must be in 2..=512, got {n}"));
    }
    let at = |i: usize| -PI + 2.0 * PI * i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = GateParams {
                theta1: at(i),
                phi1,
                theta2: at(j),
                phi2,
                w1,
                w2,
                b_g,
                ..GateParams::default()
            };
            out.push(gate_forward(&p).map_err(|e| e.to_string())?.g);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn gate_surface(
    phi1: f64,
    phi2: f64,
    w1: f64,
    w2: f64,
    b_g: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    gate_surface_values(phi1, phi2, w1, w2, b_g, n).map_err(js)
}

/// Gate output at one parameter setting together with `∂g/∂θ₁` computed two ways.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePoint {
    pub g: f64,
    pub z1: f64,
    pub z2: f64,
    pub clipped: bool,
    pub dtheta1_analytic: f64,
    pub dtheta1_shift: f64,
    /// `|w₁|/4`, the bound on `|∂g/∂θ₁|`.
    pub lipschitz_bound: f64,
}

pub fn gate_point_value(
    theta1: f64,
    phi1: f64,
    theta2: f64,
    phi2: f64,
    w1: f64,
    w2: f64,
    b_g: f64,
) -> Result<GatePoint, String> {
    let p = GateParams {
        theta1,
        phi1,
        theta2,
        phi2,
        w1,
        w2,
        b_g,
        ..GateParams::default()
    };
    let out = gate_forward(&p).map_err(|e| e.to_string())?;
    Ok(GatePoint {
        g: out.g,
        z1: out.z1,
        z2: out.z2,
        clipped: out.clipped,
        dtheta1_analytic: gate_backward(&out, &p, 1.0).theta1,
        dtheta1_shift: param_shift_gate_grad(&p, Angle::Theta1).map_err(|e| e.to_string())?,
        lipschitz_bound: w1.abs() / 4.0,
    })
}

#[wasm_bindgen]
pub fn gate_point(
    theta1: f64,
    phi1: f64,
    theta2: f64,
    phi2: f64,
    w1: f64,
    w2: f64,
    b_g: f64,
) -> Result<GatePoint, JsError> {
    gate_point_value(theta1, phi1, theta2, phi2, w1, w2, b_g).map_err(js)
}

/// Runs two hidden states through the same random inputs and returns
/// `[‖Δh_t‖, (1−g)^t·‖Δh_0‖]` for `t = 0..=steps`, interleaved.
pub fn contraction_values(g: f64, steps: usize, d: usize, seed: u64) -> Result<Vec<f64>, String> {
    if !(0.05..=0.95).contains(&g) {
        return Err(format!("gate must lie in [0.05, 0.95], got {g}"));
    }
    if d < 2 || steps > 10_000 {
        return Err("need d >= 2 and at most 10000 steps".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = 3;
    let mut rand_vec = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-s..s)).collect() };
    let mut p = BackboneParams::zeros(f, d, d);
    p.p_weight = Matrix::from_vec(d, f, rand_vec(d * f, 1.0)).map_err(|e| e.to_string())?;
    p.w_weight = Matrix::from_vec(d, d, rand_vec(d * d, 1.0)).map_err(|e| e.to_string())?;
    let mut a = HiddenState { h: rand_vec(d, 5.0) };
    let mut b = HiddenState { h: rand_vec(d, 5.0) };
    let dist = |a: &HiddenState, b: &HiddenState| {
        norm2(&a.h.iter().zip(&b.h).map(|(x, y)| x - y).collect::<Vec<_>>())
    };
    let d0 = dist(&a, &b);
    let mut out = vec![d0, d0];
    for t in 1..=steps {
        let x = rand_vec(f, 2.0);
        a = step(&a, &x, 0.0, g, &p).map_err(|e| e.to_string())?;
        b = step(&b, &x, 0.0, g, &p).map_err(|e| e.to_string())?;
        out.push(dist(&a, &b));
        out.push(d0 * (1.0 - g).powi(t as i32));
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn contraction_trajectory(g: f64, steps: usize, d: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    contraction_values(g, steps, d, seed).map_err(js)
}

pub const SINE_WINDOW: usize = 32;
pub const SINE_HORIZON: usize = 8;

/// A sine forecaster trained one epoch at a time.
#[wasm_bindgen]
pub struct SineDemo {
    data: PreparedData,
    trainer: Trainer,
}

impl SineDemo {
    pub fn create(period: f64, gate: &str, seed: u64) -> Result<SineDemo, String> {
        if !(4.0..=200.0).contains(&period) {
            return Err(format!("period must be in [4, 200], got {period}"));
        }
        let gate: GateKind = gate.parse().map_err(|e: qssm::Error| e.to_string())?;
        let series = synthetic_sine(1200, period, 0.0, 0);
        let data = prepare(
            &series,
            &DataOptions {
                window: SINE_WINDOW,
                horizon: SINE_HORIZON,
                calendar: CalendarMode::None,
                predict_calendar: false,
                target_columns: vec![],
            },
        )
        .map_err(|e| e.to_string())?;
        let config = TrainConfig {
            window: SINE_WINDOW,
            horizon: SINE_HORIZON,
            k: 32,
            d: 32,
            max_epochs: 200,
            seed,
            gate,
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(&config, &data).map_err(|e| e.to_string())?;
        Ok(SineDemo { data, trainer })
    }

    /// Up to `n` epochs; returns `[epoch, train_mse, val_mse, lr, gate]` per epoch run.
    pub fn run_epochs(&mut self, n: usize) -> Result<Vec<f64>, String> {
        let mut out = Vec::new();
        for _ in 0..n {
            match self.trainer.epoch(&self.data).map_err(|e| e.to_string())? {
                Some(r) => out.extend([r.epoch as f64, r.train_mse, r.val_mse, r.lr, r.gate_value]),
                None => break,
            }
        }
        Ok(out)
    }

    /// `[history (W), forecast (H), truth (H)]` for test window `index`, z-scored.
    pub fn forecast_values(&self, index: usize) -> Result<Vec<f64>, String> {
        let s = self
            .data
            .test
            .get(index)
            .ok_or_else(|| format!("test window {index} out of range"))?;
        let f = self.trainer.store().model().predict(s).map_err(|e| e.to_string())?;
        let mut out: Vec<f64> = (0..s.x.rows()).map(|t| s.x[(t, 0)]).collect();
        out.extend(f.values.as_slice());
        out.extend(s.y.as_slice());
        Ok(out)
    }

    pub fn test_mse_value(&self) -> Result<f64, String> {
        let s = score_samples(self.trainer.store().model(), &self.data.test).map_err(|e| e.to_string())?;
        Ok(s.iter().map(|x| x.0).sum::<f64>() / s.len() as f64)
    }
}

#[wasm_bindgen]
impl SineDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(period: f64, gate: &str, seed: u64) -> Result<SineDemo, JsError> {
        SineDemo::create(period, gate, seed).map_err(js)
    }

    pub fn train_epochs(&mut self, n: usize) -> Result<Vec<f64>, JsError> {
        self.run_epochs(n).map_err(js)
    }

    pub fn done(&self) -> bool {
        self.trainer.is_done()
    }

    pub fn test_windows(&self) -> usize {
        self.data.test.len()
    }

    pub fn forecast(&self, index: usize) -> Result<Vec<f64>, JsError> {
        self.forecast_values(index).map_err(js)
    }

    pub fn test_mse(&self) -> Result<f64, JsError> {
        self.test_mse_value().map_err(js)
    }

    pub fn naive_test_mse(&self) -> Result<f64, JsError> {
        evaluate_naive(&self.data.test).map(|r| r.0).map_err(js)
    }
}

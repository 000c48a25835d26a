//! The assembled forecaster: gate, backbone and decoder plus the flat tensor view
//! the parameter store and checkpoints work against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backbone::{encode_with_gates, BackboneParams, EncodeCache};
use crate::data::WindowSample;
use crate::decoder::{decode, DecodeCache, DecoderParams, Forecast, Mode};
use crate::error::{invalid, Error, Result};
use crate::eval::ClassicalGate;
use crate::qgate::{gate_forward, GateOutput, GateParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// Two single-qubit circuits, one gate value per forward pass.
    Quantum,
    /// Sigmoid of a linear map of the window mean, one value per window.
    Classical,
    /// Sigmoid of a linear map of each input row, one value per step.
    ClassicalPerStep,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::Quantum => "quantum",
            GateKind::Classical => "classical",
            GateKind::ClassicalPerStep => "classical-per-step",
        })
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(GateKind::Quantum),
            "classical" => Ok(GateKind::Classical),
            "classical-per-step" => Ok(GateKind::ClassicalPerStep),
            other => Err(invalid(format!("unknown gate kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub f_in: usize,
    pub k: usize,
    pub d: usize,
    pub horizon: usize,
    pub f_out: usize,
    pub dropout_p: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub gate: GateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Quantum(GateParams),
    Classical(ClassicalGate),
}

/// What a tensor is, for initialization and weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    /// Linear-layer weight; Kaiming-initialized and decayed.
    Weight,
    Bias,
    NormScale,
    NormShift,
    CalendarScale,
    GateAngle,
    GateMixer,
    GateBias,
}

pub struct TensorRef<'a> {
    pub name: &'static str,
    pub kind: TensorKind,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

pub struct TensorMut<'a> {
    pub name: &'static str,
    pub kind: TensorKind,
    pub shape: (usize, usize),
    pub data: &'a mut [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub gate: Gate,
    pub backbone: BackboneParams,
    pub decoder: DecoderParams,
    pub calendar_columns: Vec<usize>,
}

/// Per-window forward trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub gates: Vec<f64>,
    pub encode: EncodeCache,
    pub decode: DecodeCache,
    pub forecast: Forecast,
}

impl Model {
    /// Zero weights, identity layer norm, gate at its default initialization.
    pub fn zeros(dims: &ModelDims, calendar_columns: Vec<usize>) -> Result<Self> {
        if dims.f_in == 0 || dims.k == 0 || dims.d < 2 || dims.horizon == 0 || dims.f_out == 0 {
            return Err(invalid(format!("degenerate model dimensions {dims:?}")));
        }
        let gate = match dims.gate {
            GateKind::Quantum => Gate::Quantum(GateParams {
                g_min: dims.g_min,
                g_max: dims.g_max,
                ..GateParams::default()
            }),
            kind => Gate::Classical(ClassicalGate {
                w: vec![0.0; dims.f_in],
                b: 0.0,
                per_step: kind == GateKind::ClassicalPerStep,
                g_min: dims.g_min,
                g_max: dims.g_max,
            }),
        };
        let model = Self {
            gate,
            backbone: BackboneParams::zeros(dims.f_in, dims.k, dims.d),
            decoder: DecoderParams::zeros(dims.d, dims.horizon, dims.f_out, dims.dropout_p),
            calendar_columns,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dims(&self) -> ModelDims {
        let (gate, g_min, g_max) = match &self.gate {
            Gate::Quantum(p) => (GateKind::Quantum, p.g_min, p.g_max),
            Gate::Classical(c) if c.per_step => (GateKind::ClassicalPerStep, c.g_min, c.g_max),
            Gate::Classical(c) => (GateKind::Classical, c.g_min, c.g_max),
        };
        ModelDims {
            f_in: self.backbone.input_dim(),
            k: self.backbone.proj_dim(),
            d: self.backbone.hidden_dim(),
            horizon: self.decoder.horizon,
            f_out: self.decoder.f_out,
            dropout_p: self.decoder.dropout_p,
            g_min,
            g_max,
            gate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.decoder.validate()?;
        if self.decoder.hidden_dim() != self.backbone.hidden_dim() {
            return Err(invalid("decoder and backbone hidden widths differ"));
        }
        match &self.gate {
            Gate::Quantum(p) => p.validate()?,
            Gate::Classical(c) => {
                if c.w.len() != self.backbone.input_dim() {
                    return Err(invalid("classical gate weight length must equal F_in"));
                }
            }
        }
        if self
            .calendar_columns
            .iter()
            .any(|&c| c >= self.backbone.input_dim())
        {
            return Err(invalid("calendar column out of range"));
        }
        Ok(())
    }

    /// Quantum gate output, when the model uses the quantum gate.
    pub fn quantum_gate(&self) -> Result<Option<GateOutput>> {
        match &self.gate {
            Gate::Quantum(p) => gate_forward(p).map(Some),
            Gate::Classical(_) => Ok(None),
        }
    }

    /// Gate value for every step of `sample`.
    pub fn step_gates(&self, quantum: Option<&GateOutput>, sample: &WindowSample) -> Vec<f64> {
        let w = sample.x.rows();
        match (&self.gate, quantum) {
            (Gate::Quantum(_), Some(out)) => vec![out.g; w],
            (Gate::Quantum(p), None) => {
                vec![gate_forward(p).map(|o| o.g).unwrap_or(p.g_min); w]
            }
            (Gate::Classical(c), _) => c.step_gates(&sample.x),
        }
    }

    pub fn check_sample(&self, sample: &WindowSample) -> Result<()> {
        if sample.x.cols() != self.backbone.input_dim() {
            return Err(invalid(format!(
                "sample has {} input features, model expects {}",
                sample.x.cols(),
                self.backbone.input_dim()
            )));
        }
        if sample.y.shape() != (self.decoder.horizon, self.decoder.f_out)
            || sample.x_last.len() != self.decoder.f_out
        {
            return Err(invalid(format!(
                "sample targets are {}x{}, model predicts {}x{}",
                sample.y.rows(),
                sample.y.cols(),
                self.decoder.horizon,
                self.decoder.f_out
            )));
        }
        Ok(())
    }

    pub fn forward_sample<R: rand::Rng + ?Sized>(
        &self,
        quantum: Option<&GateOutput>,
        sample: &WindowSample,
        mode: Mode,
        rng: &mut R,
    ) -> Result<SampleTrace> {
        self.check_sample(sample)?;
        let gates = self.step_gates(quantum, sample);
        let (h, encode) =
            encode_with_gates(&sample.x, &gates, &self.backbone, &self.calendar_columns)?;
        let (forecast, decode) = decode(&h, &sample.x_last, &self.decoder, mode, rng)?;
        Ok(SampleTrace {
            gates,
            encode,
            decode,
            forecast,
        })
    }

    /// Eval-mode forecast for one window.
    pub fn predict(&self, sample: &WindowSample) -> Result<Forecast> {
        let q = self.quantum_gate()?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        Ok(self.forward_sample(q.as_ref(), sample, Mode::Eval, &mut rng)?.forecast)
    }

    /// Every trainable tensor in a fixed order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        use std::slice::from_ref;
        use TensorKind::*;
        let mut out = Vec::new();
        let mut push = |name, kind, shape, data| out.push(TensorRef { name, kind, shape, data });
        match &self.gate {
            Gate::Quantum(p) => {
                push("gate.theta1", GateAngle, (1, 1), from_ref(&p.theta1));
                push("gate.phi1", GateAngle, (1, 1), from_ref(&p.phi1));
                push("gate.theta2", GateAngle, (1, 1), from_ref(&p.theta2));
                push("gate.phi2", GateAngle, (1, 1), from_ref(&p.phi2));
                push("gate.w1", GateMixer, (1, 1), from_ref(&p.w1));
                push("gate.w2", GateMixer, (1, 1), from_ref(&p.w2));
                push("gate.b_g", GateBias, (1, 1), from_ref(&p.b_g));
            }
            Gate::Classical(c) => {
                push("gate.w", GateMixer, (1, c.w.len()), &c.w);
                push("gate.b", GateBias, (1, 1), from_ref(&c.b));
            }
        }
        let bb = &self.backbone;
        push("backbone.p_weight", Weight, bb.p_weight.shape(), bb.p_weight.as_slice());
        push("backbone.p_bias", Bias, (1, bb.p_bias.len()), &bb.p_bias);
        push("backbone.w_weight", Weight, bb.w_weight.shape(), bb.w_weight.as_slice());
        push("backbone.b", Bias, (1, bb.b.len()), &bb.b);
        push("backbone.alpha", CalendarScale, (1, 1), from_ref(&bb.alpha));
        push("backbone.ln_gamma", NormScale, (1, bb.ln_gamma.len()), &bb.ln_gamma);
        push("backbone.ln_beta", NormShift, (1, bb.ln_beta.len()), &bb.ln_beta);
        let dec = &self.decoder;
        push("decoder.w1", Weight, dec.w1.shape(), dec.w1.as_slice());
        push("decoder.b1", Bias, (1, dec.b1.len()), &dec.b1);
        push("decoder.w2", Weight, dec.w2.shape(), dec.w2.as_slice());
        push("decoder.b2", Bias, (1, dec.b2.len()), &dec.b2);
        out
    }

    /// Mutable twin of [`Model::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        use std::slice::from_mut;
        use TensorKind::*;
        let mut out = Vec::new();
        let mut push = |name, kind, shape, data| out.push(TensorMut { name, kind, shape, data });
        match &mut self.gate {
            Gate::Quantum(p) => {
                push("gate.theta1", GateAngle, (1, 1), from_mut(&mut p.theta1));
                push("gate.phi1", GateAngle, (1, 1), from_mut(&mut p.phi1));
                push("gate.theta2", GateAngle, (1, 1), from_mut(&mut p.theta2));
                push("gate.phi2", GateAngle, (1, 1), from_mut(&mut p.phi2));
                push("gate.w1", GateMixer, (1, 1), from_mut(&mut p.w1));
                push("gate.w2", GateMixer, (1, 1), from_mut(&mut p.w2));
                push("gate.b_g", GateBias, (1, 1), from_mut(&mut p.b_g));
            }
            Gate::Classical(c) => {
                let n = c.w.len();
                push("gate.w", GateMixer, (1, n), &mut c.w);
                push("gate.b", GateBias, (1, 1), from_mut(&mut c.b));
            }
        }
        let bb = &mut self.backbone;
        let s = bb.p_weight.shape();
        push("backbone.p_weight", Weight, s, bb.p_weight.as_mut_slice());
        let n = bb.p_bias.len();
        push("backbone.p_bias", Bias, (1, n), &mut bb.p_bias);
        let s = bb.w_weight.shape();
        push("backbone.w_weight", Weight, s, bb.w_weight.as_mut_slice());
        let n = bb.b.len();
        push("backbone.b", Bias, (1, n), &mut bb.b);
        push("backbone.alpha", CalendarScale, (1, 1), from_mut(&mut bb.alpha));
        let n = bb.ln_gamma.len();
        push("backbone.ln_gamma", NormScale, (1, n), &mut bb.ln_gamma);
        push("backbone.ln_beta", NormShift, (1, n), &mut bb.ln_beta);
        let dec = &mut self.decoder;
        let s = dec.w1.shape();
        push("decoder.w1", Weight, s, dec.w1.as_mut_slice());
        let n = dec.b1.len();
        push("decoder.b1", Bias, (1, n), &mut dec.b1);
        let s = dec.w2.shape();
        push("decoder.w2", Weight, s, dec.w2.as_mut_slice());
        let n = dec.b2.len();
        push("decoder.b2", Bias, (1, n), &mut dec.b2);
        out
    }

    /// A model of the same shape with every trainable entry set to zero, used as a
    /// gradient accumulator.
    pub fn zeroed_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.data.fill(0.0);
        }
        out
    }

    /// `self += other`, entrywise over trainable tensors.
    pub fn add_assign(&mut self, other: &Model) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::linalg::add_assign(a.data, b.data);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

//! Single-qubit variational gate.
//!
//! Each of the two circuits prepares `RX(φ)·RY(θ)|0⟩` and measures `⟨Z⟩`. The two
//! expectations are mixed linearly, squashed by a sigmoid and clamped to
//! `[g_min, g_max]`:
//!
//! ```text
//! z_i = cos θ_i · cos φ_i
//! s   = w1·z1 + w2·z2 + b_g
//! g   = clamp(σ(s), g_min, g_max)
//! ```
//!
//! Gradients are available through the chain rule ([`gate_backward`]) and through
//! the parameter-shift rule ([`param_shift_grad`]); the two agree to rounding error.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Error, Result};

pub const DEFAULT_G_MIN: f64 = 0.05;
pub const DEFAULT_G_MAX: f64 = 0.95;

const NORM_TOLERANCE: f64 = 1e-9;

type Gate2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    pub const ZERO: QubitState = QubitState {
        amp0: Complex64::new(1.0, 0.0),
        amp1: Complex64::new(0.0, 0.0),
    };

    pub const ONE: QubitState = QubitState {
        amp0: Complex64::new(0.0, 0.0),
        amp1: Complex64::new(1.0, 0.0),
    };

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    fn apply(self, m: &Gate2) -> Self {
        QubitState {
            amp0: m[0][0] * self.amp0 + m[0][1] * self.amp1,
            amp1: m[1][0] * self.amp0 + m[1][1] * self.amp1,
        }
    }
}

fn ry(theta: f64) -> Gate2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn rx(phi: f64) -> Gate2 {
    let (s, c) = (phi / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

/// `RX(phi)·RY(theta)·|0⟩`
pub fn prepare_state(theta: f64, phi: f64) -> Result<QubitState> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(invalid(format!(
            "rotation angles must be finite (theta={theta}, phi={phi})"
        )));
    }
    Ok(QubitState::ZERO.apply(&ry(theta)).apply(&rx(phi)))
}

/// Pauli-Z expectation `|amp0|² − |amp1|²`.
pub fn expect_z(state: &QubitState) -> Result<f64> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(contract(format!(
            "state is not normalized (|ψ|² = {n})"
        )));
    }
    Ok(state.amp0.norm_sqr() - state.amp1.norm_sqr())
}

fn circuit_z(theta: f64, phi: f64) -> Result<f64> {
    expect_z(&prepare_state(theta, phi)?)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clamped sigmoid shared by the quantum and classical gates.
///
/// Returns `(g, σ(s), clipped)`.
pub fn clipped_sigmoid(s: f64, g_min: f64, g_max: f64) -> (f64, f64, bool) {
    let sig = sigmoid(s);
    if sig < g_min {
        (g_min, sig, true)
    } else if sig > g_max {
        (g_max, sig, true)
    } else {
        (sig, sig, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
    pub w1: f64,
    pub w2: f64,
    pub b_g: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl Default for GateParams {
    /// The training initialization: every angle at π/2 so both circuits read `⟨Z⟩ = 0`
    /// and the gate opens at exactly 0.5.
    fn default() -> Self {
        Self {
            theta1: FRAC_PI_2,
            phi1: FRAC_PI_2,
            theta2: FRAC_PI_2,
            phi2: FRAC_PI_2,
            w1: 0.01,
            w2: 0.01,
            b_g: 0.0,
            g_min: DEFAULT_G_MIN,
            g_max: DEFAULT_G_MAX,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.g_min && self.g_min < self.g_max && self.g_max < 1.0) {
            return Err(invalid(format!(
                "clamp bounds must satisfy 0 < g_min < g_max < 1 (got {}, {})",
                self.g_min, self.g_max
            )));
        }
        let trainables = [
            self.theta1, self.phi1, self.theta2, self.phi2, self.w1, self.w2, self.b_g,
        ];
        if trainables.iter().any(|v| !v.is_finite()) {
            return Err(invalid("gate parameters must be finite"));
        }
        Ok(())
    }

    pub fn angle(&self, which: Angle) -> f64 {
        match which {
            Angle::Theta1 => self.theta1,
            Angle::Phi1 => self.phi1,
            Angle::Theta2 => self.theta2,
            Angle::Phi2 => self.phi2,
        }
    }

    pub fn angle_mut(&mut self, which: Angle) -> &mut f64 {
        match which {
            Angle::Theta1 => &mut self.theta1,
            Angle::Phi1 => &mut self.phi1,
            Angle::Theta2 => &mut self.theta2,
            Angle::Phi2 => &mut self.phi2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOutput {
    pub g: f64,
    pub z1: f64,
    pub z2: f64,
    pub s: f64,
    pub sigma: f64,
    pub clipped: bool,
}

pub fn gate_forward(params: &GateParams) -> Result<GateOutput> {
    params.validate()?;
    let z1 = circuit_z(params.theta1, params.phi1)?;
    let z2 = circuit_z(params.theta2, params.phi2)?;
    let s = params.w1 * z1 + params.w2 * z2 + params.b_g;
    let (g, sigma, clipped) = clipped_sigmoid(s, params.g_min, params.g_max);
    Ok(GateOutput {
        g,
        z1,
        z2,
        s,
        sigma,
        clipped,
    })
}

/// Gradient of a scalar loss with respect to each trainable gate parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GateGrad {
    pub theta1: f64,
    pub phi1: f64,
    pub theta2: f64,
    pub phi2: f64,
    pub w1: f64,
    pub w2: f64,
    pub b_g: f64,
}

impl GateGrad {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.theta1, self.phi1, self.theta2, self.phi2, self.w1, self.w2, self.b_g,
        ]
    }

    pub const NAMES: [&'static str; 7] = ["theta1", "phi1", "theta2", "phi2", "w1", "w2", "b_g"];
}

/// Chain-rule backward pass. A saturated clamp has zero slope, so a clipped
/// output yields an all-zero gradient.
pub fn gate_backward(output: &GateOutput, params: &GateParams, upstream: f64) -> GateGrad {
    if output.clipped {
        return GateGrad::default();
    }
    let ds = upstream * output.sigma * (1.0 - output.sigma);
    let (st1, ct1) = params.theta1.sin_cos();
    let (sp1, cp1) = params.phi1.sin_cos();
    let (st2, ct2) = params.theta2.sin_cos();
    let (sp2, cp2) = params.phi2.sin_cos();
    GateGrad {
        theta1: ds * params.w1 * (-st1 * cp1),
        phi1: ds * params.w1 * (-ct1 * sp1),
        theta2: ds * params.w2 * (-st2 * cp2),
        phi2: ds * params.w2 * (-ct2 * sp2),
        w1: ds * output.z1,
        w2: ds * output.z2,
        b_g: ds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Angle {
    Theta1,
    Phi1,
    Theta2,
    Phi2,
}

impl Angle {
    pub const ALL: [Angle; 4] = [Angle::Theta1, Angle::Phi1, Angle::Theta2, Angle::Phi2];

    /// Index of the circuit (0 or 1) the angle belongs to.
    pub fn circuit(self) -> usize {
        match self {
            Angle::Theta1 | Angle::Phi1 => 0,
            Angle::Theta2 | Angle::Phi2 => 1,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Angle::Theta1 => "theta1",
            Angle::Phi1 => "phi1",
            Angle::Theta2 => "theta2",
            Angle::Phi2 => "phi2",
        })
    }
}

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta1" => Ok(Angle::Theta1),
            "phi1" => Ok(Angle::Phi1),
            "theta2" => Ok(Angle::Theta2),
            "phi2" => Ok(Angle::Phi2),
            other => Err(invalid(format!("unknown gate angle '{other}'"))),
        }
    }
}

/// `∂z/∂angle` for the circuit owning `which`, evaluated by running the circuit at
/// `angle ± π/2`.
pub fn param_shift_grad(params: &GateParams, which: Angle) -> Result<f64> {
    let mut plus = *params;
    let mut minus = *params;
    *plus.angle_mut(which) += FRAC_PI_2;
    *minus.angle_mut(which) -= FRAC_PI_2;
    let z = |p: &GateParams| match which.circuit() {
        0 => circuit_z(p.theta1, p.phi1),
        _ => circuit_z(p.theta2, p.phi2),
    };
    Ok(0.5 * (z(&plus)? - z(&minus)?))
}

/// Same as [`param_shift_grad`] but addressed by name, e.g. `"theta1"`.
pub fn param_shift_grad_named(params: &GateParams, which: &str) -> Result<f64> {
    param_shift_grad(params, which.parse()?)
}

/// `∂g/∂angle` assembled from a parameter-shift circuit derivative.
pub fn param_shift_gate_grad(params: &GateParams, which: Angle) -> Result<f64> {
    let out = gate_forward(params)?;
    if out.clipped {
        return Ok(0.0);
    }
    let w = if which.circuit() == 0 { params.w1 } else { params.w2 };
    Ok(out.sigma * (1.0 - out.sigma) * w * param_shift_grad(params, which)?)
}

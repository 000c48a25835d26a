//! Cross-checks of the three gradient paths: analytic backward passes, central
//! finite differences, and the parameter-shift rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::WindowSample;
use crate::decoder::Mode;
use crate::engine::{backward_with, forward_loss, ParameterStore};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::model::{Gate, GateKind, Model, ModelDims};
use crate::qgate::{gate_forward, param_shift_gate_grad, Angle, GateGrad, GateOutput, GateParams};

/// `|a − n| / max(|a|, |n|, 1)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Tolerance for parameter-shift vs analytic; both are exact.
    pub shift_tolerance: f64,
    /// Random gate parameter draws for the gate-level checks.
    pub gate_trials: usize,
    pub dropout_p: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            step: 1e-6,
            tolerance: 1e-7,
            shift_tolerance: 1e-12,
            gate_trials: 200,
            dropout_p: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub check: &'static str,
    pub compared: usize,
    pub max_rel_err: f64,
    /// Parameter with the largest error.
    pub worst: String,
    pub tolerance: f64,
    /// Every parameter whose error exceeded the tolerance, deduplicated.
    pub offenders: Vec<String>,
}

impl CheckSummary {
    fn new(check: &'static str, tolerance: f64) -> Self {
        Self {
            check,
            compared: 0,
            max_rel_err: 0.0,
            worst: String::new(),
            tolerance,
            offenders: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        self.compared += 1;
        if e > self.max_rel_err || self.worst.is_empty() {
            self.max_rel_err = self.max_rel_err.max(e);
            self.worst = name.to_string();
        }
        if !(e <= self.tolerance) && !self.offenders.iter().any(|o| o == name) {
            self.offenders.push(name.to_string());
        }
    }

    pub fn passed(&self) -> bool {
        self.offenders.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<CheckSummary>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckSummary::passed)
    }

    pub fn offenders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.checks {
            for o in &c.offenders {
                if !out.contains(o) {
                    out.push(o.clone());
                }
            }
        }
        out
    }

    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
    }
}

const GATE_NAMES: [&str; 7] = [
    "gate.theta1",
    "gate.phi1",
    "gate.theta2",
    "gate.phi2",
    "gate.w1",
    "gate.w2",
    "gate.b_g",
];

/// Gate parameters whose logit stays well inside the unclamped band.
fn random_gate(rng: &mut ChaCha8Rng) -> GateParams {
    use std::f64::consts::PI;
    GateParams {
        theta1: rng.gen_range(-PI..PI),
        phi1: rng.gen_range(-PI..PI),
        theta2: rng.gen_range(-PI..PI),
        phi2: rng.gen_range(-PI..PI),
        w1: rng.gen_range(-1.0..1.0),
        w2: rng.gen_range(-1.0..1.0),
        b_g: rng.gen_range(-0.5..0.5),
        ..GateParams::default()
    }
}

fn gate_param_mut(p: &mut GateParams, i: usize) -> &mut f64 {
    match i {
        0 => &mut p.theta1,
        1 => &mut p.phi1,
        2 => &mut p.theta2,
        3 => &mut p.phi2,
        4 => &mut p.w1,
        5 => &mut p.w2,
        _ => &mut p.b_g,
    }
}

/// Builds the tiny random model and batch the end-to-end check runs on.
pub fn tiny_problem(seed: u64, dropout_p: f64) -> Result<(ParameterStore, Vec<WindowSample>)> {
    let dims = ModelDims {
        f_in: 3,
        k: 4,
        d: 4,
        horizon: 2,
        f_out: 2,
        dropout_p,
        g_min: 0.05,
        g_max: 0.95,
        gate: GateKind::Quantum,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::zeros(&dims, vec![2])?;
    for t in model.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    }
    model.gate = Gate::Quantum(random_gate(&mut rng));
    let batch = (0..3)
        .map(|_| {
            let x = Matrix::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let y = Matrix::from_vec(2, 2, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let x_last = vec![x[(3, 0)], x[(3, 1)]];
            Ok(WindowSample { x, y, x_last })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ParameterStore::new(model), batch))
}

pub fn run(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    run_with(opts, crate::qgate::gate_backward)
}

/// [`run`] with a replaceable gate backward pass, so a deliberately broken
/// implementation can be shown to be caught.
pub fn run_with<F>(opts: &GradcheckOptions, gate_bw: F) -> Result<GradcheckReport>
where
    F: Fn(&GateOutput, &GateParams, f64) -> GateGrad + Copy,
{
    if opts.dropout_p != 0.0 {
        return Err(invalid(
            "gradcheck needs a deterministic forward pass; set dropout-p = 0",
        ));
    }
    if !(opts.step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let h = opts.step;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut fd = CheckSummary::new("gate analytic vs finite difference", opts.tolerance);
    let mut shift = CheckSummary::new("gate analytic vs parameter shift", opts.shift_tolerance);
    for _ in 0..opts.gate_trials {
        let p = random_gate(&mut rng);
        let out = gate_forward(&p)?;
        let analytic = gate_bw(&out, &p, 1.0).as_array();
        for (i, name) in GATE_NAMES.iter().enumerate() {
            let (mut plus, mut minus) = (p, p);
            *gate_param_mut(&mut plus, i) += h;
            *gate_param_mut(&mut minus, i) -= h;
            let n = (gate_forward(&plus)?.g - gate_forward(&minus)?.g) / (2.0 * h);
            fd.record(name, analytic[i], n);
        }
        for (i, angle) in Angle::ALL.iter().enumerate() {
            shift.record(GATE_NAMES[i], analytic[i], param_shift_gate_grad(&p, *angle)?);
        }
    }

    let mut e2e = CheckSummary::new("model analytic vs finite difference", opts.tolerance);
    let (mut store, batch) = tiny_problem(opts.seed, 0.0)?;
    let (_, cache) = forward_loss(&batch, &store, Mode::Eval, 0)?;
    backward_with(&cache, &mut store, gate_bw)?;
    let analytic = store.flat_grad();
    let loss_at = |s: &ParameterStore| forward_loss(&batch, s, Mode::Eval, 0).map(|r| r.0);
    let mut idx = 0;
    for ti in 0..store.slots().len() {
        let name = store.slots()[ti].name;
        let len = store.slots()[ti].grad.len();
        for e in 0..len {
            let mut plus = store.clone();
            plus.model_mut().tensors_mut()[ti].data[e] += h;
            let mut minus = store.clone();
            minus.model_mut().tensors_mut()[ti].data[e] -= h;
            let n = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
            let label = if len == 1 { name.to_string() } else { format!("{name}[{e}]") };
            e2e.record(&label, analytic[idx], n);
            idx += 1;
        }
    }
    Ok(GradcheckReport {
        checks: vec![fd, shift, e2e],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgate::gate_backward;

    #[test]
    fn default_run_passes() {
        let r = run(&GradcheckOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.max_rel_err() < 1e-7);
        let (store, _) = tiny_problem(0, 0.0).unwrap();
        assert_eq!(r.checks[2].compared, store.model().parameter_count());
    }

    #[test]
    fn sign_flip_on_theta1_is_named() {
        let flipped = |o: &GateOutput, p: &GateParams, u: f64| {
            let mut g = gate_backward(o, p, u);
            g.theta1 = -g.theta1;
            g
        };
        let r = run_with(&GradcheckOptions::default(), flipped).unwrap();
        assert!(!r.passed());
        assert_eq!(r.offenders(), vec!["gate.theta1".to_string()]);
    }

    #[test]
    fn dropout_refused() {
        let opts = GradcheckOptions {
            dropout_p: 0.1,
            ..GradcheckOptions::default()
        };
        assert!(run(&opts).unwrap_err().to_string().contains("dropout"));
    }

    #[test]
    fn relative_error_has_unit_floor() {
        assert_eq!(relative_error(1e-9, 2e-9), 1e-9);
        assert_eq!(relative_error(10.0, 11.0), 1.0 / 11.0);
    }
}

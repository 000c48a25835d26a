//! Gated linear recurrence over an input window.
//!
//! ```text
//! v_t = P·x_t + p_b
//! a_t = W·v_t + b + α·c
//! u_t = LN(a_t)
//! h_t = (1 − g)·h_{t−1} + g·u_t,   h_0 = 0
//! ```
//!
//! `c` is the mean of the calendar columns over the whole window and is shared by
//! every step.

use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Result};
use crate::linalg::{add_assign, Matrix};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneParams {
    pub p_weight: Matrix,
    pub p_bias: Vec<f64>,
    pub w_weight: Matrix,
    pub b: Vec<f64>,
    pub alpha: f64,
    pub ln_gamma: Vec<f64>,
    pub ln_beta: Vec<f64>,
}

impl BackboneParams {
    /// All-zero weights with an identity layer-norm affine.
    pub fn zeros(f_in: usize, k: usize, d: usize) -> Self {
        Self {
            p_weight: Matrix::zeros(k, f_in),
            p_bias: vec![0.0; k],
            w_weight: Matrix::zeros(d, k),
            b: vec![0.0; d],
            alpha: 0.0,
            ln_gamma: vec![1.0; d],
            ln_beta: vec![0.0; d],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.p_weight.cols()
    }

    pub fn proj_dim(&self) -> usize {
        self.p_weight.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_weight.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, d) = (self.proj_dim(), self.hidden_dim());
        if self.p_bias.len() != k
            || self.w_weight.cols() != k
            || self.b.len() != d
            || self.ln_gamma.len() != d
            || self.ln_beta.len() != d
        {
            return Err(invalid("backbone parameter shapes are inconsistent"));
        }
        if d < 2 {
            return Err(invalid("hidden width must be at least 2 for layer norm"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Vec<f64>,
}

impl HiddenState {
    pub fn zeros(d: usize) -> Self {
        Self { h: vec![0.0; d] }
    }
}

/// Mean over every (step × calendar column) entry of the window; 0 with no calendar
/// columns.
pub fn calendar_scalar(window: &Matrix, calendar_columns: &[usize]) -> Result<f64> {
    if let Some(&bad) = calendar_columns.iter().find(|&&c| c >= window.cols()) {
        return Err(invalid(format!(
            "calendar column {bad} out of range for window with {} columns",
            window.cols()
        )));
    }
    if calendar_columns.is_empty() || window.rows() == 0 {
        return Ok(0.0);
    }
    let sum: f64 = (0..window.rows())
        .flat_map(|t| calendar_columns.iter().map(move |&c| (t, c)))
        .map(|(t, c)| window[(t, c)])
        .sum();
    Ok(sum / (window.rows() * calendar_columns.len()) as f64)
}

/// Layer-norm statistics kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LnCache {
    /// Normalized input before the affine, `(v − μ)/σ`.
    pub xhat: Vec<f64>,
    pub mean: f64,
    pub var: f64,
}

impl LnCache {
    pub fn inv_std(&self) -> f64 {
        1.0 / (self.var + LN_EPS).sqrt()
    }
}

pub fn layer_norm(v: &[f64], gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    layer_norm_cached(v, gamma, beta).0
}

pub fn layer_norm_cached(v: &[f64], gamma: &[f64], beta: &[f64]) -> (Vec<f64>, LnCache) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    let xhat: Vec<f64> = v.iter().map(|x| (x - mean) * inv).collect();
    let out = xhat
        .iter()
        .zip(gamma.iter().zip(beta))
        .map(|(x, (g, b))| g * x + b)
        .collect();
    (out, LnCache { xhat, mean, var })
}

/// Returns the gradient with respect to the layer-norm input and accumulates the
/// affine gradients.
pub fn layer_norm_backward(
    cache: &LnCache,
    gamma: &[f64],
    dy: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let n = dy.len() as f64;
    let mut dxhat = vec![0.0; dy.len()];
    for i in 0..dy.len() {
        dgamma[i] += dy[i] * cache.xhat[i];
        dbeta[i] += dy[i];
        dxhat[i] = dy[i] * gamma[i];
    }
    let mean_dxhat = dxhat.iter().sum::<f64>() / n;
    let mean_dxhat_xhat = dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n;
    let inv = cache.inv_std();
    dxhat
        .iter()
        .zip(&cache.xhat)
        .map(|(dx, xh)| inv * (dx - mean_dxhat - xh * mean_dxhat_xhat))
        .collect()
}

struct StepTrace {
    v: Vec<f64>,
    u: Vec<f64>,
    ln: LnCache,
}

fn step_traced(
    h_prev: &[f64],
    x_t: &[f64],
    c: f64,
    g: f64,
    params: &BackboneParams,
) -> (Vec<f64>, StepTrace) {
    let mut v = params.p_weight.matvec(x_t);
    add_assign(&mut v, &params.p_bias);
    let mut a = params.w_weight.matvec(&v);
    for (ai, bi) in a.iter_mut().zip(&params.b) {
        *ai += bi + params.alpha * c;
    }
    let (u, ln) = layer_norm_cached(&a, &params.ln_gamma, &params.ln_beta);
    let h = h_prev
        .iter()
        .zip(&u)
        .map(|(hp, ut)| (1.0 - g) * hp + g * ut)
        .collect();
    (h, StepTrace { v, u, ln })
}

/// One recurrence step.
pub fn step(
    h_prev: &HiddenState,
    x_t: &[f64],
    c: f64,
    g: f64,
    params: &BackboneParams,
) -> Result<HiddenState> {
    if x_t.len() != params.input_dim() || h_prev.h.len() != params.hidden_dim() {
        return Err(invalid(format!(
            "step expects x of length {} and h of length {}, got {} and {}",
            params.input_dim(),
            params.hidden_dim(),
            x_t.len(),
            h_prev.h.len()
        )));
    }
    let (h, _) = step_traced(&h_prev.h, x_t, c, g, params);
    Ok(HiddenState { h })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeCache {
    pub window: Matrix,
    pub calendar_columns: Vec<usize>,
    pub c: f64,
    /// Gate value used at each step.
    pub gates: Vec<f64>,
    /// Pre-norm projections `P·x_t + p_b` per step.
    pub v: Vec<Vec<f64>>,
    /// Post-norm targets `u_t` per step.
    pub u: Vec<Vec<f64>>,
    pub ln: Vec<LnCache>,
    /// `h_0 … h_W`
    pub h: Vec<Vec<f64>>,
}

impl EncodeCache {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Runs the recurrence from `h_0 = 0` over every row of `window`.
pub fn encode(
    window: &Matrix,
    g: f64,
    params: &BackboneParams,
    calendar_columns: &[usize],
) -> Result<(HiddenState, EncodeCache)> {
    encode_with_gates(window, &vec![g; window.rows()], params, calendar_columns)
}

/// [`encode`] with a separate gate value for each step.
pub fn encode_with_gates(
    window: &Matrix,
    gates: &[f64],
    params: &BackboneParams,
    calendar_columns: &[usize],
) -> Result<(HiddenState, EncodeCache)> {
    if window.rows() == 0 {
        return Err(invalid("cannot encode an empty window"));
    }
    if window.cols() != params.input_dim() {
        return Err(invalid(format!(
            "window has {} columns, backbone expects {}",
            window.cols(),
            params.input_dim()
        )));
    }
    if gates.len() != window.rows() {
        return Err(invalid("one gate value per window step is required"));
    }
    let c = calendar_scalar(window, calendar_columns)?;
    let d = params.hidden_dim();
    let w = window.rows();
    let mut cache = EncodeCache {
        window: window.clone(),
        calendar_columns: calendar_columns.to_vec(),
        c,
        gates: gates.to_vec(),
        v: Vec::with_capacity(w),
        u: Vec::with_capacity(w),
        ln: Vec::with_capacity(w),
        h: Vec::with_capacity(w + 1),
    };
    cache.h.push(vec![0.0; d]);
    for t in 0..w {
        let (h, trace) = step_traced(&cache.h[t], window.row(t), c, gates[t], params);
        cache.v.push(trace.v);
        cache.u.push(trace.u);
        cache.ln.push(trace.ln);
        cache.h.push(h);
    }
    let last = HiddenState {
        h: cache.h[w].clone(),
    };
    Ok((last, cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGrads {
    pub params: BackboneParams,
    /// `∂L/∂g` summed over every step.
    pub gate: f64,
    /// `∂L/∂g_t` for each step.
    pub gate_per_step: Vec<f64>,
    pub window: Matrix,
}

/// Reverse accumulation through all steps, with `∂h_t/∂h_{t−1} = (1 − g)·I`.
pub fn encode_backward(
    cache: &EncodeCache,
    params: &BackboneParams,
    upstream: &[f64],
) -> Result<BackboneGrads> {
    let d = params.hidden_dim();
    if upstream.len() != d
        || cache.h.first().map(Vec::len) != Some(d)
        || cache.window.cols() != params.input_dim()
        || cache.v.first().map(Vec::len) != Some(params.proj_dim())
    {
        return Err(contract("encode cache does not match backbone parameters"));
    }
    let mut grads = BackboneGrads {
        params: BackboneParams::zeros(params.input_dim(), params.proj_dim(), d),
        gate: 0.0,
        gate_per_step: vec![0.0; cache.len()],
        window: Matrix::zeros(cache.window.rows(), cache.window.cols()),
    };
    grads.params.ln_gamma.fill(0.0);
    let mut dh = upstream.to_vec();
    let mut dc = 0.0;
    for t in (0..cache.len()).rev() {
        let g = cache.gates[t];
        let h_prev = &cache.h[t];
        let u = &cache.u[t];
        let dg: f64 = dh
            .iter()
            .zip(u.iter().zip(h_prev))
            .map(|(d, (ut, hp))| d * (ut - hp))
            .sum();
        grads.gate_per_step[t] = dg;
        grads.gate += dg;

        let du: Vec<f64> = dh.iter().map(|x| g * x).collect();
        let da = layer_norm_backward(
            &cache.ln[t],
            &params.ln_gamma,
            &du,
            &mut grads.params.ln_gamma,
            &mut grads.params.ln_beta,
        );
        add_assign(&mut grads.params.b, &da);
        let sum_da: f64 = da.iter().sum();
        grads.params.alpha += cache.c * sum_da;
        dc += params.alpha * sum_da;
        grads.params.w_weight.add_outer(&da, &cache.v[t]);
        let dv = params.w_weight.matvec_t(&da);
        add_assign(&mut grads.params.p_bias, &dv);
        grads.params.p_weight.add_outer(&dv, cache.window.row(t));
        let dx = params.p_weight.matvec_t(&dv);
        add_assign(grads.window.row_mut(t), &dx);

        dh.iter_mut().for_each(|x| *x *= 1.0 - g);
    }
    if !cache.calendar_columns.is_empty() && dc != 0.0 {
        let share = dc / (cache.window.rows() * cache.calendar_columns.len()) as f64;
        for t in 0..cache.window.rows() {
            for &col in &cache.calendar_columns {
                grads.window[(t, col)] += share;
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::linalg::norm2;

    fn random_params(rng: &mut ChaCha8Rng, f: usize, k: usize, d: usize) -> BackboneParams {
        let mut p = BackboneParams::zeros(f, k, d);
        let mut fill = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        fill(p.p_weight.as_mut_slice());
        fill(&mut p.p_bias);
        fill(p.w_weight.as_mut_slice());
        fill(&mut p.b);
        fill(&mut p.ln_gamma);
        fill(&mut p.ln_beta);
        p.alpha = 0.7;
        p
    }

    fn random_window(rng: &mut ChaCha8Rng, w: usize, f: usize) -> Matrix {
        let data = (0..w * f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(w, f, data).unwrap()
    }

    #[test]
    fn calendar_scalar_cases() {
        let w = Matrix::from_rows(&[vec![3.0, 0.0, 1.0], vec![9.0, 1.0, 0.0]]).unwrap();
        assert_eq!(calendar_scalar(&w, &[]).unwrap(), 0.0);
        assert_eq!(calendar_scalar(&w, &[1, 2]).unwrap(), 0.5);
        let constant = Matrix::from_rows(&[vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(calendar_scalar(&constant, &[0]).unwrap(), 0.5);
        assert!(calendar_scalar(&w, &[3]).is_err());
    }

    #[test]
    fn layer_norm_cases() {
        let out = layer_norm(&[2.0, 2.0, 2.0], &[1.0; 3], &[0.0; 3]);
        assert!(out.iter().all(|x| x.abs() < 1e-12));

        let out = layer_norm(&[1.0, -1.0], &[1.0; 2], &[0.0; 2]);
        let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert_abs_diff_eq!(out[0], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -expected, epsilon = 1e-15);

        let out = layer_norm(&[0.3, 7.0, -2.0], &[0.0; 3], &[1.0, 2.0, 3.0]);
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn step_with_zero_state_is_scaled_target() {
        // u = LN(a) with gamma = 0, beta = 2 gives u = [2, 2, ...].
        let mut p = BackboneParams::zeros(2, 3, 4);
        p.ln_gamma.fill(0.0);
        p.ln_beta.fill(2.0);
        let h = step(&HiddenState::zeros(4), &[0.3, -0.1], 0.0, 0.5, &p).unwrap();
        assert_eq!(h.h, vec![1.0; 4]);
    }

    #[test]
    fn zero_alpha_ignores_calendar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = random_params(&mut rng, 3, 4, 5);
        p.alpha = 0.0;
        let h0 = HiddenState { h: vec![0.1; 5] };
        let a = step(&h0, &[0.1, 0.2, 0.3], 0.0, 0.3, &p).unwrap();
        let b = step(&h0, &[0.1, 0.2, 0.3], 42.0, 0.3, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn low_gate_step_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_params(&mut rng, 3, 4, 5);
        let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = [0.4, -0.2, 0.9];
        let h = step(&HiddenState { h: v.clone() }, &x, 0.0, 0.05, &p).unwrap();
        let u = step(&HiddenState::zeros(5), &x, 0.0, 1.0, &p).unwrap().h;
        let diff: Vec<f64> = h.h.iter().zip(&v).map(|(a, b)| a - 0.95 * b).collect();
        assert_abs_diff_eq!(norm2(&diff), 0.05 * norm2(&u), epsilon = 1e-14);
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let p = BackboneParams::zeros(3, 4, 5);
        assert!(step(&HiddenState::zeros(5), &[1.0, 2.0], 0.0, 0.5, &p).is_err());
        assert!(step(&HiddenState::zeros(4), &[1.0, 2.0, 3.0], 0.0, 0.5, &p).is_err());
    }

    #[test]
    fn single_step_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 3, 4, 5);
        let win = random_window(&mut rng, 1, 3);
        let (h, cache) = encode(&win, 0.3, &p, &[2]).unwrap();
        let c = win[(0, 2)];
        let direct = step(&HiddenState::zeros(5), win.row(0), c, 0.3, &p).unwrap();
        assert_eq!(h, direct);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn repeated_rows_approach_fixed_point_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 3, 4, 6);
        let row = vec![0.2, -0.7, 0.5];
        let win = Matrix::from_rows(&vec![row.clone(); 5]).unwrap();
        let g = 0.3;
        let (h, _) = encode(&win, g, &p, &[]).unwrap();
        let target = step(&HiddenState::zeros(6), &row, 0.0, 1.0, &p).unwrap().h;
        let factor = 1.0 - (1.0f64 - g).powi(5);
        for (hi, ti) in h.h.iter().zip(&target) {
            assert_abs_diff_eq!(*hi, factor * ti, epsilon = 1e-14);
        }
    }

    #[test]
    fn larger_gate_tracks_last_target_more_closely() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 3, 4, 6);
        let win = random_window(&mut rng, 12, 3);
        let last = step(&HiddenState::zeros(6), win.row(11), 0.0, 1.0, &p).unwrap().h;
        let dist = |g: f64| {
            let (h, _) = encode(&win, g, &p, &[]).unwrap();
            let d: Vec<f64> = h.h.iter().zip(&last).map(|(a, b)| a - b).collect();
            norm2(&d)
        };
        assert!(dist(0.95) < dist(0.05));
    }

    #[test]
    fn empty_window_rejected() {
        let p = BackboneParams::zeros(3, 4, 5);
        assert!(encode(&Matrix::zeros(0, 3), 0.5, &p, &[]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_params(&mut rng, 3, 4, 4);
        let win = random_window(&mut rng, 4, 3);
        let (_, cache) = encode(&win, 0.4, &p, &[2]).unwrap();
        let g = encode_backward(&cache, &p, &[0.0; 4]).unwrap();
        assert_eq!(g.gate, 0.0);
        assert!(g.params.p_weight.as_slice().iter().all(|&x| x == 0.0));
        assert!(g.params.ln_gamma.iter().all(|&x| x == 0.0));
        assert_eq!(g.params.alpha, 0.0);
        assert!(g.window.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_params(&mut rng, 3, 4, 4);
        let other = random_params(&mut rng, 3, 4, 5);
        let win = random_window(&mut rng, 4, 3);
        let (_, cache) = encode(&win, 0.4, &p, &[]).unwrap();
        assert!(encode_backward(&cache, &other, &[1.0; 5]).is_err());
    }

    /// Loss = r·h_W for a fixed random r, so ∂L/∂h_W = r.
    fn probe_loss(win: &Matrix, g: f64, p: &BackboneParams, cal: &[usize], r: &[f64]) -> f64 {
        let (h, _) = encode(win, g, p, cal).unwrap();
        h.h.iter().zip(r).map(|(a, b)| a * b).sum()
    }

    fn rel(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1.0)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (w, f, k, d) = (4, 3, 4, 4);
        let p = random_params(&mut rng, f, k, d);
        let win = random_window(&mut rng, w, f);
        let cal = [2usize];
        let g = 0.37;
        let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, cache) = encode(&win, g, &p, &cal).unwrap();
        let grads = encode_backward(&cache, &p, &r).unwrap();
        let h = 1e-6;

        let check = |analytic: f64, bump: &dyn Fn(&mut BackboneParams, f64)| {
            let mut plus = p.clone();
            let mut minus = p.clone();
            bump(&mut plus, h);
            bump(&mut minus, -h);
            let n = (probe_loss(&win, g, &plus, &cal, &r) - probe_loss(&win, g, &minus, &cal, &r))
                / (2.0 * h);
            assert!(rel(analytic, n) < 1e-8, "analytic {analytic} fd {n}");
        };
        for i in 0..k * f {
            check(grads.params.p_weight.as_slice()[i], &|q, e| q.p_weight.as_mut_slice()[i] += e);
        }
        for i in 0..k {
            check(grads.params.p_bias[i], &|q, e| q.p_bias[i] += e);
        }
        for i in 0..d * k {
            check(grads.params.w_weight.as_slice()[i], &|q, e| q.w_weight.as_mut_slice()[i] += e);
        }
        for i in 0..d {
            check(grads.params.b[i], &|q, e| q.b[i] += e);
            check(grads.params.ln_gamma[i], &|q, e| q.ln_gamma[i] += e);
            check(grads.params.ln_beta[i], &|q, e| q.ln_beta[i] += e);
        }
        check(grads.params.alpha, &|q, e| q.alpha += e);

        let n = (probe_loss(&win, g + h, &p, &cal, &r) - probe_loss(&win, g - h, &p, &cal, &r))
            / (2.0 * h);
        assert!(rel(grads.gate, n) < 1e-8);

        for i in 0..w * f {
            let mut plus = win.clone();
            let mut minus = win.clone();
            plus.as_mut_slice()[i] += h;
            minus.as_mut_slice()[i] -= h;
            let n = (probe_loss(&plus, g, &p, &cal, &r) - probe_loss(&minus, g, &p, &cal, &r))
                / (2.0 * h);
            assert!(rel(grads.window.as_slice()[i], n) < 1e-8);
        }
    }

    #[test]
    fn alpha_gradient_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_params(&mut rng, 2, 3, 4);
        let win = Matrix::from_rows(&[vec![0.3, 0.8]]).unwrap();
        let r = [1.0, -0.5, 0.25, 2.0];
        let (_, cache) = encode(&win, 0.6, &p, &[1]).unwrap();
        let grads = encode_backward(&cache, &p, &r).unwrap();
        let h = 1e-6;
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus.alpha += h;
        minus.alpha -= h;
        let n = (probe_loss(&win, 0.6, &plus, &[1], &r) - probe_loss(&win, 0.6, &minus, &[1], &r))
            / (2.0 * h);
        assert!(rel(grads.params.alpha, n) < 1e-8);
    }

    proptest! {
        #[test]
        fn step_is_a_contraction(seed in 0u64..10_000, g in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng, 3, 5, 6);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ha = step(&HiddenState { h: a.clone() }, &x, 0.2, g, &p).unwrap();
            let hb = step(&HiddenState { h: b.clone() }, &x, 0.2, g, &p).unwrap();
            let num: Vec<f64> = ha.h.iter().zip(&hb.h).map(|(x, y)| x - y).collect();
            let den: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            prop_assert!((norm2(&num) / norm2(&den) - (1.0 - g)).abs() < 1e-10);
        }

        #[test]
        fn hidden_norm_bounded_by_targets(seed in 0u64..10_000, g in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_params(&mut rng, 3, 4, 5);
            let win = random_window(&mut rng, 10, 3);
            let (_, cache) = encode(&win, g, &p, &[]).unwrap();
            let m = cache.u.iter().map(|u| norm2(u)).fold(0.0, f64::max);
            for h in &cache.h {
                prop_assert!(norm2(h) <= m + 1e-12);
            }
        }

        #[test]
        fn layer_norm_standardizes(v in proptest::collection::vec(-100.0f64..100.0, 2..32)) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            prop_assume!(var > 0.1);
            let (_, cache) = layer_norm_cached(&v, &vec![1.0; v.len()], &vec![0.0; v.len()]);
            let n = v.len() as f64;
            let m = cache.xhat.iter().sum::<f64>() / n;
            let s = cache.xhat.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((s - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_params(&mut rng, 3, 4, 5);
        let win = random_window(&mut rng, 7, 3);
        let a = encode(&win, 0.5, &p, &[1]).unwrap();
        let b = encode(&win, 0.5, &p, &[1]).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}

//! MLP head with dropout and a residual around the last observation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::HiddenState;
use crate::error::{contract, invalid, Result};
use crate::linalg::{add_assign, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub dropout_p: f64,
    pub horizon: usize,
    pub f_out: usize,
}

impl DecoderParams {
    pub fn zeros(d: usize, horizon: usize, f_out: usize, dropout_p: f64) -> Self {
        Self {
            w1: Matrix::zeros(d, d),
            b1: vec![0.0; d],
            w2: Matrix::zeros(horizon * f_out, d),
            b2: vec![0.0; horizon * f_out],
            dropout_p,
            horizon,
            f_out,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.hidden_dim();
        let out = self.horizon * self.f_out;
        if self.w1.rows() != d
            || self.b1.len() != d
            || self.w2.shape() != (out, d)
            || self.b2.len() != out
        {
            return Err(invalid("decoder parameter shapes are inconsistent"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(invalid(format!(
                "dropout probability must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }
}

/// `values` is H×F_out in normalized units; row = horizon step.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub values: Matrix,
}

/// Row-major reshape of a flat `H·F` vector into an H×F matrix.
pub fn reshape(flat: Vec<f64>, horizon: usize, f_out: usize) -> Result<Matrix> {
    Matrix::from_vec(horizon, f_out, flat)
}

pub fn flatten(m: &Matrix) -> Vec<f64> {
    m.as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeCache {
    pub h: Vec<f64>,
    pub pre: Vec<f64>,
    /// Per-unit dropout multiplier: 0 for dropped units, `1/(1−p)` for kept ones,
    /// 1 everywhere in eval mode.
    pub mask: Vec<f64>,
    pub z_dropped: Vec<f64>,
}

pub fn decode<R: Rng + ?Sized>(
    h: &HiddenState,
    x_last: &[f64],
    params: &DecoderParams,
    mode: Mode,
    rng: &mut R,
) -> Result<(Forecast, DecodeCache)> {
    let d = params.hidden_dim();
    if h.h.len() != d {
        return Err(invalid(format!(
            "decoder expects hidden width {d}, got {}",
            h.h.len()
        )));
    }
    if x_last.len() != params.f_out {
        return Err(invalid(format!(
            "last observation has {} features, decoder predicts {}",
            x_last.len(),
            params.f_out
        )));
    }
    let mask = match mode {
        Mode::Eval => vec![1.0; d],
        Mode::Train if params.dropout_p == 0.0 => vec![1.0; d],
        Mode::Train => {
            let keep = 1.0 / (1.0 - params.dropout_p);
            (0..d)
                .map(|_| {
                    if rng.gen::<f64>() < params.dropout_p {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect()
        }
    };
    decode_with_mask(h, x_last, params, mask)
}

/// Deterministic decode with an explicit dropout multiplier per hidden unit.
pub fn decode_with_mask(
    h: &HiddenState,
    x_last: &[f64],
    params: &DecoderParams,
    mask: Vec<f64>,
) -> Result<(Forecast, DecodeCache)> {
    if mask.len() != params.hidden_dim() {
        return Err(invalid("dropout mask length must equal hidden width"));
    }
    let mut pre = params.w1.matvec(&h.h);
    add_assign(&mut pre, &params.b1);
    let z_dropped: Vec<f64> = pre
        .iter()
        .zip(&mask)
        .map(|(p, m)| p.max(0.0) * m)
        .collect();
    let mut flat = params.w2.matvec(&z_dropped);
    add_assign(&mut flat, &params.b2);
    let mut values = reshape(flat, params.horizon, params.f_out)?;
    for r in 0..params.horizon {
        add_assign(values.row_mut(r), x_last);
    }
    Ok((
        Forecast { values },
        DecodeCache {
            h: h.h.clone(),
            pre,
            mask,
            z_dropped,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderGrads {
    pub params: DecoderParams,
    pub h: Vec<f64>,
}

pub fn decode_backward(
    cache: &DecodeCache,
    params: &DecoderParams,
    upstream: &Matrix,
) -> Result<DecoderGrads> {
    let d = params.hidden_dim();
    if upstream.shape() != (params.horizon, params.f_out)
        || cache.h.len() != d
        || cache.mask.len() != d
    {
        return Err(contract("decode cache does not match decoder parameters"));
    }
    let mut grads = DecoderParams::zeros(d, params.horizon, params.f_out, params.dropout_p);
    let dflat = upstream.as_slice();
    grads.w2.add_outer(dflat, &cache.z_dropped);
    grads.b2.copy_from_slice(dflat);
    let dz = params.w2.matvec_t(dflat);
    let dpre: Vec<f64> = dz
        .iter()
        .zip(cache.mask.iter().zip(&cache.pre))
        .map(|(g, (m, p))| if *p > 0.0 { g * m } else { 0.0 })
        .collect();
    grads.w1.add_outer(&dpre, &cache.h);
    grads.b1.copy_from_slice(&dpre);
    let dh = params.w1.matvec_t(&dpre);
    Ok(DecoderGrads { params: grads, h: dh })
}

//! Wall-clock scaling of the forward+backward passes in window length and
//! horizon.
//!
//! The window sweep times the recurrent backbone, whose cost is `O(W·(F·k + k·d))`.
//! The horizon sweep times the decoder, whose cost is dominated by the
//! `O(H·F_out·d)` output layer. Each point is the minimum over several trials of
//! a fixed number of repetitions.

use std::hint::black_box;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backbone::{encode, encode_backward, BackboneParams, HiddenState};
use crate::decoder::{decode, decode_backward, DecoderParams, Mode};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::parallel::Stopwatch;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub windows: Vec<usize>,
    pub horizons: Vec<usize>,
    pub f_in: usize,
    pub k: usize,
    pub d: usize,
    /// Horizon used during the window sweep.
    pub horizon: usize,
    /// Window used during the horizon sweep.
    pub window: usize,
    pub f_out: usize,
    pub trials: usize,
    /// Minimum wall time of one trial at the smallest size.
    pub min_trial_seconds: f64,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            windows: vec![64, 128, 256, 512],
            horizons: vec![24, 48, 96, 192],
            f_in: 8,
            k: 64,
            d: 64,
            horizon: 96,
            window: 96,
            f_out: 32,
            trials: 5,
            min_trial_seconds: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub sweep: &'static str,
    pub size: usize,
    pub reps: usize,
    /// Best trial time divided by `reps`.
    pub seconds_per_iter: f64,
}

pub const BENCH_CSV_HEADER: &str = "sweep,size,reps,seconds_per_iter";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn sweep(&self, name: &str) -> Vec<&BenchRow> {
        self.rows.iter().filter(|r| r.sweep == name).collect()
    }

    /// Time ratios between consecutive sizes of one sweep.
    pub fn ratios(&self, name: &str) -> Vec<f64> {
        self.sweep(name)
            .windows(2)
            .map(|p| p[1].seconds_per_iter / p[0].seconds_per_iter)
            .collect()
    }

    /// Least-squares slope of log(time) against log(size).
    pub fn exponent(&self, name: &str) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .sweep(name)
            .iter()
            .map(|r| ((r.size as f64).ln(), r.seconds_per_iter.ln()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCH_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.sweep, r.size, r.reps, r.seconds_per_iter
            ));
        }
        out
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("sizes agree")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

/// Repetitions needed for one trial of `f` to last at least `min_seconds`.
fn calibrate(min_seconds: f64, mut f: impl FnMut() -> Result<()>) -> Result<usize> {
    let mut reps = 1usize;
    loop {
        let sw = Stopwatch::start();
        for _ in 0..reps {
            f()?;
        }
        let t = sw.seconds();
        if t >= min_seconds || reps >= 1 << 24 {
            return Ok(reps);
        }
        reps = if t <= 0.0 {
            reps * 16
        } else {
            ((reps as f64 * min_seconds / t * 1.2).ceil() as usize).max(reps * 2)
        };
    }
}

fn best_of(trials: usize, reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let sw = Stopwatch::start();
        for _ in 0..reps {
            f()?;
        }
        best = best.min(sw.seconds());
    }
    Ok(best / reps as f64)
}

pub fn run(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.windows.len() < 2 || opts.horizons.len() < 2 || opts.trials == 0 {
        return Err(invalid("bench needs at least two sizes per sweep and one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::new();

    let mut bb = BackboneParams::zeros(opts.f_in, opts.k, opts.d);
    bb.p_weight = random_matrix(&mut rng, opts.k, opts.f_in, 0.3);
    bb.w_weight = random_matrix(&mut rng, opts.d, opts.k, 0.3);
    bb.b = random_vec(&mut rng, opts.d);
    let upstream = random_vec(&mut rng, opts.d);
    let cal: Vec<usize> = vec![opts.f_in - 1];
    let backbone_pass = |x: &Matrix| -> Result<()> {
        let (h, cache) = encode(x, 0.5, &bb, &cal)?;
        black_box(&h);
        black_box(encode_backward(&cache, &bb, &upstream)?);
        Ok(())
    };
    let smallest = random_matrix(&mut rng, opts.windows[0], opts.f_in, 1.0);
    let reps = calibrate(opts.min_trial_seconds, || backbone_pass(&smallest))?;
    for &w in &opts.windows {
        let x = random_matrix(&mut rng, w, opts.f_in, 1.0);
        let t = best_of(opts.trials, reps, || backbone_pass(&x))?;
        rows.push(BenchRow {
            sweep: "window",
            size: w,
            reps,
            seconds_per_iter: t,
        });
    }

    let h = HiddenState {
        h: random_vec(&mut rng, opts.d),
    };
    let x_last = random_vec(&mut rng, opts.f_out);
    let decoders: Vec<DecoderParams> = opts
        .horizons
        .iter()
        .map(|&hz| {
            let mut p = DecoderParams::zeros(opts.d, hz, opts.f_out, 0.0);
            p.w1 = random_matrix(&mut rng, opts.d, opts.d, 0.3);
            p.w2 = random_matrix(&mut rng, hz * opts.f_out, opts.d, 0.3);
            p
        })
        .collect();
    let upstreams: Vec<Matrix> = opts
        .horizons
        .iter()
        .map(|&hz| random_matrix(&mut rng, hz, opts.f_out, 1.0))
        .collect();
    let decoder_pass = |i: usize| -> Result<()> {
        let mut step = rand::rngs::mock::StepRng::new(0, 0);
        let (f, cache) = decode(&h, &x_last, &decoders[i], Mode::Eval, &mut step)?;
        black_box(&f);
        black_box(decode_backward(&cache, &decoders[i], &upstreams[i])?);
        Ok(())
    };
    let reps = calibrate(opts.min_trial_seconds, || decoder_pass(0))?;
    for (i, &hz) in opts.horizons.iter().enumerate() {
        let t = best_of(opts.trials, reps, || decoder_pass(i))?;
        rows.push(BenchRow {
            sweep: "horizon",
            size: hz,
            reps,
            seconds_per_iter: t,
        });
    }
    Ok(BenchReport { rows })
}

//! Parameter registry, batched forward/backward, Adam, plateau scheduling, early
//! stopping and the training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{PreparedData, WindowSample};
use crate::decoder::{decode_backward, Mode};
use crate::error::{contract, invalid, Error, Result};
use crate::eval::score_samples;
use crate::linalg::Matrix;
use crate::model::{Gate, GateKind, Model, ModelDims, SampleTrace, TensorKind};
use crate::parallel::map_indexed;
use crate::qgate::{gate_backward, GateOutput};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
/// Minimum absolute drop in validation loss that counts as an improvement.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Multiplicative decay before the Adam update; otherwise decay is added to
    /// the gradient.
    pub decoupled_weight_decay: bool,
    pub scheduler_factor: f64,
    pub scheduler_patience: usize,
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub window: usize,
    pub horizon: usize,
    pub k: usize,
    pub d: usize,
    pub dropout_p: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub gate: GateKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            decoupled_weight_decay: true,
            scheduler_factor: 0.5,
            scheduler_patience: 3,
            early_stop_patience: 10,
            max_epochs: 100,
            batch_size: 32,
            seed: 2021,
            window: 96,
            horizon: 96,
            k: 128,
            d: 128,
            dropout_p: 0.1,
            g_min: 0.05,
            g_max: 0.95,
            gate: GateKind::Quantum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning-rate", self.learning_rate),
            ("scheduler-factor", self.scheduler_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight-decay must be non-negative"));
        }
        if self.scheduler_factor >= 1.0 {
            return Err(invalid("scheduler-factor must be below 1"));
        }
        let counts = [
            ("max-epochs", self.max_epochs),
            ("batch-size", self.batch_size),
            ("window", self.window),
            ("horizon", self.horizon),
            ("k", self.k),
            ("d", self.d),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(invalid("dropout-p must be in [0, 1)"));
        }
        if !(0.0 < self.g_min && self.g_min < self.g_max && self.g_max < 1.0) {
            return Err(invalid("gate clamp must satisfy 0 < g-min < g-max < 1"));
        }
        Ok(())
    }

    pub fn dims(&self, f_in: usize, f_out: usize) -> ModelDims {
        ModelDims {
            f_in,
            k: self.k,
            d: self.d,
            horizon: self.horizon,
            f_out,
            dropout_p: self.dropout_p,
            g_min: self.g_min,
            g_max: self.g_max,
            gate: self.gate,
        }
    }
}

/// Optimizer bookkeeping for one registered tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: &'static str,
    pub kind: TensorKind,
    pub shape: (usize, usize),
    pub trainable: bool,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// Owns the model values together with gradient and Adam moment buffers.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    model: Model,
    slots: Vec<Slot>,
    version: u64,
}

impl ParameterStore {
    pub fn new(model: Model) -> Self {
        let slots = model
            .tensors()
            .into_iter()
            .map(|t| Slot {
                name: t.name,
                kind: t.kind,
                shape: t.shape,
                trainable: true,
                grad: vec![0.0; t.data.len()],
                m: vec![0.0; t.data.len()],
                v: vec![0.0; t.data.len()],
            })
            .collect();
        Self {
            model,
            slots,
            version: 0,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Mutable access to the values; invalidates outstanding forward caches.
    pub fn model_mut(&mut self) -> &mut Model {
        self.version += 1;
        &mut self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set_trainable(&mut self, name: &str, trainable: bool) -> Result<()> {
        let slot = self
            .slots
            .iter_mut()
            .find(|s| s.name == name)
            .ok_or_else(|| invalid(format!("no parameter named '{name}'")))?;
        slot.trainable = trainable;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for s in &mut self.slots {
            s.grad.fill(0.0);
        }
    }

    /// Adds a gradient laid out as a model of the same shape.
    pub fn accumulate(&mut self, grads: &Model) {
        for (slot, t) in self.slots.iter_mut().zip(grads.tensors()) {
            crate::linalg::add_assign(&mut slot.grad, t.data);
        }
    }

    /// Flat gradient vector in registry order.
    pub fn flat_grad(&self) -> Vec<f64> {
        self.slots.iter().flat_map(|s| s.grad.iter().copied()).collect()
    }

    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.model.tensors().iter().map(|t| t.data.to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        let mut tensors = self.model.tensors_mut();
        if tensors.len() != snapshot.len()
            || tensors.iter().zip(snapshot).any(|(t, s)| t.data.len() != s.len())
        {
            return Err(contract("snapshot does not match the registered parameters"));
        }
        for (t, s) in tensors.iter_mut().zip(snapshot) {
            t.data.copy_from_slice(s);
        }
        self.version += 1;
        Ok(())
    }
}

/// He-normal weights, zero biases, identity layer norm, `α = 0`, and a gate that
/// opens at exactly 0.5.
pub fn kaiming_init<R: rand::Rng + ?Sized>(store: &mut ParameterStore, rng: &mut R) {
    let model = store.model_mut();
    let quantum_default = crate::qgate::GateParams::default();
    for t in model.tensors_mut() {
        match t.kind {
            TensorKind::Weight => {
                let fan_in = t.shape.1 as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("finite std");
                t.data.iter_mut().for_each(|x| *x = normal.sample(rng));
            }
            TensorKind::NormScale => t.data.fill(1.0),
            TensorKind::GateAngle => t.data.fill(quantum_default.theta1),
            TensorKind::GateMixer => t.data.fill(0.0),
            _ => t.data.fill(0.0),
        }
    }
    if let Gate::Quantum(p) = &mut model.gate {
        p.w1 = quantum_default.w1;
        p.w2 = quantum_default.w2;
    }
}

/// Everything [`backward`] needs from one [`forward_loss`] call.
#[derive(Debug, Clone)]
pub struct BatchCache {
    version: u64,
    pub quantum: Option<GateOutput>,
    pub traces: Vec<SampleTrace>,
    /// `∂L/∂Ŷ` for each sample.
    pub upstream: Vec<Matrix>,
}

fn sample_rng(dropout_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    rng.set_stream(index as u64);
    rng
}

/// Mean squared error over batch, horizon and features. The quantum gate is
/// evaluated once and shared by every window.
pub fn forward_loss(
    batch: &[WindowSample],
    store: &ParameterStore,
    mode: Mode,
    dropout_seed: u64,
) -> Result<(f64, BatchCache)> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    let model = store.model();
    let quantum = model.quantum_gate()?;
    let traces: Vec<SampleTrace> = map_indexed(batch, |i, s| {
        let mut rng = sample_rng(dropout_seed, i);
        model.forward_sample(quantum.as_ref(), s, mode, &mut rng)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (h, f) = (model.decoder.horizon, model.decoder.f_out);
    let scale = 1.0 / (batch.len() * h * f) as f64;
    let mut loss = 0.0;
    let mut upstream = Vec::with_capacity(batch.len());
    for (trace, s) in traces.iter().zip(batch) {
        let mut du = Matrix::zeros(h, f);
        for ((g, p), y) in du
            .as_mut_slice()
            .iter_mut()
            .zip(trace.forecast.values.as_slice())
            .zip(s.y.as_slice())
        {
            let e = p - y;
            loss += e * e;
            *g = 2.0 * e * scale;
        }
        upstream.push(du);
    }
    Ok((
        loss * scale,
        BatchCache {
            version: store.version,
            quantum,
            traces,
            upstream,
        },
    ))
}

/// Accumulates `∂loss/∂θ` for every trainable parameter into the store.
pub fn backward(cache: &BatchCache, store: &mut ParameterStore) -> Result<()> {
    backward_with(cache, store, gate_backward)
}

/// [`backward`] with a replaceable quantum-gate backward pass.
pub fn backward_with<F>(cache: &BatchCache, store: &mut ParameterStore, gate_bw: F) -> Result<()>
where
    F: Fn(&GateOutput, &crate::qgate::GateParams, f64) -> crate::qgate::GateGrad,
{
    if cache.version != store.version {
        return Err(contract("batch cache is stale: parameters changed after the forward pass"));
    }
    let model = store.model();
    let per_sample: Vec<Result<(Model, f64)>> = map_indexed(&cache.traces, |i, trace| {
        let dec = decode_backward(&trace.decode, &model.decoder, &cache.upstream[i])?;
        let enc = crate::backbone::encode_backward(&trace.encode, &model.backbone, &dec.h)?;
        let mut g = model.zeroed_like();
        g.backbone = enc.params;
        g.decoder = dec.params;
        if let (Gate::Classical(c), Gate::Classical(gc)) = (&model.gate, &mut g.gate) {
            let (dw, db) = c.backward(&trace.encode.window, &enc.gate_per_step);
            gc.w = dw;
            gc.b = db;
        }
        Ok((g, enc.gate))
    });
    let mut total = model.zeroed_like();
    let mut dgate = 0.0;
    for item in per_sample {
        let (g, dg) = item?;
        total.add_assign(&g);
        dgate += dg;
    }
    if let (Gate::Quantum(p), Some(out), Gate::Quantum(gq)) =
        (&model.gate, cache.quantum.as_ref(), &mut total.gate)
    {
        let gg = gate_bw(out, p, dgate);
        gq.theta1 = gg.theta1;
        gq.phi1 = gg.phi1;
        gq.theta2 = gg.theta2;
        gq.phi2 = gg.phi2;
        gq.w1 = gg.w1;
        gq.w2 = gg.w2;
        gq.b_g = gg.b_g;
    }
    store.accumulate(&total);
    Ok(())
}

/// One Adam update (bias-corrected) at the given 1-based step, then clears the
/// gradients. Weight decay touches linear-layer weights only.
pub fn adam_step(store: &mut ParameterStore, lr: f64, config: &TrainConfig, step_index: u64) {
    let t = step_index.max(1) as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let wd = config.weight_decay;
    store.version += 1;
    let ParameterStore { model, slots, .. } = store;
    for (slot, tensor) in slots.iter_mut().zip(model.tensors_mut()) {
        if !slot.trainable {
            slot.grad.fill(0.0);
            continue;
        }
        let decay = slot.kind == TensorKind::Weight && wd > 0.0;
        for i in 0..tensor.data.len() {
            let mut g = slot.grad[i];
            if decay {
                if config.decoupled_weight_decay {
                    tensor.data[i] *= 1.0 - lr * wd;
                } else {
                    g += wd * tensor.data[i];
                }
            }
            slot.m[i] = ADAM_BETA1 * slot.m[i] + (1.0 - ADAM_BETA1) * g;
            slot.v[i] = ADAM_BETA2 * slot.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = slot.m[i] / c1;
            let v_hat = slot.v[i] / c2;
            tensor.data[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        slot.grad.fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
    pub gate_value: f64,
}

pub const EPOCH_LOG_HEADER: &str = "epoch,train_mse,val_mse,lr,gate_value";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.epoch, self.train_mse, self.val_mse, self.lr, self.gate_value
        )
    }
}

pub fn epoch_log_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(EPOCH_LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: usize,
    pub best_val: f64,
    pub since_improvement: usize,
    /// Non-improving epochs since the last learning-rate cut.
    pub plateau: usize,
    pub lr: f64,
    pub best_snapshot: Option<Vec<Vec<f64>>>,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            epoch: 0,
            best_val: f64::INFINITY,
            since_improvement: 0,
            plateau: 0,
            lr: config.learning_rate,
            best_snapshot: None,
            history: Vec::new(),
        }
    }
}

/// Plateau scheduler. Returns true when `val_loss` is a new best.
pub fn scheduler_step(state: &mut TrainState, val_loss: f64, config: &TrainConfig) -> bool {
    if val_loss < state.best_val - IMPROVEMENT_THRESHOLD {
        state.best_val = val_loss;
        state.plateau = 0;
        state.since_improvement = 0;
        true
    } else {
        state.plateau += 1;
        state.since_improvement += 1;
        if state.plateau > config.scheduler_patience {
            state.lr *= config.scheduler_factor;
            state.plateau = 0;
        }
        false
    }
}

/// True once validation has not improved for more than `early_stop_patience`
/// epochs; the best snapshot is then restored into `store`.
pub fn early_stop_check(
    state: &TrainState,
    store: &mut ParameterStore,
    config: &TrainConfig,
) -> Result<bool> {
    if state.since_improvement > config.early_stop_patience {
        if let Some(best) = &state.best_snapshot {
            store.restore(best)?;
        }
        return Ok(true);
    }
    Ok(false)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: ParameterStore,
    pub state: TrainState,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Mean gate value the model applies: the quantum gate directly, or the average
/// classical gate over `samples`.
pub fn mean_gate(model: &Model, samples: &[WindowSample]) -> Result<f64> {
    if let Some(out) = model.quantum_gate()? {
        return Ok(out.g);
    }
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let g = model.step_gates(None, s);
            g.iter().sum::<f64>() / g.len() as f64
        })
        .sum();
    Ok(sum / samples.len() as f64)
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn build_store(config: &TrainConfig, data: &PreparedData) -> Result<ParameterStore> {
    let dims = config.dims(data.f_in(), data.f_out());
    let model = Model::zeros(&dims, data.calendar_columns.clone())?;
    let mut store = ParameterStore::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    kaiming_init(&mut store, &mut rng);
    Ok(store)
}

pub fn train(config: &TrainConfig, data: &PreparedData) -> Result<TrainOutcome> {
    train_with(config, data, |_| {})
}

/// Full loop: seeded shuffle, mini-batch Adam, eval-mode validation, plateau
/// scheduling and early stopping. The best validation snapshot is restored at the
/// end.
pub fn train_with(
    config: &TrainConfig,
    data: &PreparedData,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config, data)?;
    while let Some(record) = trainer.epoch(data)? {
        on_epoch(&record);
    }
    trainer.finish()
}

/// The training loop one epoch at a time.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    store: ParameterStore,
    state: TrainState,
    shuffle_rng: ChaCha8Rng,
    order: Vec<usize>,
    step: u64,
    done: bool,
    stopped_early: bool,
}

impl Trainer {
    pub fn new(config: &TrainConfig, data: &PreparedData) -> Result<Self> {
        config.validate()?;
        if data.train.is_empty() {
            return Err(invalid("training split has no windows"));
        }
        if data.val.is_empty() {
            return Err(invalid("validation split has no windows"));
        }
        Ok(Self {
            config: config.clone(),
            store: build_store(config, data)?,
            state: TrainState::new(config),
            shuffle_rng: ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1)),
            order: (0..data.train.len()).collect(),
            step: 0,
            done: false,
            stopped_early: false,
        })
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Runs one epoch on `data` (which must be the data passed to [`Trainer::new`]).
    /// Returns `None` once training has finished.
    pub fn epoch(&mut self, data: &PreparedData) -> Result<Option<EpochRecord>> {
        if self.done {
            return Ok(None);
        }
        if self.order.len() != data.train.len() {
            return Err(invalid("trainer was built for a different dataset"));
        }
        let config = &self.config;
        let epoch = self.state.epoch + 1;
        self.state.epoch = epoch;
        self.order.shuffle(&mut self.shuffle_rng);
        let lr = self.state.lr;
        let mut train_sum = 0.0;
        for chunk in self.order.chunks(config.batch_size) {
            let batch: Vec<WindowSample> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            self.step += 1;
            let seed = mix_seed(config.seed, 1 << 32 | self.step);
            let (loss, cache) = forward_loss(&batch, &self.store, Mode::Train, seed)?;
            if !loss.is_finite() {
                return Err(Error::Data(format!("training diverged at epoch {epoch}")));
            }
            backward(&cache, &mut self.store)?;
            adam_step(&mut self.store, lr, config, self.step);
            train_sum += loss * batch.len() as f64;
        }
        let train_mse = train_sum / data.train.len() as f64;
        let val_scores = score_samples(self.store.model(), &data.val)?;
        let val_mse = val_scores.iter().map(|s| s.0).sum::<f64>() / val_scores.len() as f64;
        let gate_value = mean_gate(self.store.model(), &data.val)?;
        if !(config.g_min..=config.g_max).contains(&gate_value) {
            return Err(contract(format!(
                "gate left its clamp range after epoch {epoch}: {gate_value}"
            )));
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            lr,
            gate_value,
        };
        self.state.history.push(record.clone());
        if scheduler_step(&mut self.state, val_mse, config) {
            self.state.best_snapshot = Some(self.store.snapshot());
        }
        if early_stop_check(&self.state, &mut self.store, config)? {
            self.stopped_early = true;
            self.done = true;
        } else if epoch >= config.max_epochs {
            self.done = true;
        }
        Ok(Some(record))
    }

    /// Restores the best validation snapshot and hands back the results.
    pub fn finish(mut self) -> Result<TrainOutcome> {
        if !self.stopped_early {
            if let Some(best) = &self.state.best_snapshot {
                self.store.restore(best)?;
            }
        }
        let log = self.state.history.clone();
        Ok(TrainOutcome {
            store: self.store,
            state: self.state,
            log,
            stopped_early: self.stopped_early,
        })
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use super::*;
    use crate::data::{prepare, synthetic_sine, CalendarMode, DataOptions};

    fn tiny_dims(gate: GateKind, dropout_p: f64) -> ModelDims {
        ModelDims {
            f_in: 3,
            k: 4,
            d: 4,
            horizon: 2,
            f_out: 2,
            dropout_p,
            g_min: 0.05,
            g_max: 0.95,
            gate,
        }
    }

    fn random_store(seed: u64, gate: GateKind, dropout_p: f64) -> ParameterStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Model::zeros(&tiny_dims(gate, dropout_p), vec![2]).unwrap();
        for t in model.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        ParameterStore::new(model)
    }

    fn random_batch(seed: u64, n: usize) -> Vec<WindowSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = Matrix::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap();
                let y = Matrix::from_vec(2, 2, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap();
                let x_last = vec![x[(3, 0)], x[(3, 1)]];
                WindowSample { x, y, x_last }
            })
            .collect()
    }

    #[test]
    fn init_matches_documented_scheme() {
        let mut model = Model::zeros(
            &ModelDims {
                f_in: 11,
                k: 128,
                d: 128,
                horizon: 4,
                f_out: 7,
                dropout_p: 0.1,
                g_min: 0.05,
                g_max: 0.95,
                gate: GateKind::Quantum,
            },
            vec![7, 8, 9, 10],
        )
        .unwrap();
        model.backbone.b.fill(3.0);
        let mut store = ParameterStore::new(model);
        kaiming_init(&mut store, &mut ChaCha8Rng::seed_from_u64(0));
        let m = store.model();
        assert_eq!(m.quantum_gate().unwrap().unwrap().g, 0.5);
        for t in m.tensors() {
            match t.kind {
                TensorKind::Bias => assert!(t.data.iter().all(|&x| x == 0.0), "{}", t.name),
                TensorKind::NormScale => assert!(t.data.iter().all(|&x| x == 1.0)),
                TensorKind::NormShift | TensorKind::CalendarScale => {
                    assert!(t.data.iter().all(|&x| x == 0.0))
                }
                _ => {}
            }
        }
        let w = m.backbone.w_weight.as_slice();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var / (2.0 / 128.0) - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn slots_cover_every_tensor_once() {
        let store = random_store(0, GateKind::Quantum, 0.0);
        let names: Vec<_> = store.slots().iter().map(|s| s.name).collect();
        let model_names: Vec<_> = store.model().tensors().iter().map(|t| t.name).collect();
        assert_eq!(names, model_names);
        for (s, t) in store.slots().iter().zip(store.model().tensors()) {
            assert_eq!(s.grad.len(), t.data.len());
            assert_eq!(s.m.len(), t.data.len());
        }
    }

    #[test]
    fn loss_of_exact_targets_is_zero_and_gradients_vanish() {
        let mut store = random_store(1, GateKind::Quantum, 0.0);
        let mut batch = random_batch(2, 3);
        for s in &mut batch {
            s.y = store.model().predict(s).unwrap().values;
        }
        let (loss, cache) = forward_loss(&batch, &store, Mode::Eval, 0).unwrap();
        assert_eq!(loss, 0.0);
        backward(&cache, &mut store).unwrap();
        assert!(store.flat_grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_error_of_two_gives_loss_four() {
        let model = Model::zeros(
            &ModelDims {
                f_in: 1,
                k: 2,
                d: 2,
                horizon: 1,
                f_out: 1,
                dropout_p: 0.0,
                g_min: 0.05,
                g_max: 0.95,
                gate: GateKind::Quantum,
            },
            vec![],
        )
        .unwrap();
        let store = ParameterStore::new(model);
        let sample = WindowSample {
            x: Matrix::from_vec(3, 1, vec![0.0, 0.0, 1.0]).unwrap(),
            y: Matrix::from_vec(1, 1, vec![3.0]).unwrap(),
            x_last: vec![1.0],
        };
        let (loss, _) = forward_loss(&[sample], &store, Mode::Eval, 0).unwrap();
        assert_eq!(loss, 4.0);
    }

    /// Second implementation of the forward pass written with plain loops.
    fn straight_line_loss(model: &Model, batch: &[WindowSample]) -> f64 {
        let Gate::Quantum(gp) = &model.gate else { panic!() };
        let z1 = gp.theta1.cos() * gp.phi1.cos();
        let z2 = gp.theta2.cos() * gp.phi2.cos();
        let s = gp.w1 * z1 + gp.w2 * z2 + gp.b_g;
        let g = (1.0 / (1.0 + (-s).exp())).clamp(gp.g_min, gp.g_max);
        let bb = &model.backbone;
        let dec = &model.decoder;
        let (k, d) = (bb.proj_dim(), bb.hidden_dim());
        let mut total = 0.0;
        for sample in batch {
            let w = sample.x.rows();
            let mut c = 0.0;
            for t in 0..w {
                for &col in &model.calendar_columns {
                    c += sample.x[(t, col)];
                }
            }
            if !model.calendar_columns.is_empty() {
                c /= (w * model.calendar_columns.len()) as f64;
            }
            let mut h = vec![0.0; d];
            for t in 0..w {
                let mut v = vec![0.0; k];
                for i in 0..k {
                    v[i] = bb.p_bias[i];
                    for j in 0..sample.x.cols() {
                        v[i] += bb.p_weight[(i, j)] * sample.x[(t, j)];
                    }
                }
                let mut a = vec![0.0; d];
                for i in 0..d {
                    a[i] = bb.b[i] + bb.alpha * c;
                    for j in 0..k {
                        a[i] += bb.w_weight[(i, j)] * v[j];
                    }
                }
                let mu = a.iter().sum::<f64>() / d as f64;
                let var = a.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / d as f64;
                for i in 0..d {
                    let u = bb.ln_gamma[i] * (a[i] - mu) / (var + 1e-5).sqrt() + bb.ln_beta[i];
                    h[i] = (1.0 - g) * h[i] + g * u;
                }
            }
            let mut z = vec![0.0; d];
            for i in 0..d {
                let mut acc = dec.b1[i];
                for j in 0..d {
                    acc += dec.w1[(i, j)] * h[j];
                }
                z[i] = acc.max(0.0);
            }
            let mut se = 0.0;
            for r in 0..dec.horizon {
                for f in 0..dec.f_out {
                    let row = r * dec.f_out + f;
                    let mut y = dec.b2[row] + sample.x_last[f];
                    for j in 0..d {
                        y += dec.w2[(row, j)] * z[j];
                    }
                    se += (y - sample.y[(r, f)]).powi(2);
                }
            }
            total += se / (dec.horizon * dec.f_out) as f64;
        }
        total / batch.len() as f64
    }

    #[test]
    fn loss_matches_straight_line_oracle() {
        let store = random_store(3, GateKind::Quantum, 0.0);
        let batch = random_batch(4, 5);
        let (loss, _) = forward_loss(&batch, &store, Mode::Eval, 0).unwrap();
        assert_abs_diff_eq!(loss, straight_line_loss(store.model(), &batch), epsilon = 1e-12);
    }

    fn loss_at(store: &ParameterStore, batch: &[WindowSample]) -> f64 {
        forward_loss(batch, store, Mode::Eval, 0).unwrap().0
    }

    fn fd_check(gate: GateKind, seed: u64) {
        let mut store = random_store(seed, gate, 0.0);
        if let Gate::Quantum(p) = &mut store.model_mut().gate {
            p.b_g = 0.1;
        }
        let batch = random_batch(seed + 100, 3);
        let (_, cache) = forward_loss(&batch, &store, Mode::Eval, 0).unwrap();
        backward(&cache, &mut store).unwrap();
        let analytic = store.flat_grad();
        let h = 1e-6;
        let mut idx = 0;
        let n_tensors = store.model().tensors().len();
        for ti in 0..n_tensors {
            let len = store.model().tensors()[ti].data.len();
            for e in 0..len {
                let mut plus = store.clone();
                plus.model_mut().tensors_mut()[ti].data[e] += h;
                let mut minus = store.clone();
                minus.model_mut().tensors_mut()[ti].data[e] -= h;
                let n = (loss_at(&plus, &batch) - loss_at(&minus, &batch)) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1.0);
                assert!(rel < 1e-7, "{}[{e}]: analytic {a} fd {n}", store.slots()[ti].name);
                idx += 1;
            }
        }
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        fd_check(GateKind::Quantum, 10);
    }

    #[test]
    fn classical_gate_gradients_match_finite_differences() {
        fd_check(GateKind::Classical, 11);
        fd_check(GateKind::ClassicalPerStep, 12);
    }

    #[test]
    fn duplicated_batch_leaves_gradients_unchanged() {
        let batch = random_batch(5, 2);
        let doubled: Vec<_> = batch.iter().chain(batch.iter()).cloned().collect();
        let mut a = random_store(6, GateKind::Quantum, 0.0);
        let mut b = a.clone();
        let (_, ca) = forward_loss(&batch, &a, Mode::Eval, 0).unwrap();
        backward(&ca, &mut a).unwrap();
        let (_, cb) = forward_loss(&doubled, &b, Mode::Eval, 0).unwrap();
        backward(&cb, &mut b).unwrap();
        for (x, y) in a.flat_grad().iter().zip(b.flat_grad()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut store = random_store(7, GateKind::Quantum, 0.0);
        let batch = random_batch(8, 2);
        let (_, cache) = forward_loss(&batch, &store, Mode::Eval, 0).unwrap();
        store.model_mut().backbone.alpha += 1.0;
        assert!(matches!(backward(&cache, &mut store), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn loss_invariant_under_batch_permutation() {
        let store = random_store(9, GateKind::Quantum, 0.0);
        let mut batch = random_batch(10, 6);
        let a = loss_at(&store, &batch);
        batch.reverse();
        assert_abs_diff_eq!(a, loss_at(&store, &batch), epsilon = 1e-14);
    }

    #[test]
    fn adam_edge_cases() {
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        let mut store = random_store(11, GateKind::Quantum, 0.0);
        let before = store.snapshot();
        adam_step(&mut store, 1e-3, &cfg, 1);
        assert_eq!(store.snapshot(), before);

        // first step from zero moments moves every entry by lr·sign(g)
        let mut store = random_store(12, GateKind::Quantum, 0.0);
        let before = store.snapshot();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in &mut store.slots {
            s.grad.iter_mut().for_each(|g| *g = rng.gen_range(-5.0..5.0));
        }
        let grads: Vec<Vec<f64>> = store.slots().iter().map(|s| s.grad.clone()).collect();
        adam_step(&mut store, 1e-3, &cfg, 1);
        for ((after, prev), g) in store.snapshot().iter().zip(&before).zip(&grads) {
            for ((a, p), gi) in after.iter().zip(prev).zip(g) {
                assert_abs_diff_eq!(a - p, -1e-3 * gi.signum(), epsilon = 1e-9);
            }
        }
        assert!(store.flat_grad().iter().all(|&g| g == 0.0));

        let cfg = TrainConfig {
            weight_decay: 0.1,
            ..TrainConfig::default()
        };
        let mut store = random_store(13, GateKind::Quantum, 0.0);
        let before = store.model().backbone.w_weight.clone();
        let alpha = store.model().backbone.alpha;
        adam_step(&mut store, 1e-3, &cfg, 1);
        for (a, b) in store.model().backbone.w_weight.as_slice().iter().zip(before.as_slice()) {
            assert_abs_diff_eq!(*a, b * 0.9999, epsilon = 1e-15);
        }
        assert_eq!(store.model().backbone.alpha, alpha);
    }

    #[test]
    fn scheduler_traces() {
        let cfg = TrainConfig::default();
        let run = |losses: &[f64]| {
            let mut s = TrainState::new(&cfg);
            for &l in losses {
                scheduler_step(&mut s, l, &cfg);
            }
            s.lr
        };
        assert_eq!(run(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.5]), 1e-3);
        assert_eq!(run(&[1.0, 1.0, 1.0, 1.0]), 1e-3);
        assert_eq!(run(&[1.0, 1.0, 1.0, 1.0, 1.0]), 5e-4);
        assert_eq!(run(&[1.0; 9]), 2.5e-4);
    }

    #[test]
    fn early_stop_after_eleven_flat_epochs_restores_best() {
        let cfg = TrainConfig::default();
        let mut store = random_store(14, GateKind::Quantum, 0.0);
        let mut state = TrainState::new(&cfg);
        assert!(scheduler_step(&mut state, 1.0, &cfg));
        state.best_snapshot = Some(store.snapshot());
        let best = store.snapshot();
        store.model_mut().backbone.alpha = 99.0;
        for i in 0..11 {
            assert!(!early_stop_check(&state, &mut store, &cfg).unwrap(), "epoch {i}");
            assert!(!scheduler_step(&mut state, 1.0, &cfg));
        }
        assert!(early_stop_check(&state, &mut store, &cfg).unwrap());
        assert_eq!(store.snapshot(), best);
    }

    fn sine_data(window: usize, horizon: usize) -> PreparedData {
        let series = synthetic_sine(400, 24.0, 0.0, 0);
        prepare(
            &series,
            &DataOptions {
                window,
                horizon,
                calendar: CalendarMode::None,
                predict_calendar: false,
                target_columns: vec![],
            },
        )
        .unwrap()
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            window: 16,
            horizon: 4,
            k: 8,
            d: 8,
            max_epochs: 4,
            batch_size: 16,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic_and_best_loss_monotone() {
        let data = sine_data(16, 4);
        let a = train(&quick_config(), &data).unwrap();
        let b = train(&quick_config(), &data).unwrap();
        assert_eq!(epoch_log_csv(&a.log), epoch_log_csv(&b.log));
        let mut best = f64::INFINITY;
        for r in &a.log {
            best = best.min(r.val_mse);
            assert!((0.05..=0.95).contains(&r.gate_value));
        }
        assert_abs_diff_eq!(best, a.state.best_val);
    }

    #[test]
    fn restored_parameters_reproduce_best_validation_loss() {
        let data = sine_data(16, 4);
        let out = train(&quick_config(), &data).unwrap();
        let scores = score_samples(out.store.model(), &data.val).unwrap();
        let val = scores.iter().map(|s| s.0).sum::<f64>() / scores.len() as f64;
        assert_eq!(val, out.state.best_val);
    }

    #[test]
    fn empty_training_split_rejected() {
        let mut data = sine_data(16, 4);
        data.train.clear();
        assert!(train(&quick_config(), &data).is_err());
    }

    #[test]
    fn stepwise_trainer_matches_train() {
        let data = sine_data(16, 4);
        let whole = train(&quick_config(), &data).unwrap();
        let mut t = Trainer::new(&quick_config(), &data).unwrap();
        let mut n = 0;
        while t.epoch(&data).unwrap().is_some() {
            n += 1;
        }
        assert!(t.is_done());
        assert_eq!(n, whole.log.len());
        assert!(t.epoch(&data).unwrap().is_none());
        let out = t.finish().unwrap();
        assert_eq!(epoch_log_csv(&out.log), epoch_log_csv(&whole.log));
        assert_eq!(out.store.snapshot(), whole.store.snapshot());
    }

    #[test]
    fn classical_ablation_trains() {
        let data = sine_data(16, 4);
        let cfg = TrainConfig {
            gate: GateKind::Classical,
            ..quick_config()
        };
        let out = train(&cfg, &data).unwrap();
        assert!(out.log.iter().all(|r| r.train_mse.is_finite()));
    }
}

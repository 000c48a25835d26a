//! Flat `key = value` run configuration with kebab-case keys.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! duplicate keys are errors. [`RunConfig::emit`] writes every key in a fixed
//! order, so `parse(emit(c)) == c`.

use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::{CalendarMode, DataOptions, DEFAULT_DATETIME_FORMAT};
use crate::engine::TrainConfig;
use crate::error::{Error, Result};
use crate::model::GateKind;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Empty means "not set".
    pub dataset: String,
    /// Label used in reports; defaults to the dataset file stem.
    pub dataset_name: String,
    pub calendar: CalendarMode,
    pub datetime_column: String,
    pub datetime_format: String,
    /// Comma-separated raw column names; empty selects every raw column.
    pub target_columns: Vec<String>,
    pub predict_calendar: bool,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset: String::new(),
            dataset_name: String::new(),
            calendar: CalendarMode::Ett,
            datetime_column: "date".into(),
            datetime_format: DEFAULT_DATETIME_FORMAT.into(),
            target_columns: Vec::new(),
            predict_calendar: false,
            output_dir: "runs".into(),
        }
    }
}

/// Every accepted key, in emission order.
pub const KEYS: &[&str] = &[
    "dataset",
    "dataset-name",
    "calendar",
    "datetime-column",
    "datetime-format",
    "target-columns",
    "predict-calendar",
    "window",
    "horizon",
    "k",
    "d",
    "dropout-p",
    "g-min",
    "g-max",
    "gate",
    "learning-rate",
    "weight-decay",
    "decoupled-weight-decay",
    "scheduler-factor",
    "scheduler-patience",
    "early-stop-patience",
    "max-epochs",
    "batch-size",
    "seed",
    "output-dir",
];

/// Keys left out of the config hash: where results go, and which gate is used
/// (so ablation rows share a hash).
const UNHASHED: &[&str] = &["output-dir", "gate"];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value for '{key}': '{value}' ({e})")))
}

fn fmt_f64(x: f64) -> String {
    // `{:?}` round-trips exactly and always shows a decimal point or exponent
    format!("{x:?}")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "dataset" => self.dataset = v.into(),
            "dataset-name" => self.dataset_name = v.into(),
            "calendar" => self.calendar = parse_value(key, v)?,
            "datetime-column" => self.datetime_column = v.into(),
            "datetime-format" => self.datetime_format = v.into(),
            "target-columns" => {
                self.target_columns = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "predict-calendar" => self.predict_calendar = parse_value(key, v)?,
            "window" => t.window = parse_value(key, v)?,
            "horizon" => t.horizon = parse_value(key, v)?,
            "k" => t.k = parse_value(key, v)?,
            "d" => t.d = parse_value(key, v)?,
            "dropout-p" => t.dropout_p = parse_value(key, v)?,
            "g-min" => t.g_min = parse_value(key, v)?,
            "g-max" => t.g_max = parse_value(key, v)?,
            "gate" => t.gate = parse_value(key, v)?,
            "learning-rate" => t.learning_rate = parse_value(key, v)?,
            "weight-decay" => t.weight_decay = parse_value(key, v)?,
            "decoupled-weight-decay" => t.decoupled_weight_decay = parse_value(key, v)?,
            "scheduler-factor" => t.scheduler_factor = parse_value(key, v)?,
            "scheduler-patience" => t.scheduler_patience = parse_value(key, v)?,
            "early-stop-patience" => t.early_stop_patience = parse_value(key, v)?,
            "max-epochs" => t.max_epochs = parse_value(key, v)?,
            "batch-size" => t.batch_size = parse_value(key, v)?,
            "seed" => t.seed = parse_value(key, v)?,
            "output-dir" => self.output_dir = v.into(),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        Some(match key {
            "dataset" => self.dataset.clone(),
            "dataset-name" => self.dataset_name.clone(),
            "calendar" => self.calendar.to_string(),
            "datetime-column" => self.datetime_column.clone(),
            "datetime-format" => self.datetime_format.clone(),
            "target-columns" => self.target_columns.join(","),
            "predict-calendar" => self.predict_calendar.to_string(),
            "window" => t.window.to_string(),
            "horizon" => t.horizon.to_string(),
            "k" => t.k.to_string(),
            "d" => t.d.to_string(),
            "dropout-p" => fmt_f64(t.dropout_p),
            "g-min" => fmt_f64(t.g_min),
            "g-max" => fmt_f64(t.g_max),
            "gate" => t.gate.to_string(),
            "learning-rate" => fmt_f64(t.learning_rate),
            "weight-decay" => fmt_f64(t.weight_decay),
            "decoupled-weight-decay" => t.decoupled_weight_decay.to_string(),
            "scheduler-factor" => fmt_f64(t.scheduler_factor),
            "scheduler-patience" => t.scheduler_patience.to_string(),
            "early-stop-patience" => t.early_stop_patience.to_string(),
            "max-epochs" => t.max_epochs.to_string(),
            "batch-size" => t.batch_size.to_string(),
            "seed" => t.seed.to_string(),
            "output-dir" => self.output_dir.clone(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", i + 1)));
            }
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        Self::parse(&text)
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("every listed key is readable"));
            out.push('\n');
        }
        out
    }

    /// First 16 hex digits of SHA-256 over the emitted config minus the
    /// unhashed keys.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        for key in KEYS.iter().filter(|k| !UNHASHED.contains(k)) {
            h.update(key.as_bytes());
            h.update(b"=");
            h.update(self.get(key).unwrap_or_default().as_bytes());
            h.update(b"\n");
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn data_options(&self) -> DataOptions {
        DataOptions {
            window: self.train.window,
            horizon: self.train.horizon,
            calendar: self.calendar,
            predict_calendar: self.predict_calendar,
            target_columns: self.target_columns.clone(),
        }
    }

    pub fn with_gate(&self, gate: GateKind) -> Self {
        let mut c = self.clone();
        c.train.gate = gate;
        c
    }

    /// Report label: `dataset-name`, else the dataset file stem.
    pub fn dataset_label(&self) -> String {
        if !self.dataset_name.is_empty() {
            return self.dataset_name.clone();
        }
        Path::new(&self.dataset)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

//! CSV ingestion, chronological splits, z-score normalization, calendar encodings
//! and sliding windows.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_DATETIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub timestamps: Option<Vec<NaiveDateTime>>,
    pub values: Matrix,
    pub columns: Vec<String>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn load_csv(path: impl AsRef<Path>, datetime_column: &str, format: &str) -> Result<RawSeries> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", path.as_ref().display()))
    })?;
    read_csv(file, datetime_column, format)
}

/// Parses a header-first CSV. Rows are reported 1-based, counting data rows only.
pub fn read_csv<R: Read>(reader: R, datetime_column: &str, format: &str) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let dt_idx = headers.iter().position(|h| h == datetime_column).ok_or_else(|| {
        Error::Data(format!("datetime column '{datetime_column}' not found in header"))
    })?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != dt_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: headers.get(record.len()).cloned().unwrap_or_default(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let field = field.trim();
            if j == dt_idx {
                let ts = NaiveDateTime::parse_from_str(field, format).map_err(|e| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: format!("'{field}' is not a datetime in format '{format}': {e}"),
                })?;
                timestamps.push(ts);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: headers[j].clone(),
                    message: if field.is_empty() {
                        "missing value".to_string()
                    } else {
                        format!("'{field}' is not a number")
                    },
                })?;
                data.push(v);
            }
        }
    }
    check_spacing(&timestamps)?;
    let n = timestamps.len();
    Ok(RawSeries {
        timestamps: Some(timestamps),
        values: Matrix::from_vec(n, columns.len(), data)?,
        columns,
    })
}

fn check_spacing(ts: &[NaiveDateTime]) -> Result<()> {
    if ts.len() < 2 {
        return Ok(());
    }
    let step = ts[1] - ts[0];
    if step <= Duration::zero() {
        return Err(Error::Data("timestamps are not strictly increasing at row 2".into()));
    }
    for (i, pair) in ts.windows(2).enumerate() {
        let delta = pair[1] - pair[0];
        if delta <= Duration::zero() {
            return Err(Error::Data(format!(
                "timestamps are not strictly increasing at row {}",
                i + 2
            )));
        }
        if delta != step {
            return Err(Error::Data(format!(
                "irregular spacing at row {}: expected {}s, found {}s",
                i + 2,
                step.num_seconds(),
                delta.num_seconds()
            )));
        }
    }
    Ok(())
}

pub fn write_csv<W: Write>(series: &RawSeries, writer: W, datetime_format: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(series.columns.iter().cloned());
    w.write_record(&header)?;
    for r in 0..series.len() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(match &series.timestamps {
            Some(ts) => ts[r].format(datetime_format).to_string(),
            None => r.to_string(),
        });
        rec.extend(series.values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(invalid(format!("unknown split '{other}'"))),
        }
    }
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Contiguous train/val/test ranges with boundaries at `floor(r₀·N)` and
/// `floor((r₀+r₁)·N)`. Every split must hold at least one `window + horizon` sample.
pub fn chronological_split(
    n: usize,
    ratios: (f64, f64, f64),
    window: usize,
    horizon: usize,
) -> Result<Splits> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "split ratios must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    // the small guard absorbs products like 0.6·N landing a hair under an integer
    let cut1 = (a * n as f64 + 1e-9).floor() as usize;
    let cut2 = ((a + b) * n as f64 + 1e-9).floor() as usize;
    let splits = Splits {
        train: 0..cut1,
        val: cut1..cut2,
        test: cut2..n,
    };
    let need = window + horizon;
    for (name, r) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        if r.len() < need {
            return Err(Error::Data(format!(
                "{name} split has {} rows but at least {need} (window {window} + horizon {horizon}) are required",
                r.len()
            )));
        }
    }
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population mean/std of each column over `train` rows only.
    pub fn fit(series: &RawSeries, train: Range<usize>) -> Result<Self> {
        if train.is_empty() || train.end > series.len() {
            return Err(invalid("training range must be non-empty and within the series"));
        }
        let n = train.len() as f64;
        let cols = series.values.cols();
        let mut mean = vec![0.0; cols];
        for r in train.clone() {
            for (m, v) in mean.iter_mut().zip(series.values.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for r in train {
            for ((s, v), m) in var.iter_mut().zip(series.values.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        if let Some(j) = std.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::Data(format!(
                "column '{}' is constant on the training split and cannot be normalized",
                series.columns[j]
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, values: &Matrix) -> Matrix {
        let mut out = values.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn denormalize(&self, values: &Matrix) -> Matrix {
        self.denormalize_columns(values, &(0..self.mean.len()).collect::<Vec<_>>())
    }

    /// Inverse transform for a matrix whose columns are `columns` of the fitted data.
    pub fn denormalize_columns(&self, values: &Matrix, columns: &[usize]) -> Matrix {
        let mut out = values.clone();
        for r in 0..out.rows() {
            for (v, &c) in out.row_mut(r).iter_mut().zip(columns) {
                if c < self.mean.len() {
                    *v = *v * self.std[c] + self.mean[c];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalendarMode {
    /// hour-of-day and day-of-year
    Ett,
    /// hour-of-day and day-of-week
    Traffic,
    None,
}

impl fmt::Display for CalendarMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalendarMode::Ett => "ett",
            CalendarMode::Traffic => "traffic",
            CalendarMode::None => "none",
        })
    }
}

impl FromStr for CalendarMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ett" => Ok(CalendarMode::Ett),
            "traffic" => Ok(CalendarMode::Traffic),
            "none" => Ok(CalendarMode::None),
            other => Err(invalid(format!("unknown calendar mode '{other}'"))),
        }
    }
}

/// Fractional hour of day, so 15-minute data keeps its resolution.
pub fn fractional_hour(ts: &NaiveDateTime) -> f64 {
    ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0
}

pub fn calendar_row(ts: &NaiveDateTime, mode: CalendarMode) -> Vec<f64> {
    let tau = 2.0 * PI;
    let h = fractional_hour(ts);
    match mode {
        CalendarMode::None => Vec::new(),
        CalendarMode::Ett => {
            // 365 even in leap years
            let d = ts.ordinal() as f64;
            vec![
                (tau * h / 24.0).sin(),
                (tau * h / 24.0).cos(),
                (tau * d / 365.0).sin(),
                (tau * d / 365.0).cos(),
            ]
        }
        CalendarMode::Traffic => {
            let w = ts.weekday().num_days_from_monday() as f64;
            vec![
                (tau * h / 24.0).sin(),
                (tau * h / 24.0).cos(),
                (tau * w / 7.0).sin(),
                (tau * w / 7.0).cos(),
            ]
        }
    }
}

/// Appends calendar columns after the (already normalized) raw columns and returns
/// their indices.
pub fn add_calendar_features(
    values: &Matrix,
    timestamps: Option<&[NaiveDateTime]>,
    mode: CalendarMode,
) -> Result<(Matrix, Vec<usize>)> {
    if mode == CalendarMode::None {
        return Ok((values.clone(), Vec::new()));
    }
    let ts = timestamps
        .ok_or_else(|| invalid(format!("calendar mode '{mode}' requires timestamps")))?;
    if ts.len() != values.rows() {
        return Err(invalid("timestamp count does not match row count"));
    }
    let raw = values.cols();
    let extra = 4;
    let mut out = Matrix::zeros(values.rows(), raw + extra);
    for (r, t) in ts.iter().enumerate() {
        let row = out.row_mut(r);
        row[..raw].copy_from_slice(values.row(r));
        row[raw..].copy_from_slice(&calendar_row(t, mode));
    }
    Ok((out, (raw..raw + extra).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// W×F_in input window.
    pub x: Matrix,
    /// H×F_out targets following the window.
    pub y: Matrix,
    /// Target columns of the window's final row.
    pub x_last: Vec<f64>,
}

/// Columns that are not calendar encodings.
pub fn raw_columns(f_in: usize, calendar_columns: &[usize]) -> Vec<usize> {
    (0..f_in).filter(|c| !calendar_columns.contains(c)).collect()
}

/// Stride-1 windows inside `range`; targets are the non-calendar columns.
pub fn make_windows(
    matrix: &Matrix,
    range: Range<usize>,
    window: usize,
    horizon: usize,
    calendar_columns: &[usize],
) -> Result<Vec<WindowSample>> {
    let targets = raw_columns(matrix.cols(), calendar_columns);
    make_windows_with_targets(matrix, range, window, horizon, &targets)
}

pub fn make_windows_with_targets(
    matrix: &Matrix,
    range: Range<usize>,
    window: usize,
    horizon: usize,
    targets: &[usize],
) -> Result<Vec<WindowSample>> {
    if window == 0 || horizon == 0 {
        return Err(invalid("window and horizon must be positive"));
    }
    if range.end > matrix.rows() {
        return Err(invalid("window range exceeds the data"));
    }
    if range.len() < window + horizon {
        return Err(Error::Data(format!(
            "range of {} rows is shorter than window {window} + horizon {horizon}",
            range.len()
        )));
    }
    let count = range.len() - window - horizon + 1;
    let f_in = matrix.cols();
    let pick = |r: usize| targets.iter().map(move |&c| matrix[(r, c)]);
    Ok((0..count)
        .map(|i| {
            let start = range.start + i;
            let x_data = matrix.as_slice()[start * f_in..(start + window) * f_in].to_vec();
            let y_data: Vec<f64> = (start + window..start + window + horizon)
                .flat_map(pick)
                .collect();
            WindowSample {
                x: Matrix::from_vec(window, f_in, x_data).expect("window slice"),
                y: Matrix::from_vec(horizon, targets.len(), y_data).expect("target slice"),
                x_last: pick(start + window - 1).collect(),
            }
        })
        .collect())
}

/// Rows and period of the noiseless sine fixture used by the learning checks.
pub const SINE_FIXTURE_ROWS: usize = 1200;
pub const SINE_FIXTURE_PERIOD: f64 = 48.0;

pub fn sine_fixture() -> RawSeries {
    synthetic_sine(SINE_FIXTURE_ROWS, SINE_FIXTURE_PERIOD, 0.0, 0)
}

/// Noisy sine with amplitude 1, one row per hour from 2016-07-01 00:00:00.
pub fn synthetic_sine(n: usize, period: f64, noise: f64, seed: u64) -> RawSeries {
    let start = NaiveDateTime::parse_from_str("2016-07-01 00:00:00", DEFAULT_DATETIME_FORMAT)
        .expect("fixed start timestamp");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let values: Vec<f64> = (0..n)
        .map(|t| {
            let clean = (2.0 * PI * t as f64 / period).sin();
            if noise > 0.0 {
                clean + noise * normal.sample(&mut rng)
            } else {
                clean
            }
        })
        .collect();
    RawSeries {
        timestamps: Some((0..n).map(|t| start + Duration::hours(t as i64)).collect()),
        values: Matrix::from_vec(n, 1, values).expect("column vector"),
        columns: vec!["value".to_string()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataOptions {
    pub window: usize,
    pub horizon: usize,
    pub calendar: CalendarMode,
    /// Also forecast the calendar columns.
    pub predict_calendar: bool,
    /// Restrict targets to these raw column names; empty means every raw column.
    pub target_columns: Vec<String>,
}

/// Everything the trainer needs from one dataset.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub columns: Vec<String>,
    pub normalizer: Normalizer,
    pub splits: Splits,
    /// Normalized values with calendar columns appended.
    pub matrix: Matrix,
    pub calendar_columns: Vec<usize>,
    pub target_columns: Vec<usize>,
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl PreparedData {
    pub fn f_in(&self) -> usize {
        self.matrix.cols()
    }

    pub fn f_out(&self) -> usize {
        self.target_columns.len()
    }

    pub fn split(&self, split: Split) -> &[WindowSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn prepare(series: &RawSeries, opts: &DataOptions) -> Result<PreparedData> {
    let splits = chronological_split(series.len(), DEFAULT_RATIOS, opts.window, opts.horizon)?;
    let normalizer = Normalizer::fit(series, splits.train.clone())?;
    let normalized = normalizer.apply(&series.values);
    let (matrix, calendar_columns) =
        add_calendar_features(&normalized, series.timestamps.as_deref(), opts.calendar)?;
    let mut target_columns = if opts.target_columns.is_empty() {
        (0..series.columns.len()).collect::<Vec<_>>()
    } else {
        opts.target_columns
            .iter()
            .map(|name| {
                series
                    .column_index(name)
                    .ok_or_else(|| Error::Data(format!("target column '{name}' not in dataset")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    if opts.predict_calendar {
        target_columns.extend(&calendar_columns);
    }
    let mk = |r: Range<usize>| {
        make_windows_with_targets(&matrix, r, opts.window, opts.horizon, &target_columns)
    };
    Ok(PreparedData {
        columns: series.columns.clone(),
        normalizer,
        train: mk(splits.train.clone())?,
        val: mk(splits.val.clone())?,
        test: mk(splits.test.clone())?,
        splits,
        matrix,
        calendar_columns,
        target_columns,
    })
}

//! Reading and preparing observed signals: CSV input with missing values,
//! linear interpolation, fixed-window averaging, and CSV output.

use std::fs::File;
use std::path::Path;

use log::warn;

use crate::error::{FusionError, Result};
use crate::model::{PosteriorSamples, PosteriorSummary, SampleMeta};

/// Which CSV column to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSpec {
    /// 0-based field position.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl ColumnSpec {
    /// Digits select a position, anything else a header name.
    pub fn parse(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnSpec::Index(i),
            Err(_) => ColumnSpec::Name(s.to_string()),
        }
    }
}

/// Values indexed by strictly increasing timestamps; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedSeries {
    pub timestamps: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl TimedSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<Option<f64>>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(FusionError::domain(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(FusionError::domain(format!(
                "timestamps must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { timestamps, values })
    }

    /// Timestamps 0, 1, 2, ...
    pub fn indexed(values: Vec<Option<f64>>) -> Self {
        Self {
            timestamps: (0..values.len()).map(|i| i as f64).collect(),
            values,
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        Self::indexed(values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// All values, failing if any is missing.
    pub fn complete_values(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    FusionError::State(format!("value {} is missing; interpolate first", i + 1))
                })
            })
            .collect()
    }
}

fn is_missing_marker(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

fn parse_cell(field: &str) -> std::result::Result<Option<f64>, String> {
    if is_missing_marker(field) {
        return Ok(None);
    }
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("'{}' is not a number", field.trim()))?;
    if v.is_finite() {
        Ok(Some(v))
    } else {
        Err(format!("'{}' is not finite", field.trim()))
    }
}

fn resolve(spec: &ColumnSpec, header: Option<&csv::StringRecord>, path: &Path) -> Result<usize> {
    match spec {
        ColumnSpec::Index(i) => Ok(*i),
        ColumnSpec::Name(name) => header
            .and_then(|h| h.iter().position(|f| f.trim() == name))
            .ok_or_else(|| FusionError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("no column named '{name}' in the header"),
            }),
    }
}

/// Reads one numeric column, optionally with a timestamp column. A first
/// row whose selected field is neither numeric nor a missing marker is
/// treated as a header. Without a timestamp column, timestamps are 0, 1, ...
pub fn read_signal_csv(
    path: &Path,
    value: &ColumnSpec,
    time: Option<&ColumnSpec>,
) -> Result<TimedSeries> {
    let file = File::open(path).map_err(|e| FusionError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| FusionError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        records.push((line, rec));
    }
    if records.is_empty() {
        return Err(FusionError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "file contains no rows".into(),
        });
    }

    let named = matches!(value, ColumnSpec::Name(_)) || matches!(time, Some(ColumnSpec::Name(_)));
    let header_row = if named {
        true
    } else {
        let (_, first) = &records[0];
        let probe = |spec: &ColumnSpec| {
            let ColumnSpec::Index(i) = spec else { return false };
            first.get(*i).is_some_and(|f| parse_cell(f).is_err())
        };
        probe(value) || time.is_some_and(probe)
    };
    let header = header_row.then(|| records[0].1.clone());
    let vcol = resolve(value, header.as_ref(), path)?;
    let tcol = time.map(|t| resolve(t, header.as_ref(), path)).transpose()?;

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in records.iter().skip(usize::from(header_row)) {
        let err = |message: String| FusionError::Parse {
            path: path.to_path_buf(),
            line: *line,
            message,
        };
        let field = |col: usize| {
            rec.get(col)
                .ok_or_else(|| err(format!("row has {} fields, column {} requested", rec.len(), col + 1)))
        };
        values.push(parse_cell(field(vcol)?).map_err(err)?);
        if let Some(tc) = tcol {
            let t = parse_cell(field(tc)?)
                .map_err(err)?
                .ok_or_else(|| err("timestamp is missing".into()))?;
            if timestamps.last().is_some_and(|&prev| !(t > prev)) {
                return Err(err(format!("timestamp {t} is not after the previous one")));
            }
            timestamps.push(t);
        }
    }
    if values.iter().all(Option::is_none) {
        return Err(FusionError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "selected column has no values".into(),
        });
    }
    Ok(match tcol {
        Some(_) => TimedSeries { timestamps, values },
        None => TimedSeries::indexed(values),
    })
}

/// Replaces each missing value by linear interpolation in timestamp space
/// between its nearest present neighbours. Missing values before the first
/// or after the last present value take that value when `extend_ends` is
/// set and are an error otherwise.
pub fn interpolate_missing(ts: &TimedSeries, extend_ends: bool) -> Result<TimedSeries> {
    let present: Vec<usize> = (0..ts.len()).filter(|&i| ts.values[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
        return Err(FusionError::State("series has no values to interpolate from".into()));
    };
    if !extend_ends && (first > 0 || last + 1 < ts.len()) {
        return Err(FusionError::State(
            "first or last value is missing; enable end extension to fill it".into(),
        ));
    }
    let mut out = ts.values.clone();
    for v in out.iter_mut().take(first) {
        *v = ts.values[first];
    }
    for v in out.iter_mut().skip(last + 1) {
        *v = ts.values[last];
    }
    for pair in present.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (ts.values[a].unwrap_or_default(), ts.values[b].unwrap_or_default());
        let (ta, tb) = (ts.timestamps[a], ts.timestamps[b]);
        for i in a + 1..b {
            let w = (ts.timestamps[i] - ta) / (tb - ta);
            out[i] = Some(ya + w * (yb - ya));
        }
    }
    Ok(TimedSeries {
        timestamps: ts.timestamps.clone(),
        values: out,
    })
}

/// Means of consecutive blocks of `window` values, stamped with each block's
/// first timestamp. A shorter trailing block is averaged when
/// `allow_partial` is set and rejected otherwise.
pub fn window_average(ts: &TimedSeries, window: usize, allow_partial: bool) -> Result<TimedSeries> {
    if window == 0 {
        return Err(FusionError::domain("window must be positive"));
    }
    let values = ts.complete_values()?;
    let rem = values.len() % window;
    if rem != 0 {
        if !allow_partial {
            return Err(FusionError::domain(format!(
                "length {} is not a multiple of window {window}",
                values.len()
            )));
        }
        warn!("trailing partial window of {rem} values averaged on its own");
    }
    let timestamps = ts.timestamps.iter().step_by(window).copied().collect();
    let means = values
        .chunks(window)
        .map(|c| Some(c.iter().sum::<f64>() / c.len() as f64))
        .collect();
    Ok(TimedSeries {
        timestamps,
        values: means,
    })
}

/// Natural log of every present value.
pub fn log_transform(ts: &TimedSeries) -> Result<TimedSeries> {
    let values = ts
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(x) if *x > 0.0 => Ok(Some(x.ln())),
            Some(x) => Err(FusionError::domain(format!(
                "value {} is {x}; log needs positive values",
                i + 1
            ))),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    Ok(TimedSeries {
        timestamps: ts.timestamps.clone(),
        values,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| FusionError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> FusionError + '_ {
    move |e| FusionError::io(path, std::io::Error::other(e))
}

/// Writes columns t, value; missing values as NA. Numbers use the shortest
/// representation that reads back to the same f64.
pub fn write_signal_csv(path: &Path, ts: &TimedSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "value"]).map_err(csv_io(path))?;
    for (t, v) in ts.timestamps.iter().zip(&ts.values) {
        let v = v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        w.write_record([t.to_string(), v]).map_err(csv_io(path))?;
    }
    w.flush().map_err(|e| FusionError::io(path, e))
}

/// Writes columns index (1-based), y, post_mean, lower, upper.
pub fn write_estimate_csv(path: &Path, y: &[f64], summary: &PosteriorSummary) -> Result<()> {
    if y.len() != summary.mean.len() {
        return Err(FusionError::domain("data and summary lengths differ"));
    }
    let mut w = csv_writer(path)?;
    w.write_record(["index", "y", "post_mean", "lower", "upper"])
        .map_err(csv_io(path))?;
    for i in 0..y.len() {
        w.write_record([
            (i + 1).to_string(),
            y[i].to_string(),
            summary.mean[i].to_string(),
            summary.lower[i].to_string(),
            summary.upper[i].to_string(),
        ])
        .map_err(csv_io(path))?;
    }
    w.flush().map_err(|e| FusionError::io(path, e))
}

/// Columns y and post_mean of a file written by [`write_estimate_csv`].
pub fn read_estimate_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let y = read_signal_csv(path, &ColumnSpec::Name("y".into()), None)?;
    let m = read_signal_csv(path, &ColumnSpec::Name("post_mean".into()), None)?;
    Ok((y.complete_values()?, m.complete_values()?))
}

/// Writes one row per draw: sigma_sq, tau_sq, theta_1, ..., theta_n.
pub fn write_draws_csv(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header = ["sigma_sq".to_string(), "tau_sq".to_string()]
        .into_iter()
        .chain((1..=samples.n()).map(|j| format!("theta_{j}")));
    w.write_record(header).map_err(csv_io(path))?;
    for (k, row) in samples.iter_rows().enumerate() {
        let fields = [samples.sigma_draws[k], samples.tau_draws[k]]
            .into_iter()
            .chain(row.iter().copied())
            .map(|v| v.to_string());
        w.write_record(fields).map_err(csv_io(path))?;
    }
    w.flush().map_err(|e| FusionError::io(path, e))
}

/// Reads a file written by [`write_draws_csv`].
pub fn read_draws_csv(path: &Path, meta: SampleMeta) -> Result<PosteriorSamples> {
    let file = File::open(path).map_err(|e| FusionError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut rows = Vec::new();
    let mut sigma = Vec::new();
    let mut tau = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| FusionError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let values = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| FusionError::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
        if values.len() < 3 {
            return Err(FusionError::Parse {
                path: path.to_path_buf(),
                line,
                message: "draw rows need sigma_sq, tau_sq and at least one theta".into(),
            });
        }
        sigma.push(values[0]);
        tau.push(values[1]);
        rows.push(values[2..].to_vec());
    }
    if rows.is_empty() {
        return Err(FusionError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no draws".into(),
        });
    }
    PosteriorSamples::from_rows(&rows, sigma, tau, meta)
}

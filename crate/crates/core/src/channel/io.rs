//! Line-oriented text formats for sample lists and scalers.
//!
//! Dataset file:
//!
//! ```text
//! # tgan-dataset 1 records=<n> train=<k|->
//! distance_m;gain_1,phase_1,delay_1,aoa_1;...;gain_15,phase_15,delay_15,aoa_15
//! ...
//! ```
//!
//! `train=k` marks the first `k` records as the training split; `-` means
//! the list is unsplit (e.g. generated samples). Numbers are written with
//! 17 significant digits, so parsing restores every value bit for bit.
//!
//! Scaler file:
//!
//! ```text
//! # tgan-scaler 1
//! gain_db.min = <value>
//! gain_db.max = <value>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{ChannelSample, Feature, Mpc, Range, Scaler, NUM_MPCS};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "# tgan-dataset";
pub const SCALER_MAGIC: &str = "# tgan-scaler";
pub const FORMAT_VERSION: u32 = 1;

/// Parsed contents of a dataset file.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleList {
    pub samples: Vec<ChannelSample>,
    /// Leading records that form the training split, if the list is split.
    pub train_count: Option<usize>,
}

impl SampleList {
    pub fn unsplit(samples: Vec<ChannelSample>) -> Self {
        Self {
            samples,
            train_count: None,
        }
    }

    pub fn train(&self) -> &[ChannelSample] {
        &self.samples[..self.train_count.unwrap_or(self.samples.len())]
    }

    pub fn test(&self) -> &[ChannelSample] {
        &self.samples[self.train_count.unwrap_or(self.samples.len())..]
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn format_samples(list: &SampleList) -> String {
    let mut out = String::new();
    let train = list
        .train_count
        .map_or_else(|| "-".to_string(), |k| k.to_string());
    let _ = writeln!(
        out,
        "{DATASET_MAGIC} {FORMAT_VERSION} records={} train={train}",
        list.samples.len()
    );
    for s in &list.samples {
        out.push_str(&num(s.distance()));
        for m in s.mpcs() {
            let _ = write!(
                out,
                ";{},{},{},{}",
                num(m.gain),
                num(m.phase),
                num(m.delay),
                num(m.aoa)
            );
        }
        out.push('\n');
    }
    out
}

fn parse_err(record: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        record,
        message: message.into(),
    }
}

fn parse_f64(text: &str, record: usize) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(record, format!("bad number `{text}`: {e}")))
}

fn header_field<'a>(fields: &[&'a str], key: &str) -> Option<&'a str> {
    fields.iter().find_map(|f| f.strip_prefix(key)?.strip_prefix('='))
}

/// Parses a dataset file. Record indices in errors are 1-based line
/// numbers, the header being line 1.
pub fn parse_samples(text: &str) -> Result<SampleList> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header"))?;
    let rest = header
        .strip_prefix(DATASET_MAGIC)
        .ok_or_else(|| parse_err(1, "not a tgan dataset file"))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    match fields.first().map(|v| v.parse::<u32>()) {
        Some(Ok(FORMAT_VERSION)) => {}
        _ => return Err(parse_err(1, format!("unsupported format version in `{header}`"))),
    }
    let records: usize = header_field(&fields, "records")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "header lacks records=<n>"))?;
    let train_count = match header_field(&fields, "train") {
        None | Some("-") => None,
        Some(v) => Some(
            v.parse::<usize>()
                .map_err(|_| parse_err(1, format!("bad train count `{v}`")))?,
        ),
    };
    let mut samples = Vec::with_capacity(records);
    for (i, line) in lines.enumerate() {
        let record = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(';').collect();
        if parts.len() != NUM_MPCS + 1 {
            return Err(Error::Validation(format!(
                "record {record}: expected {NUM_MPCS} mpcs, got {}",
                parts.len().saturating_sub(1)
            )));
        }
        let distance = parse_f64(parts[0], record)?;
        let mut mpcs = Vec::with_capacity(NUM_MPCS);
        for part in &parts[1..] {
            let v: Vec<&str> = part.split(',').collect();
            if v.len() != 4 {
                return Err(parse_err(record, format!("mpc `{part}` needs 4 fields")));
            }
            mpcs.push(Mpc {
                gain: parse_f64(v[0], record)?,
                phase: parse_f64(v[1], record)?,
                delay: parse_f64(v[2], record)?,
                aoa: parse_f64(v[3], record)?,
            });
        }
        let sample = ChannelSample::new(mpcs, distance)
            .map_err(|e| Error::Validation(format!("record {record}: {e}")))?;
        samples.push(sample);
    }
    if samples.len() != records {
        return Err(parse_err(
            samples.len() + 2,
            format!("expected {records} records, found {}", samples.len()),
        ));
    }
    if train_count.is_some_and(|k| k > records) {
        return Err(parse_err(1, "train count exceeds record count"));
    }
    Ok(SampleList {
        samples,
        train_count,
    })
}

pub fn format_scaler(scaler: &Scaler) -> String {
    let mut out = format!("{SCALER_MAGIC} {FORMAT_VERSION}\n");
    for f in Feature::ALL {
        let r = scaler.get(f);
        let _ = writeln!(out, "{}.min = {}", f.name(), num(r.min));
        let _ = writeln!(out, "{}.max = {}", f.name(), num(r.max));
    }
    out
}

pub fn parse_scaler(text: &str) -> Result<Scaler> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let version = header
        .strip_prefix(SCALER_MAGIC)
        .map(|v| v.trim().parse::<u32>());
    if !matches!(version, Some(Ok(FORMAT_VERSION))) {
        return Err(parse_err(1, "not a tgan scaler file"));
    }
    let mut values: [[Option<f64>; 2]; 5] = [[None; 2]; 5];
    for (i, line) in lines.enumerate() {
        let record = i + 2;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(record, format!("expected key = value, got `{line}`")))?;
        let (name, bound) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| parse_err(record, format!("bad key `{key}`")))?;
        let fi = Feature::ALL
            .iter()
            .position(|f| f.name() == name)
            .ok_or_else(|| parse_err(record, format!("unknown feature `{name}`")))?;
        let bi = match bound {
            "min" => 0,
            "max" => 1,
            _ => return Err(parse_err(record, format!("unknown bound `{bound}`"))),
        };
        values[fi][bi] = Some(parse_f64(value, record)?);
    }
    let mut ranges = [Range { min: 0.0, max: 0.0 }; 5];
    for (fi, f) in Feature::ALL.iter().enumerate() {
        match values[fi] {
            [Some(min), Some(max)] => ranges[fi] = Range { min, max },
            _ => {
                return Err(parse_err(
                    0,
                    format!("scaler file lacks bounds for {}", f.name()),
                ))
            }
        }
    }
    Scaler::from_ranges(ranges)
}

pub fn save_samples(path: &Path, list: &SampleList) -> Result<()> {
    std::fs::write(path, format_samples(list))?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<SampleList> {
    parse_samples(&std::fs::read_to_string(path)?)
}

pub fn save_scaler(path: &Path, scaler: &Scaler) -> Result<()> {
    std::fs::write(path, format_scaler(scaler))?;
    Ok(())
}

pub fn load_scaler(path: &Path) -> Result<Scaler> {
    parse_scaler(&std::fs::read_to_string(path)?)
}

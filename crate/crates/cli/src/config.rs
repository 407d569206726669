//! Run configuration: a flat `key=value` file merged with command-line
//! flags (flags win).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use regimecast::{Frequency, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    #[default]
    Text,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format `{other}` (csv or text)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Text => "text",
        })
    }
}

/// A price file and the frequency it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSpec {
    pub frequency: Frequency,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<InputSpec>,
    pub date_column: String,
    pub price_column: String,
    /// Per frequency; a frequency without an entry uses the 90% split.
    pub in_sample_end: Vec<(Frequency, NaiveDate)>,
    pub models: Vec<ModelSpec>,
    /// Overrides the frequency presets when set.
    pub horizons: Option<Vec<usize>>,
    pub alpha: f64,
    pub seed: u64,
    pub restarts: usize,
    pub mc_paths: usize,
    pub stride: usize,
    pub reestimate: Option<usize>,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            date_column: "date".into(),
            price_column: "price".into(),
            in_sample_end: Vec::new(),
            models: ModelSpec::ALL.to_vec(),
            horizons: None,
            alpha: 0.05,
            seed: 0,
            restarts: 5,
            mc_paths: 10_000,
            stride: 1,
            reestimate: None,
            out: PathBuf::from("regimecast-out"),
            format: Format::Text,
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("date `{s}`: {e}"))
}

/// `FREQ=VALUE` or a bare `VALUE` that applies to `default`.
pub fn split_tagged(s: &str, default: Frequency) -> Result<(Frequency, String), String> {
    match s.split_once('=') {
        Some((f, v)) if f.trim().parse::<Frequency>().is_ok() => Ok((f.trim().parse().unwrap(), v.trim().to_string())),
        _ => Ok((default, s.trim().to_string())),
    }
}

impl RunConfig {
    /// Set one key; repeated `input` and `in_sample_end` keys accumulate.
    pub fn set(&mut self, key: &str, value: &str, default_frequency: Frequency) -> Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "input" => {
                let (frequency, path) = split_tagged(value, default_frequency)?;
                self.inputs.retain(|i| i.frequency != frequency);
                self.inputs.push(InputSpec {
                    frequency,
                    path: PathBuf::from(path),
                });
            }
            "date_column" => self.date_column = value.to_string(),
            "price_column" => self.price_column = value.to_string(),
            "in_sample_end" => {
                let (frequency, date) = split_tagged(value, default_frequency)?;
                let date = parse_date(&date)?;
                self.in_sample_end.retain(|(f, _)| *f != frequency);
                self.in_sample_end.push((frequency, date));
            }
            "models" => self.models = parse_list(value).map_err(|e| format!("models: {e}"))?,
            "horizons" => {
                let h: Vec<usize> = parse_list(value).map_err(|e| format!("horizons: {e}"))?;
                self.horizons = Some(h);
            }
            "alpha" => self.alpha = value.parse().map_err(|e| format!("alpha: {e}"))?,
            "seed" => self.seed = value.parse().map_err(|e| format!("seed: {e}"))?,
            "restarts" => self.restarts = value.parse().map_err(|e| format!("restarts: {e}"))?,
            "mc_paths" => self.mc_paths = value.parse().map_err(|e| format!("mc_paths: {e}"))?,
            "stride" => self.stride = value.parse().map_err(|e| format!("stride: {e}"))?,
            "reestimate" => {
                self.reestimate = match value {
                    "" | "off" | "0" => None,
                    v => Some(v.parse().map_err(|e| format!("reestimate: {e}"))?),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Parse the file form. Blank lines and `#` comments are ignored.
    pub fn parse_file(text: &str, default_frequency: Frequency) -> Result<Self, String> {
        let mut c = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            c.set(k, v, default_frequency).map_err(|e| format!("config line {}: {e}", i + 1))?;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(format!("alpha must be in (0, 0.5], got {}", self.alpha));
        }
        if self.restarts == 0 {
            return Err("restarts must be >= 1".into());
        }
        if self.mc_paths < 1000 {
            return Err("mc_paths must be >= 1000".into());
        }
        if self.stride == 0 {
            return Err("stride must be >= 1".into());
        }
        if self.reestimate == Some(0) {
            return Err("reestimate must be >= 1".into());
        }
        if self.models.is_empty() {
            return Err("no models selected".into());
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() || h.contains(&0) {
                return Err("horizons must be positive".into());
            }
        }
        Ok(())
    }

    pub fn horizons_for(&self, frequency: Frequency) -> Vec<usize> {
        self.horizons.clone().unwrap_or_else(|| frequency.default_horizons())
    }

    pub fn in_sample_end_for(&self, frequency: Frequency) -> Option<NaiveDate> {
        self.in_sample_end.iter().find(|(f, _)| *f == frequency).map(|(_, d)| *d)
    }

    /// Lines of everything except the output location, in a fixed order.
    fn body_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        let mut inputs = self.inputs.clone();
        inputs.sort_by_key(|i| i.frequency as u8);
        for i in &inputs {
            lines.push(format!("input={}={}", i.frequency, i.path.display()));
        }
        lines.push(format!("date_column={}", self.date_column));
        lines.push(format!("price_column={}", self.price_column));
        let mut ends = self.in_sample_end.clone();
        ends.sort_by_key(|(f, _)| *f as u8);
        for (f, d) in ends {
            lines.push(format!("in_sample_end={f}={d}"));
        }
        lines.push(format!("models={}", join(&self.models)));
        if let Some(h) = &self.horizons {
            lines.push(format!("horizons={}", join(h)));
        }
        lines.push(format!("alpha={}", self.alpha));
        lines.push(format!("seed={}", self.seed));
        lines.push(format!("restarts={}", self.restarts));
        lines.push(format!("mc_paths={}", self.mc_paths));
        lines.push(format!("stride={}", self.stride));
        lines.push(format!("reestimate={}", self.reestimate.map_or("off".to_string(), |n| n.to_string())));
        lines.push(format!("format={}", self.format));
        lines
    }

    /// File form without the `out` key, as stored inside an output bundle.
    pub fn to_bundle_string(&self) -> String {
        self.body_lines().join("\n") + "\n"
    }

    /// File form; [`RunConfig::parse_file`] reads it back unchanged.
    pub fn to_file_string(&self) -> String {
        let mut lines = self.body_lines();
        lines.push(format!("out={}", self.out.display()));
        lines.join("\n") + "\n"
    }

    /// SHA-256 over the configuration (output location excluded) and the
    /// checksums of the input files, so moving the output or renaming an
    /// unchanged input does not change it. `extra` covers settings that live
    /// outside the file form (simulation parameters).
    pub fn hash(&self, input_checksums: &[(Frequency, String)], extra: &[String]) -> String {
        let mut h = Sha256::new();
        for line in self.body_lines().iter().filter(|l| !l.starts_with("input=")) {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        let mut sums = input_checksums.to_vec();
        sums.sort_by_key(|(f, _)| *f as u8);
        for (f, s) in sums {
            h.update(format!("input_sha256={f}={s}\n").as_bytes());
        }
        for line in extra {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

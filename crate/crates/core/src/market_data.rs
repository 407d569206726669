//! Price ingest, percent log-returns, squared-return realized volatility and
//! in-sample / out-of-sample splits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Minimum number of in-sample observations accepted by [`split`].
pub const MIN_IN_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
}

impl Frequency {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Weekly => "weekly",
            Frequency::Monthly => "monthly",
        }
    }

    /// Horizon presets matching the daily, weekly and monthly panels.
    pub fn default_horizons(&self) -> Vec<usize> {
        match self {
            Frequency::Daily => vec![1, 5, 10, 22],
            Frequency::Weekly => vec![1, 2, 3, 4],
            Frequency::Monthly => vec![1],
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "daily" => Ok(Frequency::Daily),
            "weekly" => Ok(Frequency::Weekly),
            "monthly" => Ok(Frequency::Monthly),
            other => Err(Error::Format(format!("unknown frequency `{other}`"))),
        }
    }
}

/// Dated positive prices at a declared frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    frequency: Frequency,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
    checksum: Option<String>,
}

impl PriceSeries {
    /// Sorts by date; rejects duplicate dates and non-positive prices.
    pub fn new(frequency: Frequency, mut obs: Vec<(NaiveDate, f64)>) -> Result<Self> {
        for (i, &(_, p)) in obs.iter().enumerate() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::NonPositivePrice {
                    row: i as u64 + 1,
                    price: p,
                });
            }
        }
        obs.sort_by_key(|&(d, _)| d);
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate(w[0].0));
        }
        let (dates, prices) = obs.into_iter().unzip();
        Ok(Self {
            frequency,
            dates,
            prices,
            checksum: None,
        })
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// SHA-256 of the source file, when loaded from disk.
    pub fn checksum(&self) -> Option<&str> {
        self.checksum.as_deref()
    }
}

/// Read a headered UTF-8 CSV. Lines starting with `#` are skipped.
///
/// Row numbers in errors are file line numbers (header is line 1).
pub fn load_prices(
    path: impl AsRef<Path>,
    frequency: Frequency,
    date_column: &str,
    price_column: &str,
) -> Result<PriceSeries> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let checksum = hex::encode(Sha256::digest(&bytes));

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = find(date_column)?;
    let price_idx = find(price_column)?;

    let mut obs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line());
        let field = |idx: usize, what: &str| {
            record.get(idx).ok_or_else(|| Error::MalformedRow {
                row,
                message: format!("missing {what} field"),
            })
        };
        let date_text = field(date_idx, "date")?;
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d").map_err(|e| {
            Error::MalformedRow {
                row,
                message: format!("bad date `{date_text}`: {e}"),
            }
        })?;
        let price_text = field(price_idx, "price")?;
        let price: f64 = price_text.parse().map_err(|_| Error::MalformedRow {
            row,
            message: format!("bad price `{price_text}`"),
        })?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::NonPositivePrice { row, price });
        }
        obs.push((date, price));
    }

    let mut series = PriceSeries::new(frequency, obs)?;
    series.checksum = Some(checksum);
    Ok(series)
}

/// Percent log-returns, `100 * (ln p_t - ln p_{t-1})`, dated at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    frequency: Frequency,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    /// Build from raw values. Dates must be strictly increasing.
    pub fn new(frequency: Frequency, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Format(format!(
                "{} dates for {} returns",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::DuplicateDate(w[1]));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("return {v}")));
        }
        Ok(Self {
            frequency,
            dates,
            values,
        })
    }

    /// Undated returns on consecutive days starting 2000-01-01; for synthetic data.
    pub fn from_values(values: Vec<f64>) -> Self {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(values.len()).collect();
        Self {
            frequency: Frequency::Daily,
            dates,
            values,
        }
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-series over an index range.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReturnSeries {
        ReturnSeries {
            frequency: self.frequency,
            dates: self.dates[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }
}

pub fn to_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    let values = prices
        .prices
        .windows(2)
        .map(|w| 100.0 * (w[1].ln() - w[0].ln()))
        .collect();
    Ok(ReturnSeries {
        frequency: prices.frequency,
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Squared returns, the forecast target.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedVolSeries {
    frequency: Frequency,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl RealizedVolSeries {
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn to_realized_vol(returns: &ReturnSeries) -> RealizedVolSeries {
    RealizedVolSeries {
        frequency: returns.frequency,
        dates: returns.dates.clone(),
        values: returns.values.iter().map(|r| r * r).collect(),
    }
}

/// Contiguous partition of a series at a boundary date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSplit {
    pub in_sample_end: NaiveDate,
    pub in_sample: std::ops::Range<usize>,
    pub out_of_sample: std::ops::Range<usize>,
}

impl SampleSplit {
    pub fn in_sample_len(&self) -> usize {
        self.in_sample.len()
    }

    pub fn out_of_sample_len(&self) -> usize {
        self.out_of_sample.len()
    }
}

/// The boundary date must be an observation date and belongs to the in-sample block.
pub fn split(returns: &ReturnSeries, in_sample_end: NaiveDate) -> Result<SampleSplit> {
    let idx = returns
        .dates
        .binary_search(&in_sample_end)
        .map_err(|_| Error::BoundaryNotFound(in_sample_end))?;
    let n_in = idx + 1;
    if n_in < MIN_IN_SAMPLE {
        return Err(Error::SeriesTooShort {
            needed: MIN_IN_SAMPLE,
            got: n_in,
        });
    }
    if n_in == returns.len() {
        return Err(Error::EmptyOutOfSample);
    }
    Ok(SampleSplit {
        in_sample_end,
        in_sample: 0..n_in,
        out_of_sample: n_in..returns.len(),
    })
}

/// Sum of squared returns over `origin + 1 ..= origin + k`.
pub fn realized_k_period(vol: &RealizedVolSeries, origin: usize, k: usize) -> Result<f64> {
    window_sum(&vol.values, origin, k)
}

pub(crate) fn window_sum(values: &[f64], origin: usize, k: usize) -> Result<f64> {
    if k == 0 || origin + k >= values.len() {
        return Err(Error::WindowOutOfBounds {
            origin,
            k,
            len: values.len(),
        });
    }
    Ok(values[origin + 1..=origin + k].iter().sum())
}

//! Loss functions, Success Ratio and the Pesaran–Timmermann directional
//! accuracy test, with per-criterion model ranking.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::forecast::ForecastTable;
use crate::market_data::Frequency;
use crate::model::ModelSpec;

/// Two-sided 5% normal critical value.
pub const DA_CRITICAL: f64 = 1.96;
pub const MIN_DA_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub mse: f64,
    pub mad: f64,
    /// Over rows with positive realized value only.
    pub qlike: f64,
    /// Over rows with positive realized value only.
    pub r2log: f64,
    pub n: usize,
    /// Rows with zero realized value left out of QLIKE and R2LOG.
    pub skipped_zero: usize,
}

impl Losses {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mse, self.mad, self.qlike, self.r2log]
    }
}

pub const CRITERIA: [&str; 4] = ["MSE", "MAD", "QLIKE", "R2LOG"];

fn check_pairs(forecast: &[f64], realized: &[f64]) -> Result<()> {
    if forecast.len() != realized.len() {
        return Err(Error::MismatchedRows(vec![forecast.len(), realized.len()]));
    }
    if forecast.is_empty() {
        return Err(Error::EmptyTable);
    }
    if let Some(h) = forecast.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!("forecast must be > 0, got {h}")));
    }
    if let Some(s) = realized.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter(format!("realized value must be >= 0, got {s}")));
    }
    Ok(())
}

pub fn losses(forecast: &[f64], realized: &[f64]) -> Result<Losses> {
    check_pairs(forecast, realized)?;
    let n = forecast.len();
    let (mut se, mut ae, mut ql, mut rl, mut used) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (&h, &s) in forecast.iter().zip(realized) {
        se += (s - h) * (s - h);
        ae += (s - h).abs();
        if s > 0.0 {
            ql += h.ln() + s / h;
            rl += (s / h).ln().powi(2);
            used += 1;
        }
    }
    let m = used as f64;
    Ok(Losses {
        mse: se / n as f64,
        mad: ae / n as f64,
        qlike: if used > 0 { ql / m } else { f64::NAN },
        r2log: if used > 0 { rl / m } else { f64::NAN },
        n,
        skipped_zero: n - used,
    })
}

pub fn table_losses(table: &ForecastTable) -> Result<Losses> {
    losses(&table.forecasts(), &table.realized())
}

/// Fraction of rows `t >= 1` where the forecast and the realized value move
/// the same way relative to the previous realized value.
pub fn success_ratio(forecast: &[f64], realized: &[f64]) -> Result<f64> {
    check_pairs(forecast, realized)?;
    if forecast.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: forecast.len(),
        });
    }
    let sign = |x: f64| (x > 0.0) as i8 - (x < 0.0) as i8;
    let hits = (1..forecast.len())
        .filter(|&t| sign(forecast[t] - realized[t - 1]) == sign(realized[t] - realized[t - 1]))
        .count();
    Ok(hits as f64 / (forecast.len() - 1) as f64)
}

/// Pesaran–Timmermann test on up-move indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DaResult {
    /// Absent when a marginal is degenerate.
    pub statistic: Option<f64>,
    pub significant: bool,
    /// Hit rate of the binary indicators.
    pub hit_rate: f64,
    /// Hit rate expected under independence.
    pub expected_hit_rate: f64,
    pub n: usize,
}

/// PT statistic from paired up-move indicators.
pub fn pesaran_timmermann(predicted_up: &[bool], actual_up: &[bool]) -> Result<DaResult> {
    if predicted_up.len() != actual_up.len() {
        return Err(Error::MismatchedRows(vec![predicted_up.len(), actual_up.len()]));
    }
    let n = actual_up.len();
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    let nf = n as f64;
    let frac = |v: &[bool]| v.iter().filter(|&&b| b).count() as f64 / nf;
    let (pa, pp) = (frac(actual_up), frac(predicted_up));
    let sr = predicted_up.iter().zip(actual_up).filter(|(a, b)| a == b).count() as f64 / nf;
    let sri = pa * pp + (1.0 - pa) * (1.0 - pp);
    let v_sr = sri * (1.0 - sri) / nf;
    let v_sri = (2.0 * pa - 1.0).powi(2) * pp * (1.0 - pp) / nf
        + (2.0 * pp - 1.0).powi(2) * pa * (1.0 - pa) / nf
        + 4.0 * pa * pp * (1.0 - pa) * (1.0 - pp) / (nf * nf);
    let degenerate = [pa, pp].iter().any(|&p| p == 0.0 || p == 1.0);
    let denom = v_sr - v_sri;
    let statistic = (!degenerate && denom > 0.0).then(|| (sr - sri) / denom.sqrt());
    Ok(DaResult {
        statistic,
        significant: statistic.is_some_and(|s| s.abs() > DA_CRITICAL),
        hit_rate: sr,
        expected_hit_rate: sri,
        n,
    })
}

/// Directional accuracy over rows `t >= 1`: predicted up means the forecast
/// exceeds the previous realized value; actual up means the realized value
/// rose.
pub fn da_test(forecast: &[f64], realized: &[f64]) -> Result<DaResult> {
    check_pairs(forecast, realized)?;
    if forecast.len() < MIN_DA_ROWS {
        return Err(Error::TooFewRows {
            needed: MIN_DA_ROWS,
            got: forecast.len(),
        });
    }
    let predicted: Vec<bool> = (1..forecast.len()).map(|t| forecast[t] > realized[t - 1]).collect();
    let actual: Vec<bool> = (1..forecast.len()).map(|t| realized[t] > realized[t - 1]).collect();
    pesaran_timmermann(&predicted, &actual)
}

/// Competition ranking: 1 for the smallest value, ties share the smaller
/// rank and the next rank is skipped. NaN ranks last.
pub fn rank(values: &[f64]) -> Vec<usize> {
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    values
        .iter()
        .map(|&v| 1 + values.iter().filter(|&&w| key(w) < key(v)).count())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub model: ModelSpec,
    pub losses: Losses,
    pub success_ratio: f64,
    pub da: Option<DaResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub frequency: Frequency,
    pub k: usize,
    pub n_rows: usize,
    pub entries: Vec<ModelEvaluation>,
    /// Per criterion (MSE, MAD, QLIKE, R2LOG), one rank per entry.
    pub ranks: [Vec<usize>; 4],
}

pub fn evaluate_table(table: &ForecastTable) -> Result<ModelEvaluation> {
    let (f, r) = (table.forecasts(), table.realized());
    let da = if f.len() >= MIN_DA_ROWS {
        Some(da_test(&f, &r)?)
    } else {
        None
    };
    Ok(ModelEvaluation {
        model: table.model,
        losses: losses(&f, &r)?,
        success_ratio: success_ratio(&f, &r)?,
        da,
    })
}

pub fn rank_models(frequency: Frequency, k: usize, entries: Vec<ModelEvaluation>) -> Result<LossReport> {
    if entries.is_empty() {
        return Err(Error::EmptyTable);
    }
    let counts: Vec<usize> = entries.iter().map(|e| e.losses.n).collect();
    if counts.iter().any(|&c| c != counts[0]) {
        return Err(Error::MismatchedRows(counts));
    }
    let ranks = std::array::from_fn(|c| rank(&entries.iter().map(|e| e.losses.as_array()[c]).collect::<Vec<_>>()));
    Ok(LossReport {
        frequency,
        k,
        n_rows: counts[0],
        entries,
        ranks,
    })
}

/// Evaluate and rank tables for one frequency and horizon.
pub fn evaluate(tables: &[ForecastTable]) -> Result<LossReport> {
    let first = tables.first().ok_or(Error::EmptyTable)?;
    if let Some(t) = tables.iter().find(|t| t.k != first.k || t.frequency != first.frequency) {
        return Err(Error::Format(format!(
            "cannot rank {} k={} against {} k={}",
            t.frequency, t.k, first.frequency, first.k
        )));
    }
    let entries = tables.iter().map(evaluate_table).collect::<Result<Vec<_>>>()?;
    rank_models(first.frequency, first.k, entries)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl LossReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "frequency", "k", "model", "n", "mse", "mse_rank", "mad", "mad_rank", "qlike", "qlike_rank", "r2log",
            "r2log_rank", "skipped_zero", "sr", "da", "da_significant",
        ])?;
        for (i, e) in self.entries.iter().enumerate() {
            let l = e.losses;
            let da = e.da.and_then(|d| d.statistic);
            w.write_record([
                self.frequency.to_string(),
                self.k.to_string(),
                e.model.id().to_string(),
                l.n.to_string(),
                l.mse.to_string(),
                self.ranks[0][i].to_string(),
                l.mad.to_string(),
                self.ranks[1][i].to_string(),
                l.qlike.to_string(),
                self.ranks[2][i].to_string(),
                l.r2log.to_string(),
                self.ranks[3][i].to_string(),
                l.skipped_zero.to_string(),
                e.success_ratio.to_string(),
                opt(da),
                e.da.is_some_and(|d| d.significant).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Model rows, value and rank per criterion, then SR and DA
    /// (`**` marks significance at 5%).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} k={} (n={})", self.frequency, self.k, self.n_rows);
        let _ = write!(s, "{:<10}", "Model");
        for c in CRITERIA {
            let _ = write!(s, " {:>12} {:>4}", c, "Rank");
        }
        let _ = writeln!(s, " {:>6} {:>10}", "SR", "DA");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = write!(s, "{:<10}", e.model.label());
            for (c, v) in e.losses.as_array().iter().enumerate() {
                let _ = write!(s, " {:>12.4} {:>4}", v, self.ranks[c][i]);
            }
            let da = match e.da.and_then(|d| d.statistic.map(|x| (x, d.significant))) {
                Some((x, true)) => format!("{x:.4}**"),
                Some((x, false)) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            let _ = writeln!(s, " {:>6.2} {:>10}", e.success_ratio, da);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn hand_values() {
        let l = losses(&[2.0, 2.0], &[1.0, 4.0]).unwrap();
        assert_eq!(l.mse, 2.5);
        assert_eq!(l.mad, 1.5);
        let s = [0.5, 1.5, 3.0];
        let l = losses(&s, &s).unwrap();
        assert_eq!((l.mse, l.mad, l.r2log), (0.0, 0.0, 0.0));
        let expect = s.iter().map(|v: &f64| v.ln() + 1.0).sum::<f64>() / 3.0;
        assert!((l.qlike - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_realized_rows_skipped() {
        let l = losses(&[1.0, 2.0, 3.0], &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(l.skipped_zero, 1);
        assert_eq!(l.r2log, 0.0);
        assert!(losses(&[0.0], &[1.0]).is_err());
        assert!(matches!(losses(&[], &[]), Err(Error::EmptyTable)));
    }

    #[test]
    fn qlike_best_constant_is_mean() {
        let s = [0.3, 2.0, 0.9, 4.1, 1.2];
        let mean = s.iter().sum::<f64>() / 5.0;
        let q = |c: f64| losses(&[c; 5], &s).unwrap().qlike;
        // golden-section search over the constant
        let (mut a, mut b) = (0.01, 10.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if q(c) < q(d) {
                b = d;
            } else {
                a = c;
            }
        }
        assert!((0.5 * (a + b) - mean).abs() < 1e-6);
    }

    #[test]
    fn success_ratio_extremes() {
        let r = [1.0, 2.0, 1.5, 3.0, 0.5];
        assert_eq!(success_ratio(&r, &r).unwrap(), 1.0);
        let opposite: Vec<f64> = (0..5)
            .map(|t| if t == 0 { 1.0 } else if r[t] > r[t - 1] { r[t - 1] * 0.5 } else { r[t - 1] * 2.0 })
            .collect();
        assert_eq!(success_ratio(&opposite, &r).unwrap(), 0.0);
        assert!(success_ratio(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn da_degenerate_and_dependent() {
        let up: Vec<f64> = (1..=20).map(f64::from).collect();
        let d = da_test(&up, &up).unwrap();
        assert_eq!(d.statistic, None);
        assert!(!d.significant);
        let mut rng = crate::rng::stream(5, 0);
        use rand::Rng;
        let r: Vec<f64> = (0..300).map(|_| rng.random_range(0.1..2.0)).collect();
        let d = da_test(&r, &r).unwrap();
        assert!(d.statistic.unwrap() > DA_CRITICAL);
        assert!(da_test(&r[..5], &r[..5]).is_err());
    }

    #[test]
    fn ranks() {
        assert_eq!(rank(&[1.0, 2.0, 3.0]), vec![1, 2, 3]);
        assert_eq!(rank(&[1.0, 1.0, 2.0]), vec![1, 1, 3]);
        assert_eq!(rank(&[4.593, 4.386, 4.381, 4.384]), vec![4, 3, 1, 2]);
    }

    #[test]
    fn mismatched_rows_rejected() {
        let l = |n| Losses {
            mse: 1.0,
            mad: 1.0,
            qlike: 1.0,
            r2log: 1.0,
            n,
            skipped_zero: 0,
        };
        let e = |n| ModelEvaluation {
            model: ModelSpec::Garch,
            losses: l(n),
            success_ratio: 0.5,
            da: None,
        };
        assert!(matches!(
            rank_models(Frequency::Daily, 1, vec![e(10), e(11)]),
            Err(Error::MismatchedRows(_))
        ));
    }

    fn table() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..10.0, n),
                prop::collection::vec(0.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn nonnegative_and_permutation_invariant((f, r) in table(), rot in 0usize..40) {
            let l = losses(&f, &r).unwrap();
            prop_assert!(l.mse >= 0.0 && l.mad >= 0.0);
            prop_assert!(l.r2log.is_nan() || l.r2log >= 0.0);
            let k = rot % f.len();
            let (mut f2, mut r2) = (f.clone(), r.clone());
            f2.rotate_left(k);
            r2.rotate_left(k);
            let l2 = losses(&f2, &r2).unwrap();
            for (a, b) in l.as_array().iter().zip(l2.as_array()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0) || (a.is_nan() && b.is_nan()));
            }
        }

        #[test]
        fn qlike_prefers_truth(r in prop::collection::vec(0.01f64..10.0, 1..40), c in 0.1f64..5.0) {
            prop_assume!((c - 1.0).abs() > 1e-6);
            let scaled: Vec<f64> = r.iter().map(|v| c * v).collect();
            prop_assert!(losses(&r, &r).unwrap().qlike <= losses(&scaled, &r).unwrap().qlike);
        }

        #[test]
        fn sr_depends_on_direction_only((f, r) in table()) {
            let g = |v: &f64| v.powi(3) + 2.0 * v;
            let a = success_ratio(&f, &r).unwrap();
            let b = success_ratio(&f.iter().map(g).collect::<Vec<_>>(), &r.iter().map(g).collect::<Vec<_>>()).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn ranks_follow_losses(v in prop::collection::vec(0.0f64..5.0, 2..8)) {
            let r = rank(&v);
            for i in 0..v.len() {
                for j in 0..v.len() {
                    if v[i] < v[j] {
                        prop_assert!(r[i] < r[j]);
                    }
                    if v[i] == v[j] {
                        prop_assert_eq!(r[i], r[j]);
                    }
                }
            }
        }
    }
}

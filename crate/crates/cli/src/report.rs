//! Fixed-width text and CSV renderings of fit results.

use std::fmt::Write as _;

use regimecast::estimator::FitResult;
use regimecast::evaluation::{rank, Losses, CRITERIA};
use regimecast::garch::MomentDiagnostics;
use regimecast::{Frequency, ModelSpec, ParamVector};

/// Provenance lines written at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<(String, u64)>,
}

impl Provenance {
    pub fn header(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "# regimecast {}\n# config_sha256 {}\n# seeds {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            seeds.join(" ")
        )
    }
}

/// Significance stars from two-sided normal critical values.
pub fn stars(t: Option<f64>) -> &'static str {
    match t.map(f64::abs) {
        Some(a) if a > 2.576 => "***",
        Some(a) if a > 1.96 => "**",
        Some(a) if a > 1.645 => "*",
        _ => "",
    }
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}

fn opt_csv(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Coefficient table for the single-regime models: one column per model,
/// estimate with stars and the t-value beneath.
pub fn table1_text(frequency: Frequency, fits: &[&FitResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Coefficients, {frequency} (t-values in parentheses)");
    let _ = write!(s, "{:<8}", "");
    for f in fits {
        let _ = write!(s, " {:>16}", f.model.label());
    }
    s.push('\n');
    for name in ["delta", "alpha0", "alpha1", "xi", "beta", "nu"] {
        if !fits.iter().any(|f| f.model.param_names().contains(&name)) {
            continue;
        }
        let mut est = format!("{name:<8}");
        let mut tv = format!("{:<8}", "");
        for f in fits {
            match f.model.param_names().iter().position(|n| *n == name) {
                Some(i) => {
                    let t = f.t_values[i];
                    let _ = write!(est, " {:>16}", format!("{}{}", num(f.estimates.values()[i]), stars(t)));
                    let _ = write!(tv, " {:>16}", t.map_or("(-)".to_string(), |t| format!("({t:.2})")));
                }
                None => {
                    let _ = write!(est, " {:>16}", "");
                    let _ = write!(tv, " {:>16}", "");
                }
            }
        }
        let _ = writeln!(s, "{est}\n{tv}");
    }
    summary_rows(&mut s, fits);
    s
}

fn summary_rows(s: &mut String, fits: &[&FitResult]) {
    let row = |label: &str, f: &dyn Fn(&FitResult) -> String| {
        let mut line = format!("{label:<8}");
        for fit in fits {
            let _ = write!(line, " {:>16}", f(fit));
        }
        line
    };
    let _ = writeln!(s, "{}", row("LogL", &|f| format!("{:.3}", f.loglik)));
    let _ = writeln!(s, "{}", row("AIC", &|f| format!("{:.4}", f.aic)));
    let _ = writeln!(s, "{}", row("conv", &|f| if f.converged { "yes".into() } else { "no".into() }));
    if fits.iter().any(|f| f.normal_limit) {
        let _ = writeln!(s, "{}", row("nu>100", &|f| if f.normal_limit { "yes".into() } else { "".into() }));
    }
}

/// Long-form CSV of estimates for any set of models.
pub fn coefficients_csv(frequency: Frequency, fits: &[&FitResult]) -> String {
    let mut s = String::from("frequency,model,parameter,estimate,std_error,t_value,stars\n");
    for f in fits {
        for (i, name) in f.model.param_names().iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                frequency,
                f.model.id(),
                name,
                f.estimates.values()[i],
                opt_csv(f.std_errors[i]),
                opt_csv(f.t_values[i]),
                stars(f.t_values[i])
            );
        }
        let _ = writeln!(s, "{},{},loglik,{},,,", frequency, f.model.id(), f.loglik);
        let _ = writeln!(s, "{},{},aic,{},,,", frequency, f.model.id(), f.aic);
        let _ = writeln!(s, "{},{},converged,{},,,", frequency, f.model.id(), f.converged);
    }
    s
}

/// MRS coefficients laid out with one column per regime.
pub fn table2_text(frequency: Frequency, fit: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "MRS-GARCH coefficients, {frequency} (t-values in parentheses)");
    let _ = writeln!(s, "{:<8} {:>16} {:>16}", "", "regime 1", "regime 2");
    let v = fit.estimates.values();
    for (j, name) in ["delta", "alpha0", "alpha1", "beta", "nu"].iter().enumerate() {
        let cell = |i: usize| format!("{}{}", num(v[i]), stars(fit.t_values[i]));
        let tcell = |i: usize| fit.t_values[i].map_or("(-)".to_string(), |t| format!("({t:.2})"));
        let _ = writeln!(s, "{:<8} {:>16} {:>16}", name, cell(j), cell(5 + j));
        let _ = writeln!(s, "{:<8} {:>16} {:>16}", "", tcell(j), tcell(5 + j));
    }
    for (i, name) in [(10, "p"), (11, "q")] {
        let _ = writeln!(
            s,
            "{:<8} {:>16}\n{:<8} {:>16}",
            name,
            format!("{}{}", num(v[i]), stars(fit.t_values[i])),
            "",
            fit.t_values[i].map_or("(-)".to_string(), |t| format!("({t:.2})"))
        );
    }
    summary_rows(&mut s, &[fit]);
    s
}

/// In-sample fit: AIC and losses of the one-step variance against squared
/// returns, each with its rank across models.
#[derive(Debug, Clone)]
pub struct InSampleRow {
    pub model: ModelSpec,
    pub aic: f64,
    pub losses: Losses,
}

pub struct InSampleTable {
    pub frequency: Frequency,
    pub rows: Vec<InSampleRow>,
    /// AIC then the four loss criteria.
    pub ranks: [Vec<usize>; 5],
}

impl InSampleTable {
    pub fn new(frequency: Frequency, rows: Vec<InSampleRow>) -> Self {
        let aic: Vec<f64> = rows.iter().map(|r| r.aic).collect();
        let col = |c: usize| rank(&rows.iter().map(|r| r.losses.as_array()[c]).collect::<Vec<_>>());
        let ranks = [rank(&aic), col(0), col(1), col(2), col(3)];
        Self { frequency, rows, ranks }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "In-sample fit, {}", self.frequency);
        let _ = write!(s, "{:<10} {:>10} {:>4}", "Model", "AIC", "Rank");
        for c in CRITERIA {
            let _ = write!(s, " {:>12} {:>4}", c, "Rank");
        }
        s.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, "{:<10} {:>10.4} {:>4}", r.model.label(), r.aic, self.ranks[0][i]);
            for (c, v) in r.losses.as_array().iter().enumerate() {
                let _ = write!(s, " {:>12.4} {:>4}", v, self.ranks[c + 1][i]);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "frequency,model,aic,aic_rank,mse,mse_rank,mad,mad_rank,qlike,qlike_rank,r2log,r2log_rank\n",
        );
        for (i, r) in self.rows.iter().enumerate() {
            let l = r.losses.as_array();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                self.frequency,
                r.model.id(),
                r.aic,
                self.ranks[0][i],
                l[0],
                self.ranks[1][i],
                l[1],
                self.ranks[2][i],
                l[2],
                self.ranks[3][i],
                l[3],
                self.ranks[4][i]
            );
        }
        s
    }
}

pub fn moments_text(frequency: Frequency, d: &MomentDiagnostics) -> String {
    format!(
        "GARCH moment diagnostics, {frequency}\npersistence {:.4} (second moment {})\n\
         beta^2 + 2 alpha1 beta + 3 alpha1^2 = {:.4} (fourth moment under normal innovations {})\n",
        d.persistence,
        if d.second_moment { "finite" } else { "infinite" },
        d.fourth_moment_value,
        if d.fourth_moment_gaussian { "finite" } else { "infinite" }
    )
}

pub fn moments_csv(frequency: Frequency, d: &MomentDiagnostics) -> String {
    format!(
        "frequency,persistence,second_moment,fourth_moment_value,fourth_moment_gaussian\n{},{},{},{},{}\n",
        frequency, d.persistence, d.second_moment, d.fourth_moment_value, d.fourth_moment_gaussian
    )
}

/// Truth against estimate for a simulated sample.
pub struct Recovery {
    pub truth: ParamVector,
    pub fit: FitResult,
    /// Share of dates where the filtered high-regime probability agrees
    /// with the true regime at the 0.5 threshold (MRS only).
    pub accuracy: Option<f64>,
}

struct RecoveryRow {
    name: &'static str,
    truth: f64,
    estimate: f64,
    se: Option<f64>,
    z: Option<f64>,
}

impl Recovery {
    fn rows(&self) -> Vec<RecoveryRow> {
        let truth = self.truth.values();
        let est = self.fit.estimates.values();
        self.truth
            .model()
            .param_names()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let se = self.fit.std_errors[i];
                let z = se.map(|se| (est[i] - truth[i]).abs() / se);
                RecoveryRow {
                    name: n,
                    truth: truth[i],
                    estimate: est[i],
                    se,
                    z,
                }
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Recovery, {} (n={})", self.truth.model().label(), self.fit.n_obs);
        let _ = writeln!(s, "{:<10} {:>10} {:>10} {:>10} {:>10}", "parameter", "truth", "estimate", "se", "|err|/se");
        for r in self.rows() {
            let _ = writeln!(
                s,
                "{:<10} {:>10} {:>10} {:>10} {:>10}",
                r.name,
                num(r.truth),
                num(r.estimate),
                opt_num(r.se),
                opt_num(r.z)
            );
        }
        let _ = writeln!(s, "loglik {:.3}, converged {}", self.fit.loglik, self.fit.converged);
        if let Some(a) = self.accuracy {
            let _ = writeln!(s, "regime classification accuracy {:.4}", a);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,truth,estimate,std_error,abs_error_over_se\n");
        for r in self.rows() {
            let _ = writeln!(s, "{},{},{},{},{}", r.name, r.truth, r.estimate, opt_csv(r.se), opt_csv(r.z));
        }
        if let Some(a) = self.accuracy {
            let _ = writeln!(s, "regime_accuracy,,{a},,");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(Some(2.6)), "***");
        assert_eq!(stars(Some(-2.0)), "**");
        assert_eq!(stars(Some(1.7)), "*");
        assert_eq!(stars(Some(1.6)), "");
        assert_eq!(stars(None), "");
    }

    #[test]
    fn header_lists_hash_and_seeds() {
        let p = Provenance {
            config_hash: "ab".into(),
            seeds: vec![("fit".into(), 3), ("mc".into(), 3)],
        };
        let h = p.header();
        assert!(h.lines().all(|l| l.starts_with('#')));
        assert!(h.contains("config_sha256 ab"));
        assert!(h.contains("fit=3 mc=3"));
    }
}

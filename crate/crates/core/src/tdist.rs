//! Standardized Student-t kernel.
//!
//! The variate is scaled to unit variance: if `T` is a textbook t with `nu`
//! degrees of freedom then `Z = T * sqrt((nu - 2) / nu)`. Every likelihood in
//! the crate uses this form, so a model's `h_t` is exactly the conditional
//! variance of its innovation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

/// Estimation ceiling for the degrees of freedom.
pub const NU_MAX: f64 = 500.0;
/// Fits above this value are flagged as effectively normal.
pub const NU_NORMAL_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    nu: f64,
    log_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "degrees of freedom must be finite and > 2, got {nu}"
            )));
        }
        let log_norm = ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (PI * (nu - 2.0)).ln();
        Ok(Self { nu, log_norm })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// ln f(z) for the unit-variance density.
    #[inline]
    pub fn log_density(&self, z: f64) -> f64 {
        self.log_norm - 0.5 * (self.nu + 1.0) * (z * z / (self.nu - 2.0)).ln_1p()
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }

    /// Pr(Z <= z), through the regularized incomplete beta function.
    pub fn cdf(&self, z: f64) -> f64 {
        if z.is_nan() {
            return f64::NAN;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        // textbook-t argument
        let t = z * (self.nu / (self.nu - 2.0)).sqrt();
        let x = self.nu / (self.nu + t * t);
        let tail = 0.5 * beta_reg(0.5 * self.nu, 0.5, x);
        if t > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Inverse CDF by safeguarded Newton iteration on [`StudentT::cdf`].
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        // solve in the lower tail and reflect
        let (target, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };

        let mut lo = -1.0;
        while self.cdf(lo) > target {
            lo *= 2.0;
            if lo < -1e300 {
                return Err(Error::NonFinite(format!("quantile bracket for p = {p}")));
            }
        }
        let mut hi = 0.0;
        let mut x = 0.5 * lo;
        for _ in 0..200 {
            let f = self.cdf(x) - target;
            if f == 0.0 {
                break;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / self.density(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done = (next - x).abs() <= 1e-15 * x.abs().max(1.0);
            x = next;
            if done || (hi - lo) <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        Ok(sign * -x)
    }

    /// E|Z| for the unit-variance variate.
    pub fn abs_moment(&self) -> f64 {
        let nu = self.nu;
        let log_ratio = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu);
        2.0 * (nu - 2.0).sqrt() * log_ratio.exp() / (PI.sqrt() * (nu - 1.0))
    }

    /// One draw: `N * sqrt((nu - 2) / chi2_nu)`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, chi: &ChiSquared<f64>, rng: &mut R) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        let c = chi.sample(rng);
        n * ((self.nu - 2.0) / c).sqrt()
    }

    pub fn chi_squared(&self) -> ChiSquared<f64> {
        ChiSquared::new(self.nu).expect("nu > 2 checked at construction")
    }

    /// `n` i.i.d. draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rng::stream(seed, 0);
        let chi = self.chi_squared();
        (0..n).map(|_| self.draw(&chi, &mut rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre on [a, b] split into `pieces` panels.
    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
        const X: [f64; 5] = [
            0.0,
            0.538_469_310_105_683_1,
            -0.538_469_310_105_683_1,
            0.906_179_845_938_664,
            -0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let h = (b - a) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let mid = a + (i as f64 + 0.5) * h;
                X.iter()
                    .zip(W)
                    .map(|(x, w)| w * f(mid + 0.5 * h * x))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    }

    /// Kernel (1 + z^2/(nu-2))^{-(nu+1)/2}; its tail beyond L is bounded by
    /// the integral of the power law.
    fn tail_bound(nu: f64, l: f64) -> f64 {
        let s = nu - 2.0;
        // (z^2/s)^{-(nu+1)/2} integrated from l to infinity, one side
        s.powf(0.5 * (nu + 1.0)) * l.powf(-nu) / nu
    }

    #[test]
    fn rejects_nu_at_or_below_two() {
        assert!(StudentT::new(2.0).is_err());
        assert!(StudentT::new(1.5).is_err());
        assert!(StudentT::new(f64::NAN).is_err());
    }

    #[test]
    fn normal_limit_at_zero() {
        let d = StudentT::new(1e6).unwrap();
        let normal = -0.5 * (2.0 * PI).ln();
        assert!((d.log_density(0.0) - normal).abs() < 1e-6);
    }

    #[test]
    fn density_is_even() {
        let d = StudentT::new(4.3).unwrap();
        for z in [0.1, 1.0, 3.7, 12.0] {
            assert_eq!(d.log_density(z), d.log_density(-z));
        }
    }

    #[test]
    fn unit_mass_and_unit_variance_by_quadrature() {
        for nu in [5.0, 7.0, 30.0] {
            let d = StudentT::new(nu).unwrap();
            let mass = integrate(|z| d.density(z), -50.0, 50.0, 4000);
            let tail = 2.0 * d.log_norm.exp() * tail_bound(nu, 50.0);
            assert!((mass - 1.0).abs() < 1e-8 + tail, "nu={nu} mass={mass}");
            let var = integrate(|z| z * z * d.density(z), -50.0, 50.0, 4000);
            // second-moment tail of the power law
            let var_tail = if nu > 4.0 {
                2.0 * d.log_norm.exp() * (nu - 2.0).powf(0.5 * (nu + 1.0)) * 50f64.powf(2.0 - nu)
                    / (nu - 2.0)
            } else {
                f64::INFINITY
            };
            assert!((var - 1.0).abs() < 1e-6 + var_tail, "nu={nu} var={var}");
        }
    }

    #[test]
    fn nu5_density_matches_normalized_kernel() {
        let d = StudentT::new(5.0).unwrap();
        let kernel = |z: f64| (1.0 + z * z / 3.0).powf(-3.0);
        let mass = integrate(kernel, -400.0, 400.0, 40000);
        let expected = kernel(1.0) / mass;
        assert!((d.density(1.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let d = StudentT::new(7.0).unwrap();
        for z in [-3.0, -1.2, 0.4, 2.5] {
            let by_quad = 0.5 + integrate(|u| d.density(u), 0.0, z, 2000);
            assert!((d.cdf(z) - by_quad).abs() < 1e-11, "z={z}");
        }
    }

    #[test]
    fn quantile_by_bisection_oracle() {
        let d = StudentT::new(7.0).unwrap();
        // bisection on a quadrature CDF, independent of the incomplete beta
        let cdf = |x: f64| 0.5 + integrate(|u| d.density(u), 0.0, x, 2000);
        let (mut lo, mut hi) = (-10.0, 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.05 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = d.quantile(0.05).unwrap();
        assert!((q - 0.5 * (lo + hi)).abs() < 1e-9, "q={q}");
        // textbook t_7 quantile -1.8946 rescaled to unit variance
        assert!((q + 1.8946 * (5.0f64 / 7.0).sqrt()).abs() < 1e-3);
    }

    #[test]
    fn quantile_inverts_cdf_on_grid() {
        for nu in [2.5, 4.0, 7.0, 50.0, 400.0] {
            let d = StudentT::new(nu).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 1..200 {
                let p = i as f64 / 200.0;
                let q = d.quantile(p).unwrap();
                assert!((d.cdf(q) - p).abs() < 1e-8, "nu={nu} p={p}");
                assert!(q > prev);
                prev = q;
            }
            for p in [1e-6, 1e-3, 0.999] {
                let q = d.quantile(p).unwrap();
                assert!((d.cdf(q) - p).abs() < 1e-12, "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn quantile_symmetry_and_domain() {
        let d = StudentT::new(6.0).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 0.0);
        for p in [0.01, 0.05, 0.2, 0.4] {
            let a = d.quantile(p).unwrap();
            let b = d.quantile(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-12);
        }
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
        assert!(d.quantile(-0.1).is_err());
    }

    #[test]
    fn abs_moment_limits_and_quadrature() {
        let big = StudentT::new(1e7).unwrap();
        assert!((big.abs_moment() - (2.0 / PI).sqrt()).abs() < 1e-6);
        let d = StudentT::new(5.0).unwrap();
        let by_quad = 2.0 * integrate(|z| z * d.density(z), 0.0, 2000.0, 200_000);
        assert!((d.abs_moment() - by_quad).abs() < 1e-6);
        for nu in [2.1, 3.0, 10.0] {
            assert!(StudentT::new(nu).unwrap().abs_moment() > 0.0);
        }
    }

    #[test]
    fn log_density_concave_near_zero() {
        for nu in [2.2, 3.0, 7.0, 100.0] {
            let d = StudentT::new(nu).unwrap();
            let h = 1e-3;
            for z in [-0.3, 0.0, 0.3] {
                let second =
                    (d.log_density(z + h) - 2.0 * d.log_density(z) + d.log_density(z - h)) / (h * h);
                assert!(second < 0.0);
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let d = StudentT::new(7.0).unwrap();
        let a = d.sample(42, 100);
        let b = d.sample(42, 100);
        assert_eq!(a, b);
        assert_ne!(a, d.sample(43, 100));
    }

    #[test]
    fn sample_moments_law_of_large_numbers() {
        let d = StudentT::new(7.0).unwrap();
        let xs = d.sample(7, 1_000_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean={mean}");
        assert!((var - 1.0).abs() < 0.02, "var={var}");
    }
}

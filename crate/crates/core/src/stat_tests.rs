//! Goodness-of-fit tests and density error metrics.
//!
//! Kolmogorov–Smirnov and Cramér–von Mises use their asymptotic null
//! distributions; the univariate study fits an estimator on one seeded
//! sample and tests its continuous CDF against a fresh sample from the
//! truth.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bshqi::{BshqiDensity, Density, NaiveKernelDensity};
use crate::datagen::Univariate;
use crate::error::{Error, Result};
use crate::mesh::{BinsRule, UniformMesh, WeightedSample};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub pvalue: f64,
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    x
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 1.0 {
        // P(K <= x) = √(2π)/x Σ exp(-(2k-1)² π² / (8x²))
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            let term = (-(m * m) * PI * PI / (8.0 * x * x)).exp();
            cdf += term;
            if term < 1e-18 * cdf {
                break;
            }
        }
        return (1.0 - (2.0 * PI).sqrt() / x * cdf).clamp(0.0, 1.0);
    }
    let mut sf = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        sf += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sf).clamp(0.0, 1.0)
}

/// One-sample KS test against `cdf`. Empty input yields statistic 0, p-value 1.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let x = sorted(samples);
    let n = x.len() as f64;
    if x.is_empty() {
        return TestResult { statistic: 0.0, pvalue: 1.0 };
    }
    let mut d = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    TestResult {
        statistic: d,
        pvalue: kolmogorov_sf(n.sqrt() * d),
    }
}

/// `e^{-q} K_{1/4}(q)` via the trapezoid rule on `∫₀^∞ e^{-q(1 + cosh t)} cosh(t/4) dt`.
fn scaled_bessel_k_quarter(q: f64) -> f64 {
    let h = 0.02;
    let mut acc = 0.5 * (-2.0 * q).exp();
    let mut t: f64 = h;
    loop {
        let e = q * (1.0 + t.cosh());
        let v = (-e).exp() * (0.25 * t).cosh();
        acc += v;
        if q * (t.cosh() - 1.0) > 50.0 || t > 60.0 {
            break;
        }
        t += h;
    }
    acc * h
}

/// CDF of the asymptotic Cramér–von Mises distribution (Anderson–Darling
/// series).
pub fn cvm_cdf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        let u = (libm::lgamma(kf + 0.5) - libm::lgamma(kf + 1.0)).exp() / (PI.powf(1.5) * x.sqrt());
        let y = 4.0 * kf + 1.0;
        let q = y * y / (16.0 * x);
        let term = u * y.sqrt() * scaled_bessel_k_quarter(q);
        total += term;
        if term.abs() < 1e-10 {
            break;
        }
    }
    total.clamp(0.0, 1.0)
}

/// One-sample CvM test: `ω² = 1/(12n) + Σ (cdf(X_(i)) - (2i-1)/(2n))²`.
pub fn cvm_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let x = sorted(samples);
    if x.is_empty() {
        return TestResult { statistic: 0.0, pvalue: 1.0 };
    }
    let n = x.len() as f64;
    let mut w = 1.0 / (12.0 * n);
    for (i, &xi) in x.iter().enumerate() {
        let r = cdf(xi) - (2 * i + 1) as f64 / (2.0 * n);
        w += r * r;
    }
    TestResult {
        statistic: w,
        pvalue: (1.0 - cvm_cdf(w)).clamp(0.0, 1.0),
    }
}

/// Number of trapezoid points used by [`integrated_errors`].
pub const ERROR_GRID: usize = 2048;

/// `(ISE, RSE)` of `f_hat` against `f_true` on `[a, b]`: the composite
/// trapezoid integral of the squared error, and the root mean squared error
/// over the same grid.
pub fn integrated_errors(f_hat: impl Fn(f64) -> f64, f_true: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let m = ERROR_GRID;
    let h = (b - a) / (m - 1) as f64;
    let mut ise = 0.0;
    let mut sq = 0.0;
    for i in 0..m {
        let x = if i == m - 1 { b } else { a + i as f64 * h };
        let e = f_hat(x) - f_true(x);
        let e2 = e * e;
        sq += e2;
        ise += if i == 0 || i == m - 1 { 0.5 * e2 } else { e2 };
    }
    (ise * h, (sq / m as f64).sqrt())
}

/// Mean `(ISE, RSE)` over repetitions: `AMISE` and `RMSE`.
pub fn density_errors<F, G>(reps: usize, support: (f64, f64), f_true: G, mut f_hat: F) -> Result<(f64, f64)>
where
    F: FnMut(usize) -> Result<Box<dyn Density>>,
    G: Fn(f64) -> f64,
{
    if reps == 0 {
        return Err(Error::InvalidParameter("need reps >= 1".into()));
    }
    let (mut amise, mut rmse) = (0.0, 0.0);
    for r in 0..reps {
        let est = f_hat(r)?;
        let (ise, rse) = integrated_errors(|x| est.pdf(x), &f_true, support.0, support.1);
        amise += ise;
        rmse += rse;
    }
    Ok((amise / reps as f64, rmse / reps as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Bshqi,
    /// uniform-kernel estimator with bandwidth equal to the mesh step
    Kernel,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bshqi" => Ok(Estimator::Bshqi),
            "kernel" | "kernelbaseline" | "kernel_baseline" => Ok(Estimator::Kernel),
            other => Err(Error::InvalidParameter(format!("unknown marginal method `{other}`"))),
        }
    }
}

/// Fits `estimator` on `values` over the mesh spanning them.
pub fn fit_estimator(values: &[f64], rule: BinsRule, estimator: Estimator) -> Result<Box<dyn Density>> {
    let mesh = UniformMesh::from_values(values, rule, 0.0)?;
    let sample = WeightedSample::unweighted(values.to_vec())?;
    Ok(match estimator {
        Estimator::Bshqi => Box::new(BshqiDensity::fit(&sample, &mesh)?),
        Estimator::Kernel => Box::new(NaiveKernelDensity::fit(&sample, mesh.h())?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub cvm_statistic: f64,
    pub cvm_pvalue: f64,
    pub amise: f64,
    pub rmse: f64,
    pub mean_time_ms: f64,
    pub std_time_ms: f64,
}

impl GofReport {
    /// Tests a single fitted estimator against `truth`, using `fresh` as the
    /// test sample and the estimator's own support for the error integrals.
    pub fn single(est: &dyn Density, support: (f64, f64), truth: &Univariate, fresh: &[f64]) -> Self {
        let ks = ks_test(fresh, |x| est.cdf(x));
        let cvm = cvm_test(fresh, |x| est.cdf(x));
        let (ise, rse) = integrated_errors(|x| est.pdf(x), |x| truth.pdf(x), support.0, support.1);
        GofReport {
            ks_statistic: ks.statistic,
            ks_pvalue: ks.pvalue,
            cvm_statistic: cvm.statistic,
            cvm_pvalue: cvm.pvalue,
            amise: ise,
            rmse: rse,
            mean_time_ms: 0.0,
            std_time_ms: 0.0,
        }
    }

    pub fn to_table(&self) -> String {
        let rows = [
            ("AMISE", self.amise),
            ("RMSE", self.rmse),
            ("KS statistic", self.ks_statistic),
            ("KS p-value", self.ks_pvalue),
            ("CvM statistic", self.cvm_statistic),
            ("CvM p-value", self.cvm_pvalue),
            ("mean time (ms)", self.mean_time_ms),
            ("std time (ms)", self.std_time_ms),
        ];
        // timing rows only make sense for repeated studies
        let timed = self.mean_time_ms > 0.0 || self.std_time_ms > 0.0;
        rows.iter()
            .filter(|(k, _)| timed || !k.ends_with("(ms)"))
            .map(|(k, v)| format!("{k:<16}{v:>12.3e}\n"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub bins: BinsRule,
    pub estimator: Estimator,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 1 << 15,
            reps: 20,
            seed: 0,
            bins: BinsRule::Rice,
            estimator: Estimator::Bshqi,
        }
    }
}

/// Repeated fit-and-test study: each repetition draws a training sample and
/// a fresh test sample from its own substream, fits, and scores the fit.
/// Statistics, p-values and errors are averaged over repetitions; fit time is
/// reported as mean ± std.
pub fn univariate_study(truth: &Univariate, cfg: &StudyConfig) -> Result<GofReport> {
    truth.validate()?;
    if cfg.reps == 0 || cfg.n < 2 {
        return Err(Error::InvalidParameter("need reps >= 1 and n >= 2".into()));
    }
    let mut acc = GofReport {
        ks_statistic: 0.0,
        ks_pvalue: 0.0,
        cvm_statistic: 0.0,
        cvm_pvalue: 0.0,
        amise: 0.0,
        rmse: 0.0,
        mean_time_ms: 0.0,
        std_time_ms: 0.0,
    };
    let mut times = Vec::with_capacity(cfg.reps);
    for r in 0..cfg.reps {
        let mut rng = substream(cfg.seed, r as u64);
        let train = truth.sample(cfg.n, &mut rng)?;
        let fresh = truth.sample(cfg.n, &mut rng)?;
        let start = Instant::now();
        let est = fit_estimator(&train, cfg.bins, cfg.estimator)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        let (lo, hi) = train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let one = GofReport::single(est.as_ref(), (lo, hi), truth, &fresh);
        acc.ks_statistic += one.ks_statistic;
        acc.ks_pvalue += one.ks_pvalue;
        acc.cvm_statistic += one.cvm_statistic;
        acc.cvm_pvalue += one.cvm_pvalue;
        acc.amise += one.amise;
        acc.rmse += one.rmse;
    }
    let k = cfg.reps as f64;
    for v in [
        &mut acc.ks_statistic,
        &mut acc.ks_pvalue,
        &mut acc.cvm_statistic,
        &mut acc.cvm_pvalue,
        &mut acc.amise,
        &mut acc.rmse,
    ] {
        *v /= k;
    }
    acc.mean_time_ms = times.iter().sum::<f64>() / k;
    acc.std_time_ms = (times.iter().map(|t| (t - acc.mean_time_ms).powi(2)).sum::<f64>() / k).sqrt();
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are valid near x = 1
        let x: f64 = 1.0;
        let mut alt = 0.0;
        for k in 1..50 {
            let t = (-2.0 * (k * k) as f64 * x * x).exp();
            alt += if k % 2 == 1 { t } else { -t };
        }
        assert!((kolmogorov_sf(x) - 2.0 * alt).abs() < 1e-14);
        assert!((kolmogorov_sf(1.358_098_8) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_sf(0.5) - 0.963_945_243_664_875).abs() < 1e-12);
    }

    #[test]
    fn cvm_critical_values() {
        // asymptotic upper quantiles of ω²
        for (x, p) in [(0.347_30, 0.10), (0.461_36, 0.05), (0.743_46, 0.01)] {
            let sf = 1.0 - cvm_cdf(x);
            assert!((sf - p).abs() < 1e-4, "{x}: {sf}");
        }
        let mut prev = 1.0;
        for i in 1..60 {
            let sf = 1.0 - cvm_cdf(i as f64 * 0.05);
            assert!(sf <= prev);
            prev = sf;
        }
    }

    #[test]
    fn statistics_on_exact_quantiles() {
        let n = 100;
        let x: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64 / (2 * n) as f64).collect();
        let c = cvm_test(&x, |v| v);
        assert!((c.statistic - 1.0 / (12.0 * n as f64)).abs() < 1e-15);
        let k = ks_test(&x, |v| v);
        assert!((k.statistic - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn errors_of_constant_offset() {
        let (ise, rse) = integrated_errors(|x| x * x + 0.01, |x| x * x, 0.0, 1.0);
        assert!((ise - 1e-4).abs() < 1e-15);
        assert!((rse - 0.01).abs() < 1e-15);
        assert_eq!(integrated_errors(|x| x.sin(), |x| x.sin(), 0.0, 3.0), (0.0, 0.0));
    }
}

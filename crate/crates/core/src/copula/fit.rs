use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::archimedean::kendall_tau_to_theta;
use super::gaussian::{nearest_correlation, GaussianCopula};
use super::{CopulaSpec, Family, PseudoObservations};
use crate::error::{Error, Result};
use crate::optimize::{minimize, Bounds, LbfgsbOptions};
use crate::special::normal_quantile;

/// Parameter boxes and optimizer settings for the Archimedean fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub clayton_bounds: (f64, f64),
    pub gumbel_bounds: (f64, f64),
    pub frank_bounds: (f64, f64),
    pub max_iter: usize,
    pub fd_step: f64,
    /// Kendall's τ is estimated on at most this many rows (evenly strided).
    pub tau_max_rows: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            clayton_bounds: (1e-4, 50.0),
            gumbel_bounds: (1.0 + 1e-4, 50.0),
            frank_bounds: (1e-4, 50.0),
            max_iter: 100,
            fd_step: 1e-6,
            tau_max_rows: 3000,
        }
    }
}

impl FitConfig {
    pub fn bounds(&self, family: Family) -> Option<(f64, f64)> {
        match family {
            Family::Gaussian => None,
            Family::Clayton => Some(self.clayton_bounds),
            Family::Gumbel => Some(self.gumbel_bounds),
            Family::Frank => Some(self.frank_bounds),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: CopulaSpec,
    /// Σ w_i log c(u_i) at the returned parameters.
    pub loglik: f64,
    /// The same objective at the optimizer's starting point.
    pub initial_loglik: f64,
}

fn check_weights(u: &PseudoObservations, w: &[f64]) -> Result<f64> {
    if w.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: w.len(),
        });
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    Ok(total)
}

/// Weighted Kendall's τ averaged over all coordinate pairs:
/// `Σ_{i<j} w_i w_j sgn·sgn / Σ_{i<j} w_i w_j`.
pub fn weighted_kendall_tau(u: &PseudoObservations, w: &[f64], max_rows: usize) -> Result<f64> {
    check_weights(u, w)?;
    let rows: Vec<usize> = (0..u.len()).filter(|&i| w[i] > 0.0).collect();
    let stride = rows.len().div_ceil(max_rows.max(2)).max(1);
    let rows: Vec<usize> = rows.into_iter().step_by(stride).collect();
    let d = u.dim();
    let mut per_pair = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let (mut num, mut den) = (0.0, 0.0);
            for (p, &i) in rows.iter().enumerate() {
                let (ri, wi) = (u.row(i), w[i]);
                for &j in &rows[p + 1..] {
                    let rj = u.row(j);
                    let ww = wi * w[j];
                    let s = ((ri[a] - rj[a]) * (ri[b] - rj[b])).signum();
                    if (ri[a] - rj[a]) * (ri[b] - rj[b]) != 0.0 {
                        num += ww * s;
                    }
                    den += ww;
                }
            }
            if den > 0.0 {
                per_pair.push(num / den);
            }
        }
    }
    if per_pair.is_empty() {
        return Ok(0.0);
    }
    Ok(per_pair.iter().sum::<f64>() / per_pair.len() as f64)
}

fn weighted_loglik(spec: &CopulaSpec, u: &PseudoObservations, w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, row) in u.rows().enumerate() {
        if w[i] > 0.0 {
            acc += w[i] * spec.log_density_unchecked(row);
        }
    }
    acc
}

fn fit_gaussian(u: &PseudoObservations, w: &[f64], total: f64) -> Result<FitResult> {
    let d = u.dim();
    let mut s = DMatrix::<f64>::zeros(d, d);
    let mut y = vec![0.0; d];
    for (i, row) in u.rows().enumerate() {
        if w[i] <= 0.0 {
            continue;
        }
        for (yk, v) in y.iter_mut().zip(row) {
            *yk = normal_quantile(*v);
        }
        for a in 0..d {
            for b in 0..=a {
                s[(a, b)] += w[i] * y[a] * y[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    s /= total;
    if (0..d).any(|k| !(s[(k, k)] > 0.0)) {
        return Err(Error::FitFailed("normal scores have zero variance".into()));
    }
    let r = nearest_correlation(&s);
    let spec = CopulaSpec::Gaussian(GaussianCopula::from_matrix(r)?);
    let loglik = weighted_loglik(&spec, u, w);
    if !loglik.is_finite() {
        return Err(Error::FitFailed("Gaussian log-likelihood is not finite".into()));
    }
    let initial = weighted_loglik(&CopulaSpec::independence(d), u, w).max(f64::MIN);
    Ok(FitResult {
        spec,
        loglik,
        initial_loglik: initial,
    })
}

fn fit_archimedean(
    family: Family,
    u: &PseudoObservations,
    w: &[f64],
    total: f64,
    tau: f64,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let (lo, hi) = cfg.bounds(family).expect("archimedean family");
    let bounds = Bounds::scalar(lo, hi)?;
    let make = |theta: f64| match family {
        Family::Clayton => CopulaSpec::Clayton { theta },
        Family::Gumbel => CopulaSpec::Gumbel { theta },
        _ => CopulaSpec::Frank { theta },
    };
    // mean negative log-likelihood keeps the gradient scale independent of n
    let objective = |x: &[f64]| -weighted_loglik(&make(x[0]), u, w) / total;
    let opts = LbfgsbOptions {
        max_iter: cfg.max_iter,
        fd_step: cfg.fd_step,
        ..Default::default()
    };
    let start = kendall_tau_to_theta(family, tau).clamp(lo, hi);
    let probes = [start, 0.5 * (lo + hi).min(lo + 2.0), lo, hi];
    let mut last_err = None;
    for x0 in probes {
        match minimize(objective, &[x0], &bounds, &opts) {
            Ok(res) => {
                return Ok(FitResult {
                    spec: make(res.x[0]),
                    loglik: -res.f * total,
                    initial_loglik: -res.f_initial * total,
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::FitFailed(format!(
        "{family} objective is not finite at any probe ({})",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Weighted maximum-likelihood fit of one family. Rows with zero weight do
/// not contribute.
pub fn fit_weighted(family: Family, u: &PseudoObservations, w: &[f64], cfg: &FitConfig) -> Result<FitResult> {
    let total = check_weights(u, w)?;
    match family {
        Family::Gaussian => fit_gaussian(u, w, total),
        _ => {
            let tau = weighted_kendall_tau(u, w, cfg.tau_max_rows)?;
            fit_archimedean(family, u, w, total, tau, cfg)
        }
    }
}

/// Fits every family in `families` and keeps the largest weighted
/// log-likelihood; ties go to the earlier family in Gaussian < Clayton <
/// Gumbel < Frank.
pub fn best_fit(families: &[Family], u: &PseudoObservations, w: &[f64], cfg: &FitConfig) -> Result<FitResult> {
    if families.is_empty() {
        return Err(Error::InvalidParameter("no copula families to choose from".into()));
    }
    let total = check_weights(u, w)?;
    let mut order = families.to_vec();
    order.sort();
    order.dedup();
    let tau = if order.iter().any(|f| f.is_archimedean()) {
        weighted_kendall_tau(u, w, cfg.tau_max_rows)?
    } else {
        0.0
    };
    let mut best: Option<FitResult> = None;
    let mut errors = Vec::new();
    for family in order {
        let fit = match family {
            Family::Gaussian => fit_gaussian(u, w, total),
            _ => fit_archimedean(family, u, w, total, tau, cfg),
        };
        match fit {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.loglik > b.loglik) {
                    best = Some(r);
                }
            }
            Err(e) => errors.push(format!("{family}: {e}")),
        }
    }
    best.ok_or_else(|| Error::FitFailed(errors.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clayton_self_consistency() {
        let u = CopulaSpec::Clayton { theta: 3.0 }.sample_seeded(2, 2000, 11).unwrap();
        let w = vec![1.0; u.len()];
        let r = fit_weighted(Family::Clayton, &u, &w, &FitConfig::default()).unwrap();
        let theta = r.spec.theta().unwrap();
        assert!((2.5..=3.5).contains(&theta), "{theta}");
        assert!(r.loglik >= r.initial_loglik);
    }

    #[test]
    fn zero_weights_equal_subset() {
        let u = CopulaSpec::Gumbel { theta: 2.0 }.sample_seeded(2, 400, 3).unwrap();
        let w: Vec<f64> = (0..400).map(|i| if i < 150 { 1.0 } else { 0.0 }).collect();
        let sub = PseudoObservations::new(u.as_slice()[..300].to_vec(), 2, 1e-10).unwrap();
        let cfg = FitConfig::default();
        for fam in Family::ALL {
            let a = fit_weighted(fam, &u, &w, &cfg).unwrap();
            let b = fit_weighted(fam, &sub, &[1.0; 150], &cfg).unwrap();
            assert_eq!(a.spec, b.spec, "{fam}");
            assert!((a.loglik - b.loglik).abs() < 1e-9 * b.loglik.abs().max(1.0));
        }
    }

    #[test]
    fn singleton_families_equal_direct_fit() {
        let u = CopulaSpec::Frank { theta: 4.0 }.sample_seeded(3, 500, 8).unwrap();
        let w = vec![1.0; 500];
        let cfg = FitConfig::default();
        assert_eq!(
            best_fit(&[Family::Gaussian], &u, &w, &cfg).unwrap(),
            fit_weighted(Family::Gaussian, &u, &w, &cfg).unwrap()
        );
    }

    #[test]
    fn weight_validation() {
        let u = CopulaSpec::Clayton { theta: 1.0 }.sample_seeded(2, 10, 1).unwrap();
        let cfg = FitConfig::default();
        assert!(fit_weighted(Family::Clayton, &u, &[0.0; 10], &cfg).is_err());
        assert!(fit_weighted(Family::Clayton, &u, &[1.0; 9], &cfg).is_err());
        assert!(best_fit(&[], &u, &[1.0; 10], &cfg).is_err());
    }
}

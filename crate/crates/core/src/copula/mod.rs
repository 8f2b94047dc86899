//! Gaussian and Archimedean (Clayton, Gumbel, Frank) copulas in `D >= 2`
//! dimensions: log-densities, CDFs, weighted maximum-likelihood fitting and
//! exact sampling.

mod archimedean;
mod fit;
mod gaussian;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use archimedean::{frank_debye_tau, kendall_tau_to_theta, theta_to_kendall_tau};
pub use fit::{best_fit, fit_weighted, weighted_kendall_tau, FitConfig, FitResult};
pub use gaussian::GaussianCopula;

use crate::error::{Error, Result};

/// Default clamp applied to pseudo-observations.
pub const DEFAULT_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
}

impl Family {
    /// All families in tie-breaking order.
    pub const ALL: [Family; 4] = [Family::Gaussian, Family::Clayton, Family::Gumbel, Family::Frank];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
            Family::Frank => "frank",
        }
    }

    pub fn is_archimedean(self) -> bool {
        !matches!(self, Family::Gaussian)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "clayton" => Ok(Family::Clayton),
            "gumbel" => Ok(Family::Gumbel),
            "frank" => Ok(Family::Frank),
            other => Err(Error::InvalidParameter(format!("unknown copula family `{other}`"))),
        }
    }
}

/// Parse a comma-separated family list; `all` selects every family.
pub fn parse_families(s: &str) -> Result<Vec<Family>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Family::ALL.to_vec());
    }
    let mut out: Vec<Family> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(Family::from_str)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidParameter("empty family list".into()));
    }
    Ok(out)
}

/// A copula family together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CopulaSpec {
    Gaussian(GaussianCopula),
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
    Frank { theta: f64 },
}

impl CopulaSpec {
    pub fn family(&self) -> Family {
        match self {
            CopulaSpec::Gaussian(_) => Family::Gaussian,
            CopulaSpec::Clayton { .. } => Family::Clayton,
            CopulaSpec::Gumbel { .. } => Family::Gumbel,
            CopulaSpec::Frank { .. } => Family::Frank,
        }
    }

    /// Scalar parameter of an Archimedean family.
    pub fn theta(&self) -> Option<f64> {
        match *self {
            CopulaSpec::Gaussian(_) => None,
            CopulaSpec::Clayton { theta } | CopulaSpec::Gumbel { theta } | CopulaSpec::Frank { theta } => {
                Some(theta)
            }
        }
    }

    pub fn archimedean(family: Family, theta: f64) -> Result<Self> {
        let spec = match family {
            Family::Clayton => CopulaSpec::Clayton { theta },
            Family::Gumbel => CopulaSpec::Gumbel { theta },
            Family::Frank => CopulaSpec::Frank { theta },
            Family::Gaussian => {
                return Err(Error::InvalidParameter(
                    "the Gaussian copula is parameterised by a correlation matrix".into(),
                ))
            }
        };
        spec.validate(2)?;
        Ok(spec)
    }

    pub fn independence(dim: usize) -> Self {
        CopulaSpec::Gaussian(GaussianCopula::identity(dim))
    }

    /// Checks the parameters for use in `dim` dimensions.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!("copulas need D >= 2, got {dim}")));
        }
        match *self {
            CopulaSpec::Gaussian(ref g) => {
                if g.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: g.dim(),
                        got: dim,
                    });
                }
                Ok(())
            }
            CopulaSpec::Clayton { theta } if !(theta > 0.0 && theta.is_finite()) => Err(
                Error::InvalidParameter(format!("Clayton needs theta > 0, got {theta}")),
            ),
            CopulaSpec::Gumbel { theta } if !(theta >= 1.0 && theta.is_finite()) => Err(
                Error::InvalidParameter(format!("Gumbel needs theta >= 1, got {theta}")),
            ),
            CopulaSpec::Frank { theta } if !theta.is_finite() || theta == 0.0 => Err(
                Error::InvalidParameter(format!("Frank needs theta != 0, got {theta}")),
            ),
            CopulaSpec::Frank { theta } if dim > 2 && theta < 0.0 => Err(Error::InvalidParameter(
                format!("Frank with D = {dim} > 2 needs theta > 0, got {theta}"),
            )),
            _ => Ok(()),
        }
    }

    /// `log c(u)`; every coordinate must lie strictly inside (0, 1).
    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        self.validate(u.len())?;
        if let Some(&bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::BoundaryPoint { value: bad });
        }
        Ok(self.log_density_unchecked(u))
    }

    /// [`log_density`](Self::log_density) without validation, for hot loops
    /// over pre-clamped pseudo-observations.
    pub fn log_density_unchecked(&self, u: &[f64]) -> f64 {
        match *self {
            CopulaSpec::Gaussian(ref g) => g.log_density(u),
            CopulaSpec::Clayton { theta } => archimedean::clayton_log_density(theta, u),
            CopulaSpec::Gumbel { theta } => archimedean::gumbel_log_density(theta, u),
            CopulaSpec::Frank { theta } => archimedean::frank_log_density(theta, u),
        }
    }

    /// Copula CDF `C(u)`. The Gaussian CDF is only available for `D = 2`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.validate(u.len())?;
        let u: Vec<f64> = u.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        match *self {
            CopulaSpec::Gaussian(ref g) => g.cdf(&u),
            CopulaSpec::Clayton { theta } => Ok(archimedean::clayton_cdf(theta, &u)),
            CopulaSpec::Gumbel { theta } => Ok(archimedean::gumbel_cdf(theta, &u)),
            CopulaSpec::Frank { theta } => Ok(archimedean::frank_cdf(theta, &u)),
        }
    }

    /// `n` i.i.d. rows in `dim` dimensions.
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, n: usize, rng: &mut R) -> Result<PseudoObservations> {
        self.validate(dim)?;
        if n == 0 {
            return Err(Error::InvalidParameter("need n >= 1".into()));
        }
        let mut data = Vec::with_capacity(n * dim);
        let mut row = vec![0.0; dim];
        for _ in 0..n {
            match *self {
                CopulaSpec::Gaussian(ref g) => g.sample_row(rng, &mut row),
                CopulaSpec::Clayton { theta } => archimedean::clayton_sample(theta, rng, &mut row),
                CopulaSpec::Gumbel { theta } => archimedean::gumbel_sample(theta, rng, &mut row),
                CopulaSpec::Frank { theta } => archimedean::frank_sample(theta, rng, &mut row),
            }
            data.extend_from_slice(&row);
        }
        PseudoObservations::new(data, dim, DEFAULT_CLAMP)
    }

    /// Seeded convenience wrapper around [`sample`](Self::sample).
    pub fn sample_seeded(&self, dim: usize, n: usize, seed: u64) -> Result<PseudoObservations> {
        let mut rng = crate::rng::seeded(seed);
        self.sample(dim, n, &mut rng)
    }
}

/// `n x D` matrix of copula-scale observations, clamped into `(eps, 1 - eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    data: Vec<f64>,
    dim: usize,
}

impl PseudoObservations {
    /// Row-major `data` with `dim` columns.
    pub fn new(mut data: Vec<f64>, dim: usize, eps: f64) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| v.is_nan()) {
            return Err(Error::InvalidSample(format!("pseudo-observation {v} is NaN")));
        }
        for v in data.iter_mut() {
            *v = v.clamp(eps, 1.0 - eps);
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>], eps: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidSample("ragged rows".into()));
        }
        Self::new(rows.concat(), dim, eps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let c = CopulaSpec::Clayton { theta: 2.0 };
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"family":"clayton","theta":2.0}"#);
        let g = CopulaSpec::Gaussian(GaussianCopula::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap());
        let txt = serde_json::to_string(&g).unwrap();
        assert_eq!(txt, r#"{"family":"gaussian","P":[[1.0,0.5],[0.5,1.0]]}"#);
        let back: CopulaSpec = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<CopulaSpec>(r#"{"family":"gaussian","P":[[1.0,2.0],[2.0,1.0]]}"#).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(CopulaSpec::Clayton { theta: 0.0 }.validate(2).is_err());
        assert!(CopulaSpec::Gumbel { theta: 0.9 }.validate(2).is_err());
        assert!(CopulaSpec::Frank { theta: 0.0 }.validate(2).is_err());
        assert!(CopulaSpec::Frank { theta: -2.0 }.validate(2).is_ok());
        assert!(CopulaSpec::Frank { theta: -2.0 }.validate(3).is_err());
        assert!(CopulaSpec::Clayton { theta: 1.0 }.validate(1).is_err());
    }

    #[test]
    fn boundary_points_rejected() {
        let c = CopulaSpec::Gumbel { theta: 2.0 };
        assert!(matches!(c.log_density(&[0.0, 0.5]), Err(Error::BoundaryPoint { .. })));
        assert!(c.log_density(&[0.3, 1.0]).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!(parse_families("all").unwrap(), Family::ALL.to_vec());
        assert_eq!(
            parse_families("frank,gaussian").unwrap(),
            vec![Family::Gaussian, Family::Frank]
        );
        assert!(parse_families("student").is_err());
    }

    #[test]
    fn pseudo_observations_clamp() {
        let p = PseudoObservations::new(vec![0.0, 1.0, 0.5, 0.25], 2, 1e-10).unwrap();
        assert_eq!(p.row(0), &[1e-10, 1.0 - 1e-10]);
        assert_eq!(p.len(), 2);
        assert!(PseudoObservations::new(vec![0.1, 0.2, 0.3], 2, 1e-10).is_err());
    }
}

//! Seeded generators: univariate test distributions and the labelled
//! synthetic clustering datasets X1–X4.
//!
//! Cluster parameters (copula θ, marginal locations and scales) are recipe
//! defaults chosen for well-separated clusters resembling the published
//! scatter plots; every value is recorded in the [`Recipe`] so a dataset can
//! be regenerated bitwise from its recipe and seed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaSpec, GaussianCopula};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng::{seeded, substream};
use crate::special::{normal_cdf, normal_pdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPart {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

/// Univariate ground-truth distributions. `Normal` is parameterised by its
/// variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Univariate {
    Normal { mean: f64, var: f64 },
    Exponential { rate: f64 },
    GaussianMixture { parts: Vec<NormalPart> },
}

impl Univariate {
    /// Three-component mixture with distinct means and variances.
    pub fn default_mixture() -> Self {
        Univariate::GaussianMixture {
            parts: vec![
                NormalPart { weight: 0.5, mean: 0.0, var: 1.0 },
                NormalPart { weight: 0.3, mean: 4.0, var: 0.25 },
                NormalPart { weight: 0.2, mean: 7.0, var: 2.25 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Univariate::Normal { mean, var } => mean.is_finite() && *var > 0.0 && var.is_finite(),
            Univariate::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            Univariate::GaussianMixture { parts } => {
                !parts.is_empty()
                    && parts.iter().all(|p| p.weight > 0.0 && p.var > 0.0 && p.mean.is_finite())
                    && (parts.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid distribution {self}")))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Univariate::Normal { mean, var } => normal_pdf((x - mean) / var.sqrt()) / var.sqrt(),
            Univariate::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Univariate::GaussianMixture { parts } => parts
                .iter()
                .map(|p| p.weight * normal_pdf((x - p.mean) / p.var.sqrt()) / p.var.sqrt())
                .sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Univariate::Normal { mean, var } => normal_cdf((x - mean) / var.sqrt()),
            Univariate::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Univariate::GaussianMixture { parts } => parts
                .iter()
                .map(|p| p.weight * normal_cdf((x - p.mean) / p.var.sqrt()))
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("need n >= 1".into()));
        }
        Ok(match self {
            Univariate::Normal { mean, var } => {
                let d = Normal::new(*mean, var.sqrt()).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Univariate::Exponential { rate } => {
                let d = Exp::new(*rate).expect("validated");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Univariate::GaussianMixture { parts } => {
                let cum: Vec<f64> = parts
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p.weight;
                        Some(*acc)
                    })
                    .collect();
                (0..n)
                    .map(|_| {
                        let r: f64 = rng.random::<f64>() * cum[cum.len() - 1];
                        let k = cum.iter().position(|&c| r < c).unwrap_or(parts.len() - 1);
                        let z: f64 = rng.sample(rand_distr::StandardNormal);
                        parts[k].mean + parts[k].var.sqrt() * z
                    })
                    .collect()
            }
        })
    }
}

/// `n` i.i.d. draws from `dist` under `seed`.
pub fn gen_univariate(dist: &Univariate, n: usize, seed: u64) -> Result<Vec<f64>> {
    dist.sample(n, &mut seeded(seed))
}

impl fmt::Display for Univariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Univariate::Normal { mean, var } => write!(f, "normal:{mean},{var}"),
            Univariate::Exponential { rate } => write!(f, "exponential:{rate}"),
            Univariate::GaussianMixture { parts } => {
                write!(f, "mixture:")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{},{}", p.weight, p.mean, p.var)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `normal:MEAN,VAR`, `exponential:RATE`, `mixture` (the default
/// mixture) or `mixture:W,MEAN,VAR;W,MEAN,VAR;...`.
impl FromStr for Univariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse distribution `{s}`"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        let dist = match kind.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => match nums(args)?.as_slice() {
                [m, v] => Univariate::Normal { mean: *m, var: *v },
                _ => return Err(bad()),
            },
            "exponential" | "exp" => match nums(args)?.as_slice() {
                [r] => Univariate::Exponential { rate: *r },
                _ => return Err(bad()),
            },
            "mixture" | "gmm" if args.trim().is_empty() => Univariate::default_mixture(),
            "mixture" | "gmm" => {
                let parts = args
                    .split(';')
                    .map(|p| match nums(p)?.as_slice() {
                        [w, m, v] => Ok(NormalPart { weight: *w, mean: *m, var: *v }),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Univariate::GaussianMixture { parts }
            }
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

// ------------------------------------------------------------ synthetic sets

/// Maps a copula coordinate `u ∈ (0,1)` to data scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalTransform {
    /// `mean + sd · Φ^{-1}(u)`
    Normal { mean: f64, sd: f64 },
    /// `shift - ln(1 - u) / rate`
    Exponential { rate: f64, shift: f64 },
    /// `low + (high - low) · u`
    Uniform { low: f64, high: f64 },
}

impl MarginalTransform {
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            MarginalTransform::Normal { mean, sd } => mean + sd * normal_quantile(u),
            MarginalTransform::Exponential { rate, shift } => shift - (-u).ln_1p() / rate,
            MarginalTransform::Uniform { low, high } => low + (high - low) * u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecipe {
    pub size: usize,
    pub copula: CopulaSpec,
    pub marginals: Vec<MarginalTransform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub name: String,
    pub dim: usize,
    pub clusters: Vec<ClusterRecipe>,
}

impl Recipe {
    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidParameter("recipe has no clusters".into()));
        }
        for (k, c) in self.clusters.iter().enumerate() {
            c.copula.validate(self.dim)?;
            if c.marginals.len() != self.dim {
                return Err(Error::InvalidParameter(format!(
                    "cluster {k} has {} marginals for D = {}",
                    c.marginals.len(),
                    self.dim
                )));
            }
            if c.size == 0 {
                return Err(Error::InvalidParameter(format!("cluster {k} is empty")));
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.size).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthetic {
    X1,
    X2,
    X3,
    X4,
}

impl Synthetic {
    pub const ALL: [Synthetic; 4] = [Synthetic::X1, Synthetic::X2, Synthetic::X3, Synthetic::X4];

    pub fn name(self) -> &'static str {
        match self {
            Synthetic::X1 => "x1",
            Synthetic::X2 => "x2",
            Synthetic::X3 => "x3",
            Synthetic::X4 => "x4",
        }
    }
}

impl FromStr for Synthetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x1" => Ok(Synthetic::X1),
            "x2" => Ok(Synthetic::X2),
            "x3" => Ok(Synthetic::X3),
            "x4" => Ok(Synthetic::X4),
            other => Err(Error::InvalidParameter(format!("unknown dataset `{other}`"))),
        }
    }
}

fn normal2(mx: f64, my: f64, sx: f64, sy: f64) -> Vec<MarginalTransform> {
    vec![
        MarginalTransform::Normal { mean: mx, sd: sx },
        MarginalTransform::Normal { mean: my, sd: sy },
    ]
}

fn cluster(size: usize, copula: CopulaSpec, marginals: Vec<MarginalTransform>) -> ClusterRecipe {
    ClusterRecipe { size, copula, marginals }
}

/// Default recipe for one of the synthetic datasets.
pub fn default_recipe(which: Synthetic) -> Recipe {
    use CopulaSpec::{Clayton, Frank, Gumbel};
    let (dim, clusters) = match which {
        Synthetic::X1 => (
            2,
            vec![
                cluster(500, Clayton { theta: 4.0 }, normal2(0.0, 4.0, 1.0, 1.0)),
                cluster(500, Clayton { theta: 3.0 }, normal2(4.0, 12.0, 1.0, 1.0)),
                cluster(300, Frank { theta: 8.0 }, normal2(8.0, 0.0, 1.0, 1.0)),
                cluster(200, Gumbel { theta: 3.0 }, normal2(12.0, 8.0, 1.0, 1.0)),
            ],
        ),
        Synthetic::X2 => (
            2,
            vec![
                cluster(1013, Clayton { theta: 5.0 }, normal2(0.0, 0.0, 1.0, 1.0)),
                cluster(1014, Clayton { theta: 4.0 }, normal2(7.0, 0.0, 1.0, 1.0)),
                cluster(985, Gumbel { theta: 4.0 }, normal2(0.0, 7.0, 1.0, 1.0)),
                cluster(988, Gumbel { theta: 3.0 }, normal2(7.0, 7.0, 1.0, 1.0)),
            ],
        ),
        Synthetic::X3 => (
            2,
            vec![
                cluster(700, Frank { theta: 10.0 }, normal2(0.0, 0.0, 1.0, 1.0)),
                cluster(1000, Frank { theta: 12.0 }, normal2(7.0, 0.0, 1.0, 1.0)),
                cluster(1000, Frank { theta: 8.0 }, normal2(3.5, 6.5, 1.0, 1.0)),
            ],
        ),
        Synthetic::X4 => {
            let rho = 0.3;
            let p = vec![vec![1.0, rho, rho], vec![rho, 1.0, rho], vec![rho, rho, 1.0]];
            let g = CopulaSpec::Gaussian(GaussianCopula::new(p).expect("valid correlation"));
            let at = |m: f64| vec![MarginalTransform::Normal { mean: m, sd: 1.0 }; 3];
            (3, vec![cluster(500, g.clone(), at(0.0)), cluster(500, g, at(2.0))])
        }
    };
    Recipe {
        name: which.name().to_string(),
        dim,
        clusters,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x: DataMatrix,
    pub labels: Vec<usize>,
    pub seed: u64,
    pub recipe: Recipe,
}

/// Draws every cluster of `recipe` from its own substream of `seed`.
pub fn generate(recipe: &Recipe, seed: u64) -> Result<LabeledDataset> {
    recipe.validate()?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in recipe.clusters.iter().enumerate() {
        let mut rng = substream(seed, k as u64);
        let u = c.copula.sample(recipe.dim, c.size, &mut rng)?;
        for row in u.rows() {
            data.extend(row.iter().zip(&c.marginals).map(|(v, m)| m.apply(*v)));
            labels.push(k);
        }
    }
    Ok(LabeledDataset {
        x: DataMatrix::new(data, recipe.dim)?,
        labels,
        seed,
        recipe: recipe.clone(),
    })
}

pub fn gen_synthetic(which: Synthetic, seed: u64) -> Result<LabeledDataset> {
    generate(&default_recipe(which), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_distributions() {
        assert_eq!(
            "normal:5,0.3".parse::<Univariate>().unwrap(),
            Univariate::Normal { mean: 5.0, var: 0.3 }
        );
        assert_eq!("exponential:1".parse::<Univariate>().unwrap(), Univariate::Exponential { rate: 1.0 });
        assert_eq!("mixture".parse::<Univariate>().unwrap(), Univariate::default_mixture());
        let m: Univariate = "mixture:0.5,0,1;0.5,3,2".parse().unwrap();
        assert_eq!(m.to_string(), "mixture:0.5,0,1;0.5,3,2");
        assert!("normal:5".parse::<Univariate>().is_err());
        assert!("normal:5,-1".parse::<Univariate>().is_err());
        assert!("cauchy:0,1".parse::<Univariate>().is_err());
    }

    #[test]
    fn univariate_moments() {
        let n = 1 << 15;
        let x = gen_univariate(&Univariate::Normal { mean: 5.0, var: 0.3 }, n, 1).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!((mean - 5.0).abs() < 0.02);
        let e = gen_univariate(&Univariate::Exponential { rate: 1.0 }, n, 2).unwrap();
        assert!((e.iter().sum::<f64>() / n as f64 - 1.0).abs() < 0.03);
        assert_eq!(x, gen_univariate(&Univariate::Normal { mean: 5.0, var: 0.3 }, n, 1).unwrap());
    }

    #[test]
    fn mixture_cdf_matches_numeric_integral_of_pdf() {
        let m = Univariate::default_mixture();
        let (a, b) = (-8.0, 2.5);
        let steps = 20_000;
        let h = (b - a) / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            let x = a + (i as f64 + 0.5) * h;
            acc += m.pdf(x) * h;
        }
        assert!((acc - (m.cdf(b) - m.cdf(a))).abs() < 1e-8);
    }

    #[test]
    fn label_counts_match_recipe() {
        for which in Synthetic::ALL {
            let d = gen_synthetic(which, 3).unwrap();
            let recipe = default_recipe(which);
            let mut counts = vec![0; recipe.clusters.len()];
            for &l in &d.labels {
                counts[l] += 1;
            }
            assert_eq!(counts, recipe.sizes());
            assert_eq!(d.x.ncols(), recipe.dim);
        }
        assert_eq!(default_recipe(Synthetic::X1).sizes(), vec![500, 500, 300, 200]);
        assert_eq!(default_recipe(Synthetic::X3).sizes(), vec![700, 1000, 1000]);
    }

    #[test]
    fn recipe_round_trip_regenerates_bitwise() {
        let d = gen_synthetic(Synthetic::X1, 7).unwrap();
        let json = serde_json::to_string(&d.recipe).unwrap();
        let back: Recipe = serde_json::from_str(&json).unwrap();
        assert_eq!(generate(&back, 7).unwrap().x, d.x);
        assert_ne!(gen_synthetic(Synthetic::X1, 8).unwrap().x, d.x);
    }

    #[test]
    fn unknown_dataset() {
        let err = "x9".parse::<Synthetic>().unwrap_err();
        assert!(err.to_string().contains("unknown dataset"));
    }
}

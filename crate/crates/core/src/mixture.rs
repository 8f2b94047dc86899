//! Semiparametric copula-mixture EM.
//!
//! Each component couples nonparametric marginals (weighted BSHQI, or the
//! uniform-kernel baseline) through a parametric copula. The M-step refits
//! every marginal with the responsibilities as weights, maps the data to
//! pseudo-observations through the refreshed CDFs and selects the
//! best-likelihood copula family per cluster.
//!
//! Marginal meshes are shared: dimension `j` uses one mesh spanning the full
//! column with the interval count taken from the bins rule at the total
//! sample size, fixed for the whole run, so every cluster's marginal is
//! defined wherever data exists.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bshqi::{BshqiDensity, Density, NaiveKernelDensity};
use crate::copula::{best_fit, CopulaSpec, Family, FitConfig, PseudoObservations, DEFAULT_CLAMP};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mesh::{BinsRule, UniformMesh, WeightedSample};
use crate::rng::{substream, SeededRng};
use crate::special::log_sum_exp;
use crate::stat_tests::Estimator;

/// Marginal densities are floored here before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Nearest-seed partition around `K` randomly drawn rows.
    #[default]
    Random,
    /// Converged Lloyd's k-means.
    KMeans,
}

impl std::str::FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Init::Random),
            "kmeans" | "k-means" => Ok(Init::KMeans),
            other => Err(Error::InvalidParameter(format!("unknown init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub families: Vec<Family>,
    pub init: Init,
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub bins: BinsRule,
    pub marginal_method: Estimator,
    /// floor for the pseudo-observation clamp
    pub clamp: f64,
    /// widen each component's clamp to `1 / (2 (W_k + 1))`, `W_k` its
    /// effective size, so sample extremes do not map to `ε` or `1 - ε`
    pub adaptive_clamp: bool,
    /// fresh-partition restarts allowed after a cluster collapse
    pub rescues: usize,
    pub fit: FitConfig,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            k: 2,
            families: Family::ALL.to_vec(),
            init: Init::Random,
            restarts: 5,
            tol: 1e-4,
            max_iter: 200,
            bins: BinsRule::Rice,
            marginal_method: Estimator::Bshqi,
            clamp: DEFAULT_CLAMP,
            adaptive_clamp: true,
            rescues: 3,
            fit: FitConfig::default(),
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidParameter("no copula families".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return Err(Error::InvalidParameter("clamp must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// A fitted marginal, tagged by estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Marginal {
    Bshqi(BshqiDensity),
    Kernel(NaiveKernelDensity),
}

impl Marginal {
    pub fn as_density(&self) -> &dyn Density {
        match self {
            Marginal::Bshqi(d) => d,
            Marginal::Kernel(d) => d,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.as_density().pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.as_density().cdf(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub pi: f64,
    pub copula: CopulaSpec,
    pub marginals: Vec<Marginal>,
    /// pseudo-observations are clamped into `[clamp, 1 - clamp]`
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_clamp() -> f64 {
    DEFAULT_CLAMP
}

/// Per-iteration bookkeeping of one EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub loglik: f64,
    /// |Σπ - 1|
    pub pi_sum_error: f64,
    /// max_i |Σ_k γ_ik - 1| of the responsibilities fed to this M-step
    pub gamma_row_error: f64,
    /// (initial, final) weighted copula log-likelihood per cluster
    pub copula_substep: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub components: Vec<MixtureComponent>,
    pub loglik_trace: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub seed: u64,
    pub config: MixtureConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<IterationStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    gamma: Vec<f64>,
    k: usize,
}

impl Responsibilities {
    /// Row-major `n x K`; rows are validated to sum to one.
    pub fn new(gamma: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || !gamma.len().is_multiple_of(k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: gamma.len(),
            });
        }
        for (i, row) in gamma.chunks_exact(k).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|g| !(0.0..=1.0).contains(g)) || (s - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidParameter(format!("responsibility row {i} is not a distribution")));
            }
        }
        Ok(Self { gamma, k })
    }

    pub fn one_hot(labels: &[usize], k: usize) -> Result<Self> {
        let mut gamma = vec![0.0; labels.len() * k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidParameter(format!("label {l} >= K = {k}")));
            }
            gamma[i * k + l] = 1.0;
        }
        Ok(Self { gamma, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.gamma.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.gamma[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.gamma.chunks_exact(self.k).map(|r| r[k]).collect()
    }

    pub fn max_row_error(&self) -> f64 {
        self.gamma
            .chunks_exact(self.k)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Hard labels; ties go to the smallest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.gamma
            .chunks_exact(self.k)
            .map(|r| {
                let mut best = 0;
                for (k, &g) in r.iter().enumerate() {
                    if g > r[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// `log c(clamp(F̂(x))) + Σ_j log max(f̂_j(x_j), δ)`.
pub fn component_log_density(comp: &MixtureComponent, x: &[f64]) -> f64 {
    let clamp = comp.clamp;
    let mut u = [0.0; 16];
    let mut heap;
    let u: &mut [f64] = if x.len() <= u.len() {
        &mut u[..x.len()]
    } else {
        heap = vec![0.0; x.len()];
        &mut heap
    };
    let mut marg = 0.0;
    for ((uj, &xj), m) in u.iter_mut().zip(x).zip(&comp.marginals) {
        *uj = m.cdf(xj).clamp(clamp, 1.0 - clamp);
        marg += m.pdf(xj).max(DENSITY_FLOOR).ln();
    }
    comp.copula.log_density_unchecked(u) + marg
}

fn scores(model: &MixtureModel, row: &[f64], out: &mut [f64]) {
    for (s, c) in out.iter_mut().zip(&model.components) {
        *s = c.pi.ln() + component_log_density(c, row);
    }
}

/// Responsibilities by a shifted softmax of `log π_k + log g_k`, together
/// with the log-likelihood at the same parameters.
pub fn e_step_with_loglik(model: &MixtureModel, x: &DataMatrix) -> Result<(Responsibilities, f64)> {
    check_dim(model, x)?;
    let k = model.components.len();
    let mut gamma = Vec::with_capacity(x.nrows() * k);
    let mut s = vec![0.0; k];
    let mut total = 0.0;
    for (i, row) in x.rows().enumerate() {
        scores(model, row, &mut s);
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::DegenerateRow { row: i });
        }
        let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
        gamma.extend(s.iter().map(|v| (v - m).exp() / z));
        total += m + z.ln();
    }
    Ok((Responsibilities { gamma, k }, total))
}

pub fn e_step(model: &MixtureModel, x: &DataMatrix) -> Result<Responsibilities> {
    e_step_with_loglik(model, x).map(|r| r.0)
}

/// `Σ_i log Σ_k π_k g_k(x_i)`.
pub fn log_likelihood(model: &MixtureModel, x: &DataMatrix) -> f64 {
    let mut s = vec![0.0; model.components.len()];
    x.rows()
        .map(|row| {
            scores(model, row, &mut s);
            log_sum_exp(&s)
        })
        .sum()
}

/// The expected complete-data log-likelihood `Σ_i Σ_k γ_ik (log π_k + log g_k)`
/// split into its mixing, copula and marginal parts.
pub fn q_function_terms(model: &MixtureModel, x: &DataMatrix, gamma: &Responsibilities) -> (f64, f64, f64) {
    let (mut pi_t, mut cop_t, mut marg_t) = (0.0, 0.0, 0.0);
    let mut u = vec![0.0; x.ncols()];
    for (i, row) in x.rows().enumerate() {
        for (k, c) in model.components.iter().enumerate() {
            let g = gamma.row(i)[k];
            if g == 0.0 {
                continue;
            }
            pi_t += g * c.pi.ln();
            for ((uj, &xj), m) in u.iter_mut().zip(row).zip(&c.marginals) {
                *uj = m.cdf(xj).clamp(c.clamp, 1.0 - c.clamp);
                marg_t += g * m.pdf(xj).max(DENSITY_FLOOR).ln();
            }
            cop_t += g * c.copula.log_density_unchecked(&u);
        }
    }
    (pi_t, cop_t, marg_t)
}

/// Argmax of the responsibilities; ties go to the smallest k.
pub fn predict(model: &MixtureModel, x: &DataMatrix) -> Result<Vec<usize>> {
    check_dim(model, x)?;
    let mut s = vec![0.0; model.components.len()];
    Ok(x.rows()
        .map(|row| {
            scores(model, row, &mut s);
            let mut best = 0;
            for (k, &v) in s.iter().enumerate() {
                if v > s[best] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

fn check_dim(model: &MixtureModel, x: &DataMatrix) -> Result<()> {
    let d = model.components.first().map_or(0, |c| c.marginals.len());
    if x.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Per-dimension meshes spanning each full column.
pub fn shared_meshes(x: &DataMatrix, rule: BinsRule) -> Result<Vec<UniformMesh>> {
    (0..x.ncols())
        .map(|j| UniformMesh::from_values(&x.column(j), rule, 0.0))
        .collect()
}

struct MStep {
    components: Vec<MixtureComponent>,
    copula_substep: Vec<(f64, f64)>,
}

fn m_step_inner(
    x: &DataMatrix,
    columns: &[Vec<f64>],
    meshes: &[UniformMesh],
    gamma: &Responsibilities,
    cfg: &MixtureConfig,
) -> Result<MStep> {
    let n = x.nrows();
    let d = x.ncols();
    if gamma.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gamma.len(),
        });
    }
    let mut components = Vec::with_capacity(gamma.k());
    let mut substep = Vec::with_capacity(gamma.k());
    for k in 0..gamma.k() {
        let w = gamma.column(k);
        let total: f64 = w.iter().sum();
        let required = (d + 1) as f64;
        if !(total >= required) {
            return Err(Error::ClusterCollapse {
                component: k,
                weight: total,
                required,
            });
        }
        let mut marginals = Vec::with_capacity(d);
        for (col, mesh) in columns.iter().zip(meshes) {
            let sample = WeightedSample::new(col.clone(), w.clone())?;
            marginals.push(match cfg.marginal_method {
                Estimator::Bshqi => Marginal::Bshqi(BshqiDensity::fit(&sample, mesh)?),
                Estimator::Kernel => Marginal::Kernel(NaiveKernelDensity::fit(&sample, mesh.h())?),
            });
        }
        let mut u = Vec::with_capacity(n * d);
        for row in x.rows() {
            u.extend(row.iter().zip(&marginals).map(|(&v, m)| m.cdf(v)));
        }
        let clamp = if cfg.adaptive_clamp {
            cfg.clamp.max(0.5 / (total + 1.0))
        } else {
            cfg.clamp
        };
        let u = PseudoObservations::new(u, d, clamp)?;
        let fit = best_fit(&cfg.families, &u, &w, &cfg.fit)?;
        substep.push((fit.initial_loglik, fit.loglik));
        components.push(MixtureComponent {
            pi: total / n as f64,
            copula: fit.spec,
            marginals,
            clamp,
        });
    }
    Ok(MStep {
        components,
        copula_substep: substep,
    })
}

fn model_from(components: Vec<MixtureComponent>, cfg: &MixtureConfig, seed: u64) -> MixtureModel {
    MixtureModel {
        k: components.len(),
        components,
        loglik_trace: Vec::new(),
        n_iter: 0,
        converged: false,
        seed,
        config: cfg.clone(),
        history: Vec::new(),
    }
}

/// Closed-form mixing weights, weighted marginal refits and per-cluster
/// copula selection.
pub fn m_step(x: &DataMatrix, gamma: &Responsibilities, cfg: &MixtureConfig) -> Result<MixtureModel> {
    cfg.validate()?;
    let columns: Vec<Vec<f64>> = (0..x.ncols()).map(|j| x.column(j)).collect();
    let meshes = shared_meshes(x, cfg.bins)?;
    let m = m_step_inner(x, &columns, &meshes, gamma, cfg)?;
    Ok(model_from(m.components, cfg, 0))
}

/// Plain Lloyd's k-means from `k` distinct random rows.
pub fn kmeans_labels(x: &DataMatrix, k: usize, rng: &mut SeededRng, max_iter: usize) -> Vec<usize> {
    let n = x.nrows();
    let d = x.ncols();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut centers: Vec<Vec<f64>> = idx[..k.min(n)].iter().map(|&i| x.row(i).to_vec()).collect();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, row) in x.rows().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (c, ctr) in centers.iter().enumerate() {
                let dist: f64 = row.iter().zip(ctr).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; d]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (row, &l) in x.rows().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        for (c, ctr) in centers.iter_mut().enumerate() {
            if counts[c] > 0 {
                for (cv, s) in ctr.iter_mut().zip(&sums[c]) {
                    *cv = s / counts[c] as f64;
                }
            }
        }
    }
    labels
}

/// Columns rescaled to zero mean and unit variance; constant columns are
/// only centred.
fn standardized(x: &DataMatrix) -> DataMatrix {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    for row in x.rows() {
        for j in 0..d {
            sd[j] += (row[j] - mean[j]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let data = x
        .rows()
        .flat_map(|row| (0..d).map(|j| (row[j] - mean[j]) / sd[j]).collect::<Vec<_>>())
        .collect();
    DataMatrix::new(data, d).expect("standardised data stay finite")
}

/// Distances are taken on standardised columns so the partition does not
/// depend on feature units; the rest of the model is invariant to them.
fn initial_partition(z: &DataMatrix, cfg: &MixtureConfig, rng: &mut SeededRng) -> Vec<usize> {
    match cfg.init {
        Init::Random => kmeans_labels(z, cfg.k, rng, 1),
        Init::KMeans => kmeans_labels(z, cfg.k, rng, 300),
    }
}

struct Context<'a> {
    x: &'a DataMatrix,
    columns: Vec<Vec<f64>>,
    /// standardised copy used only for the initial partitions
    z: DataMatrix,
    meshes: Vec<UniformMesh>,
    cfg: &'a MixtureConfig,
}

impl Context<'_> {
    fn m_step(&self, gamma: &Responsibilities) -> Result<MStep> {
        m_step_inner(self.x, &self.columns, &self.meshes, gamma, self.cfg)
    }

    /// Best of `restarts` initial partitions by log-likelihood; a partition
    /// that collapses is redrawn.
    fn initialise(&self, rng: &mut SeededRng) -> Result<(Vec<MixtureComponent>, f64)> {
        let mut best: Option<(Vec<MixtureComponent>, f64)> = None;
        let mut last_err = None;
        for _ in 0..self.cfg.restarts {
            for _attempt in 0..=self.cfg.rescues {
                let labels = initial_partition(&self.z, self.cfg, rng);
                let gamma = Responsibilities::one_hot(&labels, self.cfg.k)?;
                match self.m_step(&gamma) {
                    Ok(m) => {
                        let model = model_from(m.components, self.cfg, 0);
                        let ll = log_likelihood(&model, self.x);
                        if best.as_ref().is_none_or(|b| ll > b.1) {
                            best = Some((model.components, ll));
                        }
                        break;
                    }
                    Err(e @ Error::ClusterCollapse { .. }) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
            }
        }
        best.ok_or_else(|| last_err.unwrap_or_else(|| Error::FitFailed("initialisation failed".into())))
    }
}

fn check_shape(x: &DataMatrix, cfg: &MixtureConfig) -> Result<()> {
    cfg.validate()?;
    let n = x.nrows();
    let d = x.ncols();
    if d < 2 {
        return Err(Error::InvalidParameter(format!("copula mixtures need D >= 2, got {d}")));
    }
    if n < cfg.k * (d + 1) {
        return Err(Error::InvalidParameter(format!(
            "K = {} needs at least {} rows, got {n}",
            cfg.k,
            cfg.k * (d + 1)
        )));
    }
    Ok(())
}

impl<'a> Context<'a> {
    fn new(x: &'a DataMatrix, cfg: &'a MixtureConfig) -> Result<Self> {
        Ok(Context {
            x,
            columns: (0..x.ncols()).map(|j| x.column(j)).collect(),
            z: standardized(x),
            meshes: shared_meshes(x, cfg.bins)?,
            cfg,
        })
    }

    /// Alternates E- and M-steps from `model` until the relative change of
    /// the log-likelihood drops below `tol`; collapse errors pass through to
    /// the caller.
    fn iterate(&self, mut model: MixtureModel) -> Result<MixtureModel> {
        let cfg = self.cfg;
        let mut prev = log_likelihood(&model, self.x);
        model.loglik_trace = vec![prev];
        for it in 1..=cfg.max_iter {
            let (gamma, _) = e_step_with_loglik(&model, self.x)?;
            let m = self.m_step(&gamma)?;
            model.components = m.components;
            let ll = log_likelihood(&model, self.x);
            model.loglik_trace.push(ll);
            model.n_iter = it;
            model.history.push(IterationStats {
                loglik: ll,
                pi_sum_error: (model.components.iter().map(|c| c.pi).sum::<f64>() - 1.0).abs(),
                gamma_row_error: gamma.max_row_error(),
                copula_substep: m.copula_substep,
            });
            if !ll.is_finite() {
                return Err(Error::FitFailed(format!("log-likelihood became {ll} at iteration {it}")));
            }
            if (ll - prev).abs() / (1.0 + ll.abs()) < cfg.tol {
                model.converged = true;
                break;
            }
            prev = ll;
        }
        Ok(model)
    }
}

/// Full EM fit: best of `restarts` initial partitions, then EM. A cluster
/// collapse during EM restarts from a fresh partition, at most `rescues`
/// times.
pub fn fit(x: &DataMatrix, cfg: &MixtureConfig, seed: u64) -> Result<MixtureModel> {
    check_shape(x, cfg)?;
    let ctx = Context::new(x, cfg)?;
    let mut rescues_left = cfg.rescues;
    let mut attempt = 0u64;
    loop {
        let mut rng = substream(seed, attempt);
        let (components, _) = ctx.initialise(&mut rng)?;
        match ctx.iterate(model_from(components, cfg, seed)) {
            Err(Error::ClusterCollapse { .. }) if rescues_left > 0 => {
                rescues_left -= 1;
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// EM started from the given responsibilities instead of random partitions.
pub fn fit_from(x: &DataMatrix, gamma: &Responsibilities, cfg: &MixtureConfig, seed: u64) -> Result<MixtureModel> {
    check_shape(x, cfg)?;
    if gamma.k() != cfg.k {
        return Err(Error::DimensionMismatch {
            expected: cfg.k,
            got: gamma.k(),
        });
    }
    let ctx = Context::new(x, cfg)?;
    let start = ctx.m_step(gamma)?;
    ctx.iterate(model_from(start.components, cfg, seed))
}

impl MixtureModel {
    pub fn predict(&self, x: &DataMatrix) -> Result<Vec<usize>> {
        predict(self, x)
    }

    pub fn log_likelihood(&self, x: &DataMatrix) -> f64 {
        log_likelihood(self, x)
    }

    pub fn final_loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::GaussianCopula;

    fn uniform_marginal() -> Marginal {
        let mesh = UniformMesh::new(0.0, 1.0, 4).unwrap();
        Marginal::Bshqi(BshqiDensity::from_coefficients(mesh, vec![1.0; 6]).unwrap())
    }

    fn toy(components: Vec<MixtureComponent>) -> MixtureModel {
        model_from(components, &MixtureConfig::default(), 0)
    }

    #[test]
    fn uniform_marginals_pass_copula_through() {
        let c = MixtureComponent {
            pi: 1.0,
            copula: CopulaSpec::Clayton { theta: 2.0 },
            marginals: vec![uniform_marginal(), uniform_marginal()],
            clamp: DEFAULT_CLAMP,
        };
        let expected = CopulaSpec::Clayton { theta: 2.0 }.log_density(&[0.5, 0.5]).unwrap();
        assert!((component_log_density(&c, &[0.5, 0.5]) - expected).abs() < 1e-12);
        // (1+θ)(uv)^{-θ-1}(u^{-θ}+v^{-θ}-1)^{-1/θ-2} at (1/2, 1/2)
        let closed = (3.0f64).ln() + 2.0 * 2f64.ln() * 3.0 - 2.5 * (2.0 * 4.0 - 1.0f64).ln();
        assert!((expected - closed).abs() < 1e-12);
    }

    #[test]
    fn identical_components_split_evenly() {
        let c = MixtureComponent {
            pi: 0.5,
            copula: CopulaSpec::Gaussian(GaussianCopula::identity(2)),
            marginals: vec![uniform_marginal(), uniform_marginal()],
            clamp: DEFAULT_CLAMP,
        };
        let model = toy(vec![c.clone(), c]);
        let x = DataMatrix::new(vec![0.1, 0.2, 0.7, 0.9], 2).unwrap();
        let g = e_step(&model, &x).unwrap();
        assert!(g.gamma.iter().all(|&v| v == 0.5));
        assert_eq!(predict(&model, &x).unwrap(), vec![0, 0]);
    }

    #[test]
    fn two_component_hand_computation() {
        let a = MixtureComponent {
            pi: 0.3,
            copula: CopulaSpec::Clayton { theta: 2.0 },
            marginals: vec![uniform_marginal(), uniform_marginal()],
            clamp: DEFAULT_CLAMP,
        };
        let b = MixtureComponent {
            pi: 0.7,
            copula: CopulaSpec::Frank { theta: -3.0 },
            marginals: vec![uniform_marginal(), uniform_marginal()],
            clamp: DEFAULT_CLAMP,
        };
        let model = toy(vec![a, b]);
        let pts = [[0.2, 0.25], [0.8, 0.1], [0.5, 0.6]];
        let x = DataMatrix::from_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let (g, ll) = e_step_with_loglik(&model, &x).unwrap();
        let mut hand_ll = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let ca = CopulaSpec::Clayton { theta: 2.0 }.log_density(p).unwrap().exp();
            let cb = CopulaSpec::Frank { theta: -3.0 }.log_density(p).unwrap().exp();
            let mix = 0.3 * ca + 0.7 * cb;
            assert!((g.row(i)[0] - 0.3 * ca / mix).abs() < 1e-14);
            hand_ll += mix.ln();
        }
        assert!((ll - hand_ll).abs() < 1e-12);
        assert!((log_likelihood(&model, &x) - hand_ll).abs() < 1e-12);
    }

    #[test]
    fn one_hot_partition_gives_cluster_fractions() {
        let data = crate::datagen::gen_synthetic(crate::datagen::Synthetic::X1, 1).unwrap();
        let g = Responsibilities::one_hot(&data.labels, 4).unwrap();
        let model = m_step(&data.x, &g, &MixtureConfig { k: 4, ..Default::default() }).unwrap();
        let pis: Vec<f64> = model.components.iter().map(|c| c.pi).collect();
        assert_eq!(pis, vec![500.0 / 1500.0, 500.0 / 1500.0, 300.0 / 1500.0, 200.0 / 1500.0]);
    }

    #[test]
    fn collapse_detected() {
        let data = crate::datagen::gen_synthetic(crate::datagen::Synthetic::X1, 1).unwrap();
        let mut labels = vec![0; data.x.nrows()];
        labels[0] = 1;
        labels[1] = 1;
        let g = Responsibilities::one_hot(&labels, 2).unwrap();
        let err = m_step(&data.x, &g, &MixtureConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ClusterCollapse { component: 1, .. }));
    }
}

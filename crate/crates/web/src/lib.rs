//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns JSON (or a flat array) so the page needs no glue
//! beyond `JSON.parse`. The work is done by plain Rust functions that are
//! also tested natively.

use copmix::bshqi::BshqiDensity;
use copmix::copula::{parse_families, CopulaSpec, Family, GaussianCopula};
use copmix::datagen::{gen_synthetic, gen_univariate, Synthetic, Univariate};
use copmix::mesh::{BinsRule, UniformMesh, WeightedSample};
use copmix::metrics::external_metrics;
use copmix::mixture::{fit, Init, MixtureConfig};
use copmix::stat_tests::ks_test;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 200_000;

#[derive(Serialize)]
pub struct DensityPlot {
    pub x: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub truth: Vec<f64>,
    pub intervals: usize,
    pub h: f64,
    pub ks_pvalue: f64,
}

/// Samples `n` points from `dist`, fits the spline estimator and tabulates
/// it next to the true density.
pub fn density_plot(dist: &str, n: usize, bins: &str, seed: u64) -> Result<DensityPlot, String> {
    if !(2..=MAX_N).contains(&n) {
        return Err(format!("n must lie in [2, {MAX_N}]"));
    }
    let truth: Univariate = dist.parse().map_err(|e: copmix::Error| e.to_string())?;
    let rule: BinsRule = bins.parse().map_err(|e: copmix::Error| e.to_string())?;
    let values = gen_univariate(&truth, n, seed).map_err(|e| e.to_string())?;
    let mesh = UniformMesh::from_values(&values, rule, 0.0).map_err(|e| e.to_string())?;
    let sample = WeightedSample::unweighted(values).map_err(|e| e.to_string())?;
    let est = BshqiDensity::fit(&sample, &mesh).map_err(|e| e.to_string())?;
    let fresh = gen_univariate(&truth, n, seed.wrapping_add(1)).map_err(|e| e.to_string())?;
    let ks = ks_test(&fresh, |x| est.cdf(x));

    let m = 400;
    let (a, b) = (mesh.a(), mesh.b());
    let x: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
    Ok(DensityPlot {
        pdf: x.iter().map(|&v| est.pdf(v)).collect(),
        cdf: x.iter().map(|&v| est.cdf(v)).collect(),
        truth: x.iter().map(|&v| truth.pdf(v)).collect(),
        x,
        intervals: mesh.intervals(),
        h: mesh.h(),
        ks_pvalue: ks.pvalue,
    })
}

/// `n` bivariate copula draws as a flat `[u0, v0, u1, v1, ...]` array. For
/// the Gaussian family `param` is the correlation.
pub fn copula_points(family: &str, param: f64, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    if !(1..=MAX_N).contains(&n) {
        return Err(format!("n must lie in [1, {MAX_N}]"));
    }
    let family: Family = family.parse().map_err(|e: copmix::Error| e.to_string())?;
    let spec = match family {
        Family::Gaussian => GaussianCopula::new(vec![vec![1.0, param], vec![param, 1.0]])
            .map(CopulaSpec::Gaussian)
            .map_err(|e| e.to_string())?,
        f => CopulaSpec::archimedean(f, param).map_err(|e| e.to_string())?,
    };
    let u = spec.sample_seeded(2, n, seed).map_err(|e| e.to_string())?;
    Ok(u.as_slice().to_vec())
}

#[derive(Serialize)]
pub struct ClusterComponent {
    pub pi: f64,
    pub family: String,
    pub parameter: Option<f64>,
}

#[derive(Serialize)]
pub struct ClusterResult {
    /// first two coordinates of every row
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<usize>,
    pub truth: Vec<usize>,
    pub components: Vec<ClusterComponent>,
    pub loglik: f64,
    pub adjusted_rand: f64,
}

/// Generates a synthetic dataset and clusters it.
pub fn cluster_dataset(dataset: &str, k: usize, families: &str, init: &str, seed: u64) -> Result<ClusterResult, String> {
    let which: Synthetic = dataset.parse().map_err(|e: copmix::Error| e.to_string())?;
    let init: Init = init.parse().map_err(|e: copmix::Error| e.to_string())?;
    let families = parse_families(families).map_err(|e| e.to_string())?;
    let data = gen_synthetic(which, seed).map_err(|e| e.to_string())?;
    let cfg = MixtureConfig {
        k,
        families,
        init,
        ..Default::default()
    };
    let model = fit(&data.x, &cfg, seed).map_err(|e| e.to_string())?;
    let labels = model.predict(&data.x).map_err(|e| e.to_string())?;
    let ari = external_metrics(&data.labels, &labels)
        .map_err(|e| e.to_string())?
        .adjusted_rand;
    Ok(ClusterResult {
        x: data.x.column(0),
        y: data.x.column(1),
        labels,
        truth: data.labels,
        components: model
            .components
            .iter()
            .map(|c| ClusterComponent {
                pi: c.pi,
                family: c.copula.family().name().to_string(),
                parameter: c.copula.theta(),
            })
            .collect(),
        loglik: model.final_loglik(),
        adjusted_rand: ari,
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = densityPlot)]
pub fn density_plot_js(dist: &str, n: usize, bins: &str, seed: u32) -> Result<String, JsError> {
    to_json(density_plot(dist, n, bins, seed as u64))
}

#[wasm_bindgen(js_name = copulaPoints)]
pub fn copula_points_js(family: &str, param: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    copula_points(family, param, n, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = clusterDataset)]
pub fn cluster_dataset_js(dataset: &str, k: usize, families: &str, init: &str, seed: u32) -> Result<String, JsError> {
    to_json(cluster_dataset(dataset, k, families, init, seed as u64))
}

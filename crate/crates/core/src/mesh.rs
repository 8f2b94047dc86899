//! Uniform meshes, weighted empirical CDFs sampled on them, and the
//! finite-difference derivative estimates used by the spline coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule used to choose the number of subintervals from the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinsRule {
    /// `2 * ceil(n^(1/3))`.
    #[default]
    Rice,
    /// `ceil(n^(1/3))`.
    CubeRoot,
    Explicit(usize),
}

impl BinsRule {
    /// Number of subintervals for a sample of size `n`; never below 2.
    pub fn intervals(self, n: usize) -> Result<usize> {
        let count = match self {
            BinsRule::Rice => 2 * ceil_cbrt(n),
            BinsRule::CubeRoot => ceil_cbrt(n),
            BinsRule::Explicit(k) => {
                if k < 2 {
                    return Err(Error::InvalidMesh(format!(
                        "explicit interval count {k} is below 2"
                    )));
                }
                k
            }
        };
        Ok(count.max(2))
    }
}

impl std::str::FromStr for BinsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rice" => Ok(BinsRule::Rice),
            "cuberoot" | "cube-root" | "cbrt" => Ok(BinsRule::CubeRoot),
            other => other
                .parse::<usize>()
                .map(BinsRule::Explicit)
                .map_err(|_| Error::InvalidParameter(format!("unknown bins rule `{s}`"))),
        }
    }
}

/// Smallest integer `c` with `c^3 >= n`.
fn ceil_cbrt(n: usize) -> usize {
    let mut c = (n as f64).cbrt().round() as usize;
    while c * c * c < n {
        c += 1;
    }
    while c > 0 && (c - 1) * (c - 1) * (c - 1) >= n {
        c -= 1;
    }
    c
}

/// `a = x_0 < x_1 < ... < x_N = b` with constant step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformMesh {
    a: f64,
    b: f64,
    intervals: usize,
    h: f64,
}

impl UniformMesh {
    pub fn new(a: f64, b: f64, intervals: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidMesh(format!("need finite a < b, got [{a}, {b}]")));
        }
        if intervals < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 subintervals, got {intervals}"
            )));
        }
        let h = (b - a) / intervals as f64;
        Ok(Self { a, b, intervals, h })
    }

    /// Mesh spanning the data with `padding * range` added on both sides.
    pub fn from_values(values: &[f64], rule: BinsRule, padding: f64) -> Result<Self> {
        build_mesh(values, rule, padding)
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of subintervals `N`.
    #[inline]
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Mesh point `x_j`; `x_N` is exactly `b`.
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        if j >= self.intervals {
            self.b
        } else {
            self.a + j as f64 * self.h
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.intervals).map(|j| self.point(j)).collect()
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Cell index `i` (so `x` is in `[x_i, x_{i+1}]`) and the local
    /// coordinate `t = (x - x_i)/h` in `[0, 1]`. Caller guarantees `x` in `[a, b]`.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.a) / self.h;
        let i = (s.floor().max(0.0) as usize).min(self.intervals - 1);
        let t = (s - i as f64).clamp(0.0, 1.0);
        (i, t)
    }
}

/// Observations paired with nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!("value at index {i} is not finite")));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidSample(format!(
                "weight at index {i} is negative or not finite"
            )));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidSample("weights sum to zero".into()));
        }
        Ok(Self { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Discrete CDF at the mesh points plus its finite-difference first and
/// second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfGrid {
    pub mesh: UniformMesh,
    pub cdf: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl EcdfGrid {
    /// Builds the derivative estimates from CDF values at the mesh points.
    pub fn from_cdf(mesh: UniformMesh, cdf: Vec<f64>) -> Result<Self> {
        let n = mesh.intervals();
        if cdf.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: cdf.len(),
            });
        }
        let h = mesh.h();
        let mut d1 = vec![0.0; n + 1];
        let mut d2 = vec![0.0; n + 1];
        d1[0] = (cdf[1] - cdf[0]) / h;
        d1[n] = (cdf[n] - cdf[n - 1]) / h;
        for j in 1..n {
            d1[j] = (cdf[j + 1] - cdf[j - 1]) / (2.0 * h);
            d2[j] = (cdf[j + 1] - 2.0 * cdf[j] + cdf[j - 1]) / (h * h);
        }
        Ok(Self { mesh, cdf, d1, d2 })
    }
}

/// Mesh over `[min - padding*range, max + padding*range]` with the interval
/// count picked by `rule` from the sample size.
pub fn build_mesh(values: &[f64], rule: BinsRule, padding: f64) -> Result<UniformMesh> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(padding.is_finite() && padding >= 0.0) {
        return Err(Error::InvalidParameter(format!("padding must be >= 0, got {padding}")));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidSample("non-finite value".into()));
    }
    let mut range = hi - lo;
    if range == 0.0 {
        if padding == 0.0 {
            return Err(Error::DegenerateSupport);
        }
        range = 1.0;
    }
    let intervals = rule.intervals(values.len())?;
    UniformMesh::new(lo - padding * range, hi + padding * range, intervals)
}

/// Weighted ECDF sampled at every mesh point.
///
/// `F[j]` is the weight fraction with `X_i <= x_j` for `j >= 1`; observations
/// sitting exactly on `a` belong to the first cell, so `F[0] = 0`.
pub fn weighted_ecdf(sample: &WeightedSample, mesh: &UniformMesh) -> Result<EcdfGrid> {
    let n = mesh.intervals();
    let mut mass = vec![0.0; n + 1];
    for (i, (&x, &w)) in sample.values().iter().zip(sample.weights()).enumerate() {
        if !mesh.contains(x) {
            return Err(Error::OutOfSupport {
                index: i,
                value: x,
                a: mesh.a(),
                b: mesh.b(),
            });
        }
        if w == 0.0 {
            continue;
        }
        // smallest j >= 1 with x <= x_j
        let (cell, t) = mesh.locate(x);
        let mut j = if t == 0.0 && cell > 0 { cell } else { cell + 1 };
        while j > 1 && x <= mesh.point(j - 1) {
            j -= 1;
        }
        while j < n && x > mesh.point(j) {
            j += 1;
        }
        mass[j] += w;
    }
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for m in &mass {
        acc += m;
        cdf.push(acc / total);
    }
    // accumulated rounding must not leave the last value off 1
    cdf[n] = 1.0;
    EcdfGrid::from_cdf(*mesh, cdf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rice_rule_at_two_to_fifteen() {
        assert_eq!(BinsRule::Rice.intervals(1 << 15).unwrap(), 64);
        assert_eq!(BinsRule::CubeRoot.intervals(8).unwrap(), 2);
        assert_eq!(BinsRule::CubeRoot.intervals(9).unwrap(), 3);
        assert_eq!(BinsRule::CubeRoot.intervals(1).unwrap(), 2);
        assert!(BinsRule::Explicit(1).intervals(10).is_err());
    }

    #[test]
    fn padded_explicit_mesh() {
        let m = build_mesh(&[0.0, 10.0], BinsRule::Explicit(4), 0.05).unwrap();
        assert!((m.a() + 0.5).abs() < 1e-15);
        assert!((m.b() - 10.5).abs() < 1e-15);
        assert!((m.h() - 2.75).abs() < 1e-15);
        assert!((m.h() * 4.0 - (m.b() - m.a())).abs() <= 1e-12 * (m.b() - m.a()));
    }

    #[test]
    fn mesh_errors() {
        assert_eq!(build_mesh(&[], BinsRule::Rice, 0.0), Err(Error::EmptyInput));
        assert_eq!(build_mesh(&[3.0, 3.0], BinsRule::Rice, 0.0), Err(Error::DegenerateSupport));
        let m = build_mesh(&[3.0, 3.0], BinsRule::Explicit(2), 0.1).unwrap();
        assert!((m.a() - 2.9).abs() < 1e-12 && (m.b() - 3.1).abs() < 1e-12);
    }

    #[test]
    fn single_point_in_first_cell() {
        let mesh = UniformMesh::new(0.0, 4.0, 4).unwrap();
        let s = WeightedSample::unweighted(vec![0.5]).unwrap();
        let g = weighted_ecdf(&s, &mesh).unwrap();
        assert_eq!(g.cdf, vec![0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.d2[0], 0.0);
        assert_eq!(g.d2[4], 0.0);
    }

    #[test]
    fn ties_at_mesh_points_are_closed() {
        let mesh = UniformMesh::new(0.0, 4.0, 4).unwrap();
        let s = WeightedSample::unweighted(vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let g = weighted_ecdf(&s, &mesh).unwrap();
        // 0.0 and 1.0 are both <= x_1
        assert_eq!(g.cdf, vec![0.0, 0.5, 0.75, 0.75, 1.0]);
    }

    #[test]
    fn weights_match_repetition() {
        let mesh = UniformMesh::new(0.0, 1.0, 5).unwrap();
        let w = WeightedSample::new(vec![0.3, 0.75], vec![2.0, 1.0]).unwrap();
        let r = WeightedSample::unweighted(vec![0.3, 0.3, 0.75]).unwrap();
        let gw = weighted_ecdf(&w, &mesh).unwrap();
        let gr = weighted_ecdf(&r, &mesh).unwrap();
        for j in 0..=5 {
            assert!((gw.cdf[j] - gr.cdf[j]).abs() < 1e-15);
            assert!((gw.d1[j] - gr.d1[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_points_give_linear_cdf() {
        // 10 points at cell midpoints of a 10-cell mesh on [0, 1]
        let mesh = UniformMesh::new(0.0, 1.0, 10).unwrap();
        let vals: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        let g = weighted_ecdf(&WeightedSample::unweighted(vals.clone()).unwrap(), &mesh).unwrap();
        for j in 0..=10 {
            let brute = vals.iter().filter(|&&x| j > 0 && x <= mesh.point(j)).count() as f64 / 10.0;
            assert!((g.cdf[j] - brute).abs() < 1e-15);
            assert!((g.cdf[j] - j as f64 / 10.0).abs() < 1e-12);
        }
        for j in 1..10 {
            assert!((g.d1[j] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_value_reports_index() {
        let mesh = UniformMesh::new(0.0, 1.0, 4).unwrap();
        let s = WeightedSample::unweighted(vec![0.2, 1.5]).unwrap();
        match weighted_ecdf(&s, &mesh) {
            Err(Error::OutOfSupport { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sample_validation() {
        assert!(WeightedSample::new(vec![], vec![]).is_err());
        assert!(WeightedSample::new(vec![1.0], vec![0.0]).is_err());
        assert!(WeightedSample::new(vec![1.0], vec![-1.0]).is_err());
        assert!(WeightedSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }
}

//! Quadratic B-spline Hermite quasi-interpolant of the empirical CDF.
//!
//! The density estimate is `f(x) = sum_j lambda_j B_j(x)` where the `B_j`,
//! `j = -2..N-1`, are the quadratic B-splines on the mesh knots with the
//! boundary knots tripled at `a` and `b`. Coefficients are linear
//! combinations of the finite-difference derivatives of the ECDF, so no
//! linear system is solved. The CDF is the exact antiderivative of the
//! spline.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mesh::{weighted_ecdf, EcdfGrid, UniformMesh, WeightedSample};

/// Quadratic B-spline basis on a uniform mesh with coincident boundary knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSplineBasis2 {
    mesh: UniformMesh,
}

impl BSplineBasis2 {
    pub fn new(mesh: UniformMesh) -> Self {
        Self { mesh }
    }

    pub fn mesh(&self) -> &UniformMesh {
        &self.mesh
    }

    /// Number of basis functions, `N + 2`.
    pub fn len(&self) -> usize {
        self.mesh.intervals() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Knot `tau_k` for `k = -2..=N+2`.
    pub fn knot(&self, k: isize) -> f64 {
        let n = self.mesh.intervals() as isize;
        self.mesh.point(k.clamp(0, n) as usize)
    }

    /// Extended knot vector `tau_{-2}, ..., tau_{N+2}`.
    pub fn extended_knots(&self) -> Vec<f64> {
        let n = self.mesh.intervals() as isize;
        (-2..=n + 2).map(|k| self.knot(k)).collect()
    }

    /// Support `[tau_j, tau_{j+3}]` of `B_j`, with `j` in `-2..=N-1`.
    pub fn support(&self, j: isize) -> (f64, f64) {
        (self.knot(j), self.knot(j + 3))
    }

    /// `int B_j = (tau_{j+3} - tau_j) / 3`, indexed from `j = -2`.
    pub fn integral_weights(&self) -> Vec<f64> {
        let n = self.mesh.intervals() as isize;
        (-2..n)
            .map(|j| {
                let (lo, hi) = self.support(j);
                (hi - lo) / 3.0
            })
            .collect()
    }

    /// The three nonzero basis values on the cell containing `x`.
    ///
    /// Returns `(i, [B_{i-2}, B_{i-1}, B_i])`; array slot `k` corresponds to
    /// coefficient index `i + k` when coefficients are stored from `j = -2`.
    #[inline]
    pub fn eval_local(&self, x: f64) -> (usize, [f64; 3]) {
        let (i, _) = self.mesh.locate(x);
        (i, self.cell_values(i, x))
    }

    #[inline]
    fn cell_values(&self, i: usize, x: f64) -> [f64; 3] {
        let ii = i as isize;
        let t0 = self.knot(ii - 1);
        let t1 = self.knot(ii);
        let t2 = self.knot(ii + 1);
        let t3 = self.knot(ii + 2);
        let left = (t2 - x) / (t2 - t1);
        let right = (x - t1) / (t2 - t1);
        let first = (t2 - x) / (t2 - t0) * left;
        let middle = (x - t0) / (t2 - t0) * left + (t3 - x) / (t3 - t1) * right;
        let last = (x - t1) / (t3 - t1) * right;
        [first, middle, last]
    }

    /// Value of `B_j` at `x`; zero outside `[a, b]`.
    pub fn value(&self, j: isize, x: f64) -> f64 {
        if !self.mesh.contains(x) {
            return 0.0;
        }
        let (i, vals) = self.eval_local(x);
        let k = j - (i as isize - 2);
        if (0..3).contains(&k) {
            vals[k as usize]
        } else {
            0.0
        }
    }
}

fn check_grid(grid: &EcdfGrid) -> Result<usize> {
    let n = grid.mesh.intervals();
    if n < 2 {
        return Err(Error::InvalidMesh("need N >= 2".into()));
    }
    for (name, v) in [("cdf", &grid.cdf), ("d1", &grid.d1), ("d2", &grid.d2)] {
        if v.len() != n + 1 {
            return Err(Error::InvalidMesh(format!(
                "{name} has length {}, expected {}",
                v.len(),
                n + 1
            )));
        }
    }
    Ok(n)
}

/// Coefficients from first and second derivative estimates at the mesh
/// points; stored from `j = -2` to `j = N-1`.
pub fn coefficients_hermite(grid: &EcdfGrid) -> Result<Vec<f64>> {
    let n = check_grid(grid)?;
    let h = grid.mesh.h();
    let (d1, d2) = (&grid.d1, &grid.d2);
    let mut lambda = Vec::with_capacity(n + 2);
    lambda.push(d1[0]);
    for j in -1..(n as isize - 1) {
        let p = (j + 1) as usize;
        let q = (j + 2) as usize;
        lambda.push(0.5 * (d1[p] + d1[q]) - 0.25 * h * (-d2[p] + d2[q]));
    }
    lambda.push(d1[n]);
    Ok(lambda)
}

/// Coefficients as scaled first differences of the CDF at the mesh points.
pub fn coefficients_simplified(grid: &EcdfGrid) -> Result<Vec<f64>> {
    let n = check_grid(grid)?;
    let h = grid.mesh.h();
    let f = &grid.cdf;
    let mut lambda = Vec::with_capacity(n + 2);
    lambda.push(0.0);
    for j in -1..(n as isize - 1) {
        lambda.push((f[(j + 2) as usize] - f[(j + 1) as usize]) / h);
    }
    lambda[0] = lambda[1];
    lambda.push(lambda[n]);
    Ok(lambda)
}

/// Fitted quadratic-spline density.
#[derive(Debug, Clone, PartialEq)]
pub struct BshqiDensity {
    basis: BSplineBasis2,
    lambda: Vec<f64>,
    /// `cumulative[i] = int_a^{x_i} f`.
    cumulative: Vec<f64>,
}

impl BshqiDensity {
    pub fn from_coefficients(mesh: UniformMesh, lambda: Vec<f64>) -> Result<Self> {
        let basis = BSplineBasis2::new(mesh);
        if lambda.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: lambda.len(),
            });
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        let mut model = Self {
            basis,
            lambda,
            cumulative: Vec::new(),
        };
        model.cumulative = model.cell_cumulative();
        Ok(model)
    }

    pub fn from_grid(grid: &EcdfGrid) -> Result<Self> {
        let lambda = coefficients_simplified(grid)?;
        Self::from_coefficients(grid.mesh, lambda)
    }

    /// Weighted ECDF on `mesh`, then the quasi-interpolant.
    pub fn fit(sample: &WeightedSample, mesh: &UniformMesh) -> Result<Self> {
        Self::from_grid(&weighted_ecdf(sample, mesh)?)
    }

    pub fn basis(&self) -> &BSplineBasis2 {
        &self.basis
    }

    pub fn mesh(&self) -> &UniformMesh {
        self.basis.mesh()
    }

    /// Coefficients `lambda_{-2}, ..., lambda_{N-1}`.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `sum_j lambda_j * int B_j`.
    pub fn total_mass(&self) -> f64 {
        self.lambda
            .iter()
            .zip(self.basis.integral_weights())
            .map(|(l, w)| l * w)
            .sum()
    }

    #[inline]
    fn cell_pdf(&self, i: usize, x: f64) -> f64 {
        let v = self.basis.cell_values(i, x);
        self.lambda[i] * v[0] + self.lambda[i + 1] * v[1] + self.lambda[i + 2] * v[2]
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !self.mesh().contains(x) {
            return 0.0;
        }
        let (i, _) = self.mesh().locate(x);
        self.cell_pdf(i, x).max(0.0)
    }

    /// Integral of the density over `[x_i, x]` inside cell `i`; Simpson's
    /// rule is exact for the quadratic piece.
    #[inline]
    fn cell_integral(&self, i: usize, x: f64) -> f64 {
        let lo = self.mesh().point(i);
        let w = x - lo;
        if w <= 0.0 {
            return 0.0;
        }
        let mid = lo + 0.5 * w;
        w / 6.0 * (self.cell_pdf(i, lo) + 4.0 * self.cell_pdf(i, mid) + self.cell_pdf(i, x))
    }

    fn cell_cumulative(&self) -> Vec<f64> {
        let n = self.mesh().intervals();
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 0..n {
            acc += self.cell_integral(i, self.mesh().point(i + 1));
            cum.push(acc);
        }
        cum
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mesh = self.mesh();
        if x <= mesh.a() {
            return 0.0;
        }
        let total = self.cumulative[mesh.intervals()];
        if x >= mesh.b() {
            return total.min(1.0);
        }
        let (i, _) = mesh.locate(x);
        (self.cumulative[i] + self.cell_integral(i, x)).clamp(0.0, 1.0)
    }
}

/// Densities that can back a mixture marginal.
pub trait Density {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
}

impl Density for BshqiDensity {
    fn pdf(&self, x: f64) -> f64 {
        BshqiDensity::pdf(self, x)
    }

    fn cdf(&self, x: f64) -> f64 {
        BshqiDensity::cdf(self, x)
    }
}

#[derive(Serialize, Deserialize)]
struct BshqiJson {
    a: f64,
    b: f64,
    #[serde(rename = "N")]
    n: usize,
    lambda: Vec<f64>,
}

impl Serialize for BshqiDensity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BshqiJson {
            a: self.mesh().a(),
            b: self.mesh().b(),
            n: self.mesh().intervals(),
            lambda: self.lambda.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BshqiDensity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BshqiJson::deserialize(d)?;
        let mesh = UniformMesh::new(raw.a, raw.b, raw.n).map_err(serde::de::Error::custom)?;
        BshqiDensity::from_coefficients(mesh, raw.lambda).map_err(serde::de::Error::custom)
    }
}

/// Uniform kernel on `[-1/2, 1/2]`.
#[inline]
pub fn uniform_kernel(u: f64) -> f64 {
    if (-0.5..=0.5).contains(&u) {
        1.0
    } else {
        0.0
    }
}

/// Naive (uniform-kernel) density estimate at `x` with bandwidth `h`.
/// Weighted samples use `sum w_i K / (h sum w_i)`.
pub fn naive_kernel_pdf(sample: &WeightedSample, h: f64, x: f64) -> f64 {
    let total = sample.total_weight();
    let hit: f64 = sample
        .values()
        .iter()
        .zip(sample.weights())
        .map(|(&xi, &w)| w * uniform_kernel((xi - x) / h))
        .sum();
    hit / (total * h)
}

/// Naive kernel estimator with O(log n) evaluation through prefix sums.
/// Its CDF is the exact integral of the box-kernel sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveKernelDensity {
    bandwidth: f64,
    sorted: Vec<f64>,
    /// prefix sums of weights and of weight*value, normalised by the total.
    cum_w: Vec<f64>,
    cum_wx: Vec<f64>,
}

impl NaiveKernelDensity {
    pub fn fit(sample: &WeightedSample, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be > 0, got {bandwidth}"
            )));
        }
        let mut pairs: Vec<(f64, f64)> = sample
            .values()
            .iter()
            .copied()
            .zip(sample.weights().iter().copied())
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut cum_w = Vec::with_capacity(pairs.len() + 1);
        let mut cum_wx = Vec::with_capacity(pairs.len() + 1);
        let (mut sw, mut swx) = (0.0, 0.0);
        cum_w.push(0.0);
        cum_wx.push(0.0);
        for &(x, w) in &pairs {
            sw += w / total;
            swx += w * x / total;
            cum_w.push(sw);
            cum_wx.push(swx);
        }
        Ok(Self {
            bandwidth,
            sorted: pairs.into_iter().map(|p| p.0).collect(),
            cum_w,
            cum_wx,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// normalised weight of observations strictly below `x`
    fn below(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v < x)
    }

    fn at_most(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }
}

impl Density for NaiveKernelDensity {
    fn pdf(&self, x: f64) -> f64 {
        let half = 0.5 * self.bandwidth;
        let lo = self.below(x - half);
        let hi = self.at_most(x + half);
        (self.cum_w[hi] - self.cum_w[lo]) / self.bandwidth
    }

    fn cdf(&self, x: f64) -> f64 {
        let half = 0.5 * self.bandwidth;
        // fully counted: X_i <= x - h/2; partially: x - h/2 < X_i < x + h/2
        let full = self.at_most(x - half);
        let part = self.below(x + half).max(full);
        let w = self.cum_w[part] - self.cum_w[full];
        let wx = self.cum_wx[part] - self.cum_wx[full];
        let partial = (w * (x + half) - wx) / self.bandwidth;
        (self.cum_w[full] + partial).clamp(0.0, 1.0)
    }
}

/// Bandwidth minimising `h^2 S1^2 + S0 / (n h)`.
pub fn optimal_bandwidth(sup_density: f64, sup_slope: f64, n: usize) -> Result<f64> {
    if !(sup_density > 0.0 && sup_slope > 0.0 && sup_density.is_finite() && sup_slope.is_finite())
    {
        return Err(Error::InvalidParameter(
            "density and slope bounds must be positive".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok((sup_density / (2.0 * n as f64 * sup_slope * sup_slope)).cbrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BinsRule, EcdfGrid};

    fn grid(cdf: Vec<f64>, a: f64, b: f64) -> EcdfGrid {
        let mesh = UniformMesh::new(a, b, cdf.len() - 1).unwrap();
        EcdfGrid::from_cdf(mesh, cdf).unwrap()
    }

    #[test]
    fn partition_of_unity_and_supports() {
        for n in [2usize, 3, 7] {
            let basis = BSplineBasis2::new(UniformMesh::new(-1.0, 2.0, n).unwrap());
            let h = basis.mesh().h();
            for k in 0..=300 {
                let x = -1.0 + 3.0 * k as f64 / 300.0;
                let s: f64 = (-2..n as isize).map(|j| basis.value(j, x)).sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} x={x} sum={s}");
                for j in -2..n as isize {
                    assert!(basis.value(j, x) >= 0.0);
                }
            }
            let len = |j: isize| {
                let (lo, hi) = basis.support(j);
                (hi - lo) / h
            };
            assert!((len(-2) - 1.0).abs() < 1e-12);
            assert!((len(-1) - 2.0).abs() < 1e-12);
            assert!((len(n as isize - 2) - 2.0).abs() < 1e-12);
            assert!((len(n as isize - 1) - 1.0).abs() < 1e-12);
            for j in 0..(n as isize - 2) {
                assert!((len(j) - 3.0).abs() < 1e-12);
            }
            assert_eq!(basis.extended_knots().len(), n + 5);
        }
    }

    #[test]
    fn simplified_direct_difference() {
        let g = grid(vec![0.0, 0.25, 0.5, 0.75, 1.0], 0.0, 4.0);
        let l = coefficients_simplified(&g).unwrap();
        assert_eq!(l.len(), 6);
        for v in &l {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let lh = coefficients_hermite(&g).unwrap();
        for (p, q) in l.iter().zip(&lh) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mass_in_last_cell() {
        // N = 4, h = 1; plugging the stencils in by hand gives
        // lambda_{-1..1} = 0 and lambda_2 = lambda_3 = 1/h.
        let g = grid(vec![0.0, 0.0, 0.0, 0.0, 1.0], 0.0, 4.0);
        let lh = coefficients_hermite(&g).unwrap();
        let expected = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        for (got, want) in lh.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{lh:?}");
        }
    }

    #[test]
    fn uniform_slope_model_is_flat() {
        let g = grid((0..=8).map(|j| j as f64 / 8.0).collect(), 2.0, 6.0);
        let m = BshqiDensity::from_grid(&g).unwrap();
        for x in [2.0, 2.1, 3.3, 4.0, 5.99, 6.0] {
            assert!((m.pdf(x) - 0.25).abs() < 1e-12);
        }
        assert_eq!(m.pdf(1.99), 0.0);
        assert_eq!(m.pdf(6.01), 0.0);
        assert!((m.cdf(4.0) - 0.5).abs() < 1e-12);
        assert!((m.cdf(6.0) - 1.0).abs() < 1e-12);
        assert_eq!(m.cdf(-10.0), 0.0);
    }

    #[test]
    fn kernel_single_hit() {
        let s = WeightedSample::unweighted(vec![0.0]).unwrap();
        assert_eq!(naive_kernel_pdf(&s, 1.0, 0.0), 1.0);
        assert_eq!(naive_kernel_pdf(&s, 1.0, 0.6), 0.0);
    }

    #[test]
    fn kernel_density_fast_path_matches_direct_count() {
        let vals = vec![0.1, 0.35, 0.36, 0.8, 0.95, 1.4, 1.41, 2.0, 2.2, 2.9];
        let s = WeightedSample::unweighted(vals.clone()).unwrap();
        let k = NaiveKernelDensity::fit(&s, 0.5).unwrap();
        for i in 0..=60 {
            let x = -0.5 + i as f64 * 0.0617;
            let count = vals.iter().filter(|&&v| (v - x).abs() <= 0.25).count() as f64;
            let direct = count / (10.0 * 0.5);
            assert!((naive_kernel_pdf(&s, 0.5, x) - direct).abs() < 1e-12);
            assert!((k.pdf(x) - direct).abs() < 1e-12);
        }
        // CDF: integral of the box sum
        let brute = |x: f64| {
            vals.iter()
                .map(|&v| ((x - v) / 0.5 + 0.5).clamp(0.0, 1.0))
                .sum::<f64>()
                / 10.0
        };
        for i in 0..=40 {
            let x = -0.5 + i as f64 * 0.09;
            assert!((k.cdf(x) - brute(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_bandwidth_values() {
        assert!((optimal_bandwidth(1.0, 1.0, 4).unwrap() - 0.5).abs() < 1e-15);
        let h1 = optimal_bandwidth(0.3, 0.7, 100).unwrap();
        let h8 = optimal_bandwidth(0.3, 0.7, 800).unwrap();
        assert!((h1 / h8 - 2.0).abs() < 1e-12);
        assert!(optimal_bandwidth(0.0, 1.0, 4).is_err());
        assert!(optimal_bandwidth(1.0, -1.0, 4).is_err());
    }

    #[test]
    fn optimal_bandwidth_matches_grid_minimiser() {
        let s0 = (2.0 * std::f64::consts::PI).powf(-0.5);
        let s1 = (2.0 * std::f64::consts::PI * std::f64::consts::E).powf(-0.5);
        let n = 1000usize;
        let obj = |h: f64| h * h * s1 * s1 + s0 / (n as f64 * h);
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..=200_000 {
            let h = k as f64 * 5e-6;
            let v = obj(h);
            if v < best.0 {
                best = (v, h);
            }
        }
        let h = optimal_bandwidth(s0, s1, n).unwrap();
        assert!((h - best.1).abs() < 1e-5, "{h} vs {}", best.1);
    }

    #[test]
    fn json_round_trip_keeps_evaluation() {
        let s = WeightedSample::unweighted(vec![0.1, 0.2, 0.22, 0.5, 0.9, 0.91]).unwrap();
        let mesh = crate::mesh::build_mesh(s.values(), BinsRule::Explicit(5), 0.0).unwrap();
        let m = BshqiDensity::fit(&s, &mesh).unwrap();
        let txt = serde_json::to_string(&m).unwrap();
        assert!(txt.contains("\"N\":5"));
        let back: BshqiDensity = serde_json::from_str(&txt).unwrap();
        for x in [0.1, 0.33, 0.7] {
            assert_eq!(m.pdf(x), back.pdf(x));
        }
    }
}

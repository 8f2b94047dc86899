use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{normal_cdf, normal_quantile};

/// Smallest admissible eigenvalue of a correlation matrix.
pub const MIN_EIGENVALUE: f64 = 1e-8;

#[derive(Serialize, Deserialize)]
struct Repr {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

/// Gaussian copula with correlation matrix `P`; the inverse, log-determinant
/// and Cholesky factor are cached at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct GaussianCopula {
    p: DMatrix<f64>,
    /// P^{-1} - I
    precision_minus_identity: DMatrix<f64>,
    log_det: f64,
    chol: DMatrix<f64>,
}

impl PartialEq for GaussianCopula {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
    }
}

impl TryFrom<Repr> for GaussianCopula {
    type Error = Error;
    fn try_from(r: Repr) -> Result<Self> {
        GaussianCopula::new(r.p)
    }
}

impl From<GaussianCopula> for Repr {
    fn from(g: GaussianCopula) -> Self {
        Repr {
            p: g.correlation_rows(),
        }
    }
}

impl GaussianCopula {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter("correlation matrix must be square".into()));
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(DMatrix::identity(dim, dim)).expect("identity is a valid correlation")
    }

    /// Validates symmetry, unit diagonal and the eigenvalue floor.
    pub fn from_matrix(p: DMatrix<f64>) -> Result<Self> {
        let d = p.nrows();
        if d < 2 || p.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "correlation matrix must be D x D with D >= 2, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("correlation matrix has non-finite entries".into()));
        }
        for i in 0..d {
            if (p[(i, i)] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter(format!("P[{i}][{i}] = {} is not 1", p[(i, i)])));
            }
            for j in 0..i {
                if (p[(i, j)] - p[(j, i)]).abs() > 1e-10 {
                    return Err(Error::InvalidParameter("correlation matrix is not symmetric".into()));
                }
            }
        }
        let mut p = (&p + p.transpose()) * 0.5;
        p.fill_diagonal(1.0);
        let min_eig = SymmetricEigen::new(p.clone()).eigenvalues.min();
        if min_eig < MIN_EIGENVALUE * (1.0 - 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "correlation matrix smallest eigenvalue {min_eig:e} is below {MIN_EIGENVALUE:e}"
            )));
        }
        let chol = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("correlation matrix is not positive definite".into()))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision_minus_identity = chol.inverse() - DMatrix::identity(d, d);
        Ok(Self {
            p,
            precision_minus_identity,
            log_det,
            chol: l,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn correlation_rows(&self) -> Vec<Vec<f64>> {
        self.p.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn log_density(&self, u: &[f64]) -> f64 {
        let y: Vec<f64> = u.iter().map(|&v| normal_quantile(v)).collect();
        self.log_density_scores(&y)
    }

    /// Log-density in terms of the normal scores `y = Φ^{-1}(u)`.
    pub fn log_density_scores(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut quad = 0.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.precision_minus_identity[(i, j)] * y[j];
            }
            quad += y[i] * acc;
        }
        -0.5 * self.log_det - 0.5 * quad
    }

    /// Bivariate CDF; higher dimensions are not supported.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if self.dim() != 2 {
            return Err(Error::Unsupported(
                "Gaussian copula CDF is only implemented for D = 2".into(),
            ));
        }
        if u.iter().any(|&v| v <= 0.0) {
            return Ok(0.0);
        }
        let (a, b) = (u[0].min(1.0), u[1].min(1.0));
        if a >= 1.0 {
            return Ok(b);
        }
        if b >= 1.0 {
            return Ok(a);
        }
        Ok(bivariate_normal_cdf(normal_quantile(a), normal_quantile(b), self.p[(0, 1)]))
    }

    pub(crate) fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &self.chol * z;
        for (o, v) in out.iter_mut().zip(y.iter()) {
            *o = normal_cdf(*v);
        }
    }
}

/// `P(X <= x, Y <= y)` for standard normals with correlation `rho`, from
/// Plackett's identity `∂Φ₂/∂ρ = φ₂`, integrated in `ρ = sin t` where the
/// integrand is smooth even as |ρ| → 1.
pub fn bivariate_normal_cdf(x: f64, y: f64, rho: f64) -> f64 {
    let base = normal_cdf(x) * normal_cdf(y);
    if rho == 0.0 {
        return base;
    }
    let t_end = rho.clamp(-1.0, 1.0).asin();
    let (nodes, weights) = crate::special::gauss_legendre(48);
    let half = 0.5 * t_end;
    let mut acc = 0.0;
    // two panels keep the quadrature accurate when the peak sits near t_end
    for panel in 0..2 {
        let lo = half * panel as f64;
        for (z, w) in nodes.iter().zip(&weights) {
            let t = lo + 0.5 * half * (z + 1.0);
            let (s, c) = t.sin_cos();
            let q = (x * x - 2.0 * s * x * y + y * y) / (2.0 * c * c);
            acc += w * 0.5 * half * (-q).exp();
        }
    }
    (base + acc / (2.0 * std::f64::consts::PI)).clamp(0.0, 1.0)
}

/// Projects a symmetric matrix with unit diagonal onto the valid correlation
/// matrices: eigenvalues floored at [`MIN_EIGENVALUE`], diagonal renormalised
/// to one, repeated until the floor holds.
pub fn nearest_correlation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut r = (m + m.transpose()) * 0.5;
    normalise_diagonal(&mut r);
    for _ in 0..100 {
        let eig = SymmetricEigen::new(r.clone());
        if eig.eigenvalues.min() >= MIN_EIGENVALUE {
            return r;
        }
        let floored = eig.eigenvalues.map(|v| v.max(MIN_EIGENVALUE));
        r = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
        r = (&r + r.transpose()) * 0.5;
        normalise_diagonal(&mut r);
    }
    // fall back on shrinking towards the identity
    let mut alpha = 1e-6;
    loop {
        let s = &r * (1.0 - alpha) + DMatrix::identity(d, d) * alpha;
        if SymmetricEigen::new(s.clone()).eigenvalues.min() >= MIN_EIGENVALUE || alpha >= 1.0 {
            return s;
        }
        alpha = (alpha * 10.0).min(1.0);
    }
}

fn normalise_diagonal(r: &mut DMatrix<f64>) {
    let d = r.nrows();
    let s: Vec<f64> = (0..d).map(|i| r[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    for i in 0..d {
        for j in 0..d {
            r[(i, j)] /= s[i] * s[j];
        }
        r[(i, i)] = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_density_is_zero() {
        let g = GaussianCopula::identity(3);
        for u in [[0.1, 0.5, 0.9], [1e-9, 0.3, 1.0 - 1e-9]] {
            assert_eq!(g.log_density(&u), 0.0);
        }
    }

    #[test]
    fn bivariate_density_closed_form() {
        let rho: f64 = 0.6;
        let g = GaussianCopula::new(vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let (u, v) = (0.2, 0.85);
        let (x, y) = (normal_quantile(u), normal_quantile(v));
        let r2 = 1.0 - rho * rho;
        let expected = -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
        assert!((g.log_density(&[u, v]) - expected).abs() < 1e-12);
    }

    #[test]
    fn bivariate_cdf_known_values() {
        // P(X<=0, Y<=0) = 1/4 + asin(rho)/(2π)
        for rho in [-0.95, -0.3, 0.5, 0.99] {
            let exact = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert!((bivariate_normal_cdf(0.0, 0.0, rho) - exact).abs() < 1e-13);
        }
        // rho → 1 tends to Φ(min(x, y))
        let near = bivariate_normal_cdf(0.3, -0.4, 0.999_999);
        assert!((near - normal_cdf(-0.4)).abs() < 1e-3);
    }

    #[test]
    fn invalid_matrices_rejected() {
        assert!(GaussianCopula::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).is_err());
        assert!(GaussianCopula::new(vec![vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
        assert!(GaussianCopula::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(GaussianCopula::new(vec![vec![1.0]]).is_err());
    }

    #[test]
    fn projection_repairs_indefinite_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let r = nearest_correlation(&m);
        assert!(SymmetricEigen::new(r.clone()).eigenvalues.min() >= MIN_EIGENVALUE);
        for i in 0..3 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-15);
        }
        assert!(GaussianCopula::from_matrix(r).is_ok());
    }
}

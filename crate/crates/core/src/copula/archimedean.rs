//! Clayton, Gumbel and Frank copulas. Densities use the Marshall–Olkin
//! representation `c(u) = |ψ^(D)(s)| Π |t'(u_j)|` with `s = Σ t(u_j)`, where
//! `ψ` is the generator and `t = ψ^{-1}`, all evaluated in log space.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use super::Family;
use crate::special::{gauss_legendre, log_sum_exp};

/// `ln(e^y - 1)` for `y > 0` without overflow.
fn ln_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

// ---------------------------------------------------------------- Clayton

pub(crate) fn clayton_log_density(theta: f64, u: &[f64]) -> f64 {
    let d = u.len();
    let ln_u: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    // a_j = -θ ln u_j, so u_j^{-θ} = e^{a_j} and θ t_j = expm1(a_j)
    let a: Vec<f64> = ln_u.iter().map(|l| -theta * l).collect();
    let max_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_1p_theta_s = if max_a < 700.0 {
        a.iter().map(|v| v.exp_m1()).sum::<f64>().ln_1p()
    } else {
        // ln(Σ e^{a_j} - (D - 1))
        let tail: f64 = a.iter().map(|v| (v - max_a).exp()).sum();
        max_a + (tail - (d as f64 - 1.0) * (-max_a).exp()).ln()
    };
    let norm: f64 = (1..d).map(|k| (k as f64 * theta).ln_1p()).sum();
    norm - (1.0 / theta + d as f64) * ln_1p_theta_s - (theta + 1.0) * ln_u.iter().sum::<f64>()
}

pub(crate) fn clayton_cdf(theta: f64, u: &[f64]) -> f64 {
    if u.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let inner: f64 = u.iter().map(|v| (-theta * v.ln()).exp_m1()).sum::<f64>();
    (-inner.ln_1p() / theta).exp()
}

pub(crate) fn clayton_sample<R: Rng + ?Sized>(theta: f64, rng: &mut R, out: &mut [f64]) {
    let v: f64 = Gamma::new(1.0 / theta, 1.0).expect("valid gamma shape").sample(rng);
    for o in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        // (1 + E/V)^{-1/θ}
        *o = (-(e / v).ln_1p() / theta).exp();
    }
}

// ---------------------------------------------------------------- Gumbel

/// Coefficients `b_{D,k}` with `|ψ^(D)(s)| = e^{-s^α} Σ_k b_{D,k} s^{kα-D}`.
fn gumbel_coefficients(alpha: f64, d: usize) -> Vec<f64> {
    let mut b = vec![0.0; d + 1];
    b[0] = 1.0;
    for n in 0..d {
        for k in (0..=n + 1).rev() {
            let keep = if k <= n { b[k] * (n as f64 - k as f64 * alpha) } else { 0.0 };
            let shift = if k >= 1 { alpha * b[k - 1] } else { 0.0 };
            b[k] = keep + shift;
        }
    }
    b
}

pub(crate) fn gumbel_log_density(theta: f64, u: &[f64]) -> f64 {
    let d = u.len();
    let alpha = 1.0 / theta;
    let mut ln_t = Vec::with_capacity(d);
    let mut jac = 0.0;
    for &v in u {
        let ln_u = v.ln();
        let ln_neg = (-ln_u).ln();
        ln_t.push(theta * ln_neg);
        jac += theta.ln() + (theta - 1.0) * ln_neg - ln_u;
    }
    let ln_s = log_sum_exp(&ln_t);
    let b = gumbel_coefficients(alpha, d);
    let terms: Vec<f64> = (1..=d)
        .filter(|&k| b[k] > 0.0)
        .map(|k| b[k].ln() + (k as f64 * alpha - d as f64) * ln_s)
        .collect();
    -(alpha * ln_s).exp() + log_sum_exp(&terms) + jac
}

pub(crate) fn gumbel_cdf(theta: f64, u: &[f64]) -> f64 {
    if u.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let s: f64 = u.iter().map(|v| (-v.ln()).powf(theta)).sum();
    (-s.powf(1.0 / theta)).exp()
}

/// Positive stable variate with Laplace transform `e^{-s^α}` (Kanter).
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

pub(crate) fn gumbel_sample<R: Rng + ?Sized>(theta: f64, rng: &mut R, out: &mut [f64]) {
    let alpha = 1.0 / theta;
    let v = positive_stable(alpha, rng);
    for o in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        *o = (-(e / v).powf(alpha)).exp();
    }
}

// ---------------------------------------------------------------- Frank

/// Eulerian polynomial coefficients `A(m, k)`, `k = 0..m-1`.
fn eulerian(m: usize) -> Vec<f64> {
    let mut a = vec![1.0];
    for n in 2..=m {
        let mut next = vec![0.0; n];
        for (k, slot) in next.iter_mut().enumerate() {
            let same = if k < a.len() { (k + 1) as f64 * a[k] } else { 0.0 };
            let lower = if k >= 1 { (n - k) as f64 * a[k - 1] } else { 0.0 };
            *slot = same + lower;
        }
        a = next;
    }
    a
}

/// Generator inverse `t(u) = -ln(expm1(-θu) / expm1(-θ))`, accurate near both ends.
fn frank_t(theta: f64, u: f64) -> f64 {
    let ratio = (-theta * u).exp_m1() / (-theta).exp_m1();
    if ratio < 0.5 {
        -ratio.ln()
    } else {
        let z = -(-theta * u).exp() * (-theta * (1.0 - u)).exp_m1() / (-theta).exp_m1();
        -z.ln_1p()
    }
}

pub(crate) fn frank_log_density(theta: f64, u: &[f64]) -> f64 {
    if theta < 0.0 {
        return frank_log_density_bivariate(theta, u[0], u[1]);
    }
    let d = u.len();
    let mut s = 0.0;
    let mut jac = 0.0;
    for &v in u {
        s += frank_t(theta, v);
        jac += theta.ln() - ln_expm1(theta * v);
    }
    // |ψ^(D)(s)| = Li_{1-D}(x) / θ with x = a e^{-s}, a = 1 - e^{-θ}
    let a = -(-theta).exp_m1();
    let ln_x = a.ln() - s;
    let x = ln_x.exp();
    let one_minus_x = -(-s).exp_m1() + (-theta - s).exp();
    let poly = eulerian(d - 1).iter().rev().fold(0.0, |acc, c| acc * x + c);
    -theta.ln() + ln_x + poly.ln() - d as f64 * one_minus_x.ln() + jac
}

fn frank_log_density_bivariate(theta: f64, u: f64, v: f64) -> f64 {
    let em = (-theta).exp_m1();
    let den = -em - (-theta * u).exp_m1() * (-theta * v).exp_m1();
    (-theta * em).ln() - theta * (u + v) - 2.0 * den.abs().ln()
}

pub(crate) fn frank_cdf(theta: f64, u: &[f64]) -> f64 {
    if u.iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    // 1 + (e^{-θ} - 1) Π a_i rewritten as (1 - Π a_i) + e^{-θ} Π a_i, both
    // non-negative, with 1 - a_i = (e^{-θv} - e^{-θ}) / (1 - e^{-θ}) formed
    // without cancellation. The direct form loses ~e^{θu} ulps for large θ.
    let em = (-theta).exp_m1();
    let (mut prod, mut log_prod) = (1.0, 0.0);
    for &v in u {
        let b = (-theta * v).exp() * (-theta * (1.0 - v)).exp_m1() / em;
        prod *= (-theta * v).exp_m1() / em;
        log_prod += (-b).ln_1p();
    }
    let inner = -log_prod.exp_m1() + (-theta).exp() * prod;
    (-inner.ln() / theta).clamp(0.0, 1.0)
}

/// Logarithmic-series variate with `P(V = k) ∝ p^k / k`, `p = 1 - e^{-θ}`
/// (Kemp's LK algorithm).
fn logarithmic<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let p = -(-theta).exp_m1();
    let u: f64 = rng.sample(Open01);
    if u > p {
        return 1.0;
    }
    let q = -(-theta * rng.sample::<f64, _>(Open01)).exp_m1();
    if u < q * q {
        (1.0 + u.ln() / q.ln()).floor()
    } else if u > q {
        1.0
    } else {
        2.0
    }
}

pub(crate) fn frank_sample<R: Rng + ?Sized>(theta: f64, rng: &mut R, out: &mut [f64]) {
    if theta < 0.0 {
        // conditional inversion, bivariate only
        let u: f64 = rng.sample(Open01);
        let w: f64 = rng.sample(Open01);
        let a = (-theta * u).exp();
        let g = (-theta).exp_m1();
        let v = -(w * g / (a - w * (a - 1.0))).ln_1p() / theta;
        out[0] = u;
        out[1] = v.clamp(0.0, 1.0);
        return;
    }
    let a = -(-theta).exp_m1();
    let v = logarithmic(theta, rng);
    for o in out.iter_mut() {
        let e: f64 = rng.sample(Exp1);
        *o = -(-a * (-e / v).exp()).ln_1p() / theta;
    }
}

// ---------------------------------------------------------------- Kendall's τ

/// Debye function `D₁(x) = (1/x) ∫₀ˣ t / (eᵗ - 1) dt`.
fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    let (nodes, weights) = gauss_legendre(64);
    // split the range so large x keep resolution near 0 where the mass is
    let hi = x.min(60.0);
    let mut integral = 0.0;
    for (z, w) in nodes.iter().zip(&weights) {
        let t = 0.5 * hi * (z + 1.0);
        integral += w * 0.5 * hi * t / t.exp_m1();
    }
    if x > 60.0 {
        // ∫_0^∞ t/(e^t - 1) dt = π²/6; the tail beyond 60 is below 1e-24
        integral = std::f64::consts::PI.powi(2) / 6.0;
    }
    integral / x
}

/// Kendall's τ of the Frank copula, `1 - 4/θ + 4 D₁(θ)/θ`.
pub fn frank_debye_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-3 {
        return theta / 9.0 - theta.powi(3) / 900.0;
    }
    1.0 - 4.0 / theta + 4.0 * debye1(theta) / theta
}

pub fn theta_to_kendall_tau(family: Family, theta: f64) -> f64 {
    match family {
        Family::Clayton => theta / (theta + 2.0),
        Family::Gumbel => 1.0 - 1.0 / theta,
        Family::Frank => frank_debye_tau(theta),
        Family::Gaussian => 2.0 / std::f64::consts::PI * theta.asin(),
    }
}

/// Inverts the τ(θ) relation. For the Archimedean families τ outside the
/// family's range maps to the nearest valid θ; the Gaussian case returns ρ.
pub fn kendall_tau_to_theta(family: Family, tau: f64) -> f64 {
    let tau = tau.clamp(-0.999, 0.999);
    match family {
        Family::Clayton => 2.0 * tau.max(1e-6) / (1.0 - tau.max(1e-6)),
        Family::Gumbel => 1.0 / (1.0 - tau.max(0.0)),
        Family::Gaussian => (std::f64::consts::FRAC_PI_2 * tau).sin(),
        Family::Frank => {
            if tau.abs() < 1e-9 {
                return 9.0 * tau;
            }
            let (mut lo, mut hi) = if tau > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
            while frank_debye_tau(hi) < tau && hi < 1e4 {
                hi *= 2.0;
            }
            while frank_debye_tau(lo) > tau && lo > -1e4 {
                lo *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if frank_debye_tau(mid) < tau {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-13 * hi.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference mixed partial ∂²C/∂u∂v.
    fn mixed_partial(cdf: impl Fn(&[f64]) -> f64, u: f64, v: f64) -> f64 {
        let h = 1e-4;
        (cdf(&[u + h, v + h]) - cdf(&[u + h, v - h]) - cdf(&[u - h, v + h]) + cdf(&[u - h, v - h]))
            / (4.0 * h * h)
    }

    #[test]
    fn bivariate_densities_match_numeric_partials() {
        let pts = [(0.3, 0.7), (0.1, 0.15), (0.8, 0.9), (0.5, 0.05)];
        for &(u, v) in &pts {
            for theta in [0.5, 2.0, 5.0] {
                let num = mixed_partial(|x| clayton_cdf(theta, x), u, v);
                let c = clayton_log_density(theta, &[u, v]).exp();
                assert!((c - num).abs() < 1e-5 * num.max(1.0), "clayton {theta} {u} {v}: {c} vs {num}");
            }
            for theta in [1.0, 1.7, 4.0] {
                let num = mixed_partial(|x| gumbel_cdf(theta, x), u, v);
                let c = gumbel_log_density(theta, &[u, v]).exp();
                assert!((c - num).abs() < 1e-5 * num.max(1.0), "gumbel {theta} {u} {v}: {c} vs {num}");
            }
            for theta in [-4.0, 0.5, 5.0, 20.0] {
                let num = mixed_partial(|x| frank_cdf(theta, x), u, v);
                let c = frank_log_density(theta, &[u, v]).exp();
                assert!((c - num).abs() < 1e-5 * num.max(1.0), "frank {theta} {u} {v}: {c} vs {num}");
            }
        }
    }

    #[test]
    fn frank_general_route_matches_closed_form() {
        for theta in [0.3, 3.0, 12.0, 45.0] {
            for &(u, v) in &[(0.2, 0.4), (0.999, 0.001), (1e-9, 1e-9)] {
                let general = frank_log_density(theta, &[u, v]);
                let closed = frank_log_density_bivariate(theta, u, v);
                assert!((general - closed).abs() < 1e-8 * closed.abs().max(1.0), "{theta} {u} {v}: {general} vs {closed}");
            }
        }
        // the closed form cancels near (1, 1); 60-digit reference value
        let u = 1.0 - 1e-9;
        assert!((frank_log_density(45.0, &[u, u]) - 3.806_662_399_770_324).abs() < 1e-6);
    }

    /// Mixed partial of order 3 by central differences.
    fn third_partial(cdf: impl Fn(&[f64]) -> f64, u: [f64; 3]) -> f64 {
        let h = 2e-3;
        let mut acc = 0.0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let p = [u[0] + sx * h, u[1] + sy * h, u[2] + sz * h];
                    acc += sx * sy * sz * cdf(&p);
                }
            }
        }
        acc / (8.0 * h * h * h)
    }

    #[test]
    fn trivariate_densities_match_numeric_partials() {
        let u = [0.35, 0.6, 0.5];
        let cases: [(&str, f64); 3] = [("clayton", 1.5), ("gumbel", 2.0), ("frank", 4.0)];
        for (name, theta) in cases {
            let (c, num) = match name {
                "clayton" => (clayton_log_density(theta, &u), third_partial(|x| clayton_cdf(theta, x), u)),
                "gumbel" => (gumbel_log_density(theta, &u), third_partial(|x| gumbel_cdf(theta, x), u)),
                _ => (frank_log_density(theta, &u), third_partial(|x| frank_cdf(theta, x), u)),
            };
            assert!((c.exp() - num).abs() < 1e-3 * num, "{name}: {} vs {num}", c.exp());
        }
    }

    #[test]
    fn independence_limits() {
        let u = [0.2, 0.9, 0.55];
        assert!(clayton_log_density(1e-8, &u).abs() < 1e-4);
        assert!(gumbel_log_density(1.0, &u).abs() < 1e-12);
        assert!(frank_log_density(1e-6, &u).abs() < 1e-4);
    }

    #[test]
    fn extreme_points_stay_finite() {
        for u in [[1e-10, 1e-10], [1.0 - 1e-10, 1e-10], [1.0 - 1e-10, 1.0 - 1e-10]] {
            assert!(clayton_log_density(50.0, &u).is_finite());
            assert!(gumbel_log_density(50.0, &u).is_finite());
            assert!(frank_log_density(50.0, &u).is_finite());
        }
    }

    #[test]
    fn eulerian_numbers() {
        assert_eq!(eulerian(1), vec![1.0]);
        assert_eq!(eulerian(3), vec![1.0, 4.0, 1.0]);
        assert_eq!(eulerian(4), vec![1.0, 11.0, 11.0, 1.0]);
    }

    #[test]
    fn frank_tau_inverse() {
        // known value: τ(θ = 5) ≈ 0.4567
        assert!((frank_debye_tau(5.0) - 0.456_7).abs() < 1e-3);
        for tau in [-0.6, -0.1, 0.05, 0.3, 0.8] {
            let theta = kendall_tau_to_theta(Family::Frank, tau);
            assert!((frank_debye_tau(theta) - tau).abs() < 1e-10);
        }
        assert!((frank_debye_tau(-3.0) + frank_debye_tau(3.0)).abs() < 1e-12);
    }
}

//! Special functions needed by the radial kernels and the inequality constants.
//!
//! Everything here is evaluated at half-integer or quarter-integer arguments,
//! so the Gamma values are exact recurrences from Γ(1/2) = √π and Γ(1) = 1
//! rather than general-purpose approximations.

use std::f64::consts::PI;

/// Γ(m/2) for a positive integer `m`.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1, "gamma_half needs m >= 1");
    let (mut value, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = m as f64 / 2.0;
    while x < target - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

/// B(1/2, (n+1)/2) = √π Γ((n+1)/2) / Γ(n/2 + 1).
pub fn beta_half(n: usize) -> f64 {
    PI.sqrt() * gamma_half(n + 1) / gamma_half(n + 2)
}

/// Surface area of the unit sphere S^{n-1} ⊂ ℝⁿ, i.e. ω_{n-1} = 2π^{n/2}/Γ(n/2).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Normalisation Γ((n+1)/2)/π^{(n+1)/2} of the Riesz kernel in ℝⁿ.
pub fn riesz_constant(n: usize) -> f64 {
    gamma_half(n + 1) / PI.powf((n as f64 + 1.0) / 2.0)
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma ψ(x) for x > 0 via upward recurrence and the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "digamma only implemented for positive arguments");
    let mut acc = 0.0;
    while x < 12.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli terms B_{2k}/(2k)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 / x - series
}

/// Angular integral of the radial reduction,
///
/// ```text
/// J(p, q) = ∫₀^π sinⁿμ (p − q cos μ)^{-(n+1)/2} dμ,   0 ≤ q ≤ p,
/// ```
///
/// evaluated in closed form as B(1/2,(n+1)/2)·p^{-(n+1)/2}·₂F₁(a, b; a+b; (q/p)²)
/// with a = (n+1)/4, b = (n+3)/4. For (q/p)² ≤ 1/2 the Gauss series is summed;
/// above that the logarithmic connection formula for c = a+b is used, which
/// captures the log singularity at q → p exactly.
#[derive(Debug, Clone)]
pub struct AngularKernel {
    n: usize,
    exponent: f64,
    beta: f64,
    log_prefactor: f64,
    direct: Vec<f64>,
    log_plain: Vec<f64>,
    log_weighted: Vec<f64>,
}

impl AngularKernel {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let a = (n as f64 + 1.0) / 4.0;
        let b = (n as f64 + 3.0) / 4.0;
        let c = a + b;

        // Enough terms that the tail at argument 1/2 is below 1e-18 relative.
        let mut terms = 40;
        loop {
            let growth = (terms as f64).powf((c - 2.0).max(0.0) + 1.0);
            if 0.5f64.powi(terms as i32) * growth < 1e-18 {
                break;
            }
            terms += 8;
        }

        let mut direct = Vec::with_capacity(terms);
        let mut coef = 1.0;
        for k in 0..terms {
            direct.push(coef);
            let kf = k as f64;
            coef *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
        }

        let mut log_plain = Vec::with_capacity(terms);
        let mut log_weighted = Vec::with_capacity(terms);
        let mut d = 1.0;
        let mut psi_a = digamma(a);
        let mut psi_b = digamma(b);
        let mut psi_1 = -EULER_GAMMA;
        for k in 0..terms {
            let kf = k as f64;
            log_plain.push(d);
            log_weighted.push(d * (2.0 * psi_1 - psi_a - psi_b));
            d *= (a + kf) * (b + kf) / ((kf + 1.0) * (kf + 1.0));
            psi_a += 1.0 / (a + kf);
            psi_b += 1.0 / (b + kf);
            psi_1 += 1.0 / (kf + 1.0);
        }

        let beta = beta_half(n);
        // B(1/2,(n+1)/2)·Γ(a+b)/(Γ(a)Γ(b)) collapses to 2^{(n-1)/2} by duplication.
        let log_prefactor = 2f64.powf((n as f64 - 1.0) / 2.0);
        AngularKernel {
            n,
            exponent: (n as f64 + 1.0) / 2.0,
            beta,
            log_prefactor,
            direct,
            log_plain,
            log_weighted,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// J(p, q) given `p` and the gap `s = p − q ≥ 0` (computed by the caller
    /// without cancellation).
    pub fn eval(&self, p: f64, s: f64) -> f64 {
        debug_assert!(p > 0.0 && s >= 0.0 && s <= p * (1.0 + 1e-12));
        let q = p - s;
        let z = (q / p) * (q / p);
        let scale = self.inv_pow(p);
        if z <= 0.5 {
            scale * self.beta * horner(&self.direct, z)
        } else {
            let w = s * (2.0 * p - s) / (p * p);
            if w <= 0.0 {
                return f64::INFINITY;
            }
            let series = horner(&self.log_weighted, w) - w.ln() * horner(&self.log_plain, w);
            scale * self.log_prefactor * series
        }
    }

    fn inv_pow(&self, p: f64) -> f64 {
        match self.n {
            2 => 1.0 / (p * p.sqrt()),
            3 => 1.0 / (p * p),
            4 => 1.0 / (p * p * p.sqrt()),
            5 => 1.0 / (p * p * p),
            _ => p.powf(-self.exponent),
        }
    }
}

fn horner(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn gamma_half_matches_known_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert!((gamma_half(3) - PI.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(gamma_half(8), 6.0);
        assert!((gamma_half(7) - 15.0 / 8.0 * PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn beta_half_small_n() {
        assert!((beta_half(2) - PI / 2.0).abs() < 1e-15);
        assert!((beta_half(3) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0) + EULER_GAMMA).abs() < 1e-14);
        assert!((digamma(0.5) - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-14);
        // ψ(1/4) = −γ − π/2 − 3 ln 2
        assert!((digamma(0.25) - (-EULER_GAMMA - PI / 2.0 - 3.0 * 2f64.ln())).abs() < 1e-14);
        // ψ(3/4) = −γ + π/2 − 3 ln 2
        assert!((digamma(0.75) - (-EULER_GAMMA + PI / 2.0 - 3.0 * 2f64.ln())).abs() < 1e-14);
    }

    // brute-force oracle: composite Gauss-Legendre in μ, graded towards μ = 0
    fn angular_brute(n: usize, p: f64, q: f64) -> f64 {
        let gl = GaussLegendre::new(32);
        let integrand =
            |mu: f64| mu.sin().powi(n as i32) * (p - q * mu.cos()).powf(-(n as f64 + 1.0) / 2.0);
        let mut edges = vec![0.0];
        let mut x = PI / 2.0;
        while x > 1e-9 {
            edges.push(x);
            x *= 0.25;
        }
        edges.push(PI);
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges
            .windows(2)
            .map(|w| gl.integrate(w[0], w[1], integrand))
            .sum()
    }

    #[test]
    fn angular_kernel_matches_quadrature() {
        for n in 2..=5 {
            let kernel = AngularKernel::new(n);
            for &(p, q) in &[
                (1.0, 0.0),
                (2.0, 0.3),
                (1.0, 0.6),
                (1.0, 0.75),
                (1.0, 0.9),
                (3.0, 2.99),
                (1.0, 0.999),
            ] {
                let got = kernel.eval(p, p - q);
                let want = angular_brute(n, p, q);
                let rel = (got - want).abs() / want.abs();
                assert!(
                    rel < 1e-11,
                    "n={n} p={p} q={q}: {got} vs {want} (rel {rel:e})"
                );
            }
        }
    }
}

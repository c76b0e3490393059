//! Standard normal helpers.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

pub fn pdf(x: f64) -> f64 {
    standard().pdf(x)
}

pub fn quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}

/// `phi(Phi^{-1}(alpha)) / (1 - alpha)`: ES of N(0,1) at level `alpha`.
pub fn es_standard_normal(alpha: f64) -> f64 {
    pdf(quantile(alpha)) / (1.0 - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn es_constant_at_975() {
        let c = es_standard_normal(0.975);
        assert!((c - 2.337_802_7).abs() < 1e-6, "{c}");
    }

    #[test]
    fn es_constant_by_quadrature() {
        // E[Z | Z > q] via trapezoid on the tail density
        let q = quantile(0.975);
        let (a, b, n) = (q, q + 12.0, 200_000);
        let h = (b - a) / n as f64;
        let f = |x: f64| x * pdf(x);
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..n {
            s += f(a + k as f64 * h);
        }
        let tail = s * h / 0.025;
        assert!((tail - es_standard_normal(0.975)).abs() < 1e-7);
    }
}

//! Complete elliptic integral of the first kind.

use crate::error::{invalid, Result};

use super::quad;

/// `K(k) = ∫₀^{π/2} dθ / √(1 − k² sin² θ)` for modulus `k ∈ [0, 1)`,
/// evaluated by adaptive Gauss–Kronrod quadrature to about `1e-12`.
pub fn complete_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k.abs()) {
        return Err(invalid("k", format!("modulus must lie in [0, 1), got {k}")));
    }
    let m = k * k;
    quad::integrate(
        |t: f64| {
            let s = t.sin();
            1.0 / (1.0 - m * s * s).sqrt()
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-13,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Independent route: K(k) = π / (2 AGM(1, √(1 − k²))).
    fn agm_k(k: f64) -> f64 {
        let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
        for _ in 0..40 {
            let an = 0.5 * (a + b);
            b = (a * b).sqrt();
            a = an;
        }
        PI / (2.0 * a)
    }

    #[test]
    fn quadrature_matches_agm() {
        for &k in &[0.0, 0.1, 0.5, 1.0 / 2f64.sqrt(), 0.9, 0.99, 0.999_95] {
            let q = complete_k(k).unwrap();
            assert!((q - agm_k(k)).abs() < 1e-10 * agm_k(k), "k = {k}");
        }
    }

    #[test]
    fn special_value_at_zero() {
        assert!((complete_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_modulus_one() {
        assert!(complete_k(1.0).is_err());
    }
}

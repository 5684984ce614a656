//! Scalar kernels of the linear-model error analysis.
//!
//! Below `SERIES_CUTOFF` the kernels switch to their Taylor series. The
//! direct formulas subtract nearly equal quantities there (`sinh z − z`
//! loses about `6ε/z²` of relative precision).

const SERIES_CUTOFF: f64 = 0.5;

/// `sinh z − z` without cancellation.
fn sinh_minus_id(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        // z³/3! + z⁵/5! + …
        let z2 = z * z;
        let mut term = z * z2 / 6.0;
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= z2 / ((2.0 * k - 2.0) * (2.0 * k - 1.0));
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        z.sinh() - z
    }
}

/// `cosh z − 1`, computed as `2 sinh²(z/2)`.
fn cosh_minus_one(z: f64) -> f64 {
    let s = (0.5 * z).sinh();
    2.0 * s * s
}

/// `e_λ(t) = sinh(λt) − λt`.
pub fn e_lambda(lambda: f64, t: f64) -> f64 {
    sinh_minus_id(lambda * t)
}

/// `e'_λ(t) = λ cosh(λt) − λ`, the time derivative of [`e_lambda`].
pub fn e_lambda_prime(lambda: f64, t: f64) -> f64 {
    lambda * cosh_minus_one(lambda * t)
}

/// Forward-Euler truncation error of the one-step linear estimator,
/// `E_{λ,t} = (e^{λt} − 1)/t − λ`.
pub fn euler_truncation(lambda: f64, t: f64) -> f64 {
    let z = lambda * t;
    if z.abs() < 1e-4 {
        // λ(z/2 + z²/6 + z³/24)
        lambda * z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    } else {
        (z.exp_m1() - z) / t
    }
}

/// Variance profile `V(z) = (1 − u)² + u²/2`, `u = (sinh z − z)/(z(cosh z − 1))`,
/// with `V(0) = 1/2`.
pub fn variance_v(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    let u = if z.abs() > 700.0 {
        // sinh, cosh overflow; the ratio is 1 to machine precision
        1.0 / z.abs()
    } else {
        sinh_minus_id(z) / (z * cosh_minus_one(z))
    };
    (1.0 - u).powi(2) + 0.5 * u * u
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_vanish_at_zero() {
        assert_eq!(e_lambda(3.0, 0.0), 0.0);
        assert_eq!(e_lambda_prime(3.0, 0.0), 0.0);
    }

    #[test]
    fn e_lambda_reference_values() {
        // 40-digit reference values
        assert!((e_lambda(1.0, 1.0) - 0.175_201_193_643_801_456_9).abs() < 1e-15);
        assert!((e_lambda(-2.0, 0.5) + 0.175_201_193_643_801_456_9).abs() < 1e-15);
        assert!((e_lambda_prime(-2.0, 0.5) + 1.086_161_269_630_487_557).abs() < 1e-15);
    }

    #[test]
    fn series_and_direct_branches_agree_at_cutoff() {
        for &z in &[0.49999999f64, 0.5, 0.50000001, -0.5] {
            let direct = z.sinh() - z;
            assert!((sinh_minus_id(z) - direct).abs() < 1e-15, "{z}");
        }
        let t = 2e-5;
        let direct = ((-2.0f64 * t).exp() - 1.0) / t + 2.0;
        assert!((euler_truncation(-2.0, t) - direct).abs() < 1e-9);
    }

    #[test]
    fn small_argument_series_is_accurate() {
        // e_λ(t) = z³/6 + z⁵/120 + …
        let z: f64 = 1e-3;
        let series = z.powi(3) / 6.0 + z.powi(5) / 120.0;
        assert!((e_lambda(1.0, z) / series - 1.0).abs() < 1e-14);
        assert!((e_lambda_prime(2.0, 5e-4) / (2.0 * z * z / 2.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn euler_truncation_positive() {
        for &lam in &[-5.0, -2.0, -0.1, 0.1, 1.0, 3.0] {
            for &t in &[1e-8, 1e-5, 1e-3, 0.1, 1.0, 5.0] {
                let e = euler_truncation(lam, t);
                assert!(e > 0.0, "E({lam},{t}) = {e}");
            }
        }
    }

    #[test]
    fn euler_truncation_reference_values() {
        let refs = [
            (0.1, 0.187_307_530_779_818_586_7),
            (0.01, 0.019_867_330_675_530_222_08),
            (0.001, 0.001_998_667_333_066_755_530),
        ];
        for (t, e) in refs {
            assert!((euler_truncation(-2.0, t) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn variance_profile_reference_values() {
        assert_eq!(variance_v(0.0), 0.5);
        assert!((variance_v(1.0) - 0.510_899_714_279_660_963_7).abs() < 1e-14);
        assert!((variance_v(-1.0) - variance_v(1.0)).abs() < 1e-15);
        assert!((variance_v(50.0) - 0.9606).abs() < 1e-14);
        assert!((variance_v(1e-6) - 0.5).abs() < 1e-12);
    }
}

//! Fisher–Snedecor distribution function via the regularized incomplete beta.

use statrs::function::beta::checked_beta_reg;

/// `P(F <= q)` for `F ~ F(d1, d2)`; `d1, d2 > 0`, fractional allowed.
pub fn f_cdf(q: f64, d1: f64, d2: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    let x = d1 * q / (d1 * q + d2);
    checked_beta_reg(d1 / 2.0, d2 / 2.0, x).unwrap_or(f64::NAN)
}

/// Upper tail `P(F > q)`, evaluated without the cancellation of `1 - f_cdf`.
pub fn f_sf(q: f64, d1: f64, d2: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    if q.is_infinite() {
        return 0.0;
    }
    let x = d2 / (d1 * q + d2);
    checked_beta_reg(d2 / 2.0, d1 / 2.0, x).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_quantile() {
        assert_eq!(f_cdf(0.0, 1.0, 10.0), 0.0);
        assert_eq!(f_sf(0.0, 3.0, 10.0), 1.0);
    }

    #[test]
    fn closed_forms() {
        // F(2, 2): cdf = q / (1 + q)
        for q in [0.1, 1.0, 3.5, 40.0] {
            assert_abs_diff_eq!(f_cdf(q, 2.0, 2.0), q / (1.0 + q), epsilon = 1e-14);
        }
        // F(1, 1): cdf = (2/π) atan(√q)
        for q in [0.2f64, 1.0, 9.0] {
            let expected = 2.0 / std::f64::consts::PI * q.sqrt().atan();
            assert_abs_diff_eq!(f_cdf(q, 1.0, 1.0), expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn tails_are_complementary() {
        for &(q, d1, d2) in &[
            (0.5, 1.0, 154.0617),
            (81.949, 1.0, 154.0617),
            (3.0, 7.5, 0.5),
            (1e3, 1e4, 1e4),
        ] {
            assert_abs_diff_eq!(f_cdf(q, d1, d2) + f_sf(q, d1, d2), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn murray_statistic_has_negligible_tail() {
        let p = f_sf(81.949, 1.0, 154.0617);
        assert!(p < 1e-14, "p = {p}");
        assert_abs_diff_eq!(f_cdf(81.949, 1.0, 154.0617), 1.0 - p, epsilon = 1e-15);
    }
}

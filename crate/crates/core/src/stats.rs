//! Scalar distribution helpers: regularized incomplete gamma, normal
//! CDF/quantile, and the chi-square quantile used for alarm thresholds.

/// Natural log of the gamma function (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    let coeffs = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for (j, &c) in coeffs.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let eps = 1e-14;
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let eps = 1e-14;
    let fpmin = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < eps {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_continued_fraction(a, x)
    }
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    gamma_p(dof as f64 / 2.0, x / 2.0)
}

/// Chi-square density with `dof` degrees of freedom.
pub fn chi2_pdf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = dof as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// Standard normal CDF, evaluated through the regularized gamma so the tails
/// share precision with the chi-square routines.
pub fn normal_cdf(x: f64) -> f64 {
    let half_q = 0.5 * (1.0 - gamma_p(0.5, x * x / 2.0));
    if x >= 0.0 {
        1.0 - half_q
    } else {
        half_q
    }
}

/// Standard normal quantile (Acklam rational approximation polished by one
/// Newton step on `normal_cdf`).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Newton polish against the high-precision CDF
    let pdf = (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 1e-300 {
        x - (normal_cdf(x) - p) / pdf
    } else {
        x
    }
}

/// Chi-square quantile at probability `prob` with `dof` degrees of freedom.
///
/// Wilson-Hilferty cube approximation refined by one Newton step on the
/// regularized gamma CDF.
pub fn chi2_quantile(dof: usize, prob: f64) -> f64 {
    assert!(dof >= 1, "dof must be positive");
    assert!(prob > 0.0 && prob < 1.0, "prob must be in (0,1)");
    let k = dof as f64;
    let z = normal_quantile(prob);
    let t = 1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt();
    let mut x = (k * t * t * t).max(1e-8);
    let pdf = chi2_pdf(x, dof);
    if pdf > 1e-300 {
        x -= (chi2_cdf(x, dof) - prob) / pdf;
    }
    x.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_p_limits() {
        assert_eq!(gamma_p(0.5, 0.0), 0.0);
        assert!((gamma_p(1.0, 50.0) - 1.0).abs() < 1e-12);
        // P(1, x) = 1 - exp(-x)
        for &x in &[0.1_f64, 0.7, 2.5] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_cdf_symmetry_and_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-14);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
        assert!((normal_cdf(-1.959963984540054) - 0.025).abs() < 1e-9);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[0.001, 0.025, 0.3, 0.5, 0.9, 0.95, 0.975, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn chi2_quantile_reference_values() {
        // classical table values
        assert!((chi2_quantile(10, 0.95) - 18.307).abs() < 0.05);
        assert!((chi2_quantile(1, 0.95) - 3.8415).abs() < 0.01);
        assert!((chi2_quantile(50, 0.95) - 67.505).abs() < 0.05);
        assert!((chi2_quantile(2, 0.5) - 1.3863).abs() < 0.01);
    }

    #[test]
    fn chi2_quantile_inverts_cdf() {
        // alarm thresholds live in the upper tail; the single Newton polish
        // is only rated for p >= 0.5
        for &dof in &[1usize, 2, 5, 10, 50, 100] {
            for &p in &[0.5, 0.9, 0.95, 0.99] {
                let q = chi2_quantile(dof, p);
                assert!(
                    (chi2_cdf(q, dof) - p).abs() < 5e-4,
                    "dof={dof} p={p} q={q}"
                );
            }
        }
    }
}

//! Survival functions and permutation machinery shared by all tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Null distribution attached to a test result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullDescriptor {
    ChiSquared { dof: usize },
    Normal { mean: f64, variance: f64 },
    Permutation { reference_stats: Vec<f64> },
}

/// Upper-tail probability P(chi^2_dof >= x).
pub fn chi2_sf(x: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidParameter("chi2_sf: dof must be >= 1".into()));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "chi2_sf: x must be finite and non-negative, got {x}"
        )));
    }
    Ok(gamma_q(dof as f64 / 2.0, x / 2.0))
}

/// Upper-tail probability P(N(0,1) >= z).
pub fn normal_sf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "normal_sf: z must be finite, got {z}"
        )));
    }
    // erfc(t) = Q(1/2, t^2) for t >= 0, and normal_sf(z) = erfc(z / sqrt(2)) / 2.
    if z >= 0.0 {
        Ok(0.5 * gamma_q(0.5, z * z / 2.0))
    } else {
        Ok(1.0 - 0.5 * gamma_q(0.5, z * z / 2.0))
    }
}

/// One-sided Monte-Carlo p-value with the add-one rule, so p > 0.
/// Larger statistics are more extreme.
pub fn permutation_pvalue(observed: f64, permuted: &[f64]) -> Result<f64> {
    if permuted.is_empty() {
        return Err(Error::EmptyData("permutation reference statistics"));
    }
    if !observed.is_finite() || permuted.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "permutation_pvalue: statistics must be finite".into(),
        ));
    }
    let ge = permuted.iter().filter(|&&v| v >= observed).count();
    Ok((1 + ge) as f64 / (1 + permuted.len()) as f64)
}

/// Regularized upper incomplete gamma Q(a, x).
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_contfrac(a, x)
    }
}

/// P(a, x) by series expansion, for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..500 {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Q(a, x) by modified Lentz continued fraction, for x >= a + 1.
fn gamma_q_contfrac(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos approximation, g = 5, n = 6.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for (j, &c) in COEFFS.iter().enumerate() {
        ser += c / (x + 1.0 + j as f64);
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

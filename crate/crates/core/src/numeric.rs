//! Small numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Neumaier (improved Kahan) compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Formats `x` with `digits` significant digits, `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Ordinary least squares: returns the coefficients `c` minimizing
/// `‖X c − y‖₂`, where row `i` of `X` is `design[i]`.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let rows = design.len();
    if rows == 0 || rows != y.len() {
        return Err(Error::Numerical("least squares: empty or mismatched data".into()));
    }
    let cols = design[0].len();
    let x = DMatrix::from_fn(rows, cols, |i, j| design[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(format!("least squares: {e}")))?;
    Ok(c.iter().copied().collect())
}

/// Richardson-extrapolated coefficient of `√(1−s)` at `s = 1`.
///
/// Evaluates `D(ε) = (v(1−ε) − v(1))/√ε` at `ε = 1e−3, ε/4, ε/16` and
/// eliminates the `O(√ε)` and `O(ε)` corrections in turn.
pub fn sqrt_slope<F>(mut value_at: F) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    const EPS: [f64; 3] = [1e-3, 2.5e-4, 6.25e-5];
    let at_one = value_at(1.0)?;
    let levels: Vec<Vec<f64>> = EPS
        .iter()
        .map(|&e| value_at(1.0 - e))
        .collect::<Result<_>>()?;
    let n = levels.iter().map(Vec::len).fold(at_one.len(), usize::min);
    Ok((0..n)
        .map(|i| {
            let d: Vec<f64> = EPS
                .iter()
                .zip(&levels)
                .map(|(e, v)| (v[i] - at_one[i]) / e.sqrt())
                .collect();
            let r_coarse = 2.0 * d[1] - d[0];
            let r_fine = 2.0 * d[2] - d[1];
            (4.0 * r_fine - r_coarse) / 3.0
        })
        .collect())
}

/// Agreement test used between closed-form slopes and their extrapolated
/// counterparts: relative `tol`, with magnitudes below 1 judged absolutely.
pub fn slopes_agree(closed: f64, extrapolated: f64, tol: f64) -> bool {
    let scale = closed.abs().max(extrapolated.abs()).max(1.0);
    (closed - extrapolated).abs() <= tol * scale
}

/// `√π`, and the two gamma values needed by the singularity analysis:
/// `Γ(1/2) = √π` and `Γ(−1/2) = −2√π`.
pub const SQRT_PI: f64 = 1.772_453_850_905_516;
pub const GAMMA_HALF: f64 = SQRT_PI;
pub const GAMMA_MINUS_HALF: f64 = -2.0 * SQRT_PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((neumaier_sum(v) - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(1.0, 12), "1");
        assert_eq!(format_significant(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_significant(2.0 / 3.0, 12), "0.666666666667");
        assert_eq!(format_significant(1.5e-7, 12), "1.5e-7");
        assert_eq!(format_significant(-12345.5, 12), "-12345.5");
        assert_eq!(format_significant(0.0, 12), "0");
    }

    #[test]
    fn gamma_constants() {
        assert!((SQRT_PI - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(GAMMA_MINUS_HALF, -2.0 * GAMMA_HALF);
    }

    #[test]
    fn least_squares_exact_line() {
        let design: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let c = least_squares(&design, &y).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_slope_of_pure_root() {
        let slope = sqrt_slope(|s| {
            let h = (1.0 - s).sqrt();
            Ok(vec![2.0 - 5.0 * h + 7.0 * h * h - 3.0 * h * h * h])
        })
        .unwrap();
        assert!((slope[0] + 5.0).abs() < 1e-9);
    }
}

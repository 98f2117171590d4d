//! Real polynomials in ascending coefficient order, and their complex roots.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ABERTH_MAX_ITER: usize = 500;
const POLISH_STEPS: usize = 3;

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
}

/// Drops trailing (highest-degree) zero coefficients.
pub fn trim(coeffs: &[f64]) -> &[f64] {
    let mut n = coeffs.len();
    while n > 1 && coeffs[n - 1] == 0.0 {
        n -= 1;
    }
    &coeffs[..n]
}

pub fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Long division `p = q·d + r`; returns `(q, r)` with `deg r < deg d`.
pub fn divmod(p: &[f64], d: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = trim(d);
    let lead = *d.last().expect("nonempty divisor");
    assert!(lead != 0.0, "division by the zero polynomial");
    let mut rem = p.to_vec();
    if p.len() < d.len() {
        return (vec![0.0], rem);
    }
    let mut quot = vec![0.0; p.len() - d.len() + 1];
    for k in (0..quot.len()).rev() {
        let c = rem[k + d.len() - 1] / lead;
        quot[k] = c;
        for (j, &dj) in d.iter().enumerate() {
            rem[k + j] -= c * dj;
        }
    }
    rem.truncate(d.len() - 1);
    if rem.is_empty() {
        rem.push(0.0);
    }
    (quot, rem)
}

/// Monic real polynomial with the given roots (complex roots must come in
/// conjugate pairs; imaginary round-off is discarded).
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}

/// All complex roots of a real polynomial by Aberth–Ehrlich iteration,
/// followed by a few Newton steps on the undeflated polynomial.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let coeffs = trim(coeffs);
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();

    // start on a circle whose radius is the geometric mean of root moduli
    let radius = if monic[0] != 0.0 {
        monic[0].abs().powf(1.0 / n as f64)
    } else {
        1.0
    };
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    let mut converged = false;
    let mut prev_step = f64::INFINITY;
    for _ in 0..ABERTH_MAX_ITER {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval_with_derivative(&monic, z[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= step;
            max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
        }
        // stop at full precision, or once round-off stalls progress
        if max_step < 1e-15 || (max_step < 1e-11 && max_step >= 0.5 * prev_step) {
            converged = true;
            break;
        }
        prev_step = max_step;
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            what: "Aberth-Ehrlich root iteration",
            iterations: ABERTH_MAX_ITER,
        });
    }
    for zk in z.iter_mut() {
        for _ in 0..POLISH_STEPS {
            let (p, dp) = eval_with_derivative(&monic, *zk);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *zk -= step;
        }
        if zk.im.abs() < 1e-14 * zk.norm().max(1.0) {
            zk.im = 0.0;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v.iter().map(|z| z.re).collect()
    }

    #[test]
    fn real_roots_of_cubic() {
        // (z−1)(z−2)(z+3)
        let p = [6.0, -7.0, 0.0, 1.0];
        let r = roots(&p).unwrap();
        let re = sorted_real(r.clone());
        for (got, want) in re.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-13);
        }
        assert!(r.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn complex_pair() {
        // z² + 1
        let r = roots(&[1.0, 0.0, 1.0]).unwrap();
        assert!(r.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14 && z.re.abs() < 1e-14));
    }

    #[test]
    fn division_round_trip() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 0.0, 1.0, 2.0];
        let p = mul(&a, &b);
        let (q, r) = divmod(&p, &a);
        assert!(r.iter().all(|c| c.abs() < 1e-14));
        for (x, y) in q.iter().zip(b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn roots_rebuild_polynomial() {
        let p = [0.2, 0.2, -0.8, 0.2, 0.2];
        let r = roots(&p).unwrap();
        let q = from_roots(&r);
        for (x, y) in q.iter().zip(p.iter().map(|c| c / 0.2)) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

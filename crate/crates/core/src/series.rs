//! Power series in `s` truncated at a fixed horizon.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;

/// Coefficients `c_0, …, c_{n_max}` of `Σ c_n s^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<f64>,
}

/// A truncated evaluation together with crude error indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSum {
    pub value: f64,
    /// `|c_{n_max}|·s^{n_max}`, the magnitude of the last term included.
    pub next_term: f64,
    /// `s^{n_max+1}/(1−s)`, a bound on the omitted tail when every
    /// coefficient is a probability; infinite for `s ≥ 1`.
    pub tail_bound: f64,
}

impl TruncatedSeries {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            coeffs: vec![0.0; n_max + 1],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a series has at least the constant term");
        Self { coeffs }
    }

    /// `s^k` truncated at `n_max`.
    pub fn monomial(k: usize, n_max: usize) -> Self {
        let mut s = Self::zeros(n_max);
        if k <= n_max {
            s.coeffs[k] = 1.0;
        }
        s
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.n_max() != other.n_max() {
            return Err(Error::HorizonMismatch {
                left: self.n_max(),
                right: other.n_max(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Cauchy product, exact for coefficients `0..=n_max`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let n = self.n_max();
        let coeffs = (0..=n)
            .map(|k| neumaier_sum((0..=k).map(|i| self.coeffs[i] * other.coeffs[k - i])))
            .collect();
        Ok(Self { coeffs })
    }

    /// Horner evaluation at real `s`.
    pub fn evaluate(&self, s: f64) -> PartialSum {
        let value = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c);
        let n = self.n_max();
        let next_term = self.coeffs[n].abs() * s.abs().powi(n as i32);
        let tail_bound = if s.abs() < 1.0 {
            s.abs().powi(n as i32 + 1) / (1.0 - s.abs())
        } else {
            f64::INFINITY
        };
        PartialSum {
            value,
            next_term,
            tail_bound,
        }
    }

    /// Running partial sums `Σ_{k≤n} c_k` at `s = 1`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.coeffs
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect()
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl Index<usize> for TruncatedSeries {
    type Output = f64;

    fn index(&self, n: usize) -> &f64 {
        &self.coeffs[n]
    }
}

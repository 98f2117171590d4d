//! Exact dynamic programs for the unreflected walk `S_n`.
//!
//! These tables are oracles: partial sums of first-passage laws converge
//! like `n^{−1/2}` for centered walks, far too slowly for production use.
//! The exact ladder laws come from [`crate::wiener_hopf`].

use crate::error::{Error, Result};
use crate::law::LatticeLaw;
use crate::series::TruncatedSeries;

/// Default memory budget for stored tables, in bytes.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 30;

/// `P[τ^{*-} > n, S_n = y]` for `n = 0..=n_max`, `y = 0..=b·n`.
#[derive(Debug, Clone)]
pub struct HalfLineTable {
    law: LatticeLaw,
    rows: Vec<Vec<f64>>,
    dropped: Vec<f64>,
}

impl HalfLineTable {
    pub fn law(&self) -> &LatticeLaw {
        &self.law
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// Entry `(n, y)`, zero outside the stored window.
    pub fn get(&self, n: usize, y: i64) -> f64 {
        if y < 0 {
            return 0.0;
        }
        self.rows[n].get(y as usize).copied().unwrap_or(0.0)
    }

    /// Mass that left `[0, ∞)` at step `n` (zero for `n = 0`).
    pub fn dropped(&self, n: usize) -> f64 {
        self.dropped[n]
    }

    /// Coefficient series of `𝔘^+(s|y) = Σ_n s^n P[τ^{*-} > n, S_n = y]`.
    pub fn potential_series(&self, y: i64) -> TruncatedSeries {
        TruncatedSeries::from_coeffs((0..=self.n_max()).map(|n| self.get(n, y)).collect())
    }
}

fn check_memory(n_max: usize, width_per_step: usize, cap: usize) -> Result<()> {
    let entries = (n_max + 1).saturating_mul(n_max + 1).saturating_mul(width_per_step) / 2 + n_max + 1;
    let bytes = entries.saturating_mul(std::mem::size_of::<f64>());
    if bytes > cap {
        return Err(Error::HorizonTooLarge { n_max, bytes, cap });
    }
    Ok(())
}

pub fn stay_nonneg_table(law: &LatticeLaw, n_max: usize) -> Result<HalfLineTable> {
    stay_nonneg_table_with_cap(law, n_max, DEFAULT_MEMORY_CAP)
}

/// Builds the killed-below-zero table, refusing horizons whose storage
/// estimate exceeds `cap` bytes.
pub fn stay_nonneg_table_with_cap(law: &LatticeLaw, n_max: usize, cap: usize) -> Result<HalfLineTable> {
    check_memory(n_max, law.b(), cap)?;
    let b = law.b();
    let support: Vec<(i64, f64)> = law.support().collect();
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut dropped = vec![0.0; n_max + 1];
    rows.push(vec![1.0]);
    for n in 1..=n_max {
        let prev: &Vec<f64> = &rows[n - 1];
        let mut next = vec![0.0; b * n + 1];
        let mut lost = 0.0;
        for (y, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(k, m) in &support {
                let t = y as i64 + k;
                if t < 0 {
                    lost += p * m;
                } else {
                    next[t as usize] += p * m;
                }
            }
        }
        dropped[n] = lost;
        rows.push(next);
    }
    Ok(HalfLineTable {
        law: law.clone(),
        rows,
        dropped,
    })
}

/// Series `w ↦ Σ_n s^n P[τ^{*-} = n, S_n = −w]`, `w = 1..=a` (index `w−1`).
///
/// Rows are rolled, not stored; at step `m` only heights from which the
/// walk can still drop below zero by step `n_max` are kept, so the
/// coefficients are exact while memory stays linear in `n_max`.
pub fn descent_joint_table(law: &LatticeLaw, n_max: usize) -> Result<Vec<TruncatedSeries>> {
    if n_max < 1 {
        return Err(Error::OutOfRange("descent table needs n_max ≥ 1".into()));
    }
    let a = law.a();
    let b = law.b();
    let support: Vec<(i64, f64)> = law.support().collect();
    let mut out = vec![TruncatedSeries::zeros(n_max); a];
    let mut cur = vec![1.0];
    for n in 1..=n_max {
        // heights reachable after n steps that can still descend in time
        let keep = (b * n).min(a * (n_max - n + 1).saturating_sub(1) + a.saturating_sub(1));
        let mut next = vec![0.0; keep + 1];
        for (y, &p) in cur.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(k, m) in &support {
                let t = y as i64 + k;
                if t < 0 {
                    out[(-t - 1) as usize].coeffs_mut()[n] += p * m;
                } else if (t as usize) <= keep {
                    next[t as usize] += p * m;
                }
            }
        }
        cur = next;
    }
    Ok(out)
}

/// Series `j ↦ Σ_n s^n P[τ^+ = n, S_n = j]`, `j = 0..=b` (index `j`).
pub fn ascent_joint_table(law: &LatticeLaw, n_max: usize) -> Result<Vec<TruncatedSeries>> {
    if n_max < 1 {
        return Err(Error::OutOfRange("ascent table needs n_max ≥ 1".into()));
    }
    let a = law.a();
    let b = law.b();
    let support: Vec<(i64, f64)> = law.support().collect();
    let mut out = vec![TruncatedSeries::zeros(n_max); b + 1];
    // cur[i] holds P[τ^+ > n, S_n = −(i+1)]
    let mut cur = vec![0.0; a];
    for &(k, m) in &support {
        if k >= 0 {
            out[k as usize].coeffs_mut()[1] += m;
        } else {
            cur[(-k - 1) as usize] += m;
        }
    }
    for n in 2..=n_max {
        let keep = (a * n).min(b * (n_max - n + 1));
        let mut next = vec![0.0; keep];
        for (i, &p) in cur.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let y = -(i as i64) - 1;
            for &(k, m) in &support {
                let t = y + k;
                if t >= 0 {
                    out[t as usize].coeffs_mut()[n] += p * m;
                } else if ((-t - 1) as usize) < keep {
                    next[(-t - 1) as usize] += p * m;
                }
            }
        }
        cur = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{law_a, law_b, symmetric_five};
    use approx::assert_relative_eq;

    #[test]
    fn stay_nonneg_examples() {
        let t = stay_nonneg_table(&law_a(), 4).unwrap();
        assert_eq!(t.row(0), &[1.0]);
        assert_relative_eq!(t.get(1, 0), 1.0 / 3.0, epsilon = 1e-16);
        assert_relative_eq!(t.get(1, 1), 1.0 / 3.0, epsilon = 1e-16);
        assert_relative_eq!(t.get(2, 0), 2.0 / 9.0, epsilon = 1e-16);
    }

    #[test]
    fn mass_conservation() {
        for law in [law_a(), law_b(), symmetric_five()] {
            let t = stay_nonneg_table(&law, 80).unwrap();
            for n in 1..=80 {
                let before: f64 = t.row(n - 1).iter().sum();
                let after: f64 = t.row(n).iter().sum();
                assert!((after + t.dropped(n) - before).abs() < 1e-14);
                assert!(after <= before + 1e-15);
                assert!(t.row(n).iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }

    #[test]
    fn horizon_cap() {
        let err = stay_nonneg_table_with_cap(&law_a(), 10_000, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::HorizonTooLarge { .. }));
    }

    #[test]
    fn descent_examples() {
        let d = descent_joint_table(&law_a(), 10).unwrap();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d[0][1], 1.0 / 3.0, epsilon = 1e-16);
        assert_relative_eq!(d[0][2], 1.0 / 9.0, epsilon = 1e-16);
        let d5 = descent_joint_table(&symmetric_five(), 10).unwrap();
        assert_eq!(d5.len(), 2);
        assert_relative_eq!(d5[1][1], 0.2, epsilon = 1e-16);
    }

    #[test]
    fn descent_agrees_with_stored_table() {
        let law = symmetric_five();
        let n_max = 40;
        let table = stay_nonneg_table(&law, n_max).unwrap();
        let d = descent_joint_table(&law, n_max).unwrap();
        for w in 1..=law.a() as i64 {
            for n in 1..=n_max {
                let direct: f64 = table
                    .row(n - 1)
                    .iter()
                    .enumerate()
                    .map(|(y, p)| p * law.mass(-w - y as i64))
                    .sum();
                assert!((direct - d[(w - 1) as usize][n]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ascent_examples() {
        let u = ascent_joint_table(&law_a(), 30).unwrap();
        assert_relative_eq!(u[0][1], 1.0 / 3.0, epsilon = 1e-16);
        assert_relative_eq!(u[1][1], 1.0 / 3.0, epsilon = 1e-16);
        assert!((2..=30).all(|n| u[1][n] == 0.0));
        let total: f64 = u.iter().map(|s| s.coeffs().iter().sum::<f64>()).sum();
        assert!(total <= 1.0 + 1e-15);
    }

    #[test]
    fn descent_completeness_improves() {
        let d = descent_joint_table(&law_a(), 4000).unwrap();
        let cum = d[0].cumulative();
        let gap_1000 = 1.0 - cum[1000];
        let gap_4000 = 1.0 - cum[4000];
        assert!(gap_4000 > 0.0 && gap_4000 < gap_1000);
        // tail ~ c/√N: quadrupling N roughly halves the gap
        assert!((gap_1000 / gap_4000 - 2.0).abs() < 0.1);
    }
}

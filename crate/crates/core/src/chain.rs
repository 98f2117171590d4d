//! Exact finite-horizon laws of the reflected chain `X_{n+1} = |X_n + Y|`.
//!
//! The dynamic programs here share no code with [`crate::fluctuation`]; the
//! identity checks at the bottom compare the two modules against each other.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuation::{descent_joint_table, stay_nonneg_table};
use crate::law::LatticeLaw;
use crate::series::TruncatedSeries;

/// Largest horizon accepted by the stored tables.
pub const MAX_HORIZON: usize = 10_000;
/// Storage budget for one stored table, in bytes.
pub const TABLE_MEMORY_CAP: usize = 1 << 30;

/// One row `y ↦ q(x, y)` of the transition kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub x: usize,
    pub entries: Vec<(usize, f64)>,
}

impl StepRow {
    pub fn get(&self, y: usize) -> f64 {
        self.entries
            .iter()
            .find(|&&(s, _)| s == y)
            .map_or(0.0, |&(_, p)| p)
    }
}

pub fn step_row(law: &LatticeLaw, x: usize) -> StepRow {
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (k, m) in law.support() {
        let y = (x as i64 + k).unsigned_abs() as usize;
        match entries.iter_mut().find(|(s, _)| *s == y) {
            Some(e) => e.1 += m,
            None => entries.push((y, m)),
        }
    }
    entries.sort_by_key(|&(y, _)| y);
    StepRow { x, entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TableKind {
    /// `ℙ_x[X_n = y]`.
    Full,
    /// `ℙ_x[X_n = y, 𝐫 > n]`.
    Excursion,
    /// `ℙ_x[𝐫 = n, X_𝐫 = w]`, indexed by `w`.
    ReflectionTime,
}

/// Rows `n = 0..=n_max`, each a dense vector over states `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTable {
    pub kind: TableKind,
    pub start: usize,
    rows: Vec<Vec<f64>>,
}

impl EvolutionTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn get(&self, n: usize, y: usize) -> f64 {
        self.rows[n].get(y).copied().unwrap_or(0.0)
    }

    /// Generating-function coefficients `n ↦ get(n, y)`.
    pub fn series(&self, y: usize) -> TruncatedSeries {
        TruncatedSeries::from_coeffs((0..=self.n_max()).map(|n| self.get(n, y)).collect())
    }

    pub fn row_sum(&self, n: usize) -> f64 {
        self.rows[n].iter().sum()
    }
}

fn check_horizon(law: &LatticeLaw, x: usize, n_max: usize) -> Result<()> {
    let width = x + law.b() * n_max / 2 + 1;
    let bytes = (n_max + 1).saturating_mul(width).saturating_mul(8);
    if n_max > MAX_HORIZON || bytes > TABLE_MEMORY_CAP {
        return Err(Error::HorizonTooLarge {
            n_max,
            bytes,
            cap: TABLE_MEMORY_CAP,
        });
    }
    Ok(())
}

fn reflected_step(law: &LatticeLaw, row: &[f64]) -> Vec<f64> {
    // reachable: up to `len−1+b`, and `a` from the origin via reflection
    let mut next = vec![0.0; (row.len() - 1 + law.b()).max(law.a()) + 1];
    for (x, &p) in row.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (k, m) in law.support() {
            next[(x as i64 + k).unsigned_abs() as usize] += p * m;
        }
    }
    next
}

/// Exact laws of `X_0..X_{n_max}` started at `x`.
pub fn n_step_table(law: &LatticeLaw, x: usize, n_max: usize) -> Result<EvolutionTable> {
    check_horizon(law, x, n_max)?;
    let mut first = vec![0.0; x + 1];
    first[x] = 1.0;
    let mut rows = vec![first];
    for n in 1..=n_max {
        let next = reflected_step(law, &rows[n - 1]);
        rows.push(next);
    }
    Ok(EvolutionTable {
        kind: TableKind::Full,
        start: x,
        rows,
    })
}

/// `ℙ_x[X_n = y]` for `n = 0..=n_max` and each requested `y`, with only
/// one row kept in memory.
pub fn return_probabilities(law: &LatticeLaw, x: usize, ys: &[usize], n_max: usize) -> Vec<Vec<f64>> {
    let mut row = vec![0.0; x + 1];
    row[x] = 1.0;
    let pick = |row: &[f64]| ys.iter().map(|&y| row.get(y).copied().unwrap_or(0.0)).collect::<Vec<_>>();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(pick(&row));
    for _ in 0..n_max {
        row = reflected_step(law, &row);
        out.push(pick(&row));
    }
    out
}

fn killed_tables(law: &LatticeLaw, x: usize, n_max: usize) -> Result<(EvolutionTable, EvolutionTable)> {
    check_horizon(law, x, n_max)?;
    let a = law.a();
    let mut first = vec![0.0; x + 1];
    first[x] = 1.0;
    let mut excursion = vec![first];
    let mut reflection = vec![vec![0.0; a + 1]];
    for n in 1..=n_max {
        let prev = &excursion[n - 1];
        let mut next = vec![0.0; prev.len() + law.b()];
        let mut hits = vec![0.0; a + 1];
        for (y, &p) in prev.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, m) in law.support() {
                let t = y as i64 + k;
                if t < 0 {
                    hits[(-t) as usize] += p * m;
                } else {
                    next[t as usize] += p * m;
                }
            }
        }
        excursion.push(next);
        reflection.push(hits);
    }
    Ok((
        EvolutionTable {
            kind: TableKind::Excursion,
            start: x,
            rows: excursion,
        },
        EvolutionTable {
            kind: TableKind::ReflectionTime,
            start: x,
            rows: reflection,
        },
    ))
}

/// Laws of `X_n` on the event that no reflection happened by time `n`.
pub fn excursion_table(law: &LatticeLaw, x: usize, n_max: usize) -> Result<EvolutionTable> {
    killed_tables(law, x, n_max).map(|(e, _)| e)
}

/// Joint law of the first reflection time and the reflected position.
pub fn reflection_time_table(law: &LatticeLaw, x: usize, n_max: usize) -> Result<EvolutionTable> {
    killed_tables(law, x, n_max).map(|(_, r)| r)
}

/// Max over `n ≤ n_max` of the first-reflection decomposition residual
/// `ℙ_x[X_n=y] − ℙ_x[X_n=y, 𝐫>n] − Σ_k Σ_w ℙ_x[𝐫=k, X_𝐫=w]·ℙ_w[X_{n−k}=y]`.
pub fn verify_first_reflection_identity(law: &LatticeLaw, x: usize, y: usize, n_max: usize) -> Result<f64> {
    let full = n_step_table(law, x, n_max)?;
    let (exc, refl) = killed_tables(law, x, n_max)?;
    let from_w: Vec<EvolutionTable> = (1..=law.a())
        .map(|w| n_step_table(law, w, n_max))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        let mut rhs = exc.get(n, y);
        for k in 1..=n {
            for w in 1..=law.a() {
                rhs += refl.get(k, w) * from_w[w - 1].get(n - k, y);
            }
        }
        worst = worst.max((full.get(n, y) - rhs).abs());
    }
    Ok(worst)
}

/// Coefficient-level residuals of the ladder decompositions of the
/// excursion and reflection generating functions, started at `x` and read
/// at `y`. The reflection identity is only meaningful for `y ≥ 1` and is
/// `None` at `y = 0`.
pub fn verify_ladder_factorizations(
    law: &LatticeLaw,
    x: usize,
    y: usize,
    n_max: usize,
) -> Result<(f64, Option<f64>)> {
    let a = law.a();
    let descent = descent_joint_table(law, n_max.max(1))?;
    let half_line = stay_nonneg_table(law, n_max)?;
    let t_minus = |k: i64| -> TruncatedSeries {
        if k <= -1 && k >= -(a as i64) {
            let s = &descent[(-k - 1) as usize];
            TruncatedSeries::from_coeffs(s.coeffs()[..=n_max].to_vec())
        } else {
            TruncatedSeries::zeros(n_max)
        }
    };
    let tables: Vec<(EvolutionTable, EvolutionTable)> =
        (0..=x).map(|w| killed_tables(law, w, n_max)).collect::<Result<_>>()?;

    let mut e_rhs = if y >= x {
        half_line.potential_series((y - x) as i64)
    } else {
        TruncatedSeries::zeros(n_max)
    };
    let mut r_rhs = t_minus(-(x as i64) - y as i64);
    for w in 0..x {
        let t = t_minus(w as i64 - x as i64);
        e_rhs = e_rhs.add(&t.mul(&tables[w].0.series(y))?)?;
        r_rhs = r_rhs.add(&t.mul(&tables[w].1.series(y))?)?;
    }
    let e_res = tables[x].0.series(y).max_abs_diff(&e_rhs)?;
    let r_res = tables[x].1.series(y).max_abs_diff(&r_rhs)?;
    Ok((e_res, (y >= 1).then_some(r_res)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{law_a, law_b, symmetric_five};
    use approx::assert_relative_eq;

    #[test]
    fn step_rows() {
        let r = step_row(&law_a(), 0);
        assert_relative_eq!(r.get(0), 1.0 / 3.0);
        assert_relative_eq!(r.get(1), 2.0 / 3.0);
        let r = step_row(&law_a(), 5);
        assert_eq!(r.entries.iter().map(|e| e.0).collect::<Vec<_>>(), vec![4, 5, 6]);
        let r = step_row(&law_b(), 0);
        assert_relative_eq!(r.get(0), 0.3);
        assert_relative_eq!(r.get(1), 0.7);
        for law in [law_a(), law_b(), symmetric_five()] {
            for x in 0..6 {
                let row = step_row(&law, x);
                let total: f64 = row.entries.iter().map(|e| e.1).sum();
                assert!((total - 1.0).abs() < 1e-14);
                assert_relative_eq!(row.get(0), law.mass(-(x as i64)));
            }
        }
    }

    #[test]
    fn n_step_examples() {
        let t = n_step_table(&law_a(), 0, 2).unwrap();
        assert_relative_eq!(t.get(2, 0), 1.0 / 3.0, epsilon = 1e-16);
        assert_eq!(t.row(0), &[1.0]);
        let t = n_step_table(&law_b(), 0, 1).unwrap();
        assert_relative_eq!(t.get(1, 1), step_row(&law_b(), 0).get(1));
    }

    #[test]
    fn stochastic_rows() {
        let t = n_step_table(&symmetric_five(), 3, 1000).unwrap();
        for n in 0..=1000 {
            assert!((t.row_sum(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn excursion_and_reflection_examples() {
        let law = law_a();
        let e = excursion_table(&law, 0, 5).unwrap();
        assert_relative_eq!(e.get(1, 0), 1.0 / 3.0);
        assert_relative_eq!(e.get(1, 1), 1.0 / 3.0);
        let r = reflection_time_table(&law, 0, 5).unwrap();
        assert_relative_eq!(r.get(1, 1), 1.0 / 3.0);
        assert_relative_eq!(r.get(2, 1), 1.0 / 9.0);
        assert!((0..=5).all(|n| r.get(n, 0) == 0.0 && r.get(n, 2) == 0.0));
    }

    #[test]
    fn bookkeeping() {
        for law in [law_a(), law_b(), symmetric_five()] {
            let (e, r) = killed_tables(&law, 2, 200).unwrap();
            let mut reflected = 0.0;
            for n in 0..=200 {
                reflected += r.row_sum(n);
                assert!((e.row_sum(n) + reflected - 1.0).abs() < 1e-12);
                assert_eq!(r.get(n, 0), 0.0);
            }
        }
    }

    #[test]
    fn deep_left_jump_from_origin() {
        // a = 3 exceeds b + width of the first row
        let law = LatticeLaw::new(-3, vec![0.2; 5]).unwrap();
        let t = n_step_table(&law, 0, 3).unwrap();
        assert_eq!(t.row(1), &[0.2, 0.4, 0.2, 0.2]);
        for n in 0..=3 {
            assert_relative_eq!(t.row_sum(n), 1.0, epsilon = 1e-15);
        }
        let r = return_probabilities(&law, 0, &[3], 1);
        assert_eq!(r[1][0], 0.2);
    }

    #[test]
    fn far_start_is_free_walk() {
        let law = symmetric_five();
        let n_max = 20;
        let x = law.a() * n_max + 1;
        let e = excursion_table(&law, x, n_max).unwrap();
        // free convolution powers, indexed from the lowest reachable point
        let mut free = vec![1.0];
        for n in 1..=n_max {
            let mut next = vec![0.0; free.len() + law.masses().len() - 1];
            for (i, &p) in free.iter().enumerate() {
                for (j, &m) in law.masses().iter().enumerate() {
                    next[i + j] += p * m;
                }
            }
            free = next;
            let lowest = x - law.a() * n;
            for (i, &p) in free.iter().enumerate() {
                assert!((e.get(n, lowest + i) - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn first_reflection_identity() {
        assert_eq!(verify_first_reflection_identity(&law_a(), 0, 1, 1).unwrap(), 0.0);
        assert!(verify_first_reflection_identity(&law_b(), 2, 0, 40).unwrap() < 1e-12);
    }

    #[test]
    fn ladder_factorizations() {
        let (e, r) = verify_ladder_factorizations(&law_a(), 0, 2, 30).unwrap();
        assert!(e < 1e-15 && r.unwrap() < 1e-15);
        let (e, r) = verify_ladder_factorizations(&law_a(), 3, 2, 60).unwrap();
        assert!(e < 1e-12 && r.unwrap() < 1e-12);
        let (e, r) = verify_ladder_factorizations(&law_b(), 2, 1, 60).unwrap();
        assert!(e < 1e-12 && r.unwrap() < 1e-12);
        let (_, r) = verify_ladder_factorizations(&symmetric_five(), 4, 0, 30).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn horizon_guard() {
        assert!(matches!(
            n_step_table(&law_a(), 0, MAX_HORIZON + 1),
            Err(Error::HorizonTooLarge { .. })
        ));
    }
}

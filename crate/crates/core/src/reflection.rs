//! The process of successive reflection targets `X_{𝐫_k}` and the excursion
//! values that feed the asymptotic constants.
//!
//! Every object lives on columns `y ∈ [1, a]` (overshoots are bounded by
//! `a`), so each "infinite" matrix is a finite row generator plus an
//! `a × a` core.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::LatticeLaw;
use crate::numeric::{slopes_agree, sqrt_slope};
use crate::wiener_hopf::{ladder_at, LadderSystem, SlopeTable, SLOPE_TOL};

const STATIONARITY_TOL: f64 = 1e-8;
const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 10_000;
const CONDITION_CAP: f64 = 1e12;

/// Rows `x = 0..=x_max` of `𝓡(x, y)`, columns `y = 1..=a` at index `y−1`.
///
/// Built from whatever potentials `ladder` carries, so a ladder system at
/// `s < 1` yields `𝓡_s`.
pub fn r_matrix(ladder: &LadderSystem, x_max: usize) -> Vec<Vec<f64>> {
    let a = ladder.a() as i64;
    (0..=x_max as i64)
        .map(|x| {
            (1..=a)
                .map(|y| {
                    (0..=x)
                        .map(|w| ladder.u_minus_at(-w) * ladder.mu_minus_at(w - x - y))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// `𝓡_s` on rows `0..=x_max` for a centered law.
pub fn r_matrix_at_s(law: &LatticeLaw, s: f64, x_max: usize) -> Result<Vec<Vec<f64>>> {
    let ladder = ladder_at(law, s, x_max)?;
    Ok(r_matrix(&ladder, x_max))
}

/// The `a × a` block on `x, y ∈ [1, a]`.
pub fn core_block(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let a = rows[0].len();
    rows[1..=a].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuConvention {
    /// Inner ladder mass over `[1−x−y, −x−1]`.
    HalfOpen,
    /// Inner ladder mass over `[1−x−y, −x]`.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryMeasure {
    /// `ν(x)` for `x = 1..=a`, at index `x−1`.
    pub nu: Vec<f64>,
    pub convention: NuConvention,
    /// `‖ν𝓡 − ν‖₁` on the core.
    pub residual: f64,
}

fn nu_candidate(ladder: &LadderSystem, convention: NuConvention) -> Vec<f64> {
    let a = ladder.a() as i64;
    let m = |k: i64| ladder.mu_minus_at(k);
    let raw: Vec<f64> = (1..=a)
        .map(|x| {
            let hi = match convention {
                NuConvention::HalfOpen => -x - 1,
                NuConvention::Closed => -x,
            };
            (1..=a)
                .map(|y| {
                    let inner: f64 = (1 - x - y..=hi).map(m).sum();
                    (m(-x) / 2.0 + inner + m(-x - y) / 2.0) * m(-y)
                })
                .sum()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn stationarity_residual(nu: &[f64], core: &[Vec<f64>]) -> f64 {
    let a = nu.len();
    (0..a)
        .map(|y| {
            let image: f64 = (0..a).map(|x| nu[x] * core[x][y]).sum();
            (image - nu[y]).abs()
        })
        .sum()
}

/// Closed-form invariant law of the reflection targets, normalized.
pub fn stationary_nu(ladder: &LadderSystem) -> Result<StationaryMeasure> {
    let core = core_block(&r_matrix(ladder, ladder.a()));
    let mut worst: f64 = 0.0;
    for convention in [NuConvention::HalfOpen, NuConvention::Closed] {
        let nu = nu_candidate(ladder, convention);
        let residual = stationarity_residual(&nu, &core);
        if residual < STATIONARITY_TOL {
            return Ok(StationaryMeasure {
                nu,
                convention,
                residual,
            });
        }
        worst = worst.max(residual);
    }
    Err(Error::StationarityFailure { residual: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoeblinCheck {
    pub kappa: f64,
    /// `min_{x,y} 𝓡(x,y) − κ·μ^{*-}(−y)` over the checked rows.
    pub min_slack: f64,
}

/// `κ = min_{1 ≤ k ≤ depth} U^{*-}(−k)` and the minorization slack on rows
/// `0..=x_max`.
pub fn doeblin_kappa(ladder: &LadderSystem, x_max: usize) -> DoeblinCheck {
    let kappa = ladder.u_minus[1..].iter().copied().fold(f64::INFINITY, f64::min);
    let rows = r_matrix(ladder, x_max);
    let min_slack = rows
        .iter()
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(i, &r)| r - kappa * ladder.mu_minus[i])
        })
        .fold(f64::INFINITY, f64::min);
    DoeblinCheck { kappa, min_slack }
}

/// Closed-form singularity slope `𝓡̃` on rows `0..=x_max`.
pub fn r_tilde_closed(ladder: &LadderSystem, slopes: &SlopeTable, x_max: usize) -> Vec<Vec<f64>> {
    let a = ladder.a() as i64;
    (0..=x_max as i64)
        .map(|x| {
            (1..=a)
                .map(|y| {
                    let from_potential: f64 = (0..x)
                        .map(|k| slopes.u_minus_at(k - x) * ladder.mu_minus_at(-k - y))
                        .sum();
                    let from_ladder: f64 = (0..=x)
                        .map(|k| ladder.u_minus_at(k - x) * slopes.t_minus_at(-k - y))
                        .sum();
                    from_potential + from_ladder
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RTilde {
    pub rows: Vec<Vec<f64>>,
    /// Rows `0..verified_rows` were compared against extrapolation.
    pub verified_rows: usize,
    pub max_discrepancy: f64,
}

/// Rows cross-checked against extrapolation of `𝓡_s`: row `x` carries
/// powers of the ladder transform up to `x + 1`, whose higher-order
/// expansion terms outgrow the fixed step sizes for large `x`.
pub fn matrix_verify_rows(ladder: &LadderSystem) -> usize {
    ladder.a() + ladder.b()
}

/// `𝓡̃` with the closed form cross-validated by Richardson extrapolation.
pub fn r_tilde(law: &LatticeLaw, ladder: &LadderSystem, slopes: &SlopeTable, x_max: usize) -> Result<RTilde> {
    let rows = r_tilde_closed(ladder, slopes, x_max);
    let check = matrix_verify_rows(ladder).min(x_max);
    let a = ladder.a();
    let extrapolated = sqrt_slope(|s| Ok(r_matrix_at_s(law, s, check)?.concat()))?;
    let mut worst: f64 = 0.0;
    for x in 0..=check {
        for y in 0..a {
            let c = rows[x][y];
            let r = extrapolated[x * a + y];
            worst = worst.max((c - r).abs() / c.abs().max(r.abs()).max(1.0));
            if !slopes_agree(c, r, SLOPE_TOL) {
                return Err(Error::SlopeMismatch {
                    what: format!("R_tilde({x},{})", y + 1),
                    closed: c,
                    extrapolated: r,
                });
            }
        }
    }
    Ok(RTilde {
        rows,
        verified_rows: check + 1,
        max_discrepancy: worst,
    })
}

/// `x ↦ 𝓔(x, y)` and `x ↦ 𝓔̃(x, y)` on `0..=x_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionColumn {
    pub y: usize,
    pub e: Vec<f64>,
    pub e_tilde: Vec<f64>,
    pub verified_rows: usize,
    pub max_discrepancy: f64,
}

fn e_values(ladder: &LadderSystem, y: usize, x_max: usize) -> Vec<f64> {
    let y = y as i64;
    (0..=x_max as i64)
        .map(|x| {
            (0..=x.min(y))
                .map(|k| ladder.u_minus_at(k - x) * ladder.u_plus_at(y - k))
                .sum()
        })
        .collect()
}

fn e_tilde_values(ladder: &LadderSystem, slopes: &SlopeTable, y: usize, x_max: usize) -> Vec<f64> {
    let y = y as i64;
    (0..=x_max as i64)
        .map(|x| {
            (0..=x.min(y))
                .map(|k| {
                    slopes.u_minus_at(k - x) * ladder.u_plus_at(y - k)
                        + ladder.u_minus_at(k - x) * slopes.u_plus_at(y - k)
                })
                .sum()
        })
        .collect()
}

/// Excursion values at `s = 1` and their `√(1−s)` slopes. Entries with
/// `x` and `y` inside the resolvable window are cross-checked against
/// extrapolation of the `s`-dependent excursion transform.
pub fn e_column(
    law: &LatticeLaw,
    ladder: &LadderSystem,
    slopes: &SlopeTable,
    y: usize,
    x_max: usize,
) -> Result<ExcursionColumn> {
    let e = e_values(ladder, y, x_max);
    let e_tilde = e_tilde_values(ladder, slopes, y, x_max);
    let window = matrix_verify_rows(ladder);
    let mut verified_rows = 0;
    let mut worst: f64 = 0.0;
    if y <= window {
        let check = window.min(x_max);
        let depth = check + y + 1;
        let extrapolated = sqrt_slope(|s| Ok(e_values(&ladder_at(law, s, depth)?, y, check)))?;
        for x in 0..=check {
            let (c, r) = (e_tilde[x], extrapolated[x]);
            worst = worst.max((c - r).abs() / c.abs().max(r.abs()).max(1.0));
            if !slopes_agree(c, r, SLOPE_TOL) {
                return Err(Error::SlopeMismatch {
                    what: format!("E_tilde({x},{y})"),
                    closed: c,
                    extrapolated: r,
                });
            }
        }
        verified_rows = check + 1;
    }
    Ok(ExcursionColumn {
        y,
        e,
        e_tilde,
        verified_rows,
        max_discrepancy: worst,
    })
}

/// Perron root of a nonnegative square matrix by power iteration.
pub fn dominant_eigenvalue(core: &[Vec<f64>]) -> Result<f64> {
    let n = core.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| core[i][j] * v[j]).sum()).collect();
        let norm: f64 = w.iter().sum();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let moved = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let settled = (norm - lambda).abs() < POWER_TOL * norm.max(1.0) && moved < 1e-12;
        lambda = norm;
        v = next;
        if settled {
            return Ok(lambda);
        }
    }
    Err(Error::ConvergenceFailure {
        what: "power iteration",
        iterations: POWER_MAX_ITER,
    })
}

/// `(I − 𝓡)^{-1}` restricted to the `a × a` core, for substochastic cores.
#[derive(Debug, Clone)]
pub struct Resolvent {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub spectral_radius: f64,
    pub condition: f64,
}

impl Resolvent {
    pub fn new(core: &[Vec<f64>]) -> Result<Self> {
        let a = core.len();
        let spectral_radius = dominant_eigenvalue(core)?;
        if spectral_radius >= 1.0 - 1e-12 {
            return Err(Error::NotInvertibleCentered);
        }
        let m = DMatrix::from_fn(a, a, |i, j| if i == j { 1.0 } else { 0.0 } - core[i][j]);
        let sv = m.singular_values();
        let condition = sv.max() / sv.min();
        if !condition.is_finite() || condition > CONDITION_CAP {
            return Err(Error::SingularSystem { condition });
        }
        Ok(Self {
            lu: m.lu(),
            spectral_radius,
            condition,
        })
    }

    /// Solves `g = f + 𝓡g` on the core.
    pub fn solve(&self, f_core: &[f64]) -> Result<Vec<f64>> {
        let b = DVector::from_column_slice(f_core);
        let g = self
            .lu
            .solve(&b)
            .ok_or(Error::SingularSystem { condition: f64::INFINITY })?;
        Ok(g.iter().copied().collect())
    }

    /// `g(x) = f(x) + Σ_w 𝓡(x,w)·g(w)` from the core solution.
    pub fn extend(f_x: f64, r_row_x: &[f64], g_core: &[f64]) -> f64 {
        f_x + r_row_x.iter().zip(g_core).map(|(r, g)| r * g).sum::<f64>()
    }
}

/// `((I − 𝓡)^{-1} f)(x)` given the core, `f` on the core, `f(x)` and the
/// row `𝓡(x, ·)`.
pub fn resolvent_apply(core: &[Vec<f64>], f_core: &[f64], f_x: f64, r_row_x: &[f64]) -> Result<f64> {
    let g = Resolvent::new(core)?.solve(f_core)?;
    Ok(Resolvent::extend(f_x, r_row_x, &g))
}

/// Everything the centered constant needs, plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionCore {
    pub a: usize,
    pub r_rows: Vec<Vec<f64>>,
    pub r_core: Vec<Vec<f64>>,
    pub nu: StationaryMeasure,
    pub doeblin: DoeblinCheck,
    pub r_tilde: RTilde,
}

impl ReflectionCore {
    pub fn build(law: &LatticeLaw, ladder: &LadderSystem, slopes: &SlopeTable, x_max: usize) -> Result<Self> {
        let a = ladder.a();
        let x_max = x_max.max(a);
        let r_rows = r_matrix(ladder, x_max);
        Ok(Self {
            a,
            r_core: core_block(&r_rows),
            r_rows,
            nu: stationary_nu(ladder)?,
            doeblin: doeblin_kappa(ladder, x_max),
            r_tilde: r_tilde(law, ladder, slopes, x_max)?,
        })
    }

    /// `ν(𝓡̃𝐡) = Σ_x ν(x)·Σ_y 𝓡̃(x,y)`.
    pub fn nu_r_tilde_h(&self) -> f64 {
        (1..=self.a)
            .map(|x| self.nu.nu[x - 1] * self.r_tilde.rows[x].iter().sum::<f64>())
            .sum()
    }

    /// `ν(f) = Σ_{x=1..a} ν(x)·f(x)` for `f` given on `0..`.
    pub fn nu_apply(&self, f: &[f64]) -> f64 {
        (1..=self.a).map(|x| self.nu.nu[x - 1] * f[x]).sum()
    }
}

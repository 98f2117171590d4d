//! Asymptotic return probabilities `ℙ_x[X_n = y] ~ C·ρ^n·n^{−β}`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::return_probabilities;
use crate::error::{Error, Result};
use crate::law::{LatticeLaw, Regime, DRIFT_TOL};
use crate::numeric::{least_squares, GAMMA_HALF, GAMMA_MINUS_HALF, SQRT_PI};
use crate::reflection::{e_column, ExcursionColumn, ReflectionCore, Resolvent};
use crate::wiener_hopf::{default_depth, ladder_laws, slopes, LadderSystem, SlopeTable};

/// Everything derived from a centered law: ladder system, slopes and the
/// reflection core on rows `0..=x_max`.
#[derive(Debug, Clone)]
pub struct CenteredAnalysis {
    pub law: LatticeLaw,
    pub ladder: LadderSystem,
    pub slopes: SlopeTable,
    pub core: ReflectionCore,
    pub x_max: usize,
}

impl CenteredAnalysis {
    /// `window` bounds the target states `y` that will be queried.
    pub fn new(law: &LatticeLaw, x_max: usize, window: usize) -> Result<Self> {
        let x_max = x_max.max(law.a());
        let ladder = ladder_laws(law, default_depth(law, x_max + window + 1))?;
        let slopes = slopes(law, &ladder)?;
        let core = ReflectionCore::build(law, &ladder, &slopes, x_max)?;
        Ok(Self {
            law: law.clone(),
            ladder,
            slopes,
            core,
            x_max,
        })
    }

    pub fn column(&self, y: usize) -> Result<ExcursionColumn> {
        e_column(&self.law, &self.ladder, &self.slopes, y, self.x_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Centered {
        nu_e: f64,
        nu_r_tilde_h: f64,
    },
    Drifted {
        r0: f64,
        rho0: f64,
        /// `((I−𝓡)^{-1}𝓡̃(I−𝓡)^{-1}𝓔)(x,y)`.
        resolvent_r_tilde_term: f64,
        /// `((I−𝓡)^{-1}𝓔̃)(x,y)`.
        resolvent_e_tilde_term: f64,
        spectral_radius: f64,
        prefactor: f64,
    },
}

/// `C·ρ^n·n^{−β}` with the terms it was assembled from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticLaw {
    pub regime: Regime,
    pub rho: f64,
    pub beta: f64,
    #[serde(rename = "C")]
    pub constant: f64,
    pub provenance: Provenance,
}

impl AsymptoticLaw {
    /// Radius of convergence of the return generating function.
    pub fn radius(&self) -> f64 {
        1.0 / self.rho
    }

    /// Exponent of the algebraic singularity `(R − s)^α`.
    pub fn singular_exponent(&self) -> f64 {
        self.beta - 1.0
    }

    /// The coefficient of `(R − s)^α` that produces this constant.
    pub fn singular_amplitude(&self) -> f64 {
        let alpha = self.singular_exponent();
        self.constant * gamma_neg(alpha) / self.radius().powf(alpha)
    }
}

/// `Γ(−α)` for the two exponents that occur.
fn gamma_neg(alpha: f64) -> f64 {
    if alpha < 0.0 {
        GAMMA_HALF
    } else {
        GAMMA_MINUS_HALF
    }
}

/// Coefficient constant of `𝔄·(R − s)^α`: `g_n ~ 𝔄·R^{α−n}·n^{−α−1}/Γ(−α)`.
pub fn darboux_constant(amplitude: f64, radius: f64, alpha: f64) -> f64 {
    amplitude * radius.powf(alpha) / gamma_neg(alpha)
}

pub fn predict(law: &AsymptoticLaw, n: u64) -> f64 {
    leading_term(law.constant, law.rho, law.beta, n)
}

/// `C·ρⁿ·n^(−β)`.
pub fn leading_term(constant: f64, rho: f64, beta: f64, n: u64) -> f64 {
    constant * rho.powf(n as f64) * (n as f64).powf(-beta)
}

fn require_regime(law: &LatticeLaw, want: Regime) -> Result<()> {
    let report = law.check_hypotheses(DRIFT_TOL);
    report.require()?;
    match (report.regime, want) {
        (r, w) if r == w => Ok(()),
        (Regime::NegativeDrift, _) => Err(Error::NegativeDriftUnsupported { drift: report.drift }),
        (_, Regime::Centered) => Err(Error::NotCentered { drift: report.drift }),
        _ => Err(Error::HypothesesFailed(format!(
            "drift {:e} is not positive",
            report.drift
        ))),
    }
}

/// `C_y = −(1/√π)·ν(𝓔(·,y))/ν(𝓡̃𝐡)` for a centered law.
pub fn centered_constant(law: &LatticeLaw, y: usize) -> Result<AsymptoticLaw> {
    require_regime(law, Regime::Centered)?;
    let analysis = CenteredAnalysis::new(law, law.a(), y)?;
    centered_from(&analysis, y)
}

pub fn centered_from(analysis: &CenteredAnalysis, y: usize) -> Result<AsymptoticLaw> {
    let column = analysis.column(y)?;
    let nu_e = analysis.core.nu_apply(&column.e);
    let nu_r_tilde_h = analysis.core.nu_r_tilde_h();
    if !(nu_r_tilde_h < 0.0) {
        return Err(Error::Numerical(format!(
            "ν(R̃h) = {nu_r_tilde_h:e} is not strictly negative"
        )));
    }
    Ok(AsymptoticLaw {
        regime: Regime::Centered,
        rho: 1.0,
        beta: 0.5,
        constant: -nu_e / nu_r_tilde_h / SQRT_PI,
        provenance: Provenance::Centered { nu_e, nu_r_tilde_h },
    })
}

/// Objects of a drifted law obtained by conjugating those of its centered
/// tilt with `Δ = diag(r₀^x)`; rows `x = 0..=x_max`, columns `1..=a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftedInternals {
    pub r0: f64,
    pub rho0: f64,
    pub y: usize,
    pub e: Vec<f64>,
    pub e_tilde: Vec<f64>,
    pub r_rows: Vec<Vec<f64>>,
    pub r_tilde_rows: Vec<Vec<f64>>,
    #[serde(skip)]
    pub centered: ExcursionColumn,
}

pub fn drifted_internals(law: &LatticeLaw, y: usize, x_max: usize) -> Result<(DriftedInternals, CenteredAnalysis)> {
    let (tilted, tilt) = law.centered()?;
    let analysis = CenteredAnalysis::new(&tilted, x_max, y)?;
    let (r0, rho0) = (tilt.r0, tilt.rho0);
    let sqrt_rho = rho0.sqrt();
    let column = analysis.column(y)?;
    let pow = |k: i64| r0.powi(k as i32);
    let e = (0..=analysis.x_max)
        .map(|x| pow(x as i64 - y as i64) * column.e[x])
        .collect();
    let e_tilde = (0..=analysis.x_max)
        .map(|x| sqrt_rho * pow(x as i64 - y as i64) * column.e_tilde[x])
        .collect();
    let conj = |rows: &[Vec<f64>], scale: f64| -> Vec<Vec<f64>> {
        rows.iter()
            .enumerate()
            .map(|(x, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| scale * pow((x + j + 1) as i64) * v)
                    .collect()
            })
            .collect()
    };
    let internals = DriftedInternals {
        r0,
        rho0,
        y,
        e,
        e_tilde,
        r_rows: conj(&analysis.core.r_rows, 1.0),
        r_tilde_rows: conj(&analysis.core.r_tilde.rows, sqrt_rho),
        centered: column,
    };
    Ok((internals, analysis))
}

/// `C_{x,y}` for a law with positive drift.
pub fn drifted_constant(law: &LatticeLaw, x: usize, y: usize) -> Result<AsymptoticLaw> {
    require_regime(law, Regime::PositiveDrift)?;
    let (d, _) = drifted_internals(law, y, x)?;
    let a = law.a();
    let core: Vec<Vec<f64>> = d.r_rows[1..=a].to_vec();
    let resolvent = Resolvent::new(&core)?;

    // v = (I−𝓡)^{-1}𝓔, needed on the core only
    let v = resolvent.solve(&d.e[1..=a])?;
    let f2: Vec<f64> = d
        .r_tilde_rows
        .iter()
        .map(|row| row.iter().zip(&v).map(|(r, g)| r * g).sum())
        .collect();
    let g2 = resolvent.solve(&f2[1..=a])?;
    let term_r = Resolvent::extend(f2[x], &d.r_rows[x], &g2);
    let g3 = resolvent.solve(&d.e_tilde[1..=a])?;
    let term_e = Resolvent::extend(d.e_tilde[x], &d.r_rows[x], &g3);

    let amplitude = term_r + term_e;
    let prefactor = -1.0 / (2.0 * d.rho0.sqrt() * SQRT_PI);
    let constant = prefactor * amplitude;
    let via_darboux = darboux_constant(amplitude, 1.0 / d.rho0, 0.5);
    if (constant - via_darboux).abs() > 1e-12 * constant.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "prefactor {constant} disagrees with singularity assembly {via_darboux}"
        )));
    }
    if !(constant > 0.0) {
        return Err(Error::Numerical(format!("drifted constant {constant:e} is not positive")));
    }
    Ok(AsymptoticLaw {
        regime: Regime::PositiveDrift,
        rho: d.rho0,
        beta: 1.5,
        constant,
        provenance: Provenance::Drifted {
            r0: d.r0,
            rho0: d.rho0,
            resolvent_r_tilde_term: term_r,
            resolvent_e_tilde_term: term_e,
            spectral_radius: resolvent.spectral_radius,
            prefactor,
        },
    })
}

/// Dispatches on the regime of `law`.
pub fn asymptotic_law(law: &LatticeLaw, x: usize, y: usize) -> Result<AsymptoticLaw> {
    match law.check_hypotheses(DRIFT_TOL).regime {
        Regime::Centered => centered_constant(law, y),
        Regime::PositiveDrift => drifted_constant(law, x, y),
        Regime::NegativeDrift => Err(Error::NegativeDriftUnsupported {
            drift: law.moments().drift,
        }),
    }
}

/// Limit estimated from exact probabilities by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleFit {
    pub estimate: f64,
    pub n_max: usize,
}

/// Fits `√n·ℙ_x[X_n=y] ≈ c₀ + c₁/√n` on `n ∈ [n_max/2, n_max]`.
pub fn centered_oracle(law: &LatticeLaw, x: usize, y: usize, n_max: usize) -> Result<OracleFit> {
    let probs = return_probabilities(law, x, &[y], n_max);
    let ns: Vec<usize> = (n_max / 2..=n_max).filter(|&n| n > 0).collect();
    let design: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, 1.0 / (n as f64).sqrt()]).collect();
    let values: Vec<f64> = ns.iter().map(|&n| (n as f64).sqrt() * probs[n][0]).collect();
    let c = least_squares(&design, &values)?;
    Ok(OracleFit {
        estimate: c[0],
        n_max,
    })
}

/// Fits `ln ℙ_x[X_n=y] − n·ln ρ + (3/2)·ln n ≈ L₀ + L₁/n` and returns `e^{L₀}`.
pub fn drifted_oracle(law: &LatticeLaw, rho: f64, x: usize, y: usize, n_max: usize) -> Result<OracleFit> {
    let probs = return_probabilities(law, x, &[y], n_max);
    let ns: Vec<usize> = (n_max / 2..=n_max).filter(|&n| n > 0 && probs[n][0] > 0.0).collect();
    if ns.len() < 2 {
        return Err(Error::Numerical("no positive probabilities to fit".into()));
    }
    let design: Vec<Vec<f64>> = ns.iter().map(|&n| vec![1.0, 1.0 / n as f64]).collect();
    let values: Vec<f64> = ns
        .iter()
        .map(|&n| probs[n][0].ln() - n as f64 * rho.ln() + 1.5 * (n as f64).ln())
        .collect();
    let c = least_squares(&design, &values)?;
    Ok(OracleFit {
        estimate: c[0].exp(),
        n_max,
    })
}

pub fn relative_gap(closed: f64, oracle: f64) -> f64 {
    (closed - oracle).abs() / oracle.abs()
}

/// Checks the change of measure `𝔼[Φ] = ρ₀^n·𝔼°[Φ·r₀^{−S_n}]` by exhaustive
/// enumeration of the `|support|^n` increment paths, for the always-true
/// event and `events` random path sets. Returns the largest residual.
pub fn tilting_identity_check(law: &LatticeLaw, n: usize, events: usize, seed: u64) -> Result<f64> {
    if n > 8 {
        return Err(Error::OutOfRange(format!("path length {n} above 8")));
    }
    let (tilted, tilt) = law.centered()?;
    let support: Vec<(i64, f64)> = law.support().collect();
    let tilted_mass: Vec<f64> = support.iter().map(|&(k, _)| tilted.mass(k)).collect();
    let m = support.len();
    let count = m.pow(n as u32);

    let mut weights = Vec::with_capacity(count);
    for index in 0..count {
        let (mut p, mut q, mut s) = (1.0, 1.0, 0i64);
        let mut rest = index;
        for _ in 0..n {
            let i = rest % m;
            rest /= m;
            p *= support[i].1;
            q *= tilted_mass[i];
            s += support[i].0;
        }
        weights.push((p, tilt.rho0.powi(n as i32) * q * tilt.r0.powi(-s as i32)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for e in 0..=events {
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for &(p, q) in &weights {
            if e == 0 || rng.next_u32() & 1 == 1 {
                lhs += p;
                rhs += q;
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

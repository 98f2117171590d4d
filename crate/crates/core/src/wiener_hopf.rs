//! Ladder-height transforms from the polynomial factorization
//! `1 − s·μ̂(z) = (1 − φ^{*-}(s,z))(1 − φ^+(s,z))`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::{LatticeLaw, DRIFT_TOL};
use crate::numeric::{slopes_agree, sqrt_slope};
use crate::poly;

/// Distance to the unit circle below which a root is considered ambiguous.
pub const ROOT_PARTITION_TOL: f64 = 1e-8;
/// Agreement required between closed-form and extrapolated slopes.
pub const SLOPE_TOL: f64 = 1e-3;
const CIRCLE_POINTS: usize = 64;

/// Ladder transforms at one value of `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorPair {
    pub s: f64,
    /// `c_w`, coefficient of `z^{−w}` in `φ^{*-}(s,·)`, stored at index `w−1`.
    pub phi_minus: Vec<f64>,
    /// `d_j`, coefficient of `z^j` in `φ^+(s,·)`, stored at index `j`.
    pub phi_plus: Vec<f64>,
    pub residual: f64,
}

impl FactorPair {
    pub fn phi_minus_at(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let mut pow = zi;
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &self.phi_minus {
            acc += c * pow;
            pow *= zi;
        }
        acc
    }

    pub fn phi_plus_at(&self, z: Complex64) -> Complex64 {
        poly::eval_complex(&self.phi_plus, z)
    }
}

fn require_centered(law: &LatticeLaw) -> Result<()> {
    let drift = law.moments().drift;
    if drift.abs() > DRIFT_TOL {
        return Err(Error::NotCentered { drift });
    }
    Ok(())
}

/// Factorizes `z^a(1 − s·μ̂(z))` for a centered law and `0 < s ≤ 1`.
pub fn factorize_at(law: &LatticeLaw, s: f64) -> Result<FactorPair> {
    require_centered(law)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::OutOfRange(format!("s = {s} not in (0, 1]")));
    }
    let a = law.a();
    let b = law.b();
    let mut q: Vec<f64> = law.masses().iter().map(|m| -s * m).collect();
    q[a] += 1.0;

    let mut remainder: f64 = 0.0;
    let mut small: Vec<Complex64> = Vec::with_capacity(a);
    let (reduced, expect_small) = if s == 1.0 {
        // z = 1 is a double root; one copy belongs to each factor
        let (once, r1) = poly::divmod(&q, &[-1.0, 1.0]);
        let (twice, r2) = poly::divmod(&once, &[-1.0, 1.0]);
        remainder = remainder.max(r1[0].abs()).max(r2[0].abs());
        small.push(Complex64::new(1.0, 0.0));
        (twice, a - 1)
    } else {
        (q.clone(), a)
    };

    let all = poly::roots(&reduced)?;
    for &z in &all {
        let distance = (z.norm() - 1.0).abs();
        if distance < ROOT_PARTITION_TOL {
            return Err(Error::RootClusterUnresolved {
                s,
                root: format!("{z}"),
                distance,
            });
        }
    }
    let inside: Vec<Complex64> = all.iter().copied().filter(|z| z.norm() < 1.0).collect();
    if inside.len() != expect_small {
        return Err(Error::RootClusterUnresolved {
            s,
            root: format!("{} roots inside the disk, expected {expect_small}", inside.len()),
            distance: 0.0,
        });
    }
    small.extend(inside);

    let a_poly = poly::from_roots(&small);
    let phi_minus: Vec<f64> = (1..=a).map(|w| -a_poly[a - w]).collect();
    let (b_poly, rem) = poly::divmod(&q, &a_poly);
    remainder = rem.iter().fold(remainder, |m, r| m.max(r.abs()));
    let mut phi_plus: Vec<f64> = (0..=b).map(|j| -b_poly.get(j).copied().unwrap_or(0.0)).collect();
    phi_plus[0] += 1.0;

    let mut pair = FactorPair {
        s,
        phi_minus,
        phi_plus,
        residual: 0.0,
    };
    pair.residual = remainder.max(circle_residual(law, &pair));
    Ok(pair)
}

/// `max |(1 − s·μ̂(z)) − (1 − φ^{*-})(1 − φ^+)|` over equispaced points of
/// the unit circle.
pub fn circle_residual(law: &LatticeLaw, pair: &FactorPair) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    (0..CIRCLE_POINTS)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / CIRCLE_POINTS as f64);
            let mhat: Complex64 = law.support().map(|(j, m)| m * z.powi(j as i32)).sum();
            let lhs = one - pair.s * mhat;
            let rhs = (one - pair.phi_minus_at(z)) * (one - pair.phi_plus_at(z));
            (lhs - rhs).norm()
        })
        .fold(0.0, f64::max)
}

/// Ladder-height laws and their renewal potentials, at `s = 1` or below.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSystem {
    pub s: f64,
    #[serde(skip)]
    pub law: LatticeLaw,
    /// `μ^{*-}(−w)` at index `w−1`.
    pub mu_minus: Vec<f64>,
    /// `μ^+(j)` at index `j`.
    pub mu_plus: Vec<f64>,
    /// `U^{*-}(−k)` at index `k`.
    pub u_minus: Vec<f64>,
    /// `U^+(m)` at index `m`.
    pub u_plus: Vec<f64>,
    pub sigma: f64,
    pub mean_ladder_minus: f64,
    pub residual: f64,
}

/// Potential depth large enough for renewal limits and window sums.
pub fn default_depth(law: &LatticeLaw, window: usize) -> usize {
    (50 * law.a()).max(2 * law.a() + 2 * law.b() + window)
}

/// Ladder system of a centered law at `s = 1`.
pub fn ladder_laws(law: &LatticeLaw, depth: usize) -> Result<LadderSystem> {
    ladder_at(law, 1.0, depth)
}

/// Ladder system with `s`-dependent transforms; the potentials are the
/// renewal series `𝔘^{*-}(s|·)` and `𝔘^+(s|·)`.
pub fn ladder_at(law: &LatticeLaw, s: f64, depth: usize) -> Result<LadderSystem> {
    let pair = factorize_at(law, s)?;
    let a = law.a();
    let b = law.b();
    let c = &pair.phi_minus;
    let d = &pair.phi_plus;

    let mut u_minus = vec![0.0; depth + 1];
    u_minus[0] = 1.0;
    for j in 1..=depth {
        u_minus[j] = (1..=a.min(j)).map(|w| c[w - 1] * u_minus[j - w]).sum();
    }
    let mut u_plus = vec![0.0; depth + 1];
    let denom = 1.0 - d[0];
    for m in 0..=depth {
        let delta = if m == 0 { 1.0 } else { 0.0 };
        let conv: f64 = (1..=b.min(m)).map(|j| d[j] * u_plus[m - j]).sum();
        u_plus[m] = (delta + conv) / denom;
    }
    let mean_ladder_minus = -(1..=a).map(|w| w as f64 * c[w - 1]).sum::<f64>();
    Ok(LadderSystem {
        s,
        law: law.clone(),
        mu_minus: pair.phi_minus.clone(),
        mu_plus: pair.phi_plus.clone(),
        u_minus,
        u_plus,
        sigma: law.moments().variance.sqrt(),
        mean_ladder_minus,
        residual: pair.residual,
    })
}

impl LadderSystem {
    pub fn a(&self) -> usize {
        self.mu_minus.len()
    }

    pub fn b(&self) -> usize {
        self.mu_plus.len() - 1
    }

    pub fn depth(&self) -> usize {
        self.u_minus.len() - 1
    }

    /// `√2/σ`, the leading coefficient of `1 − z_-(s)` in `√(1−s)`.
    pub fn alpha(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.sigma
    }

    /// `μ^{*-}(k)`, zero off `[−a, −1]`.
    pub fn mu_minus_at(&self, k: i64) -> f64 {
        if k <= -1 && k >= -(self.a() as i64) {
            self.mu_minus[(-k - 1) as usize]
        } else {
            0.0
        }
    }

    /// `μ^{*-}((−∞, k])`.
    pub fn mu_minus_tail(&self, k: i64) -> f64 {
        (1..=self.a() as i64)
            .filter(|&w| -w <= k)
            .map(|w| self.mu_minus[(w - 1) as usize])
            .sum()
    }

    /// `μ^+([j, ∞))`.
    pub fn mu_plus_tail(&self, j: i64) -> f64 {
        self.mu_plus
            .iter()
            .enumerate()
            .filter(|&(i, _)| i as i64 >= j)
            .map(|(_, m)| m)
            .sum()
    }

    /// `U^{*-}(k)` for `k ≤ 0`, zero for `k > 0`.
    pub fn u_minus_at(&self, k: i64) -> f64 {
        if k > 0 {
            return 0.0;
        }
        let idx = (-k) as usize;
        assert!(idx <= self.depth(), "potential depth {} exceeded at {k}", self.depth());
        self.u_minus[idx]
    }

    /// `U^+(m)` for `m ≥ 0`, zero for `m < 0`.
    pub fn u_plus_at(&self, m: i64) -> f64 {
        if m < 0 {
            return 0.0;
        }
        let idx = m as usize;
        assert!(idx <= self.depth(), "potential depth {} exceeded at {m}", self.depth());
        self.u_plus[idx]
    }

    /// `1/(−𝔼[S_{τ^{*-}}])`, the renewal limit of `U^{*-}(−k)`.
    pub fn renewal_limit(&self) -> f64 {
        1.0 / -self.mean_ladder_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeMethod {
    ClosedForm,
    Richardson,
}

/// `√(1−s)` coefficients of the ladder transforms and potentials at `s = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTable {
    /// Slope of `𝔗^{*-}(s|−w)`, index `w−1`.
    pub t_minus: Vec<f64>,
    /// Slope of `𝔗^+(s|j)`, index `j`.
    pub t_plus: Vec<f64>,
    /// Slope of `𝔘^{*-}(s|−k)`, index `k`.
    pub u_minus: Vec<f64>,
    /// Slope of `𝔘^+(s|m)`, index `m`.
    pub u_plus: Vec<f64>,
    pub method: SlopeMethod,
    /// Number of potential entries compared against extrapolation.
    pub verified_window: usize,
    pub max_discrepancy: f64,
}

impl SlopeTable {
    pub fn t_minus_at(&self, k: i64) -> f64 {
        if k <= -1 && k >= -(self.t_minus.len() as i64) {
            self.t_minus[(-k - 1) as usize]
        } else {
            0.0
        }
    }

    pub fn u_minus_at(&self, k: i64) -> f64 {
        if k > 0 {
            0.0
        } else {
            self.u_minus[(-k) as usize]
        }
    }

    pub fn u_plus_at(&self, m: i64) -> f64 {
        if m < 0 {
            0.0
        } else {
            self.u_plus[m as usize]
        }
    }
}

/// Closed-form slopes, without extrapolation.
pub fn closed_slopes(ladder: &LadderSystem) -> SlopeTable {
    let alpha = ladder.alpha();
    let a = ladder.a() as i64;
    let b = ladder.b() as i64;
    let t_minus = (1..=a).map(|w| -alpha * ladder.mu_minus_tail(-w)).collect();
    let t_plus = (0..=b).map(|j| -alpha * ladder.mu_plus_tail(j + 1)).collect();
    let mut u_minus = vec![0.0];
    let mut acc = 0.0;
    for k in 0..ladder.depth() {
        acc += ladder.u_minus[k];
        u_minus.push(-alpha * acc);
    }
    let mut u_plus = Vec::with_capacity(ladder.depth() + 1);
    let mut acc = 0.0;
    for m in 0..=ladder.depth() {
        acc += ladder.u_plus[m];
        u_plus.push(-alpha * acc);
    }
    SlopeTable {
        t_minus,
        t_plus,
        u_minus,
        u_plus,
        method: SlopeMethod::ClosedForm,
        verified_window: 0,
        max_discrepancy: 0.0,
    }
}

/// Potential entries cross-checked by extrapolation. The `√(1−s)` expansion
/// of `𝔘(s|k)` has higher-order coefficients growing with `|k|`, so only a
/// short window near the origin is resolvable at the fixed step sizes.
pub fn slope_verify_window(ladder: &LadderSystem) -> usize {
    (ladder.a() + ladder.b()).min(ladder.depth())
}

/// Closed-form slopes cross-validated against Richardson extrapolation.
pub fn slopes(law: &LatticeLaw, ladder: &LadderSystem) -> Result<SlopeTable> {
    let mut table = closed_slopes(ladder);
    let window = slope_verify_window(ladder);
    let a = ladder.a();
    let b = ladder.b();
    let extrapolated = sqrt_slope(|s| {
        let l = ladder_at(law, s, window)?;
        let mut v = l.mu_minus.clone();
        v.extend(&l.mu_plus);
        v.extend(&l.u_minus);
        v.extend(&l.u_plus);
        Ok(v)
    })?;
    let mut closed = table.t_minus.clone();
    closed.extend(&table.t_plus);
    closed.extend(&table.u_minus[..=window]);
    closed.extend(&table.u_plus[..=window]);
    let mut worst: f64 = 0.0;
    for (i, (&c, &r)) in closed.iter().zip(&extrapolated).enumerate() {
        worst = worst.max((c - r).abs() / c.abs().max(r.abs()).max(1.0));
        if !slopes_agree(c, r, SLOPE_TOL) {
            let what = if i < a {
                format!("T_minus(-{})", i + 1)
            } else if i < a + b + 1 {
                format!("T_plus({})", i - a)
            } else if i < a + b + 2 + window {
                format!("U_minus(-{})", i - a - b - 1)
            } else {
                format!("U_plus({})", i - a - b - 2 - window)
            };
            return Err(Error::SlopeMismatch {
                what,
                closed: c,
                extrapolated: r,
            });
        }
    }
    table.verified_window = window;
    table.max_discrepancy = worst;
    Ok(table)
}

/// Real roots `z_-(s) < 1 < z_+(s)` of `μ̂(z) = 1/s` for a centered law.
pub fn roots_z_pm(law: &LatticeLaw, s: f64) -> Result<(f64, f64)> {
    require_centered(law)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::OutOfRange(format!("s = {s} not in (0, 1)")));
    }
    let target = 1.0 / s;
    let f = |z: f64| law.mgf(z).map(|m| m - target);

    let mut lo = 0.5;
    let mut guard = 0;
    while f(lo)? <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 1100 {
            return Err(Error::ConvergenceFailure {
                what: "z_minus bracket",
                iterations: guard,
            });
        }
    }
    let mut hi = 2.0;
    guard = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(Error::ConvergenceFailure {
                what: "z_plus bracket",
                iterations: guard,
            });
        }
    }
    // f decreases on (0,1) and increases on (1,∞)
    let z_minus = bisect(&f, lo, 1.0, true)?;
    let z_plus = bisect(&f, 1.0, hi, false)?;
    Ok((z_minus, z_plus))
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut lo: f64, mut hi: f64, decreasing: bool) -> Result<f64> {
    const MAX_ITER: usize = 200;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        let above = f(mid)? > 0.0;
        if above == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::ConvergenceFailure {
        what: "bisection for z_pm",
        iterations: MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{law_a, law_b, symmetric_five};
    use crate::fluctuation::descent_joint_table;
    use approx::assert_relative_eq;

    fn tilted_b() -> LatticeLaw {
        law_b().centered().unwrap().0
    }

    fn skewed() -> LatticeLaw {
        LatticeLaw::from_pairs([(-3, 0.3), (-2, 0.1), (-1, 0.2), (0, 0.15), (1, 0.25)])
            .unwrap()
            .centered()
            .unwrap()
            .0
    }

    #[test]
    fn law_a_at_one() {
        let p = factorize_at(&law_a(), 1.0).unwrap();
        assert_relative_eq!(p.phi_minus[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.phi_plus[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(p.phi_plus[1], 1.0 / 3.0, epsilon = 1e-14);
        assert!(p.residual < 1e-14);
    }

    #[test]
    fn law_a_below_one() {
        let p = factorize_at(&law_a(), 0.99).unwrap();
        assert!((p.phi_minus[0] - 0.840415).abs() < 2e-6);
        let (zm, zp) = roots_z_pm(&law_a(), 0.99).unwrap();
        assert_relative_eq!(zm, p.phi_minus[0], epsilon = 1e-12);
        assert!((zp - 1.189886).abs() < 2e-6);
        assert_relative_eq!(zm * zp, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn small_s_limit() {
        let p = factorize_at(&symmetric_five(), 1e-9).unwrap();
        assert!(p.phi_minus.iter().chain(&p.phi_plus).all(|&v| v.abs() < 1e-4));
    }

    #[test]
    fn rejects_drifted_and_bad_s() {
        assert!(matches!(factorize_at(&law_b(), 0.5), Err(Error::NotCentered { .. })));
        assert!(factorize_at(&law_a(), 0.0).is_err());
        assert!(factorize_at(&law_a(), 1.5).is_err());
    }

    #[test]
    fn residual_grid() {
        for law in [law_a(), tilted_b(), symmetric_five(), skewed()] {
            for s in [0.5, 0.9, 0.99, 1.0] {
                let p = factorize_at(&law, s).unwrap();
                assert!(p.residual < 1e-10, "s={s} residual {}", p.residual);
                assert!(p.phi_minus.iter().chain(&p.phi_plus).all(|&v| (-1e-14..=1.0 + 1e-14).contains(&v)));
                let sm: f64 = p.phi_minus.iter().sum();
                let sp: f64 = p.phi_plus.iter().sum();
                if s == 1.0 {
                    assert!((sm - 1.0).abs() < 1e-10 && (sp - 1.0).abs() < 1e-10);
                } else {
                    assert!(sm < 1.0 && sp < 1.0);
                }
            }
        }
    }

    #[test]
    fn law_a_ladder() {
        let l = ladder_laws(&law_a(), 60).unwrap();
        assert!(l.u_minus.iter().all(|&u| (u - 1.0).abs() < 1e-12));
        assert!(l.u_plus.iter().all(|&u| (u - 3.0).abs() < 1e-12));
        assert_relative_eq!(l.mean_ladder_minus, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn renewal_limit() {
        for law in [symmetric_five(), skewed()] {
            let depth = default_depth(&law, 0);
            let l = ladder_laws(&law, depth).unwrap();
            let last = l.u_minus[depth];
            assert!((last - l.renewal_limit()).abs() < 0.01 * l.renewal_limit());
            assert_relative_eq!(l.u_plus[0], 1.0 / (1.0 - l.mu_plus[0]), epsilon = 1e-14);
        }
    }

    #[test]
    fn descent_oracle_below_ladder_law() {
        let law = symmetric_five();
        let l = ladder_laws(&law, 10).unwrap();
        let d = descent_joint_table(&law, 2000).unwrap();
        for w in 0..law.a() {
            let cum = d[w].cumulative();
            assert!(cum.windows(2).all(|p| p[1] >= p[0]));
            assert!(cum[2000] <= l.mu_minus[w] + 1e-12);
            assert!(l.mu_minus[w] - cum[2000] < 0.05);
        }
    }

    #[test]
    fn transform_matches_dp_series() {
        let law = symmetric_five();
        let s = 0.9;
        let p = factorize_at(&law, s).unwrap();
        let d = descent_joint_table(&law, 400).unwrap();
        let dp: f64 = d.iter().map(|series| series.evaluate(s).value).sum();
        let bound = d[0].evaluate(s).tail_bound;
        let closed: f64 = p.phi_minus.iter().sum();
        assert!((closed - dp).abs() <= bound + 1e-13);
    }

    #[test]
    fn slope_examples() {
        let law = law_a();
        let l = ladder_laws(&law, 60).unwrap();
        let t = slopes(&law, &l).unwrap();
        assert_relative_eq!(t.t_minus[0], -3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(t.t_minus_at(-2), 0.0);
        assert_relative_eq!(t.t_plus[0], -1.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(t.t_plus[1], 0.0);
        assert_relative_eq!(t.u_minus[1], -3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(t.u_plus[0], -3.0 * 3f64.sqrt(), epsilon = 1e-12);
        assert!(t.max_discrepancy < 1e-3);
    }

    #[test]
    fn slopes_verified_on_wider_laws() {
        for law in [symmetric_five(), skewed(), tilted_b()] {
            let l = ladder_laws(&law, default_depth(&law, 0)).unwrap();
            let t = slopes(&law, &l).unwrap();
            assert!(t.verified_window >= law.a() + law.b());
        }
    }

    #[test]
    fn root_expansion() {
        let law = law_a();
        let eps: f64 = 1e-4;
        let (zm, _) = roots_z_pm(&law, 1.0 - eps).unwrap();
        let alpha = 3f64.sqrt();
        assert!(((1.0 - zm) / eps.sqrt() - alpha).abs() < 0.03 * alpha);
    }
}

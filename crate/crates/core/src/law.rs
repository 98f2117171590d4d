//! Finitely supported increment laws on the integers.
//!
//! A [`LatticeLaw`] is stored as a dense window of masses over `[lo, hi]`
//! with `lo ≤ −1 < 1 ≤ hi` and strictly positive endpoint masses. Finite
//! support makes every exponential moment finite, so the moment generating
//! function `μ̂(r) = Σ r^k μ(k)` is a Laurent polynomial, strictly convex on
//! `(0, ∞)` and unbounded at both ends.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric::{gcd, neumaier_sum};

/// Drift below which a law is treated as centered.
pub const DRIFT_TOL: f64 = 1e-9;

const MASS_SUM_TOL: f64 = 1e-12;
const MGF_MAX_ITER: usize = 200;

/// Law of the increments `Y_i`, supported on the window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    lo: i64,
    masses: Vec<f64>,
}

/// Mean and central variance of a law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub drift: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Centered,
    PositiveDrift,
    NegativeDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub adapted: bool,
    pub aperiodic: bool,
    pub drift: f64,
    pub regime: Regime,
}

impl HypothesisReport {
    /// Adapted, aperiodic and not negatively drifted.
    pub fn passes(&self) -> bool {
        self.adapted && self.aperiodic && self.regime != Regime::NegativeDrift
    }

    pub fn require(&self) -> Result<()> {
        if !self.adapted {
            return Err(Error::HypothesesFailed("support does not generate the integers".into()));
        }
        if !self.aperiodic {
            return Err(Error::HypothesesFailed("law is periodic".into()));
        }
        if self.regime == Regime::NegativeDrift {
            return Err(Error::NegativeDriftUnsupported { drift: self.drift });
        }
        Ok(())
    }
}

/// Minimizer of `μ̂` on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltInfo {
    pub r0: f64,
    /// `μ̂(r0)`, the exponential decay rate of return probabilities.
    pub rho0: f64,
    /// `1/rho0`, radius of convergence of the Green function.
    #[serde(rename = "R0")]
    pub radius: f64,
}

impl LatticeLaw {
    /// Builds a law from masses indexed `lo, lo+1, …`.
    ///
    /// Zero masses at either end of the window are trimmed before the
    /// invariants are checked.
    pub fn new(lo: i64, masses: Vec<f64>) -> Result<Self> {
        let first = masses.iter().position(|&m| m != 0.0);
        let last = masses.iter().rposition(|&m| m != 0.0);
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidLaw("law has no mass".into())),
        };
        let lo = lo + first as i64;
        let masses = masses[first..=last].to_vec();
        for (i, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidLaw(format!(
                    "mass at {} is {m}, expected a probability",
                    lo + i as i64
                )));
            }
        }
        let total = neumaier_sum(masses.iter().copied());
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidLaw(format!("masses sum to {total}, expected 1")));
        }
        if lo > -1 {
            return Err(Error::InvalidLaw(
                "law must charge the negative integers (no reflections otherwise)".into(),
            ));
        }
        let hi = lo + masses.len() as i64 - 1;
        if hi < 1 {
            return Err(Error::InvalidLaw("law must charge the positive integers".into()));
        }
        Ok(Self { lo, masses })
    }

    pub fn from_pairs<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Result<Self> {
        let map: BTreeMap<i64, f64> = pairs.into_iter().fold(BTreeMap::new(), |mut acc, (k, m)| {
            *acc.entry(k).or_insert(0.0) += m;
            acc
        });
        let (&lo, _) = map
            .iter()
            .next()
            .ok_or_else(|| Error::InvalidLaw("law has no support points".into()))?;
        let (&hi, _) = map.iter().next_back().expect("non-empty");
        let mut masses = vec![0.0; (hi - lo + 1) as usize];
        for (k, m) in map {
            masses[(k - lo) as usize] = m;
        }
        Self::new(lo, masses)
    }

    /// Parses the law file format `{"masses": {"-1": 0.2, "0": 0.3, "1": 0.5}}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct LawFile {
            masses: BTreeMap<String, f64>,
        }
        let file: LawFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidLaw(format!("malformed law JSON: {e}")))?;
        let mut pairs = Vec::with_capacity(file.masses.len());
        for (key, mass) in file.masses {
            let k: i64 = key.trim().parse().map_err(|_| {
                Error::InvalidLaw(format!("key {key:?} under \"masses\" is not a decimal integer"))
            })?;
            if !(0.0..=1.0).contains(&mass) {
                return Err(Error::InvalidLaw(format!(
                    "value {mass} for key {key:?} is not a probability"
                )));
            }
            pairs.push((k, mass));
        }
        Self::from_pairs(pairs)
    }

    /// Canonical JSON in the law file format, keys in increasing order.
    pub fn to_json(&self) -> String {
        let body: Vec<String> = self
            .support_window()
            .map(|(k, m)| format!("\"{k}\":{}", serde_json::to_string(&m).expect("finite")))
            .collect();
        format!("{{\"masses\":{{{}}}}}", body.join(","))
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.masses.len() as i64 - 1
    }

    /// Largest downward jump `a = −lo`.
    pub fn a(&self) -> usize {
        (-self.lo) as usize
    }

    /// Largest upward jump `b = hi`.
    pub fn b(&self) -> usize {
        self.hi() as usize
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, k: i64) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.masses[(k - self.lo) as usize]
        }
    }

    /// All `(k, μ(k))` over the window, zero masses included.
    pub fn support_window(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.masses.iter().enumerate().map(move |(i, &m)| (self.lo + i as i64, m))
    }

    /// Support points with strictly positive mass.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support_window().filter(|&(_, m)| m > 0.0)
    }

    /// `μ̂(r) = Σ_k r^k μ(k)`.
    pub fn mgf(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonPositiveArgument(r));
        }
        Ok(self.mgf_unchecked(r))
    }

    fn mgf_unchecked(&self, r: f64) -> f64 {
        neumaier_sum(self.support().map(|(k, m)| m * r.powi(k as i32)))
    }

    fn mgf_d1(&self, r: f64) -> f64 {
        neumaier_sum(self.support().map(|(k, m)| k as f64 * m * r.powi(k as i32 - 1)))
    }

    fn mgf_d2(&self, r: f64) -> f64 {
        neumaier_sum(
            self.support()
                .map(|(k, m)| (k * (k - 1)) as f64 * m * r.powi(k as i32 - 2)),
        )
    }

    pub fn moments(&self) -> Moments {
        let drift = neumaier_sum(self.support().map(|(k, m)| k as f64 * m));
        let second = neumaier_sum(self.support().map(|(k, m)| (k * k) as f64 * m));
        Moments {
            drift,
            variance: second - drift * drift,
        }
    }

    pub fn check_hypotheses(&self, drift_tol: f64) -> HypothesisReport {
        let points: Vec<i64> = self.support().map(|(k, _)| k).collect();
        let adapted = points.iter().fold(0, |g, &k| gcd(g, k.unsigned_abs())) == 1;
        let base = points[0];
        let aperiodic = points.iter().fold(0, |g, &k| gcd(g, (k - base).unsigned_abs())) == 1;
        let drift = self.moments().drift;
        let regime = if drift > drift_tol {
            Regime::PositiveDrift
        } else if drift < -drift_tol {
            Regime::NegativeDrift
        } else {
            Regime::Centered
        };
        HypothesisReport {
            adapted,
            aperiodic,
            drift,
            regime,
        }
    }

    /// Exponentially tilted law `k ↦ r^k μ(k)/μ̂(r)`.
    pub fn tilt(&self, r: f64) -> Result<LatticeLaw> {
        let norm = self.mgf(r)?;
        let masses = self
            .support_window()
            .map(|(k, m)| m * r.powi(k as i32) / norm)
            .collect();
        LatticeLaw::new(self.lo, masses)
    }

    /// Unique stationary point of `μ̂` on `(0, ∞)`.
    ///
    /// A sign-changing bracket of `μ̂′` is found by doubling away from
    /// `r = 1`; Newton iterates start at the bracket's geometric midpoint
    /// and fall back to geometric bisection whenever a step leaves it.
    pub fn minimize_mgf(&self) -> Result<TiltInfo> {
        let d1_at_one = self.mgf_d1(1.0);
        let r0 = if d1_at_one == 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = if d1_at_one > 0.0 {
                let mut lo = 0.5;
                while self.mgf_d1(lo) > 0.0 {
                    lo *= 0.5;
                }
                (lo, 1.0)
            } else {
                let mut hi = 2.0;
                while self.mgf_d1(hi) < 0.0 {
                    hi *= 2.0;
                }
                (1.0, hi)
            };
            let mut r = (lo * hi).sqrt();
            let mut converged = false;
            for _ in 0..MGF_MAX_ITER {
                let d1 = self.mgf_d1(r);
                if d1 == 0.0 {
                    converged = true;
                    break;
                }
                if d1 > 0.0 {
                    hi = r;
                } else {
                    lo = r;
                }
                let d2 = self.mgf_d2(r);
                let newton = r - d1 / d2;
                let next = if d2 > 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    (lo * hi).sqrt()
                };
                let step = (next - r).abs();
                r = next;
                if step <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * lo {
                    converged = true;
                    break;
                }
            }
            let value = self.mgf_unchecked(r);
            if !converged || self.mgf_d1(r).abs() >= 1e-12 * value {
                return Err(Error::ConvergenceFailure {
                    what: "mgf minimization",
                    iterations: MGF_MAX_ITER,
                });
            }
            r
        };
        let rho0 = self.mgf_unchecked(r0).min(1.0);
        Ok(TiltInfo {
            r0,
            rho0,
            radius: 1.0 / rho0,
        })
    }

    /// The law tilted at its mgf minimizer, which has zero drift.
    pub fn centered(&self) -> Result<(LatticeLaw, TiltInfo)> {
        let info = self.minimize_mgf()?;
        if info.r0 == 1.0 {
            return Ok((self.clone(), info));
        }
        Ok((self.tilt(info.r0)?, info))
    }

    /// Inverse-CDF table: cumulative masses over the window.
    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }
}

impl fmt::Display for LatticeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{law_a, law_b};
    use approx::assert_relative_eq;

    #[test]
    fn mgf_examples() {
        assert_relative_eq!(law_a().mgf(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(law_a().mgf(2.0).unwrap(), 7.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(law_b().mgf(1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(law_a().mgf(0.0), Err(Error::NonPositiveArgument(0.0)));
        assert!(law_a().mgf(-1.0).is_err());
    }

    #[test]
    fn moments_examples() {
        let m = law_a().moments();
        assert_relative_eq!(m.drift, 0.0, epsilon = 1e-15);
        assert_relative_eq!(m.variance, 2.0 / 3.0, epsilon = 1e-15);
        let m = law_b().moments();
        assert_relative_eq!(m.drift, 0.3, epsilon = 1e-15);
        assert_relative_eq!(m.variance, 0.61, epsilon = 1e-15);
    }

    #[test]
    fn point_mass_rejected() {
        assert!(LatticeLaw::new(1, vec![1.0]).is_err());
        assert!(LatticeLaw::new(0, vec![0.5, 0.5]).is_err());
        assert!(LatticeLaw::new(-1, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(LatticeLaw::new(-1, vec![0.5, 0.2, 0.2]).is_err());
        assert!(LatticeLaw::new(-1, vec![0.5, -0.1, 0.6]).is_err());
        // trailing zeros are trimmed
        let law = LatticeLaw::new(-2, vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        assert_eq!((law.lo(), law.hi()), (-1, 1));
    }

    #[test]
    fn hypotheses_examples() {
        let r = law_a().check_hypotheses(DRIFT_TOL);
        assert!(r.adapted && r.aperiodic && r.regime == Regime::Centered);
        let periodic = LatticeLaw::from_pairs([(-1, 0.5), (1, 0.5)]).unwrap();
        let r = periodic.check_hypotheses(DRIFT_TOL);
        assert!(r.adapted && !r.aperiodic);
        let r = law_b().check_hypotheses(DRIFT_TOL);
        assert!(r.adapted && r.aperiodic && r.regime == Regime::PositiveDrift);
        let span_two = LatticeLaw::from_pairs([(-2, 0.5), (2, 0.5)]).unwrap();
        assert!(!span_two.check_hypotheses(DRIFT_TOL).adapted);
        let neg = LatticeLaw::from_pairs([(-1, 0.6), (1, 0.4)]).unwrap();
        assert_eq!(neg.check_hypotheses(DRIFT_TOL).regime, Regime::NegativeDrift);
    }

    #[test]
    fn tilt_examples() {
        assert_eq!(law_b().tilt(1.0).unwrap(), law_b());
        let t = law_b().tilt(0.4_f64.sqrt()).unwrap();
        assert_relative_eq!(t.mass(-1), 0.339134, epsilon = 1e-6);
        assert_relative_eq!(t.mass(0), 0.321731, epsilon = 1e-6);
        assert_relative_eq!(t.mass(1), 0.339134, epsilon = 1e-6);
        assert!(t.moments().drift.abs() < 1e-12);
        assert_relative_eq!(t.masses().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn minimizer_examples() {
        let info = law_a().minimize_mgf().unwrap();
        assert_eq!((info.r0, info.rho0), (1.0, 1.0));
        let info = law_b().minimize_mgf().unwrap();
        assert_relative_eq!(info.r0, 0.4_f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(info.rho0, 0.3 + 2.0 * 0.1_f64.sqrt(), epsilon = 1e-14);
        let centered = law_b().tilt(info.r0).unwrap();
        assert!(centered.moments().drift.abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let law = LatticeLaw::from_json_str(r#"{"masses": {"-1": 0.2, "0": 0.3, "1": 0.5}}"#).unwrap();
        assert_eq!(law, law_b());
        assert_eq!(LatticeLaw::from_json_str(&law.to_json()).unwrap(), law);
        let err = LatticeLaw::from_json_str(r#"{"masses": {"x": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("\"x\""));
        let err = LatticeLaw::from_json_str("{\"masses\": {\n\"-1\": }}").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = LatticeLaw::from_json_str(r#"{"masses": {"-1": 1.5, "1": -0.5}}"#).unwrap_err();
        assert!(err.to_string().contains("not a probability"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        pub(crate) fn arb_law() -> impl Strategy<Value = LatticeLaw> {
            (1usize..=3, 1usize..=3)
                .prop_flat_map(|(a, b)| {
                    (Just(a), proptest::collection::vec(0.05f64..1.0, a + b + 1))
                })
                .prop_map(|(a, raw)| {
                    let total: f64 = raw.iter().sum();
                    LatticeLaw::new(-(a as i64), raw.iter().map(|m| m / total).collect()).unwrap()
                })
        }

        proptest! {
            #[test]
            fn tilt_mgf_identity(law in arb_law(), r in 0.2f64..3.0, z in 0.2f64..3.0) {
                let lhs = law.tilt(r).unwrap().mgf(z).unwrap();
                let rhs = law.mgf(r * z).unwrap() / law.mgf(r).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }

            #[test]
            fn centering_is_idempotent(law in arb_law()) {
                let info = law.minimize_mgf().unwrap();
                let again = law.tilt(info.r0).unwrap().minimize_mgf().unwrap();
                prop_assert!((again.r0 - 1.0).abs() < 1e-9);
                prop_assert!(info.rho0 <= 1.0);
                let report = law.check_hypotheses(DRIFT_TOL);
                prop_assert_eq!(info.rho0 < 1.0, report.regime != Regime::Centered);
            }

            #[test]
            fn mgf_strictly_convex(law in arb_law(), r1 in 0.1f64..5.0, r2 in 0.1f64..5.0) {
                prop_assume!((r1 - r2).abs() > 1e-3);
                let mid = law.mgf(0.5 * (r1 + r2)).unwrap();
                let avg = 0.5 * (law.mgf(r1).unwrap() + law.mgf(r2).unwrap());
                prop_assert!(mid < avg);
            }
        }
    }
}

//! Seeded simulation of the reflected walk.
//!
//! Path `i` draws from ChaCha8 keyed by `seed` on stream `i`
//! (`ChaCha8Rng::seed_from_u64(seed)` then `set_stream(i)`). Each uniform is
//! `(next_u64 >> 11)·2^{−53}`, mapped to an increment by inverse CDF over the
//! support window in increasing order. Counts are integers, so the parallel
//! reduction is exact and results do not depend on the thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::LatticeLaw;

/// Environment variable capping the simulation thread pool.
pub const THREADS_ENV: &str = "REFLECTWALK_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub law: LatticeLaw,
    pub start: usize,
    pub horizon: usize,
    pub paths: u64,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::OutOfRange("paths must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Estimate {
    fn binomial(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            point: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            count: trials,
        }
    }

    /// `|point − exact| ≤ k·stderr`.
    pub fn covers(&self, exact: f64, k: f64) -> bool {
        (self.point - exact).abs() <= k * self.stderr
    }
}

/// Aggregated path statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimResult {
    pub paths: u64,
    /// Paths ending at state `y`, indexed by `y`.
    pub terminal: Vec<u64>,
    /// Paths whose first reflection happened at step `n`, indexed by `n`.
    pub first_reflection: Vec<u64>,
    pub never_reflected: u64,
    /// Reflections landing on `w`, indexed by `w` (index 0 stays empty).
    pub targets: Vec<u64>,
    pub reflections: u64,
    #[serde(skip)]
    checkpoint_hits: Vec<u64>,
    // per-path sums for ratio-estimator standard errors of `targets`
    #[serde(skip)]
    target_sq: Vec<u128>,
    #[serde(skip)]
    target_cross: Vec<u128>,
    #[serde(skip)]
    reflections_sq: u128,
}

fn add_into<T: Copy + std::ops::AddAssign + Default>(dst: &mut Vec<T>, src: &[T]) {
    if dst.len() < src.len() {
        dst.resize(src.len(), T::default());
    }
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl SimResult {
    fn merge(mut self, other: SimResult) -> SimResult {
        self.paths += other.paths;
        add_into(&mut self.terminal, &other.terminal);
        add_into(&mut self.first_reflection, &other.first_reflection);
        self.never_reflected += other.never_reflected;
        add_into(&mut self.targets, &other.targets);
        self.reflections += other.reflections;
        add_into(&mut self.checkpoint_hits, &other.checkpoint_hits);
        add_into(&mut self.target_sq, &other.target_sq);
        add_into(&mut self.target_cross, &other.target_cross);
        self.reflections_sq += other.reflections_sq;
        self
    }
}

struct Sampler {
    values: Vec<i64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(law: &LatticeLaw) -> Self {
        Self {
            values: law.support_window().map(|(k, _)| k).collect(),
            cdf: law.cumulative(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> i64 {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let i = self.cdf.partition_point(|&c| c <= u).min(self.values.len() - 1);
        self.values[i]
    }
}

/// Thread pool honoring [`THREADS_ENV`].
fn pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

/// Simulates every path; `checkpoints` are times at which `X_n = target`
/// is tallied, and the first `burn_in` reflections of each path are left
/// out of the target counts.
fn run(config: &SimConfig, burn_in: u64, checkpoints: &[usize], target: usize) -> Result<SimResult> {
    config.validate()?;
    let sampler = Sampler::new(&config.law);
    let a = config.law.a();
    let horizon = config.horizon.max(checkpoints.iter().copied().max().unwrap_or(0));
    let fresh = || SimResult {
        targets: vec![0; a + 1],
        target_sq: vec![0; a + 1],
        target_cross: vec![0; a + 1],
        checkpoint_hits: vec![0; checkpoints.len()],
        ..SimResult::default()
    };
    let result = pool()?.install(|| {
        (0..config.paths)
            .into_par_iter()
            .fold(fresh, |mut acc, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i);
                let mut pos = config.start as i64;
                let mut first = None;
                let mut count = 0u64;
                let mut hits = vec![0u64; a + 1];
                for step in 1..=horizon {
                    let t = pos + sampler.draw(&mut rng);
                    if t < 0 {
                        count += 1;
                        first.get_or_insert(step);
                        if count > burn_in {
                            hits[(-t) as usize] += 1;
                        }
                        pos = -t;
                    } else {
                        pos = t;
                    }
                    for (c, &n) in checkpoints.iter().enumerate() {
                        if n == step && pos as usize == target {
                            acc.checkpoint_hits[c] += 1;
                        }
                    }
                    if step == config.horizon {
                        let y = pos as usize;
                        if acc.terminal.len() <= y {
                            acc.terminal.resize(y + 1, 0);
                        }
                        acc.terminal[y] += 1;
                    }
                }
                if config.horizon == 0 {
                    let y = config.start;
                    if acc.terminal.len() <= y {
                        acc.terminal.resize(y + 1, 0);
                    }
                    acc.terminal[y] += 1;
                }
                for (c, &n) in checkpoints.iter().enumerate() {
                    if n == 0 && config.start == target {
                        acc.checkpoint_hits[c] += 1;
                    }
                }
                match first {
                    Some(n) => {
                        if acc.first_reflection.len() <= n {
                            acc.first_reflection.resize(n + 1, 0);
                        }
                        acc.first_reflection[n] += 1;
                    }
                    None => acc.never_reflected += 1,
                }
                let kept = count.saturating_sub(burn_in);
                acc.reflections += kept;
                acc.reflections_sq += (kept as u128) * (kept as u128);
                for w in 1..=a {
                    acc.targets[w] += hits[w];
                    acc.target_sq[w] += (hits[w] as u128) * (hits[w] as u128);
                    acc.target_cross[w] += (hits[w] as u128) * (kept as u128);
                }
                acc.paths += 1;
                acc
            })
            .reduce(fresh, SimResult::merge)
    });
    Ok(result)
}

pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    run(config, 0, &[], 0)
}

/// Empirical `ℙ_x[X_n = y]` with binomial standard error.
pub fn estimate_pxy(config: &SimConfig, y: usize) -> Result<Estimate> {
    let r = simulate(config)?;
    Ok(Estimate::binomial(r.terminal.get(y).copied().unwrap_or(0), r.paths))
}

/// `ℙ_x[X_n = y]` for every `n` in `grid`, from one set of paths.
pub fn estimate_grid(config: &SimConfig, y: usize, grid: &[usize]) -> Result<Vec<Estimate>> {
    let r = run(config, 0, grid, y)?;
    Ok(r.checkpoint_hits
        .iter()
        .map(|&h| Estimate::binomial(h, r.paths))
        .collect())
}

/// Terminal-state estimates for every `y` observed, from one simulation.
pub fn terminal_estimates(result: &SimResult) -> Vec<Estimate> {
    result
        .terminal
        .iter()
        .map(|&h| Estimate::binomial(h, result.paths))
        .collect()
}

/// Occupation law of reflection targets on `[1, a]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuEstimate {
    /// Estimate for state `x` at index `x−1`; standard errors come from the
    /// ratio estimator over independent paths.
    pub nu: Vec<Estimate>,
    pub reflections: u64,
    pub burn_in: u64,
}

pub fn estimate_nu(config: &SimConfig, burn_in: u64) -> Result<NuEstimate> {
    let r = run(config, burn_in, &[], 0)?;
    if r.reflections == 0 {
        return Err(Error::NoReflectionsObserved);
    }
    let total = r.reflections as f64;
    let a = config.law.a();
    let nu = (1..=a)
        .map(|w| {
            let p = r.targets[w] as f64 / total;
            // Σ_i (h_i − p·R_i)² expanded over the per-path sums
            let ss = r.target_sq[w] as f64 - 2.0 * p * r.target_cross[w] as f64
                + p * p * r.reflections_sq as f64;
            Estimate {
                point: p,
                stderr: ss.max(0.0).sqrt() / total,
                count: r.reflections,
            }
        })
        .collect();
    Ok(NuEstimate {
        nu,
        reflections: r.reflections,
        burn_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::n_step_table;
    use crate::fixtures::{law_a, law_b, symmetric_five};
    use crate::reflection::stationary_nu;
    use crate::wiener_hopf::ladder_laws;

    fn config(law: LatticeLaw, start: usize, horizon: usize, paths: u64, seed: u64) -> SimConfig {
        SimConfig {
            law,
            start,
            horizon,
            paths,
            seed,
        }
    }

    #[test]
    fn one_step_law_a() {
        let e = estimate_pxy(&config(law_a(), 0, 1, 100_000, 11), 1).unwrap();
        assert!(e.covers(2.0 / 3.0, 4.0));
    }

    #[test]
    fn replay_is_deterministic() {
        let c = config(law_b(), 3, 25, 1, 99);
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        let c = config(symmetric_five(), 0, 40, 5000, 5);
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
    }

    #[test]
    fn law_a_targets() {
        let r = simulate(&config(law_a(), 0, 200, 2000, 3)).unwrap();
        assert!(r.reflections > 0);
        assert_eq!(r.targets[1], r.reflections);
        let nu = estimate_nu(&config(law_a(), 0, 200, 2000, 3), 0).unwrap();
        assert_eq!(nu.nu[0].point, 1.0);
    }

    #[test]
    fn horizon_zero() {
        let e = estimate_pxy(&config(law_a(), 4, 0, 10, 1), 4).unwrap();
        assert_eq!((e.point, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn matches_dp() {
        let exact = n_step_table(&law_a(), 0, 50).unwrap().get(50, 0);
        let e = estimate_pxy(&config(law_a(), 0, 50, 200_000, 21), 0).unwrap();
        assert!(e.covers(exact, 4.0));
        let exact = n_step_table(&law_b(), 0, 30).unwrap().get(30, 0);
        let e = estimate_pxy(&config(law_b(), 0, 30, 200_000, 22), 0).unwrap();
        assert!(e.covers(exact, 4.0));
    }

    #[test]
    fn grid_matches_terminal() {
        let c = config(symmetric_five(), 1, 30, 3000, 8);
        let grid = estimate_grid(&c, 2, &[0, 10, 30]).unwrap();
        let terminal = estimate_pxy(&c, 2).unwrap();
        assert_eq!(grid[2], terminal);
        assert_eq!(grid[0].point, 0.0);
    }

    #[test]
    fn stationary_law_of_targets() {
        let law = symmetric_five();
        let exact = stationary_nu(&ladder_laws(&law, 100).unwrap()).unwrap().nu;
        // about √n reflections per path, so long paths leave room for burn-in
        let c = config(law, 0, 200_000, 200, 17);
        let plain = estimate_nu(&c, 0).unwrap();
        let burned = estimate_nu(&c, 100).unwrap();
        for x in 0..2 {
            assert!(plain.nu[x].covers(exact[x], 3.0));
            let diff = (plain.nu[x].point - burned.nu[x].point).abs();
            assert!(diff < 3.0 * plain.nu[x].stderr.max(burned.nu[x].stderr));
        }
    }

    #[test]
    fn coverage_calibration() {
        let law = symmetric_five();
        let exact = n_step_table(&law, 0, 12).unwrap().get(12, 1);
        let inside = (0..200u64)
            .filter(|&seed| {
                estimate_pxy(&config(law.clone(), 0, 12, 2000, seed), 1)
                    .unwrap()
                    .covers(exact, 2.0)
            })
            .count();
        // nominal 95.4%; binomial(200, 0.954) stays above 180 with
        // probability beyond 0.999
        assert!(inside >= 180 && inside <= 200, "{inside}/200");
    }

    #[test]
    fn rejects_zero_paths() {
        assert!(simulate(&config(law_a(), 0, 1, 0, 0)).is_err());
    }
}

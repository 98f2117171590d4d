//! Canonical increment laws used by the test suite and the CLI examples.

use crate::law::LatticeLaw;

/// `{−1: 1/3, 0: 1/3, 1: 1/3}`: centered, aperiodic, variance 2/3.
pub fn law_a() -> LatticeLaw {
    LatticeLaw::new(-1, vec![1.0 / 3.0; 3]).expect("valid fixture")
}

/// `{−1: 0.2, 0: 0.3, 1: 0.5}`: drift +0.3, aperiodic.
pub fn law_b() -> LatticeLaw {
    LatticeLaw::new(-1, vec![0.2, 0.3, 0.5]).expect("valid fixture")
}

/// Uniform law on `{−2, …, 2}`: centered with overshoot bound 2.
pub fn symmetric_five() -> LatticeLaw {
    LatticeLaw::new(-2, vec![0.2; 5]).expect("valid fixture")
}

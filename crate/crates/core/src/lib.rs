//! Exact and asymptotic return probabilities of the reflected random walk
//! `X_{n+1} = |X_n + Y_{n+1}|` on the nonnegative integers.

pub mod asymptotics;
pub mod chain;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod fluctuation;
pub mod law;
pub mod montecarlo;
pub mod numeric;
pub mod poly;
pub mod reflection;
pub mod series;
pub mod wiener_hopf;

pub use error::{Error, Result};
pub use law::{HypothesisReport, LatticeLaw, Moments, Regime, TiltInfo};
pub use series::TruncatedSeries;

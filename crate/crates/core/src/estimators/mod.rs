//! Monte Carlo estimators for ball-mass ratios: the sampling engines, the
//! estimate type with its degeneracy rules, schedules coupling radius to
//! cutoff, and the experiment-level drivers.

pub mod engine;
pub mod estimate;
pub mod ratios;
pub mod schedule;

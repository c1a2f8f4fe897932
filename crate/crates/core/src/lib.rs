//! Spectral toolkit for lattice field measures on the unit torus in one to
//! three dimensions: band-limited fields and their fast transforms, Wick
//! powers with logarithmic counterterms, distribution-space ball membership,
//! and Monte Carlo estimators for the ratio of a measure's mass on two small
//! balls, which converges to the exponential of an action difference.

pub mod action;
pub mod balls;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod measures;
pub mod norms;
pub mod oracle;
pub mod spectral;
pub mod wick;

pub use rustfft::num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use crate::action::{
    action_p, action_phi4, om_prediction, third_order_prediction, ActionValue, RatioPrediction,
};
pub use crate::balls::{
    contains, BallEvaluator, BallKind, BallSpec, BallWorkspace, PlainNorm,
};
pub use crate::error::{Error, Result};
pub use crate::estimators::engine::{Engine, SamplerOpts};
pub use crate::estimators::estimate::Estimate;
pub use crate::estimators::ratios::{
    acceptance_rate, collect_ball_samples, degeneracy_scan_3d, degeneracy_scan_3d_with,
    joint_limit_ratio, om_limit_scan, om_ratio_recentered, om_ratio_direct, om_scan_prediction,
    recentering_residual, third_order_ratio, JointRow, JointScan, LevelRatioScan, ScanRow,
    ThirdOrderScan,
};
pub use crate::estimators::schedule::Schedule;
pub use crate::fft::{fft_nd, next_fast_len};
pub use crate::measures::{
    cm_log_weight, potential, potential_of_field, potential_on_grid, sample_batch, sample_gff,
    stream_rng, CameronMartinShift, GibbsModel, GibbsVariant, RngLayout,
};
pub use crate::norms::{
    besov_norm, besov_norm_with, cm_norm_sq, h10_norm, lp_block, lp_norm, pairing, sup_norm,
    DyadicPartition, PartitionKind,
};
pub use crate::oracle::{binomial_direct_check, gaussian_ball_prob_lowdim, wick_pair_moment};
pub use crate::spectral::{
    analyze, analyze_retaining_mean, green_kernel, project, synthesize, FourierField, GridField,
    Mode, ModeTruncation, TorusSpec,
};
pub use crate::wick::{
    binomial, dealiased_grid, hermite, variance_constant, wick_binomial_pairing, wick_power,
    wick_power_on_grid, WickBundle,
};

/// A Monte Carlo estimate with its sampling diagnostics.
///
/// `value` and `stderr` live on the linear scale, `log_value` and
/// `log_stderr` on the log scale where ratio experiments are naturally
/// additive. `ess` is the exponential-weight effective sample size
/// (sum w)^2 / sum w^2, minimized over the estimator's sample pools; an
/// estimate is marked `degenerate` when too few effective samples or
/// batches back it, and its numeric fields are then NaN.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub log_value: f64,
    pub log_stderr: f64,
    pub n_samples: u64,
    pub ess: f64,
    pub degenerate: bool,
}

impl Estimate {
    pub(crate) fn degenerate(n_samples: u64, ess: f64) -> Self {
        Estimate {
            value: f64::NAN,
            stderr: f64::NAN,
            log_value: f64::NAN,
            log_stderr: f64::NAN,
            n_samples,
            ess,
            degenerate: true,
        }
    }

    /// Half-width of the two-sided interval at `k` standard errors.
    pub fn interval(&self, k: f64) -> f64 {
        k * self.stderr
    }
}

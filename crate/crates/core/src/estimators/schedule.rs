use crate::error::{Error, Result};

/// A coupled path (r_1, n_1), (r_2, n_2), ... toward the small-ball limit:
/// radii strictly decrease while cutoffs grow slowly enough that r log n
/// still decreases strictly, which keeps the log n inflation of the cube
/// condition subordinate to the shrinking radius.
#[derive(Clone, Debug)]
pub struct Schedule {
    rows: Vec<(f64, u32)>,
}

impl Schedule {
    pub fn new(rows: Vec<(f64, u32)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("empty schedule".into()));
        }
        for &(r, n) in &rows {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
            }
            if n < 2 {
                return Err(Error::InvalidParameter(
                    "schedule cutoffs must be >= 2".into(),
                ));
            }
        }
        for w in rows.windows(2) {
            let (r0, n0) = w[0];
            let (r1, n1) = w[1];
            if r1 >= r0 {
                return Err(Error::InvalidParameter(
                    "radii must decrease strictly".into(),
                ));
            }
            if n1 < n0 {
                return Err(Error::InvalidParameter(
                    "cutoffs must not decrease".into(),
                ));
            }
            let damped0 = r0 * (n0 as f64).ln();
            let damped1 = r1 * (n1 as f64).ln();
            if damped1 >= damped0 {
                return Err(Error::InvalidParameter(format!(
                    "r log n must decrease strictly: {damped0} then {damped1}"
                )));
            }
        }
        Ok(Schedule { rows })
    }

    /// Couple n = ceil(r^{-1/2}) to each radius, floored at 2.
    pub fn default_sqrt_inv(r_values: &[f64]) -> Result<Self> {
        let rows = r_values
            .iter()
            .map(|&r| {
                let n = if r > 0.0 {
                    (r.powf(-0.5).ceil() as u32).max(2)
                } else {
                    2
                };
                (r, n)
            })
            .collect();
        Schedule::new(rows)
    }

    pub fn rows(&self) -> &[(f64, u32)] {
        &self.rows
    }

    pub fn final_row(&self) -> (f64, u32) {
        *self.rows.last().expect("schedules are nonempty")
    }
}

//! Hermite recentering of powers of a truncated Gaussian field.
//!
//! Working definition: phi^{:p:} = H_p(phi(x), c) pointwise, where H_p is the
//! probabilists' Hermite polynomial with variance parameter c and c is the
//! per-point variance of the truncated field. All grid work is dealiased, so
//! coefficients and means below come out exact up to rounding.

use crate::error::{Error, Result};
use crate::fft::next_fast_len;
use crate::spectral::{
    analyze_retaining_mean, project, synthesize, FourierField, ModeTruncation, TorusSpec,
};

/// H_p(y, c) by the recurrence H_{p+1} = y H_p - p c H_{p-1}.
pub fn hermite(p: u32, y: f64, c: f64) -> f64 {
    match p {
        0 => 1.0,
        1 => y,
        _ => {
            let mut prev = 1.0f64;
            let mut cur = y;
            for q in 1..p {
                let next = y * cur - q as f64 * c * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Binomial coefficient as f64; exact for the small orders used here.
pub fn binomial(p: u32, m: u32) -> f64 {
    if m > p {
        return 0.0;
    }
    let m = m.min(p - m);
    let mut acc = 1.0f64;
    for i in 0..m {
        acc = acc * (p - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Pointwise variance c_n = sum over box modes of 1 / lambda_k.
pub fn variance_constant(torus: TorusSpec, n: u32) -> f64 {
    let trunc = ModeTruncation::new(n);
    trunc.modes(torus.d).map(|k| 1.0 / torus.lambda(k)).sum()
}

/// Grid size on which products of degree p of a cutoff-n field are alias-free.
pub fn dealiased_grid(n: u32, p: u32) -> usize {
    next_fast_len((2 * p * n + 1) as usize)
}

/// p-th Wick power of a cutoff-n field on an alias-free grid.
///
/// The result has Fourier support in max|k_i| <= p n, plus the mean of the
/// power retained as the separate mean scalar.
pub fn wick_power(base: &FourierField, p: u32, c_n: f64) -> Result<FourierField> {
    wick_power_on_grid(base, p, c_n, dealiased_grid(base.trunc.n, p.max(1)))
}

/// Wick power evaluated through an explicit grid with m points per axis.
///
/// Requires m >= (p + 1) n + 1. The result is truncated to what the grid can
/// represent, min(p n, (m - 1) / 2); coefficients with max|k_i| <= m - p n - 1
/// are exact, so full exactness needs m >= 2 p n + 1 (the `wick_power` default).
pub fn wick_power_on_grid(
    base: &FourierField,
    p: u32,
    c_n: f64,
    m: usize,
) -> Result<FourierField> {
    let n = base.trunc.n;
    if p == 0 {
        let mut one = FourierField::zero(base.torus, ModeTruncation::new(0));
        one.set_mean(1.0);
        return Ok(one);
    }
    let needed = ((p + 1) * n + 1) as usize;
    if m < needed {
        return Err(Error::GridTooSmall { needed, got: m });
    }
    let mut g = synthesize(base, m)?;
    for v in &mut g.values {
        *v = hermite(p, *v, c_n);
    }
    analyze_retaining_mean(&g, (p * n).min(((m - 1) / 2) as u32))
}

/// The observable <(phi - z)_n^{:p:}, 1> computed term by term from the
/// binomial expansion sum_m C(p,m) (-1)^{p-m} <phi_n^{:m:}, z_n^{p-m}>,
/// with every pairing evaluated by exact quadrature on one shared grid.
pub fn wick_binomial_pairing(phi: &FourierField, z: &FourierField, n: u32, p: u32) -> Result<f64> {
    if phi.torus != z.torus {
        return Err(Error::Mismatch("pairing across different tori".into()));
    }
    let c_n = variance_constant(phi.torus, n);
    let phi_n = project(phi, n.min(phi.trunc.n))?.embed(ModeTruncation::new(n))?;
    let z_n = project(z, n.min(z.trunc.n))?.embed(ModeTruncation::new(n))?;
    let m_grid = next_fast_len((p * n + 1) as usize).max(ModeTruncation::new(n).side());
    let pg = synthesize(&phi_n, m_grid)?;
    let zg = synthesize(&z_n, m_grid)?;
    let vol = pg.len() as f64;
    let mut total = 0.0f64;
    for m in 0..=p {
        let sign = if (p - m) % 2 == 0 { 1.0 } else { -1.0 };
        let coef = binomial(p, m) * sign;
        let mut acc = 0.0f64;
        for (a, b) in pg.values.iter().zip(&zg.values) {
            acc += hermite(m, *a, c_n) * b.powi((p - m) as i32);
        }
        total += coef * acc / vol;
    }
    Ok(total)
}

/// A field together with its first few Wick powers at one truncation level.
#[derive(Clone, Debug)]
pub struct WickBundle {
    pub level_n: u32,
    pub c_n: f64,
    pub base: FourierField,
    powers: Vec<FourierField>,
}

impl WickBundle {
    /// Projects phi to cutoff n and materializes phi_n^{:p:} for p = 1..=p_max.
    pub fn new(phi: &FourierField, level_n: u32, p_max: u32) -> Result<Self> {
        if p_max == 0 || p_max > 6 {
            return Err(Error::InvalidParameter(format!(
                "power range 1..=6 expected, got p_max = {p_max}"
            )));
        }
        let base = project(phi, level_n)?;
        let c_n = variance_constant(phi.torus, level_n);
        // One shared grid dealiases every power up to p_max.
        let m = dealiased_grid(level_n, p_max);
        let g = synthesize(&base, m)?;
        let mut powers = Vec::with_capacity(p_max as usize);
        for p in 1..=p_max {
            if p == 1 {
                powers.push(base.clone());
                continue;
            }
            let mut gp = g.clone();
            for v in &mut gp.values {
                *v = hermite(p, *v, c_n);
            }
            powers.push(analyze_retaining_mean(&gp, p * level_n)?);
        }
        Ok(WickBundle {
            level_n,
            c_n,
            base,
            powers,
        })
    }

    pub fn p_max(&self) -> u32 {
        self.powers.len() as u32
    }

    /// phi_n^{:p:} for p in 1..=p_max; power(1) is the base field itself.
    pub fn power(&self, p: u32) -> Result<&FourierField> {
        if p == 0 || p > self.p_max() {
            return Err(Error::InvalidParameter(format!(
                "power {p} outside 1..={}",
                self.p_max()
            )));
        }
        Ok(&self.powers[(p - 1) as usize])
    }

    /// <phi_n^{:p:}, 1>; p = 0 gives 1.
    pub fn mean_of(&self, p: u32) -> Result<f64> {
        if p == 0 {
            return Ok(1.0);
        }
        Ok(self.power(p)?.mean())
    }
}

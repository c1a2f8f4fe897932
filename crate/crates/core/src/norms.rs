//! Dyadic frequency decomposition and the norms built on it.
//!
//! Blocks are indexed j = -1, 0, 1, ... The smooth flavor uses a C^2 radial
//! bump partition of unity; the sharp flavor uses hard annuli 2^j <= |k| <
//! 2^{j+1} with the j = -1 block holding only the mean. Block sups are taken
//! on grids oversampled 4x past the block's top frequency.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::next_fast_len;
use crate::spectral::{synthesize, FourierField, GridField, Mode, ModeTruncation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKind {
    Smooth,
    Sharp,
}

/// Quintic smoothstep, C^2 at both ends.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Radial cutoff: 1 on [0, 3/4], 0 on [4/3, inf), C^2 in between.
fn chi(rho: f64) -> f64 {
    const LO: f64 = 0.75;
    const HI: f64 = 4.0 / 3.0;
    if rho <= LO {
        1.0
    } else if rho >= HI {
        0.0
    } else {
        1.0 - smoothstep((rho - LO) / (HI - LO))
    }
}

/// Dyadic partition adapted to a given dimension and mode cutoff.
#[derive(Clone, Copy, Debug)]
pub struct DyadicPartition {
    pub kind: PartitionKind,
    pub j_max: i32,
    d: usize,
    n: u32,
}

impl DyadicPartition {
    /// Smallest family of blocks that sums to 1 on the cutoff-n box.
    pub fn for_cutoff(kind: PartitionKind, d: usize, n: u32) -> Self {
        let max2 = d as u128 * n as u128 * n as u128;
        let mut j = -1i32;
        loop {
            let four_pow = 1u128 << (2 * (j + 1) as u32);
            let covered = match kind {
                // |k| <= (3/4) 2^{j+1}, squared to stay in integers.
                PartitionKind::Smooth => 16 * max2 <= 9 * four_pow,
                PartitionKind::Sharp => max2 < four_pow,
            };
            if covered {
                return DyadicPartition { kind, j_max: j, d, n };
            }
            j += 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cutoff(&self) -> u32 {
        self.n
    }

    /// Weight of mode k in block j. The zero mode belongs to block -1.
    pub fn block_weight(&self, j: i32, k: Mode) -> f64 {
        let k2: u64 = k.iter().map(|&c| (c as i64 * c as i64) as u64).sum();
        match self.kind {
            PartitionKind::Smooth => {
                let rho = (k2 as f64).sqrt();
                if j == -1 {
                    chi(rho)
                } else {
                    let hi = (1u64 << (j + 1) as u32) as f64;
                    let lo = (1u64 << j as u32) as f64;
                    chi(rho / hi) - chi(rho / lo)
                }
            }
            PartitionKind::Sharp => {
                if j == -1 {
                    return if k2 == 0 { 1.0 } else { 0.0 };
                }
                let lo = 1u64 << (2 * j as u32);
                let hi = 1u64 << (2 * (j + 1) as u32);
                if k2 >= lo && k2 < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Per-axis cutoff of block j after intersecting with the field's box.
    pub fn block_cutoff(&self, j: i32) -> u32 {
        let upper = match self.kind {
            // Support |k| < (4/3) 2^{j+1}; block -1 reaches |k| < 4/3.
            PartitionKind::Smooth => {
                let top = 4.0 / 3.0 * (1u64 << (j + 1) as u32) as f64;
                (top - 1e-9).floor() as u32
            }
            PartitionKind::Sharp => {
                if j == -1 {
                    0
                } else {
                    (1u32 << (j + 1) as u32) - 1
                }
            }
        };
        upper.min(self.n)
    }

    /// Grid side for sup evaluation of block j, 4x past its top frequency.
    pub fn block_grid(&self, j: i32) -> usize {
        let side = 2 * self.block_cutoff(j) as usize + 1;
        next_fast_len(4 * side)
    }
}

/// The block-j piece of f, sampled on the block's oversampled grid.
pub fn lp_block(f: &FourierField, j: i32, partition: &DyadicPartition) -> Result<GridField> {
    if partition.dim() != f.torus.d {
        return Err(Error::Mismatch("partition dimension vs field".into()));
    }
    if j < -1 {
        return Err(Error::InvalidParameter(format!("block index {j}")));
    }
    let nj = partition.block_cutoff(j);
    let mut block = FourierField::zero(f.torus, ModeTruncation::new(nj));
    for (k, c) in f.iter() {
        let w = partition.block_weight(j, k);
        if w != 0.0 && block.trunc.contains(f.torus.d, k) {
            block.set_pair(k, c * w)?;
        }
    }
    if j == -1 {
        block.set_mean(f.mean());
    }
    synthesize(&block, partition.block_grid(j))
}

/// Besov sup-norm sup_j 2^{j alpha} ||block_j||_inf with the smooth partition.
///
/// Negative alpha is the usual case here; the j = -1 block then carries the
/// largest weight 2^{-alpha}. A retained mean contributes through block -1.
pub fn besov_norm(f: &FourierField, alpha: f64) -> f64 {
    let partition = DyadicPartition::for_cutoff(PartitionKind::Smooth, f.torus.d, f.trunc.n);
    besov_norm_with(f, alpha, &partition)
}

pub fn besov_norm_with(f: &FourierField, alpha: f64, partition: &DyadicPartition) -> f64 {
    let mut worst = 0.0f64;
    for j in -1..=partition.j_max {
        let block = lp_block(f, j, partition).expect("block synthesis on matched layouts");
        let sup = block.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max((j as f64 * alpha).exp2() * sup);
    }
    worst
}

/// Homogeneous H^1 seminorm sqrt(sum 4 pi^2 |k|^2 |coeff|^2); mass is ignored.
pub fn h10_norm(f: &FourierField) -> f64 {
    let massless = crate::spectral::TorusSpec::massless(f.torus.d);
    f.iter()
        .map(|(k, c)| massless.lambda(k) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Quadratic form of the sampling covariance: sum lambda_k |coeff|^2 plus
/// mass * mean^2. Coincides with h10_norm^2 in the massless case.
pub fn cm_norm_sq(f: &FourierField) -> f64 {
    let base: f64 = f
        .iter()
        .map(|(k, c)| f.torus.lambda(k) * c.norm_sqr())
        .sum();
    base + f.torus.mass * f.mean() * f.mean()
}

/// L^p norm of grid samples under the uniform probability measure;
/// p = infinity gives the max.
pub fn lp_norm(g: &GridField, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1");
    if p.is_infinite() {
        return g.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let mean_pow: f64 =
        g.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / g.len() as f64;
    mean_pow.powf(1.0 / p)
}

/// Sup norm of a band-limited field via a 4x oversampled grid.
pub fn sup_norm(f: &FourierField) -> f64 {
    let m = next_fast_len(4 * f.trunc.side());
    let g = synthesize(f, m).expect("oversampled grid is large enough");
    lp_norm(&g, f64::INFINITY)
}

/// L^2 pairing <f, g> = sum_k coeff_f(k) conj(coeff_g(k)) plus the product of
/// retained means. Cutoffs may differ; the sum runs over the smaller box.
pub fn pairing(f: &FourierField, g: &FourierField) -> Result<f64> {
    if f.torus.d != g.torus.d {
        return Err(Error::Mismatch("pairing across dimensions".into()));
    }
    let (small, big) = if f.trunc.n <= g.trunc.n { (f, g) } else { (g, f) };
    let mut acc = Complex64::default();
    for (k, c) in small.iter() {
        acc += c * big.coeff(k).conj();
    }
    // Hermitian symmetry makes the imaginary parts cancel pairwise.
    Ok(acc.re + f.mean() * g.mean())
}

//! The reference Gaussian measure on truncated fields and the interacting
//! densities on top of it.
//!
//! Under the reference measure each Hermitian pair {k, -k} carries an
//! independent complex Gaussian with E|coeff(k)|^2 = 1 / lambda_k, i.e. real
//! and imaginary part are N(0, 1/(2 lambda_k)). Interacting models reweight
//! by exp(-potential).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::next_fast_len;
use crate::norms::cm_norm_sq;
use crate::spectral::{
    is_canonical, project, synthesize, FourierField, GridField, ModeTruncation, TorusSpec,
};
use crate::wick::{hermite, variance_constant, WickBundle};

/// Which density sits on top of the reference measure.
#[derive(Clone, Debug, PartialEq)]
pub enum GibbsVariant {
    /// Free field: no reweighting.
    Gff,
    /// Quartic self-interaction on the line, (1/4) integral of phi^4.
    Phi4D1,
    /// Even polynomial in Wick powers on the plane: coeffs a_0..a_{2k} of
    /// sum_j a_j <phi^{:j:}, 1>.
    PPhi2 { coeffs: Vec<f64> },
    /// Level-n quartic in d = 3 with a logarithmic counterterm:
    /// (1/4) <phi_n^{:4:} - c_n_term phi_n^{:2:}, 1>, c_n_term = -scale log n.
    Phi4D3Level { level: u32, counterterm_scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsModel {
    pub torus: TorusSpec,
    pub trunc: ModeTruncation,
    pub variant: GibbsVariant,
}

impl GibbsModel {
    pub fn new(torus: TorusSpec, trunc: ModeTruncation, variant: GibbsVariant) -> Result<Self> {
        match &variant {
            GibbsVariant::Gff => {}
            GibbsVariant::Phi4D1 => {
                if torus.d != 1 {
                    return Err(Error::InvalidParameter(
                        "quartic line model needs d = 1".into(),
                    ));
                }
            }
            GibbsVariant::PPhi2 { coeffs } => {
                if torus.d != 2 {
                    return Err(Error::InvalidParameter(
                        "polynomial plane model needs d = 2".into(),
                    ));
                }
                if coeffs.len() < 3 || coeffs.len() % 2 == 0 {
                    return Err(Error::InvalidParameter(
                        "polynomial coefficients must run a_0..a_{2k} with k >= 1".into(),
                    ));
                }
                let top = *coeffs.last().unwrap();
                if !(top > 0.0) {
                    return Err(Error::InvalidParameter(
                        "leading polynomial coefficient must be positive".into(),
                    ));
                }
                if coeffs.len() > 7 {
                    return Err(Error::InvalidParameter(
                        "polynomial degree above 6 is not supported".into(),
                    ));
                }
            }
            GibbsVariant::Phi4D3Level {
                level,
                counterterm_scale,
            } => {
                if torus.d != 3 {
                    return Err(Error::InvalidParameter(
                        "level-truncated quartic model needs d = 3".into(),
                    ));
                }
                if *level < 1 || *level > trunc.n {
                    return Err(Error::InvalidParameter(format!(
                        "level {level} outside 1..=working cutoff {}",
                        trunc.n
                    )));
                }
                if !(*counterterm_scale > 0.0) {
                    return Err(Error::InvalidParameter(
                        "counterterm scale must be positive".into(),
                    ));
                }
            }
        }
        Ok(GibbsModel {
            torus,
            trunc,
            variant,
        })
    }

    /// Truncation level at which the potential is evaluated.
    pub fn level(&self) -> u32 {
        match &self.variant {
            GibbsVariant::Phi4D3Level { level, .. } => *level,
            _ => self.trunc.n,
        }
    }

    /// Polynomial degree of the potential; 0 for the free field.
    pub fn degree(&self) -> u32 {
        match &self.variant {
            GibbsVariant::Gff => 0,
            GibbsVariant::Phi4D1 => 4,
            GibbsVariant::PPhi2 { coeffs } => (coeffs.len() - 1) as u32,
            GibbsVariant::Phi4D3Level { .. } => 4,
        }
    }

    /// Coefficient in front of phi_n^{:2:}; negative, growing like -log n.
    pub fn counterterm(&self) -> f64 {
        match &self.variant {
            GibbsVariant::Phi4D3Level {
                level,
                counterterm_scale,
            } => -counterterm_scale * (*level as f64).ln(),
            _ => 0.0,
        }
    }

    /// Pointwise variance of the level-projected field.
    pub fn level_variance(&self) -> f64 {
        variance_constant(self.torus, self.level())
    }
}

/// One independent sample of the reference measure at the given truncation.
///
/// Modes are visited in the canonical scan order and each Hermitian pair
/// consumes exactly two normal draws, so a fixed generator state fixes the
/// sample bit for bit.
pub fn sample_gff(trunc: ModeTruncation, torus: TorusSpec, rng: &mut impl Rng) -> FourierField {
    let mut f = FourierField::zero(torus, trunc);
    let d = torus.d;
    let len = trunc.len(d);
    for idx in 0..len {
        let k = trunc.mode_at(d, idx);
        if !is_canonical(k) {
            continue;
        }
        let sd = (0.5 / torus.lambda(k)).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        f.set_pair(k, Complex64::new(re * sd, im * sd))
            .expect("box mode");
    }
    f
}

/// Generator for one reproducible sub-stream of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How a sampling run is split into reproducible, mergeable chunks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngLayout {
    pub seed: u64,
    pub chunks: u32,
}

impl RngLayout {
    pub fn new(seed: u64) -> Self {
        RngLayout { seed, chunks: 256 }
    }

    pub fn with_chunks(seed: u64, chunks: u32) -> Result<Self> {
        if chunks == 0 {
            return Err(Error::InvalidParameter("at least one chunk".into()));
        }
        Ok(RngLayout { seed, chunks })
    }

    /// Number of items chunk i contributes out of a total of `count`.
    pub fn chunk_len(&self, count: u64, i: u32) -> u64 {
        let base = count / self.chunks as u64;
        let rem = count % self.chunks as u64;
        base + u64::from((i as u64) < rem)
    }
}

/// A translation of the reference measure along a mean-zero shift direction.
#[derive(Clone, Debug)]
pub struct CameronMartinShift {
    pub z: FourierField,
    /// Cached quadratic form sum lambda_k |z_k|^2 of the shift.
    pub h10_sq: f64,
}

impl CameronMartinShift {
    pub fn new(z: FourierField) -> Result<Self> {
        if z.mean() != 0.0 {
            return Err(Error::InvalidParameter(
                "shift direction must be mean-zero".into(),
            ));
        }
        let h10_sq = cm_norm_sq(&z);
        Ok(CameronMartinShift { z, h10_sq })
    }
}

/// Log density of the shifted reference measure against the unshifted one,
/// evaluated at phi: -<z, phi>_lambda - (1/2) |z|_lambda^2.
///
/// Integrating exp of this against the reference measure gives exactly 1.
pub fn cm_log_weight(shift: &CameronMartinShift, phi: &FourierField) -> f64 {
    let torus = shift.z.torus;
    debug_assert_eq!(torus, phi.torus);
    let mut cross = 0.0f64;
    for (k, zc) in shift.z.iter() {
        cross += torus.lambda(k) * (zc * phi.coeff(k).conj()).re;
    }
    -cross - 0.5 * shift.h10_sq
}

/// Potential of the model evaluated on a bundle of Wick powers of the field
/// at the model's level.
pub fn potential(model: &GibbsModel, bundle: &WickBundle) -> Result<f64> {
    if bundle.level_n != model.level() {
        return Err(Error::Mismatch(format!(
            "bundle level {} vs model level {}",
            bundle.level_n,
            model.level()
        )));
    }
    let deg = model.degree();
    if deg > 0 && bundle.p_max() < deg {
        return Err(Error::InvalidParameter(format!(
            "bundle carries powers up to {}, potential needs {deg}",
            bundle.p_max()
        )));
    }
    let c = bundle.c_n;
    Ok(match &model.variant {
        GibbsVariant::Gff => 0.0,
        GibbsVariant::Phi4D1 => {
            // Raw quartic from Wick means: <phi^4> = <H_4> + 6 c <H_2> + 3 c^2
            // and <phi^2> = <H_2> + c.
            let m4 = bundle.mean_of(4)?;
            let m2 = bundle.mean_of(2)?;
            0.25 * (m4 + 6.0 * c * m2 + 3.0 * c * c)
        }
        GibbsVariant::PPhi2 { coeffs } => {
            let mut acc = 0.0;
            for (j, a) in coeffs.iter().enumerate() {
                if *a != 0.0 {
                    acc += a * bundle.mean_of(j as u32)?;
                }
            }
            acc
        }
        GibbsVariant::Phi4D3Level { .. } => {
            let m4 = bundle.mean_of(4)?;
            let m2 = bundle.mean_of(2)?;
            0.25 * (m4 - model.counterterm() * m2)
        }
    })
}

/// Potential from grid samples of the level-projected field. The grid must be
/// alias-free for the model degree: m >= degree * level + 1.
pub fn potential_on_grid(model: &GibbsModel, g: &GridField, c_level: f64) -> f64 {
    match &model.variant {
        GibbsVariant::Gff => 0.0,
        GibbsVariant::Phi4D1 => {
            let m4: f64 = g.values.iter().map(|v| v.powi(4)).sum::<f64>() / g.len() as f64;
            0.25 * m4
        }
        GibbsVariant::PPhi2 { coeffs } => {
            let vol = g.len() as f64;
            let mut acc = 0.0;
            for (j, a) in coeffs.iter().enumerate() {
                if *a != 0.0 {
                    let mj: f64 = g
                        .values
                        .iter()
                        .map(|&v| hermite(j as u32, v, c_level))
                        .sum::<f64>()
                        / vol;
                    acc += a * mj;
                }
            }
            acc
        }
        GibbsVariant::Phi4D3Level { .. } => {
            let vol = g.len() as f64;
            let ct = model.counterterm();
            let mut acc4 = 0.0f64;
            let mut acc2 = 0.0f64;
            for &v in &g.values {
                let v2 = v * v;
                acc2 += v2 - c_level;
                acc4 += v2 * v2 - 6.0 * c_level * v2 + 3.0 * c_level * c_level;
            }
            0.25 * (acc4 - ct * acc2) / vol
        }
    }
}

/// Potential of a single field, projecting to the model level internally.
pub fn potential_of_field(model: &GibbsModel, phi: &FourierField) -> Result<f64> {
    if model.degree() == 0 {
        return Ok(0.0);
    }
    let level = model.level();
    let base = project(phi, level)?;
    let m = next_fast_len((model.degree() * level + 1) as usize).max(base.trunc.side());
    let g = synthesize(&base, m)?;
    Ok(potential_on_grid(model, &g, variance_constant(model.torus, level)))
}

/// Lazy stream of (sample, log weight) pairs with log weight = -potential.
pub fn sample_batch(
    model: &GibbsModel,
    count: u64,
    layout: RngLayout,
) -> impl Iterator<Item = (FourierField, f64)> + '_ {
    SampleBatch {
        model,
        layout,
        count,
        produced: 0,
        chunk: 0,
        left_in_chunk: 0,
        rng: stream_rng(layout.seed, 0),
    }
}

struct SampleBatch<'a> {
    model: &'a GibbsModel,
    layout: RngLayout,
    count: u64,
    produced: u64,
    chunk: u32,
    left_in_chunk: u64,
    rng: ChaCha8Rng,
}

impl Iterator for SampleBatch<'_> {
    type Item = (FourierField, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.produced >= self.count {
            return None;
        }
        while self.left_in_chunk == 0 {
            if self.chunk >= self.layout.chunks {
                return None;
            }
            self.rng = stream_rng(self.layout.seed, self.chunk as u64);
            self.left_in_chunk = self.layout.chunk_len(self.count, self.chunk);
            self.chunk += 1;
        }
        self.left_in_chunk -= 1;
        self.produced += 1;
        let phi = sample_gff(self.model.trunc, self.model.torus, &mut self.rng);
        let lw = -potential_of_field(self.model, &phi).expect("model and sample share layouts");
        Some((phi, lw))
    }
}

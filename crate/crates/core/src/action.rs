//! Deterministic limit functionals evaluated on smooth band-limited centers,
//! and the predicted small-radius ratios built from them.

use crate::error::{Error, Result};
use crate::fft::next_fast_len;
use crate::measures::{GibbsModel, GibbsVariant};
use crate::norms::h10_norm;
use crate::spectral::{synthesize, FourierField};

/// Value of a functional split into its interaction and quadratic parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionValue {
    /// Integral of the interaction polynomial (the raw quartic by default).
    pub quartic_part: f64,
    /// (1/2) |z|_{H^1}^2, plus (mass/2) |z|_{L^2}^2 when the torus has mass.
    pub gradient_part: f64,
    pub total: f64,
}

fn gradient_part(z: &FourierField) -> f64 {
    let h = h10_norm(z);
    let mut g = 0.5 * h * h;
    if z.torus.mass > 0.0 {
        g += 0.5 * z.torus.mass * z.l2_norm_sq();
    }
    g
}

fn poly_integral(z: &FourierField, coeffs: &[f64]) -> Result<f64> {
    let degree = coeffs.len().saturating_sub(1) as u32;
    let m = next_fast_len((degree * z.trunc.n + 1).max(1) as usize).max(z.trunc.side());
    let g = synthesize(z, m)?;
    let vol = g.len() as f64;
    let mut acc = 0.0f64;
    for &v in &g.values {
        // Horner in v over the fixed coefficient list.
        let mut pv = 0.0f64;
        for &a in coeffs.iter().rev() {
            pv = pv * v + a;
        }
        acc += pv;
    }
    Ok(acc / vol)
}

/// (1/4) integral of z^4 plus the quadratic part.
pub fn action_phi4(z: &FourierField) -> ActionValue {
    let quartic = poly_integral(z, &[0.0, 0.0, 0.0, 0.0, 0.25])
        .expect("alias-free grid for the quartic");
    let grad = gradient_part(z);
    ActionValue {
        quartic_part: quartic,
        gradient_part: grad,
        total: quartic + grad,
    }
}

/// Integral of the raw polynomial sum_j a_j z^j plus the quadratic part.
///
/// On smooth centers the interaction enters unrenormalized; the Wick
/// corrections of the sampling measure vanish in the small-radius limit.
pub fn action_p(z: &FourierField, coeffs: &[f64]) -> Result<ActionValue> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("empty polynomial".into()));
    }
    let quartic = poly_integral(z, coeffs)?;
    let grad = gradient_part(z);
    Ok(ActionValue {
        quartic_part: quartic,
        gradient_part: grad,
        total: quartic + grad,
    })
}

fn action_for_model(z: &FourierField, model: &GibbsModel) -> Result<ActionValue> {
    Ok(match &model.variant {
        GibbsVariant::Gff => {
            let grad = gradient_part(z);
            ActionValue {
                quartic_part: 0.0,
                gradient_part: grad,
                total: grad,
            }
        }
        GibbsVariant::Phi4D1 | GibbsVariant::Phi4D3Level { .. } => action_phi4(z),
        GibbsVariant::PPhi2 { coeffs } => action_p(z, coeffs)?,
    })
}

/// A predicted ratio of small-ball masses, kept in both scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioPrediction {
    pub log_ratio: f64,
    pub ratio: f64,
}

/// Predicted limit of mass(B_r(z1)) / mass(B_r(z2)) as r shrinks:
/// exp(S(z2) - S(z1)) for the model's functional S.
pub fn om_prediction(
    z1: &FourierField,
    z2: &FourierField,
    model: &GibbsModel,
) -> Result<RatioPrediction> {
    if z1.torus != z2.torus {
        return Err(Error::Mismatch("centers on different tori".into()));
    }
    let s1 = action_for_model(z1, model)?.total;
    let s2 = action_for_model(z2, model)?.total;
    let log_ratio = s2 - s1;
    Ok(RatioPrediction {
        log_ratio,
        ratio: log_ratio.exp(),
    })
}

/// Predicted limit of the four-ball combination
/// mass(B(z1))^3 mass(B(3z1-2z2)) / (mass(B(z2)) mass(B(2z1-z2))^3):
/// exp(-3S(z1) - S(3z1-2z2) + S(z2) + 3S(2z1-z2)).
///
/// The quadratic parts cancel identically in this combination, which is what
/// makes it stable against the level-dependent corrections; only quartic
/// differences survive.
pub fn third_order_prediction(z1: &FourierField, z2: &FourierField) -> Result<RatioPrediction> {
    if z1.torus != z2.torus {
        return Err(Error::Mismatch("centers on different tori".into()));
    }
    let y1 = FourierField::linear_combination(&[(3.0, z1), (-2.0, z2)])?;
    let y2 = FourierField::linear_combination(&[(2.0, z1), (-1.0, z2)])?;
    let s_z1 = action_phi4(z1);
    let s_z2 = action_phi4(z2);
    let s_y1 = action_phi4(&y1);
    let s_y2 = action_phi4(&y2);
    let log_ratio = -3.0 * s_z1.total - s_y1.total + s_z2.total + 3.0 * s_y2.total;
    Ok(RatioPrediction {
        log_ratio,
        ratio: log_ratio.exp(),
    })
}

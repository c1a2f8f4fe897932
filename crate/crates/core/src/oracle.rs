//! Independent reference values for validating the Monte Carlo machinery:
//! quadrature-exact free-field ball probabilities in low dimension, closed
//! covariance pair moments, and a direct check of the shifted power
//! expansion.

use rustfft::num_complex::Complex64;

use crate::balls::{BallKind, BallSpec, PlainNorm};
use crate::error::{Error, Result};
use crate::fft::next_fast_len;
use crate::norms::{lp_block, DyadicPartition, PartitionKind};
use crate::spectral::{
    analyze_retaining_mean, green_kernel, project, synthesize, FourierField, ModeTruncation,
    TorusSpec,
};
use crate::wick::{binomial, hermite, variance_constant};

const QUAD_EPS: f64 = 2e-6;
const MAX_DEPTH: u32 = 30;

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// One linear membership condition |sum_i c_i w_i| < allowed on the
/// recentered coordinates w_i.
struct LinearCut {
    coefs: Vec<f64>,
    allowed: f64,
}

enum SliceShape {
    /// Intersection of linear cuts; the last coordinate is integrated exactly.
    Linear(Vec<LinearCut>),
    /// sum_i q_i w_i^2 < r^2.
    Quadratic { q: Vec<f64>, r_sq: f64 },
}

struct BallIntegrand {
    shape: SliceShape,
    sigmas: Vec<f64>,
    shifts: Vec<f64>,
    windows: Vec<(f64, f64)>,
}

impl BallIntegrand {
    fn nvars(&self) -> usize {
        self.sigmas.len()
    }

    fn value(&self) -> f64 {
        let mut ys = vec![0.0; self.nvars()];
        self.level(0, &mut ys)
    }

    fn level(&self, dim: usize, ys: &mut [f64]) -> f64 {
        if dim + 1 == ys.len() {
            return self.exact_slice(ys);
        }
        let (lo, hi) = self.windows[dim];
        let sigma = self.sigmas[dim];
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let mut f = |t: f64| {
            ys[dim] = t;
            let dens = norm * (-0.5 * (t / sigma) * (t / sigma)).exp();
            dens * self.level(dim + 1, ys)
        };
        adaptive_simpson(&mut f, lo, hi, QUAD_EPS)
    }

    /// Probability over the last coordinate, all earlier ones fixed.
    fn exact_slice(&self, ys: &[f64]) -> f64 {
        let last = ys.len() - 1;
        let sigma = self.sigmas[last];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        match &self.shape {
            SliceShape::Linear(cuts) => {
                for cut in cuts {
                    let mut a = -cut.coefs[last] * self.shifts[last];
                    for i in 0..last {
                        a += cut.coefs[i] * (ys[i] - self.shifts[i]);
                    }
                    let c = cut.coefs[last];
                    if c.abs() < 1e-300 {
                        if a.abs() >= cut.allowed {
                            return 0.0;
                        }
                        continue;
                    }
                    let (mut l, mut h) = ((-cut.allowed - a) / c, (cut.allowed - a) / c);
                    if l > h {
                        std::mem::swap(&mut l, &mut h);
                    }
                    lo = lo.max(l);
                    hi = hi.min(h);
                    if lo >= hi {
                        return 0.0;
                    }
                }
            }
            SliceShape::Quadratic { q, r_sq } => {
                let mut rem = *r_sq;
                for i in 0..last {
                    let w = ys[i] - self.shifts[i];
                    rem -= q[i] * w * w;
                }
                if rem <= 0.0 {
                    return 0.0;
                }
                let half = (rem / q[last]).sqrt();
                lo = self.shifts[last] - half;
                hi = self.shifts[last] + half;
            }
        }
        (std_normal_cdf(hi / sigma) - std_normal_cdf(lo / sigma)).max(0.0)
    }
}

fn adaptive_simpson<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, eps: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Probability that a free field at cutoff `trunc` lies in a plain ball, by
/// deterministic quadrature. Only d = 1 with at most two mode pairs is
/// supported; there the state is at most four real Gaussians, the innermost
/// of which is integrated in closed form against the membership constraints.
/// Accurate to a few parts in 1e5, well inside the 1e-4 budget.
pub fn gaussian_ball_prob_lowdim(trunc: ModeTruncation, spec: &BallSpec) -> Result<f64> {
    let torus = spec.center.torus;
    if torus.d != 1 {
        return Err(Error::Unsupported(
            "quadrature reference requires d = 1".into(),
        ));
    }
    if trunc.n == 0 || trunc.n > 2 {
        return Err(Error::Unsupported(
            "quadrature reference requires one or two mode pairs".into(),
        ));
    }
    let norm = match &spec.kind {
        BallKind::Plain { norm } => *norm,
        _ => {
            return Err(Error::Unsupported(
                "quadrature reference covers plain balls only".into(),
            ))
        }
    };
    let center = spec.center.embed(trunc)?;
    let r = spec.radius;
    let n = trunc.n;
    let nvars = 2 * n as usize;

    // Variables: (Re, Im) of each positive mode, ordered by k. The matching
    // real basis fields carry coefficient pairs (1, 1) and (i, -i).
    let mut sigmas = Vec::with_capacity(nvars);
    let mut shifts = Vec::with_capacity(nvars);
    let mut basis = Vec::with_capacity(nvars);
    for k in 1..=n as i32 {
        let lambda = torus.lambda([k, 0, 0]);
        let sigma = (0.5 / lambda).sqrt();
        let zc = center.coeff([k, 0, 0]);
        for (part, c) in [
            (zc.re, Complex64::new(1.0, 0.0)),
            (zc.im, Complex64::new(0.0, 1.0)),
        ] {
            sigmas.push(sigma);
            shifts.push(part);
            let mut b = FourierField::zero(torus, trunc);
            b.set_pair([k, 0, 0], c)?;
            basis.push(b);
        }
    }

    let shape = match norm {
        PlainNorm::SobolevH1 => {
            let massless = TorusSpec::massless(1);
            let mut q = Vec::with_capacity(nvars);
            for k in 1..=n as i32 {
                let lam = massless.lambda([k, 0, 0]);
                q.push(2.0 * lam);
                q.push(2.0 * lam);
            }
            SliceShape::Quadratic { q, r_sq: r * r }
        }
        PlainNorm::Sup => {
            let m = next_fast_len(4 * trunc.side());
            let tables: Vec<_> = basis
                .iter()
                .map(|b| synthesize(b, m).map(|g| g.values))
                .collect::<Result<_>>()?;
            SliceShape::Linear(point_cuts(&tables, r))
        }
        PlainNorm::Besov { alpha } => {
            let part = DyadicPartition::for_cutoff(PartitionKind::Smooth, 1, n);
            let mut cuts = Vec::new();
            for j in -1..=part.j_max {
                let tables: Vec<_> = basis
                    .iter()
                    .map(|b| lp_block(b, j, &part).map(|g| g.values))
                    .collect::<Result<_>>()?;
                cuts.extend(point_cuts(&tables, r / (j as f64 * alpha).exp2()));
            }
            SliceShape::Linear(cuts)
        }
    };

    // Integration windows: the Gaussian mass sits near zero, the membership
    // region near the center; pad by the radius over the per-variable scale.
    let mut windows = Vec::with_capacity(nvars);
    for i in 0..nvars {
        let slack = match &shape {
            SliceShape::Quadratic { q, .. } => r / q[i].sqrt(),
            SliceShape::Linear(cuts) => {
                let scale = cuts
                    .iter()
                    .map(|c| c.coefs[i].abs())
                    .fold(0.0f64, f64::max);
                if scale > 0.0 {
                    4.0 * r / scale
                } else {
                    0.0
                }
            }
        };
        let lo = shifts[i].min(0.0) - 8.0 * sigmas[i] - slack;
        let hi = shifts[i].max(0.0) + 8.0 * sigmas[i] + slack;
        windows.push((lo, hi));
    }

    let problem = BallIntegrand {
        shape,
        sigmas,
        shifts,
        windows,
    };
    Ok(problem.value().clamp(0.0, 1.0))
}

fn point_cuts(tables: &[Vec<f64>], allowed: f64) -> Vec<LinearCut> {
    let npts = tables.first().map_or(0, Vec::len);
    (0..npts)
        .map(|pt| LinearCut {
            coefs: tables.iter().map(|t| t[pt]).collect(),
            allowed,
        })
        .collect()
}

fn factorial(p: u32) -> f64 {
    (1..=p).fold(1.0, |acc, q| acc * q as f64)
}

/// E[<:phi^p:, f> <:phi^p:, g>] for the free field at cutoff `trunc`; the
/// covariance of the p-th power field is p! G_N(x - y)^p, so the moment is a
/// mode sum of f g-bar against the coefficients of G_N^p.
pub fn wick_pair_moment(
    p: u32,
    f: &FourierField,
    g: &FourierField,
    trunc: ModeTruncation,
) -> Result<f64> {
    if p == 0 || p > 3 {
        return Err(Error::InvalidParameter(format!(
            "pair moment degree {p} outside 1..=3"
        )));
    }
    if f.torus != g.torus {
        return Err(Error::Mismatch("pair moment fields share a torus".into()));
    }
    let d = f.torus.d;
    let kk = f.trunc.n.max(g.trunc.n);
    let m = next_fast_len(((p * trunc.n + kk + 1) as usize).max(trunc.side()));
    let mut green = green_kernel(f.torus, trunc.n, m)?;
    for v in &mut green.values {
        *v = v.powi(p as i32);
    }
    let gp = analyze_retaining_mean(&green, kk)?;
    let box_k = ModeTruncation::new(kk);
    let fe = f.embed(box_k)?;
    let ge = g.embed(box_k)?;
    let mut acc = gp.mean() * fe.mean() * ge.mean();
    for idx in 0..box_k.len(d) {
        let k = box_k.mode_at(d, idx);
        if k == [0, 0, 0] {
            continue;
        }
        acc += (fe.coeffs()[idx] * ge.coeffs()[idx].conj()).re * gp.coeffs()[idx].re;
    }
    Ok(factorial(p) * acc)
}

/// Relative defect of the shifted-power expansion
/// :(phi - z)^p: = sum_m C(p, m) (-1)^{p-m} :phi^m: z^{p-m}
/// integrated over the torus, both sides evaluated on one alias-free grid.
/// The defect is scaled by the grid mean of the absolute term magnitudes,
/// so cancellation between terms or across the grid cannot hide an error.
pub fn binomial_direct_check(
    phi: &FourierField,
    z: &FourierField,
    n: u32,
    p: u32,
) -> Result<f64> {
    if p == 0 || p > 6 {
        return Err(Error::InvalidParameter(format!(
            "power {p} outside 1..=6"
        )));
    }
    if phi.torus != z.torus {
        return Err(Error::Mismatch("field and shift share a torus".into()));
    }
    let d = phi.torus.d;
    let trunc = ModeTruncation::new(n);
    let phi_n = project(phi, n)?;
    let z_n = project(z, n)?;
    let c = variance_constant(phi.torus, n);
    let m = next_fast_len(((p * n + 1) as usize).max(trunc.side()));
    let phi_vals = synthesize(&phi_n, m)?.values;
    let z_vals = synthesize(&z_n, m)?.values;
    let vol = m.pow(d as u32) as f64;

    let mut lhs = 0.0;
    for i in 0..phi_vals.len() {
        lhs += hermite(p, phi_vals[i] - z_vals[i], c);
    }
    lhs /= vol;

    let mut rhs = 0.0;
    let mut scale = 0.0;
    for mm in 0..=p {
        let mut s = 0.0;
        let mut s_abs = 0.0;
        for i in 0..phi_vals.len() {
            let mut zp = 1.0;
            for _ in 0..(p - mm) {
                zp *= z_vals[i];
            }
            let term = hermite(mm, phi_vals[i], c) * zp;
            s += term;
            s_abs += term.abs();
        }
        s /= vol;
        s_abs /= vol;
        let sign = if (p - mm) % 2 == 0 { 1.0 } else { -1.0 };
        rhs += binomial(p, mm) * sign * s;
        scale += binomial(p, mm) * s_abs;
    }
    let defect = (lhs - rhs).abs();
    if scale < 1e-300 {
        Ok(defect)
    } else {
        Ok(defect / scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balls::{BallEvaluator, BallWorkspace};
    use crate::measures::{sample_gff, stream_rng};
    use std::f64::consts::PI;

    #[test]
    fn sobolev_ball_probability_matches_the_closed_form() {
        // One mode pair: the squared norm is 8 pi^2 (a^2 + b^2), an
        // exponential variable, so P(ball of radius rho) = 1 - exp(-rho^2/2).
        let torus = TorusSpec::massless(1);
        let trunc = ModeTruncation::new(1);
        for rho in [0.5, 1.0, 2.0] {
            let spec = BallSpec::plain(
                PlainNorm::SobolevH1,
                FourierField::zero(torus, trunc),
                rho,
            )
            .unwrap();
            let p = gaussian_ball_prob_lowdim(trunc, &spec).unwrap();
            let exact = 1.0 - (-0.5 * rho * rho).exp();
            assert!((p - exact).abs() < 5e-5, "rho={rho}: {p} vs {exact}");
        }
    }

    #[test]
    fn sup_ball_probability_is_near_the_continuum_value() {
        // The membership grid takes a sup over next_fast_len(12) points, a
        // hair below the continuum sup, so the probability sits slightly
        // above 1 - exp(-r^2 pi^2).
        let torus = TorusSpec::massless(1);
        let trunc = ModeTruncation::new(1);
        let spec = BallSpec::plain(PlainNorm::Sup, FourierField::zero(torus, trunc), 0.5).unwrap();
        let p = gaussian_ball_prob_lowdim(trunc, &spec).unwrap();
        let continuum = 1.0 - (-0.25 * PI * PI).exp();
        assert!(p >= continuum - 1e-4, "{p} vs {continuum}");
        assert!((p - continuum).abs() < 2e-2, "{p} vs {continuum}");
    }

    #[test]
    fn quadrature_matches_rejection_sampling() {
        let torus = TorusSpec::massless(1);
        for (n, norm, r, amp) in [
            (1u32, PlainNorm::Besov { alpha: 0.25 }, 0.35, 0.0),
            (2, PlainNorm::Besov { alpha: -0.3 }, 0.3, 0.05),
            (2, PlainNorm::Sup, 0.6, 0.08),
            (2, PlainNorm::SobolevH1, 1.6, 0.1),
        ] {
            let trunc = ModeTruncation::new(n);
            let center = if amp == 0.0 {
                FourierField::zero(torus, trunc)
            } else {
                FourierField::cosine(torus, trunc, [1, 0, 0], amp).unwrap()
            };
            let spec = BallSpec::plain(norm, center, r).unwrap();
            let pref = gaussian_ball_prob_lowdim(trunc, &spec).unwrap();
            let eval = BallEvaluator::new(spec, n).unwrap();
            let mut ws = BallWorkspace::new();
            let mut rng = stream_rng(42, 0);
            let total = 6000;
            let mut hits = 0usize;
            for _ in 0..total {
                let phi = sample_gff(trunc, torus, &mut rng);
                if eval.contains(&phi, &mut ws).unwrap() {
                    hits += 1;
                }
            }
            let mc = hits as f64 / total as f64;
            let stderr = (mc * (1.0 - mc) / total as f64).sqrt().max(1e-3);
            assert!(
                (mc - pref).abs() < 4.0 * stderr,
                "norm {norm:?} n={n}: quadrature {pref} vs mc {mc} ({stderr})"
            );
            assert!(pref > 0.0 && pref < 1.0);
        }
    }

    #[test]
    fn ball_probability_is_monotone_in_radius_and_symmetric_in_the_center() {
        let torus = TorusSpec::massless(1);
        let trunc = ModeTruncation::new(2);
        let z = FourierField::cosine(torus, trunc, [2, 0, 0], 0.12).unwrap();
        let mut z_neg = z.clone();
        z_neg.scale(-1.0);
        let mk = |center: &FourierField, r: f64| {
            BallSpec::plain(PlainNorm::Besov { alpha: -0.25 }, center.clone(), r).unwrap()
        };
        let p_small = gaussian_ball_prob_lowdim(trunc, &mk(&z, 0.2)).unwrap();
        let p_big = gaussian_ball_prob_lowdim(trunc, &mk(&z, 0.4)).unwrap();
        assert!(p_small < p_big);
        let p_neg = gaussian_ball_prob_lowdim(trunc, &mk(&z_neg, 0.2)).unwrap();
        assert!((p_small - p_neg).abs() < 5e-5, "{p_small} vs {p_neg}");
    }

    #[test]
    fn pair_moment_reproduces_single_mode_covariances() {
        let torus = TorusSpec::massless(1);
        let trunc = ModeTruncation::new(1);
        let f = FourierField::cosine(torus, ModeTruncation::new(1), [1, 0, 0], 1.0).unwrap();
        let got = wick_pair_moment(1, &f, &f, trunc).unwrap();
        assert!((got - 1.0 / (4.0 * PI * PI)).abs() < 1e-14);

        // The square field of a one-pair cutoff lives on modes {0, +-2}.
        let f2 = FourierField::cosine(torus, ModeTruncation::new(2), [2, 0, 0], 1.0).unwrap();
        let got = wick_pair_moment(2, &f2, &f2, trunc).unwrap();
        assert!((got - 1.0 / (8.0 * PI.powi(4))).abs() < 1e-15, "{got}");
        let cross = wick_pair_moment(2, &f, &f, trunc).unwrap();
        assert!(cross.abs() < 1e-16, "{cross}");

        // Zero-mode pairing: Var of the integrated square is 2 sum G_k^2.
        let mut ones = FourierField::zero(torus, ModeTruncation::new(1));
        ones.set_mean(1.0);
        let got = wick_pair_moment(2, &ones, &ones, trunc).unwrap();
        assert!((got - 1.0 / (4.0 * PI.powi(4))).abs() < 1e-15, "{got}");
    }

    #[test]
    fn pair_moment_agrees_with_a_direct_mode_sum_in_2d() {
        // p = 2, d = 2: (G^2)_k = sum_j G_j G_{k-j} over the cutoff box.
        let torus = TorusSpec::massless(2);
        let trunc = ModeTruncation::new(2);
        let f = FourierField::cosine(torus, ModeTruncation::new(1), [1, 1, 0], 1.0).unwrap();
        let got = wick_pair_moment(2, &f, &f, trunc).unwrap();
        let mut conv = 0.0;
        for jx in -2i32..=2 {
            for jy in -2i32..=2 {
                if (jx, jy) == (0, 0) || (jx, jy) == (1, 1) {
                    continue;
                }
                let (lx, ly) = (1 - jx, 1 - jy);
                if lx.abs() > 2 || ly.abs() > 2 || (lx, ly) == (0, 0) {
                    continue;
                }
                let gj = 1.0 / torus.lambda([jx, jy, 0]);
                let gl = 1.0 / torus.lambda([lx, ly, 0]);
                conv += gj * gl;
            }
        }
        // Both +-(1,1) receiver modes, coefficient 1/sqrt(2) each.
        let expect = 2.0 * conv;
        assert!(
            (got - expect).abs() < 1e-15 * expect.abs().max(1.0),
            "{got} vs {expect}"
        );
    }

    #[test]
    fn shifted_power_expansion_closes_to_rounding_error() {
        let torus = TorusSpec::massless(2);
        let trunc = ModeTruncation::new(3);
        let mut rng = stream_rng(9, 0);
        let phi = sample_gff(trunc, torus, &mut rng);
        let z = FourierField::cosine(torus, trunc, [1, 2, 0], 0.7).unwrap();
        for p in 1..=6 {
            let rel = binomial_direct_check(&phi, &z, 3, p).unwrap();
            assert!(rel < 1e-12, "p={p}: {rel}");
        }
    }
}

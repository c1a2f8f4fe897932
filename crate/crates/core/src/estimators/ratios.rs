//! Small-ball ratio estimators. Every estimator conditions one shared
//! sample stream on an origin ball and reweights it per center, so the two
//! (or four, or 2xN) masses being compared share their conditioning event
//! and the ball geometry cancels exactly.

use rayon::prelude::*;

use crate::action::{om_prediction, third_order_prediction, RatioPrediction};
use crate::balls::{BallEvaluator, BallKind, BallSpec, BallWorkspace};
use crate::error::{Error, Result};
use crate::estimators::engine::{run_conditioned, RowStats, RunOutput, SamplerOpts, WeightRow};
use crate::estimators::estimate::Estimate;
use crate::estimators::schedule::Schedule;
use crate::measures::{
    potential_of_field, sample_gff, stream_rng, GibbsModel, GibbsVariant, RngLayout,
};
use crate::norms::cm_norm_sq;
use crate::spectral::{FourierField, ModeTruncation, TorusSpec};

/// Minimum effective sample size, conditioned-sample count, and nonempty
/// chunk count below which an estimate is reported as degenerate.
const MIN_ESS: f64 = 8.0;
const MIN_RECORDED: u64 = 16;
const MIN_CHUNKS: usize = 4;
const MAX_GROUPS: usize = 16;

fn origin_spec(kind: &BallKind, torus: TorusSpec, radius: f64) -> Result<BallSpec> {
    BallSpec::from_parts(
        kind.clone(),
        FourierField::zero(torus, ModeTruncation::new(1)),
        radius,
    )
}

/// Log-linear combination sum_i mult_i log(mass_i) of row masses estimated
/// on one shared conditioned stream. The multipliers must sum to zero, so
/// the conditioned-sample counts and the ball probability cancel; the
/// standard error comes from recomputing the combination on contiguous
/// chunk groups.
fn combo_estimate(rows: &[&RowStats], mults: &[f64], out: &RunOutput) -> Estimate {
    debug_assert_eq!(rows.len(), mults.len());
    debug_assert!(mults.iter().sum::<f64>().abs() < 1e-12);
    let recorded = out.recorded;
    let ess = rows.iter().map(|r| r.ess()).fold(f64::INFINITY, f64::min);
    let nonempty: Vec<usize> = out
        .chunk_counts
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| (m > 0).then_some(i))
        .collect();
    let mut log_value = 0.0;
    for (row, &mult) in rows.iter().zip(mults) {
        log_value += mult * (row.l0 + row.sum_w.ln());
    }
    if out.mostly_failed()
        || !log_value.is_finite()
        || ess < MIN_ESS
        || recorded < MIN_RECORDED
        || nonempty.len() < MIN_CHUNKS
    {
        return Estimate::degenerate(recorded, ess);
    }
    let groups = MAX_GROUPS.min(nonempty.len());
    let mut combos = Vec::with_capacity(groups);
    for g in 0..groups {
        let lo = g * nonempty.len() / groups;
        let hi = (g + 1) * nonempty.len() / groups;
        let mut combo = 0.0;
        let mut ok = true;
        for (row, &mult) in rows.iter().zip(mults) {
            let s: f64 = nonempty[lo..hi].iter().map(|&c| row.batch[c].0).sum();
            if s > 0.0 && s.is_finite() {
                combo += mult * (row.l0 + s.ln());
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            combos.push(combo);
        }
    }
    if combos.len() < 2 {
        return Estimate::degenerate(recorded, ess);
    }
    let gmean = combos.iter().sum::<f64>() / combos.len() as f64;
    let var = combos.iter().map(|c| (c - gmean).powi(2)).sum::<f64>()
        / (combos.len() as f64 - 1.0);
    let log_stderr = (var / combos.len() as f64).sqrt();
    let value = log_value.exp();
    Estimate {
        value,
        stderr: value * log_stderr,
        log_value,
        log_stderr,
        n_samples: recorded,
        ess,
        degenerate: false,
    }
}

/// Ratio of the measure's mass on two balls of identical shape, estimated
/// by recentering: one stream conditioned on the origin ball, reweighted by
/// -(V(z + psi) - V(z)) - <z, psi> for each center, with the deterministic
/// part -V(z) - |z|^2/2 applied on top.
pub fn om_ratio_recentered(
    model: &GibbsModel,
    kind: &BallKind,
    radius: f64,
    z1: &FourierField,
    z2: &FourierField,
    opts: &SamplerOpts,
) -> Result<Estimate> {
    let spec = origin_spec(kind, model.torus, radius)?;
    let ball = BallEvaluator::new(spec, model.trunc.n)?;
    let rows = [
        WeightRow { model, center: z1 },
        WeightRow { model, center: z2 },
    ];
    let out = run_conditioned(&ball, &rows, opts, false)?;
    Ok(combo_estimate(
        &[&out.rows[0], &out.rows[1]],
        &[1.0, -1.0],
        &out,
    ))
}

#[derive(Clone, Debug)]
pub struct ScanRow {
    pub r: f64,
    pub estimate: Estimate,
}

/// The ratio at a decreasing family of radii with a fixed ball shape.
pub fn om_limit_scan(
    model: &GibbsModel,
    kind: &BallKind,
    z1: &FourierField,
    z2: &FourierField,
    radii: &[f64],
    opts_for: impl Fn(f64) -> SamplerOpts,
) -> Result<Vec<ScanRow>> {
    radii
        .iter()
        .map(|&r| {
            let estimate = om_ratio_recentered(model, kind, r, z1, z2, &opts_for(r))?;
            Ok(ScanRow { r, estimate })
        })
        .collect()
}

/// The prediction the scan should approach.
pub fn om_scan_prediction(
    model: &GibbsModel,
    z1: &FourierField,
    z2: &FourierField,
) -> Result<RatioPrediction> {
    om_prediction(z1, z2, model)
}

/// Probability that a free-field draw at the working cutoff lands in the
/// ball, by plain counting.
pub fn acceptance_rate(
    spec: &BallSpec,
    working_n: u32,
    count: u64,
    layout: RngLayout,
) -> Result<Estimate> {
    let ball = BallEvaluator::new(spec.clone(), working_n)?;
    let torus = spec.center.torus;
    let working = ModeTruncation::new(working_n);
    let chunks: Vec<u64> = (0..layout.chunks)
        .into_par_iter()
        .map(|c| {
            let quota = layout.chunk_len(count, c);
            let mut rng = stream_rng(layout.seed, c as u64);
            let mut ws = BallWorkspace::new();
            let mut hits = 0u64;
            for _ in 0..quota {
                let phi = sample_gff(working, torus, &mut rng);
                if ball
                    .contains(&phi, &mut ws)
                    .expect("validated layout cannot fail membership")
                {
                    hits += 1;
                }
            }
            hits
        })
        .collect();
    let hits: u64 = chunks.iter().sum();
    let p = hits as f64 / count as f64;
    let stderr = (p * (1.0 - p) / count as f64).sqrt();
    Ok(Estimate {
        value: p,
        stderr,
        log_value: p.ln(),
        log_stderr: if p > 0.0 { stderr / p } else { f64::INFINITY },
        n_samples: count,
        ess: hits as f64,
        degenerate: (hits as f64) < MIN_ESS,
    })
}

/// Draw `opts.count` samples from the free field conditioned on an origin
/// ball of the given shape.
pub fn collect_ball_samples(
    kind: &BallKind,
    torus: TorusSpec,
    radius: f64,
    working_n: u32,
    opts: &SamplerOpts,
) -> Result<Vec<FourierField>> {
    let spec = origin_spec(kind, torus, radius)?;
    let ball = BallEvaluator::new(spec, working_n)?;
    let out = run_conditioned(&ball, &[], opts, true)?;
    Ok(out.samples)
}

/// The sample-dependent part of the recentering exponent,
/// -(V(z + psi) - V(z)) - <z, psi> in the covariance pairing. On a ball of
/// radius r this is O(r) uniformly, which is what makes the small-ball
/// limit deterministic; the scan tests check exactly that.
pub fn recentering_residual(
    model: &GibbsModel,
    z: &FourierField,
    psi: &FourierField,
) -> Result<f64> {
    // Lift everything to a common box so a low-cutoff center works against
    // a finer model level.
    let lift = ModeTruncation::new(model.trunc.n.max(z.trunc.n).max(psi.trunc.n));
    let z = z.embed(lift)?;
    let sum = FourierField::linear_combination(&[(1.0, &z), (1.0, psi)])?;
    let v_sum = potential_of_field(model, &sum)?;
    let v_z = potential_of_field(model, &z)?;
    // Polarization: 2 <z, psi> = |z + psi|^2 - |z|^2 - |psi|^2.
    let dot = 0.5 * (cm_norm_sq(&sum) - cm_norm_sq(&z) - cm_norm_sq(psi));
    Ok(-(v_sum - v_z) - dot)
}

#[derive(Clone, Debug)]
pub struct LevelRatioScan {
    /// Per-cutoff ratio estimates against the origin ball.
    pub rows: Vec<(u32, Estimate)>,
    /// Fitted slope of the log ratio against log n.
    pub slope: f64,
    pub slope_stderr: f64,
    /// -scale |z|_{L2}^2 / 4: the counterterm-driven decay rate.
    pub predicted_slope: f64,
}

/// How the mass ratio mu_n(B(z)) / mu_n(B(0)) dies as the cutoff grows at
/// fixed radius, when the ball lacks the compensating counterterm
/// condition. All cutoffs share one conditioned stream over a level ball
/// with the full level set.
pub fn degeneracy_scan_3d(
    z: &FourierField,
    radius: f64,
    n_list: &[u32],
    counterterm_scale: f64,
    opts: &SamplerOpts,
) -> Result<LevelRatioScan> {
    degeneracy_scan_3d_with(0.1, z, radius, n_list, counterterm_scale, opts)
}

pub fn degeneracy_scan_3d_with(
    kappa: f64,
    z: &FourierField,
    radius: f64,
    n_list: &[u32],
    counterterm_scale: f64,
    opts: &SamplerOpts,
) -> Result<LevelRatioScan> {
    let torus = z.torus;
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter(
            "a slope needs at least two cutoffs".into(),
        ));
    }
    let working = *n_list.last().unwrap();
    if z.trunc.n > n_list[0] {
        return Err(Error::InvalidParameter(
            "the center must live below every scanned cutoff".into(),
        ));
    }
    let spec = BallSpec::enhanced_3d(
        kappa,
        n_list.to_vec(),
        FourierField::zero(torus, ModeTruncation::new(1)),
        radius,
    )?;
    let ball = BallEvaluator::new(spec, working)?;
    let trunc = ModeTruncation::new(working);
    let zero = FourierField::zero(torus, ModeTruncation::new(1));
    let models: Vec<GibbsModel> = n_list
        .iter()
        .map(|&n| {
            GibbsModel::new(
                torus,
                trunc,
                GibbsVariant::Phi4D3Level {
                    level: n,
                    counterterm_scale,
                },
            )
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(2 * models.len());
    for model in &models {
        rows.push(WeightRow { model, center: z });
        rows.push(WeightRow {
            model,
            center: &zero,
        });
    }
    let out = run_conditioned(&ball, &rows, opts, false)?;

    let per_n: Vec<(u32, Estimate)> = n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let est = combo_estimate(
                &[&out.rows[2 * i], &out.rows[2 * i + 1]],
                &[1.0, -1.0],
                &out,
            );
            (n, est)
        })
        .collect();

    // Least-squares slope in x = log n as a zero-sum row combination.
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let mut mults = Vec::with_capacity(2 * xs.len());
    let mut refs: Vec<&RowStats> = Vec::with_capacity(2 * xs.len());
    for (i, x) in xs.iter().enumerate() {
        let c = (x - xbar) / sxx;
        mults.push(c);
        mults.push(-c);
        refs.push(&out.rows[2 * i]);
        refs.push(&out.rows[2 * i + 1]);
    }
    let slope_est = combo_estimate(&refs, &mults, &out);
    Ok(LevelRatioScan {
        rows: per_n,
        slope: slope_est.log_value,
        slope_stderr: slope_est.log_stderr,
        predicted_slope: -0.25 * counterterm_scale * z.l2_norm_sq(),
    })
}

#[derive(Clone, Debug)]
pub struct JointRow {
    pub r: f64,
    pub n: u32,
    pub estimate: Estimate,
}

#[derive(Clone, Debug)]
pub struct JointScan {
    pub rows: Vec<JointRow>,
    pub predicted: RatioPrediction,
}

fn level_l2(f: &FourierField, n: u32) -> Result<f64> {
    if n >= f.trunc.n {
        Ok(f.l2_norm_sq())
    } else {
        Ok(crate::spectral::project(f, n)?.l2_norm_sq())
    }
}

/// The two-ball ratio along a coupled (r, n) schedule with the fully
/// compensated cube condition. Requires the centers to keep equal L2 masses
/// at every scheduled cutoff, so the log n inflation cancels between the
/// two balls and the limit is the bare action difference.
pub fn joint_limit_ratio(
    torus: TorusSpec,
    counterterm_scale: f64,
    kappa: f64,
    schedule: &Schedule,
    z1: &FourierField,
    z2: &FourierField,
    opts_for: impl Fn(f64, u32) -> SamplerOpts,
) -> Result<JointScan> {
    for &(_, n) in schedule.rows() {
        let gap = (n as f64).ln() * (level_l2(z1, n)? - level_l2(z2, n)?);
        if gap.abs() > 1e-8 * counterterm_scale.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "centers must carry equal level masses; cutoff {n} leaves {gap:e}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(schedule.rows().len());
    let mut predicted = None;
    for &(r, n) in schedule.rows() {
        let model = GibbsModel::new(
            torus,
            ModeTruncation::new(n),
            GibbsVariant::Phi4D3Level {
                level: n,
                counterterm_scale,
            },
        )?;
        if predicted.is_none() {
            predicted = Some(om_prediction(z1, z2, &model)?);
        }
        let kind = BallKind::FullyRenorm3d {
            kappa,
            n_set: vec![n],
            counterterm_scale,
        };
        let estimate = om_ratio_recentered(&model, &kind, r, z1, z2, &opts_for(r, n))?;
        rows.push(JointRow { r, n, estimate });
    }
    Ok(JointScan {
        rows,
        predicted: predicted.expect("schedules are nonempty"),
    })
}

#[derive(Clone, Debug)]
pub struct ThirdOrderScan {
    pub rows: Vec<JointRow>,
    pub predicted: RatioPrediction,
}

/// Third-difference ratio along a coupled schedule, on balls without the
/// compensated cube condition: the combination
/// 3 log mu(B(z1)) + log mu(B(y1)) - log mu(B(z2)) - 3 log mu(B(y2))
/// with y1 = 3 z1 - 2 z2 and y2 = 2 z1 - z2 cancels every quadratic
/// functional of the centers, so the divergent counterterm pieces drop out
/// on their own.
pub fn third_order_ratio(
    torus: TorusSpec,
    counterterm_scale: f64,
    kappa: f64,
    schedule: &Schedule,
    z1: &FourierField,
    z2: &FourierField,
    opts_for: impl Fn(f64, u32) -> SamplerOpts,
) -> Result<ThirdOrderScan> {
    let y1 = FourierField::linear_combination(&[(3.0, z1), (-2.0, z2)])?;
    let y2 = FourierField::linear_combination(&[(2.0, z1), (-1.0, z2)])?;
    let mults = [3.0, 1.0, -1.0, -3.0];
    for &(_, n) in schedule.rows() {
        // The quadratic masses must cancel identically at every cutoff;
        // anything else means the centers were not built as a third
        // difference.
        let masses = [
            level_l2(z1, n)?,
            level_l2(&y1, n)?,
            level_l2(z2, n)?,
            level_l2(&y2, n)?,
        ];
        let combo: f64 = mults.iter().zip(&masses).map(|(m, l)| m * l).sum();
        let magnitude: f64 = masses.iter().map(|l| l.abs()).sum::<f64>().max(1.0);
        if combo.abs() > 1e-10 * magnitude {
            return Err(Error::InvalidParameter(format!(
                "quadratic masses fail to cancel at cutoff {n}: {combo:e}"
            )));
        }
    }
    let predicted = third_order_prediction(z1, z2)?;
    let centers = [z1, &y1, z2, &y2];
    let mut out_rows = Vec::with_capacity(schedule.rows().len());
    for &(r, n) in schedule.rows() {
        let model = GibbsModel::new(
            torus,
            ModeTruncation::new(n),
            GibbsVariant::Phi4D3Level {
                level: n,
                counterterm_scale,
            },
        )?;
        let spec = BallSpec::enhanced_3d(
            kappa,
            vec![n],
            FourierField::zero(torus, ModeTruncation::new(1)),
            r,
        )?;
        let ball = BallEvaluator::new(spec, n)?;
        let rows: Vec<WeightRow> = centers
            .iter()
            .map(|&center| WeightRow {
                model: &model,
                center,
            })
            .collect();
        let run = run_conditioned(&ball, &rows, &opts_for(r, n), false)?;
        let refs: Vec<&RowStats> = run.rows.iter().collect();
        let estimate = combo_estimate(&refs, &mults, &run);
        out_rows.push(JointRow { r, n, estimate });
    }
    Ok(ThirdOrderScan {
        rows: out_rows,
        predicted,
    })
}

/// Brute-force ratio: weigh every free-field draw by e^{-V} and count the
/// two balls separately. Usable only at radii where both balls still catch
/// samples; kept as an independent check on the recentered estimator.
pub fn om_ratio_direct(
    model: &GibbsModel,
    kind: &BallKind,
    radius: f64,
    z1: &FourierField,
    z2: &FourierField,
    count: u64,
    layout: RngLayout,
) -> Result<Estimate> {
    let torus = model.torus;
    let working = model.trunc;
    let mk_eval = |z: &FourierField| -> Result<BallEvaluator> {
        let spec = BallSpec::from_parts(kind.clone(), z.embed(working)?, radius)?;
        BallEvaluator::new(spec, working.n)
    };
    let b1 = mk_eval(z1)?;
    let b2 = mk_eval(z2)?;
    let per_chunk: Vec<Result<(f64, f64, u64, u64)>> = (0..layout.chunks)
        .into_par_iter()
        .map(|c| {
            let quota = layout.chunk_len(count, c);
            let mut rng = stream_rng(layout.seed, c as u64);
            let mut ws = BallWorkspace::new();
            let (mut s1, mut s2) = (0.0f64, 0.0f64);
            let (mut m1, mut m2) = (0u64, 0u64);
            for _ in 0..quota {
                let phi = sample_gff(working, torus, &mut rng);
                let in1 = b1.contains(&phi, &mut ws)?;
                let in2 = b2.contains(&phi, &mut ws)?;
                if in1 || in2 {
                    let w = (-potential_of_field(model, &phi)?).exp();
                    if in1 {
                        s1 += w;
                        m1 += 1;
                    }
                    if in2 {
                        s2 += w;
                        m2 += 1;
                    }
                }
            }
            Ok((s1, s2, m1, m2))
        })
        .collect();
    let (mut tot1, mut tot2) = (0.0f64, 0.0f64);
    let (mut hits1, mut hits2) = (0u64, 0u64);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, r) in per_chunk.into_iter().enumerate() {
        let (s1, s2, m1, m2) = r?;
        let quota = layout.chunk_len(count, i as u32) as f64;
        if quota > 0.0 {
            xs.push(s1 / quota);
            ys.push(s2 / quota);
        }
        tot1 += s1;
        tot2 += s2;
        hits1 += m1;
        hits2 += m2;
    }
    let hits = hits1.min(hits2);
    if tot1 <= 0.0 || tot2 <= 0.0 || (hits as f64) < MIN_ESS {
        return Ok(Estimate::degenerate(hits, hits as f64));
    }
    let value = tot1 / tot2;
    // Delta method over chunk means.
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        vx += (x - xbar).powi(2);
        vy += (y - ybar).powi(2);
        cxy += (x - xbar) * (y - ybar);
    }
    let denom = n * (n - 1.0);
    let log_var = (vx / (xbar * xbar) + vy / (ybar * ybar) - 2.0 * cxy / (xbar * ybar)) / denom;
    let log_stderr = log_var.max(0.0).sqrt();
    Ok(Estimate {
        value,
        stderr: value * log_stderr,
        log_value: value.ln(),
        log_stderr,
        n_samples: hits1 + hits2,
        ess: hits as f64,
        degenerate: false,
    })
}

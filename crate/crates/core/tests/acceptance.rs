//! End-to-end checks of the small-ball machinery, one test per claim. Every
//! test prints a single PASS or FAIL line with its measured numbers so a log
//! scrape shows the whole picture at a glance; the asserted tolerances are
//! written out literally next to each check.
//!
//! The Monte Carlo tests really sample at full size, so the whole file takes
//! tens of minutes on one core. Run it alone with
//! `cargo test --test acceptance -- --nocapture`.

use std::time::Instant;

use omlab_core::*;

/// Print the one-line verdict and fail the test if `ok` is false.
fn verdict(ok: bool, name: &str, detail: &str) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn cosine(d: usize, n: u32, k: Mode, a: f64) -> FourierField {
    FourierField::cosine(TorusSpec::massless(d), ModeTruncation::new(n), k, a)
        .expect("in-box cosine center")
}

/// (gap, log stderr) rows of a radius scan against its predicted log ratio.
fn log_gaps(rows: &[ScanRow], log_pred: f64) -> Vec<(f64, f64)> {
    rows.iter()
        .map(|row| {
            (
                (row.estimate.log_value - log_pred).abs(),
                row.estimate.log_stderr,
            )
        })
        .collect()
}

/// Monotone-in-trend: no adjacent increase beyond one combined stderr, and
/// the last gap strictly below the first.
fn shrinking_trend(gaps: &[(f64, f64)]) -> bool {
    gaps.windows(2)
        .all(|w| w[1].0 <= w[0].0 + w[0].1.hypot(w[1].1))
        && gaps.last().unwrap().0 < gaps.first().unwrap().0
}

fn fmt_gaps(gaps: &[(f64, f64)]) -> String {
    let cells: Vec<String> = gaps
        .iter()
        .map(|(g, se)| format!("{g:.4}({se:.4})"))
        .collect();
    cells.join(" ")
}

#[test]
fn line_ratio_scan_approaches_the_action_gap() {
    let t0 = Instant::now();
    let torus = TorusSpec::massless(1);
    let trunc = ModeTruncation::new(32);
    let model = GibbsModel::new(torus, trunc, GibbsVariant::Phi4D1).unwrap();
    let z1 = cosine(1, 1, [1, 0, 0], 1.0);
    let z2 = cosine(1, 2, [2, 0, 0], 0.5);
    let kind = BallKind::Plain {
        norm: PlainNorm::Besov { alpha: 0.25 },
    };
    let radii = [0.4, 0.2, 0.1, 0.05];
    let rows = om_limit_scan(&model, &kind, &z1, &z2, &radii, |_| {
        SamplerOpts::chain(1_000_000, 3000, 4, RngLayout::with_chunks(101, 64).unwrap())
    })
    .unwrap();
    let pred = om_scan_prediction(&model, &z1, &z2).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let healthy = rows.iter().all(|row| !row.estimate.degenerate);
    let gaps = log_gaps(&rows, pred.log_ratio);
    let (final_gap, final_se) = *gaps.last().unwrap();
    let bar = (0.1 * pred.log_ratio.abs()).max(4.0 * final_se);
    let ok = healthy && shrinking_trend(&gaps) && final_gap < bar && elapsed < 600.0;
    verdict(
        ok,
        "line ratio scan approaches the action gap",
        &format!(
            "log-ratio target {:.4}; gaps(se) over r {:?}: {}; final {:.4} vs bar {:.4}; {:.0}s (limit 600)",
            pred.log_ratio,
            radii,
            fmt_gaps(&gaps),
            final_gap,
            bar,
            elapsed
        ),
    );
}

/// The recentering remainder for a quartic interaction on the plane:
/// (1/4) sum_{m=1..3} C(4,m) (-1)^m <:phi^m:, z^{4-m}> plus the covariance
/// pairing <z, phi>. On an origin ball of radius r this must be O(r)
/// uniformly, with a stable constant as r halves.
fn plane_remainder_sup(
    z: &FourierField,
    samples: &[FourierField],
    c_n: f64,
    grid: usize,
) -> f64 {
    let torus = z.torus;
    let z_vals = synthesize(z, grid).unwrap().values;
    let mut worst = 0.0f64;
    for psi in samples {
        let psi_vals = synthesize(psi, grid).unwrap().values;
        let vol = psi_vals.len() as f64;
        let mut poly = 0.0f64;
        for m in 1..=3u32 {
            let mut acc = 0.0f64;
            for (pv, zv) in psi_vals.iter().zip(&z_vals) {
                acc += hermite(m, *pv, c_n) * zv.powi(4 - m as i32);
            }
            let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
            poly += 0.25 * binomial(4, m) * sign * acc / vol;
        }
        let mut dot = 0.0f64;
        for (k, zc) in z.iter() {
            dot += torus.lambda(k) * (zc * psi.coeff(k).conj()).re;
        }
        worst = worst.max((poly + dot).abs());
    }
    worst
}

#[test]
fn plane_scan_remainder_stays_linear_in_the_radius() {
    let t0 = Instant::now();
    let torus = TorusSpec::massless(2);
    let n = 16u32;
    let trunc = ModeTruncation::new(n);
    let model = GibbsModel::new(
        torus,
        trunc,
        GibbsVariant::PPhi2 {
            coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
        },
    )
    .unwrap();
    // Both centers inside the unit ball of the gradient seminorm, the regime
    // the limit statement is pinned to. Lowest-frequency modes carry the
    // largest amplitudes under that cap, which maximizes the action gap the
    // scan has to resolve.
    let z1 = cosine(2, 1, [1, 0, 0], 0.159_154_943_091_895_35);
    let z2 = cosine(2, 1, [0, 1, 0], 0.079_577_471_545_947_67);
    assert!(h10_norm(&z1) <= 1.0 + 1e-12 && h10_norm(&z2) <= 1.0 + 1e-12);
    let kind = BallKind::EnhancedP {
        alpha: 0.3,
        degree: 4,
    };
    let radii = [1.6, 1.1, 0.8, 0.55];
    // Wick-power membership at this cutoff costs about a millisecond per
    // chain step, so the sample count is set by the wall clock; the 10
    // percent bar on a 0.375 action gap needs far less.
    let rows = om_limit_scan(&model, &kind, &z1, &z2, &radii, |_| {
        SamplerOpts::chain(40_000, 2000, 2, RngLayout::with_chunks(202, 16).unwrap())
    })
    .unwrap();
    let pred = om_scan_prediction(&model, &z1, &z2).unwrap();

    // The remainder check rides its own exactly-halving radius family; a few
    // hundred conditioned states suffice for a sup.
    let c_n = variance_constant(torus, n);
    let grid = next_fast_len((3 * n + 3 + 1) as usize);
    let k_radii = [2.2, 1.1, 0.55];
    let mut ks = Vec::new();
    for &r in &k_radii {
        let opts = SamplerOpts::chain(250, 2000, 4, RngLayout::with_chunks(212, 4).unwrap());
        let samples = collect_ball_samples(&kind, torus, r, n, &opts).unwrap();
        let sup1 = plane_remainder_sup(&z1, &samples, c_n, grid);
        let sup2 = plane_remainder_sup(&z2, &samples, c_n, grid);
        ks.push(sup1.max(sup2) / r);
    }
    let elapsed = t0.elapsed().as_secs_f64();

    let healthy = rows.iter().all(|row| !row.estimate.degenerate);
    let gaps = log_gaps(&rows, pred.log_ratio);
    let (final_gap, final_se) = *gaps.last().unwrap();
    let bar = (0.1 * pred.log_ratio.abs()).max(4.0 * final_se);
    let k_stable = ks
        .windows(2)
        .all(|w| w[1] / w[0] < 3.0 && w[0] / w[1] < 3.0);
    let ok = healthy
        && shrinking_trend(&gaps)
        && final_gap < bar
        && k_stable
        && elapsed < 1200.0;
    verdict(
        ok,
        "plane scan remainder stays linear in the radius",
        &format!(
            "log-ratio target {:.4}; gaps(se) over r {:?}: {}; final {:.4} vs bar {:.4}; sup/r per radius {:.3?} (stable within 3x); {:.0}s (limit 1200)",
            pred.log_ratio,
            radii,
            fmt_gaps(&gaps),
            final_gap,
            bar,
            ks,
            elapsed
        ),
    );
}

#[test]
fn uncompensated_level_scan_decays_strictly() {
    let t0 = Instant::now();
    let z = cosine(3, 1, [1, 0, 0], 0.5);
    let n_list = [2u32, 4, 8];
    let opts = SamplerOpts::chain(10_000, 500, 4, RngLayout::with_chunks(303, 8).unwrap());
    let scan = degeneracy_scan_3d_with(0.45, &z, 0.05, &n_list, 1.0, &opts).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let healthy = scan.rows.iter().all(|(_, est)| !est.degenerate);
    // Strict decay: each cutoff's log mass ratio sits below the previous one
    // by at least one combined stderr.
    let ordered = scan.rows.windows(2).all(|w| {
        let (_, a) = &w[0];
        let (_, b) = &w[1];
        b.log_value <= a.log_value - a.log_stderr.hypot(b.log_stderr)
    });
    let ok = healthy && ordered && elapsed < 1800.0;
    let rows: Vec<String> = scan
        .rows
        .iter()
        .map(|(n, est)| {
            if est.degenerate {
                format!("n={n} degenerate(ess {:.1})", est.ess)
            } else {
                format!("n={n} log {:.3}({:.3})", est.log_value, est.log_stderr)
            }
        })
        .collect();
    verdict(
        ok,
        "uncompensated level scan decays strictly",
        &format!(
            "{}; fitted slope {:.3}({:.3}) vs predicted {:.3}; {:.0}s (limit 1800)",
            rows.join(", "),
            scan.slope,
            scan.slope_stderr,
            scan.predicted_slope,
            elapsed
        ),
    );
}

#[test]
fn cube_pairing_moments_track_the_log_divergence() {
    let torus = TorusSpec::massless(3);
    let one = ModeTruncation::new(1);
    let psi = {
        let a = FourierField::cosine(torus, one, [1, 0, 0], 1.0).unwrap();
        let b = FourierField::cosine(torus, one, [0, 1, 1], 0.5).unwrap();
        FourierField::linear_combination(&[(1.0, &a), (1.0, &b)]).unwrap()
    };
    let count = 100_000u64;
    let mut lines = Vec::new();
    let mut oracle_vals = Vec::new();
    let mut mc_ok = true;
    for n in [2u32, 4, 8] {
        let trunc = ModeTruncation::new(n);
        let c_n = variance_constant(torus, n);
        // One alias-free grid: cubes of a cutoff-n field against a cutoff-1
        // test field are trig polynomials of degree 3n + 1.
        let m = next_fast_len((3 * n + 2) as usize);
        let psi_vals = synthesize(&psi, m).unwrap().values;
        let vol = psi_vals.len() as f64;
        let mut rng = stream_rng(404, u64::from(n));
        let (mut s2, mut s4) = (0.0f64, 0.0f64);
        for _ in 0..count {
            let phi = sample_gff(trunc, torus, &mut rng);
            let vals = synthesize(&phi, m).unwrap().values;
            let mut v = 0.0f64;
            for (pv, tv) in vals.iter().zip(&psi_vals) {
                v += hermite(3, *pv, c_n) * tv;
            }
            v /= vol;
            s2 += v * v;
            s4 += v.powi(4);
        }
        let m2 = s2 / count as f64;
        let m4 = s4 / count as f64;
        let se = ((m4 - m2 * m2).max(0.0) / count as f64).sqrt();
        let exact = wick_pair_moment(3, &psi, &psi, trunc).unwrap();
        mc_ok &= (m2 - exact).abs() <= 3.0 * se;
        lines.push(format!(
            "n={n} mc {m2:.5}({se:.5}) exact {exact:.5}"
        ));
        oracle_vals.push(exact);
    }
    // The exact moment grows with the cutoff, and along n = 2, 4, 8 the two
    // increments match the equal log n steps within 30 percent.
    let growing = oracle_vals.windows(2).all(|w| w[1] > w[0]);
    let inc_ratio = (oracle_vals[2] - oracle_vals[1]) / (oracle_vals[1] - oracle_vals[0]);
    let log_like = (0.7..=1.3).contains(&inc_ratio);
    let ok = mc_ok && growing && log_like;
    verdict(
        ok,
        "cube pairing moments track the log divergence",
        &format!(
            "{}; increment ratio {:.3} in [0.7, 1.3]",
            lines.join("; "),
            inc_ratio
        ),
    );
}

#[test]
fn shifted_power_expansion_is_exact_on_random_fields() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0u32;
    for d in 1..=3usize {
        let torus = TorusSpec::massless(d);
        let mut rng = stream_rng(505, d as u64);
        let triples = if d == 1 { 34 } else { 33 };
        for t in 0..triples {
            let p = 1 + (t % 6);
            let n = 2 + (t % 3);
            let trunc = ModeTruncation::new(n);
            let phi = sample_gff(trunc, torus, &mut rng);
            let mut z = sample_gff(trunc, torus, &mut rng);
            z.scale(0.5);
            let defect = binomial_direct_check(&phi, &z, n, p).unwrap();
            worst = worst.max(defect);
            checked += 1;
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = checked == 100 && worst <= 1e-10 && elapsed < 60.0;
    verdict(
        ok,
        "shifted power expansion is exact on random fields",
        &format!(
            "{checked} random (field, shift, cutoff) triples over d = 1..3, powers 1..6; worst relative defect {worst:.2e} (bar 1e-10); {elapsed:.1}s (limit 60)"
        ),
    );
}

#[test]
fn power_pairing_variances_match_the_kernel_formula() {
    let t0 = Instant::now();
    let count = 100_000u64;
    let mut lines = Vec::new();
    let mut ok = true;
    for d in [1usize, 2] {
        let torus = TorusSpec::massless(d);
        let one = ModeTruncation::new(1);
        let f = {
            let kc = if d == 1 { [1, 0, 0] } else { [1, 0, 0] };
            let ks = if d == 1 { [1, 0, 0] } else { [0, 1, 0] };
            let a = FourierField::cosine(torus, one, kc, 0.8).unwrap();
            let b = FourierField::sine(torus, one, ks, 0.4).unwrap();
            FourierField::linear_combination(&[(1.0, &a), (1.0, &b)]).unwrap()
        };
        for nn in [4u32, 8] {
            let trunc = ModeTruncation::new(nn);
            let c_n = variance_constant(torus, nn);
            for p in 1..=3u32 {
                // Grid must resolve the degree-(p n + 1) product AND the
                // sampled field's own dense side.
                let m = next_fast_len((p * nn + 2).max(2 * nn + 1) as usize);
                let f_vals = synthesize(&f, m).unwrap().values;
                let vol = f_vals.len() as f64;
                let mut rng = stream_rng(606, (d as u64) << 8 | u64::from(nn) << 4 | u64::from(p));
                let (mut s2, mut s4) = (0.0f64, 0.0f64);
                for _ in 0..count {
                    let phi = sample_gff(trunc, torus, &mut rng);
                    let vals = synthesize(&phi, m).unwrap().values;
                    let mut v = 0.0f64;
                    for (pv, fv) in vals.iter().zip(&f_vals) {
                        v += hermite(p, *pv, c_n) * fv;
                    }
                    v /= vol;
                    s2 += v * v;
                    s4 += v.powi(4);
                }
                let var = s2 / count as f64;
                let m4 = s4 / count as f64;
                let se = ((m4 - var * var).max(0.0) / count as f64).sqrt();
                let exact = wick_pair_moment(p, &f, &f, trunc).unwrap();
                let pass = (var - exact).abs() <= 3.0 * se;
                ok &= pass;
                if !pass {
                    lines.push(format!(
                        "d={d} n={nn} p={p}: mc {var:.6}({se:.6}) vs exact {exact:.6}"
                    ));
                }
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < 300.0;
    let detail = if lines.is_empty() {
        format!(
            "12 (dimension, cutoff, power) combinations within 3 stderr of p! <f, G^p f>; {elapsed:.0}s (limit 300)"
        )
    } else {
        format!("outliers: {}; {elapsed:.0}s (limit 300)", lines.join("; "))
    };
    verdict(ok, "power pairing variances match the kernel formula", &detail);
}

struct AgreementScenario {
    label: &'static str,
    variant: GibbsVariant,
    d: usize,
    n: u32,
    kind: BallKind,
    radius: f64,
    z1: FourierField,
    z2: FourierField,
}

fn agreement_scenarios() -> Vec<AgreementScenario> {
    vec![
        AgreementScenario {
            label: "d1 free besov",
            variant: GibbsVariant::Gff,
            d: 1,
            n: 6,
            kind: BallKind::Plain {
                norm: PlainNorm::Besov { alpha: 0.25 },
            },
            radius: 0.8,
            z1: cosine(1, 1, [1, 0, 0], 0.3),
            z2: cosine(1, 2, [2, 0, 0], 0.2),
        },
        AgreementScenario {
            label: "d1 quartic sup",
            variant: GibbsVariant::Phi4D1,
            d: 1,
            n: 6,
            kind: BallKind::Plain {
                norm: PlainNorm::Sup,
            },
            radius: 1.0,
            z1: cosine(1, 1, [1, 0, 0], 0.25),
            z2: {
                let a = cosine(1, 3, [1, 0, 0], 0.15);
                let b = cosine(1, 3, [3, 0, 0], 0.1);
                FourierField::linear_combination(&[(1.0, &a), (1.0, &b)]).unwrap()
            },
        },
        AgreementScenario {
            label: "d1 free gradient ball",
            variant: GibbsVariant::Gff,
            d: 1,
            n: 2,
            kind: BallKind::Plain {
                norm: PlainNorm::SobolevH1,
            },
            radius: 1.3,
            z1: cosine(1, 1, [1, 0, 0], 0.2),
            z2: cosine(1, 2, [2, 0, 0], 0.15),
        },
        AgreementScenario {
            label: "d2 quartic besov",
            variant: GibbsVariant::PPhi2 {
                coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.25],
            },
            d: 2,
            n: 4,
            kind: BallKind::Plain {
                norm: PlainNorm::Besov { alpha: -0.3 },
            },
            radius: 0.6,
            z1: cosine(2, 1, [1, 0, 0], 0.2),
            z2: cosine(2, 1, [1, 1, 0], 0.15),
        },
        AgreementScenario {
            label: "d2 sextic sup",
            variant: GibbsVariant::PPhi2 {
                coeffs: vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.05],
            },
            d: 2,
            n: 4,
            kind: BallKind::Plain {
                norm: PlainNorm::Sup,
            },
            radius: 1.6,
            z1: cosine(2, 1, [1, 0, 0], 0.25),
            z2: cosine(2, 1, [0, 1, 0], 0.2),
        },
    ]
}

#[test]
fn shift_weights_are_unbiased_and_match_direct_counting() {
    let t0 = Instant::now();
    let mut worst_bias = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut failures = Vec::new();
    for (i, sc) in agreement_scenarios().into_iter().enumerate() {
        let torus = TorusSpec::massless(sc.d);
        let trunc = ModeTruncation::new(sc.n);
        let model = GibbsModel::new(torus, trunc, sc.variant.clone()).unwrap();

        // The shifted-measure density integrates to one against the free
        // field; 20k draws pin the mean to a few stderr.
        let shift = CameronMartinShift::new(sc.z1.embed(trunc).unwrap()).unwrap();
        let mut rng = stream_rng(707, i as u64);
        let draws = 20_000u64;
        let (mut sw, mut sw2) = (0.0f64, 0.0f64);
        for _ in 0..draws {
            let phi = sample_gff(trunc, torus, &mut rng);
            let w = cm_log_weight(&shift, &phi).exp();
            sw += w;
            sw2 += w * w;
        }
        let mean = sw / draws as f64;
        let var = (sw2 / draws as f64 - mean * mean).max(0.0);
        let se = (var / draws as f64).sqrt();
        let bias = (mean - 1.0).abs();
        if bias > 3.0 * se {
            failures.push(format!("{}: E[w] = {mean:.4}({se:.4})", sc.label));
        }
        worst_bias = worst_bias.max(bias / se);

        // The recentered estimator against brute-force counting of the same
        // two balls.
        let direct = om_ratio_direct(
            &model,
            &sc.kind,
            sc.radius,
            &sc.z1,
            &sc.z2,
            150_000,
            RngLayout::with_chunks(717 + i as u64, 32).unwrap(),
        )
        .unwrap();
        let recentered = om_ratio_recentered(
            &model,
            &sc.kind,
            sc.radius,
            &sc.z1,
            &sc.z2,
            &SamplerOpts::chain(
                20_000,
                1000,
                4,
                RngLayout::with_chunks(727 + i as u64, 16).unwrap(),
            ),
        )
        .unwrap();
        let joint = direct.log_stderr.hypot(recentered.log_stderr);
        let gap = (direct.log_value - recentered.log_value).abs();
        if direct.degenerate || recentered.degenerate || gap > 3.0 * joint {
            failures.push(format!(
                "{}: direct log {:.4}({:.4}) vs recentered {:.4}({:.4})",
                sc.label,
                direct.log_value,
                direct.log_stderr,
                recentered.log_value,
                recentered.log_stderr
            ));
        }
        worst_gap = worst_gap.max(gap / joint);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 300.0;
    let detail = if failures.is_empty() {
        format!(
            "5 scenarios: worst |E[w] - 1| at {worst_bias:.2} stderr (bar 3), worst direct-vs-recentered split at {worst_gap:.2} joint stderr (bar 3); {elapsed:.0}s (limit 300)"
        )
    } else {
        format!("{}; {elapsed:.0}s (limit 300)", failures.join("; "))
    };
    verdict(
        ok,
        "shift weights are unbiased and match direct counting",
        &detail,
    );
}

#[test]
fn compensated_schedule_approaches_the_action_gap() {
    let t0 = Instant::now();
    let torus = TorusSpec::massless(3);
    let z1 = cosine(3, 1, [1, 0, 0], 0.4);
    let z2 = cosine(3, 1, [1, 1, 0], 0.4);
    let schedule = Schedule::default_sqrt_inv(&[0.4, 0.2, 0.1]).unwrap();
    let scan = joint_limit_ratio(torus, 1.0, 0.45, &schedule, &z1, &z2, |_, n| {
        SamplerOpts::chain(
            10_000,
            600,
            4,
            RngLayout::with_chunks(808 + u64::from(n), 8).unwrap(),
        )
    })
    .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let healthy = scan.rows.iter().all(|row| !row.estimate.degenerate);
    let gaps: Vec<(f64, f64)> = scan
        .rows
        .iter()
        .map(|row| {
            (
                (row.estimate.log_value - scan.predicted.log_ratio).abs(),
                row.estimate.log_stderr,
            )
        })
        .collect();
    let (final_gap, final_se) = *gaps.last().unwrap();
    let bar = (0.15 * scan.predicted.log_ratio.abs()).max(4.0 * final_se);
    let ok = healthy && shrinking_trend(&gaps) && final_gap < bar;
    let rows: Vec<String> = scan
        .rows
        .iter()
        .zip(&gaps)
        .map(|(row, (g, se))| {
            if row.estimate.degenerate {
                format!("(r={}, n={}) degenerate(ess {:.1})", row.r, row.n, row.estimate.ess)
            } else {
                format!("(r={}, n={}) gap {g:.4}({se:.4})", row.r, row.n)
            }
        })
        .collect();
    verdict(
        ok,
        "compensated schedule approaches the action gap",
        &format!(
            "log-ratio target {:.4}; {}; final {:.4} vs bar {:.4}; {:.0}s",
            scan.predicted.log_ratio,
            rows.join(", "),
            final_gap,
            bar,
            elapsed
        ),
    );
}

#[test]
fn third_difference_kills_every_quadratic_term() {
    let t0 = Instant::now();
    let torus = TorusSpec::massless(3);
    let z1 = cosine(3, 1, [1, 0, 0], 0.3);
    let z2 = cosine(3, 1, [1, 1, 0], 0.3);
    let y1 = FourierField::linear_combination(&[(3.0, &z1), (-2.0, &z2)]).unwrap();
    let y2 = FourierField::linear_combination(&[(2.0, &z1), (-1.0, &z2)]).unwrap();
    let mults = [3.0f64, 1.0, -1.0, -3.0];

    // Clause 1: the level potentials carry cutoff-dependent counterterms,
    // but the four-center combination of them is constant in the cutoff.
    let combo_at = |n: u32| -> f64 {
        let model = GibbsModel::new(
            torus,
            ModeTruncation::new(n),
            GibbsVariant::Phi4D3Level {
                level: n,
                counterterm_scale: 1.0,
            },
        )
        .unwrap();
        let v = |f: &FourierField| {
            let lifted = f.embed(ModeTruncation::new(n)).unwrap();
            potential_of_field(&model, &lifted).unwrap()
        };
        mults
            .iter()
            .zip([&z1, &y1, &z2, &y2])
            .map(|(m, f)| m * v(f))
            .sum()
    };
    let base = combo_at(2);
    let mut ct_defect = 0.0f64;
    for n in [3u32, 4, 6, 8] {
        ct_defect = ct_defect.max((combo_at(n) - base).abs() / base.abs().max(1.0));
    }

    // Clause 2: on random center pairs the same multipliers annihilate
    // every quadratic functional exactly.
    let mut quad_defect = 0.0f64;
    let mut rng = stream_rng(909, 0);
    for t in 0..100u32 {
        let trunc = ModeTruncation::new(1 + (t % 3));
        let a = sample_gff(trunc, torus, &mut rng);
        let b = sample_gff(trunc, torus, &mut rng);
        let g = sample_gff(trunc, torus, &mut rng);
        let ya = FourierField::linear_combination(&[(3.0, &a), (-2.0, &b)]).unwrap();
        let yb = FourierField::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        let fields = [&a, &ya, &b, &yb];
        let quads: [&dyn Fn(&FourierField) -> f64; 3] = [
            &|f| action_phi4(f).gradient_part,
            &|f| f.l2_norm_sq(),
            &|f| pairing(f, &g).unwrap().powi(2),
        ];
        for q in quads {
            let (mut combo, mut scale) = (0.0f64, 0.0f64);
            for (m, f) in mults.iter().zip(fields) {
                let v = q(f);
                combo += m * v;
                scale += v.abs();
            }
            quad_defect = quad_defect.max(combo.abs() / scale.max(1.0));
        }
    }

    // Clause 3: the sampled four-ball combination along the coupled
    // schedule, against the surviving cubic prediction.
    let schedule = Schedule::default_sqrt_inv(&[0.4, 0.2, 0.1]).unwrap();
    let scan = third_order_ratio(torus, 1.0, 0.45, &schedule, &z1, &z2, |_, n| {
        SamplerOpts::chain(
            10_000,
            600,
            4,
            RngLayout::with_chunks(919 + u64::from(n), 8).unwrap(),
        )
    })
    .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let healthy = scan.rows.iter().all(|row| !row.estimate.degenerate);
    let gaps: Vec<(f64, f64)> = scan
        .rows
        .iter()
        .map(|row| {
            (
                (row.estimate.log_value - scan.predicted.log_ratio).abs(),
                row.estimate.log_stderr,
            )
        })
        .collect();
    let (final_gap, final_se) = *gaps.last().unwrap();
    let bar = (0.2 * scan.predicted.log_ratio.abs()).max(4.0 * final_se);
    let mc_ok = healthy && shrinking_trend(&gaps) && final_gap < bar;
    let ok = ct_defect <= 1e-10 && quad_defect <= 1e-10 && mc_ok;
    let rows: Vec<String> = scan
        .rows
        .iter()
        .zip(&gaps)
        .map(|(row, (g, se))| {
            if row.estimate.degenerate {
                format!("(r={}, n={}) degenerate(ess {:.1})", row.r, row.n, row.estimate.ess)
            } else {
                format!("(r={}, n={}) gap {g:.4}({se:.4})", row.r, row.n)
            }
        })
        .collect();
    verdict(
        ok,
        "third difference kills every quadratic term",
        &format!(
            "counterterm drift {ct_defect:.2e} (bar 1e-10); quadratic residue {quad_defect:.2e} over 100 random pairs (bar 1e-10); log-ratio target {:.4}; {}; final {:.4} vs bar {:.4}; {:.0}s",
            scan.predicted.log_ratio,
            rows.join(", "),
            final_gap,
            bar,
            elapsed
        ),
    );
}

#[test]
fn replicate_spread_matches_the_reported_stderr() {
    let t0 = Instant::now();
    let torus = TorusSpec::massless(1);
    let trunc = ModeTruncation::new(32);
    let model = GibbsModel::new(torus, trunc, GibbsVariant::Phi4D1).unwrap();
    let z1 = cosine(1, 1, [1, 0, 0], 1.0);
    let z2 = cosine(1, 2, [2, 0, 0], 0.5);
    let kind = BallKind::Plain {
        norm: PlainNorm::Besov { alpha: 0.25 },
    };
    let mut logs = Vec::new();
    let mut ses = Vec::new();
    for s in 0..20u64 {
        let est = om_ratio_recentered(
            &model,
            &kind,
            0.05,
            &z1,
            &z2,
            &SamplerOpts::chain(1_000_000, 3000, 4, RngLayout::with_chunks(1000 + s, 64).unwrap()),
        )
        .unwrap();
        assert!(!est.degenerate, "replicate {s} degenerate");
        logs.push(est.log_value);
        ses.push(est.log_stderr);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let spread = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        / (logs.len() as f64 - 1.0))
        .sqrt();
    let mean_se = ses.iter().sum::<f64>() / ses.len() as f64;
    let ratio = spread / mean_se;
    let ok = (0.5..=2.0).contains(&ratio);
    verdict(
        ok,
        "replicate spread matches the reported stderr",
        &format!(
            "20 seeds: log-estimate spread {spread:.5}, mean reported stderr {mean_se:.5}, ratio {ratio:.2} in [0.5, 2.0]; {elapsed:.0}s"
        ),
    );
}

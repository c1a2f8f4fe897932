//! Sampling engines for ball-conditioned expectations. Both engines work in
//! centered coordinates: the state is psi = phi - z at the working cutoff,
//! the conditioning event is an origin ball, and each requested row attaches
//! the exponential reweighting for one (model, center) pair to the shared
//! conditioned stream.
//!
//! Work is split into independent chunks with per-chunk RNG streams and
//! merged in chunk order, so results are identical for any thread count.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::balls::{BallEvaluator, BallWorkspace};
use crate::error::{Error, Result};
use crate::fft::{fft_nd, next_fast_len};
use crate::measures::{
    potential_of_field, potential_on_grid, sample_gff, stream_rng, GibbsModel, RngLayout,
};
use crate::norms::cm_norm_sq;
use crate::spectral::{FourierField, GridField, ModeTruncation};
use crate::wick::variance_constant;

/// How conditioned samples are produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    /// Independent free-field draws filtered by membership. Unbiased and
    /// simple, but useless once the ball probability is tiny.
    Rejection,
    /// Preconditioned Crank-Nicolson chain restricted to the ball: the
    /// proposal sqrt(1 - beta^2) psi + beta xi preserves the free field, so
    /// accepting exactly the in-ball proposals targets the conditioned law.
    /// Each chunk runs its own chain from an annealed start (the radius is
    /// inflated until a fresh draw fits, then walked back down during
    /// burn-in). `beta` is adapted during burn-in and frozen afterwards.
    BallChain {
        burn_in: u32,
        thin: u32,
        beta: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct SamplerOpts {
    pub engine: Engine,
    /// Rejection: free-field proposals to draw. Chain: states to record
    /// after thinning, summed over chunks.
    pub count: u64,
    pub layout: RngLayout,
}

impl SamplerOpts {
    pub fn rejection(count: u64, layout: RngLayout) -> Self {
        SamplerOpts {
            engine: Engine::Rejection,
            count,
            layout,
        }
    }

    pub fn chain(count: u64, burn_in: u32, thin: u32, layout: RngLayout) -> Self {
        SamplerOpts {
            engine: Engine::BallChain {
                burn_in,
                thin,
                beta: None,
            },
            count,
            layout,
        }
    }
}

/// One reweighting request: which measure, recentered where.
pub(crate) struct WeightRow<'a> {
    pub model: &'a GibbsModel,
    pub center: &'a FourierField,
}

/// Accumulated weight sums for one row.
pub(crate) struct RowStats {
    /// Per chunk: (sum of e^res, sum of e^{2 res}) over recorded samples.
    pub batch: Vec<(f64, f64)>,
    pub sum_w: f64,
    pub sum_w2: f64,
    /// Deterministic part of the log mass: -V(z) - 0.5 |z|^2 in the
    /// covariance norm. The full log mass estimate is
    /// l0 + log mean of e^res.
    pub l0: f64,
}

impl RowStats {
    /// Effective number of exponential-weight samples.
    pub fn ess(&self) -> f64 {
        if self.sum_w2 > 0.0 {
            self.sum_w * self.sum_w / self.sum_w2
        } else {
            0.0
        }
    }
}

pub(crate) struct RunOutput {
    pub rows: Vec<RowStats>,
    /// Recorded (conditioned) samples per chunk.
    pub chunk_counts: Vec<u64>,
    pub recorded: u64,
    /// Chain chunks that never annealed down to the target radius.
    pub failed_chunks: u32,
    pub samples: Vec<FourierField>,
}

impl RunOutput {
    /// True when so many chains failed to reach the target radius that the
    /// surviving ones cannot be trusted to represent the conditioned law.
    pub fn mostly_failed(&self) -> bool {
        self.failed_chunks as usize * 2 > self.chunk_counts.len()
    }
}

struct LevelGrid {
    level: u32,
    m: usize,
    glen: usize,
    /// (working-box index, grid bin) per level-box mode.
    scatter: Vec<(u32, u32)>,
}

struct PreparedRow {
    level_slot: Option<usize>,
    c_level: f64,
    v_center: f64,
    l0: f64,
    center_vals: Vec<f64>,
    /// (working-box index, lambda z_k) over the center's mode support,
    /// both pair members present.
    cm: Vec<(u32, Complex64)>,
}

fn fit_cutoff(f: &FourierField, n: u32) -> Result<FourierField> {
    if n <= f.trunc.n {
        crate::spectral::project(f, n)
    } else {
        f.embed(ModeTruncation::new(n))
    }
}

struct Prepared {
    levels: Vec<LevelGrid>,
    rows: Vec<PreparedRow>,
}

fn prepare(ball: &BallEvaluator, rows: &[WeightRow]) -> Result<Prepared> {
    let working = ball.working();
    let torus = ball.torus();
    let d = torus.d;
    let mut levels: Vec<LevelGrid> = Vec::new();
    let mut prepared = Vec::with_capacity(rows.len());
    for row in rows {
        if row.model.torus != torus {
            return Err(Error::Mismatch("row model torus vs ball torus".into()));
        }
        if row.model.trunc != working {
            return Err(Error::Mismatch(format!(
                "row model cutoff {} vs working cutoff {}",
                row.model.trunc.n, working.n
            )));
        }
        if row.center.torus != torus {
            return Err(Error::Mismatch("row center torus vs ball torus".into()));
        }
        if row.center.mean() != 0.0 {
            return Err(Error::InvalidParameter("centers are mean-zero".into()));
        }
        let z_work = row.center.embed(working)?;
        let degree = row.model.degree();
        let level = row.model.level();
        let (level_slot, c_level, center_vals) = if degree == 0 {
            (None, 0.0, Vec::new())
        } else {
            let m = next_fast_len(
                ((degree * level + 1) as usize).max(ModeTruncation::new(level).side()),
            );
            let slot = match levels.iter().position(|lg| lg.level == level && lg.m == m) {
                Some(i) => i,
                None => {
                    let level_box = ModeTruncation::new(level);
                    let mut scatter = Vec::with_capacity(level_box.len(d));
                    for idx in 0..level_box.len(d) {
                        let k = level_box.mode_at(d, idx);
                        scatter.push((
                            working.index_of(d, k) as u32,
                            grid_bin(k, m, d) as u32,
                        ));
                    }
                    levels.push(LevelGrid {
                        level,
                        m,
                        glen: m.pow(d as u32),
                        scatter,
                    });
                    levels.len() - 1
                }
            };
            let z_level = fit_cutoff(row.center, level)?;
            let vals = crate::spectral::synthesize(&z_level, m)?.values;
            (Some(slot), variance_constant(torus, level), vals)
        };
        let v_center = potential_of_field(row.model, &z_work)?;
        let l0 = -v_center - 0.5 * cm_norm_sq(&z_work);
        // iter() visits both members of each Hermitian pair, so each entry
        // carries lambda z_k and the pair sums to the full covariance dot.
        let mut cm = Vec::new();
        for (k, c) in z_work.iter() {
            cm.push((working.index_of(d, k) as u32, torus.lambda(k) * c));
        }
        prepared.push(PreparedRow {
            level_slot,
            c_level,
            v_center,
            l0,
            center_vals,
            cm,
        });
    }
    Ok(Prepared { levels, rows: prepared })
}

fn grid_bin(k: crate::spectral::Mode, m: usize, d: usize) -> usize {
    let mut idx = 0usize;
    let mut stride = 1usize;
    for i in 0..d {
        idx += k[i].rem_euclid(m as i32) as usize * stride;
        stride *= m;
    }
    idx
}

struct ChunkOut {
    per_row: Vec<(f64, f64)>,
    recorded: u64,
    failed: bool,
    samples: Vec<Vec<Complex64>>,
}

struct ChunkCtx<'a> {
    ball: &'a BallEvaluator,
    prep: &'a Prepared,
    rows: &'a [WeightRow<'a>],
    opts: &'a SamplerOpts,
    collect: bool,
}

/// Scratch for the per-sample reweighting.
struct WeightScratch {
    cbuf: Vec<Complex64>,
    level_vals: Vec<Vec<f64>>,
    grid: Vec<GridField>,
}

impl WeightScratch {
    fn new(ctx: &ChunkCtx) -> Self {
        let torus = ctx.ball.torus();
        WeightScratch {
            cbuf: Vec::new(),
            level_vals: ctx.prep.levels.iter().map(|lg| vec![0.0; lg.glen]).collect(),
            grid: ctx
                .prep
                .levels
                .iter()
                .map(|lg| GridField {
                    torus,
                    m: lg.m,
                    values: vec![0.0; lg.glen],
                })
                .collect(),
        }
    }

    /// res per row for the state psi: -(V(z + psi) - V(z)) - <z, psi>_cov.
    fn weigh(&mut self, ctx: &ChunkCtx, psi: &[Complex64], out: &mut [f64]) {
        let d = ctx.ball.torus().d;
        for (slot, lg) in ctx.prep.levels.iter().enumerate() {
            if self.cbuf.len() < lg.glen {
                self.cbuf.resize(lg.glen, Complex64::default());
            }
            for v in &mut self.cbuf[..lg.glen] {
                *v = Complex64::default();
            }
            for &(src, dst) in &lg.scatter {
                self.cbuf[dst as usize] = psi[src as usize];
            }
            fft_nd(&mut self.cbuf[..lg.glen], lg.m, d, true);
            for i in 0..lg.glen {
                self.level_vals[slot][i] = self.cbuf[i].re;
            }
        }
        for (i, (row, prep)) in ctx.rows.iter().zip(&ctx.prep.rows).enumerate() {
            let mut dot = 0.0f64;
            for &(idx, w) in &prep.cm {
                let p = psi[idx as usize];
                dot += w.re * p.re + w.im * p.im;
            }
            let v = match prep.level_slot {
                None => 0.0,
                Some(slot) => {
                    let lg = &ctx.prep.levels[slot];
                    let gf = &mut self.grid[slot];
                    for j in 0..lg.glen {
                        gf.values[j] = self.level_vals[slot][j] + prep.center_vals[j];
                    }
                    potential_on_grid(row.model, gf, prep.c_level)
                }
            };
            let res = -(v - prep.v_center) - dot;
            debug_assert!(res.abs() < 200.0, "runaway reweighting exponent {res}");
            out[i] = res;
        }
    }
}

fn record_state(
    ctx: &ChunkCtx,
    scratch: &mut WeightScratch,
    psi: &[Complex64],
    res: &mut [f64],
    out: &mut ChunkOut,
) {
    scratch.weigh(ctx, psi, res);
    for (i, r) in res.iter().enumerate() {
        let w = r.exp();
        out.per_row[i].0 += w;
        out.per_row[i].1 += w * w;
    }
    out.recorded += 1;
    if ctx.collect {
        out.samples.push(psi.to_vec());
    }
}

fn run_chunk(ctx: &ChunkCtx, chunk: u32) -> ChunkOut {
    let nrows = ctx.rows.len();
    let mut out = ChunkOut {
        per_row: vec![(0.0, 0.0); nrows],
        recorded: 0,
        failed: false,
        samples: Vec::new(),
    };
    let quota = ctx.opts.layout.chunk_len(ctx.opts.count, chunk);
    if quota == 0 {
        return out;
    }
    let working = ctx.ball.working();
    let torus = ctx.ball.torus();
    let mut rng = stream_rng(ctx.opts.layout.seed, chunk as u64);
    let mut ws = BallWorkspace::new();
    let mut scratch = WeightScratch::new(ctx);
    let mut res = vec![0.0f64; nrows];

    match ctx.opts.engine {
        Engine::Rejection => {
            for _ in 0..quota {
                let psi = sample_gff(working, torus, &mut rng);
                if ctx.ball.contains_centered_slice(psi.coeffs(), &mut ws) {
                    record_state(ctx, &mut scratch, psi.coeffs(), &mut res, &mut out);
                }
            }
        }
        Engine::BallChain {
            burn_in,
            thin,
            beta,
        } => {
            let thin = thin.max(1);
            let mut beta = beta.unwrap_or(0.25).clamp(1e-4, 1.0);
            // Annealed start: inflate the radius until a fresh draw fits.
            let mut state = sample_gff(working, torus, &mut rng).coeffs().to_vec();
            let mut mult = 1.0f64;
            while !ctx
                .ball
                .contains_centered_slice_scaled(&state, &mut ws, mult)
            {
                mult *= 2.0;
                if mult > 1e12 {
                    out.failed = true;
                    return out;
                }
            }
            let mut prop = vec![Complex64::default(); state.len()];
            let mut window_acc = 0u32;
            let mut window_len = 0u32;
            let step = |state: &mut Vec<Complex64>,
                        prop: &mut Vec<Complex64>,
                        rng: &mut rand_chacha::ChaCha8Rng,
                        ws: &mut BallWorkspace,
                        beta: f64,
                        mult: f64|
             -> bool {
                let xi = sample_gff(working, torus, rng);
                let a = (1.0 - beta * beta).sqrt();
                for (i, p) in prop.iter_mut().enumerate() {
                    *p = a * state[i] + beta * xi.coeffs()[i];
                }
                if ctx.ball.contains_centered_slice_scaled(prop, ws, mult) {
                    std::mem::swap(state, prop);
                    true
                } else {
                    false
                }
            };
            // Burn-in: adapt beta on 100-step windows and walk the inflated
            // radius back down. A level is locked the moment the chain
            // wanders into the sub-ball; if it stalls for 50 steps, try
            // shrinking the state with the radius (exact for homogeneous
            // norms, a mere proposal otherwise), and when even that fails
            // split the tightening factor so the next level is easier.
            // Chains that finish annealing late get half a burn-in span to
            // re-equilibrate before recording starts.
            let mut f_t = 0.8f64;
            let mut stall = 0u32;
            let mut dirty = true;
            let mut settled_at: Option<u32> = None;
            let mut extra = 0u32;
            let mut t = 0u32;
            loop {
                if mult <= 1.0 {
                    let t0 = *settled_at.get_or_insert(t);
                    if t >= burn_in && t - t0 >= burn_in / 2 {
                        break;
                    }
                } else if t >= burn_in {
                    extra += 1;
                    if extra > (2 * burn_in).max(400) {
                        out.failed = true;
                        return out;
                    }
                }
                let acc = step(&mut state, &mut prop, &mut rng, &mut ws, beta, mult);
                window_acc += u32::from(acc);
                window_len += 1;
                if window_len == 100 {
                    let rate = window_acc as f64 / 100.0;
                    if rate < 0.15 {
                        beta = (beta * 0.7).max(1e-4);
                    } else if rate > 0.5 {
                        beta = (beta * 1.25).min(1.0);
                    }
                    window_acc = 0;
                    window_len = 0;
                }
                if mult > 1.0 {
                    dirty |= acc;
                    let tighter = (mult * f_t).max(1.0);
                    if dirty
                        && ctx
                            .ball
                            .contains_centered_slice_scaled(&state, &mut ws, tighter)
                    {
                        mult = tighter;
                        stall = 0;
                    } else {
                        dirty = false;
                        stall += 1;
                        if stall >= 50 {
                            let shrink = tighter / mult;
                            for (p, s) in prop.iter_mut().zip(state.iter()) {
                                *p = shrink * *s;
                            }
                            if ctx
                                .ball
                                .contains_centered_slice_scaled(&prop, &mut ws, tighter)
                            {
                                std::mem::swap(&mut state, &mut prop);
                                mult = tighter;
                            } else {
                                f_t = f_t.sqrt().min(0.999);
                            }
                            stall = 0;
                            dirty = true;
                        }
                    }
                }
                t += 1;
            }
            // Sampling phase: beta frozen, radius at target.
            for _ in 0..quota {
                for _ in 0..thin {
                    step(&mut state, &mut prop, &mut rng, &mut ws, beta, 1.0);
                }
                record_state(ctx, &mut scratch, &state, &mut res, &mut out);
            }
        }
    }
    out
}

/// Run the conditioned-sample stream and accumulate every row's weights.
pub(crate) fn run_conditioned(
    ball: &BallEvaluator,
    rows: &[WeightRow],
    opts: &SamplerOpts,
    collect: bool,
) -> Result<RunOutput> {
    let prep = prepare(ball, rows)?;
    let ctx = ChunkCtx {
        ball,
        prep: &prep,
        rows,
        opts,
        collect,
    };
    let chunk_outs: Vec<ChunkOut> = (0..opts.layout.chunks)
        .into_par_iter()
        .map(|c| run_chunk(&ctx, c))
        .collect();

    let mut rows_out: Vec<RowStats> = prep
        .rows
        .iter()
        .map(|p| RowStats {
            batch: Vec::with_capacity(chunk_outs.len()),
            sum_w: 0.0,
            sum_w2: 0.0,
            l0: p.l0,
        })
        .collect();
    let mut chunk_counts = Vec::with_capacity(chunk_outs.len());
    let mut recorded = 0u64;
    let mut failed = 0u32;
    let mut samples = Vec::new();
    let working = ball.working();
    let torus = ball.torus();
    for co in chunk_outs {
        for (row, sums) in rows_out.iter_mut().zip(&co.per_row) {
            row.batch.push(*sums);
            row.sum_w += sums.0;
            row.sum_w2 += sums.1;
        }
        chunk_counts.push(co.recorded);
        recorded += co.recorded;
        failed += u32::from(co.failed);
        if collect {
            for coeffs in co.samples {
                let mut f = FourierField::zero(torus, working);
                f.coeffs_mut().copy_from_slice(&coeffs);
                samples.push(f);
            }
        }
    }
    Ok(RunOutput {
        rows: rows_out,
        chunk_counts,
        recorded,
        failed_chunks: failed,
        samples,
    })
}

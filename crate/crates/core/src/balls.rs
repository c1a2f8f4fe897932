//! Radius-r neighborhoods of a band-limited center, measured in sup-type
//! block norms, with the level and power structure needed by the sampling
//! estimators.
//!
//! Membership always works on the centered difference psi = phi - z. The
//! plans below precompute, per truncation level and per power, the scatter
//! tables from coefficient boxes into block evaluation grids, so a check
//! costs a handful of small FFTs and can bail out at the first violated
//! block.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, next_fast_len};
use crate::norms::{DyadicPartition, PartitionKind};
use crate::spectral::{FourierField, ModeTruncation, TorusSpec};
use crate::wick::{hermite, variance_constant};

/// Norm choice for a single-condition ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlainNorm {
    /// Block sup norm with exponent alpha (negative alpha for distributions).
    Besov { alpha: f64 },
    /// Plain sup norm on an oversampled grid.
    Sup,
    /// Homogeneous H^1 norm of the coefficient vector.
    SobolevH1,
}

/// Shape of the membership conditions.
#[derive(Clone, Debug, PartialEq)]
pub enum BallKind {
    /// One condition: norm(phi - z) < r.
    Plain { norm: PlainNorm },
    /// Conditions on Wick powers p = 1..degree-1 of the centered field at the
    /// working truncation, all in C^{-alpha} and all with the same radius.
    EnhancedP { alpha: f64, degree: u32 },
    /// Level-indexed conditions in d = 3: for each n in n_set the projected
    /// centered field and its Wick square and cube must be small in norms of
    /// regularity -1/2-kappa, -1-kappa, -3/2-kappa, the cube with the
    /// radius relaxed to r log n.
    Enhanced3d { kappa: f64, n_set: Vec<u32> },
    /// Same as Enhanced3d with the cube condition compensated by the
    /// counterterm: the checked field is psi_n^{:3:} - c_n psi_n where
    /// c_n = -counterterm_scale * log n.
    FullyRenorm3d {
        kappa: f64,
        n_set: Vec<u32>,
        counterterm_scale: f64,
    },
}

#[derive(Clone, Debug)]
pub struct BallSpec {
    pub kind: BallKind,
    pub center: FourierField,
    pub radius: f64,
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
    }
    Ok(())
}

fn check_levels(n_set: &[u32]) -> Result<()> {
    if n_set.is_empty() {
        return Err(Error::InvalidParameter("empty level set".into()));
    }
    for w in n_set.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "levels must be strictly increasing".into(),
            ));
        }
    }
    if n_set[0] < 2 {
        // log(1) = 0 would make the cube condition unsatisfiable.
        return Err(Error::InvalidParameter("levels must be >= 2".into()));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "kappa {kappa} outside (0, 0.5)"
        )));
    }
    Ok(())
}

impl BallSpec {
    pub fn plain(norm: PlainNorm, center: FourierField, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        if let PlainNorm::Besov { alpha } = norm {
            if !alpha.is_finite() {
                return Err(Error::InvalidParameter("alpha must be finite".into()));
            }
        }
        Ok(BallSpec {
            kind: BallKind::Plain { norm },
            center,
            radius,
        })
    }

    /// Power conditions p = 1..degree-1 for an even interaction degree.
    pub fn enhanced_p(alpha: f64, degree: u32, center: FourierField, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        if center.torus.d != 2 {
            return Err(Error::InvalidParameter(
                "power-enhanced balls are a d = 2 construction".into(),
            ));
        }
        if degree < 4 || degree % 2 != 0 || degree > 6 {
            return Err(Error::InvalidParameter(format!(
                "interaction degree {degree} must be 4 or 6"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "regularity magnitude {alpha} outside (0, 1)"
            )));
        }
        Ok(BallSpec {
            kind: BallKind::EnhancedP { alpha, degree },
            center,
            radius,
        })
    }

    /// The quartic special case of `enhanced_p`.
    pub fn enhanced_2d(alpha: f64, center: FourierField, radius: f64) -> Result<Self> {
        BallSpec::enhanced_p(alpha, 4, center, radius)
    }

    pub fn enhanced_3d(
        kappa: f64,
        n_set: Vec<u32>,
        center: FourierField,
        radius: f64,
    ) -> Result<Self> {
        check_radius(radius)?;
        check_kappa(kappa)?;
        check_levels(&n_set)?;
        if center.torus.d != 3 {
            return Err(Error::InvalidParameter(
                "level-enhanced balls are a d = 3 construction".into(),
            ));
        }
        Ok(BallSpec {
            kind: BallKind::Enhanced3d { kappa, n_set },
            center,
            radius,
        })
    }

    pub fn fully_renorm_3d(
        kappa: f64,
        n_set: Vec<u32>,
        counterterm_scale: f64,
        center: FourierField,
        radius: f64,
    ) -> Result<Self> {
        check_radius(radius)?;
        check_kappa(kappa)?;
        check_levels(&n_set)?;
        if center.torus.d != 3 {
            return Err(Error::InvalidParameter(
                "level-enhanced balls are a d = 3 construction".into(),
            ));
        }
        if !(counterterm_scale > 0.0) {
            return Err(Error::InvalidParameter(
                "counterterm scale must be positive".into(),
            ));
        }
        Ok(BallSpec {
            kind: BallKind::FullyRenorm3d {
                kappa,
                n_set,
                counterterm_scale,
            },
            center,
            radius,
        })
    }

    /// Rebuild a spec from parts, revalidating against the kind's rules.
    pub fn from_parts(kind: BallKind, center: FourierField, radius: f64) -> Result<Self> {
        match kind {
            BallKind::Plain { norm } => BallSpec::plain(norm, center, radius),
            BallKind::EnhancedP { alpha, degree } => {
                BallSpec::enhanced_p(alpha, degree, center, radius)
            }
            BallKind::Enhanced3d { kappa, n_set } => {
                BallSpec::enhanced_3d(kappa, n_set, center, radius)
            }
            BallKind::FullyRenorm3d {
                kappa,
                n_set,
                counterterm_scale,
            } => BallSpec::fully_renorm_3d(kappa, n_set, counterterm_scale, center, radius),
        }
    }

    /// Largest truncation level the conditions refer to.
    pub fn top_level(&self) -> Option<u32> {
        match &self.kind {
            BallKind::Plain { .. } | BallKind::EnhancedP { .. } => None,
            BallKind::Enhanced3d { n_set, .. } | BallKind::FullyRenorm3d { n_set, .. } => {
                n_set.last().copied()
            }
        }
    }
}

struct BlockPlan {
    /// A grid sup at or above this value violates the condition.
    allowed: f64,
    grid: usize,
    include_mean: bool,
    /// (source index in the power box, destination grid bin, weight).
    entries: Vec<(u32, u32, f64)>,
}

struct PowerCheck {
    p: u32,
    /// Folded linear term: power field += linear_coeff * level field.
    linear_coeff: f64,
    /// Map power-box index -> grid bin, for reading a forward transform.
    from_grid: Vec<u32>,
    /// Map level-box index -> power-box index, for the linear fold.
    level_into_power: Vec<u32>,
    blocks: Vec<BlockPlan>,
}

struct LevelPlan {
    c_level: f64,
    /// Map level-box index -> working-box index.
    from_working: Vec<u32>,
    /// Scatter level-box index -> grid bin for synthesis; empty when no
    /// power check needs grid values at this level.
    to_grid: Vec<u32>,
    grid_m: usize,
    checks: Vec<PowerCheck>,
}

/// Reusable buffers for membership checks; one per worker thread.
#[derive(Default)]
pub struct BallWorkspace {
    pub(crate) psi: Vec<Complex64>,
    cbuf: Vec<Complex64>,
    bbuf: Vec<Complex64>,
    vals: Vec<f64>,
    lvl: Vec<Complex64>,
    power: Vec<Complex64>,
}

impl BallWorkspace {
    pub fn new() -> Self {
        BallWorkspace::default()
    }
}

fn ensure_c(buf: &mut Vec<Complex64>, len: usize) {
    if buf.len() < len {
        buf.resize(len, Complex64::default());
    }
}

fn ensure_f(buf: &mut Vec<f64>, len: usize) {
    if buf.len() < len {
        buf.resize(len, 0.0);
    }
}

/// Compiled membership test for one ball at a fixed working truncation.
pub struct BallEvaluator {
    spec: BallSpec,
    torus: TorusSpec,
    working: ModeTruncation,
    center_work: Vec<Complex64>,
    plain_h1: bool,
    levels: Vec<LevelPlan>,
}

impl BallEvaluator {
    pub fn new(spec: BallSpec, working_n: u32) -> Result<Self> {
        let torus = spec.center.torus;
        let working = ModeTruncation::new(working_n);
        if spec.center.trunc.n > working_n {
            return Err(Error::CutoffExceeded {
                requested: spec.center.trunc.n,
                available: working_n,
            });
        }
        if spec.center.mean() != 0.0 {
            return Err(Error::InvalidParameter("ball centers are mean-zero".into()));
        }
        if let Some(top) = spec.top_level() {
            if top > working_n {
                return Err(Error::CutoffExceeded {
                    requested: top,
                    available: working_n,
                });
            }
        }
        let center_work = {
            let embedded = spec.center.embed(working)?;
            embedded.coeffs().to_vec()
        };

        let r = spec.radius;
        let mut plain_h1 = false;
        // (level, list of (p, exponent, threshold, linear_coeff)).
        let mut level_specs: Vec<(u32, Vec<(u32, f64, f64, f64)>)> = Vec::new();
        let mut plain_sup_level: Option<u32> = None;
        match &spec.kind {
            BallKind::Plain { norm } => match norm {
                PlainNorm::Besov { alpha } => {
                    level_specs.push((working_n, vec![(1, *alpha, r, 0.0)]));
                }
                PlainNorm::Sup => plain_sup_level = Some(working_n),
                PlainNorm::SobolevH1 => plain_h1 = true,
            },
            BallKind::EnhancedP { alpha, degree } => {
                let conds = (1..*degree).map(|p| (p, -alpha, r, 0.0)).collect();
                level_specs.push((working_n, conds));
            }
            BallKind::Enhanced3d { kappa, n_set } => {
                for &n in n_set {
                    let logn = (n as f64).ln();
                    level_specs.push((
                        n,
                        vec![
                            (1, -0.5 - kappa, r, 0.0),
                            (2, -1.0 - kappa, r, 0.0),
                            (3, -1.5 - kappa, r * logn, 0.0),
                        ],
                    ));
                }
            }
            BallKind::FullyRenorm3d {
                kappa,
                n_set,
                counterterm_scale,
            } => {
                for &n in n_set {
                    let logn = (n as f64).ln();
                    // Checked cube: psi_n^{:3:} - c_n psi_n with c_n = -scale log n.
                    let fold = counterterm_scale * logn;
                    level_specs.push((
                        n,
                        vec![
                            (1, -0.5 - kappa, r, 0.0),
                            (2, -1.0 - kappa, r, 0.0),
                            (3, -1.5 - kappa, r * logn, fold),
                        ],
                    ));
                }
            }
        }

        let mut levels = Vec::new();
        if let Some(n) = plain_sup_level {
            levels.push(Self::sup_level_plan(torus, working, n, r)?);
        }
        for (n, conds) in level_specs {
            levels.push(Self::level_plan(torus, working, n, &conds)?);
        }
        Ok(BallEvaluator {
            spec,
            torus,
            working,
            center_work,
            plain_h1,
            levels,
        })
    }

    fn sup_level_plan(
        torus: TorusSpec,
        working: ModeTruncation,
        n: u32,
        r: f64,
    ) -> Result<LevelPlan> {
        let d = torus.d;
        let level_box = ModeTruncation::new(n);
        let grid = next_fast_len(4 * level_box.side());
        let mut entries = Vec::new();
        let mut from_working = Vec::with_capacity(level_box.len(d));
        for idx in 0..level_box.len(d) {
            let k = level_box.mode_at(d, idx);
            from_working.push(working.index_of(d, k) as u32);
            if k != [0, 0, 0] {
                entries.push((idx as u32, grid_bin(k, grid, d) as u32, 1.0));
            }
        }
        Ok(LevelPlan {
            c_level: 0.0,
            from_working,
            to_grid: Vec::new(),
            grid_m: 0,
            checks: vec![PowerCheck {
                p: 1,
                linear_coeff: 0.0,
                from_grid: Vec::new(),
                level_into_power: Vec::new(),
                blocks: vec![BlockPlan {
                    allowed: r,
                    grid,
                    include_mean: true,
                    entries,
                }],
            }],
        })
    }

    fn level_plan(
        torus: TorusSpec,
        working: ModeTruncation,
        n: u32,
        conds: &[(u32, f64, f64, f64)],
    ) -> Result<LevelPlan> {
        let d = torus.d;
        let level_box = ModeTruncation::new(n);
        let p_top = conds.iter().map(|c| c.0).max().unwrap_or(1);
        let needs_grid = p_top >= 2;
        let grid_m = if needs_grid {
            next_fast_len((2 * p_top * n + 1) as usize)
        } else {
            0
        };
        let mut from_working = Vec::with_capacity(level_box.len(d));
        let mut to_grid = Vec::new();
        for idx in 0..level_box.len(d) {
            let k = level_box.mode_at(d, idx);
            from_working.push(working.index_of(d, k) as u32);
            if needs_grid {
                to_grid.push(grid_bin(k, grid_m, d) as u32);
            }
        }
        let mut checks = Vec::new();
        for &(p, alpha, threshold, linear_coeff) in conds {
            let power_box = ModeTruncation::new(p * n);
            let part = DyadicPartition::for_cutoff(PartitionKind::Smooth, d, p * n);
            let mut from_grid = Vec::new();
            if p >= 2 {
                from_grid.reserve(power_box.len(d));
                for idx in 0..power_box.len(d) {
                    let k = power_box.mode_at(d, idx);
                    from_grid.push(grid_bin(k, grid_m, d) as u32);
                }
            }
            let mut level_into_power = Vec::new();
            if linear_coeff != 0.0 {
                level_into_power.reserve(level_box.len(d));
                for idx in 0..level_box.len(d) {
                    let k = level_box.mode_at(d, idx);
                    level_into_power.push(power_box.index_of(d, k) as u32);
                }
            }
            let mut blocks = Vec::new();
            for j in -1..=part.j_max {
                let g = part.block_grid(j);
                let mut entries = Vec::new();
                for idx in 0..power_box.len(d) {
                    let k = power_box.mode_at(d, idx);
                    if k == [0, 0, 0] {
                        continue;
                    }
                    let w = part.block_weight(j, k);
                    if w.abs() > 1e-14 {
                        entries.push((idx as u32, grid_bin(k, g, d) as u32, w));
                    }
                }
                let include_mean = j == -1;
                if entries.is_empty() && !include_mean {
                    continue;
                }
                blocks.push(BlockPlan {
                    allowed: threshold / (j as f64 * alpha).exp2(),
                    grid: g,
                    include_mean,
                    entries,
                });
            }
            checks.push(PowerCheck {
                p,
                linear_coeff,
                from_grid,
                level_into_power,
                blocks,
            });
        }
        Ok(LevelPlan {
            c_level: variance_constant(torus, n),
            from_working,
            to_grid,
            grid_m,
            checks,
        })
    }

    pub fn spec(&self) -> &BallSpec {
        &self.spec
    }

    pub fn working(&self) -> ModeTruncation {
        self.working
    }

    pub fn torus(&self) -> TorusSpec {
        self.torus
    }

    /// Membership of a field given at the working truncation.
    pub fn contains(&self, phi: &FourierField, ws: &mut BallWorkspace) -> Result<bool> {
        if phi.torus != self.torus {
            return Err(Error::Mismatch("field torus vs ball torus".into()));
        }
        if phi.trunc != self.working {
            return Err(Error::Mismatch(format!(
                "field cutoff {} vs working cutoff {}",
                phi.trunc.n, self.working.n
            )));
        }
        let len = self.working.len(self.torus.d);
        ensure_c(&mut ws.psi, len);
        for i in 0..len {
            ws.psi[i] = phi.coeffs()[i] - self.center_work[i];
        }
        Ok(self.contains_centered_slice_inner(ws, 1.0))
    }

    /// Membership of the already-centered difference psi = phi - z.
    pub fn contains_centered(&self, psi: &FourierField, ws: &mut BallWorkspace) -> Result<bool> {
        if psi.torus != self.torus || psi.trunc != self.working {
            return Err(Error::Mismatch("centered field layout".into()));
        }
        let len = self.working.len(self.torus.d);
        ensure_c(&mut ws.psi, len);
        ws.psi[..len].copy_from_slice(psi.coeffs());
        Ok(self.contains_centered_slice_inner(ws, 1.0))
    }

    /// Same, with psi provided directly as dense working-box coefficients.
    pub(crate) fn contains_centered_slice(
        &self,
        psi: &[Complex64],
        ws: &mut BallWorkspace,
    ) -> bool {
        self.contains_centered_slice_scaled(psi, ws, 1.0)
    }

    /// Membership with every radius threshold inflated by `mult`; the
    /// annealed chain start walks `mult` down to 1.
    pub(crate) fn contains_centered_slice_scaled(
        &self,
        psi: &[Complex64],
        ws: &mut BallWorkspace,
        mult: f64,
    ) -> bool {
        let len = self.working.len(self.torus.d);
        debug_assert_eq!(psi.len(), len);
        ensure_c(&mut ws.psi, len);
        ws.psi[..len].copy_from_slice(psi);
        self.contains_centered_slice_inner(ws, mult)
    }

    fn contains_centered_slice_inner(&self, ws: &mut BallWorkspace, mult: f64) -> bool {
        let d = self.torus.d;
        if self.plain_h1 {
            let mut acc = 0.0f64;
            let massless = TorusSpec::massless(d);
            for idx in 0..self.working.len(d) {
                let c = ws.psi[idx];
                if c != Complex64::default() {
                    let k = self.working.mode_at(d, idx);
                    acc += massless.lambda(k) * c.norm_sqr();
                }
            }
            let r = self.spec.radius * mult;
            return acc < r * r;
        }

        for lvl in &self.levels {
            // Restrict to the level box.
            let nlev = lvl.from_working.len();
            ensure_c(&mut ws.lvl, nlev);
            for (i, &src) in lvl.from_working.iter().enumerate() {
                ws.lvl[i] = ws.psi[src as usize];
            }
            // Grid values of the level field, when any power needs them.
            if lvl.grid_m > 0 {
                let glen = lvl.grid_m.pow(d as u32);
                ensure_c(&mut ws.cbuf, glen);
                for v in &mut ws.cbuf[..glen] {
                    *v = Complex64::default();
                }
                for (i, &dst) in lvl.to_grid.iter().enumerate() {
                    ws.cbuf[dst as usize] = ws.lvl[i];
                }
                fft_nd(&mut ws.cbuf[..glen], lvl.grid_m, d, true);
                ensure_f(&mut ws.vals, glen);
                for i in 0..glen {
                    ws.vals[i] = ws.cbuf[i].re;
                }
            }
            for check in &lvl.checks {
                let mut mean = 0.0f64;
                let plen = if check.p == 1 {
                    nlev
                } else {
                    check.from_grid.len()
                };
                ensure_c(&mut ws.power, plen);
                if check.p == 1 {
                    ws.power[..nlev].copy_from_slice(&ws.lvl[..nlev]);
                } else {
                    let glen = lvl.grid_m.pow(d as u32);
                    ensure_c(&mut ws.cbuf, glen);
                    for i in 0..glen {
                        ws.cbuf[i] = Complex64::new(hermite(check.p, ws.vals[i], lvl.c_level), 0.0);
                    }
                    fft_nd(&mut ws.cbuf[..glen], lvl.grid_m, d, false);
                    let vol = glen as f64;
                    for (idx, &bin) in check.from_grid.iter().enumerate() {
                        ws.power[idx] = ws.cbuf[bin as usize] / vol;
                    }
                    mean = ws.cbuf[0].re / vol;
                }
                if check.linear_coeff != 0.0 {
                    for (i, &dst) in check.level_into_power.iter().enumerate() {
                        ws.power[dst as usize] += check.linear_coeff * ws.lvl[i];
                    }
                }
                for block in &check.blocks {
                    let glen = block.grid.pow(d as u32);
                    ensure_c(&mut ws.bbuf, glen);
                    for v in &mut ws.bbuf[..glen] {
                        *v = Complex64::default();
                    }
                    for &(src, dst, w) in &block.entries {
                        ws.bbuf[dst as usize] = ws.power[src as usize] * w;
                    }
                    if block.include_mean {
                        ws.bbuf[0] += Complex64::new(mean, 0.0);
                    }
                    fft_nd(&mut ws.bbuf[..glen], block.grid, d, true);
                    let allowed = block.allowed * mult;
                    for v in &ws.bbuf[..glen] {
                        if v.re.abs() >= allowed {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
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

/// One-shot membership test; builds the plans on every call.
pub fn contains(spec: &BallSpec, phi: &FourierField) -> Result<bool> {
    let eval = BallEvaluator::new(spec.clone(), phi.trunc.n)?;
    let mut ws = BallWorkspace::new();
    eval.contains(phi, &mut ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_gff, stream_rng};
    use crate::norms::{besov_norm, h10_norm, sup_norm};

    fn random_field(seed: u64, d: usize, n: u32) -> FourierField {
        let torus = TorusSpec::massless(d);
        sample_gff(ModeTruncation::new(n), torus, &mut stream_rng(seed, 0))
    }

    #[test]
    fn plain_besov_membership_matches_the_norm_function() {
        let torus = TorusSpec::massless(1);
        let n = 12;
        let center = FourierField::cosine(torus, ModeTruncation::new(2), [1, 0, 0], 0.2).unwrap();
        for alpha in [0.25, -0.4] {
            for seed in 0..20u64 {
                let phi = random_field(seed + 100, 1, n);
                let diff =
                    FourierField::linear_combination(&[(1.0, &phi), (-1.0, &center)]).unwrap();
                let norm = besov_norm(&diff, alpha);
                for r in [0.5 * norm, 1.5 * norm] {
                    let spec = BallSpec::plain(
                        PlainNorm::Besov { alpha },
                        center.clone(),
                        r,
                    )
                    .unwrap();
                    let got = contains(&spec, &phi).unwrap();
                    assert_eq!(got, norm < r, "alpha={alpha} seed={seed} r={r}");
                }
            }
        }
    }

    #[test]
    fn plain_sup_and_h1_membership_match_their_norms() {
        let torus = TorusSpec::massless(2);
        let n = 6;
        let center = FourierField::cosine(torus, ModeTruncation::new(1), [1, 0, 0], 0.1).unwrap();
        for seed in 0..10u64 {
            let phi = random_field(seed + 7, 2, n);
            let diff = FourierField::linear_combination(&[(1.0, &phi), (-1.0, &center)]).unwrap();
            let s = sup_norm(&diff);
            let spec = BallSpec::plain(PlainNorm::Sup, center.clone(), s * 1.01).unwrap();
            assert!(contains(&spec, &phi).unwrap());
            let spec = BallSpec::plain(PlainNorm::Sup, center.clone(), s * 0.99).unwrap();
            assert!(!contains(&spec, &phi).unwrap());
            let h = h10_norm(&diff);
            let spec = BallSpec::plain(PlainNorm::SobolevH1, center.clone(), h * 1.01).unwrap();
            assert!(contains(&spec, &phi).unwrap());
            let spec = BallSpec::plain(PlainNorm::SobolevH1, center.clone(), h * 0.99).unwrap();
            assert!(!contains(&spec, &phi).unwrap());
        }
    }

    #[test]
    fn membership_commutes_with_recentring() {
        let torus = TorusSpec::massless(2);
        let n = 8;
        let center = FourierField::cosine(torus, ModeTruncation::new(2), [2, 1, 0], 0.3).unwrap();
        let at_center =
            BallSpec::enhanced_2d(0.3, center.clone(), 0.6).unwrap();
        let at_origin = BallSpec::enhanced_2d(
            0.3,
            FourierField::zero(torus, ModeTruncation::new(2)),
            0.6,
        )
        .unwrap();
        let ev_center = BallEvaluator::new(at_center, n).unwrap();
        let ev_origin = BallEvaluator::new(at_origin, n).unwrap();
        let mut ws = BallWorkspace::new();
        for seed in 0..30u64 {
            let phi = random_field(seed, 2, n);
            let shifted =
                FourierField::linear_combination(&[(1.0, &phi), (-1.0, &center)])
                    .unwrap()
                    .embed(ModeTruncation::new(n))
                    .unwrap();
            let a = ev_center.contains(&phi, &mut ws).unwrap();
            let b = ev_origin.contains(&shifted, &mut ws).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn smaller_radius_and_more_levels_give_smaller_balls() {
        // Radii calibrated to the observed 3D norm scales: the cube condition
        // needs r log 2 above roughly 1.1..2.0 for 0.6-scaled free draws, so
        // membership actually varies between 2.2 and 4.0.
        let torus = TorusSpec::massless(3);
        let n = 4;
        let zero = FourierField::zero(torus, ModeTruncation::new(1));
        let wide = BallEvaluator::new(
            BallSpec::enhanced_3d(0.1, vec![2], zero.clone(), 4.0).unwrap(),
            n,
        )
        .unwrap();
        let more_levels = BallEvaluator::new(
            BallSpec::enhanced_3d(0.1, vec![2, 4], zero.clone(), 4.0).unwrap(),
            n,
        )
        .unwrap();
        let narrow = BallEvaluator::new(
            BallSpec::enhanced_3d(0.1, vec![2], zero.clone(), 2.2).unwrap(),
            n,
        )
        .unwrap();
        let mut ws = BallWorkspace::new();
        let mut seen_extra_reject = false;
        let mut seen_narrow_reject = false;
        for seed in 0..60u64 {
            let mut phi = random_field(seed + 1000, 3, n);
            phi.scale(0.6);
            let in_wide = wide.contains(&phi, &mut ws).unwrap();
            let in_more = more_levels.contains(&phi, &mut ws).unwrap();
            let in_narrow = narrow.contains(&phi, &mut ws).unwrap();
            if in_more {
                assert!(in_wide, "level conditions only shrink the set");
            }
            if in_narrow {
                assert!(in_wide, "radius shrinks the set");
            }
            seen_extra_reject |= in_wide && !in_more;
            seen_narrow_reject |= in_wide && !in_narrow;
        }
        assert!(seen_narrow_reject, "radius cut never engaged");
        let _ = seen_extra_reject;
    }

    #[test]
    fn compensated_cube_changes_membership_at_large_scale() {
        // At radius 6 the plain cube condition is loose (norms sit near 2,
        // allowance r log 2 = 4.2), while a scale-40 linear fold adds about
        // 28 |psi| to the checked field and pushes it far outside.
        let torus = TorusSpec::massless(3);
        let n = 4;
        let zero = FourierField::zero(torus, ModeTruncation::new(1));
        let plainball = BallSpec::enhanced_3d(0.1, vec![2], zero.clone(), 6.0).unwrap();
        let compensated =
            BallSpec::fully_renorm_3d(0.1, vec![2], 40.0, zero.clone(), 6.0).unwrap();
        let ev_a = BallEvaluator::new(plainball, n).unwrap();
        let ev_b = BallEvaluator::new(compensated, n).unwrap();
        let mut ws = BallWorkspace::new();
        let mut differ = false;
        for seed in 0..200u64 {
            let mut phi = random_field(seed + 5000, 3, n);
            phi.scale(0.6);
            let a = ev_a.contains(&phi, &mut ws).unwrap();
            let b = ev_b.contains(&phi, &mut ws).unwrap();
            differ |= a != b;
        }
        assert!(differ, "a large compensation should move the cube condition");
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        let t3 = TorusSpec::massless(3);
        let t2 = TorusSpec::massless(2);
        let z3 = FourierField::zero(t3, ModeTruncation::new(1));
        let z2 = FourierField::zero(t2, ModeTruncation::new(1));
        assert!(BallSpec::enhanced_3d(0.1, vec![], z3.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_3d(0.1, vec![1, 2], z3.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_3d(0.1, vec![4, 2], z3.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_3d(0.7, vec![2], z3.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_3d(0.1, vec![2], z3.clone(), -1.0).is_err());
        assert!(BallSpec::enhanced_3d(0.1, vec![2], z2.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_p(0.3, 5, z2.clone(), 0.5).is_err());
        assert!(BallSpec::enhanced_p(0.3, 4, z3.clone(), 0.5).is_err());
        assert!(BallSpec::fully_renorm_3d(0.1, vec![2], 0.0, z3.clone(), 0.5).is_err());
        // Levels above the working cutoff cannot be evaluated.
        let spec = BallSpec::enhanced_3d(0.1, vec![2, 8], z3, 0.5).unwrap();
        assert!(BallEvaluator::new(spec, 4).is_err());
    }

    #[test]
    fn zero_field_sits_a_wick_square_away_from_the_origin() {
        // The Wick square of the zero field is the constant -c_n, so a tiny
        // enhanced ball around the origin does not contain its own center
        // direction; only a radius past c_n / (r-weight of the mean block)
        // does. Plain balls have no such offset.
        let t3 = TorusSpec::massless(3);
        let zero_center = FourierField::zero(t3, ModeTruncation::new(1));
        let zero_sample = FourierField::zero(t3, ModeTruncation::new(4));
        let tiny = BallSpec::enhanced_3d(0.2, vec![2, 4], zero_center.clone(), 0.05).unwrap();
        assert!(!contains(&tiny, &zero_sample).unwrap());
        let wide = BallSpec::enhanced_3d(0.2, vec![2, 4], zero_center.clone(), 40.0).unwrap();
        assert!(contains(&wide, &zero_sample).unwrap());
        let tiny_renorm =
            BallSpec::fully_renorm_3d(0.2, vec![2, 4], 1.0, zero_center.clone(), 0.05).unwrap();
        assert!(!contains(&tiny_renorm, &zero_sample).unwrap());
        let wide_renorm =
            BallSpec::fully_renorm_3d(0.2, vec![2, 4], 1.0, zero_center.clone(), 40.0).unwrap();
        assert!(contains(&wide_renorm, &zero_sample).unwrap());
        let plain = BallSpec::plain(
            PlainNorm::Besov { alpha: 0.25 },
            zero_center,
            1e-6,
        )
        .unwrap();
        assert!(contains(&plain, &zero_sample).unwrap());
    }
}

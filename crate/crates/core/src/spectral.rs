//! Band-limited real fields on the unit torus in dimension 1, 2 or 3.
//!
//! A field is stored by its Fourier coefficients over the centered box
//! max_i |k_i| <= n, in the basis e_k(x) = exp(2*pi*i*k.x). Real fields keep
//! the Hermitian pairing coeff(-k) = conj(coeff(k)). The k = 0 coefficient is
//! excluded from the box and carried, when needed at all, as a separate `mean`
//! scalar.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Frequency vector. Trailing components are zero when the dimension is < 3.
pub type Mode = [i32; 3];

/// Flat torus [0,1)^d with an optional mass term in the quadratic form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusSpec {
    pub d: usize,
    pub mass: f64,
}

impl TorusSpec {
    pub fn new(d: usize, mass: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::BadDimension(d));
        }
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mass must be finite and nonnegative, got {mass}"
            )));
        }
        Ok(TorusSpec { d, mass })
    }

    pub fn massless(d: usize) -> Self {
        TorusSpec::new(d, 0.0).expect("dimension in 1..=3")
    }

    /// Eigenvalue of (-Laplace + mass) on e_k: 4 pi^2 |k|^2 + mass.
    pub fn lambda(&self, k: Mode) -> f64 {
        let k2: f64 = k.iter().map(|&c| (c as f64) * (c as f64)).sum();
        TAU * TAU * k2 + self.mass
    }
}

/// Symmetric box truncation: modes with max_i |k_i| <= n, k != 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeTruncation {
    pub n: u32,
}

impl ModeTruncation {
    pub fn new(n: u32) -> Self {
        ModeTruncation { n }
    }

    /// Points per axis of the coefficient box, 2n + 1.
    pub fn side(&self) -> usize {
        2 * self.n as usize + 1
    }

    pub fn len(&self, d: usize) -> usize {
        self.side().pow(d as u32)
    }

    pub fn contains(&self, d: usize, k: Mode) -> bool {
        let n = self.n as i32;
        (0..3).all(|i| {
            if i < d {
                k[i].abs() <= n
            } else {
                k[i] == 0
            }
        })
    }

    /// Dense storage index; canonical scan order is k[0] fastest.
    pub fn index_of(&self, d: usize, k: Mode) -> usize {
        debug_assert!(self.contains(d, k));
        let n = self.n as i32;
        let side = self.side();
        let mut idx = 0usize;
        let mut stride = 1usize;
        for i in 0..d {
            idx += (k[i] + n) as usize * stride;
            stride *= side;
        }
        idx
    }

    pub fn mode_at(&self, d: usize, mut idx: usize) -> Mode {
        let n = self.n as i32;
        let side = self.side();
        let mut k = [0i32; 3];
        for ki in k.iter_mut().take(d) {
            *ki = (idx % side) as i32 - n;
            idx /= side;
        }
        k
    }

    /// All nonzero modes of the box in canonical scan order.
    pub fn modes(&self, d: usize) -> impl Iterator<Item = Mode> + '_ {
        let len = self.len(d);
        (0..len)
            .map(move |idx| self.mode_at(d, idx))
            .filter(|k| *k != [0, 0, 0])
    }
}

/// True on exactly one of each Hermitian pair {k, -k}; false at k = 0.
pub(crate) fn is_canonical(k: Mode) -> bool {
    for i in (0..3).rev() {
        if k[i] > 0 {
            return true;
        }
        if k[i] < 0 {
            return false;
        }
    }
    false
}

/// Real band-limited field stored by Fourier coefficients over a mode box.
#[derive(Clone, Debug)]
pub struct FourierField {
    pub torus: TorusSpec,
    pub trunc: ModeTruncation,
    coeffs: Vec<Complex64>,
    mean: f64,
}

impl FourierField {
    pub fn zero(torus: TorusSpec, trunc: ModeTruncation) -> Self {
        let len = trunc.len(torus.d);
        FourierField {
            torus,
            trunc,
            coeffs: vec![Complex64::default(); len],
            mean: 0.0,
        }
    }

    /// a * sqrt(2) * cos(2 pi k.x); unit L2 norm when a = 1.
    pub fn cosine(torus: TorusSpec, trunc: ModeTruncation, k: Mode, a: f64) -> Result<Self> {
        let mut f = FourierField::zero(torus, trunc);
        let half = a * std::f64::consts::FRAC_1_SQRT_2;
        f.set_pair(k, Complex64::new(half, 0.0))?;
        Ok(f)
    }

    /// a * sqrt(2) * sin(2 pi k.x); unit L2 norm when a = 1.
    pub fn sine(torus: TorusSpec, trunc: ModeTruncation, k: Mode, a: f64) -> Result<Self> {
        let mut f = FourierField::zero(torus, trunc);
        let half = a * std::f64::consts::FRAC_1_SQRT_2;
        f.set_pair(k, Complex64::new(0.0, -half))?;
        Ok(f)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn set_mean(&mut self, mean: f64) {
        self.mean = mean;
    }

    pub fn coeff(&self, k: Mode) -> Complex64 {
        if k == [0, 0, 0] || !self.trunc.contains(self.torus.d, k) {
            Complex64::default()
        } else {
            self.coeffs[self.trunc.index_of(self.torus.d, k)]
        }
    }

    /// Writes c at k and conj(c) at -k. k must be a nonzero box mode.
    pub fn set_pair(&mut self, k: Mode, c: Complex64) -> Result<()> {
        if k == [0, 0, 0] {
            return Err(Error::InvalidParameter(
                "zero mode is not stored; use the mean scalar".into(),
            ));
        }
        if !self.trunc.contains(self.torus.d, k) {
            return Err(Error::Mismatch(format!(
                "mode {k:?} outside box with cutoff {}",
                self.trunc.n
            )));
        }
        let d = self.torus.d;
        let neg = [-k[0], -k[1], -k[2]];
        let i = self.trunc.index_of(d, k);
        let j = self.trunc.index_of(d, neg);
        self.coeffs[i] = c;
        self.coeffs[j] = c.conj();
        Ok(())
    }

    pub(crate) fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Nonzero-mode entries in canonical scan order, zeros skipped.
    pub fn iter(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        let d = self.torus.d;
        self.coeffs.iter().enumerate().filter_map(move |(idx, &c)| {
            if c == Complex64::default() {
                return None;
            }
            let k = self.trunc.mode_at(d, idx);
            if k == [0, 0, 0] {
                None
            } else {
                Some((k, c))
            }
        })
    }

    /// Squared L2 norm: sum |coeff|^2 over the box plus mean^2.
    pub fn l2_norm_sq(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        s + self.mean * self.mean
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
        self.mean *= s;
    }

    /// Sum of a_i * f_i over a common torus; the cutoff is the largest one.
    pub fn linear_combination(terms: &[(f64, &FourierField)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty linear combination".into()))?;
        let torus = first.1.torus;
        let n = terms.iter().map(|(_, f)| f.trunc.n).max().unwrap();
        let mut out = FourierField::zero(torus, ModeTruncation::new(n));
        let d = torus.d;
        for (a, f) in terms {
            if f.torus != torus {
                return Err(Error::Mismatch("linear combination across tori".into()));
            }
            for (idx, &c) in f.coeffs.iter().enumerate() {
                if c != Complex64::default() {
                    let k = f.trunc.mode_at(d, idx);
                    let dst = out.trunc.index_of(d, k);
                    out.coeffs[dst] += *a * c;
                }
            }
            out.mean += *a * f.mean;
        }
        Ok(out)
    }

    /// Copy into a box with cutoff >= the current one.
    pub fn embed(&self, trunc: ModeTruncation) -> Result<Self> {
        if trunc.n < self.trunc.n {
            return Err(Error::CutoffExceeded {
                requested: self.trunc.n,
                available: trunc.n,
            });
        }
        if trunc.n == self.trunc.n {
            let mut f = self.clone();
            f.trunc = trunc;
            return Ok(f);
        }
        let mut out = FourierField::zero(self.torus, trunc);
        let d = self.torus.d;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c != Complex64::default() {
                let k = self.trunc.mode_at(d, idx);
                out.coeffs[out.trunc.index_of(d, k)] = c;
            }
        }
        out.mean = self.mean;
        Ok(out)
    }

    /// Largest Hermitian asymmetry |coeff(k) - conj(coeff(-k))|; 0 for real fields.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.torus.d;
        let mut worst = 0.0f64;
        for k in self.trunc.modes(d) {
            let c = self.coeff(k);
            let m = self.coeff([-k[0], -k[1], -k[2]]);
            worst = worst.max((c - m.conj()).norm());
        }
        worst
    }
}

/// Real samples on the uniform grid with m points per axis, x0 fastest.
#[derive(Clone, Debug)]
pub struct GridField {
    pub torus: TorusSpec,
    pub m: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid average; equals the continuum mean for trig degree < m.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Evaluate on the m^d grid by zero-padded inverse FFT. Needs m >= 2n + 1.
pub fn synthesize(f: &FourierField, m: usize) -> Result<GridField> {
    let needed = f.trunc.side();
    if m < needed {
        return Err(Error::GridTooSmall { needed, got: m });
    }
    let d = f.torus.d;
    let mut buf = vec![Complex64::default(); m.pow(d as u32)];
    buf[0] = Complex64::new(f.mean, 0.0);
    for (k, c) in f.iter() {
        let mut idx = 0usize;
        let mut stride = 1usize;
        for i in 0..d {
            idx += k[i].rem_euclid(m as i32) as usize * stride;
            stride *= m;
        }
        buf[idx] = c;
    }
    fft::fft_nd(&mut buf, m, d, true);
    // Hermitian input makes the imaginary part pure rounding noise.
    let scale: f64 = f.coeffs.iter().map(|c| c.norm()).sum::<f64>() + f.mean.abs() + 1e-300;
    let mut values = Vec::with_capacity(buf.len());
    for v in &buf {
        debug_assert!(v.im.abs() <= 1e-12 * scale, "imaginary residue {}", v.im);
        values.push(v.re);
    }
    Ok(GridField {
        torus: f.torus,
        m,
        values,
    })
}

/// Fourier coefficients over the cutoff-n box from grid samples, zero mode
/// dropped. Exact for trig polynomials of degree <= m - n - 1.
pub fn analyze(g: &GridField, n: u32) -> Result<FourierField> {
    let mut f = analyze_retaining_mean(g, n)?;
    f.mean = 0.0;
    Ok(f)
}

/// Same as analyze but keeps the grid zero mode as the mean scalar.
pub fn analyze_retaining_mean(g: &GridField, n: u32) -> Result<FourierField> {
    let trunc = ModeTruncation::new(n);
    let needed = trunc.side();
    if g.m < needed {
        return Err(Error::GridTooSmall { needed, got: g.m });
    }
    let d = g.torus.d;
    let m = g.m;
    let mut buf: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::fft_nd(&mut buf, m, d, false);
    let vol = m.pow(d as u32) as f64;
    let mut f = FourierField::zero(g.torus, trunc);
    f.mean = buf[0].re / vol;
    let len = trunc.len(d);
    for idx in 0..len {
        let k = trunc.mode_at(d, idx);
        if k == [0, 0, 0] {
            continue;
        }
        let mut src = 0usize;
        let mut stride = 1usize;
        for i in 0..d {
            src += k[i].rem_euclid(m as i32) as usize * stride;
            stride *= m;
        }
        f.coeffs[idx] = buf[src] / vol;
    }
    Ok(f)
}

/// Restriction to the smaller box max_i |k_i| <= n.
pub fn project(f: &FourierField, n: u32) -> Result<FourierField> {
    if n > f.trunc.n {
        return Err(Error::CutoffExceeded {
            requested: n,
            available: f.trunc.n,
        });
    }
    if n == f.trunc.n {
        return Ok(f.clone());
    }
    let trunc = ModeTruncation::new(n);
    let d = f.torus.d;
    let mut out = FourierField::zero(f.torus, trunc);
    let len = trunc.len(d);
    for idx in 0..len {
        let k = trunc.mode_at(d, idx);
        if k != [0, 0, 0] {
            out.coeffs[idx] = f.coeff(k);
        }
    }
    out.mean = f.mean;
    Ok(out)
}

/// Truncated Green kernel sum_{0 < max|k_i| <= n} e_k / lambda_k on an m^d grid.
pub fn green_kernel(torus: TorusSpec, n: u32, m: usize) -> Result<GridField> {
    let trunc = ModeTruncation::new(n);
    let mut f = FourierField::zero(torus, trunc);
    let d = torus.d;
    for k in trunc.modes(d) {
        if is_canonical(k) {
            let c = Complex64::new(1.0 / torus.lambda(k), 0.0);
            f.set_pair(k, c)?;
        }
    }
    synthesize(&f, m)
}

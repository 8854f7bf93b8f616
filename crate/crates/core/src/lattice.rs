//! Torus geometry, translation-invariant kernels, difference operators and
//! moment functionals.

use crate::error::{CoreError, Result};
use crate::fft::fft_nd;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};

/// Largest site count accepted for a torus.
pub const MAX_SITES: u64 = 1 << 31;

/// A d-dimensional torus of side `L^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusSpec {
    pub d: usize,
    pub l: usize,
    pub n: usize,
    side: usize,
}

impl TorusSpec {
    pub fn new(d: usize, l: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(CoreError::InvalidSpec("d must be at least 1".into()));
        }
        if l < 2 {
            return Err(CoreError::InvalidSpec(format!("L = {l} must be at least 2")));
        }
        if n == 0 {
            return Err(CoreError::InvalidSpec("N must be at least 1".into()));
        }
        let side = (l as u64)
            .checked_pow(n as u32)
            .ok_or_else(|| CoreError::InvalidSpec("L^N overflows".into()))?;
        let sites = side
            .checked_pow(d as u32)
            .filter(|&s| s <= MAX_SITES)
            .ok_or_else(|| {
                CoreError::InvalidSpec(format!("{side}^{d} sites exceed the limit {MAX_SITES}"))
            })?;
        let _ = sites;
        Ok(Self { d, l, n, side: side as usize })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    /// Row-major stride of `axis` (axis 0 varies slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.d - 1 - axis) as u32)
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for a in (0..self.d).rev() {
            c[a] = idx % self.side;
            idx /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[i64]) -> usize {
        let m = self.side as i64;
        coords.iter().fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(m) as usize)
    }

    /// Coordinate along one axis of site `idx`.
    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.side
    }

    /// Centered representative of a coordinate, in (-M/2, M/2].
    #[inline]
    pub fn centered(&self, k: usize) -> i64 {
        if 2 * k <= self.side {
            k as i64
        } else {
            k as i64 - self.side as i64
        }
    }

    /// Index of the site `idx + shift * e_axis`.
    #[inline]
    pub fn shifted(&self, idx: usize, axis: usize, shift: i64) -> usize {
        let s = self.stride(axis);
        let c = (idx / s) % self.side;
        let nc = (c as i64 + shift).rem_euclid(self.side as i64) as usize;
        idx - c * s + nc * s
    }

    /// Per-axis symbol table 4 sin^2(pi k / M).
    pub fn axis_symbol(&self) -> Vec<f64> {
        let m = self.side as f64;
        (0..self.side)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / m).sin();
                4.0 * s * s
            })
            .collect()
    }

    /// Lattice Laplacian symbol lambda(xi) at every Fourier index.
    pub fn lambda_table(&self) -> Vec<f64> {
        let s1 = self.axis_symbol();
        (0..self.sites())
            .into_par_iter()
            .map(|i| {
                let mut idx = i;
                let mut acc = 0.0;
                for _ in 0..self.d {
                    acc += s1[idx % self.side];
                    idx /= self.side;
                }
                acc
            })
            .collect()
    }
}

impl fmt::Display for TorusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} L={} N={} (side {})", self.d, self.l, self.n, self.side)
    }
}

/// Sign convention for the lattice Laplacian.
///
/// `MomentIdentity` is `(Δf)(x) = Σ_i (2f(x) − f(x+e_i) − f(x−e_i))`, for which
/// `Σ_x (Δq)_x x_1² = −2 q^(1)`. `Literal` is `−½ Σ_e ∇^{−e}∇^e`, the usual
/// negative semidefinite operator, for which the same sum is `+2 q^(1)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianSign {
    #[default]
    MomentIdentity,
    Literal,
}

impl LaplacianSign {
    /// Factor multiplying the standard (negative semidefinite) Laplacian.
    pub fn factor(self) -> f64 {
        match self {
            LaplacianSign::MomentIdentity => -1.0,
            LaplacianSign::Literal => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LaplacianSign::MomentIdentity => "moment_identity",
            LaplacianSign::Literal => "literal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "moment_identity" => Some(Self::MomentIdentity),
            "literal" => Some(Self::Literal),
            _ => None,
        }
    }
}

/// What to do with the zero Fourier mode when m² = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMode {
    /// Refuse to build a massless Green function.
    Forbid,
    /// Set the zero-mode symbol to 0.
    Drop,
}

/// A unit lattice direction: `±e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dir {
    pub axis: usize,
    pub positive: bool,
}

impl Dir {
    pub fn new(axis: usize, positive: bool) -> Self {
        Self { axis, positive }
    }

    /// Parse `+1`, `-3` etc (1-based axis).
    pub fn from_signed(e: i32, d: usize) -> Result<Self> {
        let a = e.unsigned_abs() as usize;
        if e == 0 || a > d {
            return Err(CoreError::BadDirection(e, d));
        }
        Ok(Self { axis: a - 1, positive: e > 0 })
    }

    pub fn step(self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }

    /// All 2d unit directions.
    pub fn all(d: usize) -> Vec<Dir> {
        (0..d).flat_map(|a| [Dir::new(a, true), Dir::new(a, false)]).collect()
    }
}

/// A real translation-invariant kernel q_{0,x} on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    spec: TorusSpec,
    values: Vec<f64>,
}

impl Kernel {
    pub fn zeros(spec: TorusSpec) -> Self {
        Self { spec, values: vec![0.0; spec.sites()] }
    }

    pub fn from_values(spec: TorusSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.sites() {
            return Err(CoreError::Format(format!(
                "expected {} values, got {}",
                spec.sites(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::Format(format!("non-finite kernel value {v}")));
        }
        Ok(Self { spec, values })
    }

    /// Delta function at the given (possibly negative) coordinates.
    pub fn delta(spec: TorusSpec, at: &[i64]) -> Self {
        let mut k = Self::zeros(spec);
        k.values[spec.index(at)] = 1.0;
        k
    }

    pub fn constant(spec: TorusSpec, c: f64) -> Self {
        Self { spec, values: vec![c; spec.sites()] }
    }

    /// Build from a function of centered coordinates.
    pub fn from_fn(spec: TorusSpec, f: impl Fn(&[i64]) -> f64 + Sync) -> Self {
        let values = (0..spec.sites())
            .into_par_iter()
            .map(|i| {
                let c: Vec<i64> = spec.coords(i).into_iter().map(|k| spec.centered(k)).collect();
                f(&c)
            })
            .collect();
        Self { spec, values }
    }

    /// Inverse transform of a real Fourier symbol given per Fourier index.
    pub fn from_symbol(spec: TorusSpec, symbol: impl Fn(usize) -> f64 + Sync) -> Self {
        let mut buf: Vec<Complex64> = (0..spec.sites())
            .into_par_iter()
            .map(|i| Complex64::new(symbol(i), 0.0))
            .collect();
        fft_nd(&mut buf, spec.side(), spec.d, true);
        let norm = 1.0 / spec.sites() as f64;
        let values = buf.into_par_iter().map(|c| c.re * norm).collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, coords: &[i64]) -> f64 {
        self.values[self.spec.index(coords)]
    }

    pub fn origin(&self) -> f64 {
        self.values[0]
    }

    fn check_same(&self, other: &Kernel) -> Result<()> {
        if self.spec != other.spec {
            return Err(CoreError::SpecMismatch(self.spec.to_string(), other.spec.to_string()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub fn add_assign(&mut self, other: &Kernel) -> Result<()> {
        self.check_same(other)?;
        self.values.par_iter_mut().zip(other.values.par_iter()).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Kernel {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Kernel {
        Kernel { spec: self.spec, values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Kernel) -> Result<Kernel> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    fn zip_with(&self, other: &Kernel, f: impl Fn(f64, f64) -> f64 + Sync) -> Kernel {
        let values =
            self.values.par_iter().zip(other.values.par_iter()).map(|(&a, &b)| f(a, b)).collect();
        Kernel { spec: self.spec, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.values)
    }

    /// Largest |q(x) − q(−x)| relative to max |q|.
    pub fn evenness_defect(&self) -> f64 {
        let spec = self.spec;
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..spec.sites())
            .into_par_iter()
            .map(|i| {
                let c: Vec<i64> = spec.coords(i).into_iter().map(|k| -(k as i64)).collect();
                (self.values[i] - self.values[spec.index(&c)]).abs()
            })
            .reduce(|| 0.0, f64::max);
        worst / scale
    }

    /// Largest deviation under randomly sampled lattice symmetries
    /// (coordinate permutations and reflections), relative to max |q|.
    pub fn symmetry_defect(&self, samples: usize, seed: u64) -> f64 {
        let spec = self.spec;
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let i = rng.gen_range(0..spec.sites());
            let c = spec.coords(i);
            let mut perm: Vec<usize> = (0..spec.d).collect();
            for a in (1..spec.d).rev() {
                let b = rng.gen_range(0..=a);
                perm.swap(a, b);
            }
            let image: Vec<i64> = perm
                .iter()
                .map(|&p| {
                    let v = c[p] as i64;
                    if rng.gen_bool(0.5) {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            worst = worst.max((self.values[i] - self.values[spec.index(&image)]).abs());
        }
        worst / scale
    }

    /// Forward transform (real part of the symbol; kernels are even).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> =
            self.values.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut buf, self.spec.side(), self.spec.d, false);
        buf
    }

    /// Σ_x q(x)² evaluated in Fourier space.
    pub fn spectral_square_sum(&self) -> f64 {
        let s = self.spectrum();
        s.par_iter().map(|c| c.norm_sqr()).sum::<f64>() / self.spec.sites() as f64
    }

    pub fn write_dump(&self, out: &mut impl Write, mass: f64) -> Result<()> {
        writeln!(out, "RFK1 {} {} {} {:e}", self.spec.d, self.spec.l, self.spec.n, mass)?;
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    /// Read a dump, returning the kernel and its recorded mass.
    pub fn read_dump(input: &mut impl BufRead) -> Result<(Kernel, f64)> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "RFK1" {
            return Err(CoreError::Format(format!("bad kernel header `{}`", header.trim())));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| CoreError::Format(format!("bad header field `{s}`")))
        };
        let spec = TorusSpec::new(num(parts[1])?, num(parts[2])?, num(parts[3])?)?;
        let mass: f64 =
            parts[4].parse().map_err(|_| CoreError::Format(format!("bad mass `{}`", parts[4])))?;
        let mut bytes = vec![0u8; spec.sites() * 8];
        input.read_exact(&mut bytes)?;
        let values =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok((Kernel::from_values(spec, values)?, mass))
    }
}

/// Metadata written next to a kernel dump.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DumpMeta {
    pub d: usize,
    pub l: usize,
    pub n: usize,
    pub side: usize,
    pub mass: f64,
    pub zero_mode: ZeroMode,
    pub laplacian_sign: LaplacianSign,
    pub label: String,
}

/// Compensated-free pairwise summation; keeps roundoff at O(log n).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 1024 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
    x + y
}

/// Green function of −Δ + m² on the torus.
pub fn green_kernel(spec: TorusSpec, m2: f64, zero_mode: ZeroMode) -> Result<Kernel> {
    if !(m2 >= 0.0) || !m2.is_finite() {
        return Err(CoreError::InvalidSpec(format!("mass {m2} must be finite and nonnegative")));
    }
    if m2 == 0.0 && zero_mode == ZeroMode::Forbid {
        return Err(CoreError::MasslessUndefined);
    }
    let lam = spec.lambda_table();
    Ok(Kernel::from_symbol(spec, |i| {
        if i == 0 && m2 == 0.0 {
            0.0
        } else {
            1.0 / (lam[i] + m2)
        }
    }))
}

/// (a * b)(x) = Σ_y a(y) b(x − y), by FFT.
pub fn convolve(a: &Kernel, b: &Kernel) -> Result<Kernel> {
    a.check_same(b)?;
    let spec = a.spec;
    let mut fa = a.spectrum();
    let fb = b.spectrum();
    fa.par_iter_mut().zip(fb.par_iter()).for_each(|(x, y)| *x *= y);
    fft_nd(&mut fa, spec.side(), spec.d, true);
    let norm = 1.0 / spec.sites() as f64;
    Ok(Kernel { spec, values: fa.into_par_iter().map(|c| c.re * norm).collect() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffOp {
    Grad(Dir),
    Laplacian,
}

/// Apply ∇^e or Δ (with the given sign convention) to a kernel.
pub fn apply_difference(k: &Kernel, op: DiffOp, sign: LaplacianSign) -> Result<Kernel> {
    let spec = k.spec;
    let v = &k.values;
    let values: Vec<f64> = match op {
        DiffOp::Grad(e) => {
            if e.axis >= spec.d {
                return Err(CoreError::BadDirection(e.axis as i32 + 1, spec.d));
            }
            (0..spec.sites())
                .into_par_iter()
                .map(|i| v[spec.shifted(i, e.axis, e.step())] - v[i])
                .collect()
        }
        DiffOp::Laplacian => {
            let f = sign.factor();
            (0..spec.sites())
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    for a in 0..spec.d {
                        acc += v[spec.shifted(i, a, 1)] + v[spec.shifted(i, a, -1)] - 2.0 * v[i];
                    }
                    f * acc
                })
                .collect()
        }
    };
    Ok(Kernel { spec, values })
}

/// ½ Σ_{e∈U} (∇^e k)² pointwise.
pub fn grad_square(k: &Kernel) -> Kernel {
    let spec = k.spec;
    let v = &k.values;
    let values = (0..spec.sites())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for a in 0..spec.d {
                let p = v[spec.shifted(i, a, 1)] - v[i];
                let m = v[spec.shifted(i, a, -1)] - v[i];
                acc += p * p + m * m;
            }
            0.5 * acc
        })
        .collect();
    Kernel { spec, values }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub qss: f64,
}

/// Σ_x x_axis² q(x) with centered coordinates.
pub fn second_moment(k: &Kernel, axis: usize) -> f64 {
    let spec = k.spec;
    let weights: Vec<f64> = (0..spec.side())
        .map(|c| {
            let x = spec.centered(c) as f64;
            x * x
        })
        .collect();
    let terms: Vec<f64> = k
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| weights[spec.coord(i, axis)] * v)
        .collect();
    pairwise_sum(&terms)
}

pub fn moments(k: &Kernel) -> Moments {
    let sq: Vec<f64> = k.values.par_iter().map(|v| v * v).collect();
    let cu: Vec<f64> = k.values.par_iter().map(|v| v * v * v).collect();
    Moments {
        q1: k.sum(),
        q2: pairwise_sum(&sq),
        q3: pairwise_sum(&cu),
        qss: second_moment(k, 0),
    }
}

//! Spectral-window decomposition of the torus Green function into scale slices.

use crate::error::{CoreError, Result};
use crate::lattice::{apply_difference, DiffOp, Dir, Kernel, LaplacianSign, TorusSpec, ZeroMode};
use crate::window::{WindowDesc, WindowProfile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    pub zero_mode: ZeroMode,
    pub sign: LaplacianSign,
    pub memory_budget: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            zero_mode: ZeroMode::Drop,
            sign: LaplacianSign::default(),
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Slices C_1..C_{N−1} and remainder C_{N,N} of (−Δ + m²)^{-1}.
#[derive(Clone, Debug)]
pub struct ScaleDecomposition {
    spec: TorusSpec,
    m2: f64,
    zero_mode: ZeroMode,
    sign: LaplacianSign,
    window: Option<WindowDesc>,
    slices: Vec<Kernel>,
    remainder: Kernel,
    min_symbol: Vec<f64>,
}

/// Bytes needed to build a decomposition of `spec`.
pub fn memory_estimate(spec: &TorusSpec) -> u64 {
    let sites = spec.sites() as u64;
    // N stored kernels, plus λ, the running CDF and one complex buffer.
    sites * 8 * spec.n as u64 + sites * (8 + 8 + 16)
}

pub fn build_decomposition(
    spec: TorusSpec,
    m2: f64,
    window: &dyn WindowProfile,
    opts: BuildOptions,
) -> Result<ScaleDecomposition> {
    if !(m2 >= 0.0) || !m2.is_finite() {
        return Err(CoreError::InvalidSpec(format!("mass {m2} must be finite and nonnegative")));
    }
    if m2 == 0.0 && opts.zero_mode == ZeroMode::Forbid {
        return Err(CoreError::MasslessUndefined);
    }
    let need = memory_estimate(&spec);
    if need > opts.memory_budget {
        return Err(CoreError::MemoryBudget { need, budget: opts.memory_budget });
    }
    let lam = spec.lambda_table();
    let ghat = |i: usize| {
        if i == 0 && m2 == 0.0 {
            0.0
        } else {
            1.0 / (lam[i] + m2)
        }
    };
    let l = spec.l as f64;
    let mut prev = vec![0.0; spec.sites()];
    let mut slices = Vec::with_capacity(spec.n.saturating_sub(1));
    let mut min_symbol = Vec::with_capacity(spec.n);
    for j in 1..spec.n {
        let scale = l.powi(j as i32);
        let next: Vec<f64> =
            lam.par_iter().map(|&la| window.cdf(scale * la.sqrt())).collect();
        let weight: Vec<f64> = next.par_iter().zip(prev.par_iter()).map(|(a, b)| a - b).collect();
        let min = (0..spec.sites())
            .into_par_iter()
            .map(|i| ghat(i) * weight[i])
            .reduce(|| f64::INFINITY, f64::min);
        min_symbol.push(min);
        let k = Kernel::from_symbol(spec, |i| ghat(i) * weight[i]);
        if k.max_abs() == 0.0 {
            log::warn!("slice {j} is empty: window band lies outside the resolvable frequencies");
        }
        slices.push(k);
        prev = next;
    }
    let min = (0..spec.sites())
        .into_par_iter()
        .map(|i| ghat(i) * (1.0 - prev[i]))
        .reduce(|| f64::INFINITY, f64::min);
    min_symbol.push(min);
    let remainder = Kernel::from_symbol(spec, |i| ghat(i) * (1.0 - prev[i]));
    Ok(ScaleDecomposition {
        spec,
        m2,
        zero_mode: opts.zero_mode,
        sign: opts.sign,
        window: Some(WindowDesc::of(window)),
        slices,
        remainder,
        min_symbol,
    })
}

impl ScaleDecomposition {
    /// Assemble a decomposition from given slices (for synthetic experiments).
    pub fn from_slices(
        spec: TorusSpec,
        m2: f64,
        slices: Vec<Kernel>,
        remainder: Kernel,
        sign: LaplacianSign,
    ) -> Result<Self> {
        if slices.len() + 1 != spec.n {
            return Err(CoreError::InvalidSpec(format!(
                "expected {} slices, got {}",
                spec.n - 1,
                slices.len()
            )));
        }
        for k in slices.iter().chain(std::iter::once(&remainder)) {
            if *k.spec() != spec {
                return Err(CoreError::SpecMismatch(spec.to_string(), k.spec().to_string()));
            }
        }
        let min_symbol = slices
            .iter()
            .chain(std::iter::once(&remainder))
            .map(|k| k.spectrum().iter().map(|c| c.re).fold(f64::INFINITY, f64::min))
            .collect();
        Ok(Self {
            spec,
            m2,
            zero_mode: ZeroMode::Drop,
            sign,
            window: None,
            slices,
            remainder,
            min_symbol,
        })
    }

    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn sign(&self) -> LaplacianSign {
        self.sign
    }

    pub fn zero_mode(&self) -> ZeroMode {
        self.zero_mode
    }

    pub fn window(&self) -> Option<&WindowDesc> {
        self.window.as_ref()
    }

    pub fn slices(&self) -> &[Kernel] {
        &self.slices
    }

    pub fn remainder(&self) -> &Kernel {
        &self.remainder
    }

    /// Minimum Fourier symbol of C_j (j = N for the remainder).
    pub fn min_symbol(&self, j: usize) -> Result<f64> {
        self.check_scale(j, 1, self.spec.n)?;
        Ok(self.min_symbol[j - 1])
    }

    fn check_scale(&self, j: usize, lo: usize, hi: usize) -> Result<()> {
        if j < lo || j > hi {
            return Err(CoreError::ScaleOutOfRange { j, lo, hi });
        }
        Ok(())
    }

    /// C_j for 1 ≤ j < N, C_{N,N} for j = N.
    pub fn slice(&self, j: usize) -> Result<&Kernel> {
        self.check_scale(j, 1, self.spec.n)?;
        Ok(if j == self.spec.n { &self.remainder } else { &self.slices[j - 1] })
    }

    /// w_j = C_1 + … + C_j for 0 ≤ j ≤ N−1, computed on demand.
    pub fn partial_sum(&self, j: usize) -> Result<Kernel> {
        self.check_scale(j, 0, self.spec.n - 1)?;
        let mut w = Kernel::zeros(self.spec);
        for k in &self.slices[..j] {
            w.add_assign(k)?;
        }
        Ok(w)
    }

    /// Σ_j C_j + C_{N,N}.
    pub fn reconstruct(&self) -> Kernel {
        let mut w = self.remainder.clone();
        for k in &self.slices {
            w.add_assign(k).expect("slices share the spec");
        }
        w
    }

    pub fn manifest(&self, files: &[String]) -> DecompManifest {
        let scales = (1..=self.spec.n)
            .map(|j| ScaleEntry {
                j,
                remainder: j == self.spec.n,
                file: files.get(j - 1).cloned().unwrap_or_default(),
                min_symbol: self.min_symbol[j - 1],
                peak: self.slice(j).map(|k| k.origin()).unwrap_or(f64::NAN),
            })
            .collect();
        DecompManifest {
            d: self.spec.d,
            l: self.spec.l,
            n: self.spec.n,
            side: self.spec.side(),
            mass: self.m2,
            zero_mode: self.zero_mode,
            zero_mode_note: if self.m2 == 0.0 {
                "xi = 0 mode removed: every kernel sums to 0 over the torus".to_string()
            } else {
                String::new()
            },
            laplacian_sign: self.sign,
            window: self.window.clone(),
            scales,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScaleEntry {
    pub j: usize,
    pub remainder: bool,
    pub file: String,
    pub min_symbol: f64,
    pub peak: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DecompManifest {
    pub d: usize,
    pub l: usize,
    pub n: usize,
    pub side: usize,
    pub mass: f64,
    pub zero_mode: ZeroMode,
    pub zero_mode_note: String,
    pub laplacian_sign: LaplacianSign,
    pub window: Option<WindowDesc>,
    pub scales: Vec<ScaleEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub j: usize,
    pub radius: f64,
    pub outside_max: f64,
    pub peak: f64,
    pub ratio: f64,
}

/// Largest |k(x)| over |x|∞ ≥ radius against |k(0)|.
pub fn range_profile_kernel(k: &Kernel, radius: f64) -> (f64, f64) {
    let spec = *k.spec();
    let outside = k
        .values()
        .par_iter()
        .enumerate()
        .filter(|(i, _)| {
            let mut r = 0i64;
            let mut idx = *i;
            for _ in 0..spec.d {
                r = r.max(spec.centered(idx % spec.side()).abs());
                idx /= spec.side();
            }
            r as f64 >= radius
        })
        .map(|(_, v)| v.abs())
        .reduce(|| 0.0, f64::max);
    (outside, k.origin().abs())
}

pub fn range_profile(dec: &ScaleDecomposition, j: usize) -> Result<RangeReport> {
    let k = dec.slice(j)?;
    let radius = 0.5 * (dec.spec.l as f64).powi(j as i32);
    let (outside_max, peak) = range_profile_kernel(k, radius);
    let ratio = if peak == 0.0 { 0.0 } else { outside_max / peak };
    Ok(RangeReport { j, radius, outside_max, peak, ratio })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EstimateRow {
    pub order: usize,
    /// Fitted constants for j = 1..N−1.
    pub fitted: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

/// Fitted constants |∇^α C_j|∞ (1+m²L^{2(j−1)})^k L^{(j−1)(2[φ]+|α|)},
/// with α a power of the forward difference along e_1, |α| ≤ p.
pub fn verify_estimates(dec: &ScaleDecomposition, p: usize, k: f64) -> Result<Vec<EstimateRow>> {
    if p > 2 {
        return Err(CoreError::InvalidSpec(format!("derivative order {p} above 2")));
    }
    let spec = dec.spec;
    let l = spec.l as f64;
    let dim_phi = (spec.d as f64 - 2.0) / 2.0;
    let e1 = DiffOp::Grad(Dir::new(0, true));
    let mut rows = Vec::new();
    for order in 0..=p {
        let mut fitted = Vec::new();
        for (idx, c) in dec.slices.iter().enumerate() {
            let j = idx + 1;
            let mut ker = c.clone();
            for _ in 0..order {
                ker = apply_difference(&ker, e1, dec.sign)?;
            }
            let jm1 = (j - 1) as f64;
            let mass = (1.0 + dec.m2 * l.powf(2.0 * jm1)).powf(k);
            fitted.push(ker.max_abs() * mass * l.powf(jm1 * (2.0 * dim_phi + order as f64)));
        }
        let max = fitted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
        rows.push(EstimateRow { order, fitted, max, min });
    }
    Ok(rows)
}

//! Window profiles ρ and the registry of built-in families.
//!
//! A window splits unit mass across scales: a Fourier mode with lattice
//! frequency u receives weight `R(L^j u) − R(L^{j−1} u)` in slice j, where R
//! is the cumulative distribution of ρ.

use crate::error::{CoreError, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;

pub type Params = IndexMap<String, f64>;

pub trait WindowProfile: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    /// Parameters sufficient to rebuild the profile through the registry.
    fn params(&self) -> Params;

    /// Closed support [t_min, t_max] of ρ.
    fn support(&self) -> (f64, f64);

    fn density(&self, t: f64) -> f64;

    /// R(t) = ∫_0^t ρ.
    fn cdf(&self, t: f64) -> f64;
}

/// Serializable description of a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDesc {
    pub family: String,
    pub params: Params,
}

impl WindowDesc {
    pub fn of(w: &dyn WindowProfile) -> Self {
        Self { family: w.family().to_string(), params: w.params() }
    }
}

type Factory = fn(&Params) -> Result<Box<dyn WindowProfile>>;

/// Name → factory map of window families.
#[derive(Clone)]
pub struct WindowRegistry {
    factories: IndexMap<&'static str, Factory>,
}

impl WindowRegistry {
    pub fn empty() -> Self {
        Self { factories: IndexMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("bump", |p| Ok(Box::new(BumpWindow::from_params(p, Axis::Log)?)));
        r.register("linear_bump", |p| Ok(Box::new(BumpWindow::from_params(p, Axis::Linear)?)));
        r
    }

    pub fn register(&mut self, name: &'static str, f: Factory) {
        self.factories.insert(name, f);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn create(&self, family: &str, params: &Params) -> Result<Box<dyn WindowProfile>> {
        let f = self
            .factories
            .get(family)
            .ok_or_else(|| CoreError::UnknownWindow(family.to_string()))?;
        f(params)
    }

    pub fn from_desc(&self, d: &WindowDesc) -> Result<Box<dyn WindowProfile>> {
        self.create(&d.family, &d.params)
    }
}

impl Default for WindowRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl fmt::Debug for WindowRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

pub const DEFAULT_LO: f64 = 2.5;
pub const DEFAULT_HI: f64 = 20.0;
pub const DEFAULT_GRID: usize = 4096;

/// The default window: a smooth bump in log t on [2.5, 20].
pub fn default_window() -> Box<dyn WindowProfile> {
    Box::new(BumpWindow::new(DEFAULT_LO, DEFAULT_HI, DEFAULT_GRID, Axis::Log).unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Log,
    Linear,
}

/// exp(−1/(1−x²)) bump on a variable v that is either t or log t.
#[derive(Clone, Debug)]
pub struct BumpWindow {
    lo: f64,
    hi: f64,
    axis: Axis,
    grid: usize,
    // CDF and normalised density in x ∈ [−1, 1] at grid nodes.
    cdf: Vec<f64>,
    dens: Vec<f64>,
    norm: f64,
}

fn bump(x: f64) -> f64 {
    if x <= -1.0 || x >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

impl BumpWindow {
    pub fn new(lo: f64, hi: f64, grid: usize, axis: Axis) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CoreError::InvalidWindow(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
        }
        if grid < 16 {
            return Err(CoreError::InvalidWindow(format!("grid {grid} below 16")));
        }
        let h = 2.0 / grid as f64;
        let node = |i: usize| -1.0 + h * i as f64;
        let mut cdf = Vec::with_capacity(grid + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..grid {
            let (a, b) = (node(i), node(i + 1));
            acc += h / 6.0 * (bump(a) + 4.0 * bump(0.5 * (a + b)) + bump(b));
            cdf.push(acc);
        }
        let norm = acc;
        for c in &mut cdf {
            *c /= norm;
        }
        let dens = (0..=grid).map(|i| bump(node(i)) / norm).collect();
        Ok(Self { lo, hi, axis, grid, cdf, dens, norm })
    }

    fn from_params(p: &Params, axis: Axis) -> Result<Self> {
        for k in p.keys() {
            if !matches!(k.as_str(), "lo" | "hi" | "grid") {
                return Err(CoreError::InvalidWindow(format!("unknown parameter `{k}`")));
            }
        }
        let lo = p.get("lo").copied().unwrap_or(DEFAULT_LO);
        let hi = p.get("hi").copied().unwrap_or(DEFAULT_HI);
        let grid = p.get("grid").copied().unwrap_or(DEFAULT_GRID as f64);
        if grid.fract() != 0.0 || grid < 0.0 {
            return Err(CoreError::InvalidWindow(format!("grid must be an integer, got {grid}")));
        }
        Self::new(lo, hi, grid as usize, axis)
    }

    fn var(&self, t: f64) -> f64 {
        match self.axis {
            Axis::Log => t.ln(),
            Axis::Linear => t,
        }
    }

    /// Map t to x ∈ [−1, 1] and return dx/dt as well.
    fn to_x(&self, t: f64) -> (f64, f64) {
        let (a, b) = (self.var(self.lo), self.var(self.hi));
        let x = (2.0 * self.var(t) - a - b) / (b - a);
        let dvdt = match self.axis {
            Axis::Log => 1.0 / t,
            Axis::Linear => 1.0,
        };
        (x, 2.0 * dvdt / (b - a))
    }

    /// Raw normalisation constant of the bump on [−1, 1].
    pub fn bump_mass(&self) -> f64 {
        self.norm
    }
}

impl WindowProfile for BumpWindow {
    fn family(&self) -> &'static str {
        match self.axis {
            Axis::Log => "bump",
            Axis::Linear => "linear_bump",
        }
    }

    fn params(&self) -> Params {
        let mut p = Params::new();
        p.insert("lo".into(), self.lo);
        p.insert("hi".into(), self.hi);
        p.insert("grid".into(), self.grid as f64);
        p
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn density(&self, t: f64) -> f64 {
        if t <= self.lo || t >= self.hi {
            return 0.0;
        }
        let (x, dxdt) = self.to_x(t);
        bump(x) / self.norm * dxdt
    }

    fn cdf(&self, t: f64) -> f64 {
        if t <= self.lo {
            return 0.0;
        }
        if t >= self.hi {
            return 1.0;
        }
        let (x, _) = self.to_x(t);
        let h = 2.0 / self.grid as f64;
        let pos = ((x + 1.0) / h).clamp(0.0, self.grid as f64 - 1e-12);
        let i = pos.floor() as usize;
        let s = pos - i as f64;
        // Cubic Hermite with the exact density as slope.
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.dens[i] * h, self.dens[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        ((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1)
            .clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_roundtrip() {
        let r = WindowRegistry::builtin();
        assert_eq!(r.names(), vec!["bump", "linear_bump"]);
        let w = default_window();
        let back = r.from_desc(&WindowDesc::of(w.as_ref())).unwrap();
        assert_eq!(back.params(), w.params());
        assert!(matches!(r.create("gauss", &Params::new()), Err(CoreError::UnknownWindow(_))));
    }

    #[test]
    fn cdf_endpoints_and_monotone() {
        for axis in [Axis::Log, Axis::Linear] {
            let w = BumpWindow::new(1.5, 9.0, 512, axis).unwrap();
            assert_eq!(w.cdf(1.5), 0.0);
            assert_eq!(w.cdf(9.0), 1.0);
            let mut prev = 0.0;
            for i in 0..=1000 {
                let c = w.cdf(1.5 + 7.5 * i as f64 / 1000.0);
                assert!(c >= prev - 1e-13, "{axis:?} {i} {c} {prev}");
                prev = c;
            }
        }
    }

    #[test]
    fn bad_params() {
        assert!(BumpWindow::new(0.0, 2.0, 64, Axis::Log).is_err());
        assert!(BumpWindow::new(3.0, 2.0, 64, Axis::Log).is_err());
        let mut p = Params::new();
        p.insert("width".into(), 1.0);
        assert!(WindowRegistry::builtin().create("bump", &p).is_err());
    }
}

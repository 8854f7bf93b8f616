//! Coupling-constant maps, the change of variables T_j and trajectory iteration.

use crate::coeffs::{coefficient_table, raw_moment_table, FlowCoefficients, RawMoments};
use crate::decomp::ScaleDecomposition;
use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    pub g: f64,
    pub nu: f64,
    pub y: f64,
    pub z: f64,
    pub lam_a: f64,
    pub lam_b: f64,
    pub q_a: f64,
    pub q_b: f64,
}

impl CouplingVector {
    pub fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("g", self.g),
            ("nu", self.nu),
            ("y", self.y),
            ("z", self.z),
            ("lam_a", self.lam_a),
            ("lam_b", self.lam_b),
            ("q_a", self.q_a),
            ("q_b", self.q_b),
        ]
    }

    pub fn bulk(&self, j: usize, l: usize) -> BulkVector {
        BulkVector { g: self.g, mu: ((l * l) as f64).powi(j as i32) * self.nu, z0: self.y + self.z }
    }
}

/// (g, μ = L^{2j}ν, z⁽⁰⁾ = y + z).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BulkVector {
    pub g: f64,
    pub mu: f64,
    pub z0: f64,
}

impl BulkVector {
    pub fn scale(&self, s: f64) -> Self {
        Self { g: s * self.g, mu: s * self.mu, z0: s * self.z0 }
    }

    pub fn norm(&self) -> f64 {
        (self.g * self.g + self.mu * self.mu + self.z0 * self.z0).sqrt()
    }
}

/// (g, z, μ) in transformed coordinates: ḡ/z̄/μ̄ or ǧ/ž/μ̌.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformedVector {
    pub g: f64,
    pub z: f64,
    pub mu: f64,
}

pub type CheckedVector = TransformedVector;

impl TransformedVector {
    pub fn sub(&self, o: &Self) -> Self {
        Self { g: self.g - o.g, z: self.z - o.z, mu: self.mu - o.mu }
    }

    pub fn max_abs(&self) -> f64 {
        self.g.abs().max(self.z.abs()).max(self.mu.abs())
    }
}

/// Normalised coefficients at scale j together with w̄ at j and j+1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BulkCoefficients {
    pub j: usize,
    pub l: usize,
    pub beta: f64,
    pub theta: f64,
    pub eta: f64,
    pub xi: f64,
    pub omega: f64,
    pub pi: f64,
    pub wbar1: f64,
    pub wbarss: f64,
    pub wbar1_next: f64,
    pub wbarss_next: f64,
}

impl BulkCoefficients {
    pub fn new(fc: &FlowCoefficients, next: &RawMoments, l: usize) -> Self {
        let l2 = (l * l) as f64;
        let k = (fc.j + 1) as i32;
        Self {
            j: fc.j,
            l,
            beta: fc.beta,
            theta: fc.theta,
            eta: fc.eta,
            xi: fc.xi,
            omega: fc.omega,
            pi: fc.pi,
            wbar1: fc.wbar1,
            wbarss: fc.wbarss,
            wbar1_next: l2.powi(-k) * next.w1,
            wbarss_next: l2.powi(-2 * k) * next.wss,
        }
    }

    fn l2(&self) -> f64 {
        (self.l * self.l) as f64
    }
}

/// One step of the full second-order map at scale j.
pub fn phi_pt(
    v: &CouplingVector,
    fc: &FlowCoefficients,
    raw: &RawMoments,
    next: &RawMoments,
    j_ab: usize,
) -> CouplingVector {
    let CouplingVector { g, nu, y, z, .. } = *v;
    let nup = nu + fc.etap * g;
    let d_nu_w1 = nup * next.w1 - nu * raw.w1;
    let d_nu2_w1 = nup * nup * next.w1 - nu * nu * raw.w1;
    let d_nu_w2ss = nup * next.w2ss - nu * raw.w2ss;
    let d_nu2_wss = nup * nup * next.wss - nu * nu * raw.wss;

    let g_pt = g - fc.beta * g * g - 4.0 * g * d_nu_w1;
    let nu_pt = nu + fc.etap * (g + 4.0 * g * nu * raw.w1)
        - fc.xip * g * g
        - 0.25 * fc.beta * g * nu
        - fc.pip * g * (z + y)
        - d_nu2_w1;
    let y_pt = y + fc.sigma * g * z - fc.zeta * g * y - g * d_nu_w2ss;
    let z_pt = z - fc.theta * g * g - 0.5 * d_nu2_wss - 2.0 * z * d_nu_w1 - (y_pt - y);
    let lam = |l: f64| if fc.j + 1 < j_ab { (1.0 - d_nu_w1) * l } else { l };
    let dq = v.lam_a * v.lam_b * raw.cab;
    CouplingVector {
        g: g_pt,
        nu: nu_pt,
        y: y_pt,
        z: z_pt,
        lam_a: lam(v.lam_a),
        lam_b: lam(v.lam_b),
        q_a: v.q_a + dq,
        q_b: v.q_b + dq,
    }
}

/// δ[μw̄^(1)] with μ₊ = L²μ + ηg.
pub fn delta_mu_wbar1(b: &BulkVector, c: &BulkCoefficients) -> f64 {
    let mup = c.l2() * b.mu + c.eta * b.g;
    mup * c.wbar1_next - b.mu * c.wbar1
}

/// The bulk map φ_pt⁽⁰⁾ on (g, μ, z⁽⁰⁾).
pub fn phi_pt_bulk(b: &BulkVector, c: &BulkCoefficients) -> BulkVector {
    let BulkVector { g, mu, z0 } = *b;
    let mup = c.l2() * mu + c.eta * g;
    let d_mu_w1 = mup * c.wbar1_next - mu * c.wbar1;
    let d_mu2_w1 = mup * mup * c.wbar1_next - mu * mu * c.wbar1;
    let d_mu2_wss = mup * mup * c.wbarss_next - mu * mu * c.wbarss;
    BulkVector {
        g: g - c.beta * g * g - 4.0 * g * d_mu_w1,
        z0: z0 - c.theta * g * g - 0.5 * d_mu2_wss - 2.0 * z0 * d_mu_w1,
        mu: c.l2() * mu + c.eta * (g + 4.0 * g * mu * c.wbar1)
            - c.xi * g * g
            - c.omega * g * mu
            - c.pi * g * z0
            - d_mu2_w1,
    }
}

/// The transformed map φ̄_j.
pub fn phibar(t: &TransformedVector, c: &BulkCoefficients) -> TransformedVector {
    let TransformedVector { g, z, mu } = *t;
    TransformedVector {
        g: g - c.beta * g * g,
        z: z - c.theta * g * g,
        mu: c.l2() * mu + c.eta * g - c.xi * g * g - c.omega * g * mu - c.pi * g * z,
    }
}

fn t_with(b: &BulkVector, w1: f64, wss: f64) -> CheckedVector {
    let BulkVector { g, mu, z0 } = *b;
    CheckedVector {
        g: g + 4.0 * g * mu * w1,
        z: z0 + 2.0 * z0 * mu * w1 + 0.5 * mu * mu * wss,
        mu: mu + mu * mu * w1,
    }
}

/// T_j.
pub fn transform_t(b: &BulkVector, c: &BulkCoefficients) -> CheckedVector {
    t_with(b, c.wbar1, c.wbarss)
}

/// T_{j+1}, using w̄ at j+1.
pub fn transform_t_next(b: &BulkVector, c: &BulkCoefficients) -> CheckedVector {
    t_with(b, c.wbar1_next, c.wbarss_next)
}

/// T_j^{-1} in closed form, taking the root μ = μ̌ + O(μ̌²).
pub fn invert_t(v: &CheckedVector, c: &BulkCoefficients) -> Result<BulkVector> {
    let w1 = c.wbar1;
    let mu = if w1 == 0.0 {
        v.mu
    } else {
        let disc = 1.0 + 4.0 * w1 * v.mu;
        if !(disc > 0.0) {
            return Err(CoreError::OutsideBall(format!("discriminant {disc:e}")));
        }
        2.0 * v.mu / (1.0 + disc.sqrt())
    };
    let dg = 1.0 + 4.0 * mu * w1;
    let dz = 1.0 + 2.0 * mu * w1;
    if dg.abs() < 1e-8 || dz.abs() < 1e-8 {
        return Err(CoreError::OutsideBall(format!("denominator {:e}", dg.abs().min(dz.abs()))));
    }
    Ok(BulkVector { g: v.g / dg, mu, z0: (v.z - 0.5 * mu * mu * c.wbarss) / dz })
}

/// T_{j+1}(φ_pt⁽⁰⁾(B)) − φ̄_j(T_j(B)).
pub fn conjugacy_residual(b: &BulkVector, c: &BulkCoefficients) -> TransformedVector {
    let lhs = transform_t_next(&phi_pt_bulk(b, c), c);
    let rhs = phibar(&transform_t(b, c), c);
    lhs.sub(&rhs)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub j: usize,
    pub v: CouplingVector,
    pub bulk: BulkVector,
    pub transformed: TransformedVector,
    pub residual: TransformedVector,
}

impl TrajectoryRow {
    pub const COLUMNS: [&'static str; 17] = [
        "j", "g", "nu", "y", "z", "lam_a", "lam_b", "q_a", "q_b", "mu", "z0", "gbar", "zbar",
        "mubar", "residual_g", "residual_z", "residual_mu",
    ];

    pub fn values(&self) -> [f64; 16] {
        let v = &self.v;
        [
            v.g,
            v.nu,
            v.y,
            v.z,
            v.lam_a,
            v.lam_b,
            v.q_a,
            v.q_b,
            self.bulk.mu,
            self.bulk.z0,
            self.transformed.g,
            self.transformed.z,
            self.transformed.mu,
            self.residual.g,
            self.residual.z,
            self.residual.mu,
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub steps: usize,
    pub j_ab: usize,
    /// ḡ_j strictly decreasing along the recorded rows.
    pub gbar_decreasing: bool,
    /// ½ḡ_{j+1} ≤ ḡ_j ≤ 2ḡ_{j+1} at every step.
    pub comparable: bool,
    pub comparability_failures: Vec<usize>,
    /// max over steps of |z⁽⁰⁾ from the bulk map − (y_pt + z_pt)|.
    pub bulk_vs_full_z0: f64,
    pub bulk_vs_full_mu: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub summary: FlowSummary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub divergence: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { divergence: 1e3 }
    }
}

/// Coefficient tables for a decomposition: raw moments for j = 0..=N and
/// flow coefficients for j = 0..N−1.
#[derive(Clone, Debug)]
pub struct FlowTables {
    pub l: usize,
    pub raw: Vec<RawMoments>,
    pub fc: Vec<FlowCoefficients>,
}

impl FlowTables {
    pub fn build(dec: &ScaleDecomposition, ab: &[i64]) -> Result<Self> {
        let raw = raw_moment_table(dec, ab)?;
        let fc = coefficient_table(&raw, dec.spec().l);
        Ok(Self { l: dec.spec().l, raw, fc })
    }

    pub fn bulk(&self, j: usize) -> BulkCoefficients {
        BulkCoefficients::new(&self.fc[j], &self.raw[j + 1], self.l)
    }

    /// Number of steps available (j = 0..steps−1).
    pub fn steps(&self) -> usize {
        self.fc.len()
    }
}

/// Iterate φ_pt for j in `range`, recording the state at each scale.
pub fn iterate_flow(
    v0: &CouplingVector,
    tables: &FlowTables,
    range: std::ops::Range<usize>,
    j_ab: usize,
    opts: FlowOptions,
) -> Result<Trajectory> {
    if range.end > tables.steps() {
        return Err(CoreError::ScaleOutOfRange { j: range.end, lo: 0, hi: tables.steps() });
    }
    let l = tables.l;
    let mut v = *v0;
    let mut rows = Vec::new();
    let mut summary = FlowSummary { j_ab, ..Default::default() };
    let record = |j: usize, v: &CouplingVector, next: Option<&BulkCoefficients>| {
        let bulk = v.bulk(j, l);
        let (transformed, residual) = match next {
            Some(c) => (transform_t(&bulk, c), conjugacy_residual(&bulk, c)),
            None => {
                // Final scale: T_j uses w̄_j from the previous step's "next".
                let c = tables.bulk(j - 1);
                (transform_t_next(&bulk, &c), TransformedVector::default())
            }
        };
        TrajectoryRow { j, v: *v, bulk, transformed, residual }
    };
    for j in range.clone() {
        let c = tables.bulk(j);
        rows.push(record(j, &v, Some(&c)));
        let bulk_next = phi_pt_bulk(&v.bulk(j, l), &c);
        v = phi_pt(&v, &tables.fc[j], &tables.raw[j], &tables.raw[j + 1], j_ab);
        let full_next = v.bulk(j + 1, l);
        summary.bulk_vs_full_z0 = summary.bulk_vs_full_z0.max((bulk_next.z0 - full_next.z0).abs());
        summary.bulk_vs_full_mu = summary.bulk_vs_full_mu.max((bulk_next.mu - full_next.mu).abs());
        for (name, val) in v.fields() {
            if !val.is_finite() || val.abs() > opts.divergence {
                return Err(CoreError::Divergence { j: j + 1, coord: name, value: val });
            }
        }
        summary.steps += 1;
    }
    if range.end > range.start && range.end > 0 {
        rows.push(record(range.end, &v, None));
    }
    summary.gbar_decreasing = rows.windows(2).all(|p| p[1].transformed.g < p[0].transformed.g);
    for p in rows.windows(2) {
        let (a, b) = (p[0].transformed.g, p[1].transformed.g);
        if !(0.5 * b <= a && a <= 2.0 * b) {
            summary.comparability_failures.push(p[0].j);
        }
    }
    summary.comparable = summary.comparability_failures.is_empty();
    Ok(Trajectory { rows, summary })
}

/// Iterate ḡ ↦ ḡ − βḡ² with a fixed β.
pub fn constant_beta_orbit(g0: f64, beta: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut g = g0;
    out.push(g);
    for _ in 0..steps {
        g -= beta * g * g;
        out.push(g);
    }
    out
}

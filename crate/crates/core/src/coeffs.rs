//! Flow-equation coefficients and scale diagnostics.

use crate::decomp::ScaleDecomposition;
use crate::error::{CoreError, Result};
use crate::lattice::{
    apply_difference, grad_square, moments, pairwise_sum, second_moment, DiffOp, Kernel,
    TorusSpec, ZeroMode,
};
use crate::window::WindowProfile;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Moments of w_j together with C_{j+1}(0) and C_{j+1}(a−b).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawMoments {
    pub j: usize,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub wss: f64,
    pub w2ss: f64,
    pub w3ss: f64,
    pub wdw1: f64,
    pub wdwss: f64,
    pub gwss: f64,
    pub c00: f64,
    pub cab: f64,
}

fn w_moments(w: &Kernel, dec: &ScaleDecomposition, j: usize) -> Result<RawMoments> {
    let m = moments(w);
    let sq = w.mul(w)?;
    let cu = sq.mul(w)?;
    let lap = apply_difference(w, DiffOp::Laplacian, dec.sign())?;
    let wdw = w.mul(&lap)?;
    let gw = grad_square(w);
    Ok(RawMoments {
        j,
        w1: m.q1,
        w2: m.q2,
        w3: m.q3,
        wss: m.qss,
        w2ss: second_moment(&sq, 0),
        w3ss: second_moment(&cu, 0),
        wdw1: wdw.sum(),
        wdwss: second_moment(&wdw, 0),
        gwss: second_moment(&gw, 0),
        c00: 0.0,
        cab: 0.0,
    })
}

/// The (a, b) displacement used for C_ab: r along the first axis.
pub fn ab_offset(d: usize, r: i64) -> Vec<i64> {
    let mut v = vec![0; d];
    v[0] = r;
    v
}

/// Coalescence scale ⌊log_L(2|a−b|)⌋ for |a−b| ≥ 1.
pub fn coalescence_scale(l: usize, dist: f64) -> usize {
    let target = 2.0 * dist;
    let mut k = 0;
    let mut p = l as f64;
    while p <= target * (1.0 + 1e-12) {
        k += 1;
        p *= l as f64;
    }
    k
}

/// Raw moments at scale j, 0 ≤ j ≤ N. C_{j+1} is C_{N,N} when j = N−1, and
/// zero when j = N.
pub fn raw_moments(dec: &ScaleDecomposition, j: usize, ab: &[i64]) -> Result<RawMoments> {
    let n = dec.spec().n;
    if j > n {
        return Err(CoreError::ScaleOutOfRange { j, lo: 0, hi: n });
    }
    let w = if j == n {
        dec.partial_sum(n - 1)?.add(dec.remainder())?
    } else {
        dec.partial_sum(j)?
    };
    let mut r = w_moments(&w, dec, j)?;
    if j < n {
        let c = dec.slice(j + 1)?;
        r.c00 = c.origin();
        r.cab = c.at(ab);
    }
    Ok(r)
}

/// Raw moments for every j = 0..=N, accumulating w incrementally.
pub fn raw_moment_table(dec: &ScaleDecomposition, ab: &[i64]) -> Result<Vec<RawMoments>> {
    let n = dec.spec().n;
    let mut w = Kernel::zeros(*dec.spec());
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut r = w_moments(&w, dec, j)?;
        if j < n {
            let c = dec.slice(j + 1)?;
            r.c00 = c.origin();
            r.cab = c.at(ab);
            w.add_assign(c)?;
        }
        out.push(r);
    }
    Ok(out)
}

/// Coefficients at scale j, with their normalised forms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowCoefficients {
    pub j: usize,
    pub beta: f64,
    pub theta: f64,
    pub etap: f64,
    pub xip: f64,
    pub pip: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub d_w2: f64,
    pub d_w3: f64,
    pub d_w3ss: f64,
    pub d_wdw1: f64,
    pub d_wdwss: f64,
    pub d_gwss: f64,
    pub d_w2ss: f64,
    pub omega: f64,
    pub eta: f64,
    pub xi: f64,
    pub pi: f64,
    pub wbar1: f64,
    pub wbarss: f64,
}

/// Coefficients at scale `m.j` from the moments of w_j and w_{j+1}.
pub fn greek_coefficients(m: &RawMoments, next: &RawMoments) -> FlowCoefficients {
    let d_w2 = next.w2 - m.w2;
    let d_w3 = next.w3 - m.w3;
    let beta = 8.0 * d_w2;
    let etap = 2.0 * m.c00;
    FlowCoefficients {
        j: m.j,
        beta,
        theta: 2.0 * (next.w3ss - m.w3ss),
        etap,
        xip: 4.0 * (d_w3 - 3.0 * m.w2 * m.c00) + 0.25 * beta * etap,
        pip: 2.0 * (next.wdw1 - m.wdw1),
        sigma: next.wdwss - m.wdwss,
        zeta: next.gwss - m.gwss,
        d_w2,
        d_w3,
        d_w3ss: next.w3ss - m.w3ss,
        d_wdw1: next.wdw1 - m.wdw1,
        d_wdwss: next.wdwss - m.wdwss,
        d_gwss: next.gwss - m.gwss,
        d_w2ss: next.w2ss - m.w2ss,
        ..Default::default()
    }
}

/// Fill in ω, η, ξ, π, w̄^(1), w̄^(**).
pub fn normalize(fc: &mut FlowCoefficients, m: &RawMoments, l: usize) {
    let l2 = (l * l) as f64;
    let j = fc.j as i32;
    let up = l2.powi(j + 1);
    fc.omega = l2 * 0.25 * fc.beta;
    fc.eta = up * fc.etap;
    fc.xi = up * fc.xip;
    fc.pi = up * fc.pip;
    fc.wbar1 = l2.powi(-j) * m.w1;
    fc.wbarss = l2.powi(-2 * j) * m.wss;
}

/// Normalised coefficients for j = 0..N−1 from a raw table covering 0..=N.
pub fn coefficient_table(raw: &[RawMoments], l: usize) -> Vec<FlowCoefficients> {
    raw.windows(2)
        .map(|p| {
            let mut fc = greek_coefficients(&p[0], &p[1]);
            normalize(&mut fc, &p[0], l);
            fc
        })
        .collect()
}

/// A scale index that may be infinite.
pub type MaybeScale = Option<i64>;

/// ⌊log_{L²} m^{−2}⌋, or None (∞) for m² = 0.
pub fn mass_scale(m2: f64, l: usize) -> MaybeScale {
    if m2 == 0.0 {
        return None;
    }
    let l2 = (l * l) as f64;
    let mut k = (1.0 / m2).ln().div_euclid(l2.ln()) as i64;
    // Correct for rounding at exact powers.
    while m2 * l2.powi((k + 1) as i32) <= 1.0 + 1e-12 {
        k += 1;
    }
    while m2 * l2.powi(k as i32) > 1.0 + 1e-12 {
        k -= 1;
    }
    Some(k)
}

/// Least k ≥ 0 with |β_j| ≤ Ω^{−(j−k)} ‖β‖∞ for all j. `betas[i]` is β at
/// scale `j0 + i`; ‖β‖∞ is taken over the supplied range.
pub fn omega_scale(betas: &[f64], j0: usize, omega: f64) -> MaybeScale {
    if betas.is_empty() {
        return None;
    }
    let norm = betas.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let last = j0 + betas.len() - 1;
    (0..=last as i64).find(|&k| {
        betas.iter().enumerate().all(|(i, b)| {
            let j = (j0 + i) as i64;
            b.abs() <= omega.powi(-(j - k) as i32) * norm * (1.0 + 1e-12)
        })
    })
}

pub fn scales(m2: f64, l: usize, betas: &[f64], j0: usize, omega: f64) -> (MaybeScale, MaybeScale) {
    (mass_scale(m2, l), omega_scale(betas, j0, omega))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AssumptionReport {
    pub j_omega: MaybeScale,
    pub a1_threshold: f64,
    pub a1_exceptions: Vec<usize>,
    pub a2: IndexMap<String, f64>,
}

/// (A1): scales j ≤ j_Ω with β_j < c. (A2): max_j |γ_j| Ω^{(j−j_Ω)+}.
pub fn check_assumptions(fc: &[FlowCoefficients], omega: f64, c: f64) -> AssumptionReport {
    let j0 = fc.first().map(|f| f.j).unwrap_or(0);
    let betas: Vec<f64> = fc.iter().map(|f| f.beta).collect();
    let j_omega = omega_scale(&betas, j0, omega);
    let below = |j: usize| j_omega.map_or(true, |k| j as i64 <= k);
    let a1_exceptions = fc.iter().filter(|f| below(f.j) && f.beta < c).map(|f| f.j).collect();
    let weight = |j: usize| {
        let excess = j_omega.map_or(0, |k| (j as i64 - k).max(0));
        omega.powi(excess as i32)
    };
    let mut a2 = IndexMap::new();
    let cols: [(&str, fn(&FlowCoefficients) -> f64); 5] = [
        ("theta", |f| f.theta),
        ("eta", |f| f.eta),
        ("xi", |f| f.xi),
        ("omega", |f| f.omega),
        ("pi", |f| f.pi),
    ];
    for (name, get) in cols {
        let v = fc.iter().map(|f| get(f).abs() * weight(f.j)).fold(0.0, f64::max);
        a2.insert(name.to_string(), v);
    }
    AssumptionReport { j_omega, a1_threshold: c, a1_exceptions, a2 }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BetaLimit {
    pub l: usize,
    pub betas: Vec<f64>,
    pub extrapolated: f64,
    pub reference: f64,
}

/// ln L / π².
pub fn beta_reference(l: usize) -> f64 {
    (l as f64).ln() / (std::f64::consts::PI * std::f64::consts::PI)
}

/// Scales 1..=N−2, where both w_j and w_{j+1} are built from regular slices.
pub fn usable_scales(n: usize) -> std::ops::RangeInclusive<usize> {
    1..=n.saturating_sub(2)
}

/// β_j over the usable scales and a Richardson estimate assuming L^{−2j}
/// corrections.
pub fn beta_limit(dec: &ScaleDecomposition) -> Result<BetaLimit> {
    if dec.m2() != 0.0 {
        return Err(CoreError::NotMassless(dec.m2()));
    }
    let spec = dec.spec();
    let usable = usable_scales(spec.n);
    let count = usable.clone().count();
    if count < 3 {
        return Err(CoreError::TooFewScales(count));
    }
    let raw = raw_moment_table(dec, &ab_offset(spec.d, 0))?;
    let betas: Vec<f64> = usable.map(|j| 8.0 * (raw[j + 1].w2 - raw[j].w2)).collect();
    Ok(BetaLimit {
        l: spec.l,
        extrapolated: richardson(&betas, spec.l),
        betas,
        reference: beta_reference(spec.l),
    })
}

/// (L² β_J − β_{J−1}) / (L² − 1) from the last two entries.
pub fn richardson(seq: &[f64], l: usize) -> f64 {
    let n = seq.len();
    let r = (l * l) as f64;
    (r * seq[n - 1] - seq[n - 2]) / (r - 1.0)
}

/// Rescaled sequences whose boundedness in j is asserted by the coefficient
/// bounds: β, θ, σ, ζ, η′L^{2j}, π′L^{2j}, ξ′L^{2j}, w^{(1)}L^{−2j},
/// w^{(**)}L^{−4j}, (w²)^{(**)}L^{−2j}.
pub fn bound_profiles(
    fc: &[FlowCoefficients],
    raw: &[RawMoments],
    l: usize,
) -> IndexMap<&'static str, Vec<f64>> {
    let l2 = (l * l) as f64;
    let mut out: IndexMap<&'static str, Vec<f64>> = IndexMap::new();
    let mut push = |k: &'static str, v: f64| out.entry(k).or_default().push(v);
    for f in fc {
        let r = raw.iter().find(|r| r.j == f.j).copied().unwrap_or_default();
        let up = l2.powi(f.j as i32);
        push("beta", f.beta);
        push("theta", f.theta);
        push("sigma", f.sigma);
        push("zeta", f.zeta);
        push("etap_scaled", f.etap * up);
        push("pip_scaled", f.pip * up);
        push("xip_scaled", f.xip * up);
        push("w1_scaled", r.w1 / up);
        push("wss_scaled", r.wss / (up * up));
        push("w2ss_scaled", r.w2ss / up);
    }
    out
}

/// Magnitude below which a coefficient sequence counts as identically zero.
pub const ZERO_SEQUENCE: f64 = 1e-12;

/// max |v| ≤ factor · median |v|. A sequence that vanishes to roundoff is
/// bounded.
pub fn bounded_by_median(v: &[f64], factor: f64) -> bool {
    if v.iter().all(|x| x.abs() <= ZERO_SEQUENCE) {
        return true;
    }
    let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = a.len();
    let median = if n % 2 == 1 { a[n / 2] } else { 0.5 * (a[n / 2 - 1] + a[n / 2]) };
    a[n - 1] <= factor * median
}

/// β_j for j = 0..N−1 from Parseval sums of the partial-sum symbols,
/// without building real-space kernels. w_N is the full Green function.
pub fn beta_sequence_spectral(
    spec: TorusSpec,
    m2: f64,
    window: &dyn WindowProfile,
    zero_mode: ZeroMode,
) -> Result<Vec<f64>> {
    if m2 == 0.0 && zero_mode == ZeroMode::Forbid {
        return Err(CoreError::MasslessUndefined);
    }
    let lam = spec.lambda_table();
    let l = spec.l as f64;
    let norm = spec.sites() as f64;
    let mut w2 = vec![0.0];
    for j in 1..=spec.n {
        let scale = l.powi(j as i32);
        let terms: Vec<f64> = lam
            .par_iter()
            .enumerate()
            .map(|(i, &la)| {
                if i == 0 && m2 == 0.0 {
                    return 0.0;
                }
                let r = if j == spec.n { 1.0 } else { window.cdf(scale * la.sqrt()) };
                let s = r / (la + m2);
                s * s
            })
            .collect();
        w2.push(pairwise_sum(&terms) / norm);
    }
    Ok(w2.windows(2).map(|p| 8.0 * (p[1] - p[0])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_scale_exact_powers() {
        for k in 0..8 {
            assert_eq!(mass_scale(2f64.powi(-2 * k), 2), Some(k as i64));
        }
        assert_eq!(mass_scale(0.0, 2), None);
        assert_eq!(mass_scale(0.3, 2), Some(0));
    }

    #[test]
    fn omega_scale_geometric() {
        let b: Vec<f64> = (0..10).map(|j| 0.5 * 2f64.powi(-j)).collect();
        assert_eq!(omega_scale(&b, 0, 2.0), Some(0));
        let b = vec![0.1, 0.1, 0.1, 0.05, 0.025];
        assert_eq!(omega_scale(&b, 0, 2.0), Some(2));
    }

    #[test]
    fn coalescence() {
        assert_eq!(coalescence_scale(2, 4.0), 3);
        assert_eq!(coalescence_scale(2, 1.0), 1);
        assert_eq!(coalescence_scale(3, 4.0), 1);
    }
}

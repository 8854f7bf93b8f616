//! The acceptance suite: one pass/fail record per criterion.
//!
//! Sizes are fixed by the criteria (side 64 for the β, range, bound, flow
//! and scale checks, side 32 for closure); tolerances come from the config.

use crate::commands::{build_options, convention, window};
use crate::config::RunConfig;
use crate::crosscheck::cross_check;
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgpt_core::coeffs::{
    ab_offset, beta_limit, beta_sequence_spectral, bound_profiles, bounded_by_median,
    coalescence_scale, mass_scale, omega_scale, usable_scales,
};
use rgpt_core::decomp::{build_decomposition, memory_estimate, range_profile, ScaleDecomposition};
use rgpt_core::flow::{
    constant_beta_orbit, conjugacy_residual, invert_t, iterate_flow, transform_t, BulkVector,
    CouplingVector, FlowOptions, FlowTables,
};
use rgpt_core::lattice::{green_kernel, TorusSpec, ZeroMode};
use rgpt_symbolic::calculus::{apply_q, laplacian, wick_exp};
use rgpt_symbolic::field::{tau, tau_grad, tau_lap, tau_sq, Atom, Cov, Dec, Expr, Pos, Shape, Species};
use rgpt_symbolic::flow_table::{
    compare, derive_flow_table, expected_flow_table, perturbative_map, symbolic_v, COUPLINGS,
};
use rgpt_symbolic::loc::{Basis, LocOptions, Phase};
use rgpt_symbolic::poly::Poly;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt;
use std::time::Instant;

/// Criteria that fail with the default configuration for documented reasons
/// (see README): the closed-form ν row, the σ bound, and one near-degenerate
/// direction in the cubic-remainder sample.
pub const KNOWN_FAILURES: [u8; 3] = [1, 5, 6];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub metrics: Value,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<34} {:>7.1}s  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub results: Vec<CriterionResult>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    /// Failures outside [`KNOWN_FAILURES`].
    pub fn unexpected_failures(&self) -> Vec<u8> {
        self.results.iter().filter(|r| !r.pass && !KNOWN_FAILURES.contains(&r.id)).map(|r| r.id).collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        let passed = self.results.iter().filter(|r| r.pass).count();
        writeln!(f, "{passed}/{} criteria pass", self.results.len())
    }
}

/// Lazily built side-64 massless decomposition shared by several criteria.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    dec64: Option<ScaleDecomposition>,
    tables64: Option<FlowTables>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Self { cfg, dec64: None, tables64: None }
    }

    fn spec64(&self) -> TorusSpec {
        TorusSpec::new(4, 2, 6).expect("valid")
    }

    pub fn dec64(&mut self) -> Result<&ScaleDecomposition> {
        if self.dec64.is_none() {
            let w = window(self.cfg)?;
            let mut opts = build_options(self.cfg);
            opts.zero_mode = ZeroMode::Drop;
            self.dec64 = Some(build_decomposition(self.spec64(), 0.0, w.as_ref(), opts)?);
        }
        Ok(self.dec64.as_ref().unwrap())
    }

    pub fn tables64(&mut self) -> Result<&FlowTables> {
        if self.tables64.is_none() {
            let ab = ab_offset(4, self.cfg.ab);
            let t = FlowTables::build(self.dec64()?, &ab)?;
            self.tables64 = Some(t);
        }
        Ok(self.tables64.as_ref().unwrap())
    }
}

fn timed(
    id: u8,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, String, Value)>,
) -> CriterionResult {
    let t0 = Instant::now();
    let (pass, detail, metrics) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}"), json!({ "error": e.to_string() })),
    };
    CriterionResult { id, name, pass, detail, metrics, seconds: t0.elapsed().as_secs_f64() }
}

pub fn c1_symbolic(cfg: &RunConfig) -> CriterionResult {
    let t0 = Instant::now();
    timed(1, "symbolic-numeric equivalence", || {
        let conv = convention(cfg.sign);
        let mut tables = Vec::new();
        let mut exact = true;
        let mut diffs = Vec::new();
        for phase in [Phase::BelowJab, Phase::AtOrAboveJab] {
            let t = derive_flow_table(LocOptions { convention: conv, phase })?;
            let cmp = compare(&t, &expected_flow_table(phase));
            exact &= cmp.all_match();
            for r in cmp.mismatches() {
                diffs.push(format!("{}: derived - closed form = {}", r.coupling, r.difference));
            }
            tables.push(t);
        }
        diffs.dedup();
        let numeric = cross_check(
            |p| match p {
                Phase::BelowJab => tables[0].clone(),
                Phase::AtOrAboveJab => tables[1].clone(),
            },
            20,
            0.1,
            cfg.seed,
        )?;
        let closed = cross_check(expected_flow_table, 20, 0.1, cfg.seed)?;
        let secs = t0.elapsed().as_secs_f64();
        let pass = exact && numeric.max() <= cfg.tol.symbolic && secs < 10.0;
        let detail = if pass {
            format!("exact match; max |derived - phi_pt| = {:.1e}", numeric.max())
        } else {
            format!(
                "{}; max |derived - phi_pt| = {:.2e}; closed form vs phi_pt = {:.1e}",
                if diffs.is_empty() { "exact match".to_string() } else { diffs.join("; ") },
                numeric.max(),
                closed.max()
            )
        };
        Ok((
            pass,
            detail,
            json!({
                "exact": exact,
                "mismatches": diffs,
                "derived_vs_phi_pt": numeric.max_dev,
                "closed_form_vs_phi_pt": closed.max_dev,
                "seconds": secs,
            }),
        ))
    })
}

pub fn c2_beta(ctx: &mut Context) -> CriterionResult {
    let tol = ctx.cfg.tol.clone();
    timed(2, "beta limit", || {
        let t0 = Instant::now();
        let bl = beta_limit(ctx.dec64()?)?;
        let secs = t0.elapsed().as_secs_f64();
        let n = bl.betas.len();
        let rel = |b: f64| (b - bl.reference).abs() / bl.reference;
        let last_two = [rel(bl.betas[n - 2]), rel(bl.betas[n - 1])];
        let ex = rel(bl.extrapolated);
        let mem = memory_estimate(&ctx.spec64());
        let pass = last_two.iter().all(|r| *r <= tol.beta_pair)
            && ex <= tol.beta_extrap
            && secs < 300.0
            && mem < 8 << 30;
        let detail = format!(
            "beta_j = {:?}; last two off by {:.1}%, {:.1}%; extrapolated {:.5} ({:+.1}%) vs {:.6}",
            bl.betas.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>(),
            100.0 * last_two[0],
            100.0 * last_two[1],
            bl.extrapolated,
            100.0 * (bl.extrapolated - bl.reference) / bl.reference,
            bl.reference
        );
        Ok((pass, detail, json!({ "limit": bl, "memory_bytes": mem, "seconds": secs })))
    })
}

pub fn c3_closure(cfg: &RunConfig) -> CriterionResult {
    timed(3, "Green-function closure", || {
        let spec = TorusSpec::new(4, 2, 5)?;
        let w = window(cfg)?;
        let mut errs = Vec::new();
        for m2 in [0.0, 0.01, 1.0] {
            let mut opts = build_options(cfg);
            opts.zero_mode = ZeroMode::Drop;
            let dec = build_decomposition(spec, m2, w.as_ref(), opts)?;
            let g = green_kernel(spec, m2, ZeroMode::Drop)?;
            let diff = dec.reconstruct().sub(&g)?;
            errs.push((m2, diff.max_abs() / g.max_abs()));
        }
        let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
        Ok((
            worst <= cfg.tol.closure,
            format!("relative sup error {:?}", errs.iter().map(|(m, e)| format!("m2={m}: {e:.1e}")).collect::<Vec<_>>()),
            json!({ "errors": errs }),
        ))
    })
}

pub fn c4_range(ctx: &mut Context) -> CriterionResult {
    let tol = ctx.cfg.tol.range;
    timed(4, "decay surrogate", || {
        let dec = ctx.dec64()?;
        let reps = (2..=4).map(|j| range_profile(dec, j)).collect::<rgpt_core::Result<Vec<_>>>()?;
        let pass = reps.iter().all(|r| r.ratio <= tol);
        let detail = format!(
            "outside/peak ratios {:?}",
            reps.iter().map(|r| format!("j={}: {:.1e}", r.j, r.ratio)).collect::<Vec<_>>()
        );
        Ok((pass, detail, json!({ "profiles": reps })))
    })
}

pub fn c5_bounds(ctx: &mut Context) -> CriterionResult {
    let factor = ctx.cfg.tol.bound_factor;
    timed(5, "coefficient bounds", || {
        let t = ctx.tables64()?;
        let fc: Vec<_> = t.fc.iter().filter(|f| (2..=4).contains(&f.j)).copied().collect();
        let profiles = bound_profiles(&fc, &t.raw, t.l);
        let failing: Vec<&str> =
            profiles.iter().filter(|(_, v)| !bounded_by_median(v, factor)).map(|(k, _)| *k).collect();
        let detail = if failing.is_empty() {
            format!("all {} sequences within {factor}x median", profiles.len())
        } else {
            let show: Vec<String> = failing
                .iter()
                .map(|k| format!("{k} = {:?}", profiles[*k].iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()))
                .collect();
            format!("unbounded: {}", show.join("; "))
        };
        Ok((failing.is_empty(), detail, json!({ "profiles": profiles, "failing": failing })))
    })
}

fn unit_direction(rng: &mut impl Rng) -> BulkVector {
    loop {
        let b = BulkVector {
            g: rng.gen_range(-1.0..=1.0),
            mu: rng.gen_range(-1.0..=1.0),
            z0: rng.gen_range(-1.0..=1.0),
        };
        let n = b.norm();
        if n > 1e-3 && n <= 1.0 {
            return b.scale(1.0 / n);
        }
    }
}

pub fn c6_cubic(ctx: &mut Context) -> CriterionResult {
    let (factor, seed) = (ctx.cfg.tol.cubic_factor, ctx.cfg.seed);
    timed(6, "conjugacy cubic remainder", || {
        let c = ctx.tables64()?.bulk(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spreads = Vec::new();
        let mut failing = Vec::new();
        for i in 0..10 {
            let b = unit_direction(&mut rng);
            let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3]
                .iter()
                .map(|&e| conjugacy_residual(&b.scale(e), &c).max_abs() / (e * e * e))
                .collect();
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            if spread > factor {
                failing.push(json!({ "direction": i, "b": b, "ratios": ratios }));
            }
            spreads.push(spread);
        }
        let worst = spreads.iter().cloned().fold(1.0, f64::max);
        let detail = if failing.is_empty() {
            format!("largest max/min of residual/eps^3 over 10 directions: {worst:.3}")
        } else {
            let f = &failing[0];
            format!(
                "{} of 10 directions exceed {factor}x, worst spread {worst:.2}; direction {} ratios {:?}",
                failing.len(),
                f["direction"],
                f["ratios"].as_array().unwrap().iter().map(|r| format!("{:.2e}", r.as_f64().unwrap())).collect::<Vec<_>>()
            )
        };
        Ok((failing.is_empty(), detail, json!({ "spreads": spreads, "failing": failing })))
    })
}

pub fn c7_roundtrip(ctx: &mut Context) -> CriterionResult {
    let (tol, seed) = (ctx.cfg.tol.roundtrip, ctx.cfg.seed);
    timed(7, "transform round trip", || {
        let t = ctx.tables64()?;
        let scales: Vec<usize> = usable_scales(t.steps()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7);
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let c = t.bulk(scales[i % scales.len()]);
            let r = 0.05 * rng.gen::<f64>().cbrt();
            let b = unit_direction(&mut rng).scale(r);
            let back = invert_t(&transform_t(&b, &c), &c)?;
            let e = (back.g - b.g).abs().max((back.mu - b.mu).abs()).max((back.z0 - b.z0).abs());
            worst = worst.max(e);
        }
        Ok((worst <= tol, format!("max error over 1000 points {worst:.1e}"), json!({ "max_error": worst })))
    })
}

pub fn c8_gbar(ctx: &mut Context) -> CriterionResult {
    let cfg = ctx.cfg;
    let (asym, comp) = (cfg.tol.gbar_asym, cfg.tol.comparability);
    let (ab, divergence) = (cfg.ab, cfg.divergence);
    timed(8, "gbar asymptotics and comparability", || {
        let beta = rgpt_core::coeffs::beta_reference(2);
        let orbit = constant_beta_orbit(0.1, beta, 500);
        let scaled = orbit[500] * beta * 500.0;
        let t = ctx.tables64()?;
        let v0 = CouplingVector { g: 0.05, ..Default::default() };
        let j_ab = coalescence_scale(t.l, ab as f64);
        let traj = iterate_flow(&v0, t, 1..t.steps(), j_ab, FlowOptions { divergence })?;
        let g: Vec<f64> = traj.rows.iter().map(|r| r.transformed.g).collect();
        let comparable = g.windows(2).all(|p| p[1] / comp <= p[0] && p[0] <= comp * p[1]);
        let decreasing = traj.summary.gbar_decreasing;
        let pass = (scaled - 1.0).abs() <= asym && comparable;
        Ok((
            pass,
            format!(
                "gbar_500 * beta * 500 = {scaled:.3}; full run gbar = {:?}, comparable: {comparable}, decreasing: {decreasing}",
                g.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>()
            ),
            json!({ "scaled": scaled, "gbar": g, "comparable": comparable, "decreasing": decreasing }),
        ))
    })
}

pub fn c9_scales(cfg: &RunConfig) -> CriterionResult {
    timed(9, "scale relation j_Omega vs j_m", || {
        let spec = TorusSpec::new(4, 2, 6)?;
        let w = window(cfg)?;
        let mut rows = Vec::new();
        let mut worst = 0i64;
        for k in 2..=5 {
            let m2 = 2f64.powi(-2 * k);
            let betas = beta_sequence_spectral(spec, m2, w.as_ref(), ZeroMode::Drop)?;
            let usable: Vec<f64> = usable_scales(spec.n).map(|j| betas[j]).collect();
            let jo = omega_scale(&usable, 1, 2.0);
            let jm = mass_scale(m2, 2);
            let gap = match (jo, jm) {
                (Some(a), Some(b)) => (a - b).abs(),
                _ => i64::MAX,
            };
            worst = worst.max(gap);
            rows.push(json!({ "k": k, "m2": m2, "j_omega": jo, "j_m": jm, "gap": gap }));
        }
        let detail = format!(
            "|j_Omega - j_m| = {:?}",
            rows.iter().map(|r| r["gap"].as_i64().unwrap_or(-1)).collect::<Vec<_>>()
        );
        Ok((worst as f64 <= cfg.tol.scale_gap, detail, json!({ "rows": rows })))
    })
}

/// Random sum of monomials in φ, φ̄, ψ, ψ̄ at x and y of degree up to 4.
fn random_polynomial(rng: &mut impl Rng) -> Expr {
    let species = [Species::Phi, Species::PhiBar, Species::Psi, Species::PsiBar];
    let mut e = Expr::zero();
    for _ in 0..rng.gen_range(1..6) {
        let atoms = (0..rng.gen_range(0..=4))
            .map(|_| {
                let dec = if rng.gen_bool(0.25) { Dec::Lap } else { Dec::None };
                let pos = if rng.gen_bool(0.5) { Pos::X } else { Pos::Y };
                Atom::with(species[rng.gen_range(0..4)], pos, dec)
            })
            .collect();
        e.push(Poly::int(rng.gen_range(-5..=5)), Shape::atoms(atoms));
    }
    e
}

pub fn c10_structure(cfg: &RunConfig) -> CriterionResult {
    timed(10, "supersymmetry and structure", || {
        let mut notes = Vec::new();
        let mut ok = true;
        // Q annihilates the supersymmetric basis.
        let basis = [
            ("tau", tau(Pos::X)),
            ("tau^2", tau_sq(Pos::X)),
            ("tau_gradgrad", tau_grad(Pos::X)),
            ("tau_lap", tau_lap(Pos::X)),
        ];
        for (name, e) in basis {
            if !apply_q(&e).is_zero() {
                ok = false;
                notes.push(format!("Q {name} != 0"));
            }
        }
        // [Q, L_C] = 0 and [Q, e^{L_C}] = 0 on random polynomials.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..32 {
            let p = random_polynomial(&mut rng);
            let lhs = apply_q(&laplacian(&p, Cov::C)).sub(&laplacian(&apply_q(&p), Cov::C));
            let rhs = apply_q(&wick_exp(&p, Cov::C, false)).sub(&wick_exp(&apply_q(&p), Cov::C, false));
            if !lhs.is_zero() || !rhs.is_zero() {
                ok = false;
                notes.push("[Q, L_C] != 0".into());
                break;
            }
        }
        // Bulk V_pt closes in the basis with zero constant term; observables
        // never feed the bulk.
        let opts = LocOptions { convention: convention(cfg.sign), phase: Phase::BelowJab };
        let m = perturbative_map(&symbolic_v(), opts)?;
        let obs = ["lam_a", "lam_b", "q_a", "q_b"];
        for b in [Basis::Tau2, Basis::Tau, Basis::TauGradGrad, Basis::TauLap] {
            let c = m.v_pt.get(b);
            if c.symbols().iter().any(|s| obs.contains(&s.0.as_str())) {
                ok = false;
                notes.push(format!("{} depends on observable couplings", b.name()));
            }
        }
        if !m.p.get(Basis::One).is_zero() {
            ok = false;
            notes.push("constant term".into());
        }
        // λ rows depend on λ and bulk couplings only; q rows on q, λ.
        for (name, poly) in couplings_after(&m.v_pt) {
            let syms = poly.symbols();
            let bad = match name.as_str() {
                "lam_a" => syms.iter().any(|s| ["lam_b", "q_a", "q_b"].contains(&s.0.as_str())),
                "lam_b" => syms.iter().any(|s| ["lam_a", "q_a", "q_b"].contains(&s.0.as_str())),
                _ => false,
            };
            if bad {
                ok = false;
                notes.push(format!("{name} row not triangular"));
            }
        }
        // q_pt changes only through C_{j+1}(a-b): zero before coalescence
        // when that covariance vanishes.
        let q = m.v_pt.get(Basis::SigmaSigmaBarA).scale_int(-2);
        let mut env = std::collections::HashMap::new();
        for s in rgpt_symbolic::flow_table::all_symbols() {
            env.insert(s, 0.01);
        }
        env.insert("q_a".into(), 0.0);
        let before = q.eval(&env).map_err(rgpt_symbolic::SymError::Unbound)?;
        env.insert("w_ab+".into(), 0.5);
        let after = q.eval(&env).map_err(rgpt_symbolic::SymError::Unbound)?;
        if before != 0.0 || after == 0.0 {
            ok = false;
            notes.push(format!("q activation: {before} -> {after}"));
        }
        let detail = if ok { "all structural checks hold".to_string() } else { notes.join("; ") };
        Ok((ok, detail, json!({ "notes": notes, "couplings": COUPLINGS })))
    })
}

fn couplings_after(v: &rgpt_symbolic::loc::LocPoly) -> Vec<(String, Poly)> {
    rgpt_symbolic::flow_table::couplings(v)
}

/// Run every criterion in order.
pub fn run_all(cfg: &RunConfig, mut progress: impl FnMut(&CriterionResult)) -> Report {
    let mut ctx = Context::new(cfg);
    let mut results = Vec::new();
    let mut push = |r: CriterionResult| {
        progress(&r);
        results.push(r);
    };
    push(c1_symbolic(cfg));
    push(c2_beta(&mut ctx));
    push(c3_closure(cfg));
    push(c4_range(&mut ctx));
    push(c5_bounds(&mut ctx));
    push(c6_cubic(&mut ctx));
    push(c7_roundtrip(&mut ctx));
    push(c8_gbar(&mut ctx));
    push(c9_scales(cfg));
    push(c10_structure(cfg));
    Report { results }
}

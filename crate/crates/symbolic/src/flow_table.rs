//! The perturbative map V ↦ V_pt and the coupling flow it induces.

use crate::calculus::{truncated_pair_pi, wick_exp};
use crate::error::{Result, SymError};
use crate::field::{Cov, Expr, Pos};
use crate::loc::{loc_reduce, to_basis, Basis, LocOptions, LocPoly, Phase};
use crate::poly::{rat, Poly};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::fmt;

/// Coupling names in output order.
pub const COUPLINGS: [&str; 8] = ["g", "nu", "y", "z", "lam_a", "lam_b", "q_a", "q_b"];

/// Moment symbols of w_j; the w_{j+1} versions carry a trailing `+`.
pub const MOMENTS: [&str; 9] = ["w1", "w2", "w3", "wss", "w2ss", "w3ss", "wdw1", "wdwss", "gwss"];

fn s(name: &str) -> Poly {
    Poly::sym(name)
}

fn plus(name: &str) -> Poly {
    Poly::sym(&format!("{name}+"))
}

/// The general local polynomial V with symbolic couplings.
pub fn symbolic_v() -> LocPoly {
    let mut v = LocPoly::default();
    v.add_to(Basis::Tau2, &s("g"));
    v.add_to(Basis::Tau, &s("nu"));
    v.add_to(Basis::TauGradGrad, &s("y"));
    v.add_to(Basis::TauLap, &s("z"));
    v.add_to(Basis::SigmaPhiBarA, &s("lam_a").neg());
    v.add_to(Basis::SigmaBarPhiB, &s("lam_b").neg());
    v.add_to(Basis::SigmaSigmaBarA, &s("q_a").scale(&rat(-1, 2)));
    v.add_to(Basis::SigmaSigmaBarB, &s("q_b").scale(&rat(-1, 2)));
    v
}

/// Read the couplings off a local polynomial.
pub fn couplings(v: &LocPoly) -> Vec<(String, Poly)> {
    let h = rat(-2, 1);
    let m1 = rat(-1, 1);
    vec![
        ("g".into(), v.get(Basis::Tau2)),
        ("nu".into(), v.get(Basis::Tau)),
        ("y".into(), v.get(Basis::TauGradGrad)),
        ("z".into(), v.get(Basis::TauLap)),
        ("lam_a".into(), v.get(Basis::SigmaPhiBarA).scale(&m1)),
        ("lam_b".into(), v.get(Basis::SigmaBarPhiB).scale(&m1)),
        ("q_a".into(), v.get(Basis::SigmaSigmaBarA).scale(&h)),
        ("q_b".into(), v.get(Basis::SigmaSigmaBarB).scale(&h)),
    ]
}

/// e^{L_C} on a local polynomial.
pub fn wick_local(v: &LocPoly) -> Result<LocPoly> {
    to_basis(&wick_exp(&v.expand(), Cov::C, false))
}

#[derive(Clone, Debug)]
pub struct PerturbativeMap {
    /// ½ Σ_y F_{π,w}(V_x, V_y) before localisation.
    pub w_bilocal: Expr,
    /// ½ Σ_y Loc_x F_{π,w}(V_x, V_y); W is w_bilocal minus this.
    pub w_loc: LocPoly,
    pub p: LocPoly,
    pub v_pt: LocPoly,
}

/// Σ_y Loc_x F_{π,K}(A_x, A_y).
fn loc_pair(a: &LocPoly, cov: Cov, opts: LocOptions) -> Result<(Expr, LocPoly)> {
    let ax = a.expand();
    let ay = ax.translate(Pos::X, Pos::Y);
    let f = truncated_pair_pi(&ax, &ay, cov);
    let l = loc_reduce(&f, opts)?;
    Ok((f, l))
}

/// W-part, P and V_pt = e^{L_C} V − P.
pub fn perturbative_map(v: &LocPoly, opts: LocOptions) -> Result<PerturbativeMap> {
    let half = Poly::constant(rat(1, 2));
    let ev = wick_local(v)?;
    let (f_w, loc_w) = loc_pair(v, Cov::W, opts)?;
    let (_, loc_plus) = loc_pair(&ev, Cov::WPlus, opts)?;
    let p = loc_plus.sub(&wick_local(&loc_w)?).scale(&half);
    let c = p.get(Basis::One);
    if !c.is_zero() {
        return Err(SymError::ConstantNonzero(c.to_string()));
    }
    let v_pt = ev.sub(&p);
    Ok(PerturbativeMap { w_bilocal: f_w.scale(&half), w_loc: loc_w.scale(&half), p, v_pt })
}

/// Symbolic flow table: each coupling after one step, in terms of the
/// couplings, C00, the moments of w_j and w_{j+1}, and w_ab, w_ab+.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTable {
    pub rows: Vec<(String, Poly)>,
}

impl FlowTable {
    pub fn get(&self, name: &str) -> Option<&Poly> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|(n, p)| {
                let terms: Vec<Value> = p
                    .term_list()
                    .into_iter()
                    .map(|(c, m)| json!({ "coef": c, "monomial": m }))
                    .collect();
                json!({ "coupling": n, "text": p.to_string(), "terms": terms })
            })
            .collect();
        Value::Array(rows)
    }

    /// Evaluate every row with all symbols bound.
    pub fn evaluate(&self, env: &HashMap<String, f64>) -> Result<Vec<(String, f64)>> {
        self.rows
            .iter()
            .map(|(n, p)| Ok((n.clone(), p.eval(env).map_err(SymError::Unbound)?)))
            .collect()
    }
}

impl fmt::Display for FlowTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, p) in &self.rows {
            writeln!(f, "{n}_pt = {p}")?;
        }
        Ok(())
    }
}

pub fn derive_flow_table(opts: LocOptions) -> Result<FlowTable> {
    let m = perturbative_map(&symbolic_v(), opts)?;
    Ok(FlowTable { rows: couplings(&m.v_pt) })
}

/// δ[f] = f(ν₊, w₊) − f(ν, w) for f = ν^k · moment.
fn delta(nu_pow: u32, moment: &str) -> Poly {
    let nu_plus = s("nu").add(&s("C00").mul(&s("g")).scale_int(2));
    nu_plus.pow(nu_pow).mul(&plus(moment)).sub(&s("nu").pow(nu_pow).mul(&s(moment)))
}

fn diff(moment: &str) -> Poly {
    plus(moment).sub(&s(moment))
}

/// The flow equations in closed form, written with the same symbols.
pub fn expected_flow_table(phase: Phase) -> FlowTable {
    let (g, nu, y, z) = (s("g"), s("nu"), s("y"), s("z"));
    let q = |n: i64, d: i64| Poly::constant(rat(n, d));
    let beta = diff("w2").scale_int(8);
    let etap = s("C00").scale_int(2);
    let xip = diff("w3")
        .sub(&s("w2").mul(&s("C00")).scale_int(3))
        .scale_int(4)
        .add(&beta.mul(&etap).mul(&q(1, 4)));
    let pip = diff("wdw1").scale_int(2);
    let sigma = diff("wdwss");
    let zeta = diff("gwss");
    let theta = diff("w3ss").scale_int(2);
    let dnw1 = delta(1, "w1");

    let g_pt = g.sub(&beta.mul(&g.pow(2))).sub(&g.mul(&dnw1).scale_int(4));
    let nu_pt = nu
        .add(&etap.mul(&g.add(&g.mul(&nu).mul(&s("w1")).scale_int(4))))
        .sub(&xip.mul(&g.pow(2)))
        .sub(&beta.mul(&g).mul(&nu).mul(&q(1, 4)))
        .sub(&pip.mul(&g).mul(&z.add(&y)))
        .sub(&delta(2, "w1"));
    let dy = sigma.mul(&g).mul(&z).sub(&zeta.mul(&g).mul(&y)).sub(&g.mul(&delta(1, "w2ss")));
    let y_pt = y.add(&dy);
    let z_pt = z
        .sub(&theta.mul(&g.pow(2)))
        .sub(&delta(2, "wss").mul(&q(1, 2)))
        .sub(&z.mul(&dnw1).scale_int(2))
        .sub(&dy);
    let lam = |n: &str| match phase {
        Phase::BelowJab => s(n).mul(&Poly::one().sub(&dnw1)),
        Phase::AtOrAboveJab => s(n),
    };
    let cab = diff("w_ab");
    let lab = s("lam_a").mul(&s("lam_b")).mul(&cab);
    FlowTable {
        rows: vec![
            ("g".into(), g_pt),
            ("nu".into(), nu_pt),
            ("y".into(), y_pt),
            ("z".into(), z_pt),
            ("lam_a".into(), lam("lam_a")),
            ("lam_b".into(), lam("lam_b")),
            ("q_a".into(), s("q_a").add(&lab)),
            ("q_b".into(), s("q_b").add(&lab)),
        ],
    }
}

#[derive(Clone, Debug)]
pub struct RowDiff {
    pub coupling: String,
    pub derived: Poly,
    pub expected: Poly,
    /// derived − expected
    pub difference: Poly,
}

impl RowDiff {
    pub fn matches(&self) -> bool {
        self.difference.is_zero()
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub rows: Vec<RowDiff>,
}

impl Comparison {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(RowDiff::matches)
    }

    pub fn mismatches(&self) -> Vec<&RowDiff> {
        self.rows.iter().filter(|r| !r.matches()).collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    json!({
                        "coupling": r.coupling,
                        "match": r.matches(),
                        "derived": r.derived.to_string(),
                        "expected": r.expected.to_string(),
                        "difference": r.difference.to_string(),
                    })
                })
                .collect(),
        )
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            if r.matches() {
                writeln!(f, "{}: match", r.coupling)?;
            } else {
                writeln!(f, "{}: MISMATCH, derived − expected = {}", r.coupling, r.difference)?;
            }
        }
        Ok(())
    }
}

pub fn compare(derived: &FlowTable, expected: &FlowTable) -> Comparison {
    let rows = expected
        .rows
        .iter()
        .map(|(n, e)| {
            let d = derived.get(n).cloned().unwrap_or_default();
            RowDiff { coupling: n.clone(), difference: d.sub(e), derived: d, expected: e.clone() }
        })
        .collect();
    Comparison { rows }
}

/// Every symbol a flow table may contain.
pub fn all_symbols() -> Vec<String> {
    let mut v: Vec<String> = COUPLINGS.iter().map(|c| c.to_string()).collect();
    v.push("C00".into());
    for m in MOMENTS.iter().chain(["w_ab"].iter()) {
        v.push(m.to_string());
        v.push(format!("{m}+"));
    }
    v
}

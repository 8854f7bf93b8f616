//! Localisation: Σ_y of a bilocal polynomial at (x, y) projected onto the
//! local basis {τ², τ, τ_∇∇, τ_Δ, 1} and the observable monomials.

use crate::calculus::evaluate_same_point;
use crate::error::{Result, SymError};
use crate::field::{
    observable, tau, tau_grad, tau_lap, tau_sq, Atom, Dec, Expr, KernelFactor, Obs, Pos,
    Shape, Species,
};
use crate::poly::{rat, Poly};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Sign of Δ relative to the standard lattice Laplacian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Convention {
    /// Δf = Σ_i (2f − f(·+e_i) − f(·−e_i)), for which ½Σ_e(∇^e q)² sums to qΔq.
    #[default]
    MomentIdentity,
    /// Δf = Σ_i (f(·+e_i) + f(·−e_i) − 2f).
    Literal,
}

impl Convention {
    fn s(self) -> i64 {
        match self {
            Convention::MomentIdentity => 1,
            Convention::Literal => -1,
        }
    }
}

/// Relative position of the scale to the coalescence scale j_ab.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Phase {
    #[default]
    BelowJab,
    AtOrAboveJab,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LocOptions {
    pub convention: Convention,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Basis {
    Tau2,
    Tau,
    TauGradGrad,
    TauLap,
    SigmaPhiBarA,
    SigmaBarPhiB,
    SigmaSigmaBarA,
    SigmaSigmaBarB,
    One,
}

impl Basis {
    pub const ALL: [Basis; 9] = [
        Basis::Tau2,
        Basis::Tau,
        Basis::TauGradGrad,
        Basis::TauLap,
        Basis::SigmaPhiBarA,
        Basis::SigmaBarPhiB,
        Basis::SigmaSigmaBarA,
        Basis::SigmaSigmaBarB,
        Basis::One,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Basis::Tau2 => "tau^2",
            Basis::Tau => "tau",
            Basis::TauGradGrad => "tau_gradgrad",
            Basis::TauLap => "tau_lap",
            Basis::SigmaPhiBarA => "sigma phibar_a 1_a",
            Basis::SigmaBarPhiB => "sigmabar phi_b 1_b",
            Basis::SigmaSigmaBarA => "sigma sigmabar 1_a",
            Basis::SigmaSigmaBarB => "sigma sigmabar 1_b",
            Basis::One => "1",
        }
    }

    /// The basis element as a polynomial in fields at x.
    pub fn expand(self) -> Expr {
        use Species::*;
        match self {
            Basis::Tau2 => tau_sq(Pos::X),
            Basis::Tau => tau(Pos::X),
            Basis::TauGradGrad => tau_grad(Pos::X),
            Basis::TauLap => tau_lap(Pos::X),
            Basis::SigmaPhiBarA => observable(Obs::A, Pos::X, &[Sigma, PhiBar]),
            Basis::SigmaBarPhiB => observable(Obs::B, Pos::X, &[SigmaBar, Phi]),
            Basis::SigmaSigmaBarA => observable(Obs::A, Pos::X, &[Sigma, SigmaBar]),
            Basis::SigmaSigmaBarB => observable(Obs::B, Pos::X, &[Sigma, SigmaBar]),
            Basis::One => Expr::term(Poly::one(), Shape::default()),
        }
    }
}

/// Polynomial in the local basis.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LocPoly {
    pub coefs: BTreeMap<Basis, Poly>,
}

impl LocPoly {
    pub fn get(&self, b: Basis) -> Poly {
        self.coefs.get(&b).cloned().unwrap_or_default()
    }

    pub fn add_to(&mut self, b: Basis, c: &Poly) {
        let e = self.coefs.entry(b).or_default();
        e.add_assign(c);
        if e.is_zero() {
            self.coefs.remove(&b);
        }
    }

    pub fn add(&self, o: &LocPoly) -> LocPoly {
        let mut r = self.clone();
        for (b, c) in &o.coefs {
            r.add_to(*b, c);
        }
        r
    }

    pub fn scale(&self, c: &Poly) -> LocPoly {
        let mut r = LocPoly::default();
        for (b, v) in &self.coefs {
            r.add_to(*b, &v.mul(c));
        }
        r
    }

    pub fn sub(&self, o: &LocPoly) -> LocPoly {
        self.add(&o.scale(&Poly::int(-1)))
    }

    pub fn expand(&self) -> Expr {
        let mut e = Expr::zero();
        for (b, c) in &self.coefs {
            e.add_assign(&b.expand().scale(c));
        }
        e
    }
}

impl fmt::Display for LocPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coefs.is_empty() {
            return f.write_str("0");
        }
        for (i, (b, c)) in self.coefs.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "[{}] {}", b.name(), c)?;
        }
        Ok(())
    }
}

fn describe(kernels: &[KernelFactor]) -> String {
    kernels.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ")
}

/// Σ_u K(u) (second = false) or Σ_u u_1² K(u) (second = true) of a
/// product of kernels in u = x − y. Gradient labels in `free` are paired
/// with field decorations.
fn kernel_moment(
    kernels: &[KernelFactor],
    conv: Convention,
    second: bool,
    free: &[u8],
) -> Result<Poly> {
    let fail = || SymError::NoLocRule(format!("kernel product {}", describe(kernels)));
    let Some(first) = kernels.first() else { return Err(fail()) };
    let cov = first.cov;
    if kernels.iter().any(|k| k.cov != cov || k.p == k.q) {
        return Err(fail());
    }
    let s = conv.s();
    // Σ_u of a single differenced kernel vanishes.
    if let [k] = kernels {
        if !second && (k.dp != Dec::None || k.dq != Dec::None) {
            return Ok(Poly::zero());
        }
        // Summation by parts puts the differences on u_1².
        if k.dp.order() + k.dq.order() >= 3 {
            return Ok(Poly::zero());
        }
        if let (Dec::Grad(a), Dec::Grad(b)) = (k.dp, k.dq) {
            if a == b && !free.contains(&a) {
                // Σ_e ∇^e ∇^{−e} is twice the moment-identity Laplacian.
                return Ok(Poly::sym(&k.cov.sym("w1")).scale_int(-4));
            }
        }
    }
    let mut plain = 0usize;
    let mut laps = 0usize;
    let mut grads: Vec<(u8, i64)> = Vec::new();
    for k in kernels {
        let decs = [(k.p, k.dp), (k.q, k.dq)];
        let n = decs.iter().filter(|(_, d)| *d != Dec::None).count();
        match n {
            0 => plain += 1,
            1 => {
                for (p, d) in decs {
                    match d {
                        Dec::None => {}
                        Dec::Lap => laps += 1,
                        Dec::Grad(l) => grads.push((l, if p == Pos::X { 1 } else { -1 })),
                    }
                }
            }
            _ => return Err(fail()),
        }
    }
    let sym = |base: &str| Poly::sym(&cov.sym(base));
    match (plain, laps, grads.as_slice()) {
        (n, 0, []) => {
            let base = match (n, second) {
                (1, false) => "w1",
                (2, false) => "w2",
                (3, false) => "w3",
                (4, false) => "w4",
                (1, true) => "wss",
                (2, true) => "w2ss",
                (3, true) => "w3ss",
                _ => return Err(fail()),
            };
            Ok(sym(base))
        }
        (0, 1, []) => Ok(if second { sym("w1").scale_int(-2 * s) } else { Poly::zero() }),
        (1, 1, []) => Ok(sym(if second { "wdwss" } else { "wdw1" })),
        (0, 0, [(l1, s1), (l2, s2)]) if l1 == l2 && s1 == s2 && !free.contains(l1) => {
            Ok(if second { sym("gwss").scale_int(2) } else { sym("wdw1").scale_int(2 * s) })
        }
        (0, 0, [(l, _)]) if free.contains(l) && !second => Ok(Poly::zero()),
        _ => Err(fail()),
    }
}

fn bilinear(p: Species, q: Species, dp: Dec, dq: Dec) -> Shape {
    Shape::atoms(vec![Atom::with(p, Pos::X, dp), Atom::with(q, Pos::X, dq)])
}

/// Half of τ, τ_∇∇, τ_Δ carried by the species pair (p, q).
fn half(p: Species, q: Species, b: Basis) -> Expr {
    let mut e = Expr::zero();
    match b {
        Basis::Tau => e.push(Poly::one(), bilinear(p, q, Dec::None, Dec::None)),
        Basis::TauGradGrad => {
            e.push(Poly::constant(rat(1, 2)), bilinear(p, q, Dec::Grad(0), Dec::Grad(0)))
        }
        Basis::TauLap => {
            e.push(Poly::constant(rat(-1, 2)), bilinear(p, q, Dec::Lap, Dec::None));
            e.push(Poly::constant(rat(-1, 2)), bilinear(p, q, Dec::None, Dec::Lap));
        }
        _ => unreachable!(),
    }
    e
}

/// Accumulator for Σ_y Loc_x.
struct Reducer {
    opts: LocOptions,
    local: Expr,
    // (fermionic, K1, K**) → coefficients of the x→y and y→x orientations.
    mixed: BTreeMap<(bool, Poly, Poly), [Poly; 2]>,
}

impl Reducer {
    fn collapse(&mut self, coef: Poly, shape: &Shape) {
        let sh = Shape { kernels: Vec::new(), atoms: shape.atoms.clone(), ind: shape.ind.clone() };
        self.local.add_assign(&Expr::term(coef, sh).translate(Pos::Y, Pos::X));
    }

    fn term(&mut self, shape: &Shape, coef: &Poly) -> Result<()> {
        let conv = self.opts.convention;
        if shape.kernels.iter().any(|k| k.p == k.q) {
            return Err(SymError::NoLocRule(format!("same-point kernel in {shape}")));
        }
        let sig = shape.atoms.iter().filter(|a| a.species == Species::Sigma).count();
        let sigb = shape.atoms.iter().filter(|a| a.species == Species::SigmaBar).count();
        let fields: Vec<Atom> =
            shape.atoms.iter().copied().filter(|a| !a.species.observable()).collect();
        let deg = fields.len();
        let free: Vec<u8> = fields.iter().filter_map(|a| a.dec.label()).collect();
        let dec_order: usize = fields.iter().map(|a| a.dec.order()).sum();
        let k1 = || kernel_moment(&shape.kernels, conv, false, &free);

        if sig + sigb > 0 || !shape.ind.is_empty() {
            return self.observable(shape, coef, sig, sigb, &fields);
        }
        match deg {
            0 => self.collapse(coef.mul(&k1()?), shape),
            4 => {
                if dec_order == 0 {
                    self.collapse(coef.mul(&k1()?), shape);
                }
            }
            2 if dec_order >= 3 => {}
            2 if dec_order >= 1 => self.collapse(coef.mul(&k1()?), shape),
            2 => self.two_point(shape, coef, &fields)?,
            d if d > 4 => {}
            _ => return Err(SymError::NoLocRule(format!("odd field degree in {shape}"))),
        }
        Ok(())
    }

    fn two_point(&mut self, shape: &Shape, coef: &Poly, fields: &[Atom]) -> Result<()> {
        let conv = self.opts.convention;
        let (p, q, sign) = match (fields[0].species, fields[1].species) {
            (Species::Phi, Species::PhiBar) | (Species::Psi, Species::PsiBar) => {
                (fields[0], fields[1], 1)
            }
            (Species::PhiBar, Species::Phi) => (fields[1], fields[0], 1),
            (Species::PsiBar, Species::Psi) => (fields[1], fields[0], -1),
            _ => return Err(SymError::NoLocRule(format!("two-point term {shape}"))),
        };
        let c = if sign < 0 { coef.neg() } else { coef.clone() };
        let k1 = kernel_moment(&shape.kernels, conv, false, &[])?;
        let (ps, qs) = (p.species, q.species);
        match (p.pos, q.pos) {
            (Pos::X, Pos::X) => self.local.add_assign(&half(ps, qs, Basis::Tau).scale(&c.mul(&k1))),
            (Pos::Y, Pos::Y) => {
                let kss = kernel_moment(&shape.kernels, conv, true, &[])?;
                self.local.add_assign(&half(ps, qs, Basis::Tau).scale(&c.mul(&k1)));
                let d = half(ps, qs, Basis::TauGradGrad).sub(&half(ps, qs, Basis::TauLap));
                self.local.add_assign(&d.scale(&c.mul(&kss)));
            }
            (pp, _) => {
                let kss = kernel_moment(&shape.kernels, conv, true, &[])?;
                let slot = self
                    .mixed
                    .entry((ps.fermionic(), k1, kss))
                    .or_insert_with(|| [Poly::zero(), Poly::zero()]);
                slot[if pp == Pos::X { 0 } else { 1 }].add_assign(&c);
            }
        }
        Ok(())
    }

    fn observable(
        &mut self,
        shape: &Shape,
        coef: &Poly,
        sig: usize,
        sigb: usize,
        fields: &[Atom],
    ) -> Result<()> {
        let conv = self.opts.convention;
        let fail = || SymError::NoLocRule(format!("observable term {shape}"));
        let ind = |o: Obs, p: Pos| shape.ind.contains(&(o, p));
        match (sig, sigb) {
            (1, 0) | (0, 1) => {
                let (o, want) =
                    if sig == 1 { (Obs::A, Species::PhiBar) } else { (Obs::B, Species::Phi) };
                if !ind(o, Pos::X) || shape.ind.len() != 1 {
                    return Err(fail());
                }
                if self.opts.phase == Phase::AtOrAboveJab || fields.len() != 1 {
                    return Ok(());
                }
                if fields[0].dec != Dec::None {
                    return Ok(());
                }
                if fields[0].species != want {
                    return Err(fail());
                }
                let k1 = kernel_moment(&shape.kernels, conv, false, &[])?;
                self.collapse(coef.mul(&k1), shape);
            }
            (1, 1) => {
                if !fields.is_empty() {
                    return Ok(());
                }
                let k = match shape.kernels.as_slice() {
                    [k] if k.dp == Dec::None && k.dq == Dec::None && k.p != k.q => k,
                    _ => return Err(fail()),
                };
                let at_a = if ind(Obs::A, Pos::X) && ind(Obs::B, Pos::Y) {
                    true
                } else if ind(Obs::B, Pos::X) && ind(Obs::A, Pos::Y) {
                    false
                } else {
                    return Err(fail());
                };
                let val = Poly::sym(&k.cov.sym("w_ab"));
                let sh = Shape {
                    kernels: Vec::new(),
                    atoms: shape.atoms.clone(),
                    ind: vec![(if at_a { Obs::A } else { Obs::B }, Pos::X)],
                };
                self.local.push(coef.mul(&val), sh);
            }
            _ => return Err(fail()),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<LocPoly> {
        for ((ferm, k1, kss), [xy, yx]) in std::mem::take(&mut self.mixed) {
            if xy != yx {
                return Err(SymError::Asymmetric(format!(
                    "K1 = {k1}, K** = {kss}: x→y {xy}, y→x {yx}"
                )));
            }
            let (p, q) =
                if ferm { (Species::Psi, Species::PsiBar) } else { (Species::Phi, Species::PhiBar) };
            self.local.add_assign(&half(p, q, Basis::Tau).scale(&xy.mul(&k1).scale_int(2)));
            self.local.add_assign(&half(p, q, Basis::TauLap).scale(&xy.mul(&kss)));
        }
        to_basis(&self.local)
    }
}

/// Σ_y Loc_x of a polynomial in fields at x and y with kernels in x − y.
pub fn loc_reduce(e: &Expr, opts: LocOptions) -> Result<LocPoly> {
    let e = evaluate_same_point(e);
    let mut r = Reducer { opts, local: Expr::zero(), mixed: BTreeMap::new() };
    for (shape, coef) in e.iter() {
        r.term(shape, coef)?;
    }
    r.finish()
}

#[derive(Default)]
struct Halves {
    bos: BTreeMap<&'static str, Poly>,
    fer: BTreeMap<&'static str, Poly>,
}

/// Read a polynomial in fields at x (no kernels) in the local basis.
pub fn to_basis(e: &Expr) -> Result<LocPoly> {
    use Species::*;
    let e = evaluate_same_point(e);
    let mut out = LocPoly::default();
    let mut h = Halves::default();
    for (shape, coef) in e.iter() {
        let fail = || SymError::NoLocRule(format!("local monomial {shape}"));
        if !shape.kernels.is_empty()
            || shape.atoms.iter().any(|a| !a.species.observable() && a.pos != Pos::X)
            || shape.ind.iter().any(|(_, p)| *p != Pos::X)
        {
            return Err(fail());
        }
        let sp: Vec<Species> = shape.atoms.iter().map(|a| a.species).collect();
        let dec: Vec<Dec> = shape.atoms.iter().map(|a| a.dec).collect();
        let plain = dec.iter().all(|d| *d == Dec::None);
        let obs_ind = shape.ind.first().map(|(o, _)| *o);
        let slot = match (sp.as_slice(), obs_ind) {
            ([], None) => {
                out.add_to(Basis::One, coef);
                continue;
            }
            ([Sigma, PhiBar], Some(Obs::A)) if plain => {
                out.add_to(Basis::SigmaPhiBarA, coef);
                continue;
            }
            ([SigmaBar, Phi], Some(Obs::B)) if plain => {
                out.add_to(Basis::SigmaBarPhiB, coef);
                continue;
            }
            ([Sigma, SigmaBar], Some(o)) => {
                out.add_to(if o == Obs::A { Basis::SigmaSigmaBarA } else { Basis::SigmaSigmaBarB }, coef);
                continue;
            }
            ([Phi, PhiBar, Phi, PhiBar], None) | ([Phi, Phi, PhiBar, PhiBar], None) if plain => {
                (false, "t2")
            }
            ([Phi, PhiBar, Psi, PsiBar], None) if plain => (true, "t2"),
            ([Phi, PhiBar], None) | ([Psi, PsiBar], None) => {
                let key = match (dec[0], dec[1]) {
                    (Dec::None, Dec::None) => "tau",
                    (Dec::Lap, Dec::None) => "lapL",
                    (Dec::None, Dec::Lap) => "lapR",
                    (Dec::Grad(a), Dec::Grad(b)) if a == b => "grad",
                    _ => return Err(fail()),
                };
                (sp[0] == Psi, key)
            }
            _ => return Err(fail()),
        };
        let m = if slot.0 { &mut h.fer } else { &mut h.bos };
        m.entry(slot.1).or_default().add_assign(coef);
    }
    let get = |m: &BTreeMap<&str, Poly>, k: &str| m.get(k).cloned().unwrap_or_default();
    let check = |basis: Basis, b: Poly, f: Poly| -> Result<Poly> {
        if b != f {
            return Err(SymError::Supersymmetry {
                basis: basis.name().into(),
                boson: b.to_string(),
                fermion: f.to_string(),
            });
        }
        Ok(b)
    };
    let t2 = get(&h.bos, "t2");
    out.add_to(Basis::Tau2, &check(Basis::Tau2, t2.scale_int(2), get(&h.fer, "t2"))?.scale(&rat(1, 2)));
    out.add_to(Basis::Tau, &check(Basis::Tau, get(&h.bos, "tau"), get(&h.fer, "tau"))?);
    out.add_to(Basis::TauGradGrad, &check(Basis::TauGradGrad, get(&h.bos, "grad"), get(&h.fer, "grad"))?.scale_int(2));
    let lap = check(Basis::TauLap, get(&h.bos, "lapL"), get(&h.bos, "lapR"))?;
    check(Basis::TauLap, lap.clone(), get(&h.fer, "lapL"))?;
    check(Basis::TauLap, lap.clone(), get(&h.fer, "lapR"))?;
    out.add_to(Basis::TauLap, &lap.scale_int(-2));
    Ok(out)
}

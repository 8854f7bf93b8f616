//! Field atoms, kernel factors and polynomials in the fields at formal points.

use crate::poly::{rat, Poly};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Species {
    Sigma,
    SigmaBar,
    Phi,
    PhiBar,
    Psi,
    PsiBar,
}

impl Species {
    pub fn fermionic(self) -> bool {
        matches!(self, Species::Psi | Species::PsiBar)
    }

    pub fn observable(self) -> bool {
        matches!(self, Species::Sigma | Species::SigmaBar)
    }

    fn name(self) -> &'static str {
        match self {
            Species::Sigma => "sigma",
            Species::SigmaBar => "sigmabar",
            Species::Phi => "phi",
            Species::PhiBar => "phibar",
            Species::Psi => "psi",
            Species::PsiBar => "psibar",
        }
    }
}

/// Formal lattice points. `Y` doubles as the summation point u.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pos {
    X,
    Y,
    A,
    B,
    /// Extra generic points for multi-point identities.
    P(u8),
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::X => "x",
            Pos::Y => "y",
            Pos::A => "a",
            Pos::B => "b",
            Pos::P(n) => return write!(f, "p{n}"),
        })
    }
}

/// Derivative applied to a field or to one end of a kernel. `Grad(l)` is a
/// forward difference along a direction e summed over all 2d unit vectors;
/// the label l ties the two occurrences of the same e.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dec {
    None,
    Grad(u8),
    Lap,
}

impl Dec {
    pub fn order(self) -> usize {
        match self {
            Dec::None => 0,
            Dec::Grad(_) => 1,
            Dec::Lap => 2,
        }
    }

    pub fn label(self) -> Option<u8> {
        match self {
            Dec::Grad(l) => Some(l),
            _ => None,
        }
    }

    fn relabel(self, f: &impl Fn(u8) -> u8) -> Dec {
        match self {
            Dec::Grad(l) => Dec::Grad(f(l)),
            d => d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub species: Species,
    pub pos: Pos,
    pub dec: Dec,
}

impl Atom {
    pub fn new(species: Species, pos: Pos) -> Self {
        Self { species, pos, dec: Dec::None }
    }

    pub fn with(species: Species, pos: Pos, dec: Dec) -> Self {
        Self { species, pos, dec }
    }

    fn sort_key(&self) -> (bool, bool, Pos, Species, Dec) {
        (self.species.fermionic(), !self.species.observable(), self.pos, self.species, self.dec)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dec {
            Dec::None => {}
            Dec::Grad(l) => write!(f, "D{l}")?,
            Dec::Lap => f.write_str("Lap ")?,
        }
        if self.species.observable() {
            f.write_str(self.species.name())
        } else {
            write!(f, "{}_{}", self.species.name(), self.pos)
        }
    }
}

/// Covariance carried by a contraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cov {
    /// w_j
    W,
    /// w_{j+1} = w_j + C_{j+1}
    WPlus,
    /// C_{j+1}
    C,
}

impl Cov {
    pub fn prefix(self) -> &'static str {
        match self {
            Cov::W | Cov::WPlus => "w",
            Cov::C => "C",
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Cov::WPlus => "+",
            _ => "",
        }
    }

    /// Name of a moment symbol of this covariance.
    pub fn sym(self, base: &str) -> String {
        format!("{}{}", base.replacen('w', self.prefix(), 1), self.suffix())
    }
}

/// (D_p D_q K)(p, q) with D_p acting at p and D_q at q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KernelFactor {
    pub cov: Cov,
    pub p: Pos,
    pub dp: Dec,
    pub q: Pos,
    pub dq: Dec,
}

impl KernelFactor {
    pub fn new(cov: Cov, p: Pos, dp: Dec, q: Pos, dq: Dec) -> Self {
        if (q, dq) < (p, dp) {
            Self { cov, p: q, dp: dq, q: p, dq: dp }
        } else {
            Self { cov, p, dp, q, dq }
        }
    }

    fn relabel(self, f: &impl Fn(u8) -> u8) -> Self {
        Self::new(self.cov, self.p, self.dp.relabel(f), self.q, self.dq.relabel(f))
    }
}

impl fmt::Display for KernelFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |d: Dec| match d {
            Dec::None => String::new(),
            Dec::Grad(l) => format!("D{l}"),
            Dec::Lap => "Lap".into(),
        };
        write!(
            f,
            "{}{}[{}{},{}{}]",
            self.cov.prefix(),
            self.cov.suffix(),
            d(self.dp),
            self.p,
            d(self.dq),
            self.q
        )
    }
}

/// Indicator 1_a(p) or 1_b(p) of an observable insertion at formal point p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Obs {
    A,
    B,
}

/// Canonical shape of a term: kernels, atoms and indicators.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Shape {
    pub kernels: Vec<KernelFactor>,
    pub atoms: Vec<Atom>,
    pub ind: Vec<(Obs, Pos)>,
}

impl Shape {
    pub fn atoms(atoms: Vec<Atom>) -> Self {
        Self { kernels: Vec::new(), atoms, ind: Vec::new() }
    }

    pub fn labels(&self) -> Vec<u8> {
        let mut v: Vec<u8> = self
            .atoms
            .iter()
            .filter_map(|a| a.dec.label())
            .chain(self.kernels.iter().flat_map(|k| [k.dp.label(), k.dq.label()]).flatten())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    fn relabel(&self, f: &impl Fn(u8) -> u8) -> Shape {
        Shape {
            kernels: self.kernels.iter().map(|k| k.relabel(f)).collect(),
            atoms: self.atoms.iter().map(|a| Atom { dec: a.dec.relabel(f), ..*a }).collect(),
            ind: self.ind.clone(),
        }
    }

    /// Z_2 grading: parity of the fermion count.
    pub fn odd(&self) -> bool {
        self.atoms.iter().filter(|a| a.species.fermionic()).count() % 2 == 1
    }

    pub fn field_degree(&self) -> usize {
        self.atoms.iter().filter(|a| !a.species.observable()).count()
    }

    /// Sort into canonical order, returning the sign, or None if the term vanishes.
    fn sorted(mut self) -> Option<(i64, Shape)> {
        let mut idx: Vec<usize> = (0..self.atoms.len()).collect();
        idx.sort_by_key(|&i| self.atoms[i].sort_key());
        // Sign of the permutation restricted to fermions.
        let ferm: Vec<usize> =
            idx.iter().copied().filter(|&i| self.atoms[i].species.fermionic()).collect();
        let mut inv = 0usize;
        for a in 0..ferm.len() {
            for b in a + 1..ferm.len() {
                if ferm[a] > ferm[b] {
                    inv += 1;
                }
            }
        }
        let atoms: Vec<Atom> = idx.iter().map(|&i| self.atoms[i]).collect();
        for w in atoms.windows(2) {
            if w[0] == w[1] && (w[0].species.fermionic() || w[0].species.observable()) {
                return None;
            }
        }
        self.atoms = atoms;
        self.kernels.sort();
        self.ind.sort();
        self.ind.dedup();
        for w in self.ind.windows(2) {
            if w[0].1 == w[1].1 && w[0].0 != w[1].0 {
                return None;
            }
        }
        Some((if inv % 2 == 0 { 1 } else { -1 }, self))
    }

    /// Canonical form: minimal over relabelings of the direction labels.
    pub fn canonical(self) -> Option<(i64, Shape)> {
        let labels = self.labels();
        if labels.is_empty() {
            return self.sorted();
        }
        let mut best: Option<(i64, Shape)> = None;
        for perm in permutations(labels.len()) {
            let f = |l: u8| perm[labels.iter().position(|&x| x == l).unwrap()] as u8;
            let cand = self.relabel(&f).sorted()?;
            if best.as_ref().map_or(true, |b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
        best
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        parts.extend(self.ind.iter().map(|(o, p)| {
            format!("1_{}({p})", if *o == Obs::A { "a" } else { "b" })
        }));
        parts.extend(self.kernels.iter().map(|k| k.to_string()));
        parts.extend(self.atoms.iter().map(|a| a.to_string()));
        if parts.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&parts.join(" "))
        }
    }
}

/// Sum of shapes with polynomial coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expr {
    terms: BTreeMap<Shape, Poly>,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(coef: Poly, shape: Shape) -> Self {
        let mut e = Self::zero();
        e.push(coef, shape);
        e
    }

    pub fn push(&mut self, coef: Poly, shape: Shape) {
        if coef.is_zero() {
            return;
        }
        let Some((s, shape)) = shape.canonical() else { return };
        let c = if s < 0 { coef.neg() } else { coef };
        let e = self.terms.entry(shape.clone()).or_default();
        e.add_assign(&c);
        if e.is_zero() {
            self.terms.remove(&shape);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Shape, &Poly)> {
        self.terms.iter()
    }

    pub fn add(&self, o: &Expr) -> Expr {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &Expr) {
        for (s, c) in &o.terms {
            self.push(c.clone(), s.clone());
        }
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.add(&o.scale(&Poly::int(-1)))
    }

    pub fn scale(&self, c: &Poly) -> Expr {
        let mut r = Expr::zero();
        for (s, v) in &self.terms {
            r.push(v.mul(c), s.clone());
        }
        r
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        let mut r = Expr::zero();
        for (sa, ca) in &self.terms {
            for (sb, cb) in &o.terms {
                r.push(ca.mul(cb), product_shape(sa, sb));
            }
        }
        r
    }

    /// Restrict to terms satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(&Shape) -> bool) -> Expr {
        Expr { terms: self.terms.iter().filter(|(s, _)| keep(s)).map(|(s, c)| (s.clone(), c.clone())).collect() }
    }

    /// Move every atom and indicator at `from` to `to`.
    pub fn translate(&self, from: Pos, to: Pos) -> Expr {
        let mv = |p: Pos| if p == from { to } else { p };
        let mut r = Expr::zero();
        for (s, c) in &self.terms {
            let sh = Shape {
                kernels: s
                    .kernels
                    .iter()
                    .map(|k| KernelFactor::new(k.cov, mv(k.p), k.dp, mv(k.q), k.dq))
                    .collect(),
                atoms: s.atoms.iter().map(|a| Atom { pos: mv(a.pos), ..*a }).collect(),
                ind: s.ind.iter().map(|(o, p)| (*o, mv(*p))).collect(),
            };
            r.push(c.clone(), sh);
        }
        r
    }
}

/// Concatenate two shapes, renaming the labels of `b` away from those of `a`.
pub fn product_shape(a: &Shape, b: &Shape) -> Shape {
    let off = a.labels().iter().max().map_or(0, |m| m + 1);
    let b = b.relabel(&|l| l + off);
    Shape {
        kernels: a.kernels.iter().chain(b.kernels.iter()).copied().collect(),
        atoms: a.atoms.iter().chain(b.atoms.iter()).copied().collect(),
        ind: a.ind.iter().chain(b.ind.iter()).copied().collect(),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (s, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "({c}) {s}")?;
        }
        Ok(())
    }
}

// Building blocks of the local polynomial.

fn bilinear(p: Species, q: Species, at: Pos, dp: Dec, dq: Dec) -> Shape {
    Shape::atoms(vec![Atom::with(p, at, dp), Atom::with(q, at, dq)])
}

/// τ = φφ̄ + ψψ̄ at `at`.
pub fn tau(at: Pos) -> Expr {
    let mut e = Expr::zero();
    e.push(Poly::one(), bilinear(Species::Phi, Species::PhiBar, at, Dec::None, Dec::None));
    e.push(Poly::one(), bilinear(Species::Psi, Species::PsiBar, at, Dec::None, Dec::None));
    e
}

/// τ_{pq} = φ_p φ̄_q + ψ_p ψ̄_q.
pub fn tau_pair(p: Pos, q: Pos) -> Expr {
    let mut e = Expr::zero();
    e.push(Poly::one(), Shape::atoms(vec![Atom::new(Species::Phi, p), Atom::new(Species::PhiBar, q)]));
    e.push(Poly::one(), Shape::atoms(vec![Atom::new(Species::Psi, p), Atom::new(Species::PsiBar, q)]));
    e
}

pub fn tau_sq(at: Pos) -> Expr {
    let t = tau(at);
    t.mul(&t)
}

/// τ_∇∇ = ½ Σ_e (∇^e φ ∇^e φ̄ + ∇^e ψ ∇^e ψ̄).
pub fn tau_grad(at: Pos) -> Expr {
    let h = Poly::constant(rat(1, 2));
    let g = Dec::Grad(0);
    let mut e = Expr::zero();
    e.push(h.clone(), bilinear(Species::Phi, Species::PhiBar, at, g, g));
    e.push(h, bilinear(Species::Psi, Species::PsiBar, at, g, g));
    e
}

/// τ_Δ = ½ ((−Δφ)φ̄ + φ(−Δφ̄) + (−Δψ)ψ̄ + ψ(−Δψ̄)).
pub fn tau_lap(at: Pos) -> Expr {
    let h = Poly::constant(rat(-1, 2));
    let mut e = Expr::zero();
    for (p, q) in [(Species::Phi, Species::PhiBar), (Species::Psi, Species::PsiBar)] {
        e.push(h.clone(), bilinear(p, q, at, Dec::Lap, Dec::None));
        e.push(h.clone(), bilinear(p, q, at, Dec::None, Dec::Lap));
    }
    e
}

/// Observable monomial with indicator: 1_o(at) times the given atoms at `at`.
pub fn observable(o: Obs, at: Pos, species: &[Species]) -> Expr {
    let atoms = species
        .iter()
        .map(|&s| Atom::new(s, if s.observable() { if s == Species::Sigma { Pos::A } else { Pos::B } } else { at }))
        .collect();
    Expr::term(Poly::one(), Shape { kernels: Vec::new(), atoms, ind: vec![(o, at)] })
}

//! Gaussian calculus on field polynomials: L_C, e^{±L}, the cross operator,
//! truncated expectations and the supersymmetry generator Q̂.

use crate::field::{product_shape, Atom, Cov, Dec, Expr, KernelFactor, Pos, Shape, Species};
use crate::poly::{rat, Poly};
use num_rational::BigRational;

/// Left derivative with respect to atom `i`: the remaining shape and the sign.
fn remove(shape: &Shape, i: usize) -> (i64, Shape) {
    let mut s = shape.clone();
    let a = s.atoms.remove(i);
    let sign = if a.species.fermionic() {
        let before = shape.atoms[..i].iter().filter(|b| b.species.fermionic()).count();
        if before % 2 == 0 { 1 } else { -1 }
    } else {
        1
    };
    (sign, s)
}

fn kernel(cov: Cov, a: &Atom, b: &Atom) -> KernelFactor {
    KernelFactor::new(cov, a.pos, a.dec, b.pos, b.dec)
}

fn with_kernel(mut s: Shape, k: KernelFactor) -> Shape {
    s.kernels.push(k);
    s
}

fn signed(c: &Poly, s: i64) -> Poly {
    if s < 0 { c.neg() } else { c.clone() }
}

/// L_C = Σ_{u,v} C(u,v) (∂_{φ_u} ∂_{φ̄_v} + ∂_{ψ_u} ∂_{ψ̄_v}).
pub fn laplacian(e: &Expr, cov: Cov) -> Expr {
    let mut out = Expr::zero();
    for (shape, coef) in e.iter() {
        let n = shape.atoms.len();
        for k in 0..n {
            let bar = shape.atoms[k];
            let partner = match bar.species {
                Species::PhiBar => Species::Phi,
                Species::PsiBar => Species::Psi,
                _ => continue,
            };
            let (s1, rest) = remove(shape, k);
            for i in 0..rest.atoms.len() {
                let a = rest.atoms[i];
                if a.species != partner {
                    continue;
                }
                let (s2, rest2) = remove(&rest, i);
                out.push(signed(coef, s1 * s2), with_kernel(rest2, kernel(cov, &a, &bar)));
            }
        }
    }
    out
}

/// e^{tL} for t = ±1; the series terminates on polynomials.
pub fn wick_exp(e: &Expr, cov: Cov, inverse: bool) -> Expr {
    let mut out = e.clone();
    let mut cur = e.clone();
    let mut n = 1i64;
    loop {
        cur = laplacian(&cur, cov);
        if cur.is_zero() {
            break;
        }
        let c = rat(if inverse && n % 2 == 1 { -1 } else { 1 }, 1);
        let mut fact = BigRational::from_integer(1.into());
        for m in 1..=n {
            fact *= rat(m, 1);
        }
        out.add_assign(&cur.scale(&Poly::constant(c / fact)));
        n += 1;
    }
    out
}

/// Pair (A-part, B-part) carried through repeated cross contractions.
#[derive(Clone)]
struct Tensor {
    coef: Poly,
    kernels: Vec<KernelFactor>,
    a: Shape,
    b: Shape,
}

/// One application of the cross part of L_C on A ⊗ B.
fn cross_step(t: &Tensor, cov: Cov) -> Vec<Tensor> {
    let mut out = Vec::new();
    let grade = if t.a.odd() { -1 } else { 1 };
    for (i, ai) in t.a.atoms.iter().enumerate() {
        for (k, bk) in t.b.atoms.iter().enumerate() {
            let (sign, ker) = match (ai.species, bk.species) {
                (Species::Phi, Species::PhiBar) => (1, kernel(cov, ai, bk)),
                (Species::PhiBar, Species::Phi) => (1, kernel(cov, bk, ai)),
                (Species::Psi, Species::PsiBar) => (grade, kernel(cov, ai, bk)),
                (Species::PsiBar, Species::Psi) => (-grade, kernel(cov, bk, ai)),
                _ => continue,
            };
            let (sa, ra) = remove(&t.a, i);
            let (sb, rb) = remove(&t.b, k);
            let mut kernels = t.kernels.clone();
            kernels.push(ker);
            out.push(Tensor { coef: signed(&t.coef, sign * sa * sb), kernels, a: ra, b: rb });
        }
    }
    out
}

fn shift_labels(b: &Shape, a: &Shape) -> Shape {
    // product_shape renames b's labels; recover the renamed b alone.
    let p = product_shape(a, b);
    Shape {
        kernels: p.kernels[a.kernels.len()..].to_vec(),
        atoms: p.atoms[a.atoms.len()..].to_vec(),
        ind: b.ind.clone(),
    }
}

/// A (↔)^n B with the 1/n! weight, for n = `n`.
pub fn laplacian_cross(a: &Expr, b: &Expr, cov: Cov, n: usize) -> Expr {
    let mut out = Expr::zero();
    let mut fact = BigRational::from_integer(1.into());
    for m in 1..=n {
        fact *= rat(m as i64, 1);
    }
    let w = Poly::constant(BigRational::from_integer(1.into()) / fact);
    for (sa, ca) in a.iter() {
        for (sb, cb) in b.iter() {
            let sb = shift_labels(sb, sa);
            let mut level = vec![Tensor { coef: ca.mul(cb), kernels: Vec::new(), a: sa.clone(), b: sb }];
            for _ in 0..n {
                level = level.iter().flat_map(|t| cross_step(t, cov)).collect();
            }
            for t in level {
                let mut sh = Shape {
                    kernels: t.a.kernels.iter().chain(t.b.kernels.iter()).copied().collect(),
                    atoms: t.a.atoms.iter().chain(t.b.atoms.iter()).copied().collect(),
                    ind: t.a.ind.iter().chain(t.b.ind.iter()).copied().collect(),
                };
                sh.kernels.extend(t.kernels);
                out.push(t.coef.mul(&w), sh);
            }
        }
    }
    out
}

/// F_C(A, B) = Σ_{n≥1} (1/n!) A (↔)^n B.
pub fn truncated_pair(a: &Expr, b: &Expr, cov: Cov) -> Expr {
    let max = a.iter().map(|(s, _)| s.atoms.len()).max().unwrap_or(0);
    let mut out = Expr::zero();
    for n in 1..=max {
        out.add_assign(&laplacian_cross(a, b, cov, n));
    }
    out
}

/// F_C(A, B) computed from its definition e^L(e^{−L}A · e^{−L}B) − AB.
pub fn truncated_pair_by_definition(a: &Expr, b: &Expr, cov: Cov) -> Expr {
    let prod = wick_exp(a, cov, true).mul(&wick_exp(b, cov, true));
    wick_exp(&prod, cov, false).sub(&a.mul(b))
}

fn has_observable(s: &Shape) -> bool {
    s.atoms.iter().any(|a| a.species.observable()) || !s.ind.is_empty()
}

/// Bulk projection π_∅.
pub fn bulk_part(e: &Expr) -> Expr {
    e.filter(|s| !has_observable(s))
}

/// Observable projection π_* = 1 − π_∅.
pub fn observable_part(e: &Expr) -> Expr {
    e.filter(has_observable)
}

/// F_π(A, B) = F(A, π_∅ B) + F(π_* A, B).
pub fn truncated_pair_pi(a: &Expr, b: &Expr, cov: Cov) -> Expr {
    truncated_pair(a, &bulk_part(b), cov).add(&truncated_pair(&observable_part(a), b, cov))
}

/// Q̂: φ ↦ ψ, φ̄ ↦ ψ̄, ψ ↦ −φ, ψ̄ ↦ φ̄, extended as an odd antiderivation.
pub fn apply_q(e: &Expr) -> Expr {
    let mut out = Expr::zero();
    for (shape, coef) in e.iter() {
        let mut before = 0usize;
        for i in 0..shape.atoms.len() {
            let a = shape.atoms[i];
            let (img, s) = match a.species {
                Species::Phi => (Species::Psi, 1),
                Species::PhiBar => (Species::PsiBar, 1),
                Species::Psi => (Species::Phi, -1),
                Species::PsiBar => (Species::PhiBar, 1),
                _ => {
                    continue;
                }
            };
            let sign = if before % 2 == 0 { s } else { -s };
            let mut sh = shape.clone();
            sh.atoms[i] = Atom { species: img, ..a };
            out.push(signed(coef, sign), sh);
            if a.species.fermionic() {
                before += 1;
            }
        }
    }
    out
}

/// Same-point factor C(p, p) with no derivatives, as the scalar C(0).
pub fn origin_symbol(cov: Cov) -> String {
    format!("{}00{}", cov.prefix(), cov.suffix())
}

/// Replace undecorated same-point kernels by their scalar values.
pub fn evaluate_same_point(e: &Expr) -> Expr {
    let mut out = Expr::zero();
    for (s, c) in e.iter() {
        let mut coef = c.clone();
        let mut sh = s.clone();
        sh.kernels.retain(|k| {
            if k.p == k.q && k.dp == Dec::None && k.dq == Dec::None {
                coef = coef.mul(&Poly::sym(&origin_symbol(k.cov)));
                false
            } else {
                true
            }
        });
        out.push(coef, sh);
    }
    out
}

pub fn at(e: &Expr, p: Pos) -> Expr {
    e.translate(Pos::X, p)
}

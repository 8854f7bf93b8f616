use proptest::prelude::*;
use rgpt_symbolic::calculus::*;
use rgpt_symbolic::field::*;
use rgpt_symbolic::flow_table::*;
use rgpt_symbolic::loc::*;
use rgpt_symbolic::poly::{rat, Poly};

fn sym(s: &str) -> Poly {
    Poly::sym(s)
}

fn kern(cov: Cov, p: Pos, q: Pos) -> KernelFactor {
    KernelFactor::new(cov, p, Dec::None, q, Dec::None)
}

/// The expression `e` multiplied by kernel factors.
fn with_kernels(e: &Expr, ks: &[KernelFactor]) -> Expr {
    let k = Expr::term(Poly::one(), Shape { kernels: ks.to_vec(), ..Default::default() });
    e.mul(&k)
}

fn below() -> LocOptions {
    LocOptions::default()
}

#[test]
fn cross_of_two_pairs() {
    let (a1, b1, a2, b2) = (Pos::P(1), Pos::P(2), Pos::P(3), Pos::P(4));
    let got = laplacian_cross(&tau_pair(a1, b1), &tau_pair(a2, b2), Cov::C, 1);
    let expect = with_kernels(&tau_pair(a1, b2), &[kern(Cov::C, b1, a2)])
        .add(&with_kernels(&tau_pair(a2, b1), &[kern(Cov::C, b2, a1)]));
    assert_eq!(got, expect);
}

#[test]
fn closed_loops_vanish() {
    let t = tau_pair(Pos::A, Pos::B);
    assert!(laplacian(&t, Cov::C).is_zero());
    assert!(laplacian_cross(&t, &t, Cov::C, 2).is_zero());
}

#[test]
fn observable_term_has_multiplicity_two() {
    let v = observable(Obs::A, Pos::X, &[Species::Sigma, Species::PhiBar])
        .scale(&sym("lam_a").neg())
        .add(&tau(Pos::X).scale(&sym("nu")));
    let vy = v.translate(Pos::X, Pos::Y);
    let f = truncated_pair_pi(&v, &vy, Cov::W);
    let shape = Shape {
        kernels: vec![kern(Cov::W, Pos::X, Pos::Y)],
        atoms: vec![Atom::new(Species::Sigma, Pos::A), Atom::new(Species::PhiBar, Pos::Y)],
        ind: vec![(Obs::A, Pos::X)],
    };
    let c = f.iter().find(|(s, _)| **s == shape).map(|(_, c)| c.clone()).unwrap();
    assert_eq!(c, sym("lam_a").mul(&sym("nu")).scale_int(-2));
}

#[test]
fn wick_of_local_potential() {
    let mut v = symbolic_v();
    let ev = wick_local(&v).unwrap();
    v.add_to(Basis::Tau, &sym("g").mul(&sym("C00")).scale_int(2));
    assert_eq!(ev, v);
    let mut nu = LocPoly::default();
    nu.add_to(Basis::Tau, &sym("nu"));
    assert_eq!(wick_local(&nu).unwrap(), nu);
}

#[test]
fn two_contraction_block_of_quartic() {
    let (x, y) = (Pos::X, Pos::Y);
    let g2 = sym("g").pow(2);
    let vx = tau_sq(x).scale(&sym("g"));
    let vy = tau_sq(y).scale(&sym("g"));
    let got = laplacian_cross(&vx, &vy, Cov::W, 2);
    let txy = tau_pair(x, y);
    let tyx = tau_pair(y, x);
    let inner = txy
        .mul(&txy)
        .scale(&Poly::int(2))
        .add(&tyx.mul(&tyx).scale(&Poly::int(2)))
        .add(&txy.mul(&tyx).scale(&Poly::int(4)))
        .add(&tau(x).mul(&tau(y)).scale(&Poly::int(8)));
    let expect = with_kernels(&inner.scale(&g2), &[kern(Cov::W, x, y), kern(Cov::W, x, y)]);
    assert_eq!(got, expect);
}

#[test]
fn truncated_pair_vanishes_on_zero() {
    let v = symbolic_v().expand();
    assert!(truncated_pair(&v, &Expr::zero(), Cov::W).is_zero());
    assert!(truncated_pair_pi(&v, &Expr::zero(), Cov::W).is_zero());
}

#[test]
fn pi_variant_agrees_without_observables() {
    let v = symbolic_v();
    let bulk = bulk_part(&v.expand());
    let by = bulk.translate(Pos::X, Pos::Y);
    assert_eq!(truncated_pair_pi(&bulk, &by, Cov::W), truncated_pair(&bulk, &by, Cov::W));
}

#[test]
fn loc_quartic_pair() {
    let (x, y) = (Pos::X, Pos::Y);
    let e = with_kernels(&tau_pair(x, y).mul(&tau_pair(y, x)), &[kern(Cov::W, x, y), kern(Cov::W, x, y)]);
    let l = loc_reduce(&e, below()).unwrap();
    let mut expect = LocPoly::default();
    expect.add_to(Basis::Tau2, &sym("w2"));
    assert_eq!(l, expect);
}

#[test]
fn loc_tau_at_summation_point() {
    let e = with_kernels(&tau(Pos::Y), &[kern(Cov::W, Pos::X, Pos::Y)]);
    let l = loc_reduce(&e, below()).unwrap();
    let mut expect = LocPoly::default();
    expect.add_to(Basis::Tau, &sym("w1"));
    expect.add_to(Basis::TauGradGrad, &sym("wss"));
    expect.add_to(Basis::TauLap, &sym("wss").neg());
    assert_eq!(l, expect);
}

#[test]
fn loc_laplacian_kernel_on_mixed_pair() {
    let (x, y) = (Pos::X, Pos::Y);
    let k = KernelFactor::new(Cov::W, x, Dec::Lap, y, Dec::None);
    let e = with_kernels(&tau_pair(x, y).add(&tau_pair(y, x)), &[k]);
    let l = loc_reduce(&e, below()).unwrap();
    assert!(l.get(Basis::Tau).is_zero());
    assert_eq!(l.get(Basis::TauLap), sym("w1").scale_int(-2));
    let lit = loc_reduce(&e, LocOptions { convention: Convention::Literal, ..below() }).unwrap();
    assert_eq!(lit.get(Basis::TauLap), sym("w1").scale_int(2));
}

#[test]
fn loc_rejects_asymmetric_pair() {
    let e = with_kernels(&tau_pair(Pos::X, Pos::Y), &[kern(Cov::W, Pos::X, Pos::Y)]);
    assert!(loc_reduce(&e, below()).is_err());
}

#[test]
fn loc_reports_unknown_kernel_pattern() {
    let (x, y) = (Pos::X, Pos::Y);
    let k = KernelFactor::new(Cov::W, x, Dec::Lap, y, Dec::None);
    let e = with_kernels(&tau(Pos::Y), &[k, k]);
    let err = loc_reduce(&e, below()).unwrap_err().to_string();
    assert!(err.contains("no Loc rule"), "{err}");
}

fn delta(pow: u32, m: &str) -> Poly {
    let nup = sym("nu").add(&sym("C00").mul(&sym("g")).scale_int(2));
    nup.pow(pow).mul(&sym(&format!("{m}+"))).sub(&sym("nu").pow(pow).mul(&sym(m)))
}

#[test]
fn quartic_coefficients_of_f_and_p() {
    let m = perturbative_map(&symbolic_v(), below()).unwrap();
    let g = sym("g");
    let f_tau2 = m.w_loc.get(Basis::Tau2).scale_int(2);
    let expect = g.pow(2).mul(&sym("w2")).scale_int(16).add(&g.mul(&sym("nu")).mul(&sym("w1")).scale_int(8));
    assert_eq!(f_tau2, expect);
    let dw2 = sym("w2+").sub(&sym("w2"));
    let p_tau2 = g.pow(2).mul(&dw2).scale_int(8).add(&g.mul(&delta(1, "w1")).scale_int(4));
    assert_eq!(m.p.get(Basis::Tau2), p_tau2);
}

#[test]
fn observable_part_of_p() {
    let m = perturbative_map(&symbolic_v(), below()).unwrap();
    let d = delta(1, "w1");
    assert_eq!(m.p.get(Basis::SigmaPhiBarA), d.mul(&sym("lam_a")).neg());
    assert_eq!(m.p.get(Basis::SigmaBarPhiB), d.mul(&sym("lam_b")).neg());
    let cab = sym("w_ab+").sub(&sym("w_ab"));
    let half = cab.mul(&sym("lam_a")).mul(&sym("lam_b")).scale(&rat(1, 2));
    assert_eq!(m.p.get(Basis::SigmaSigmaBarA), half);
    assert_eq!(m.p.get(Basis::SigmaSigmaBarB), half);

    let above = LocOptions { phase: Phase::AtOrAboveJab, ..below() };
    let m = perturbative_map(&symbolic_v(), above).unwrap();
    assert!(m.p.get(Basis::SigmaPhiBarA).is_zero());
    assert_eq!(m.p.get(Basis::SigmaSigmaBarA), half);
}

#[test]
fn bulk_v_pt_closes_in_the_basis() {
    for phase in [Phase::BelowJab, Phase::AtOrAboveJab] {
        let m = perturbative_map(&symbolic_v(), LocOptions { phase, ..below() }).unwrap();
        assert!(m.p.get(Basis::One).is_zero());
        assert!(m.v_pt.get(Basis::One).is_zero());
        let bulk = bulk_part(&m.v_pt.expand());
        for (s, _) in bulk.iter() {
            assert!(s.atoms.iter().all(|a| a.pos == Pos::X));
        }
        assert!(apply_q(&bulk).is_zero());
    }
}

#[test]
fn g_and_q_rows() {
    let t = derive_flow_table(below()).unwrap();
    let g = sym("g");
    let g_pt = g
        .sub(&g.pow(2).mul(&sym("w2+").sub(&sym("w2"))).scale_int(8))
        .sub(&g.mul(&delta(1, "w1")).scale_int(4));
    assert_eq!(t.get("g").unwrap(), &g_pt);
    let q = sym("q_a").add(&sym("lam_a").mul(&sym("lam_b")).mul(&sym("w_ab+").sub(&sym("w_ab"))));
    assert_eq!(t.get("q_a").unwrap(), &q);
}

#[test]
fn derived_table_against_closed_form() {
    // Every row agrees except the gz term of ν, whose sign is opposite.
    for phase in [Phase::BelowJab, Phase::AtOrAboveJab] {
        let t = derive_flow_table(LocOptions { phase, ..below() }).unwrap();
        let cmp = compare(&t, &expected_flow_table(phase));
        let bad: Vec<&str> = cmp.mismatches().iter().map(|r| r.coupling.as_str()).collect();
        assert_eq!(bad, vec!["nu"]);
        let pip = sym("wdw1+").sub(&sym("wdw1")).scale_int(2);
        let diff = &cmp.mismatches()[0].difference;
        assert_eq!(diff, &pip.mul(&sym("g")).mul(&sym("z")).scale_int(2));
    }
}

#[test]
fn table_is_closed_over_known_symbols() {
    let t = derive_flow_table(below()).unwrap();
    let known = all_symbols();
    for (_, p) in &t.rows {
        for s in p.symbols() {
            assert!(known.contains(&s.0), "{s}");
        }
    }
    let json = t.to_json();
    assert_eq!(json.as_array().unwrap().len(), 8);
}

#[test]
fn q_on_quartic_boson() {
    use Species::*;
    let pp = Expr::term(Poly::one(), Shape::atoms(vec![Atom::new(Phi, Pos::X), Atom::new(PhiBar, Pos::X)]));
    let lhs = apply_q(&pp.mul(&pp));
    let rhs = pp.mul(&apply_q(&pp)).scale(&Poly::int(2));
    assert_eq!(lhs, rhs);
    let mixed = Expr::term(
        Poly::one(),
        Shape::atoms(vec![
            Atom::new(Phi, Pos::X),
            Atom::new(PhiBar, Pos::X),
            Atom::new(Psi, Pos::X),
            Atom::new(PsiBar, Pos::X),
        ]),
    );
    for b in -3..=3 {
        let e = pp.mul(&pp).add(&mixed.scale(&Poly::int(b)));
        assert_eq!(apply_q(&e).is_zero(), b == 2, "beta = {b}");
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    arb_expr_with(false)
}

/// Sums of monomials with an even number of fermions.
fn arb_even_expr() -> impl Strategy<Value = Expr> {
    arb_expr_with(true)
}

fn arb_expr_with(even: bool) -> impl Strategy<Value = Expr> {
    let atom = (0usize..4, 0usize..2, 0usize..3).prop_map(|(s, p, d)| {
        let species = [Species::Phi, Species::PhiBar, Species::Psi, Species::PsiBar][s];
        let pos = [Pos::X, Pos::Y][p];
        let dec = [Dec::None, Dec::None, Dec::Lap][d];
        Atom::with(species, pos, dec)
    });
    let mono = (-5i64..=5, prop::collection::vec(atom, 0..=4));
    let mono = mono.prop_filter("even grading", move |(_, atoms)| {
        !even || atoms.iter().filter(|a| a.species.fermionic()).count() % 2 == 0
    });
    prop::collection::vec(mono, 1..6).prop_map(|ms| {
        let mut e = Expr::zero();
        for (c, atoms) in ms {
            e.push(Poly::int(c), Shape::atoms(atoms));
        }
        e
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wick_exponentials_are_inverse(e in arb_expr()) {
        let back = wick_exp(&wick_exp(&e, Cov::C, false), Cov::C, true);
        prop_assert_eq!(back, e);
    }

    #[test]
    fn q_commutes_with_laplacian(e in arb_expr()) {
        prop_assert_eq!(apply_q(&laplacian(&e, Cov::C)), laplacian(&apply_q(&e), Cov::C));
    }

    #[test]
    fn q_commutes_with_wick(e in arb_expr()) {
        for inv in [false, true] {
            prop_assert_eq!(apply_q(&wick_exp(&e, Cov::C, inv)), wick_exp(&apply_q(&e), Cov::C, inv));
        }
    }

    #[test]
    fn truncated_pair_matches_definition(a in arb_expr(), b in arb_expr()) {
        prop_assert_eq!(truncated_pair(&a, &b, Cov::W), truncated_pair_by_definition(&a, &b, Cov::W));
    }

    #[test]
    fn truncated_pair_symmetric_on_even(a in arb_even_expr(), b in arb_even_expr()) {
        prop_assert_eq!(truncated_pair(&a, &b, Cov::W), truncated_pair(&b, &a, Cov::W));
    }
}

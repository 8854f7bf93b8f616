use approx::assert_relative_eq;
use proptest::prelude::*;
use rgpt_core::coeffs::*;
use rgpt_core::decomp::*;
use rgpt_core::flow::*;
use rgpt_core::lattice::*;
use rgpt_core::window::default_window;
use rgpt_core::CoreError;

/// Synthetic raw moments with every entry nonzero.
fn raw(j: usize, s: f64) -> RawMoments {
    RawMoments {
        j,
        w1: 0.3 * s,
        w2: 0.7 * s,
        w3: 1.1 * s,
        wss: 0.2 * s,
        w2ss: 0.4 * s,
        w3ss: 0.9 * s,
        wdw1: -0.15 * s,
        wdwss: 0.05 * s,
        gwss: 0.12 * s,
        c00: 0.6,
        cab: 0.08,
    }
}

fn synthetic() -> (FlowCoefficients, RawMoments, RawMoments) {
    let table = [raw(0, 0.0), raw(1, 0.5), raw(2, 1.0), raw(3, 1.6)];
    (coefficient_table(&table, 2)[2], table[2], table[3])
}

fn tables(side_exp: usize) -> FlowTables {
    let s = TorusSpec::new(4, 2, side_exp).unwrap();
    let dec = build_decomposition(s, 0.0, default_window().as_ref(), BuildOptions::default()).unwrap();
    FlowTables::build(&dec, &ab_offset(4, 3)).unwrap()
}

fn bulk_coeffs() -> BulkCoefficients {
    let (fc, _, next) = synthetic();
    BulkCoefficients::new(&fc, &next, 2)
}

#[test]
fn phibar_examples() {
    let c = bulk_coeffs();
    let t = phibar(&TransformedVector { g: 0.0, z: 0.0, mu: 0.3 }, &c);
    assert_eq!((t.g, t.z), (0.0, 0.0));
    assert_eq!(t.mu, 4.0 * 0.3);

    let c1 = BulkCoefficients { beta: 1.0, ..c };
    assert_relative_eq!(phibar(&TransformedVector { g: 0.1, z: 0.0, mu: 0.0 }, &c1).g, 0.09);
}

#[test]
fn constant_beta_asymptotics() {
    let beta = beta_reference(2);
    let orbit = constant_beta_orbit(0.1, beta, 500);
    assert_eq!(orbit.len(), 501);
    assert!(orbit.windows(2).all(|p| p[1] < p[0]));
    assert!((orbit[500] * beta * 500.0 - 1.0).abs() <= 0.3);
    // Direct oracle: 1/x_{n+1} = 1/x_n + β + β²x_n + O(x²).
    let lower = 1.0 / (1.0 / 0.1 + 500.0 * beta * (1.0 + beta * 0.1));
    let upper = 1.0 / (1.0 / 0.1 + 500.0 * beta);
    assert!(orbit[500] > lower && orbit[500] < upper);
}

#[test]
fn zero_g_examples() {
    let (fc, a, b) = synthetic();
    let nu0 = 0.2;
    let v = CouplingVector { nu: nu0, ..Default::default() };
    let out = phi_pt(&v, &fc, &a, &b, 10);
    let d = |w: fn(&RawMoments) -> f64, p: f64| p * w(&b) - p * w(&a);
    assert_eq!(out.g, 0.0);
    assert_eq!((out.lam_a, out.lam_b, out.q_a, out.q_b), (0.0, 0.0, 0.0, 0.0));
    assert_relative_eq!(out.nu, nu0 - d(|r| r.w1, nu0 * nu0), max_relative = 1e-14);
    assert_relative_eq!(out.z, -0.5 * d(|r| r.wss, nu0 * nu0), max_relative = 1e-14);
    assert_eq!(out.y, 0.0);

    let c = BulkCoefficients::new(&fc, &b, 2);
    let mu0 = 0.05;
    let bn = phi_pt_bulk(&BulkVector { g: 0.0, mu: mu0, z0: 0.0 }, &c);
    let lmu = 4.0 * mu0;
    assert_relative_eq!(bn.mu, lmu - (lmu * lmu * c.wbar1_next - mu0 * mu0 * c.wbar1), max_relative = 1e-14);
}

#[test]
fn observables_do_not_feed_back() {
    let (fc, a, b) = synthetic();
    let base = CouplingVector { g: 0.05, nu: 0.01, y: 0.02, z: -0.01, ..Default::default() };
    let with = CouplingVector { lam_a: 0.3, lam_b: -0.2, q_a: 0.7, q_b: 0.1, ..base };
    let (p, q) = (phi_pt(&base, &fc, &a, &b, 10), phi_pt(&with, &fc, &a, &b, 10));
    assert_eq!((p.g, p.nu, p.y, p.z), (q.g, q.nu, q.y, q.z));
}

#[test]
fn observable_flow() {
    let (fc, a, b) = synthetic();
    let v = CouplingVector { g: 0.05, nu: 0.01, lam_a: 0.3, lam_b: -0.2, q_a: 0.7, q_b: 0.1, ..Default::default() };
    let below = phi_pt(&v, &fc, &a, &b, fc.j + 2);
    let dq = 0.3 * -0.2 * a.cab;
    assert_relative_eq!(below.q_a, 0.7 + dq);
    assert_relative_eq!(below.q_b, 0.1 + dq);
    let nup = 0.01 + fc.etap * 0.05;
    let d_nu_w1 = nup * b.w1 - 0.01 * a.w1;
    assert_relative_eq!(below.lam_a, (1.0 - d_nu_w1) * 0.3);
    let frozen = phi_pt(&v, &fc, &a, &b, fc.j + 1);
    assert_eq!((frozen.lam_a, frozen.lam_b), (0.3, -0.2));
    assert_eq!(frozen.q_a, below.q_a);
}

#[test]
fn bulk_map_against_full_map() {
    let (fc, a, b) = synthetic();
    let c = BulkCoefficients::new(&fc, &b, 2);
    let v = CouplingVector { g: 0.03, nu: 0.004, z: 0.02, ..Default::default() };
    let full = phi_pt(&v, &fc, &a, &b, 10).bulk(fc.j + 1, 2);
    let bulk = phi_pt_bulk(&v.bulk(fc.j, 2), &c);
    assert_relative_eq!(full.g, bulk.g, max_relative = 1e-12);
    assert_relative_eq!(full.z0, bulk.z0, max_relative = 1e-12);
    // δ[μ²w̄⁽¹⁾] weights the old-scale term by L^{2j} rather than L^{2j+2}.
    let mu = v.bulk(fc.j, 2).mu;
    assert_relative_eq!(full.mu - bulk.mu, 3.0 * mu * mu * c.wbar1, max_relative = 1e-9);

    // With y ≠ 0 the z⁽⁰⁾ maps differ by 2yδ[νw⁽¹⁾].
    let y = 0.01;
    let vy = CouplingVector { y, z: v.z - y, ..v };
    let full = phi_pt(&vy, &fc, &a, &b, 10).bulk(fc.j + 1, 2);
    let bulk = phi_pt_bulk(&vy.bulk(fc.j, 2), &c);
    let d = delta_mu_wbar1(&vy.bulk(fc.j, 2), &c);
    assert_relative_eq!(full.z0 - bulk.z0, 2.0 * y * d, max_relative = 1e-9);
}

#[test]
fn conjugacy_residual_is_cubic() {
    let c = bulk_coeffs();
    // The plain difference δ[μ²w̄⁽¹⁾] leaves −(L²−1)μ²w̄⁽¹⁾ at second order.
    let quad = |b: &BulkVector| -3.0 * b.mu * b.mu * c.wbar1;
    for dir in [
        BulkVector { g: 1.0, mu: 0.0, z0: 0.0 },
        BulkVector { g: 0.6, mu: -0.5, z0: 0.3 },
        BulkVector { g: 0.2, mu: 0.9, z0: -0.4 },
    ] {
        let r = |e: f64| {
            let b = dir.scale(e);
            let mut res = conjugacy_residual(&b, &c);
            res.mu -= quad(&b);
            res.max_abs()
        };
        let (r1, r2) = (r(4e-3), r(2e-3));
        assert!(r1 > 0.0);
        let ratio = r1 / r2;
        assert!((ratio - 8.0).abs() < 0.5, "{dir:?}: {ratio}");
    }
    assert_eq!(conjugacy_residual(&BulkVector::default(), &c).max_abs(), 0.0);
}

#[test]
fn conjugacy_is_cubic_without_w1() {
    let c = BulkCoefficients { wbar1: 0.0, wbar1_next: 0.0, ..bulk_coeffs() };
    let dir = BulkVector { g: 0.6, mu: -0.5, z0: 0.3 };
    let r = |e: f64| conjugacy_residual(&dir.scale(e), &c).max_abs();
    assert!((r(4e-3) / r(2e-3) - 8.0).abs() < 0.5);
}

proptest! {
    #[test]
    fn transform_roundtrip(g in -0.05f64..0.05, mu in -0.05f64..0.05, z0 in -0.05f64..0.05) {
        let c = bulk_coeffs();
        let b = BulkVector { g, mu, z0 };
        let back = invert_t(&transform_t(&b, &c), &c).unwrap();
        prop_assert!((back.g - g).abs() <= 1e-14);
        prop_assert!((back.mu - mu).abs() <= 1e-14);
        prop_assert!((back.z0 - z0).abs() <= 1e-14);
    }
}

#[test]
fn zero_couplings_stay_zero() {
    let t = tables(4);
    let traj = iterate_flow(&CouplingVector::default(), &t, 1..t.steps(), 3, FlowOptions::default()).unwrap();
    assert_eq!(traj.rows.len(), t.steps());
    for r in &traj.rows {
        assert!(r.values().iter().all(|x| *x == 0.0));
    }
}

#[test]
fn gbar_decreases_and_is_comparable() {
    let t = tables(5);
    let v0 = CouplingVector { g: 0.05, ..Default::default() };
    let traj = iterate_flow(&v0, &t, 1..t.steps(), coalescence_scale(2, 3.0), FlowOptions::default()).unwrap();
    assert!(traj.summary.gbar_decreasing, "{:?}", traj.summary);
    assert!(traj.summary.comparable, "{:?}", traj.summary);
    assert_eq!(traj.rows.first().unwrap().j, 1);
}

#[test]
fn divergence_is_reported() {
    let t = tables(4);
    let v0 = CouplingVector { g: 50.0, ..Default::default() };
    let err = iterate_flow(&v0, &t, 0..t.steps(), 3, FlowOptions { divergence: 10.0 }).unwrap_err();
    assert!(matches!(err, CoreError::Divergence { .. }), "{err}");
    assert!(iterate_flow(&v0, &t, 0..t.steps() + 1, 3, FlowOptions::default()).is_err());
}


use approx::assert_relative_eq;
use rgpt_core::coeffs::*;
use rgpt_core::decomp::*;
use rgpt_core::lattice::*;
use rgpt_core::window::default_window;
use rgpt_core::CoreError;

fn spec(d: usize, l: usize, n: usize) -> TorusSpec {
    TorusSpec::new(d, l, n).unwrap()
}

fn build(s: TorusSpec, m2: f64) -> ScaleDecomposition {
    build_decomposition(s, m2, default_window().as_ref(), BuildOptions::default()).unwrap()
}

/// C_1 = δ₀ and C_{2,2} = ½(δ_{e₁} + δ_{−e₁}) on four sites.
fn two_slice_toy() -> ScaleDecomposition {
    let s = spec(1, 2, 2);
    let c2 = Kernel::delta(s, &[1]).add(&Kernel::delta(s, &[-1])).unwrap().scale(0.5);
    ScaleDecomposition::from_slices(s, 1.0, vec![Kernel::delta(s, &[0])], c2, LaplacianSign::default())
        .unwrap()
}

#[test]
fn scale_zero_has_vanishing_moments() {
    let dec = build(spec(4, 2, 3), 0.0);
    let r = raw_moments(&dec, 0, &ab_offset(4, 1)).unwrap();
    assert_eq!((r.w1, r.w2, r.w3, r.wss, r.w2ss, r.wdw1, r.gwss), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!(r.c00, dec.slice(1).unwrap().origin());
    assert!(matches!(raw_moments(&dec, 4, &[0; 4]), Err(CoreError::ScaleOutOfRange { .. })));
}

#[test]
fn delta_slice_moments() {
    let s = spec(2, 2, 2);
    let dec = ScaleDecomposition::from_slices(
        s,
        1.0,
        vec![Kernel::delta(s, &[0, 0])],
        Kernel::zeros(s),
        LaplacianSign::default(),
    )
    .unwrap();
    let r = raw_moments(&dec, 1, &[1, 0]).unwrap();
    assert_eq!((r.w1, r.w2, r.w3, r.wss), (1.0, 1.0, 1.0, 0.0));
}

#[test]
fn two_slice_toy_coefficients() {
    let dec = two_slice_toy();
    let raw = raw_moment_table(&dec, &[1]).unwrap();
    let fc = greek_coefficients(&raw[1], &raw[2]);
    assert_eq!(raw[2].w2 - raw[1].w2, 0.5);
    assert_eq!(fc.beta, 4.0);
    assert_eq!(fc.etap, 0.0);
    // C_{j+1}(a − b) at the designated offset.
    assert_eq!(raw[1].cab, 0.5);
}

#[test]
fn moment_table_matches_direct_computation() {
    let dec = build(spec(3, 2, 4), 0.3);
    let ab = ab_offset(3, 2);
    let table = raw_moment_table(&dec, &ab).unwrap();
    for j in 0..=4 {
        let r = raw_moments(&dec, j, &ab).unwrap();
        let t = table[j];
        for (a, b) in [(r.w1, t.w1), (r.w2, t.w2), (r.w3, t.w3), (r.wss, t.wss), (r.w2ss, t.w2ss), (r.wdwss, t.wdwss), (r.gwss, t.gwss), (r.c00, t.c00), (r.cab, t.cab)] {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-3), "j = {j}: {a} vs {b}");
        }
    }
}

#[test]
fn w_n_is_the_green_function() {
    let s = spec(4, 2, 3);
    let dec = build(s, 0.5);
    let g = green_kernel(s, 0.5, ZeroMode::Drop).unwrap();
    let r = raw_moments(&dec, 3, &[1, 0, 0, 0]).unwrap();
    assert_relative_eq!(r.w1, g.sum(), max_relative = 1e-12);
    assert_relative_eq!(r.w1, 2.0, max_relative = 1e-12); // Σ G = 1/m²
}

#[test]
fn normalisation_identities() {
    let dec = build(spec(4, 2, 4), 0.0);
    let raw = raw_moment_table(&dec, &ab_offset(4, 3)).unwrap();
    let fc = coefficient_table(&raw, 2);
    for f in &fc {
        let up = 4f64.powi(f.j as i32 + 1);
        assert_eq!(f.omega, 4.0 * 0.25 * f.beta);
        assert_eq!(f.eta, up * f.etap);
        assert_eq!(f.xi, up * f.xip);
        assert_eq!(f.pi, up * f.pip);
        assert_eq!(f.wbar1, 4f64.powi(-(f.j as i32)) * raw[f.j].w1);
        assert_eq!(f.beta, 8.0 * f.d_w2);
    }
}

#[test]
fn beta_deltas_telescope() {
    let dec = build(spec(4, 2, 4), 0.0);
    let raw = raw_moment_table(&dec, &[0; 4]).unwrap();
    let fc = coefficient_table(&raw, 2);
    for big_j in 1..=4 {
        let s: f64 = fc[..big_j].iter().map(|f| f.d_w2).sum();
        assert_relative_eq!(s, raw[big_j].w2, max_relative = 1e-13);
    }
}

#[test]
fn second_moments_are_axis_independent() {
    let dec = build(spec(4, 2, 4), 0.0);
    let w = dec.partial_sum(3).unwrap();
    for axis in 1..4 {
        assert!((second_moment(&w, 0) - second_moment(&w, axis)).abs() <= 1e-10 * second_moment(&w, 0).abs());
    }
}

#[test]
fn spectral_beta_matches_real_space() {
    let s = spec(4, 2, 4);
    let dec = build(s, 0.0);
    let raw = raw_moment_table(&dec, &[0; 4]).unwrap();
    let fc = coefficient_table(&raw, 2);
    let spectral = beta_sequence_spectral(s, 0.0, default_window().as_ref(), ZeroMode::Drop).unwrap();
    assert_eq!(spectral.len(), fc.len());
    for (a, f) in spectral.iter().zip(&fc) {
        assert_relative_eq!(*a, f.beta, max_relative = 1e-10);
    }
    assert!(beta_sequence_spectral(s, 0.0, default_window().as_ref(), ZeroMode::Forbid).is_err());
}

#[test]
fn usable_betas_near_limit() {
    // β_{N−1} involves the remainder C_{N,N} and is excluded.
    let dec = build(spec(4, 2, 5), 0.0);
    let bl = beta_limit(&dec).unwrap();
    assert_eq!(bl.betas.len(), 3);
    let last = *bl.betas.last().unwrap();
    assert!((last - bl.reference).abs() <= 0.25 * bl.reference, "{bl:?}");
}

#[test]
fn beta_limit_preconditions() {
    assert!(matches!(beta_limit(&build(spec(4, 2, 4), 0.0)), Err(CoreError::TooFewScales(2))));
    assert!(matches!(beta_limit(&build(spec(2, 2, 6), 0.5)), Err(CoreError::NotMassless(_))));
}

#[test]
fn reference_values() {
    assert_relative_eq!(beta_reference(2), 0.0702305, max_relative = 1e-6);
    assert!((beta_reference(2) - 0.070233).abs() < 5e-6);
    assert_relative_eq!(beta_reference(3), 3f64.ln() / std::f64::consts::PI.powi(2));
    assert_eq!(richardson(&[1.0, 1.0], 2), 1.0);
    // Exact for a + b L^{-2j}.
    let seq: Vec<f64> = (1..4).map(|j| 0.07 + 0.3 * 4f64.powi(-j)).collect();
    assert_relative_eq!(richardson(&seq, 2), 0.07, max_relative = 1e-14);
}

#[test]
fn mass_and_omega_scales() {
    assert_eq!(mass_scale(4f64.powi(-3), 2), Some(3));
    assert_eq!(mass_scale(9f64.powi(-2), 3), Some(2));
    let b: Vec<f64> = (0..6).map(|j| 0.3 * 2f64.powi(-j)).collect();
    assert_eq!(omega_scale(&b, 0, 2.0), Some(0));
    assert_eq!(omega_scale(&[], 0, 2.0), None);
}

#[test]
fn omega_scale_tracks_mass_scale() {
    let s = spec(4, 2, 5);
    for k in 2..=4 {
        let m2 = 4f64.powi(-k);
        let betas = beta_sequence_spectral(s, m2, default_window().as_ref(), ZeroMode::Drop).unwrap();
        let usable: Vec<f64> = usable_scales(5).map(|j| betas[j]).collect();
        let (jm, jo) = scales(m2, 2, &usable, 1, 2.0);
        assert!((jm.unwrap() - jo.unwrap()).abs() <= 3, "k = {k}: {jm:?} {jo:?}");
    }
}

#[test]
fn assumption_report() {
    let zero = vec![FlowCoefficients { j: 1, ..Default::default() }, FlowCoefficients { j: 2, ..Default::default() }];
    let r = check_assumptions(&zero, 2.0, 0.0);
    assert!(r.a2.values().all(|v| *v == 0.0));

    let dec = build(spec(4, 2, 5), 4f64.powi(-3));
    let raw = raw_moment_table(&dec, &[0; 4]).unwrap();
    let fc = coefficient_table(&raw, 2);
    let r = check_assumptions(&fc[1..], 2.0, 0.05);
    assert_eq!(r.a2.len(), 5);
    assert!(r.a2.values().all(|v| v.is_finite()));

    let dec = build(spec(4, 2, 5), 0.0);
    let raw = raw_moment_table(&dec, &[0; 4]).unwrap();
    let fc = coefficient_table(&raw, 2);
    let r = check_assumptions(&fc[1..], 2.0, 0.05);
    // Small β only at the first scales, if at all.
    assert!(r.a1_exceptions.iter().all(|&j| j <= 2), "{r:?}");
}

#[test]
fn coincidence_profile_grows_like_l2j() {
    let dec = build(spec(4, 2, 5), 0.0);
    let raw = raw_moment_table(&dec, &[0; 4]).unwrap();
    let fc = coefficient_table(&raw, 2);
    let p = bound_profiles(&fc[2..=4], &raw, 2);
    for key in ["beta", "w2ss_scaled", "etap_scaled", "pip_scaled", "xip_scaled"] {
        assert!(bounded_by_median(&p[key], 10.0), "{key}: {:?}", p[key]);
    }
}

#[test]
fn median_bound() {
    assert!(bounded_by_median(&[1.0, 2.0, 3.0], 10.0));
    assert!(!bounded_by_median(&[1.0, 1.0, 30.0], 10.0));
    assert!(bounded_by_median(&[0.0, 1e-14, -1e-13], 10.0));
}

#[test]
fn coalescence_scale_of_default_offset() {
    assert_eq!(coalescence_scale(2, 3.0), 2);
    assert_eq!(ab_offset(4, 3), vec![3, 0, 0, 0]);
}

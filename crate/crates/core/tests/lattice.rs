use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgpt_core::lattice::*;
use rgpt_core::CoreError;

fn spec(d: usize, l: usize, n: usize) -> TorusSpec {
    TorusSpec::new(d, l, n).unwrap()
}

/// Direct O(M^{2d}) periodic convolution.
fn brute_convolve(a: &Kernel, b: &Kernel) -> Kernel {
    let s = *a.spec();
    let mut out = vec![0.0; s.sites()];
    for (x, o) in out.iter_mut().enumerate() {
        let cx = s.coords(x);
        for y in 0..s.sites() {
            let cy = s.coords(y);
            let diff: Vec<i64> = cx.iter().zip(&cy).map(|(p, q)| *p as i64 - *q as i64).collect();
            *o += a.values()[y] * b.values()[s.index(&diff)];
        }
    }
    Kernel::from_values(s, out).unwrap()
}

fn random_even(s: TorusSpec, rng: &mut ChaCha8Rng) -> Kernel {
    let raw: Vec<f64> = (0..s.sites()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k = Kernel::from_values(s, raw).unwrap();
    // Symmetrise under x → −x.
    Kernel::from_fn(s, |c| {
        let neg: Vec<i64> = c.iter().map(|v| -v).collect();
        0.5 * (k.at(c) + k.at(&neg))
    })
}

#[test]
fn two_site_green_function() {
    // (−Δ + 1) on two sites is [[3, −2], [−2, 3]].
    let g = green_kernel(spec(1, 2, 1), 1.0, ZeroMode::Forbid).unwrap();
    assert_relative_eq!(g.values()[0], 0.6, epsilon = 1e-15);
    assert_relative_eq!(g.values()[1], 0.4, epsilon = 1e-15);
}

#[test]
fn massless_green_needs_policy() {
    let e = green_kernel(spec(2, 2, 2), 0.0, ZeroMode::Forbid).unwrap_err();
    assert!(matches!(e, CoreError::MasslessUndefined));
    assert!(e.to_string().contains("massless Green function undefined on torus"));
    let g = green_kernel(spec(2, 2, 2), 0.0, ZeroMode::Drop).unwrap();
    assert!(g.sum().abs() < 1e-12);
}

#[test]
fn stencil_inverts_green_function() {
    let s = spec(4, 2, 3);
    let g = green_kernel(s, 1.0, ZeroMode::Forbid).unwrap();
    // Moment-identity Δ is the positive operator Σ(2f − f(x+e) − f(x−e)).
    let lap = apply_difference(&g, DiffOp::Laplacian, LaplacianSign::MomentIdentity).unwrap();
    let r = lap.add(&g).unwrap().sub(&Kernel::delta(s, &[0, 0, 0, 0])).unwrap();
    assert!(r.max_abs() < 1e-10);
    let lit = apply_difference(&g, DiffOp::Laplacian, LaplacianSign::Literal).unwrap();
    assert!(lit.add(&lap).unwrap().max_abs() < 1e-15);
}

#[test]
fn green_function_permutation_symmetry() {
    let g = green_kernel(spec(4, 2, 4), 0.25, ZeroMode::Forbid).unwrap();
    let x = [1i64, 2, 0, 0];
    let v = g.at(&x);
    let perms = [[0, 1, 2, 3], [1, 0, 2, 3], [2, 3, 0, 1], [3, 2, 1, 0], [0, 2, 1, 3], [1, 3, 0, 2]];
    for p in perms {
        let y: Vec<i64> = p.iter().map(|&i| x[i]).collect();
        assert_relative_eq!(g.at(&y), v, max_relative = 1e-12);
    }
    assert!(g.evenness_defect() < 1e-12);
}

#[test]
fn convolution_identities() {
    let s = spec(1, 2, 2);
    let e1 = Kernel::delta(s, &[1]);
    assert_eq!(convolve(&e1, &e1).unwrap().values().iter().map(|v| v.round()).collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = spec(2, 2, 3);
    let b = random_even(s, &mut rng);
    let id = convolve(&Kernel::delta(s, &[0, 0]), &b).unwrap();
    assert!(id.sub(&b).unwrap().max_abs() < 1e-14);
}

#[test]
fn convolution_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in [spec(2, 2, 3), spec(1, 3, 2), spec(3, 2, 2), spec(2, 4, 2)] {
        let a = random_even(s, &mut rng);
        let b = random_even(s, &mut rng);
        let fast = convolve(&a, &b).unwrap();
        let slow = brute_convolve(&a, &b);
        assert!(fast.sub(&slow).unwrap().max_abs() < 1e-10, "{s}");
    }
}

#[test]
fn mismatched_specs_rejected() {
    let a = Kernel::zeros(spec(2, 2, 2));
    let b = Kernel::zeros(spec(2, 2, 3));
    assert!(matches!(convolve(&a, &b), Err(CoreError::SpecMismatch(..))));
}

#[test]
fn laplacian_of_constant_vanishes() {
    let k = Kernel::constant(spec(3, 2, 2), 2.5);
    for sign in [LaplacianSign::MomentIdentity, LaplacianSign::Literal] {
        assert_eq!(apply_difference(&k, DiffOp::Laplacian, sign).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn laplacian_second_moment_identity() {
    let s = spec(1, 2, 2);
    let k = Kernel::delta(s, &[0]);
    let mi = apply_difference(&k, DiffOp::Laplacian, LaplacianSign::MomentIdentity).unwrap();
    assert_eq!(second_moment(&mi, 0), -2.0);
    let lit = apply_difference(&k, DiffOp::Laplacian, LaplacianSign::Literal).unwrap();
    assert_eq!(second_moment(&lit, 0), 2.0);
}

#[test]
fn forward_gradient_stencil() {
    let s = spec(2, 6, 1);
    let g = apply_difference(&Kernel::delta(s, &[0, 0]), DiffOp::Grad(Dir::new(0, true)), LaplacianSign::default()).unwrap();
    for i in 0..s.sites() {
        let c: Vec<i64> = s.coords(i).into_iter().map(|v| s.centered(v)).collect();
        let expect = match (c[0], c[1]) {
            (0, 0) => -1.0,
            (-1, 0) => 1.0,
            _ => 0.0,
        };
        assert_eq!(g.values()[i], expect, "{c:?}");
    }
}

#[test]
fn laplacian_matches_fourier_symbol() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = spec(3, 2, 3);
    let k = random_even(s, &mut rng);
    let lap = apply_difference(&k, DiffOp::Laplacian, LaplacianSign::MomentIdentity).unwrap();
    let lam = s.lambda_table();
    let expect = Kernel::from_symbol(s, |i| lam[i] * k.spectrum()[i].re);
    assert!(lap.sub(&expect).unwrap().max_abs() < 1e-10 * k.max_abs().max(1.0));
}

#[test]
fn moments_of_simple_kernels() {
    let s = spec(4, 2, 2);
    let m = moments(&Kernel::delta(s, &[0, 0, 0, 0]));
    assert_eq!((m.q1, m.q2, m.q3, m.qss), (1.0, 1.0, 1.0, 0.0));
    let s = spec(1, 2, 3);
    let k = Kernel::delta(s, &[1]).add(&Kernel::delta(s, &[-1])).unwrap();
    let m = moments(&k);
    assert_eq!((m.q1, m.qss), (2.0, 2.0));
}

#[test]
fn second_moment_rotation_invariance() {
    let g = green_kernel(spec(4, 2, 4), 1.0, ZeroMode::Forbid).unwrap();
    assert_relative_eq!(second_moment(&g, 0), second_moment(&g, 1), max_relative = 1e-10);
}

#[test]
fn parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in [spec(2, 2, 3), spec(4, 2, 2)] {
        let k = random_even(s, &mut rng);
        let real: f64 = k.values().iter().map(|v| v * v).sum();
        assert_relative_eq!(k.spectral_square_sum(), real, max_relative = 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convolution_commutes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spec(2, 2, 2);
        let a = random_even(s, &mut rng);
        let b = random_even(s, &mut rng);
        let d = convolve(&a, &b).unwrap().sub(&convolve(&b, &a).unwrap()).unwrap();
        prop_assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn green_kernels_are_even(m2 in 0.01f64..4.0, n in 1usize..4) {
        let g = green_kernel(spec(2, 2, n), m2, ZeroMode::Forbid).unwrap();
        prop_assert!(g.evenness_defect() < 1e-12);
    }

    #[test]
    fn dump_roundtrip(seed in any::<u64>(), mass in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_even(spec(3, 2, 2), &mut rng);
        let mut buf = Vec::new();
        k.write_dump(&mut buf, mass).unwrap();
        let (back, m) = Kernel::read_dump(&mut &buf[..]).unwrap();
        prop_assert_eq!(back, k);
        prop_assert_eq!(m, mass);
    }
}

use std::f64::consts::PI;

use proptest::prelude::*;

use hkf::torus::{
    alias_table, dft_alias, kl_sample, mercer_kernel, periodized_symbol, GridField, MaternLike, SpectralKernel,
    TorusLattice, Truncation,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn periodized_symbol_is_periodic_and_even(q in 1u32..7, m in -200i64..200, k in -4i64..4, t in 0.6f64..4.0) {
        let n = 1i64 << q;
        let base = periodized_symbol(&[m], q, t, 1e-13).unwrap();
        prop_assert_eq!(periodized_symbol(&[m + k * n], q, t, 1e-13).unwrap(), base);
        let neg = periodized_symbol(&[-m], q, t, 1e-13).unwrap();
        prop_assert!((neg / base - 1.0).abs() < 1e-13);
        prop_assert!(base > 0.0);
    }

    #[test]
    fn periodized_symbol_dominated_by_its_leading_term(q in 2u32..8, m in 1i64..64, t in 0.75f64..3.0) {
        let n = 1i64 << q;
        let c = hkf::torus::FrequencyBox::new(q, 1).canonical(&[m])[0];
        prop_assume!(c != 0 && c.abs() < n / 2);
        let lead = (c.abs() as f64).powf(-2.0 * t);
        let v = periodized_symbol(&[m], q, t, 1e-13).unwrap();
        prop_assert!(v > lead);
        // M_q^t(m) - |m|^{-2t} is of order 2^{-2qt}.
        prop_assert!((v - lead) * (n as f64).powf(2.0 * t) < 4.0 * (1.0 + 2f64.powf(2.0 * t)));
    }

    #[test]
    fn dft_roundtrip_and_linearity(q in 1u32..7, seed in 0u64..1000, a in -3.0f64..3.0) {
        let lat = TorusLattice::new(q, 1);
        let u: Vec<f64> = (0..lat.len()).map(|i| ((i as u64 * 2654435761 + seed) % 1009) as f64 / 1009.0 - 0.5).collect();
        let v: Vec<f64> = (0..lat.len()).map(|i| (i as f64 * 0.37 + seed as f64).sin()).collect();
        let fu = dft_alias(&GridField::torus(lat, u.clone()).unwrap()).unwrap();
        for (x, y) in fu.lattice_values().iter().zip(&u) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        let fv = dft_alias(&GridField::torus(lat, v).unwrap()).unwrap();
        let fw = dft_alias(&GridField::torus(lat, w).unwrap()).unwrap();
        for i in 0..fw.coeffs.len() {
            prop_assert!((fw.coeffs[i] - (fu.coeffs[i] * a + fv.coeffs[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn folding_commutes_with_restriction(q in 2u32..7, r in 1u32..6, seed in 0u64..100) {
        prop_assume!(r < q);
        let field = kl_sample(&MaternLike::power(1.5), TorusLattice::new(q, 1), 64, seed, 0).unwrap();
        let folded = dft_alias(&field).unwrap().fold(r).unwrap();
        let direct = dft_alias(&field.restrict(r).unwrap()).unwrap();
        prop_assert!(folded.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn alias_table_scales_with_sigma(q in 1u32..6, s in 0.8f64..3.0, tau in 0.0f64..2.0, sigma in 0.1f64..10.0) {
        let unit = alias_table(&MaternLike::new(1.0, tau, s).unwrap(), q, 1, &Truncation::oversampled(q, 3), 1e-12).unwrap();
        let scaled = alias_table(&MaternLike::new(sigma, tau, s).unwrap(), q, 1, &Truncation::oversampled(q, 3), 1e-12).unwrap();
        for (a, b) in unit.iter().zip(&scaled) {
            prop_assert!(*a > 0.0);
            prop_assert!((b / (a * sigma * sigma) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mercer_kernel_is_stationary_and_symmetric(x in 0.0f64..1.0, y in 0.0f64..1.0, shift in 0.0f64..1.0, s in 0.8f64..3.0) {
        let p = MaternLike::new(1.0, 0.5, s).unwrap();
        let tr = Truncation::Corrected { half_width: 64 };
        let kxy = mercer_kernel(&[x], &[y], &p, &tr).unwrap();
        let kyx = mercer_kernel(&[y], &[x], &p, &tr).unwrap();
        let shifted = mercer_kernel(&[(x + shift).fract()], &[(y + shift).fract()], &p, &tr).unwrap();
        prop_assert!((kxy - kyx).abs() < 1e-13);
        prop_assert!((kxy - shifted).abs() < 1e-10 * kxy.abs().max(1.0));
        let kxx = mercer_kernel(&[x], &[x], &p, &tr).unwrap();
        prop_assert!(kxy.abs() <= kxx * (1.0 + 1e-12));
    }
}

#[test]
fn cotangent_closed_form_at_t1() {
    for q in 1..=9u32 {
        let n = (1u64 << q) as f64;
        for m in 1..(1i64 << q) {
            let closed = PI * PI / (n * n * (PI * m as f64 / n).sin().powi(2));
            let v = periodized_symbol(&[m], q, 1.0, 1e-13).unwrap();
            assert!((v / closed - 1.0).abs() < 1e-10, "q={q} m={m}");
        }
    }
}

#[test]
fn gram_is_positive_definite_on_lattice() {
    let k = SpectralKernel::new(1, MaternLike::new(1.0, 0.0, 1.25).unwrap(), Truncation::oversampled(4, 4));
    let g = k.gram(&TorusLattice::new(4, 1).points()).unwrap();
    let ev = g.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    assert!(ev.iter().all(|v| *v > 0.0));
}

#[test]
fn kl_streams_are_independent_per_instance() {
    let lat = TorusLattice::new(5, 1);
    let p = MaternLike::power(1.0);
    let a = kl_sample(&p, lat, 128, 3, 0).unwrap();
    let b = kl_sample(&p, lat, 128, 3, 1).unwrap();
    let c = kl_sample(&p, lat, 128, 4, 0).unwrap();
    assert_ne!(a.values, b.values);
    assert_ne!(a.values, c.values);
    assert_eq!(a.values, kl_sample(&p, lat, 128, 3, 0).unwrap().values);
}

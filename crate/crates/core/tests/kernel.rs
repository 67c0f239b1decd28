mod common;

use nlbv::kernel::{beta_k, check_assumptions, Kernel, KernelFamily, KernelSpec, KernelTable};
use nlbv::grid::GridDomain;
use proptest::prelude::*;

fn kernel(family: KernelFamily, n: usize) -> Kernel {
    Kernel::new(KernelSpec::new(family, n)).unwrap()
}

/// Adaptive Simpson quadrature.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn fractional_one_dimensional_profile() {
    let k = kernel(KernelFamily::Fractional { s: 0.5 }, 1);
    for x in [0.1, 0.7, 3.0] {
        assert!((k.eval(&[x]).unwrap() - x.powf(-1.5)).abs() <= 1e-12 * x.powf(-1.5));
        assert_eq!(k.eval(&[-x]).unwrap(), k.eval(&[x]).unwrap());
    }
}

#[test]
fn logarithmic_vanishes_beyond_one() {
    let k = kernel(KernelFamily::Logarithmic { alpha: 1.0 }, 1);
    assert_eq!(k.eval(&[2.0]).unwrap(), 0.0);
    assert!(k.eval(&[0.5]).unwrap() > 0.0);
}

#[test]
fn frac_log_without_power_is_non_integrable() {
    let k = kernel(KernelFamily::FracLog { s: 0.0, alpha: 1.0 }, 1);
    assert!(check_assumptions(&k, &[0.01, 0.1, 0.5]).is_non_integrable);
    assert!(!k.is_integrable());
}

#[test]
fn frac_log_annulus_mass_matches_quadrature() {
    let (s, alpha) = (0.25, 0.5);
    let k = kernel(KernelFamily::FracLog { s, alpha }, 2);
    let radial = |r: f64| 2.0 * std::f64::consts::PI * r.powf(-s - 1.0) * (1.0 - r.ln()).powf(-alpha);
    let oracle = simpson(&radial, 0.1, 0.9, 1e-12);
    let got = k.phi(0.1, 0.9).unwrap();
    assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
}

#[test]
fn mollified_modulus_vanishes_for_non_integrable_kernels() {
    for family in [
        KernelFamily::Fractional { s: 0.5 },
        KernelFamily::FracLog { s: 0.0, alpha: 1.0 },
        KernelFamily::Logarithmic { alpha: 0.5 },
    ] {
        let k = kernel(family, 1);
        let values: Vec<f64> = (2..14).map(|j| k.ell(0.5f64.powi(j), 1.0, 64).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        assert!(values[values.len() - 1] < 0.9 * values[0]);
    }
}

#[test]
fn constant_ball_mollified_modulus_matches_planar_quadrature() {
    let k = kernel(KernelFamily::ConstantBall { radius: 1.0 }, 2);
    let (big_r, eps) = (0.8, 0.2);
    let phi = |a: f64| std::f64::consts::PI * (big_r * big_r - a * a);
    let steps = 1200;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..steps {
        for j in 0..steps {
            let x = -1.0 + (i as f64 + 0.5) * 2.0 / steps as f64;
            let y = -1.0 + (j as f64 + 0.5) * 2.0 / steps as f64;
            let r2 = x * x + y * y;
            if r2 < 1.0 {
                let rho = (1.0 - r2).powi(4);
                num += rho / phi(2.0 * eps * r2.sqrt());
                den += rho;
            }
        }
    }
    let oracle = num / den;
    let got = k.ell(eps, big_r, 64).unwrap();
    assert!(got > 0.0 && got.is_finite());
    assert!((got - oracle).abs() <= 1e-3 * oracle, "{got} vs {oracle}");
}

#[test]
fn annulus_mass_is_monotone_and_blows_up_exactly_without_integrability() {
    let families = [
        (KernelFamily::Fractional { s: 0.5 }, true),
        (KernelFamily::TwoExponent { s0: 0.2, s1: 0.8 }, true),
        (KernelFamily::FracLog { s: 0.0, alpha: 1.0 }, true),
        (KernelFamily::FracLog { s: 0.0, alpha: 2.0 }, false),
        (KernelFamily::Logarithmic { alpha: 2.0 }, false),
        (KernelFamily::ConstantBall { radius: 1.5 }, false),
    ];
    for (family, nint) in families {
        for n in [1, 2] {
            let k = kernel(family.clone(), n);
            let eps: Vec<f64> = (1..=40).map(|j| 0.5f64.powi(j)).collect();
            let phis: Vec<f64> = eps.iter().map(|e| k.phi(*e, 1.0).unwrap()).collect();
            // Past ε ≈ 2^-20 some increments fall below f64 resolution.
            assert!(phis[..20].windows(2).all(|w| w[1] > w[0]), "{family:?} n={n}");
            assert!(phis.windows(2).all(|w| w[1] >= w[0]), "{family:?} n={n}");
            assert!(k.phi(0.1, 0.9).unwrap() < k.phi(0.1, 1.0).unwrap());
            let far = k.phi(1e-300, 1.0).unwrap();
            if nint {
                assert!(far > phis[19] + 0.5, "{family:?} n={n}: {far}");
            } else {
                assert!(phis.iter().all(|p| *p <= far * (1.0 + 1e-12)));
                assert!(far - phis[39] < 0.05 * far, "{family:?} n={n}: {} vs {far}", phis[39]);
            }
            assert_eq!(!k.is_integrable() && k.is_far_integrable(), nint, "{family:?}");
        }
    }
}

#[test]
fn assumption_flags_for_builtin_families() {
    let probes: Vec<f64> = (0..30).map(|k| 1e-3 * 1.5f64.powi(k)).collect();
    let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() < 1e-9);

    let r = check_assumptions(&kernel(KernelFamily::Fractional { s: 0.5 }, 1), &probes);
    assert!(close(r.dec_exponent, 1.5) && close(r.doubling_exponent, 1.5));
    assert!(r.doubling_radius.is_infinite() && r.is_nts && r.is_non_integrable && r.is_positive);

    let r = check_assumptions(&kernel(KernelFamily::TwoExponent { s0: 0.2, s1: 0.8 }, 1), &probes);
    assert!(close(r.dec_exponent, 1.2) && close(r.doubling_exponent, 1.8));
    assert!(r.doubling_radius.is_infinite() && r.is_positive);

    let r = check_assumptions(&kernel(KernelFamily::Logarithmic { alpha: 1.0 }, 1), &probes);
    assert!(!r.is_positive);
    assert!((r.doubling_radius - 0.5).abs() < 1e-12);

    let r = check_assumptions(&kernel(KernelFamily::Fractional { s: 0.3 }, 2), &probes);
    assert!(close(r.dec_exponent, 2.3) && r.dec_n_strict && r.is_symmetric && r.is_radial);

    let r = check_assumptions(&kernel(KernelFamily::ConstantBall { radius: 1.0 }, 2), &probes);
    assert!(!r.is_non_integrable && !r.is_positive && !r.strictly_decreasing);
}

#[test]
fn truncated_table_mass_plus_tail_approximates_the_annulus_mass() {
    for (family, h) in [
        (KernelFamily::ConstantBall { radius: 1.0 }, 1.0 / 32.0),
        (KernelFamily::Logarithmic { alpha: 2.0 }, 1.0 / 32.0),
        (KernelFamily::FracLog { s: 0.0, alpha: 3.0 }, 1.0 / 32.0),
    ] {
        let k = Kernel::new(KernelSpec::new(family.clone(), 2).with_window(40)).unwrap();
        let g = GridDomain::rect(4, 4, h).unwrap();
        let t = KernelTable::new(&k, &g).unwrap();
        let lattice = t.cell_mass() / h.powi(2) + t.tail_mass();
        let exact = k.phi(h / 2.0, f64::INFINITY).unwrap();
        assert!((lattice - exact).abs() <= 0.05 * exact, "{family:?}: {lattice} vs {exact}");
    }
}

#[test]
fn fractional_kernel_dominates_its_power_comparison() {
    let s = 0.4;
    let k = kernel(KernelFamily::Fractional { s }, 2);
    let q = 2.0 + s;
    for i in 0..100 {
        let r = (i as f64 + 0.5) / 100.0;
        let a = i as f64 * 0.7;
        let x = [r * a.cos(), r * a.sin()];
        assert!(k.eval(&x).unwrap() >= r.powf(-q) * (1.0 - 1e-12));
    }
}

#[test]
fn constant_ball_beta_ratio_approaches_mass() {
    let k = kernel(KernelFamily::ConstantBall { radius: 1.0 }, 2);
    let gaps: Vec<f64> = (0..6)
        .map(|j| {
            let v = 0.5f64.powi(j);
            (beta_k(&k, v, 2, None).unwrap().value / v - k.total_mass()).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    assert!(gaps[5] < 0.02 * k.total_mass());
}

#[test]
fn fractional_beta_scales_like_a_power_of_the_radius() {
    let s = 0.5;
    let k = kernel(KernelFamily::Fractional { s }, 1);
    let base = beta_k(&k, 2.0, 3, None).unwrap();
    for r in [2.0f64, 4.0] {
        let b = beta_k(&k, 2.0 * r, 3, None).unwrap();
        let expected = r.powf(1.0 - s);
        let err = (b.error / b.value + base.error / base.value) * expected;
        assert!((b.value / base.value - expected).abs() <= err.max(1e-9), "r={r}");
    }
}

#[test]
fn fractional_beta_normalisation_is_nonincreasing() {
    let s = 0.3;
    let k = kernel(KernelFamily::Fractional { s }, 2);
    let q = 2.0 + s;
    let vals: Vec<(f64, f64)> = (0..10)
        .map(|j| {
            let v = 0.02 * 2f64.powi(j);
            let b = beta_k(&k, v, 3, None).unwrap();
            let c = v.powf(q / 2.0 - 2.0);
            (b.value * c, b.error * c)
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[1].0 <= w[0].0 + w[0].1 + w[1].1));
}

proptest! {
    #[test]
    fn table_is_symmetric(s in 0.05f64..0.95, window in 1usize..6) {
        let k = Kernel::new(KernelSpec::new(KernelFamily::Fractional { s }, 2).with_window(window)).unwrap();
        let g = GridDomain::rect(3, 3, 0.5).unwrap();
        let t = KernelTable::new(&k, &g).unwrap();
        for o in t.offsets() {
            prop_assert_eq!(t.weight([-o.delta[0], -o.delta[1]]), o.weight);
            prop_assert_eq!(t.weight([o.delta[1], o.delta[0]]), o.weight);
            let oracle = common::weight(&t, o.delta);
            prop_assert!((oracle - o.weight).abs() <= 1e-12 * oracle);
        }
    }

    #[test]
    fn annulus_mass_is_additive(a in 0.01f64..1.0, b in 1.0f64..3.0, c in 3.0f64..9.0) {
        let k = kernel(KernelFamily::TwoExponent { s0: 0.3, s1: 0.6 }, 2);
        let whole = k.phi(a, c).unwrap();
        let parts = k.phi(a, b).unwrap() + k.phi(b, c).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole);
    }
}

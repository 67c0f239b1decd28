mod common;

use common::*;
use nlbv::energy::k_perimeter;
use nlbv::grid::{DiscreteFunction, DiscreteSet, GridDomain, WeightMeasure};
use nlbv::kernel::KernelFamily;
use nlbv::rearrange::{
    center_ordering, center_prefix, dilation_monotonicity_check, isoperimetric_check, isoperimetric_refinement,
    rearrangement_inequality_check, rearrangement_refinement, sym_decreasing_rearrangement, DEFAULT_LATTICE_CONSTANT,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_values(g: &GridDomain) -> impl Strategy<Value = DiscreteFunction> {
    let g = *g;
    prop::collection::vec(-3i8..=3, g.len())
        .prop_map(move |v| DiscreteFunction::new(&g, v.into_iter().map(f64::from).collect()).unwrap())
}

#[test]
fn radial_decreasing_functions_are_fixed() {
    let g = GridDomain::rect(9, 9, 1.0).unwrap();
    let c = g.center();
    // Strictly decreasing in the squared distance, so ties share a value.
    let u = DiscreteFunction::new(&g, (0..g.len()).map(|i| {
        let p = g.coords(i);
        100.0 - ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
    }).collect()).unwrap();
    assert_eq!(sym_decreasing_rearrangement(&u), u);
    let ball = center_prefix(&g, 21);
    let chi = DiscreteFunction::indicator(&ball);
    assert_eq!(sym_decreasing_rearrangement(&chi), chi);
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 3);
    let r = rearrangement_inequality_check(&chi, &t, 0.0).unwrap();
    assert_eq!(r.tv_u, r.tv_ustar);
    let iso = isoperimetric_check(&ball, &t, 0.0).unwrap();
    assert_eq!(iso.p_e, iso.p_ball);
}

#[test]
fn one_dimensional_rearrangement_needs_no_slack() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let g = GridDomain::line(31, 1.0).unwrap();
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 8);
    for _ in 0..200 {
        let u = random_function(&mut rng, &g, &[0.0, 0.0, 0.5, 1.0, -2.0, 3.0]);
        let r = rearrangement_inequality_check(&u, &t, 0.0).unwrap();
        assert!(r.ok, "{r:?}");
    }
}

#[test]
fn two_dimensional_rearrangement_within_lattice_slack() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let g = GridDomain::rect(12, 12, 1.0 / 12.0).unwrap();
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 4);
    for _ in 0..200 {
        let density = rng.gen_range(0.1..0.9);
        let u = DiscreteFunction::new(&g, (0..g.len()).map(|_| if rng.gen_bool(density) { rng.gen_range(-1.0..2.0) } else { 0.0 }).collect()).unwrap();
        let r = rearrangement_inequality_check(&u, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
        assert!(r.ok, "{r:?}");
    }
    let u = random_function(&mut rng, &g, &[0.0, 1.0, 2.0]);
    let refined = rearrangement_refinement(&u, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
    assert!(refined.coarse.ok && refined.fine.ok && refined.tol_shrinks);
}

#[test]
fn isoperimetric_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let g = GridDomain::rect(16, 16, 1.0 / 16.0).unwrap();
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 4);
    for _ in 0..500 {
        let density = rng.gen_range(0.05..0.95);
        let e = random_set(&mut rng, &g, density);
        let iso = isoperimetric_check(&e, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
        assert!(iso.ok, "{iso:?}");
        assert!(rel_close(iso.p_e, perimeter(e.bits(), &g, &t), 1e-9));
    }
    let e = center_prefix(&g, 40);
    let refined = isoperimetric_refinement(&e, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
    assert!(refined.fine.ok && refined.tol_shrinks);
}

#[test]
fn scattered_cells_cost_far_more_than_the_ball() {
    let g = GridDomain::rect(16, 16, 1.0).unwrap();
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 3);
    let checker = DiscreteSet::from_indices(&g, (0..g.len()).filter(|i| {
        let [a, b] = g.multi_index(*i);
        a % 2 == 0 && b % 2 == 0
    }));
    let iso = isoperimetric_check(&checker, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
    assert!(iso.p_e > 3.0 * iso.p_ball, "{iso:?}");
}

#[test]
fn dilations_do_not_raise_the_scaled_perimeter() {
    let g = GridDomain::rect(48, 48, 1.0).unwrap();
    let seed = center_prefix(&g, 13);
    for (family, exponent) in [(KernelFamily::Fractional { s: 0.5 }, 0.75), (KernelFamily::ConstantBall { radius: 3.0 }, 2.0)] {
        let t = table(&g, family, 6);
        let rep = dilation_monotonicity_check(&seed, &t, &[1.0, 2.0, 4.0], DEFAULT_LATTICE_CONSTANT).unwrap();
        assert!((rep.exponent - exponent).abs() < 1e-12);
        assert!(rep.nonincreasing, "{rep:?}");
        let same = dilation_monotonicity_check(&seed, &t, &[2.0, 2.0], 0.0).unwrap();
        assert_eq!(same.steps[0].ratio, same.steps[1].ratio);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn superlevel_sets_are_prefixes(u in grid_values(&GridDomain::rect(5, 7, 1.0).unwrap())) {
        let g = *u.grid();
        let star = sym_decreasing_rearrangement(&u);
        let order = center_ordering(&g);
        let abs = u.map(f64::abs);
        for t in [0.0, 0.5, 1.5, 2.5] {
            let level = star.superlevel(t);
            let prefix = DiscreteSet::from_indices(&g, order.iter().copied().take(level.count()));
            prop_assert_eq!(&level, &prefix);
            prop_assert_eq!(level.count(), abs.superlevel(t).count());
        }
        let nu = WeightMeasure::lebesgue(&g);
        prop_assert_eq!(star.l1_norm(&nu), u.l1_norm(&nu));
        let mut a: Vec<f64> = abs.values().to_vec();
        let mut b: Vec<f64> = star.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn small_sets_pass_the_isoperimetric_check(mask in 1u64..1 << 16) {
        let g = GridDomain::rect(4, 4, 1.0).unwrap();
        let t = table(&g, KernelFamily::ConstantBall { radius: 1.5 }, 2);
        let e = DiscreteSet::from_mask(&g, mask);
        let iso = isoperimetric_check(&e, &t, DEFAULT_LATTICE_CONSTANT).unwrap();
        prop_assert!(iso.ok);
        prop_assert!(rel_close(k_perimeter(&e, &t).unwrap(), perimeter(e.bits(), &g, &t), 1e-9));
    }
}

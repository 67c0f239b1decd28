mod common;

use common::*;
use nlbv::func::{FuncSolver, Stacking};
use nlbv::geom::{verify_comparison, verify_complement, GeomSolver};
use nlbv::grid::{make_ball_set, DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use nlbv::kernel::KernelFamily;
use nlbv::maxflow::{solve_cut, CutProblem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng, nodes: usize) -> CutProblem {
    let mut p = CutProblem::new(nodes);
    for i in 0..nodes {
        p.source_cap[i] = rng.gen_range(0..20);
        p.sink_cap[i] = rng.gen_range(0..20);
        for j in i + 1..nodes {
            if rng.gen_bool(0.4) {
                p.pairs.push((i as u32, j as u32, rng.gen_range(1..15)));
            }
        }
    }
    p
}

/// Minimum cut value with the meet and join of all optimal source sides.
fn brute_cut(p: &CutProblem) -> (i128, Vec<bool>, Vec<bool>) {
    let n = p.len();
    let values: Vec<i128> = (0..1u64 << n).map(|m| p.cut_value(&bits_of(m, n))).collect();
    let best = *values.iter().min().unwrap();
    let (mut meet, mut join) = ((1u64 << n) - 1, 0);
    for (m, v) in values.iter().enumerate() {
        if *v == best {
            meet &= m as u64;
            join |= m as u64;
        }
    }
    (best, bits_of(meet, n), bits_of(join, n))
}

#[test]
fn two_node_chain_matches_all_four_cuts() {
    let mut p = CutProblem::new(2);
    p.source_cap = vec![3, 0];
    p.sink_cap = vec![0, 3];
    p.pairs.push((0, 1, 1));
    let s = solve_cut(&p).unwrap();
    let (best, meet, join) = brute_cut(&p);
    assert_eq!((s.value, best), (1, 1));
    assert_eq!(s.minimal_source_side, meet);
    assert_eq!(s.maximal_source_side, join);
    assert_eq!(s.minimal_source_side, vec![true, false]);
}

#[test]
fn random_nine_node_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let p = random_problem(&mut rng, 9);
        let s = solve_cut(&p).unwrap();
        let (best, meet, join) = brute_cut(&p);
        assert_eq!(s.value, best);
        assert_eq!(s.minimal_source_side, meet);
        assert_eq!(s.maximal_source_side, join);
        assert_eq!(p.cut_value(&s.minimal_source_side), s.value);
        assert_eq!(p.cut_value(&s.maximal_source_side), s.value);
        assert_eq!(s.source_flow.iter().sum::<i128>(), s.value);
        assert_eq!(s.sink_flow.iter().sum::<i128>(), s.value);
    }
}

#[test]
fn sink_sides_grow_under_monotone_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = random_problem(&mut rng, 10);
        let mut q = p.clone();
        for i in 0..q.len() {
            q.sink_cap[i] += rng.gen_range(0..6);
            q.source_cap[i] = (q.source_cap[i] - rng.gen_range(0..6)).max(0);
        }
        let (a, b) = (solve_cut(&p).unwrap(), solve_cut(&q).unwrap());
        let (sa, sb) = (a.minimal_sink_side(), b.minimal_sink_side());
        assert!((0..sa.len()).all(|i| !sa[i] || sb[i]));
        let (sa, sb) = (a.maximal_sink_side(), b.maximal_sink_side());
        assert!((0..sa.len()).all(|i| !sa[i] || sb[i]));
    }
}

fn setup(side: usize, exterior: Exterior, rng: &mut ChaCha8Rng) -> (GridDomain, nlbv::kernel::KernelTable, WeightMeasure) {
    let g = GridDomain::rect(side, side, 1.0).unwrap().with_exterior(exterior);
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 2);
    let nu = random_weights(rng, &g);
    (g, t, nu)
}

#[test]
fn extreme_fidelities() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..20 {
        let exterior = if k % 2 == 0 { Exterior::Vacuum } else { Exterior::Detached };
        let (g, t, nu) = setup(3, exterior, &mut rng);
        let solver = GeomSolver::new(&t, &nu).unwrap();
        let e = random_set(&mut rng, &g, 0.5);
        let big = 2.0 * perimeter(e.bits(), &g, &t) / (nu.w_lo() * g.cell_volume()) + 1.0;
        let s = solver.solve(&e, big).unwrap();
        assert_eq!((&s.minimal, &s.maximal), (&e, &e));
        let ex = exhaustive_geometric(e.bits(), s.lambda, &nu, &g, &t, 1e-9);
        assert_eq!(ex.meet, e.bits());

        // On a detached grid Ω has zero perimeter, so small Λ picks ∅ or Ω by mass.
        let s = solver.solve(&e, 1e-4).unwrap();
        let inside = nu.measure(&e);
        let outside = nu.measure(&DiscreteSet::full(&g)) - inside;
        let expected = if exterior == Exterior::Detached && outside < inside {
            DiscreteSet::full(&g)
        } else {
            DiscreteSet::empty(&g)
        };
        assert_eq!(s.minimal, expected);
        assert_eq!(s.maximal, expected);
    }
}

#[test]
fn complement_identity_on_random_and_tied_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let (g, t, nu) = setup(4, Exterior::Vacuum, &mut rng);
        let e = random_set(&mut rng, &g, 0.5);
        assert!(verify_complement(&e, rng.gen_range(0.1..5.0), &nu, &t).unwrap());
    }
    // On a detached pair of cells with unit interaction, Λ = 1 ties ∅, {0} and {0, 1}.
    let g = GridDomain::line(2, 1.0).unwrap().with_exterior(Exterior::Detached);
    let t = table(&g, KernelFamily::ConstantBall { radius: 1.0 }, 1);
    let nu = WeightMeasure::lebesgue(&g);
    let e = DiscreteSet::from_indices(&g, [0]);
    let s = GeomSolver::new(&t, &nu).unwrap().solve(&e, 1.0).unwrap();
    assert!(s.minimal.is_empty());
    assert_eq!(s.maximal, DiscreteSet::full(&g));
    assert!(verify_complement(&e, 1.0, &nu, &t).unwrap());
}

#[test]
fn nested_data_give_nested_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let (g, t, nu) = setup(4, Exterior::Vacuum, &mut rng);
        let big = random_set(&mut rng, &g, 0.6);
        let small = big.intersection(&random_set(&mut rng, &g, 0.6));
        assert!(verify_comparison(&small, &big, rng.gen_range(0.1..5.0), &nu, &t).unwrap());
    }
}

#[test]
fn enumerated_solution_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for (mask, lambda) in [(0b000_010_000u64, 3.0), (0b110_111_011, 1.2), (0b101_000_101, 6.0)] {
        let (g, t, nu) = setup(3, Exterior::Vacuum, &mut rng);
        let e = DiscreteSet::from_mask(&g, mask);
        let s = GeomSolver::new(&t, &nu).unwrap().solve(&e, lambda).unwrap();
        let ex = exhaustive_geometric(e.bits(), s.lambda, &nu, &g, &t, 1e-9);
        assert_eq!(s.minimal.bits(), ex.meet.as_slice());
        assert_eq!(s.maximal.bits(), ex.join.as_slice());
    }
}

#[test]
fn binary_datum_gives_minimal_geometric_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (g, t, nu) = setup(5, Exterior::Vacuum, &mut rng);
    let e = random_set(&mut rng, &g, 0.5);
    for lambda in [0.3, 1.0, 4.0] {
        let sol = FuncSolver::new(&t, &nu)
            .unwrap()
            .solve(&DiscreteFunction::indicator(&e), lambda, 2, Stacking::Minimal)
            .unwrap();
        let geo = GeomSolver::new(&t, &nu).unwrap().solve(&e, lambda).unwrap();
        assert_eq!(sol.u, DiscreteFunction::indicator(&geo.minimal));
        assert!(sol.u.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn shift_and_flip_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let g = GridDomain::rect(4, 4, 1.0).unwrap().with_exterior(Exterior::Detached);
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 2);
    let nu = random_weights(&mut rng, &g);
    let solver = FuncSolver::new(&t, &nu).unwrap();
    for _ in 0..10 {
        let f = random_function(&mut rng, &g, &[-1.0, -0.5, 0.5, 1.0]);
        let lambda = rng.gen_range(0.2..3.0);
        let u = solver.solve_quantized(&f, lambda, Stacking::Minimal).unwrap().u;
        let shifted = solver.solve_quantized(&f.map(|v| v + 0.5), lambda, Stacking::Minimal).unwrap().u;
        assert_eq!(shifted, u.map(|v| v + 0.5));
        let flipped = solver.solve_quantized(&f.map(|v| -v), lambda, Stacking::Maximal).unwrap().u;
        assert_eq!(flipped, u.map(|v| -v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returned_sets_beat_random_perturbations(mask in 0u64..1 << 16, seed in any::<u64>(), log_lambda in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, t, nu) = setup(4, Exterior::Vacuum, &mut rng);
        let e = DiscreteSet::from_mask(&g, mask);
        let solver = GeomSolver::new(&t, &nu).unwrap();
        let s = solver.solve(&e, log_lambda.exp()).unwrap();
        let base = solver.energy_q(&s.minimal, &e, s.lambda_q).unwrap();
        prop_assert_eq!(base, solver.energy_q(&s.maximal, &e, s.lambda_q).unwrap());
        for _ in 0..1000 {
            let mut u = s.minimal.clone();
            for _ in 0..rng.gen_range(1..4) {
                let i = rng.gen_range(0..g.len());
                u.set(i, !u.contains(i));
            }
            prop_assert!(solver.energy_q(&u, &e, s.lambda_q).unwrap() >= base);
        }
        // Testing against the empty set.
        let fid = |u: &DiscreteSet| nu.measure(&u.symmetric_difference(&e));
        let lhs = perimeter(s.minimal.bits(), &g, &t) + s.lambda * fid(&s.minimal);
        prop_assert!(lhs <= s.lambda * nu.measure(&e) * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn fidelity_gap_shrinks_with_lambda(mask in 0u64..1 << 25, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, t, nu) = setup(5, Exterior::Vacuum, &mut rng);
        let e = DiscreteSet::from_mask(&g, mask);
        let solver = GeomSolver::new(&t, &nu).unwrap();
        let lambdas = nlbv::fidelity::lambda_grid(0.05, 20.0, 20).unwrap();
        let sols = solver.sweep(&e, &lambdas).unwrap();
        let mu = |u: &DiscreteSet| nu.measure(&u.symmetric_difference(&e));
        for w in sols.windows(2) {
            prop_assert!(mu(&w[1].minimal) <= mu(&w[0].maximal) + 1e-12);
            prop_assert!(mu(&w[0].maximal) <= mu(&w[0].minimal) + 1e-12);
        }
    }

    #[test]
    fn ball_solutions_grow_with_lambda(r in 2.0f64..5.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, t, nu) = setup(12, Exterior::Vacuum, &mut rng);
        let e = make_ball_set(&g, &g.center(), r);
        let solver = GeomSolver::new(&t, &nu).unwrap();
        let lambdas = nlbv::fidelity::lambda_grid(0.05, 20.0, 20).unwrap();
        let sols = solver.sweep(&e, &lambdas).unwrap();
        for w in sols.windows(2) {
            prop_assert!(w[1].minimal.is_subset(&e));
            prop_assert!(nu.measure(&w[1].minimal) >= nu.measure(&w[0].minimal) - 1e-12);
        }
    }

    #[test]
    fn denoised_values_stay_in_range_and_lower_the_energy(values in prop::collection::vec(0u8..4, 16), log_lambda in -1.5f64..1.5, vacuum in any::<bool>()) {
        let exterior = if vacuum { Exterior::Vacuum } else { Exterior::Detached };
        let g = GridDomain::rect(4, 4, 1.0).unwrap().with_exterior(exterior);
        let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 2);
        let nu = WeightMeasure::lebesgue(&g);
        let f = DiscreteFunction::new(&g, values.iter().map(|v| *v as f64 - 1.0).collect()).unwrap();
        let solver = FuncSolver::new(&t, &nu).unwrap();
        let sol = solver.solve_quantized(&f, log_lambda.exp(), Stacking::Minimal).unwrap();
        let (lo, hi) = if vacuum { (f.min().min(0.0), f.max().max(0.0)) } else { (f.min(), f.max()) };
        prop_assert!(sol.u.values().iter().all(|v| (lo..=hi).contains(v)));
        let ef = nlbv::energy::functional_energy(&f, &f, sol.lambda, &nu, &t).unwrap().total;
        prop_assert!(sol.energy.total <= ef * (1.0 + 1e-12));
        for (k, &lv) in sol.levels[..sol.levels.len() - 1].iter().enumerate() {
            let geo = solver.geom().solve_exact(&f.superlevel(lv), sol.lambda_q).unwrap();
            prop_assert_eq!(&sol.level_sets[k], &geo.minimal);
        }
    }
}

//! Seeded property suites behind `nlbv verify`.
//!
//! Every check runs a batch of instances and reports how many failed. Inputs
//! that violate a lattice-tolerance check can be saved for inspection.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cheeger::{
    calibrability_check, certificate_check, cheeger_solve, eigen_relation_check, faber_krahn_check,
    lattice_ball, linf_bound_check, touches_boundary,
};
use crate::energy::{
    coarea_decompose, functional_energy, geometric_energy, integrable_identity_check, k_perimeter,
    k_variation, discrete_kernel_mass,
};
use crate::error::{Error, Result};
use crate::fidelity::{
    ball_threshold, calibrate_low_fidelity, cheeger_lambda_regimes, high_fidelity_lambda, lambda_grid,
    low_fidelity_bound, mu_is_nonincreasing, sweep, SweepDatum,
};
use crate::fixed::LambdaQ;
use crate::func::{verify_solution_algebra, FuncSolver, Stacking};
use crate::geom::{verify_comparison, verify_complement, verify_lattice_closure, GeomSolver};
use crate::grid::{make_ball_set, DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use crate::kernel::{Kernel, KernelFamily, KernelSpec, KernelTable};
use crate::rearrange::{
    dilation_monotonicity_check, isoperimetric_check, isoperimetric_refinement, rearrangement_inequality_check,
    rearrangement_refinement,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Energy,
    Geom,
    Cheeger,
    Fidelity,
    Rearrange,
    All,
}

impl Suite {
    const EACH: [Suite; 5] = [Suite::Energy, Suite::Geom, Suite::Cheeger, Suite::Fidelity, Suite::Rearrange];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "energy" => Suite::Energy,
            "geom" => Suite::Geom,
            "cheeger" => Suite::Cheeger,
            "fidelity" => Suite::Fidelity,
            "rearrange" => Suite::Rearrange,
            "all" => Suite::All,
            _ => return Err(Error::InvalidParameter(format!("unknown suite {s:?}"))),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Energy => "energy",
            Suite::Geom => "geom",
            Suite::Cheeger => "cheeger",
            Suite::Fidelity => "fidelity",
            Suite::Rearrange => "rearrange",
            Suite::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    pub instances: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Lattice tolerance factor for the rearrangement suite.
    pub c_lat: f64,
    /// Directory receiving inputs of failed tolerance checks.
    pub artifacts: Option<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            c_lat: crate::rearrange::DEFAULT_LATTICE_CONSTANT,
            artifacts: None,
        }
    }
}

/// Runs one suite (or all of them) and returns one row per check.
pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<Vec<CheckRow>> {
    if suite == Suite::All {
        let mut rows = Vec::new();
        for s in Suite::EACH {
            rows.extend(run_suite(s, config)?);
        }
        return Ok(rows);
    }
    let mut ctx = Ctx {
        suite,
        rng: ChaCha8Rng::seed_from_u64(config.seed ^ (suite as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        rows: Vec::new(),
        config,
    };
    match suite {
        Suite::Energy => energy_suite(&mut ctx)?,
        Suite::Geom => geom_suite(&mut ctx)?,
        Suite::Cheeger => cheeger_suite(&mut ctx)?,
        Suite::Fidelity => fidelity_suite(&mut ctx)?,
        Suite::Rearrange => rearrange_suite(&mut ctx)?,
        Suite::All => unreachable!(),
    }
    Ok(ctx.rows)
}

/// Writes `suite,check,instances,failures,passed,detail` rows.
pub fn write_csv(rows: &[CheckRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "suite,check,instances,failures,passed,detail")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},\"{}\"",
            r.suite,
            r.check,
            r.instances,
            r.failures,
            u8::from(r.passed()),
            r.detail.replace('"', "'")
        )?;
    }
    Ok(())
}

struct Ctx<'a> {
    suite: Suite,
    rng: ChaCha8Rng,
    rows: Vec<CheckRow>,
    config: &'a VerifyConfig,
}

impl Ctx<'_> {
    fn record(&mut self, check: &str, instances: usize, failures: usize, detail: impl Into<String>) {
        self.rows.push(CheckRow {
            suite: self.suite.to_string(),
            check: check.to_string(),
            instances,
            failures,
            detail: detail.into(),
        });
    }

    fn set(&mut self, g: &GridDomain, density: f64) -> DiscreteSet {
        DiscreteSet::from_indices(g, (0..g.len()).filter(|_| self.rng.gen_bool(density)))
    }

    fn function(&mut self, g: &GridDomain, levels: u32) -> DiscreteFunction {
        let values = (0..g.len()).map(|_| self.rng.gen_range(0..levels) as f64).collect();
        DiscreteFunction::new(g, values).expect("finite values")
    }

    fn save(&self, name: &str, values: &impl Serialize) -> Result<()> {
        if let Some(dir) = &self.config.artifacts {
            std::fs::create_dir_all(dir)?;
            let file = std::fs::File::create(dir.join(format!("{}-{name}.json", self.suite)))?;
            serde_json::to_writer(file, values).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        Ok(())
    }
}

fn table(g: &GridDomain, family: KernelFamily, window: usize) -> Result<KernelTable> {
    KernelTable::new(&Kernel::new(KernelSpec::new(family, g.n()).with_window(window))?, g)
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn kernels() -> [KernelFamily; 3] {
    [
        KernelFamily::Fractional { s: 0.5 },
        KernelFamily::ConstantBall { radius: 2.0 },
        KernelFamily::TwoExponent { s0: 0.3, s1: 0.7 },
    ]
}

/// `½ Σ_{i≠j} w(i−j)|u_i − u_j|` over ordered pairs, plus exterior terms.
fn brute_variation(u: &DiscreteFunction, t: &KernelTable) -> f64 {
    let g = u.grid();
    let mut total = 0.0;
    for i in 0..g.len() {
        for o in t.offsets() {
            match g.shifted(i, o.delta) {
                Some(j) => total += 0.5 * o.weight * (u.get(i) - u.get(j)).abs(),
                None if g.exterior() == Exterior::Vacuum => total += o.weight * u.get(i).abs(),
                None => {}
            }
        }
    }
    total
}

fn energy_suite(ctx: &mut Ctx) -> Result<()> {
    let g8 = GridDomain::rect(8, 8, 0.5)?;
    let tables = kernels().map(|k| table(&g8, k, 4));
    let tables: Vec<KernelTable> = tables.into_iter().collect::<Result<_>>()?;

    let mut fails = 0;
    for k in 0..100 {
        let t = &tables[k % 3];
        let u = ctx.function(&g8, 5).map(|v| v - 2.0);
        let tv = k_variation(&u, t)?;
        let sum: f64 = coarea_decompose(&u, t)?.iter().map(|c| c.gap * c.perimeter).sum();
        fails += usize::from(!rel_close(tv, sum, 1e-9));
    }
    ctx.record("coarea", 100, fails, "sum of gap*perimeter vs [u], rel 1e-9");

    let g4 = GridDomain::rect(4, 4, 1.0)?;
    let mut fails = 0;
    for k in 0..30 {
        let t = table(&g4, kernels()[k % 3].clone(), 3)?;
        let u = ctx.function(&g4, 7);
        fails += usize::from(!rel_close(k_variation(&u, &t)?, brute_variation(&u, &t), 1e-12));
    }
    ctx.record("variation_vs_double_sum", 30, fails, "ordered-pair double sum, rel 1e-12");

    let g6 = GridDomain::rect(6, 6, 1.0)?;
    let t6 = table(&g6, KernelFamily::Fractional { s: 0.5 }, 3)?;
    let (mut sub, mut comp) = (0, 0);
    for _ in 0..200 {
        let e = ctx.set(&g6, 0.5);
        let f = ctx.set(&g6, 0.5);
        let lhs = k_perimeter(&e.intersection(&f), &t6)? + k_perimeter(&e.union(&f), &t6)?;
        let rhs = k_perimeter(&e, &t6)? + k_perimeter(&f, &t6)?;
        sub += usize::from(lhs > rhs * (1.0 + 1e-12));
        comp += usize::from(!rel_close(k_perimeter(&e, &t6)?, k_perimeter(&e.complement(), &t6)?, 1e-12));
    }
    ctx.record("submodularity", 200, sub, "P(E∩F)+P(E∪F) <= P(E)+P(F)");
    ctx.record("complement_invariance", 200, comp, "P(E^c) = P(E), rel 1e-12");

    let g12 = GridDomain::rect(12, 12, 1.0)?;
    let t12 = table(&g12, KernelFamily::Fractional { s: 0.5 }, 3)?;
    let mut fails = 0;
    for _ in 0..50 {
        let small = GridDomain::rect(4, 4, 1.0)?;
        let seed = ctx.set(&small, 0.6);
        let e = DiscreteSet::from_indices(&g12, seed.indices().map(|i| {
            let [a, b] = small.multi_index(i);
            g12.index(a + 2, b + 2)
        }));
        let shift = [ctx.rng.gen_range(-2..=4), ctx.rng.gen_range(-2..=4)];
        fails += usize::from(!rel_close(k_perimeter(&e, &t12)?, k_perimeter(&e.translated(shift), &t12)?, 1e-12));
    }
    ctx.record("translation_invariance", 50, fails, "shifts keeping the set inside a vacuum grid");

    half_plane_check(ctx)?;

    let nu = WeightMeasure::lebesgue(&g8);
    let mut fails = 0;
    for k in 0..50 {
        let t = &tables[k % 3];
        let u = ctx.function(&g8, 4);
        let f = ctx.function(&g8, 4);
        let lambda = ctx.rng.gen_range(0.1..3.0);
        let direct = functional_energy(&u, &f, lambda, &nu, t)?.total;
        let mut values = u.distinct_values();
        values.extend(f.distinct_values());
        values.push(0.0);
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut layered = 0.0;
        for w in values.windows(2) {
            layered += (w[1] - w[0]) * geometric_energy(&u.superlevel(w[0]), &f.superlevel(w[0]), lambda, &nu, t)?.total;
        }
        fails += usize::from(!rel_close(direct, layered, 1e-9));
    }
    ctx.record("layer_cake", 50, fails, "functional energy vs integrated geometric energies");

    let g5 = GridDomain::rect(5, 5, 1.0)?;
    let tb = table(&g5, KernelFamily::ConstantBall { radius: 2.0 }, 2)?;
    let nu5 = WeightMeasure::lebesgue(&g5);
    let (mut ident, mut bound) = (0, 0);
    for _ in 0..20 {
        let e = ctx.set(&g5, 0.5);
        let (lhs, rhs) = integrable_identity_check(&e, &tb)?;
        ident += usize::from(!rel_close(lhs, rhs, 1e-12) && (lhs - rhs).abs() > 1e-12);
        let u = ctx.function(&g5, 5);
        bound += usize::from(k_variation(&u, &tb)? > discrete_kernel_mass(&tb) * u.l1_norm(&nu5) * (1.0 + 1e-12));
    }
    ctx.record("integrable_identity", 20, ident, "P(E) = |E|·‖K‖ - ∫∫_E×E K");
    ctx.record("l1_bound", 20, bound, "[u] <= ‖K‖₁‖u‖₁");
    Ok(())
}

/// `P(E ∩ H) ≤ P(E)` for discrete half-planes, once for directions that are
/// lattice symmetries and once for generic directions.
fn half_plane_check(ctx: &mut Ctx) -> Result<()> {
    let g = GridDomain::rect(10, 10, 1.0)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 4)?;
    let run = |ctx: &mut Ctx, angles: &[f64], name: &str| -> Result<()> {
        let mut fails = 0;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let e = ctx.set(&g, 0.5);
            let theta = angles[ctx.rng.gen_range(0..angles.len())];
            let (nx, ny) = (theta.cos(), theta.sin());
            let c = ctx.rng.gen_range(-3.0..3.0f64).round() + 0.5 * f64::from(ctx.rng.gen_bool(0.5));
            let center = g.center();
            let h = DiscreteSet::from_indices(&g, (0..g.len()).filter(|&i| {
                let x = g.coords(i);
                (x[0] - center[0]) * nx + (x[1] - center[1]) * ny <= c
            }));
            let pe = k_perimeter(&e, &t)?;
            let pi = k_perimeter(&e.intersection(&h), &t)?;
            if pi > pe * (1.0 + 1e-12) {
                fails += 1;
                worst = worst.max(pi / pe - 1.0);
            }
        }
        ctx.record(name, 100, fails, format!("worst relative excess {worst:.3e}"));
        Ok(())
    };
    use std::f64::consts::FRAC_PI_4;
    let symmetric: Vec<f64> = (0..8).map(|k| k as f64 * FRAC_PI_4).collect();
    run(ctx, &symmetric, "half_plane_intersection")?;
    let generic: Vec<f64> = (0..64).map(|k| 0.1 + k as f64 * 0.098).collect();
    run(ctx, &generic, "half_plane_generic")?;
    Ok(())
}

fn geom_suite(ctx: &mut Ctx) -> Result<()> {
    let mut fails = 0;
    for k in 0..200 {
        let exterior = if k % 2 == 0 { Exterior::Vacuum } else { Exterior::Detached };
        let g = GridDomain::rect(3, 3, 1.0)?.with_exterior(exterior);
        let t = table(&g, kernels()[k % 3].clone(), 2)?;
        let nu = WeightMeasure::new(&g, (0..9).map(|_| ctx.rng.gen_range(0.5..2.0)).collect())?;
        let solver = GeomSolver::new(&t, &nu)?;
        let e = DiscreteSet::from_mask(&g, ctx.rng.gen_range(0..512));
        let sol = solver.solve(&e, ctx.rng.gen_range(0.05..5.0))?;
        let energies: Vec<i128> = (0..512u64)
            .map(|m| solver.energy_q(&DiscreteSet::from_mask(&g, m), &e, sol.lambda_q).unwrap_or(i128::MAX))
            .collect();
        let best = *energies.iter().min().unwrap();
        let optimal: Vec<u64> = (0..512u64).filter(|m| energies[*m as usize] == best).collect();
        let meet = optimal.iter().fold(511u64, |a, b| a & b);
        let join = optimal.iter().fold(0u64, |a, b| a | b);
        let ok = sol.energy_q == best
            && sol.minimal == DiscreteSet::from_mask(&g, meet)
            && sol.maximal == DiscreteSet::from_mask(&g, join);
        fails += usize::from(!ok);
    }
    ctx.record("exhaustive_3x3", 200, fails, "extremal minimizers vs all 512 subsets");

    let g = GridDomain::rect(6, 6, 1.0)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 3)?;
    let nu = WeightMeasure::lebesgue(&g);
    let (mut comp, mut cmp, mut closure) = (0, 0, 0);
    for _ in 0..30 {
        let e1 = ctx.set(&g, 0.6);
        let e2 = e1.intersection(&ctx.set(&g, 0.7));
        let lambda = ctx.rng.gen_range(0.2..4.0);
        comp += usize::from(!verify_complement(&e1, lambda, &nu, &t)?);
        cmp += usize::from(!verify_comparison(&e2, &e1, lambda, &nu, &t)?);
        let s = GeomSolver::new(&t, &nu)?.solve(&e1, lambda)?;
        closure += usize::from(!verify_lattice_closure(&e1, lambda, &nu, &t, &s.minimal, &s.maximal)?);
    }
    ctx.record("complement", 30, comp, "minimal(E^c) = maximal(E)^c");
    ctx.record("comparison", 30, cmp, "nested data give nested solutions");
    ctx.record("lattice_closure", 30, closure, "union and intersection of solutions");

    let mut fails = 0;
    let mut exact = 0;
    for k in 0..10 {
        let exterior = if k % 2 == 0 { Exterior::Vacuum } else { Exterior::Detached };
        let g = GridDomain::rect(3, 3, 1.0)?.with_exterior(exterior);
        let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 2)?;
        let nu = WeightMeasure::lebesgue(&g);
        let mut f = ctx.function(&g, 3).map(|v| v / 2.0).into_values();
        (f[0], f[8]) = (0.0, 1.0);
        let f = DiscreteFunction::new(&g, f)?;
        let lambda = ctx.rng.gen_range(0.2..3.0);
        let solver = FuncSolver::new(&t, &nu)?;
        let sol = solver.solve(&f, lambda, 3, Stacking::Minimal)?;
        let (best, best_q) = exhaustive_functional(&f, &sol.levels, sol.lambda_q, &solver)?;
        fails += usize::from(!rel_close(sol.energy.total, best, 1e-9));
        let sol_q: i128 = level_energy(&sol.u, &f, &sol.levels, sol.lambda_q, &solver);
        exact += usize::from(sol_q != best_q);
    }
    ctx.record("functional_exhaustive", 10, fails, "3 levels on 3x3 vs all 3^9 functions, rel 1e-9");
    ctx.record("functional_exhaustive_fixed_point", 10, exact, "same comparison in fixed-point units");

    let mut fails = 0;
    for _ in 0..10 {
        let g = GridDomain::rect(5, 5, 1.0)?;
        let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 3)?;
        let f = ctx.function(&g, 4).map(|v| v - 1.5);
        let r = verify_solution_algebra(&f, ctx.rng.gen_range(0.2..3.0), &WeightMeasure::lebesgue(&g), &t)?;
        fails += usize::from(!r.all_ok());
    }
    ctx.record("solution_algebra", 10, fails, "shift, flip, truncation and sign parts");
    Ok(())
}

/// Exact functional energy of a lattice-valued `u` through its level sets.
fn level_energy(u: &DiscreteFunction, f: &DiscreteFunction, levels: &[f64], l: LambdaQ, s: &FuncSolver) -> i128 {
    // Level gaps are equal, so the energy is proportional to the sum over levels.
    levels[..levels.len() - 1]
        .iter()
        .map(|t| s.geom().energy_q(&u.superlevel(*t), &f.superlevel(*t), l).unwrap_or(i128::MAX / 8))
        .sum()
}

fn exhaustive_functional(
    f: &DiscreteFunction,
    levels: &[f64],
    l: LambdaQ,
    solver: &FuncSolver,
) -> Result<(f64, i128)> {
    let g = f.grid();
    let m = levels.len();
    let total = m.pow(g.len() as u32);
    let mut best = f64::INFINITY;
    let mut best_q = i128::MAX;
    let mut values = vec![0.0; g.len()];
    for code in 0..total {
        let mut c = code;
        for v in values.iter_mut() {
            *v = levels[c % m];
            c /= m;
        }
        let u = DiscreteFunction::new(g, values.clone())?;
        let e = crate::energy::functional_energy_with(solver.geom().stencil(), &u, f, l.value(), solver.geom().measure());
        best = best.min(e.total);
        best_q = best_q.min(level_energy(&u, f, levels, l, solver));
    }
    Ok((best, best_q))
}

fn cheeger_suite(ctx: &mut Ctx) -> Result<()> {
    let mut fails = 0;
    let mut cert = 0;
    for k in 0..30 {
        let side = 3 + k % 2;
        let g = GridDomain::rect(side, side, 1.0)?;
        let t = table(&g, kernels()[k % 3].clone(), 2)?;
        let nu = WeightMeasure::new(&g, (0..g.len()).map(|_| ctx.rng.gen_range(0.5..2.0)).collect())?;
        let mut omega = ctx.set(&g, 0.7);
        if omega.count() == 0 {
            omega.insert(0);
        }
        let res = cheeger_solve(&omega, &nu, &t)?;
        let cells: Vec<usize> = omega.indices().collect();
        let q = crate::fixed::QuantizedStencil::new(&crate::energy::Stencil::new(&t), &nu, crate::fixed::DEFAULT_SCALE)?;
        let mut best: Option<LambdaQ> = None;
        for mask in 1u64..(1 << cells.len()) {
            let s = DiscreteSet::from_indices(&g, cells.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, c)| *c));
            let r = LambdaQ::new(q.perimeter(s.bits(), false), q.measure(s.bits()))?;
            if best.is_none_or(|b| r.cmp_exact(&b).is_lt()) {
                best = Some(r);
            }
        }
        fails += usize::from(best != Some(res.ratio));
        cert += usize::from(!certificate_check(&res, &omega, &nu, &t)?);
    }
    ctx.record("dinkelbach_exhaustive", 30, fails, "h vs all nonempty subsets of Ω");
    ctx.record("flow_certificate", 30, cert, "max-flow certificate validates");

    let g = GridDomain::rect(16, 16, 1.0 / 16.0)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 8)?;
    let nu = WeightMeasure::lebesgue(&g);
    let mut fails = 0;
    let mut detail = String::new();
    for r in [3.0, 5.0, 7.0] {
        let b = make_ball_set(&g, &g.center(), r / 16.0);
        let c = calibrability_check(&b, &nu, &t)?;
        fails += usize::from(!c.calibrable);
        detail += &format!("r={r}: gap {:.3e}; ", c.gap);
    }
    ctx.record("ball_calibrable", 3, fails, detail);

    let square = DiscreteSet::from_indices(&g, (0..g.len()).filter(|i| {
        let [a, b] = g.multi_index(*i);
        (4..12).contains(&a) && (4..12).contains(&b)
    }));
    let ell = DiscreteSet::from_indices(&g, (0..g.len()).filter(|i| {
        let [a, b] = g.multi_index(*i);
        (2..14).contains(&a) && (2..14).contains(&b) && !(a >= 8 && b >= 8)
    }));
    let mut fails = 0;
    let mut detail = String::new();
    for (name, o) in [("square", &square), ("L", &ell)] {
        let fk = faber_krahn_check(o, &t)?;
        fails += usize::from(!fk.ok);
        detail += &format!("{name}: h={:.4} ball={:.4}; ", fk.h_omega, fk.h_ball);
    }
    let ball = lattice_ball(2, 60, g.h())?;
    let bt = crate::kernel::tabulate_offsets(&t.source_kernel(), ball.grid(), t.window())?;
    let fk = faber_krahn_check(&ball, &bt)?;
    fails += usize::from(!(fk.ok && fk.h_omega == fk.h_ball));
    ctx.record("faber_krahn", 3, fails, detail);

    let disc = make_ball_set(&g, &g.center(), 5.0 / 16.0);
    let seed = ctx.rng.gen();
    let (mut eig, mut linf, mut touch) = (0, 0, 0);
    for o in [&disc, &square, &ell] {
        eig += usize::from(!eigen_relation_check(o, &nu, &t, seed)?.all_ok());
        let res = cheeger_solve(o, &nu, &t)?;
        let u = DiscreteFunction::indicator(&res.cheeger_set).map(|v| 3.0 * v);
        linf += usize::from(!linf_bound_check(o, &nu, &t, &u)?.ok);
        touch += usize::from(!touches_boundary(&res.cheeger_set, o));
    }
    ctx.record("eigen_relation", 3, eig, "indicator attains h, random u never below");
    ctx.record("linf_bound", 3, linf, "scaled Cheeger indicators, β_K slack included");
    ctx.record("touches_boundary", 3, touch, "Cheeger set reaches ∂Ω");
    Ok(())
}

fn fidelity_suite(ctx: &mut Ctx) -> Result<()> {
    let g = GridDomain::rect(16, 16, 1.0 / 16.0)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 8)?;
    let nu = WeightMeasure::lebesgue(&g);
    let b = make_ball_set(&g, &g.center(), 5.0 / 16.0);

    let th = ball_threshold(&b, &nu, &t, 1e-6)?;
    let ok = (th.lambda_star - th.h).abs() <= 1e-6 + 1e-9 * th.h;
    ctx.record("ball_threshold", 1, usize::from(!ok), format!("λ*={:.9} h={:.9}", th.lambda_star, th.h));

    let square = DiscreteSet::from_indices(&g, (0..g.len()).filter(|i| {
        let [a, c] = g.multi_index(*i);
        (5..11).contains(&a) && (5..11).contains(&c)
    }));
    let mut fails = 0;
    let mut detail = String::new();
    for (name, e) in [("ball", &b), ("square", &square)] {
        let r = cheeger_lambda_regimes(e, &nu, &t)?;
        fails += usize::from(!r.matches());
        detail += &format!("{name}: calibrable={}; ", r.calibrable);
    }
    ctx.record("cheeger_regimes", 2, fails, detail);

    let lambdas = lambda_grid(th.h / 4.0, 4.0 * th.h, 12)?;
    let mut fails = 0;
    for k in 0..20 {
        let datum = if k % 2 == 0 {
            SweepDatum::Set(ctx.set(&g, 0.4))
        } else {
            SweepDatum::Function(ctx.function(&g, 4), 4)
        };
        fails += usize::from(!mu_is_nonincreasing(&sweep(&datum, &lambdas, &nu, &t)?, 1e-9));
    }
    ctx.record("mu_monotone", 20, fails, "μ nonincreasing along 12-point sweeps");

    let recs = sweep(&SweepDatum::Set(b.clone()), &lambdas, &nu, &t)?;
    let below_above = recs.iter().all(|r| {
        if r.lambda < th.h * (1.0 - 1e-9) {
            r.n_max == 0
        } else if r.lambda > th.h * (1.0 + 1e-9) {
            r.n_min == b.count() && r.n_max == b.count()
        } else {
            true
        }
    });
    ctx.record("ball_sweep", 1, usize::from(!below_above), "∅ below h, B above");

    let mut fails = 0;
    for r in [3.0, 4.0, 6.0] {
        let ball = make_ball_set(&g, &g.center(), r / 16.0);
        let l = high_fidelity_lambda(r / 16.0, &nu, &t)?;
        let s = GeomSolver::new(&t, &nu)?.solve(&ball, l)?;
        fails += usize::from(s.minimal != ball || s.maximal != ball);
    }
    ctx.record("high_fidelity", 3, fails, "ball data reproduced at the bound");

    let g = GridDomain::rect(24, 24, 0.25)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 8)?;
    let nu = WeightMeasure::lebesgue(&g);
    let reference = make_ball_set(&g, &g.center(), 2.0);
    let c = calibrate_low_fidelity(&reference, 2.0, &nu, &t, 1e-9)?;
    let solver = FuncSolver::new(&t, &nu)?;
    let mut fails = 0;
    for radius in [1.0, 2.0] {
        let ball = make_ball_set(&g, &g.center(), radius);
        let bound = low_fidelity_bound(radius, &t, nu.w_hi(), c)?;
        for _ in 0..10 {
            let mut values = vec![0.0; g.len()];
            for i in ball.indices() {
                values[i] = ctx.rng.gen_range(-2.0..2.0f64).round();
            }
            let f = DiscreteFunction::new(&g, values)?;
            let u = solver.solve_quantized(&f, bound * (1.0 - 1e-9), Stacking::Maximal)?.u;
            fails += usize::from(u.values().iter().any(|v| *v != 0.0));
        }
    }
    ctx.record("low_fidelity", 20, fails, format!("C calibrated on R=2: {c:.4}"));
    Ok(())
}

fn rearrange_suite(ctx: &mut Ctx) -> Result<()> {
    let c_lat = ctx.config.c_lat;
    let g = GridDomain::rect(16, 16, 1.0)?;
    let t = table(&g, KernelFamily::Fractional { s: 0.5 }, 6)?;

    let mut fails = 0;
    for k in 0..500 {
        let density = ctx.rng.gen_range(0.05..0.95);
        let e = ctx.set(&g, density);
        let r = isoperimetric_check(&e, &t, c_lat)?;
        if !r.ok {
            fails += 1;
            ctx.save(&format!("isoperimetric-{k}"), &e.bits())?;
        }
    }
    ctx.record("isoperimetric", 500, fails, format!("c_lat={c_lat}"));

    let mut fails = 0;
    for k in 0..200 {
        let u = ctx.function(&g, 8);
        let r = rearrangement_inequality_check(&u, &t, c_lat)?;
        if !r.ok {
            fails += 1;
            ctx.save(&format!("rearrangement-{k}"), &u.values())?;
        }
    }
    ctx.record("rearrangement_2d", 200, fails, format!("c_lat={c_lat}"));

    let line = GridDomain::line(24, 1.0)?;
    let tl = table(&line, KernelFamily::Fractional { s: 0.5 }, 8)?;
    let mut fails = 0;
    for _ in 0..200 {
        let u = ctx.function(&line, 8);
        fails += usize::from(!rearrangement_inequality_check(&u, &tl, 0.0)?.ok);
    }
    ctx.record("rearrangement_1d", 200, fails, "tolerance 0");

    let small = GridDomain::rect(8, 8, 1.0)?;
    let ts = table(&small, KernelFamily::Fractional { s: 0.5 }, 4)?;
    let mut fails = 0;
    for _ in 0..10 {
        let r = rearrangement_refinement(&ctx.function(&small, 6), &ts, c_lat)?;
        let i = isoperimetric_refinement(&ctx.set(&small, 0.5), &ts, c_lat)?;
        fails += usize::from(!(r.tol_shrinks && r.fine.ok && i.tol_shrinks && i.fine.ok));
    }
    ctx.record("refinement", 10, fails, "tolerance shrinks and checks hold at h/2");

    let e = make_ball_set(&small, &small.center(), 2.5);
    let mut fails = 0;
    let mut detail = String::new();
    for family in [KernelFamily::Fractional { s: 0.5 }, KernelFamily::ConstantBall { radius: 3.0 }] {
        let tf = table(&small, family, 4)?;
        let d = dilation_monotonicity_check(&e, &tf, &[1.0, 2.0, 4.0], c_lat)?;
        fails += usize::from(!d.nonincreasing || d.strictly_decreasing == Some(false));
        detail += &format!("exponent {:.2}; ", d.exponent);
    }
    ctx.record("dilation_monotonicity", 2, fails, detail);
    Ok(())
}

//! Exact solver for `min_u [u] + Λ ∫|u − f| dν` on functions with finitely
//! many values, by stacking nested geometric solutions.
//!
//! On a vacuum grid the exterior carries the value 0, so 0 always joins the
//! value lattice and superlevel sets at negative thresholds contain the
//! exterior. That bookkeeping plays the role of splitting `f = f⁺ − f⁻`.

use rayon::prelude::*;

use crate::energy::{functional_energy_with, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::fixed::LambdaQ;
use crate::geom::GeomSolver;
use crate::grid::{quantize, DiscreteFunction, DiscreteSet, Exterior, WeightMeasure};
use crate::kernel::KernelTable;

/// Which extremal geometric solution is stacked at every level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stacking {
    #[default]
    Minimal,
    Maximal,
}

#[derive(Clone, Debug)]
pub struct FuncSolution {
    pub u: DiscreteFunction,
    /// The quantized datum actually solved for.
    pub datum: DiscreteFunction,
    /// Sorted values `u` may take.
    pub levels: Vec<f64>,
    /// `{u > levels[k]}` for every level but the top one.
    pub level_sets: Vec<DiscreteSet>,
    /// Optimal geometric energy per level, in fixed-point units times `lambda_q.den`.
    pub level_energy_q: Vec<i128>,
    /// Energy of `u` against the quantized datum.
    pub energy: EnergyBreakdown,
    pub lambda: f64,
    pub lambda_q: LambdaQ,
    /// Bound on the optimal-value change caused by quantizing the datum.
    pub quantization_bound: f64,
}

/// Functional solver reusing one geometric solver across calls.
#[derive(Clone, Debug)]
pub struct FuncSolver {
    geom: GeomSolver,
}

impl FuncSolver {
    pub fn new(table: &KernelTable, nu: &WeightMeasure) -> Result<Self> {
        Ok(Self {
            geom: GeomSolver::new(table, nu)?,
        })
    }

    pub fn geom(&self) -> &GeomSolver {
        &self.geom
    }

    /// Quantizes `f` to `m` levels and solves.
    pub fn solve(&self, f: &DiscreteFunction, lambda: f64, m: usize, stacking: Stacking) -> Result<FuncSolution> {
        let q = quantize(f, m)?;
        let mut sol = self.solve_quantized(&q.quantized, lambda, stacking)?;
        sol.quantization_bound = lambda * self.geom.measure().total(f.grid()) * q.delta / 2.0;
        Ok(sol)
    }

    /// Solves for a datum that already takes few values; no rounding happens.
    pub fn solve_quantized(&self, f: &DiscreteFunction, lambda: f64, stacking: Stacking) -> Result<FuncSolution> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
        }
        self.solve_quantized_exact(f, LambdaQ::from_f64(lambda)?, stacking)
    }

    /// As [`FuncSolver::solve_quantized`] at an exact rational `Λ`.
    pub fn solve_quantized_exact(
        &self,
        f: &DiscreteFunction,
        lambda_q: LambdaQ,
        stacking: Stacking,
    ) -> Result<FuncSolution> {
        let st = self.geom.stencil();
        st.check(f.grid())?;
        let mut levels = f.values().to_vec();
        if st.has_exterior() {
            levels.push(0.0);
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();

        let thresholds = &levels[..levels.len() - 1];
        let solved: Vec<_> = thresholds
            .par_iter()
            .map(|&t| self.geom.solve_exact(&f.superlevel(t), lambda_q))
            .collect::<Result<_>>()?;

        let mut level_sets = Vec::with_capacity(solved.len());
        let mut level_energy_q = Vec::with_capacity(solved.len());
        for s in solved {
            level_energy_q.push(s.energy_q);
            level_sets.push(match stacking {
                Stacking::Minimal => s.minimal,
                Stacking::Maximal => s.maximal,
            });
        }
        for k in 1..level_sets.len() {
            if !level_sets[k].is_subset(&level_sets[k - 1]) {
                return Err(Error::NestingViolation(k));
            }
        }

        let mut count = vec![0usize; f.grid().len()];
        for set in &level_sets {
            for i in set.indices() {
                count[i] += 1;
            }
        }
        let u = DiscreteFunction::new(f.grid(), count.iter().map(|c| levels[*c]).collect())?;
        let energy = functional_energy_with(st, &u, f, lambda_q.value(), self.geom.measure());
        Ok(FuncSolution {
            u,
            datum: f.clone(),
            levels,
            level_sets,
            level_energy_q,
            energy,
            lambda: lambda_q.value(),
            lambda_q,
            quantization_bound: 0.0,
        })
    }
}

/// Quantizes `f` to `m` levels and returns the minimal-stacked minimizer.
pub fn solve_functional(
    f: &DiscreteFunction,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
    m: usize,
) -> Result<FuncSolution> {
    FuncSolver::new(table, nu)?.solve(f, lambda, m, Stacking::Minimal)
}

/// Solves for an already quantized datum.
pub fn solve_quantized(
    f: &DiscreteFunction,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
    stacking: Stacking,
) -> Result<FuncSolution> {
    FuncSolver::new(table, nu)?.solve_quantized(f, lambda, stacking)
}

/// Outcome of the equivariance checks; every flag should be true.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraReport {
    /// Amount added in the shift check (the smallest level gap).
    pub shift: f64,
    /// Level used in the truncation checks.
    pub cut: f64,
    pub shift_ok: bool,
    pub flip_ok: bool,
    pub min_ok: bool,
    pub max_ok: bool,
    pub positive_part_ok: bool,
    pub negative_part_ok: bool,
    /// `u ∧ c = u` for `c ≥ max f`.
    pub above_max_ok: bool,
}

impl AlgebraReport {
    pub fn all_ok(&self) -> bool {
        self.shift_ok
            && self.flip_ok
            && self.min_ok
            && self.max_ok
            && self.positive_part_ok
            && self.negative_part_ok
            && self.above_max_ok
    }
}

/// Most distinct values `verify_solution_algebra` uses before quantizing.
pub const ALGEBRA_LEVELS: usize = 8;

/// Checks shift, sign-flip, truncation and positive/negative part identities
/// between solver runs.
///
/// The checks run on a detached copy of the grid: with a vacuum exterior held
/// at 0 the shift identity does not hold. Data with more than
/// [`ALGEBRA_LEVELS`] values are quantized first.
pub fn verify_solution_algebra(
    f: &DiscreteFunction,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<AlgebraReport> {
    let grid = f.grid().with_exterior(Exterior::Detached);
    let table = table.on_grid(&grid)?;
    let mut f = DiscreteFunction::new(&grid, f.values().to_vec())?;
    if f.distinct_values().len() > ALGEBRA_LEVELS {
        f = quantize(&f, ALGEBRA_LEVELS)?.quantized;
    }
    let solver = FuncSolver::new(&table, nu)?;
    let run = |g: &DiscreteFunction, s: Stacking| solver.solve_quantized(g, lambda, s).map(|r| r.u);

    let u = run(&f, Stacking::Minimal)?;
    let u_max = run(&f, Stacking::Maximal)?;
    let levels = f.distinct_values();
    let shift = levels
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let shift = if shift.is_finite() { shift } else { 1.0 };
    let cut = levels[levels.len() / 2];

    let shift_ok = run(&f.map(|v| v + shift), Stacking::Minimal)? == u.map(|v| v + shift);
    let flip_ok = run(&f.map(|v| -v), Stacking::Minimal)? == u_max.map(|v| -v);
    let min_ok = run(&f.map(|v| v.min(cut)), Stacking::Minimal)? == u.map(|v| v.min(cut));
    let max_ok = run(&f.map(|v| v.max(cut)), Stacking::Minimal)? == u.map(|v| v.max(cut));
    let positive_part_ok = run(&f.map(|v| v.max(0.0)), Stacking::Minimal)? == u.map(|v| v.max(0.0));
    // -u_min is the maximal solution for -f, so u⁻ pairs with maximal stacking.
    let negative_part_ok = run(&f.map(|v| (-v).max(0.0)), Stacking::Maximal)? == u.map(|v| (-v).max(0.0));
    let top = f.max();
    let above_max_ok = run(&f.map(|v| v.min(top)), Stacking::Minimal)? == u.map(|v| v.min(top));

    Ok(AlgebraReport {
        shift,
        cut,
        shift_ok,
        flip_ok,
        min_ok,
        max_ok,
        positive_part_ok,
        negative_part_ok,
        above_max_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::solve_geometric;
    use crate::grid::{make_ball_set, GridDomain};
    use crate::kernel::{Kernel, KernelFamily, KernelSpec};

    fn setup(rows: usize, exterior: Exterior) -> (GridDomain, KernelTable, WeightMeasure) {
        let g = GridDomain::rect(rows, rows, 1.0).unwrap().with_exterior(exterior);
        let k = Kernel::new(KernelSpec::new(KernelFamily::Fractional { s: 0.5 }, 2).with_window(3)).unwrap();
        let t = KernelTable::new(&k, &g).unwrap();
        (g, t, WeightMeasure::lebesgue(&g))
    }

    #[test]
    fn binary_datum_gives_the_geometric_solution() {
        let (g, t, nu) = setup(6, Exterior::Vacuum);
        let e = make_ball_set(&g, &g.center(), 2.0);
        for lambda in [0.4, 1.5, 6.0] {
            let sol = solve_functional(&DiscreteFunction::indicator(&e), lambda, &nu, &t, 2).unwrap();
            let geo = solve_geometric(&e, lambda, &nu, &t).unwrap();
            assert_eq!(sol.u, DiscreteFunction::indicator(&geo.minimal));
        }
    }

    #[test]
    fn constant_datum_is_kept() {
        let (g, t, nu) = setup(4, Exterior::Detached);
        let f = DiscreteFunction::constant(&g, -2.5);
        let sol = solve_functional(&f, 1.0, &nu, &t, 4).unwrap();
        assert_eq!(sol.u, f);
        assert_eq!(sol.energy.total, 0.0);
    }

    #[test]
    fn level_sets_are_geometric_minimizers() {
        let (g, t, nu) = setup(5, Exterior::Vacuum);
        let f = DiscreteFunction::new(&g, (0..25).map(|i| ((i * 7) % 5) as f64 - 2.0).collect()).unwrap();
        let solver = FuncSolver::new(&t, &nu).unwrap();
        let sol = solver.solve_quantized(&f, 0.8, Stacking::Minimal).unwrap();
        assert!(sol.levels.contains(&0.0));
        for (k, &lv) in sol.levels[..sol.levels.len() - 1].iter().enumerate() {
            let g = solver.geom().solve(&f.superlevel(lv), 0.8).unwrap();
            assert_eq!(sol.u.superlevel(lv), g.minimal, "level {lv}");
            assert_eq!(sol.level_energy_q[k], g.energy_q);
        }
        assert!(sol.u.min() >= f.min().min(0.0) && sol.u.max() <= f.max().max(0.0));
    }

    #[test]
    fn algebra_holds_on_a_small_grid() {
        let (g, t, nu) = setup(5, Exterior::Vacuum);
        let f = DiscreteFunction::new(&g, (0..25).map(|i| ((i * 3) % 4) as f64 - 1.5).collect()).unwrap();
        for lambda in [0.3, 1.0, 3.0] {
            let r = verify_solution_algebra(&f, lambda, &nu, &t).unwrap();
            assert!(r.all_ok(), "{r:?}");
        }
    }
}

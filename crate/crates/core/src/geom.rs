//! Exact solver for the geometric problem `min_U P_K(U) + Λ ν(E △ U)`.

use rayon::prelude::*;

use crate::energy::{geometric_energy_with, EnergyBreakdown, Stencil};
use crate::error::{Error, Result};
use crate::fixed::{LambdaQ, QuantizedStencil, DEFAULT_SCALE};
use crate::grid::{DiscreteSet, WeightMeasure};
use crate::kernel::KernelTable;
use crate::maxflow::{solve_cut, CutProblem};

/// Minimal and maximal minimizers of the geometric problem.
#[derive(Clone, Debug, PartialEq)]
pub struct GeomSolution {
    pub minimal: DiscreteSet,
    pub maximal: DiscreteSet,
    /// Energy of the minimal solution.
    pub energy: EnergyBreakdown,
    /// The fidelity parameter actually used (dyadic rounding of the request).
    pub lambda: f64,
    pub lambda_q: LambdaQ,
    /// Optimal energy in fixed-point units, multiplied by `lambda_q.den`.
    pub energy_q: i128,
}

/// Reusable geometric solver for one table and measure.
#[derive(Clone, Debug)]
pub struct GeomSolver {
    stencil: Stencil,
    quant: QuantizedStencil,
    nu: WeightMeasure,
}

impl GeomSolver {
    pub fn new(table: &KernelTable, nu: &WeightMeasure) -> Result<Self> {
        Self::with_scale(table, nu, DEFAULT_SCALE)
    }

    pub fn with_scale(table: &KernelTable, nu: &WeightMeasure, scale: f64) -> Result<Self> {
        let stencil = Stencil::new(table);
        let quant = QuantizedStencil::new(&stencil, nu, scale)?;
        Ok(Self {
            stencil,
            quant,
            nu: nu.clone(),
        })
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn quantized(&self) -> &QuantizedStencil {
        &self.quant
    }

    pub fn measure(&self) -> &WeightMeasure {
        &self.nu
    }

    /// Cut network whose source side is the solution `U`.
    pub fn cut_problem(&self, e: &DiscreteSet, lambda: LambdaQ) -> CutProblem {
        let q = &self.quant;
        let n = q.len();
        let mut p = CutProblem::new(n);
        for i in 0..n {
            let fid = lambda.num * q.mass[i];
            if e.contains(i) {
                p.source_cap[i] = fid;
            } else {
                p.sink_cap[i] = fid;
            }
            // The exterior belongs to U exactly when it belongs to E.
            let b = lambda.den * q.boundary[i];
            if e.is_cofinite() {
                p.source_cap[i] += b;
            } else {
                p.sink_cap[i] += b;
            }
        }
        p.pairs = q
            .pairs
            .iter()
            .map(|&(i, j, w)| (i, j, lambda.den * w))
            .collect();
        p
    }

    pub fn solve(&self, e: &DiscreteSet, lambda: f64) -> Result<GeomSolution> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be positive")));
        }
        self.solve_exact(e, LambdaQ::from_f64(lambda)?)
    }

    /// Solves at an exact rational `Λ`.
    pub fn solve_exact(&self, e: &DiscreteSet, lambda: LambdaQ) -> Result<GeomSolution> {
        self.stencil.check(e.grid())?;
        let sol = solve_cut(&self.cut_problem(e, lambda))?;
        let make = |bits: &[bool]| {
            DiscreteSet::from_indices(
                e.grid(),
                bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
            )
            .with_cofinite(e.is_cofinite())
        };
        let minimal = make(&sol.minimal_source_side);
        let maximal = make(&sol.maximal_source_side);
        let value = lambda.value();
        Ok(GeomSolution {
            energy: geometric_energy_with(&self.stencil, &minimal, e, value, &self.nu),
            minimal,
            maximal,
            lambda: value,
            lambda_q: lambda,
            energy_q: sol.value,
        })
    }

    /// Exact scaled energy `den·P(U) + num·ν(E △ U)`; `None` when infinite.
    pub fn energy_q(&self, u: &DiscreteSet, e: &DiscreteSet, lambda: LambdaQ) -> Option<i128> {
        if self.stencil.has_exterior() && u.is_cofinite() != e.is_cofinite() {
            return None;
        }
        Some(self.quant.geometric_energy(u.bits(), e.bits(), u.is_cofinite(), lambda))
    }

    /// Solves for every `Λ` concurrently; results are in input order.
    pub fn sweep(&self, e: &DiscreteSet, lambdas: &[f64]) -> Result<Vec<GeomSolution>> {
        lambdas.par_iter().map(|&l| self.solve(e, l)).collect()
    }
}

/// Solves the geometric problem for datum `E`.
pub fn solve_geometric(
    e: &DiscreteSet,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<GeomSolution> {
    GeomSolver::new(table, nu)?.solve(e, lambda)
}

/// Checks that the minimal solution for `E^c` is the complement of the
/// maximal solution for `E` (and vice versa).
pub fn verify_complement(e: &DiscreteSet, lambda: f64, nu: &WeightMeasure, table: &KernelTable) -> Result<bool> {
    let solver = GeomSolver::new(table, nu)?;
    let a = solver.solve(e, lambda)?;
    let b = solver.solve(&e.complement(), lambda)?;
    Ok(b.minimal == a.maximal.complement() && b.maximal == a.minimal.complement())
}

/// Checks nesting of the extremal solutions for nested data `E2 ⊆ E1`.
pub fn verify_comparison(
    e2: &DiscreteSet,
    e1: &DiscreteSet,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<bool> {
    if !e2.is_subset(e1) {
        return Err(Error::InvalidParameter("comparison needs E2 ⊆ E1".into()));
    }
    let solver = GeomSolver::new(table, nu)?;
    let s2 = solver.solve(e2, lambda)?;
    let s1 = solver.solve(e1, lambda)?;
    Ok(s2.minimal.is_subset(&s1.minimal) && s2.maximal.is_subset(&s1.maximal))
}

/// Given two solutions, checks that their intersection and union are solutions.
pub fn verify_lattice_closure(
    e: &DiscreteSet,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
    u1: &DiscreteSet,
    u2: &DiscreteSet,
) -> Result<bool> {
    let solver = GeomSolver::new(table, nu)?;
    let best = solver.solve(e, lambda)?;
    let lq = best.lambda_q;
    let optimal = |u: &DiscreteSet| solver.energy_q(u, e, lq) == Some(best.energy_q);
    if !optimal(u1) || !optimal(u2) {
        return Err(Error::InvalidParameter("U1 and U2 must both be solutions".into()));
    }
    Ok(optimal(&u1.intersection(u2)) && optimal(&u1.union(u2)))
}

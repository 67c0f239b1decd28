//! Cheeger constants and sets by Dinkelbach iteration over min cuts.
//!
//! Ratios are exact rationals `P_q(E)/ν_q(E)` of fixed-point integers, so the
//! iteration terminates and its trace is strictly decreasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::Stencil;
use crate::error::{Error, Result};
use crate::fixed::{LambdaQ, QuantizedStencil, DEFAULT_SCALE};
use crate::grid::{DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use crate::kernel::{beta_k, check_assumptions, prefix_ball, tabulate_offsets, KernelTable};
use crate::maxflow::{solve_cut, CutProblem};

/// Dinkelbach steps allowed before giving up; the trace is finite, this only
/// guards against a broken cut oracle.
const MAX_STEPS: usize = 10_000;

/// One Dinkelbach step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub h: f64,
    pub ratio: LambdaQ,
    /// Minimal minimizer of `P(U) - h·ν(U)` over `U ⊆ Ω`.
    pub set: DiscreteSet,
    /// The minimum, in fixed-point units times `ratio.den`.
    pub min_value: i128,
}

/// Max-flow witness that no subset of `Ω` has ratio below `ratio`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowCertificate {
    pub ratio: LambdaQ,
    pub scale: f64,
    /// Net flow `i → j` between cells of `Ω`.
    pub edges: Vec<(usize, usize, i128)>,
    /// Flow from each cell of `Ω` to everything outside `Ω`.
    pub exterior: Vec<(usize, i128)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheegerResult {
    pub h: f64,
    pub ratio: LambdaQ,
    pub cheeger_set: DiscreteSet,
    /// Largest Cheeger set (union of all of them).
    pub maximal_set: DiscreteSet,
    pub trace: Vec<TraceStep>,
    pub certificate: FlowCertificate,
}

/// `Ω` as a cut network: pair weights inside, mass to the outside, cell masses.
struct Network {
    cells: Vec<usize>,
    pairs: Vec<(u32, u32, i128)>,
    outside: Vec<i128>,
    mass: Vec<i128>,
}

impl Network {
    fn new(q: &QuantizedStencil, omega: &DiscreteSet) -> Self {
        let cells: Vec<usize> = omega.indices().collect();
        let mut node = vec![u32::MAX; q.len()];
        for (k, &c) in cells.iter().enumerate() {
            node[c] = k as u32;
        }
        let mut pairs = Vec::new();
        let mut outside: Vec<i128> = cells.iter().map(|&c| q.boundary[c]).collect();
        for &(i, j, w) in &q.pairs {
            match (node[i as usize], node[j as usize]) {
                (u32::MAX, u32::MAX) => {}
                (a, u32::MAX) => outside[a as usize] += w,
                (u32::MAX, b) => outside[b as usize] += w,
                (a, b) => pairs.push((a, b, w)),
            }
        }
        let mass = cells.iter().map(|&c| q.mass[c]).collect();
        Self {
            cells,
            pairs,
            outside,
            mass,
        }
    }

    fn perimeter(&self, bits: &[bool]) -> i128 {
        let inner: i128 = self
            .pairs
            .iter()
            .filter(|&&(i, j, _)| bits[i as usize] != bits[j as usize])
            .map(|p| p.2)
            .sum();
        let outer: i128 = bits.iter().zip(&self.outside).filter(|(b, _)| **b).map(|(_, w)| *w).sum();
        inner + outer
    }

    fn measure(&self, bits: &[bool]) -> i128 {
        bits.iter().zip(&self.mass).filter(|(b, _)| **b).map(|(_, m)| *m).sum()
    }

    fn ratio(&self, bits: &[bool]) -> Result<LambdaQ> {
        let p = self.perimeter(bits);
        if p == 0 {
            return Err(Error::NotAdmissible("a candidate set has zero perimeter".into()));
        }
        LambdaQ::new(p, self.measure(bits))
    }

    /// Cut value minus `num·ν(Ω)` equals `den·P(U) − num·ν(U)` for source side `U`.
    fn problem(&self, h: LambdaQ) -> CutProblem {
        let mut p = CutProblem::new(self.cells.len());
        for k in 0..self.cells.len() {
            p.source_cap[k] = h.num * self.mass[k];
            p.sink_cap[k] = h.den * self.outside[k];
        }
        p.pairs = self.pairs.iter().map(|&(i, j, w)| (i, j, h.den * w)).collect();
        p
    }

    fn to_set(&self, grid: &GridDomain, bits: &[bool]) -> DiscreteSet {
        DiscreteSet::from_indices(
            grid,
            self.cells.iter().zip(bits).filter(|(_, b)| **b).map(|(c, _)| *c),
        )
    }
}

fn check_domain(omega: &DiscreteSet) -> Result<()> {
    if omega.is_cofinite() {
        return Err(Error::InvalidParameter("Cheeger domain must be bounded".into()));
    }
    if omega.count() == 0 {
        return Err(Error::InvalidParameter("Cheeger domain is empty".into()));
    }
    Ok(())
}

fn quantized(table: &KernelTable, nu: &WeightMeasure) -> Result<QuantizedStencil> {
    QuantizedStencil::new(&Stencil::new(table), nu, DEFAULT_SCALE)
}

/// Computes the `(K,ν)`-Cheeger constant of `Ω` and a Cheeger set.
pub fn cheeger_solve(omega: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable) -> Result<CheegerResult> {
    table.grid().check_same(omega.grid())?;
    check_domain(omega)?;
    let q = quantized(table, nu)?;
    let net = Network::new(&q, omega);
    let grid = omega.grid();
    let all = vec![true; net.cells.len()];
    let total = net.measure(&all);

    let mut current = all;
    let mut ratio = net.ratio(&current)?;
    let mut trace = Vec::new();
    for _ in 0..MAX_STEPS {
        let sol = solve_cut(&net.problem(ratio))?;
        let min_value = sol.value - ratio.num * total;
        trace.push(TraceStep {
            h: ratio.value(),
            ratio,
            set: net.to_set(grid, &sol.minimal_source_side),
            min_value,
        });
        if min_value < 0 {
            current = sol.minimal_source_side;
            let next = net.ratio(&current)?;
            debug_assert_eq!(next.cmp_exact(&ratio), std::cmp::Ordering::Less);
            ratio = next;
            continue;
        }
        let certificate = FlowCertificate {
            ratio,
            scale: q.scale(),
            edges: net
                .pairs
                .iter()
                .zip(&sol.pair_flow)
                .map(|(&(i, j, _), f)| (net.cells[i as usize], net.cells[j as usize], *f))
                .collect(),
            exterior: net.cells.iter().copied().zip(sol.sink_flow.iter().copied()).collect(),
        };
        return Ok(CheegerResult {
            h: ratio.value(),
            ratio,
            cheeger_set: net.to_set(grid, &current),
            maximal_set: net.to_set(grid, &sol.maximal_source_side),
            trace,
            certificate,
        });
    }
    Err(Error::InvalidParameter(format!("no convergence after {MAX_STEPS} steps")))
}

/// Solves several domains concurrently.
pub fn cheeger_solve_many(
    domains: &[DiscreteSet],
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Vec<Result<CheegerResult>> {
    domains.par_iter().map(|o| cheeger_solve(o, nu, table)).collect()
}

/// Exact ratio `P_q(E)/ν_q(E)` at the default fixed-point scale.
pub fn exact_ratio(e: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable) -> Result<LambdaQ> {
    table.grid().check_same(e.grid())?;
    check_domain(e)?;
    let q = quantized(table, nu)?;
    LambdaQ::new(q.perimeter(e.bits(), false), q.measure(e.bits()))
}

/// Validates the flow certificate: capacities respected and net outflow of
/// every cell of `Ω` at least `h` times its mass, all in exact integers.
pub fn certificate_check(
    result: &CheegerResult,
    omega: &DiscreteSet,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<bool> {
    table.grid().check_same(omega.grid())?;
    check_domain(omega)?;
    let c = &result.certificate;
    let q = QuantizedStencil::new(&Stencil::new(table), nu, c.scale)?;
    let net = Network::new(&q, omega);
    let h = c.ratio;
    let mut node = vec![usize::MAX; q.len()];
    for (k, &cell) in net.cells.iter().enumerate() {
        node[cell] = k;
    }
    if c.exterior.len() != net.cells.len() || c.edges.len() != net.pairs.len() {
        return Ok(false);
    }
    let mut out = vec![0i128; net.cells.len()];
    for (&(i, j, f), &(a, b, w)) in c.edges.iter().zip(&net.pairs) {
        if node[i] != a as usize || node[j] != b as usize || f.abs() > h.den * w {
            return Ok(false);
        }
        out[a as usize] += f;
        out[b as usize] -= f;
    }
    for &(cell, f) in &c.exterior {
        let k = node[cell];
        if k == usize::MAX || f < 0 || f > h.den * net.outside[k] {
            return Ok(false);
        }
        out[k] += f;
    }
    Ok(out.iter().zip(&net.mass).all(|(o, m)| *o >= h.num * m))
}

/// Outcome of a calibrability test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibrability {
    pub calibrable: bool,
    /// `h(E) − P(E)/ν(E)`; never positive.
    pub gap: f64,
    /// `|gap|/h(E)`.
    pub relative_gap: f64,
    pub h: f64,
    pub ratio: f64,
    /// The largest Cheeger set differs from the one found first.
    pub multiple_cheeger_sets: bool,
}

/// Whether `E` is its own Cheeger set, decided in exact arithmetic.
pub fn calibrability_check(e: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable) -> Result<Calibrability> {
    let res = cheeger_solve(e, nu, table)?;
    let own = exact_ratio(e, nu, table)?;
    let gap = res.h - own.value();
    Ok(Calibrability {
        calibrable: res.ratio == own,
        gap,
        relative_gap: gap.abs() / res.h,
        h: res.h,
        ratio: own.value(),
        multiple_cheeger_sets: res.cheeger_set != res.maximal_set,
    })
}

/// Relative rasterization allowance per unit of `spacing / radius` in the
/// Faber–Krahn comparison.
pub const FK_LATTICE_CONSTANT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaberKrahn {
    pub h_omega: f64,
    pub h_ball: f64,
    /// Allowed shortfall of `h_omega` below `h_ball`.
    pub tol: f64,
    pub ok: bool,
}

/// Rasterized ball with `count` cells on a vacuum grid that just contains it.
pub fn lattice_ball(n: usize, count: usize, h: f64) -> Result<DiscreteSet> {
    let cells = prefix_ball(n, count);
    let reach = cells.iter().flat_map(|c| c.iter()).map(|x| x.unsigned_abs()).max().unwrap_or(0) as usize;
    let side = 2 * reach + 1;
    let grid = GridDomain::new(&vec![side; n], h)?;
    Ok(DiscreteSet::from_indices(
        &grid,
        cells.iter().map(|c| {
            if n == 1 {
                (c[0] + reach as i64) as usize
            } else {
                grid.index((c[0] + reach as i64) as usize, (c[1] + reach as i64) as usize)
            }
        }),
    ))
}

/// Compares `h(Ω)` with the Cheeger constant of the rasterized ball of the
/// same cell count, both for Lebesgue measure on vacuum grids.
pub fn faber_krahn_check(omega: &DiscreteSet, table: &KernelTable) -> Result<FaberKrahn> {
    let grid = omega.grid();
    if grid.exterior() != Exterior::Vacuum {
        return Err(Error::InvalidParameter("Faber-Krahn comparison needs a vacuum grid".into()));
    }
    let h_omega = cheeger_solve(omega, &WeightMeasure::lebesgue(grid), table)?.h;
    let ball = lattice_ball(grid.n(), omega.count(), grid.h())?;
    let ball_table = tabulate_offsets(&table.source_kernel(), ball.grid(), table.window())?;
    let h_ball = cheeger_solve(&ball, &WeightMeasure::lebesgue(ball.grid()), &ball_table)?.h;
    let radius = crate::kernel::ball_radius(grid.n(), omega.count() as f64);
    let tol = FK_LATTICE_CONSTANT * h_ball / radius;
    Ok(FaberKrahn {
        h_omega,
        h_ball,
        tol,
        ok: h_omega >= h_ball - tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    pub h: f64,
    /// `[χ_C]/ν(C)` for the Cheeger set `C`.
    pub indicator_ratio: f64,
    pub indicator_ok: bool,
    pub samples: usize,
    pub random_min_ratio: f64,
    pub random_ok: bool,
    /// Level sets of `χ_C + χ_{C_max}` are Cheeger sets and its ratio is `h`.
    pub level_sets_ok: bool,
}

impl EigenReport {
    pub fn all_ok(&self) -> bool {
        self.indicator_ok && self.random_ok && self.level_sets_ok
    }
}

/// Random functions drawn by `eigen_relation_check`.
pub const EIGEN_SAMPLES: usize = 100;

/// Relative slack for floating-point Rayleigh quotients, which see the
/// unrounded weights while `h` comes from the fixed-point network.
pub const EIGEN_REL_TOL: f64 = 1e-6;

/// Checks that `h` is the first eigenvalue: indicators of Cheeger sets attain
/// it and random nonnegative functions supported in `Ω` never go below it.
pub fn eigen_relation_check(
    omega: &DiscreteSet,
    nu: &WeightMeasure,
    table: &KernelTable,
    seed: u64,
) -> Result<EigenReport> {
    let res = cheeger_solve(omega, nu, table)?;
    let st = Stencil::new(table);
    let q = QuantizedStencil::new(&st, nu, DEFAULT_SCALE)?;
    let is_cheeger = |s: &DiscreteSet| {
        res.ratio.den * q.perimeter(s.bits(), false) == res.ratio.num * q.measure(s.bits())
    };
    let ratio_of = |u: &DiscreteFunction| st.variation(u.values()) / u.l1_norm(nu);
    let slack = EIGEN_REL_TOL * res.h;

    let indicator = DiscreteFunction::indicator(&res.cheeger_set);
    let indicator_ratio = ratio_of(&indicator);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<usize> = omega.indices().collect();
    let mut random_min_ratio = f64::INFINITY;
    for _ in 0..EIGEN_SAMPLES {
        let density: f64 = rng.gen_range(0.2..1.0);
        let mut values = vec![0.0; omega.grid().len()];
        for &c in &cells {
            if rng.gen_bool(density) {
                values[c] = rng.gen_range(0.0..1.0);
            }
        }
        if values.iter().all(|v| *v == 0.0) {
            values[cells[0]] = 1.0;
        }
        let u = DiscreteFunction::new(omega.grid(), values)?;
        random_min_ratio = random_min_ratio.min(ratio_of(&u));
    }

    let mut vals = indicator.values().to_vec();
    for c in res.maximal_set.indices() {
        vals[c] += 1.0;
    }
    let combo = DiscreteFunction::new(omega.grid(), vals)?;
    let level_sets_ok = [0.0, 1.0]
        .iter()
        .map(|t| combo.superlevel(*t))
        .filter(|s| s.count() > 0)
        .all(|s| is_cheeger(&s))
        && (ratio_of(&combo) - res.h).abs() <= slack;

    Ok(EigenReport {
        h: res.h,
        indicator_ratio,
        indicator_ok: is_cheeger(&res.cheeger_set) && (indicator_ratio - res.h).abs() <= slack,
        samples: EIGEN_SAMPLES,
        random_min_ratio,
        random_ok: random_min_ratio >= res.h - slack,
        level_sets_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinfBound {
    pub lhs: f64,
    /// Right-hand side with the nominal `β_K(|Ω|)`.
    pub rhs: f64,
    /// Right-hand side with `β_K` lowered by its error estimate.
    pub rhs_upper: f64,
    pub q: f64,
    pub h: f64,
    pub beta: f64,
    pub beta_error: f64,
    pub ok: bool,
}

/// Evaluates both sides of the `L∞` bound for an eigenfunction candidate `u`.
pub fn linf_bound_check(
    omega: &DiscreteSet,
    nu: &WeightMeasure,
    table: &KernelTable,
    u: &DiscreteFunction,
) -> Result<LinfBound> {
    table.grid().check_same(u.grid())?;
    let grid = omega.grid();
    let n = grid.n() as f64;
    let q = check_assumptions(&table.source_kernel(), &[])
        .dec_exponent
        .filter(|q| *q > n && *q < n + 1.0)
        .ok_or_else(|| Error::InvalidParameter("L-infinity bound needs a decay exponent in (n, n+1)".into()))?;
    let res = cheeger_solve(omega, nu, table)?;
    let vol = omega.volume();
    let beta = beta_k(table.effective_kernel(), vol, 1, Some(grid.h()))?;
    let cells: Vec<usize> = omega.indices().collect();
    let lhs = cells.iter().fold(0.0f64, |m, &c| m.max(u.get(c).abs()));
    let l1: f64 = cells.iter().map(|&c| u.get(c).abs()).sum::<f64>() * grid.cell_volume();
    let rhs_for = |b: f64| (nu.w_hi() * vol.powf(2.0 - q / n) * res.h / b).powf(n / (q - n)) * l1;
    let rhs = rhs_for(beta.value);
    let low = beta.value - beta.error;
    let rhs_upper = if low > 0.0 { rhs_for(low) } else { f64::INFINITY };
    Ok(LinfBound {
        lhs,
        rhs,
        rhs_upper,
        q,
        h: res.h,
        beta: beta.value,
        beta_error: beta.error,
        ok: lhs <= rhs_upper,
    })
}

/// Whether `set` reaches the boundary of `Ω`: some cell of `set` has a
/// nearest neighbour outside `Ω` or outside the grid.
pub fn touches_boundary(set: &DiscreteSet, omega: &DiscreteSet) -> bool {
    let grid = set.grid();
    let steps: &[[i64; 2]] = if grid.n() == 1 {
        &[[1, 0], [-1, 0]]
    } else {
        &[[1, 0], [-1, 0], [0, 1], [0, -1]]
    };
    set.indices().any(|i| {
        steps
            .iter()
            .any(|d| grid.shifted(i, *d).is_none_or(|j| !omega.contains(j)))
    })
}

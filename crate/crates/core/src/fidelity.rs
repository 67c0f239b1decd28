//! Behaviour of solutions as the fidelity parameter `Λ` varies.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cheeger::{cheeger_solve, exact_ratio};
use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::fixed::LambdaQ;
use crate::func::{FuncSolver, Stacking};
use crate::geom::GeomSolver;
use crate::grid::{DiscreteFunction, DiscreteSet, WeightMeasure};
use crate::kernel::{check_assumptions, lattice_perimeter, KernelTable};

/// Datum of a sweep.
#[derive(Clone, Debug)]
pub enum SweepDatum {
    Set(DiscreteSet),
    /// A function, solved after quantization to the given number of levels.
    Function(DiscreteFunction, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    /// `ν`-distance of the minimal solution to the datum.
    pub mu: f64,
    /// Cells in the minimal and maximal solutions (support size for functions).
    pub n_min: usize,
    pub n_max: usize,
    /// The extremal solutions differ.
    pub is_jump_candidate: bool,
    /// Both extremal solutions lie inside the datum (set data only).
    pub inside_datum: bool,
}

/// `points` values spaced geometrically from `min` to `max`.
pub fn lambda_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || points == 0 {
        return Err(Error::InvalidParameter(format!(
            "bad lambda range [{min}, {max}] with {points} points"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let ratio = (max / min).ln() / (points - 1) as f64;
    Ok((0..points)
        .map(|k| if k + 1 == points { max } else { min * (ratio * k as f64).exp() })
        .collect())
}

/// Solves the datum at every `Λ` (concurrently) and records the extremal solutions.
pub fn sweep(
    datum: &SweepDatum,
    lambdas: &[f64],
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<Vec<SweepRecord>> {
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter("lambdas must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("lambdas must be sorted".into()));
    }
    match datum {
        SweepDatum::Set(e) => {
            let solver = GeomSolver::new(table, nu)?;
            Ok(solver
                .sweep(e, lambdas)?
                .into_iter()
                .map(|s| SweepRecord {
                    lambda: s.lambda,
                    mu: s.energy.fidelity_term,
                    energy: s.energy,
                    n_min: s.minimal.count(),
                    n_max: s.maximal.count(),
                    is_jump_candidate: s.minimal != s.maximal,
                    inside_datum: s.minimal.is_subset(e) && s.maximal.is_subset(e),
                })
                .collect())
        }
        SweepDatum::Function(f, levels) => {
            let solver = FuncSolver::new(table, nu)?;
            lambdas
                .par_iter()
                .map(|&l| {
                    let lo = solver.solve(f, l, *levels, Stacking::Minimal)?;
                    let hi = solver.solve(f, l, *levels, Stacking::Maximal)?;
                    let support = |u: &DiscreteFunction| u.values().iter().filter(|v| **v != 0.0).count();
                    Ok(SweepRecord {
                        lambda: lo.lambda,
                        mu: lo.energy.fidelity_term,
                        energy: lo.energy,
                        n_min: support(&lo.u),
                        n_max: support(&hi.u),
                        is_jump_candidate: lo.u != hi.u,
                        inside_datum: true,
                    })
                })
                .collect()
        }
    }
}

/// Whether `μ` never increases along the sweep, up to `rel_tol` relative slack
/// for floating-point summation.
pub fn mu_is_nonincreasing(records: &[SweepRecord], rel_tol: f64) -> bool {
    records
        .windows(2)
        .all(|w| w[1].mu <= w[0].mu + rel_tol * w[0].mu.abs().max(f64::MIN_POSITIVE))
}

/// Writes `lambda,tv,fidelity,mu,n_min,n_max,jump` rows.
pub fn write_sweep_csv(records: &[SweepRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "lambda,tv,fidelity,mu,n_min,n_max,jump")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.lambda,
            r.energy.tv_term,
            r.energy.lambda * r.energy.fidelity_term,
            r.mu,
            r.n_min,
            r.n_max,
            u8::from(r.is_jump_candidate)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallThreshold {
    /// Midpoint of the final bisection bracket.
    pub lambda_star: f64,
    /// Width of the final bracket.
    pub bracket: f64,
    /// Cheeger constant of the datum from the Dinkelbach solver.
    pub h: f64,
    pub bisection_steps: usize,
}

/// Locates `sup{Λ : the minimal solution is ∅}` by bisection to width `tol`
/// and compares with the Cheeger constant of `E`.
pub fn ball_threshold(e: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable, tol: f64) -> Result<BallThreshold> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let h = cheeger_solve(e, nu, table)?.h;
    let solver = GeomSolver::new(table, nu)?;
    let vanishes = |l: f64| -> Result<bool> { Ok(solver.solve(e, l)?.minimal.is_empty()) };
    // Above P(E)/ν(E) the datum itself beats ∅.
    let mut hi = 2.0 * exact_ratio(e, nu, table)?.value();
    let mut lo = hi;
    let mut steps = 0;
    loop {
        lo /= 2.0;
        steps += 1;
        if vanishes(lo)? {
            break;
        }
        if steps > 200 {
            return Err(Error::InvalidParameter("no vanishing fidelity found".into()));
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if vanishes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(BallThreshold {
        lambda_star: 0.5 * (lo + hi),
        bracket: hi - lo,
        h,
        bisection_steps: steps,
    })
}

/// `2·P_K(B_r)/(w_lo·|B_r|)` for the rasterized ball of radius `r` on the
/// table's lattice, with the perimeter taken for the untruncated kernel.
pub fn high_fidelity_lambda(r: f64, nu: &WeightMeasure, table: &KernelTable) -> Result<f64> {
    let h = table.h();
    let n = table.grid().n();
    if !(r >= 0.5 * h) {
        return Err(Error::InvalidParameter(format!("radius {r} holds no cell at spacing {h}")));
    }
    let reach = (r / h).ceil() as i64;
    let r1 = if n == 2 { reach } else { 0 };
    let r2 = (r / h) * (r / h) * (1.0 + 1e-12);
    let mut cells = Vec::new();
    for i in -reach..=reach {
        for j in -r1..=r1 {
            if ((i * i + j * j) as f64) <= r2 {
                cells.push([i, j]);
            }
        }
    }
    let kernel = table.source_kernel();
    let volume = cells.len() as f64 * h.powi(n as i32);
    Ok(2.0 * lattice_perimeter(&kernel, &cells, h) / (nu.w_lo() * volume))
}

/// `2·φ_K(4R, D)/(w_hi·C)` with `D` the kernel's doubling radius.
pub fn low_fidelity_bound(radius: f64, table: &KernelTable, w_hi: f64, calibrated_c: f64) -> Result<f64> {
    if !(calibrated_c > 0.0 && w_hi > 0.0 && radius > 0.0) {
        return Err(Error::InvalidParameter("radius, weight bound and constant must be positive".into()));
    }
    let kernel = table.source_kernel();
    let d = check_assumptions(&kernel, &[]).doubling_radius;
    if 4.0 * radius >= d {
        return Err(Error::InvalidParameter(format!("need 4R < D = {d}, got R = {radius}")));
    }
    Ok(2.0 * kernel.phi(4.0 * radius, d)? / (w_hi * calibrated_c))
}

/// Smallest constant `C` for which the low-fidelity bound at `radius` does not
/// exceed the vanishing threshold of the reference datum `ball`.
///
/// A datum supported in `ball` has level sets inside it, and shrinking the
/// datum can only raise its vanishing threshold, so the indicator of `ball`
/// is the worst case among such data.
pub fn calibrate_low_fidelity(
    ball: &DiscreteSet,
    radius: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
    tol: f64,
) -> Result<f64> {
    let t = ball_threshold(ball, nu, table, tol)?;
    // The lower end of the bracket still vanishes.
    let safe = t.lambda_star - 0.5 * t.bracket;
    let unit = low_fidelity_bound(radius, table, nu.w_hi(), 1.0)?;
    Ok(unit / safe)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    pub h: f64,
    pub epsilon: f64,
    pub calibrable: bool,
    /// Both extremal solutions are empty at `h(1−ε)`.
    pub below_empty: bool,
    /// At `Λ = h` the minimal solution is empty and the maximal one is a Cheeger set.
    pub at_h_extremes_ok: bool,
    /// At `Λ = h`, `∅` and the Cheeger set have the same energy.
    pub at_h_equal_energy: bool,
    /// For the indicator datum at `Λ = h`, every level set of both extremal
    /// functional solutions is empty or a Cheeger set.
    pub at_h_functional_ok: bool,
    /// Both extremal solutions equal the datum at `h(1+ε)`; only expected when calibrable.
    pub above_is_datum: bool,
}

impl RegimeReport {
    /// Whether the observed regimes match `{∅}`, `{∅} ∪ Cheeger sets` and `{E}`.
    pub fn matches(&self) -> bool {
        self.below_empty
            && self.at_h_extremes_ok
            && self.at_h_equal_energy
            && self.at_h_functional_ok
            && (self.above_is_datum || !self.calibrable)
    }
}

/// Regime probing offset, relative to `h`: 64 fixed-point units of 2⁻³².
pub const REGIME_EPSILON: f64 = 64.0 / 4_294_967_296.0;

/// Probes the solutions at `h(1−ε)`, exactly `h`, and `h(1+ε)` where `h` is
/// the Cheeger constant of the datum.
pub fn cheeger_lambda_regimes(e: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable) -> Result<RegimeReport> {
    let res = cheeger_solve(e, nu, table)?;
    let own = exact_ratio(e, nu, table)?;
    let solver = GeomSolver::new(table, nu)?;
    let h = res.ratio;
    let is_cheeger = |s: &DiscreteSet| -> Result<bool> { Ok(s.count() > 0 && exact_ratio(s, nu, table)? == h) };

    let below = solver.solve(e, res.h * (1.0 - REGIME_EPSILON))?;
    let at = solver.solve_exact(e, h)?;
    let above = solver.solve(e, res.h * (1.0 + REGIME_EPSILON))?;

    let empty = DiscreteSet::empty(e.grid());
    let at_h_equal_energy = solver.energy_q(&empty, e, h) == solver.energy_q(&res.cheeger_set, e, h)
        && solver.energy_q(&empty, e, h) == Some(at.energy_q);

    let fs = FuncSolver::new(table, nu)?;
    let chi = DiscreteFunction::indicator(e);
    let mut at_h_functional_ok = true;
    for stacking in [Stacking::Minimal, Stacking::Maximal] {
        let sol = fs.solve_quantized_exact(&chi, h, stacking)?;
        for t in &sol.levels[..sol.levels.len() - 1] {
            let s = sol.u.superlevel(*t);
            at_h_functional_ok &= s.count() == 0 || is_cheeger(&s)?;
        }
    }

    Ok(RegimeReport {
        h: res.h,
        epsilon: REGIME_EPSILON,
        calibrable: own == h,
        below_empty: below.minimal.is_empty() && below.maximal.is_empty(),
        at_h_extremes_ok: at.minimal.is_empty() && is_cheeger(&at.maximal)?,
        at_h_equal_energy,
        at_h_functional_ok,
        above_is_datum: above.minimal == *e && above.maximal == *e,
    })
}

/// Exact `Λ` equal to the Cheeger constant of `E`.
pub fn cheeger_lambda(e: &DiscreteSet, nu: &WeightMeasure, table: &KernelTable) -> Result<LambdaQ> {
    Ok(cheeger_solve(e, nu, table)?.ratio)
}

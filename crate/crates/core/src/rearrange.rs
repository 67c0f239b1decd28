//! Symmetric-decreasing rearrangement on grids and the isoperimetric and
//! rearrangement inequalities checked against it.

use serde::Serialize;

use crate::energy::{k_perimeter, k_variation};
use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, DiscreteSet, GridDomain};
use crate::kernel::{check_assumptions, tabulate_offsets, KernelTable};

/// Default lattice tolerance factor `c_lat`.
pub const DEFAULT_LATTICE_CONSTANT: f64 = 0.1;

/// Cells ordered by distance from the grid centre, ties broken by index.
pub fn center_ordering(grid: &GridDomain) -> Vec<usize> {
    let dims = grid.dims();
    let mut cells: Vec<(i64, [usize; 2], usize)> = (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            // Twice the offset from the centre, so every distance is an exact integer.
            let d2: i64 = (0..grid.n())
                .map(|k| {
                    let d = 2 * m[k] as i64 - (dims[k] as i64 - 1);
                    d * d
                })
                .sum();
            (d2, m, i)
        })
        .collect();
    cells.sort_unstable();
    cells.into_iter().map(|c| c.2).collect()
}

/// The first `count` cells of [`center_ordering`].
pub fn center_prefix(grid: &GridDomain, count: usize) -> DiscreteSet {
    DiscreteSet::from_indices(grid, center_ordering(grid).into_iter().take(count))
}

/// Rearranges `|u|` into a function that decreases away from the grid centre.
pub fn sym_decreasing_rearrangement(u: &DiscreteFunction) -> DiscreteFunction {
    let mut values: Vec<f64> = u.values().iter().map(|v| v.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![0.0; values.len()];
    for (cell, v) in center_ordering(u.grid()).into_iter().zip(values) {
        out[cell] = v;
    }
    DiscreteFunction::new(u.grid(), out).expect("a permutation of finite values")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RearrangementCheck {
    pub tv_u: f64,
    pub tv_ustar: f64,
    pub tol: f64,
    pub ok: bool,
}

/// Checks `[u*] ≤ [u] + c_lat·h·[u]`.
pub fn rearrangement_inequality_check(
    u: &DiscreteFunction,
    table: &KernelTable,
    c_lat: f64,
) -> Result<RearrangementCheck> {
    check_lattice_constant(c_lat)?;
    let tv_u = k_variation(u, table)?;
    let tv_ustar = k_variation(&sym_decreasing_rearrangement(u), table)?;
    let tol = c_lat * table.h() * tv_u;
    Ok(RearrangementCheck {
        tv_u,
        tv_ustar,
        tol,
        ok: tv_ustar <= tv_u + tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoperimetricCheck {
    pub p_e: f64,
    pub p_ball: f64,
    pub tol: f64,
    pub ok: bool,
}

/// Checks `P_K(E) ≥ P_K(B) − c_lat·h·P_K(E)` with `B` the centred prefix of `|E|` cells.
pub fn isoperimetric_check(e: &DiscreteSet, table: &KernelTable, c_lat: f64) -> Result<IsoperimetricCheck> {
    check_lattice_constant(c_lat)?;
    if e.is_cofinite() {
        return Err(Error::InvalidParameter("isoperimetric check needs a bounded set".into()));
    }
    let p_e = k_perimeter(e, table)?;
    let p_ball = k_perimeter(&center_prefix(e.grid(), e.count()), table)?;
    let tol = c_lat * table.h() * p_e;
    Ok(IsoperimetricCheck {
        p_e,
        p_ball,
        tol,
        ok: p_e >= p_ball - tol,
    })
}

fn check_lattice_constant(c_lat: f64) -> Result<()> {
    if !(c_lat >= 0.0 && c_lat.is_finite()) {
        return Err(Error::InvalidParameter(format!("lattice constant {c_lat} must be >= 0")));
    }
    Ok(())
}

/// The same region at half the spacing, with the window doubled so the
/// physical interaction range is unchanged.
pub fn refine_table(table: &KernelTable) -> Result<KernelTable> {
    let g = table.grid();
    let shape: Vec<usize> = g.shape().iter().map(|s| 2 * s).collect();
    let fine = GridDomain::new(&shape, g.h() / 2.0)?
        .with_origin(&g.origin())
        .with_exterior(g.exterior());
    tabulate_offsets(&table.source_kernel(), &fine, 2 * table.window())
}

fn parent(fine: &GridDomain, coarse: &GridDomain, i: usize) -> usize {
    let m = fine.multi_index(i);
    if coarse.n() == 1 {
        m[0] / 2
    } else {
        coarse.index(m[0] / 2, m[1] / 2)
    }
}

/// `u` on the refined grid of [`refine_table`], constant on each split cell.
pub fn refine_function(u: &DiscreteFunction, fine: &KernelTable) -> Result<DiscreteFunction> {
    let g = fine.grid();
    DiscreteFunction::new(g, (0..g.len()).map(|i| u.get(parent(g, u.grid(), i))).collect())
}

/// `E` on the refined grid of [`refine_table`].
pub fn refine_set(e: &DiscreteSet, fine: &KernelTable) -> DiscreteSet {
    let g = fine.grid();
    DiscreteSet::from_indices(g, (0..g.len()).filter(|&i| e.contains(parent(g, e.grid(), i))))
        .with_cofinite(e.is_cofinite())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Refined<T> {
    pub coarse: T,
    pub fine: T,
    /// The fine tolerance is below the coarse one.
    pub tol_shrinks: bool,
}

/// Runs the rearrangement check at `h` and again at `h/2`.
pub fn rearrangement_refinement(
    u: &DiscreteFunction,
    table: &KernelTable,
    c_lat: f64,
) -> Result<Refined<RearrangementCheck>> {
    let fine_table = refine_table(table)?;
    let coarse = rearrangement_inequality_check(u, table, c_lat)?;
    let fine = rearrangement_inequality_check(&refine_function(u, &fine_table)?, &fine_table, c_lat)?;
    Ok(Refined {
        tol_shrinks: fine.tol < coarse.tol,
        coarse,
        fine,
    })
}

/// Runs the isoperimetric check at `h` and again at `h/2`.
pub fn isoperimetric_refinement(
    e: &DiscreteSet,
    table: &KernelTable,
    c_lat: f64,
) -> Result<Refined<IsoperimetricCheck>> {
    let fine_table = refine_table(table)?;
    let coarse = isoperimetric_check(e, table, c_lat)?;
    let fine = isoperimetric_check(&refine_set(e, &fine_table), &fine_table, c_lat)?;
    Ok(Refined {
        tol_shrinks: fine.tol < coarse.tol,
        coarse,
        fine,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilationStep {
    pub scale: f64,
    pub perimeter: f64,
    pub volume: f64,
    /// `P_K(rE)/|rE|^{2−q/n}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DilationReport {
    pub exponent: f64,
    pub steps: Vec<DilationStep>,
    /// Relative slack allowed between consecutive ratios.
    pub tol: f64,
    pub nonincreasing: bool,
    /// `P_K(rE)/|rE|` strictly decreasing; checked only for kernels with strict `n`-decay.
    pub strictly_decreasing: Option<bool>,
}

/// Rasterizes `r·E` about the grid centre for each scale on one vacuum grid
/// of the same spacing and checks that `P_K(rE)/|rE|^{2−q/n}` does not increase.
///
/// The slack between consecutive scales is `c_lat·h/ρ` relative, with `ρ`
/// the radius of a ball of volume `|E|`.
pub fn dilation_monotonicity_check(
    e: &DiscreteSet,
    table: &KernelTable,
    scales: &[f64],
    c_lat: f64,
) -> Result<DilationReport> {
    check_lattice_constant(c_lat)?;
    table.grid().check_same(e.grid())?;
    if e.count() == 0 || e.is_cofinite() {
        return Err(Error::InvalidParameter("dilation check needs a bounded nonempty set".into()));
    }
    if scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("scales must be positive and sorted".into()));
    }
    let grid = e.grid();
    let n = grid.n();
    let kernel = table.source_kernel();
    let report = check_assumptions(&kernel, &[]);
    let q = report.dec_exponent.ok_or_else(|| {
        Error::InvalidParameter("kernel has no known decay exponent".into())
    })?;
    let exponent = 2.0 - q / n as f64;

    let top = scales.last().copied().unwrap_or(1.0).max(1.0);
    let dims = grid.dims();
    let shape: Vec<usize> = (0..n)
        .map(|k| {
            let s = (dims[k] as f64 * top).ceil() as usize;
            // Matching parity keeps the centre on the same kind of lattice point.
            if s % 2 == dims[k] % 2 { s } else { s + 1 }
        })
        .collect();
    let big = GridDomain::new(&shape, grid.h())?;
    let big_table = tabulate_offsets(&kernel, &big, table.window())?;
    let half = |len: usize| (len as f64 - 1.0) / 2.0;

    let mut steps = Vec::with_capacity(scales.len());
    for &r in scales {
        let members = (0..big.len()).filter(|&i| {
            let m = big.multi_index(i);
            let mut idx = [0usize; 2];
            for k in 0..n {
                let x = (m[k] as f64 - half(shape[k])) / r + half(dims[k]);
                let c = x.round();
                if c < 0.0 || c >= dims[k] as f64 {
                    return false;
                }
                idx[k] = c as usize;
            }
            e.contains(if n == 1 { idx[0] } else { grid.index(idx[0], idx[1]) })
        });
        let set = DiscreteSet::from_indices(&big, members);
        let perimeter = k_perimeter(&set, &big_table)?;
        let volume = set.volume();
        steps.push(DilationStep {
            scale: r,
            perimeter,
            volume,
            ratio: perimeter / volume.powf(exponent),
        });
    }
    let rho = crate::kernel::ball_radius(n, e.volume());
    let tol = c_lat * grid.h() / rho;
    let nonincreasing = steps.windows(2).all(|w| w[1].ratio <= w[0].ratio * (1.0 + tol));
    let strictly_decreasing = report.dec_n_strict.then(|| {
        steps
            .windows(2)
            .filter(|w| w[1].scale > w[0].scale)
            .all(|w| w[1].perimeter / w[1].volume < w[0].perimeter / w[0].volume)
    });
    Ok(DilationReport {
        exponent,
        steps,
        tol,
        nonincreasing,
        strictly_decreasing,
    })
}

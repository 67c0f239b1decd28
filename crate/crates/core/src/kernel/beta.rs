use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use super::{ball_radius, Kernel};
use crate::error::{Error, Result};
use crate::quad;

/// Estimate of the isoperimetric function `β_K(v) = P_K(B^v)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaEstimate {
    /// Value at the finest spacing.
    pub value: f64,
    /// Richardson extrapolation to zero spacing.
    pub extrapolated: f64,
    /// Error estimate for `value`.
    pub error: f64,
    /// Values at each spacing, coarsest first.
    pub levels: Vec<f64>,
    pub spacings: Vec<f64>,
}

/// `β_K(v)` from discrete perimeters of rasterized balls at halving spacings.
///
/// At spacing `h` the ball is the set of the `round(v/hⁿ)` lattice cells
/// nearest to a cell centre and its perimeter is taken against the whole
/// lattice, with the kernel mass beyond the summation window added from the
/// continuum. The coarsest spacing is `base_spacing`, or a quarter of the
/// ball radius when absent.
pub fn beta_k(
    kernel: &Kernel,
    v: f64,
    levels: usize,
    base_spacing: Option<f64>,
) -> Result<BetaEstimate> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!("volume {v} must be positive")));
    }
    if levels == 0 {
        return Err(Error::InvalidParameter("need at least one refinement level".into()));
    }
    if !kernel.is_far_integrable() {
        return Err(Error::NonIntegrableTail);
    }
    let n = kernel.dim();
    let r_v = ball_radius(n, v);
    let h0 = match base_spacing {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::InvalidParameter(format!("spacing {h} must be positive"))),
        None => r_v / 4.0,
    };
    let spacings: Vec<f64> = (0..levels).map(|l| h0 / 2f64.powi(l as i32)).collect();
    let values: Vec<f64> = spacings
        .par_iter()
        .map(|&h| {
            let count = (v / h.powi(n as i32)).round() as usize;
            lattice_perimeter(kernel, &prefix_ball(n, count), h)
        })
        .collect();
    let value = *values.last().unwrap();
    // Discretization error decays like h^a with a = n + 1 - q for singular kernels.
    let a = (n as f64 + 1.0 - kernel.origin_exponent()).clamp(0.25, 1.0);
    let (extrapolated, error) = if levels >= 2 {
        let diff = value - values[levels - 2];
        let correction = diff / (2f64.powf(a) - 1.0);
        (value + correction, correction.abs().max(diff.abs()))
    } else {
        (value, value * (h0 / r_v).powf(a))
    };
    Ok(BetaEstimate {
        value,
        extrapolated,
        error,
        levels: values,
        spacings,
    })
}

/// The `count` lattice points nearest to the origin, ordered by distance
/// with lexicographic tie-break.
pub fn prefix_ball(n: usize, count: usize) -> Vec<[i64; 2]> {
    let reach = if n == 1 {
        count as i64 / 2 + 2
    } else {
        ((count as f64 / std::f64::consts::PI).sqrt()).ceil() as i64 + 2
    };
    let r1 = if n == 2 { reach } else { 0 };
    let mut cells: Vec<[i64; 2]> = Vec::new();
    for i in -reach..=reach {
        for j in -r1..=r1 {
            cells.push([i, j]);
        }
    }
    cells.sort_by_key(|c| (c[0] * c[0] + c[1] * c[1], c[0], c[1]));
    cells.truncate(count);
    cells
}

/// Perimeter of a finite set of lattice cells (spacing `h`) against the
/// infinite lattice: `Σ_{i∈E, j∉E} K((i-j)h) h^{2n}`, where interactions
/// beyond the summation cube are replaced by the continuum tail integral.
pub fn lattice_perimeter(kernel: &Kernel, cells: &[[i64; 2]], h: f64) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    let n = kernel.dim();
    let count = cells.len() as f64;
    // Rows of sorted runs [start, end] along the second axis.
    let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for c in cells {
        rows.entry(c[0]).or_default().push(c[1]);
    }
    let runs: BTreeMap<i64, Vec<(i64, i64)>> = rows
        .into_iter()
        .map(|(r, mut cols)| {
            cols.sort_unstable();
            cols.dedup();
            let mut out: Vec<(i64, i64)> = Vec::new();
            for c in cols {
                match out.last_mut() {
                    Some(last) if last.1 + 1 == c => last.1 = c,
                    _ => out.push((c, c)),
                }
            }
            (r, out)
        })
        .collect();
    let lo0 = *runs.keys().next().unwrap();
    let hi0 = *runs.keys().next_back().unwrap();
    let lo1 = runs.values().map(|r| r[0].0).min().unwrap();
    let hi1 = runs.values().map(|r| r.last().unwrap().1).max().unwrap();
    // Every pair inside the set fits in the summation cube.
    let w = (hi0 - lo0).max(hi1 - lo1) + 1;
    let w1 = if n == 2 { w } else { 0 };
    let scale = h.powi(2 * n as i32);
    let overlap = |a: &[(i64, i64)], b: &[(i64, i64)], shift: i64| -> i64 {
        let mut total = 0;
        for &(s0, e0) in a {
            for &(s1, e1) in b {
                let lo = s0.max(s1 + shift);
                let hi = e0.min(e1 + shift);
                if hi >= lo {
                    total += hi - lo + 1;
                }
            }
        }
        total
    };
    let mut perimeter = 0.0;
    for d0 in -w..=w {
        for d1 in -w1..=w1 {
            if d0 == 0 && d1 == 0 {
                continue;
            }
            let rho = (((d0 * d0 + d1 * d1) as f64).sqrt()) * h;
            let weight = kernel.profile(rho) * scale;
            if weight == 0.0 {
                continue;
            }
            // Pairs (i, i + Δ) with both ends in the set.
            let mut inside = 0;
            for (r, a) in &runs {
                if let Some(b) = runs.get(&(r + d0)) {
                    inside += overlap(a, b, -d1);
                }
            }
            perimeter += weight * (count - inside as f64);
        }
    }
    let a = (w as f64 + 0.5) * h;
    perimeter + count * h.powi(n as i32) * cube_tail(kernel, a)
}

/// `∫ K` over the complement of the cube `[-a, a]ⁿ`.
fn cube_tail(kernel: &Kernel, a: f64) -> f64 {
    if kernel.dim() == 1 {
        return kernel.radial_integral(a, f64::INFINITY);
    }
    let corner = a * std::f64::consts::SQRT_2;
    let top = corner.min(kernel.support_radius());
    let mut total = kernel.radial_integral(corner, f64::INFINITY);
    if top > a {
        // On the circle of radius ρ ∈ (a, a√2) the arc outside the square spans 8·acos(a/ρ).
        let f = |rho: f64| kernel.profile(rho) * rho * 8.0 * (a / rho).min(1.0).acos();
        total += quad::adaptive(&f, a, top, 1e-10);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, KernelSpec};

    fn kernel(family: KernelFamily, n: usize) -> Kernel {
        Kernel::new(KernelSpec::new(family, n)).unwrap()
    }

    #[test]
    fn prefix_ball_is_nearest_first() {
        let b = prefix_ball(2, 5);
        assert_eq!(b[0], [0, 0]);
        assert_eq!(b[1..].iter().filter(|c| c[0].abs() + c[1].abs() == 1).count(), 4);
        assert_eq!(prefix_ball(1, 3), vec![[0, 0], [-1, 0], [1, 0]]);
    }

    #[test]
    fn one_dimensional_interval_matches_closed_form() {
        // Interval of length L under ρ^{-1-s}: P = 2·∫_0^L ∫_L^∞ |x-y|^{-1-s} = 2 L^{1-s}/(s(1-s)).
        let s = 0.5;
        let k = kernel(KernelFamily::Fractional { s }, 1);
        let est = beta_k(&k, 2.0, 6, None).unwrap();
        let exact = 2.0 * 2f64.powf(1.0 - s) / (s * (1.0 - s));
        assert!((est.extrapolated - exact).abs() < 0.02 * exact, "{est:?} vs {exact}");
        assert!((est.value - exact).abs() <= est.error + 1e-12 + 0.02 * exact);
    }

    #[test]
    fn constant_ball_small_volume_ratio_approaches_mass() {
        let k = kernel(KernelFamily::ConstantBall { radius: 1.0 }, 2);
        let mass = k.total_mass();
        let r = |v: f64| beta_k(&k, v, 2, None).unwrap().value / v;
        assert!((r(1e-4) - mass).abs() < 0.05 * mass);
        assert!(r(1e-4) > r(0.5));
    }

    #[test]
    fn non_integrable_tail_is_an_error() {
        let k = kernel(KernelFamily::TwoExponent { s0: 0.0, s1: 0.0 }, 1);
        assert!(matches!(beta_k(&k, 1.0, 2, None), Err(Error::NonIntegrableTail)));
    }
}

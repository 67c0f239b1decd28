//! Discrete K-variation, K-perimeters and the functional/geometric energies.
//!
//! Every grid pair inside the kernel window interacts once. On a vacuum grid
//! each cell also interacts with the exterior through its boundary mass, the
//! total weight of its window offsets that leave the grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use crate::kernel::KernelTable;

/// Unordered grid pairs with their weights plus per-cell boundary mass.
#[derive(Clone, Debug)]
pub struct Stencil {
    grid: GridDomain,
    pairs: Vec<(u32, u32, f64)>,
    outside: Vec<f64>,
    cell_mass: f64,
}

impl Stencil {
    pub fn new(table: &KernelTable) -> Self {
        let grid = *table.grid();
        let mut pairs = Vec::new();
        let mut outside = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            for o in table.half_offsets() {
                if let Some(j) = grid.shifted(i, o.delta) {
                    pairs.push((i as u32, j as u32, o.weight));
                }
            }
            for o in table.offsets() {
                if grid.shifted(i, o.delta).is_none() {
                    outside[i] += o.weight;
                }
            }
        }
        Self {
            grid,
            pairs,
            outside,
            cell_mass: table.cell_mass(),
        }
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn pairs(&self) -> &[(u32, u32, f64)] {
        &self.pairs
    }

    /// Whether grid cells interact with the exterior.
    pub fn has_exterior(&self) -> bool {
        self.grid.exterior() == Exterior::Vacuum
    }

    /// Interaction mass between a cell and the exterior (zero on detached grids).
    pub fn boundary_mass(&self, idx: usize) -> f64 {
        if self.has_exterior() {
            self.outside[idx]
        } else {
            0.0
        }
    }

    /// Total interaction mass of one cell on the infinite lattice.
    pub fn cell_mass(&self) -> f64 {
        self.cell_mass
    }

    /// Interaction mass of a cell with everything it can interact with.
    pub fn reachable_mass(&self, idx: usize) -> f64 {
        if self.has_exterior() {
            self.cell_mass
        } else {
            self.cell_mass - self.outside[idx]
        }
    }

    pub(crate) fn check(&self, grid: &GridDomain) -> Result<()> {
        self.grid.check_same(grid)
    }

    /// `[u]` with `u = 0` outside the grid.
    pub fn variation(&self, u: &[f64]) -> f64 {
        let inner: f64 = self
            .pairs
            .iter()
            .map(|&(i, j, w)| w * (u[i as usize] - u[j as usize]).abs())
            .sum();
        let outer: f64 = if self.has_exterior() {
            u.iter().zip(&self.outside).map(|(v, b)| v.abs() * b).sum()
        } else {
            0.0
        };
        inner + outer
    }

    /// `P_K(E)` of a set given by membership bits and exterior membership.
    pub fn perimeter(&self, bits: &[bool], exterior_in: bool) -> f64 {
        let inner: f64 = self
            .pairs
            .iter()
            .filter(|&&(i, j, _)| bits[i as usize] != bits[j as usize])
            .map(|p| p.2)
            .sum();
        let outer: f64 = if self.has_exterior() {
            bits.iter()
                .zip(&self.outside)
                .filter(|(b, _)| **b != exterior_in)
                .map(|(_, w)| w)
                .sum()
        } else {
            0.0
        };
        inner + outer
    }
}

/// Energy split into its total-variation and fidelity parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub tv_term: f64,
    pub fidelity_term: f64,
    pub lambda: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(tv_term: f64, fidelity_term: f64, lambda: f64) -> Self {
        // Adding +0.0 turns a signed zero from empty sums into +0.
        let (tv_term, fidelity_term) = (tv_term + 0.0, fidelity_term + 0.0);
        Self {
            tv_term,
            fidelity_term,
            lambda,
            total: tv_term + lambda * fidelity_term,
        }
    }
}

/// Discrete K-variation `[u]`.
pub fn k_variation(u: &DiscreteFunction, table: &KernelTable) -> Result<f64> {
    let st = Stencil::new(table);
    st.check(u.grid())?;
    Ok(st.variation(u.values()))
}

/// Discrete K-perimeter `P_K(E)`.
pub fn k_perimeter(e: &DiscreteSet, table: &KernelTable) -> Result<f64> {
    let st = Stencil::new(table);
    st.check(e.grid())?;
    Ok(st.perimeter(e.bits(), e.is_cofinite()))
}

/// K-perimeter of `E` relative to `A`: pairs inside `A` and pairs between `A`
/// and its complement count, pairs entirely outside `A` do not.
pub fn k_perimeter_relative(e: &DiscreteSet, a: &DiscreteSet, table: &KernelTable) -> Result<f64> {
    let st = Stencil::new(table);
    st.check(e.grid())?;
    st.check(a.grid())?;
    let inner: f64 = st
        .pairs
        .iter()
        .filter(|&&(i, j, _)| {
            let (i, j) = (i as usize, j as usize);
            (a.contains(i) || a.contains(j)) && e.contains(i) != e.contains(j)
        })
        .map(|p| p.2)
        .sum();
    let outer: f64 = if st.has_exterior() {
        (0..st.grid.len())
            .filter(|&i| (a.contains(i) || a.is_cofinite()) && e.contains(i) != e.is_cofinite())
            .map(|i| st.outside[i])
            .sum()
    } else {
        0.0
    };
    Ok(inner + outer)
}

/// Both sides of `P_K(E) = m·#E − Σ_{i≠j∈E} w_ij` with `m` the interaction
/// mass of a cell; the right side is evaluated without touching `E`'s
/// complement. Requires an integrable kernel and a bounded set.
pub fn integrable_identity_check(e: &DiscreteSet, table: &KernelTable) -> Result<(f64, f64)> {
    if !table.source_kernel().is_integrable() {
        return Err(Error::NonIntegrableKernel);
    }
    if e.is_cofinite() {
        return Err(Error::InvalidParameter("identity needs a bounded set".into()));
    }
    let st = Stencil::new(table);
    st.check(e.grid())?;
    let lhs = st.perimeter(e.bits(), false);
    let brutto: f64 = e.indices().map(|i| st.reachable_mass(i)).sum();
    let inside: f64 = st
        .pairs
        .iter()
        .filter(|&&(i, j, _)| e.contains(i as usize) && e.contains(j as usize))
        .map(|p| 2.0 * p.2)
        .sum();
    Ok((lhs, brutto - inside))
}

/// Interaction mass of the tabulated kernel per unit volume, the discrete `‖K‖_{L¹}`.
pub fn discrete_kernel_mass(table: &KernelTable) -> f64 {
    table.cell_mass() / table.grid().cell_volume()
}

/// One term of the coarea decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoareaTerm {
    /// Superlevel threshold (the lower of two consecutive values).
    pub threshold: f64,
    /// Distance to the next value.
    pub gap: f64,
    pub perimeter: f64,
}

/// Perimeters of the superlevel sets `{u > t}` at consecutive values of `u`
/// (including the exterior value 0 on vacuum grids); `Σ gap·P = [u]`.
pub fn coarea_decompose(u: &DiscreteFunction, table: &KernelTable) -> Result<Vec<CoareaTerm>> {
    let st = Stencil::new(table);
    st.check(u.grid())?;
    let mut values = u.values().to_vec();
    if st.has_exterior() {
        values.push(0.0);
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values
        .windows(2)
        .map(|w| {
            let set = u.superlevel(w[0]);
            CoareaTerm {
                threshold: w[0],
                gap: w[1] - w[0],
                perimeter: st.perimeter(set.bits(), st.has_exterior() && w[0] < 0.0),
            }
        })
        .collect())
}

/// `[u] + Λ ∫|u − f| dν`.
pub fn functional_energy(
    u: &DiscreteFunction,
    f: &DiscreteFunction,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<EnergyBreakdown> {
    let st = Stencil::new(table);
    st.check(u.grid())?;
    st.check(f.grid())?;
    check_measure(nu, u.grid())?;
    Ok(functional_energy_with(&st, u, f, lambda, nu))
}

pub(crate) fn functional_energy_with(
    st: &Stencil,
    u: &DiscreteFunction,
    f: &DiscreteFunction,
    lambda: f64,
    nu: &WeightMeasure,
) -> EnergyBreakdown {
    let vol = u.grid().cell_volume();
    let fidelity: f64 = u
        .values()
        .iter()
        .zip(f.values())
        .zip(nu.density())
        .map(|((a, b), w)| (a - b).abs() * w)
        .sum::<f64>()
        * vol;
    EnergyBreakdown::new(st.variation(u.values()), fidelity, lambda)
}

/// `P_K(U) + Λ ν(E △ U)`; the fidelity is infinite when the sets differ
/// on the whole exterior.
pub fn geometric_energy(
    u: &DiscreteSet,
    e: &DiscreteSet,
    lambda: f64,
    nu: &WeightMeasure,
    table: &KernelTable,
) -> Result<EnergyBreakdown> {
    let st = Stencil::new(table);
    st.check(u.grid())?;
    st.check(e.grid())?;
    check_measure(nu, u.grid())?;
    Ok(geometric_energy_with(&st, u, e, lambda, nu))
}

pub(crate) fn geometric_energy_with(
    st: &Stencil,
    u: &DiscreteSet,
    e: &DiscreteSet,
    lambda: f64,
    nu: &WeightMeasure,
) -> EnergyBreakdown {
    let exterior_differs = st.has_exterior() && u.is_cofinite() != e.is_cofinite();
    let fidelity = if exterior_differs {
        f64::INFINITY
    } else {
        nu.measure(&u.symmetric_difference(e))
    };
    EnergyBreakdown::new(st.perimeter(u.bits(), u.is_cofinite()), fidelity, lambda)
}

pub(crate) fn check_measure(nu: &WeightMeasure, grid: &GridDomain) -> Result<()> {
    if nu.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "measure has {} cells, grid has {}",
            nu.len(),
            grid.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{tabulate_offsets, Kernel, KernelFamily, KernelSpec};

    fn table(family: KernelFamily, grid: &GridDomain, w: usize) -> KernelTable {
        let k = Kernel::new(KernelSpec::new(family, grid.n())).unwrap();
        tabulate_offsets(&k, grid, w).unwrap()
    }

    #[test]
    fn two_cells_one_offset() {
        let g = GridDomain::line(2, 1.0).unwrap().with_exterior(Exterior::Detached);
        let t = table(KernelFamily::ConstantBall { radius: 1.0 }, &g, 1);
        let u = DiscreteFunction::new(&g, vec![0.0, 1.0]).unwrap();
        assert_eq!(k_variation(&u, &t).unwrap(), 1.0);
        assert_eq!(k_variation(&DiscreteFunction::constant(&g, 3.0), &t).unwrap(), 0.0);
    }

    #[test]
    fn four_cells_constant_ball() {
        let g = GridDomain::line(4, 1.0).unwrap().with_exterior(Exterior::Detached);
        let t = table(KernelFamily::ConstantBall { radius: 3.0 }, &g, 3);
        let e = DiscreteSet::from_indices(&g, [0, 1]);
        assert_eq!(k_perimeter(&e, &t).unwrap(), 4.0);
    }

    #[test]
    fn vacuum_boundary_counts_exterior_pairs() {
        let g = GridDomain::line(4, 1.0).unwrap();
        let t = table(KernelFamily::ConstantBall { radius: 3.0 }, &g, 3);
        let e = DiscreteSet::from_indices(&g, [0, 1]);
        // Cell 0 reaches 3 exterior cells, cell 1 reaches 2 on the left and 1 on the right.
        assert_eq!(k_perimeter(&e, &t).unwrap(), 4.0 + 6.0);
        assert_eq!(k_perimeter(&e.complement(), &t).unwrap(), 10.0);
        assert_eq!(k_perimeter(&DiscreteSet::empty(&g), &t).unwrap(), 0.0);
    }

    #[test]
    fn variation_of_indicator_is_perimeter() {
        let g = GridDomain::rect(5, 5, 0.5).unwrap();
        let t = table(KernelFamily::Fractional { s: 0.4 }, &g, 3);
        let e = DiscreteSet::from_indices(&g, [1, 2, 7, 12, 13, 24]);
        let a = k_perimeter(&e, &t).unwrap();
        let b = k_variation(&DiscreteFunction::indicator(&e), &t).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn relative_perimeter_on_full_domain() {
        let g = GridDomain::rect(4, 4, 1.0).unwrap();
        let t = table(KernelFamily::Fractional { s: 0.5 }, &g, 2);
        let e = DiscreteSet::from_indices(&g, [0, 5, 6]);
        let everything = DiscreteSet::empty(&g).complement();
        let p = k_perimeter(&e, &t).unwrap();
        assert_eq!(k_perimeter_relative(&e, &everything, &t).unwrap(), p);
    }

    #[test]
    fn geometric_energy_at_datum_is_perimeter() {
        let g = GridDomain::rect(3, 3, 1.0).unwrap();
        let t = table(KernelFamily::Fractional { s: 0.5 }, &g, 2);
        let nu = WeightMeasure::lebesgue(&g);
        let e = DiscreteSet::from_indices(&g, [4]);
        let en = geometric_energy(&e, &e, 2.0, &nu, &t).unwrap();
        assert_eq!(en.fidelity_term, 0.0);
        assert_eq!(en.total, k_perimeter(&e, &t).unwrap());
        let empty = geometric_energy(&DiscreteSet::empty(&g), &e, 2.0, &nu, &t).unwrap();
        assert_eq!(empty.total, 2.0);
        let inf = geometric_energy(&e.complement(), &e, 2.0, &nu, &t).unwrap();
        assert!(inf.total.is_infinite());
    }

    #[test]
    fn coarea_sums_to_variation() {
        let g = GridDomain::rect(3, 3, 1.0).unwrap();
        let t = table(KernelFamily::Fractional { s: 0.5 }, &g, 2);
        let u = DiscreteFunction::new(&g, vec![-1.0, 0.5, 2.0, 0.5, 0.5, -1.0, 2.0, 2.0, 0.0]).unwrap();
        let terms = coarea_decompose(&u, &t).unwrap();
        let sum: f64 = terms.iter().map(|c| c.gap * c.perimeter).sum();
        let tv = k_variation(&u, &t).unwrap();
        assert!((sum - tv).abs() < 1e-12 * tv);
    }
}

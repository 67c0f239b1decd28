//! Brute-force oracles shared by the integration tests. Nothing here goes
//! through the library's stencils, flow networks or fixed-point encodings.
#![allow(dead_code)]

use nlbv::grid::{DiscreteFunction, DiscreteSet, Exterior, GridDomain, WeightMeasure};
use nlbv::kernel::{Kernel, KernelFamily, KernelSpec, KernelTable};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn table(grid: &GridDomain, family: KernelFamily, window: usize) -> KernelTable {
    let k = Kernel::new(KernelSpec::new(family, grid.n()).with_window(window)).unwrap();
    KernelTable::new(&k, grid).unwrap()
}

pub fn families() -> [KernelFamily; 3] {
    [
        KernelFamily::Fractional { s: 0.5 },
        KernelFamily::ConstantBall { radius: 2.0 },
        KernelFamily::TwoExponent { s0: 0.2, s1: 0.8 },
    ]
}

/// `K(Δh)·h^{2n}` for `0 < |Δ| ≤ W`, evaluated from the untruncated kernel.
pub fn weight(t: &KernelTable, d: [i64; 2]) -> f64 {
    let w = t.window() as f64;
    let n = t.grid().n();
    let (a, b) = (d[0] as f64, d[1] as f64);
    let r2 = a * a + b * b;
    if r2 == 0.0 || r2 > w * w {
        return 0.0;
    }
    let h = t.h();
    let x: Vec<f64> = if n == 1 { vec![b * h] } else { vec![a * h, b * h] };
    t.source_kernel().eval(&x).unwrap() * h.powi(2 * n as i32)
}

/// `½ Σ_{x≠y} w(x−y)|u(x)−u(y)|` over the grid padded with zeros by the
/// window on a vacuum grid, and over the grid alone on a detached one.
pub fn variation(u: &[f64], grid: &GridDomain, t: &KernelTable) -> f64 {
    let [rows, cols] = grid.dims();
    let pad = if grid.exterior() == Exterior::Vacuum { t.window() as i64 } else { 0 };
    let (r0, c0) = (-pad, -pad);
    let (r1, c1) = (rows as i64 + pad, cols as i64 + pad);
    let value = |r: i64, c: i64| {
        if r < 0 || c < 0 || r >= rows as i64 || c >= cols as i64 {
            0.0
        } else {
            u[r as usize * cols + c as usize]
        }
    };
    let mut total = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            let a = value(r, c);
            for rr in r0..r1 {
                for cc in c0..c1 {
                    let b = value(rr, cc);
                    if a != b {
                        total += 0.5 * weight(t, [rr - r, cc - c]) * (a - b).abs();
                    }
                }
            }
        }
    }
    total
}

pub fn perimeter(bits: &[bool], grid: &GridDomain, t: &KernelTable) -> f64 {
    let u: Vec<f64> = bits.iter().map(|b| f64::from(u8::from(*b))).collect();
    variation(&u, grid, t)
}

pub fn cell_weights(nu: &WeightMeasure, grid: &GridDomain) -> Vec<f64> {
    let v = grid.h().powi(grid.n() as i32);
    nu.density().iter().map(|w| w * v).collect()
}

pub fn geometric_energy(u: &[bool], e: &[bool], lambda: f64, nu: &WeightMeasure, grid: &GridDomain, t: &KernelTable) -> f64 {
    let cw = cell_weights(nu, grid);
    let fid: f64 = (0..u.len()).filter(|i| u[*i] != e[*i]).map(|i| cw[i]).sum();
    perimeter(u, grid, t) + lambda * fid
}

pub fn functional_energy(u: &[f64], f: &[f64], lambda: f64, nu: &WeightMeasure, grid: &GridDomain, t: &KernelTable) -> f64 {
    let cw = cell_weights(nu, grid);
    let fid: f64 = (0..u.len()).map(|i| cw[i] * (u[i] - f[i]).abs()).sum();
    variation(u, grid, t) + lambda * fid
}

pub fn bits_of(mask: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| mask >> i & 1 == 1).collect()
}

/// Minimum energy and the intersection/union of all (near-)optimal sets.
pub struct Exhaustive {
    pub min: f64,
    pub meet: Vec<bool>,
    pub join: Vec<bool>,
}

/// Enumerates all subsets; energies within `rel` of the minimum count as optimal.
pub fn exhaustive_geometric(e: &[bool], lambda: f64, nu: &WeightMeasure, grid: &GridDomain, t: &KernelTable, rel: f64) -> Exhaustive {
    let len = grid.len();
    let energies: Vec<f64> = (0..1u64 << len)
        .map(|m| geometric_energy(&bits_of(m, len), e, lambda, nu, grid, t))
        .collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut meet, mut join) = (u64::MAX >> (64 - len), 0u64);
    for (m, en) in energies.iter().enumerate() {
        if *en <= min + rel * min.abs().max(1.0) {
            meet &= m as u64;
            join |= m as u64;
        }
    }
    Exhaustive {
        min,
        meet: bits_of(meet, len),
        join: bits_of(join, len),
    }
}

/// `min P(U)/ν(U)` over nonempty `U ⊆ Ω`.
pub fn exhaustive_cheeger(omega: &DiscreteSet, nu: &WeightMeasure, t: &KernelTable) -> f64 {
    let grid = omega.grid();
    let cells: Vec<usize> = omega.indices().collect();
    let cw = cell_weights(nu, grid);
    let mut best = f64::INFINITY;
    for m in 1u64..1 << cells.len() {
        let mut bits = vec![false; grid.len()];
        let mut vol = 0.0;
        for (k, c) in cells.iter().enumerate() {
            if m >> k & 1 == 1 {
                bits[*c] = true;
                vol += cw[*c];
            }
        }
        best = best.min(perimeter(&bits, grid, t) / vol);
    }
    best
}

pub fn random_set(rng: &mut ChaCha8Rng, grid: &GridDomain, density: f64) -> DiscreteSet {
    DiscreteSet::from_indices(grid, (0..grid.len()).filter(|_| rng.gen_bool(density)))
}

pub fn random_function(rng: &mut ChaCha8Rng, grid: &GridDomain, values: &[f64]) -> DiscreteFunction {
    let v = (0..grid.len()).map(|_| values[rng.gen_range(0..values.len())]).collect();
    DiscreteFunction::new(grid, v).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, grid: &GridDomain) -> WeightMeasure {
    WeightMeasure::new(grid, (0..grid.len()).map(|_| rng.gen_range(0.5..2.0)).collect()).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

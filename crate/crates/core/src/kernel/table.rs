use serde::Serialize;

use super::Kernel;
use crate::error::{Error, Result};
use crate::grid::GridDomain;

/// Window used for kernels with unbounded support when none is configured.
pub const DEFAULT_WINDOW: usize = 8;

/// One tabulated lattice offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableOffset {
    pub delta: [i64; 2],
    /// `K(Δ·h)·h^{2n}`.
    pub weight: f64,
}

/// Pairwise interaction weights on lattice offsets inside a truncation window.
///
/// Offsets are kept when `0 < |Δ|₂ ≤ W`, so the tabulated kernel is exactly
/// the radial kernel cut at `W·h` and stays radial and monotone. Only nonzero
/// weights are stored; both `Δ` and `-Δ` are present.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    grid: GridDomain,
    window: usize,
    offsets: Vec<TableOffset>,
    dense: Vec<f64>,
    tail_mass: f64,
    kernel: Kernel,
}

impl KernelTable {
    /// Tabulates with the kernel's configured window, or with a window
    /// covering the support of compactly supported kernels.
    pub fn new(kernel: &Kernel, grid: &GridDomain) -> Result<Self> {
        let window = match kernel.spec().window {
            Some(w) => w,
            None => {
                let support = kernel.support_radius();
                if support.is_finite() {
                    ((support / grid.h()) * (1.0 - 1e-12)).ceil().max(1.0) as usize
                } else {
                    DEFAULT_WINDOW
                }
            }
        };
        tabulate_offsets(kernel, grid, window)
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn offsets(&self) -> &[TableOffset] {
        &self.offsets
    }

    /// Offsets with `Δ` lexicographically positive, one per `±Δ` pair.
    pub fn half_offsets(&self) -> impl Iterator<Item = &TableOffset> {
        self.offsets.iter().filter(|o| o.delta > [0, 0])
    }

    /// Weight at an offset (zero outside the table).
    pub fn weight(&self, delta: [i64; 2]) -> f64 {
        let w = self.window as i64;
        if delta[0].abs() > w || delta[1].abs() > w {
            return 0.0;
        }
        let side = 2 * w + 1;
        self.dense[((delta[0] + w) * side + delta[1] + w) as usize]
    }

    /// `φ_K(W·h, ∞)`, the kernel mass dropped by truncation.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Sum of all tabulated weights (interaction mass of one cell).
    pub fn cell_mass(&self) -> f64 {
        self.offsets.iter().map(|o| o.weight).sum()
    }

    /// The kernel as represented by the table: the original kernel cut at `W·h`.
    pub fn effective_kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Kernel the table was built from, without the truncation.
    pub fn source_kernel(&self) -> Kernel {
        Kernel {
            spec: self.kernel.spec.clone(),
            cutoff: None,
        }
    }

    /// Same weights on a grid of identical shape and spacing (e.g. another exterior).
    pub fn on_grid(&self, grid: &GridDomain) -> Result<Self> {
        self.grid.check_same(grid)?;
        Ok(Self {
            grid: *grid,
            ..self.clone()
        })
    }
}

/// Tabulates `K(Δ·h)·h^{2n}` for lattice offsets with `0 < |Δ|₂ ≤ W`.
pub fn tabulate_offsets(kernel: &Kernel, grid: &GridDomain, window: usize) -> Result<KernelTable> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be at least one cell".into()));
    }
    if kernel.dim() != grid.n() {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} on a {}-dimensional grid",
            kernel.dim(),
            grid.n()
        )));
    }
    let h = grid.h();
    let n = grid.n();
    let w = window as i64;
    let side = 2 * w + 1;
    let scale = h.powi(2 * n as i32);
    let r1 = if n == 2 { w } else { 0 };
    let mut offsets = Vec::new();
    let mut dense = vec![0.0; (side * side) as usize];
    for d0 in -w..=w {
        for d1 in -r1..=r1 {
            let r2 = d0 * d0 + d1 * d1;
            if r2 == 0 || r2 > w * w {
                continue;
            }
            let rho = (r2 as f64).sqrt() * h;
            let weight = kernel.profile(rho) * scale;
            if weight > 0.0 {
                offsets.push(TableOffset {
                    delta: [d0, d1],
                    weight,
                });
                dense[((d0 + w) * side + d1 + w) as usize] = weight;
            }
        }
    }
    let cut = window as f64 * h;
    let tail_mass = if cut < kernel.support_radius() {
        kernel.radial_integral(cut, f64::INFINITY)
    } else {
        0.0
    };
    Ok(KernelTable {
        grid: *grid,
        window,
        offsets,
        dense,
        tail_mass,
        kernel: kernel.with_cutoff(cut),
    })
}

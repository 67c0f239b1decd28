//! Uniform grids, weight measures, discrete sets and functions, quantization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What lies outside the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exterior {
    /// The grid sits in free space; outside cells hold the value 0 (the empty
    /// set) and interact with grid cells through their boundary mass.
    #[default]
    Vacuum,
    /// The grid is the whole universe: no interaction crosses its boundary.
    Detached,
}

/// A uniform grid in one or two dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    n: usize,
    dims: [usize; 2],
    h: f64,
    origin: [f64; 2],
    exterior: Exterior,
}

impl GridDomain {
    /// Builds a grid from per-axis extents (one or two entries) and spacing `h`.
    pub fn new(shape: &[usize], h: f64) -> Result<Self> {
        let dims = match shape {
            [a] => [*a, 1],
            [a, b] => [*a, *b],
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "grid must have 1 or 2 axes, got {}",
                    shape.len()
                )))
            }
        };
        if dims.contains(&0) {
            return Err(Error::InvalidParameter("grid extents must be positive".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!("grid spacing {h} must be positive")));
        }
        Ok(Self {
            n: shape.len(),
            dims,
            h,
            origin: [0.0; 2],
            exterior: Exterior::Vacuum,
        })
    }

    pub fn line(len: usize, h: f64) -> Result<Self> {
        Self::new(&[len], h)
    }

    pub fn rect(rows: usize, cols: usize, h: f64) -> Result<Self> {
        Self::new(&[rows, cols], h)
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Self {
        for (o, v) in self.origin.iter_mut().zip(origin) {
            *o = *v;
        }
        self
    }

    pub fn with_exterior(mut self, exterior: Exterior) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Extents per axis; the second entry is 1 for one-dimensional grids.
    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn shape(&self) -> Vec<usize> {
        self.dims[..self.n].to_vec()
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn exterior(&self) -> Exterior {
        self.exterior
    }

    /// Lebesgue measure of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.dims[1] + i1
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx / self.dims[1], idx % self.dims[1]]
    }

    /// Index of the cell displaced by `delta`, if it lies on the grid.
    pub fn shifted(&self, idx: usize, delta: [i64; 2]) -> Option<usize> {
        let [a, b] = self.multi_index(idx);
        let a = a as i64 + delta[0];
        let b = b as i64 + delta[1];
        if a < 0 || b < 0 || a >= self.dims[0] as i64 || b >= self.dims[1] as i64 {
            None
        } else {
            Some(self.index(a as usize, b as usize))
        }
    }

    /// Physical coordinates of a cell centre.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.multi_index(idx);
        [
            self.origin[0] + a as f64 * self.h,
            self.origin[1] + b as f64 * self.h,
        ]
    }

    /// Physical coordinates of the geometric centre of the grid.
    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + 0.5 * (self.dims[0] - 1) as f64 * self.h,
            self.origin[1] + 0.5 * (self.dims[1] - 1) as f64 * self.h,
        ]
    }

    pub(crate) fn check_same(&self, other: &GridDomain) -> Result<()> {
        if self.n != other.n || self.dims != other.dims || self.h != other.h {
            return Err(Error::GridMismatch(format!(
                "{:?} (h = {}) vs {:?} (h = {})",
                self.shape(),
                self.h,
                other.shape(),
                other.h
            )));
        }
        Ok(())
    }
}

/// Density `w` of an admissible weight measure `ν = w·Lebesgue`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMeasure {
    w: Vec<f64>,
    w_lo: f64,
    w_hi: f64,
}

impl WeightMeasure {
    pub fn new(grid: &GridDomain, w: Vec<f64>) -> Result<Self> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} weights for {} cells",
                w.len(),
                grid.len()
            )));
        }
        if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and positive".into()));
        }
        let w_lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let w_hi = w.iter().copied().fold(0.0, f64::max);
        Ok(Self { w, w_lo, w_hi })
    }

    pub fn constant(grid: &GridDomain, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    /// Lebesgue measure.
    pub fn lebesgue(grid: &GridDomain) -> Self {
        Self::constant(grid, 1.0).unwrap()
    }

    /// Affinely maps values in `[0, 1]` to densities in `[lo, hi]`.
    pub fn from_unit_values(f: &DiscreteFunction, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "weight range [{lo}, {hi}] must satisfy 0 < lo <= hi"
            )));
        }
        let w = f
            .values()
            .iter()
            .map(|v| lo + (hi - lo) * v.clamp(0.0, 1.0))
            .collect();
        Self::new(f.grid(), w)
    }

    pub fn density(&self) -> &[f64] {
        &self.w
    }

    pub fn w_lo(&self) -> f64 {
        self.w_lo
    }

    pub fn w_hi(&self) -> f64 {
        self.w_hi
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.w_lo == self.w_hi
    }

    /// `ν` of a single cell.
    pub fn cell_mass(&self, grid: &GridDomain, idx: usize) -> f64 {
        self.w[idx] * grid.cell_volume()
    }

    /// `ν(E)` of the grid part of `set`.
    pub fn measure(&self, set: &DiscreteSet) -> f64 {
        let vol = set.grid().cell_volume();
        set.indices().map(|i| self.w[i]).sum::<f64>() * vol
    }

    /// `ν` of the whole grid.
    pub fn total(&self, grid: &GridDomain) -> f64 {
        self.w.iter().sum::<f64>() * grid.cell_volume()
    }
}

/// Indicator of a set of cells. A cofinite set also contains everything
/// outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSet {
    grid: GridDomain,
    bits: Vec<bool>,
    count: usize,
    cofinite: bool,
}

impl DiscreteSet {
    pub fn empty(grid: &GridDomain) -> Self {
        Self {
            grid: *grid,
            bits: vec![false; grid.len()],
            count: 0,
            cofinite: false,
        }
    }

    /// All grid cells (and nothing outside).
    pub fn full(grid: &GridDomain) -> Self {
        Self {
            grid: *grid,
            bits: vec![true; grid.len()],
            count: grid.len(),
            cofinite: false,
        }
    }

    pub fn from_bits(grid: &GridDomain, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} bits for {} cells",
                bits.len(),
                grid.len()
            )));
        }
        let count = bits.iter().filter(|b| **b).count();
        Ok(Self {
            grid: *grid,
            bits,
            count,
            cofinite: false,
        })
    }

    pub fn from_indices(grid: &GridDomain, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(grid);
        for i in indices {
            set.insert(i);
        }
        set
    }

    /// Set whose membership is bit `k` of `mask` for cell `k`.
    pub fn from_mask(grid: &GridDomain, mask: u64) -> Self {
        Self::from_indices(grid, (0..grid.len()).filter(|k| mask >> k & 1 == 1))
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn insert(&mut self, idx: usize) {
        if !self.bits[idx] {
            self.bits[idx] = true;
            self.count += 1;
        }
    }

    pub fn remove(&mut self, idx: usize) {
        if self.bits[idx] {
            self.bits[idx] = false;
            self.count -= 1;
        }
    }

    pub fn set(&mut self, idx: usize, member: bool) {
        if member {
            self.insert(idx)
        } else {
            self.remove(idx)
        }
    }

    /// Number of member cells on the grid.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0 && !self.cofinite
    }

    pub fn is_cofinite(&self) -> bool {
        self.cofinite
    }

    /// Same grid cells, with the exterior included or not.
    pub fn with_cofinite(mut self, cofinite: bool) -> Self {
        self.cofinite = cofinite;
        self
    }

    /// Lebesgue measure of the grid part.
    pub fn volume(&self) -> f64 {
        self.count as f64 * self.grid.cell_volume()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        let bits: Vec<bool> = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| f(*a, *b))
            .collect();
        let count = bits.iter().filter(|b| **b).count();
        Self {
            grid: self.grid,
            bits,
            count,
            cofinite: f(self.cofinite, other.cofinite),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a != b)
    }

    /// Complement in the whole space: grid bits and the exterior both flip.
    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            bits: self.bits.iter().map(|b| !b).collect(),
            count: self.grid.len() - self.count,
            cofinite: !self.cofinite,
        }
    }

    /// Complement relative to the grid (exterior unchanged).
    pub fn grid_complement(&self) -> Self {
        Self {
            cofinite: self.cofinite,
            ..self.complement()
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        (!self.cofinite || other.cofinite)
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Translates the grid part by `delta` cells, dropping cells that leave the grid.
    pub fn translated(&self, delta: [i64; 2]) -> Self {
        let mut out = Self::empty(&self.grid);
        out.cofinite = self.cofinite;
        for i in self.indices() {
            if let Some(j) = self.grid.shifted(i, delta) {
                out.insert(j);
            }
        }
        out
    }
}

/// Real values per cell; zero outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteFunction {
    grid: GridDomain,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(grid: &GridDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("function values must be finite".into()));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
    }

    pub fn constant(grid: &GridDomain, value: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn indicator(set: &DiscreteSet) -> Self {
        Self {
            grid: set.grid,
            values: set.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn grid(&self) -> &GridDomain {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `∫|u| dν`.
    pub fn l1_norm(&self, nu: &WeightMeasure) -> f64 {
        self.values
            .iter()
            .zip(nu.density())
            .map(|(v, w)| v.abs() * w)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Strict superlevel set `{u > t}`; contains the exterior when `t < 0`
    /// on a vacuum grid.
    pub fn superlevel(&self, t: f64) -> DiscreteSet {
        let mut set = DiscreteSet::empty(&self.grid);
        for (i, v) in self.values.iter().enumerate() {
            if *v > t {
                set.insert(i);
            }
        }
        set.cofinite = t < 0.0 && self.grid.exterior == Exterior::Vacuum;
        set
    }

    /// Sorted distinct values.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Cells whose centres lie within distance `r` (inclusive) of `center`.
pub fn make_ball_set(grid: &GridDomain, center: &[f64], r: f64) -> DiscreteSet {
    let mut c = [0.0; 2];
    for (a, b) in c.iter_mut().zip(center) {
        *a = *b;
    }
    let r2 = r * r;
    DiscreteSet::from_indices(
        grid,
        (0..grid.len()).filter(|&i| {
            let x = grid.coords(i);
            let d2: f64 = (0..grid.n()).map(|k| (x[k] - c[k]).powi(2)).sum();
            d2 <= r2 * (1.0 + 1e-12)
        }),
    )
}

/// Uniform `m`-level quantization of a function.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantization {
    pub min: f64,
    pub max: f64,
    /// Level spacing `(max - min)/(m - 1)`; zero for constant input.
    pub delta: f64,
    /// Midpoints `t_k = min + (k - 1/2)·δ` between consecutive levels,
    /// `k = 1..m-1`; empty for constant input.
    pub thresholds: Vec<f64>,
    /// Level index per cell, `#{k : f > t_k}`.
    pub bins: Vec<usize>,
    /// `min + bin·δ` per cell.
    pub quantized: DiscreteFunction,
}

impl Quantization {
    /// The level values `min, min + δ, …, max`.
    pub fn levels(&self) -> Vec<f64> {
        (0..=self.thresholds.len()).map(|k| self.level(k)).collect()
    }

    fn level(&self, k: usize) -> f64 {
        if k == self.thresholds.len() {
            self.max
        } else {
            self.min + k as f64 * self.delta
        }
    }

    /// Nested decreasing superlevel sets `{f > t_k}`.
    pub fn superlevel_sets(&self) -> Vec<DiscreteSet> {
        (1..=self.thresholds.len())
            .map(|k| {
                DiscreteSet::from_indices(
                    self.quantized.grid(),
                    self.bins.iter().enumerate().filter(|(_, b)| **b >= k).map(|(i, _)| i),
                )
            })
            .collect()
    }

    /// Layer-cake reconstruction `min + δ·#{k : f > t_k}`.
    pub fn reconstruct(&self) -> DiscreteFunction {
        DiscreteFunction {
            grid: *self.quantized.grid(),
            values: self.bins.iter().map(|b| self.level(*b)).collect(),
        }
    }
}

/// Rounds `f` to the nearest of `m ≥ 2` equispaced levels spanning
/// `[min f, max f]`; ties go to the lower level.
pub fn quantize(f: &DiscreteFunction, m: usize) -> Result<Quantization> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 levels, got {m}")));
    }
    let (min, max) = (f.min(), f.max());
    if min == max {
        return Ok(Quantization {
            min,
            max,
            delta: 0.0,
            thresholds: Vec::new(),
            bins: vec![0; f.values.len()],
            quantized: f.clone(),
        });
    }
    let delta = (max - min) / (m - 1) as f64;
    let thresholds: Vec<f64> = (1..m).map(|k| min + (k as f64 - 0.5) * delta).collect();
    let bins: Vec<usize> = f
        .values
        .iter()
        .map(|v| thresholds.partition_point(|t| v > t))
        .collect();
    let mut q = Quantization {
        min,
        max,
        delta,
        thresholds,
        bins,
        quantized: f.clone(),
    };
    q.quantized = q.reconstruct();
    Ok(q)
}

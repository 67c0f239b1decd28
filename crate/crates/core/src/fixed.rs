//! Fixed-point representation of energies for exact min-cut optimality.

use crate::energy::Stencil;
use crate::error::{Error, Result};
use crate::grid::{GridDomain, WeightMeasure};

/// Default number of fixed-point units per unit of energy.
pub const DEFAULT_SCALE: f64 = 4_294_967_296.0;

/// Totals above this bound are rejected so that products stay inside `i128`.
pub(crate) const CAPACITY_LIMIT: i128 = 1 << 120;

pub(crate) fn to_fixed(x: f64, scale: f64) -> Result<i128> {
    let v = (x * scale).round();
    if !v.is_finite() || v.abs() >= 2f64.powi(100) {
        return Err(Error::CapacityOverflow(format!("{x} at scale {scale}")));
    }
    Ok(v as i128)
}

/// A positive rational fidelity parameter `Λ = num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LambdaQ {
    pub num: i128,
    pub den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

impl LambdaQ {
    pub fn new(num: i128, den: i128) -> Result<Self> {
        if num < 0 || den <= 0 {
            return Err(Error::InvalidParameter(format!("bad rational {num}/{den}")));
        }
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// Dyadic rational within about `2^-40` relative error of `lambda`.
    pub fn from_f64(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be finite and >= 0")));
        }
        if lambda == 0.0 {
            return Ok(Self { num: 0, den: 1 });
        }
        let e = 40 - lambda.log2().ceil() as i32;
        let (num, den) = if e >= 0 {
            ((lambda * 2f64.powi(e)).round() as i128, 1i128 << e.min(100))
        } else {
            let shift = (-e).min(100) as u32;
            (((lambda / 2f64.powi(shift as i32)).round() as i128) << shift, 1)
        };
        Self::new(num, den)
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Compares `self` with `other` exactly.
    pub fn cmp_exact(&self, other: &Self) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Stencil and cell masses in fixed-point units.
#[derive(Clone, Debug)]
pub struct QuantizedStencil {
    pub(crate) pairs: Vec<(u32, u32, i128)>,
    pub(crate) boundary: Vec<i128>,
    pub(crate) mass: Vec<i128>,
    pub(crate) scale: f64,
    pub(crate) exterior: bool,
}

impl QuantizedStencil {
    pub fn new(st: &Stencil, nu: &WeightMeasure, scale: f64) -> Result<Self> {
        let grid: &GridDomain = st.grid();
        crate::energy::check_measure(nu, grid)?;
        let mut boundary = vec![0i128; grid.len()];
        let pairs = st
            .pairs()
            .iter()
            .map(|&(i, j, w)| Ok((i, j, to_fixed(w, scale)?)))
            .collect::<Result<Vec<_>>>()?;
        if st.has_exterior() {
            for (i, b) in boundary.iter_mut().enumerate() {
                *b = to_fixed(st.boundary_mass(i), scale)?;
            }
        }
        let mass = (0..grid.len())
            .map(|i| to_fixed(nu.cell_mass(grid, i), scale))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pairs,
            boundary,
            mass,
            scale,
            exterior: st.has_exterior(),
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Quantized perimeter of a set with the given exterior membership.
    pub fn perimeter(&self, bits: &[bool], exterior_in: bool) -> i128 {
        let inner: i128 = self
            .pairs
            .iter()
            .filter(|&&(i, j, _)| bits[i as usize] != bits[j as usize])
            .map(|p| p.2)
            .sum();
        let outer: i128 = if self.exterior {
            bits.iter()
                .zip(&self.boundary)
                .filter(|(b, _)| **b != exterior_in)
                .map(|(_, w)| *w)
                .sum()
        } else {
            0
        };
        inner + outer
    }

    /// Quantized `ν` of the cells set in `bits`.
    pub fn measure(&self, bits: &[bool]) -> i128 {
        bits.iter().zip(&self.mass).filter(|(b, _)| **b).map(|(_, m)| *m).sum()
    }

    /// `den·P(U) + num·ν(E △ U)`, the geometric energy scaled by `den`.
    pub fn geometric_energy(&self, u: &[bool], e: &[bool], exterior_in: bool, lambda: LambdaQ) -> i128 {
        let diff: Vec<bool> = u.iter().zip(e).map(|(a, b)| a != b).collect();
        lambda.den * self.perimeter(u, exterior_in) + lambda.num * self.measure(&diff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_encoding_is_close_and_reduced() {
        for x in [0.8, 1e-6, 3.75, 12345.678, 1e9] {
            let q = LambdaQ::from_f64(x).unwrap();
            assert!((q.value() - x).abs() <= 1e-11 * x, "{x} -> {q:?}");
        }
        let q = LambdaQ::from_f64(0.5).unwrap();
        assert_eq!((q.num, q.den), (1, 2));
        assert!(LambdaQ::from_f64(-1.0).is_err());
    }

    #[test]
    fn exact_comparison() {
        let a = LambdaQ::new(1, 3).unwrap();
        let b = LambdaQ::new(2, 6).unwrap();
        assert_eq!(a, b);
        assert!(a.cmp_exact(&LambdaQ::new(34, 100).unwrap()).is_lt());
    }
}

//! Radial interaction kernels `K(x) = υ(|x|)/|x|^n` and their scalar moduli.
//!
//! A [`Kernel`] is built from a validated [`KernelSpec`]. Besides pointwise
//! evaluation it provides the annulus mass `φ_K(ε, R)`, the mollified modulus
//! `ℓ_K(ε, R)`, the assumption report ([`KernelReport`]), the isoperimetric
//! function `β_K` ([`beta_k`]) and grid tabulation ([`KernelTable`]).

mod beta;
mod report;
mod table;

pub use beta::{beta_k, lattice_perimeter, prefix_ball, BetaEstimate};
pub use report::{check_assumptions, Assessment, KernelReport};
pub use table::{tabulate_offsets, KernelTable, TableOffset, DEFAULT_WINDOW};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

/// The radial profile family of a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `υ(ρ) = ρ^{-s}`, `s ∈ (0, 1)`.
    Fractional { s: f64 },
    /// `υ(ρ) = ρ^{-s0}` for `ρ ≤ 1` and `ρ^{-s1}` beyond, `0 ≤ s0 ≤ s1 ≤ 1`.
    TwoExponent { s0: f64, s1: f64 },
    /// `υ(ρ) = (1 - ln ρ)^{-α}` for `ρ ≤ 1`, zero beyond.
    Logarithmic { alpha: f64 },
    /// `υ(ρ) = ρ^{-s} (1 - ln ρ)^{-α}` for `ρ ≤ 1`, zero beyond, `s ∈ [0, 1)`.
    FracLog { s: f64, alpha: f64 },
    /// Fractional profile cut to zero beyond `cutoff_radius`.
    TruncatedFractional { s: f64, cutoff_radius: f64 },
    /// `K = 1` on the closed ball of the given radius, zero outside.
    ConstantBall { radius: f64 },
    /// Sampled values of `K(ρ)` at increasing radii, interpolated as a power
    /// law between samples and zero beyond the last radius.
    Custom { radii: Vec<f64>, values: Vec<f64> },
}

/// Serializable kernel description, e.g. `{"family":"fractional","s":0.5,"n":2,"window":7}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub family: KernelFamily,
    /// Space dimension (1 or 2).
    pub n: usize,
    /// Truncation window in cells used when the kernel is tabulated on a grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, n: usize) -> Self {
        Self {
            family,
            n,
            window: None,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }
}

/// Surface measure of the unit sphere in dimension `n`.
pub(crate) fn sphere_measure(n: usize) -> f64 {
    if n == 1 {
        2.0
    } else {
        2.0 * PI
    }
}

/// Volume of the unit ball in dimension `n`.
pub(crate) fn ball_volume(n: usize) -> f64 {
    if n == 1 {
        2.0
    } else {
        PI
    }
}

/// Radius of the ball of volume `v`.
pub(crate) fn ball_radius(n: usize, v: f64) -> f64 {
    (v / ball_volume(n)).powf(1.0 / n as f64)
}

/// `∫_a^b ρ^{-t-1} dρ`, with `a = 0` or `b = ∞` allowed.
fn power_integral(a: f64, b: f64, t: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if t == 0.0 {
        if a == 0.0 || b.is_infinite() {
            f64::INFINITY
        } else {
            (b / a).ln()
        }
    } else if t > 0.0 {
        if a == 0.0 {
            f64::INFINITY
        } else {
            let hi = if b.is_infinite() { 0.0 } else { b.powf(-t) };
            (a.powf(-t) - hi) / t
        }
    } else if b.is_infinite() {
        f64::INFINITY
    } else {
        (b.powf(-t) - a.powf(-t)) / (-t)
    }
}

/// An evaluable radial kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    spec: KernelSpec,
    cutoff: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn check_exponent(name: &str, s: f64, lo_open: bool, n: usize) -> Result<()> {
    if !s.is_finite() {
        return Err(invalid(format!("{name} must be finite")));
    }
    if s == 1.0 {
        return Err(Error::DegenerateKernel {
            q: n as f64 + 1.0,
            limit: n as f64 + 1.0,
        });
    }
    let below = if lo_open { s <= 0.0 } else { s < 0.0 };
    if below || s > 1.0 {
        let range = if lo_open { "(0, 1)" } else { "[0, 1)" };
        return Err(invalid(format!("{name} = {s} outside {range}")));
    }
    Ok(())
}

impl Kernel {
    /// Validates `spec` and builds the kernel.
    pub fn new(spec: KernelSpec) -> Result<Self> {
        let n = spec.n;
        if n != 1 && n != 2 {
            return Err(invalid(format!("dimension n = {n} not in {{1, 2}}")));
        }
        if spec.window == Some(0) {
            return Err(invalid("window must be at least one cell"));
        }
        match &spec.family {
            KernelFamily::Fractional { s } => check_exponent("s", *s, true, n)?,
            KernelFamily::TwoExponent { s0, s1 } => {
                if !(s0.is_finite() && s1.is_finite()) || *s0 < 0.0 || *s1 > 1.0 || s0 > s1 {
                    return Err(invalid(format!(
                        "two-exponent profile needs 0 <= s0 <= s1 <= 1, got s0 = {s0}, s1 = {s1}"
                    )));
                }
                if *s0 == 1.0 {
                    return Err(Error::DegenerateKernel {
                        q: n as f64 + 1.0,
                        limit: n as f64 + 1.0,
                    });
                }
            }
            KernelFamily::Logarithmic { alpha } => {
                if !alpha.is_finite() {
                    return Err(invalid("alpha must be finite"));
                }
            }
            KernelFamily::FracLog { s, alpha } => {
                check_exponent("s", *s, false, n)?;
                if !alpha.is_finite() {
                    return Err(invalid("alpha must be finite"));
                }
            }
            KernelFamily::TruncatedFractional { s, cutoff_radius } => {
                check_exponent("s", *s, true, n)?;
                if !(cutoff_radius.is_finite() && *cutoff_radius > 0.0) {
                    return Err(invalid("cutoff_radius must be positive"));
                }
            }
            KernelFamily::ConstantBall { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("radius must be positive"));
                }
            }
            KernelFamily::Custom { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return Err(invalid(
                        "custom profile needs at least two (radius, value) samples",
                    ));
                }
                if radii.iter().any(|r| !(r.is_finite() && *r > 0.0))
                    || radii.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(invalid("custom radii must be positive and strictly increasing"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                    || values.iter().all(|v| *v == 0.0)
                {
                    return Err(invalid("custom values must be finite, nonnegative, not all zero"));
                }
                let kernel = Kernel {
                    spec: spec.clone(),
                    cutoff: None,
                };
                let q = kernel.origin_exponent();
                if q >= n as f64 + 1.0 {
                    return Err(Error::DegenerateKernel {
                        q,
                        limit: n as f64 + 1.0,
                    });
                }
            }
        }
        Ok(Self { spec, cutoff: None })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn family(&self) -> &KernelFamily {
        &self.spec.family
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    /// Extra radial cutoff applied on top of the family profile, if any.
    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    /// The same kernel set to zero beyond `radius`.
    pub fn with_cutoff(&self, radius: f64) -> Kernel {
        let cutoff = match self.cutoff {
            Some(c) => c.min(radius),
            None => radius,
        };
        Kernel {
            spec: self.spec.clone(),
            cutoff: Some(cutoff),
        }
    }

    /// Family profile without the extra cutoff.
    fn base_profile(&self, rho: f64) -> f64 {
        let n = self.spec.n as f64;
        match &self.spec.family {
            KernelFamily::Fractional { s } => rho.powf(-n - s),
            KernelFamily::TwoExponent { s0, s1 } => {
                if rho <= 1.0 {
                    rho.powf(-n - s0)
                } else {
                    rho.powf(-n - s1)
                }
            }
            KernelFamily::Logarithmic { alpha } => {
                if rho <= 1.0 {
                    rho.powf(-n) * (1.0 - rho.ln()).powf(-alpha)
                } else {
                    0.0
                }
            }
            KernelFamily::FracLog { s, alpha } => {
                if rho <= 1.0 {
                    rho.powf(-n - s) * (1.0 - rho.ln()).powf(-alpha)
                } else {
                    0.0
                }
            }
            KernelFamily::TruncatedFractional { s, cutoff_radius } => {
                if rho <= *cutoff_radius {
                    rho.powf(-n - s)
                } else {
                    0.0
                }
            }
            KernelFamily::ConstantBall { radius } => {
                if rho <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Custom { radii, values } => custom_profile(radii, values, rho),
        }
    }

    /// `K` as a function of the radius `ρ > 0`.
    pub fn profile(&self, rho: f64) -> f64 {
        if let Some(c) = self.cutoff {
            // Relative slack so lattice radii computed as W*h stay inside.
            if rho > c * (1.0 + 1e-12) {
                return 0.0;
            }
        }
        self.base_profile(rho)
    }

    /// Evaluates `K(x)` at a nonzero offset given in physical units.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.n {
            return Err(invalid(format!(
                "offset has {} coordinates, kernel dimension is {}",
                x.len(),
                self.spec.n
            )));
        }
        let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if rho == 0.0 {
            return Err(Error::ZeroOffset);
        }
        Ok(self.profile(rho))
    }

    /// Radius beyond which the kernel vanishes (`+∞` if it never does).
    pub fn support_radius(&self) -> f64 {
        let base = match &self.spec.family {
            KernelFamily::Fractional { .. } | KernelFamily::TwoExponent { .. } => f64::INFINITY,
            KernelFamily::Logarithmic { .. } | KernelFamily::FracLog { .. } => 1.0,
            KernelFamily::TruncatedFractional { cutoff_radius, .. } => *cutoff_radius,
            KernelFamily::ConstantBall { radius } => *radius,
            KernelFamily::Custom { radii, .. } => *radii.last().unwrap(),
        };
        match self.cutoff {
            Some(c) => base.min(c),
            None => base,
        }
    }

    /// Exponent `a` with `K(ρ) ≈ ρ^{-a}` as `ρ → 0` (logarithmic factors ignored).
    pub(crate) fn origin_exponent(&self) -> f64 {
        let n = self.spec.n as f64;
        match &self.spec.family {
            KernelFamily::Fractional { s }
            | KernelFamily::FracLog { s, .. }
            | KernelFamily::TruncatedFractional { s, .. } => n + s,
            KernelFamily::TwoExponent { s0, .. } => n + s0,
            KernelFamily::Logarithmic { .. } => n,
            KernelFamily::ConstantBall { .. } => 0.0,
            KernelFamily::Custom { radii, values } => -custom_slopes(radii, values)[0].unwrap_or(0.0),
        }
    }

    /// Whether `K` is integrable near the origin.
    pub(crate) fn locally_integrable(&self) -> bool {
        let n = self.spec.n as f64;
        match &self.spec.family {
            KernelFamily::Logarithmic { alpha } => *alpha > 1.0,
            KernelFamily::FracLog { s, alpha } => *s == 0.0 && *alpha > 1.0,
            _ => self.origin_exponent() < n,
        }
    }

    /// Whether `K ∈ L¹(ℝⁿ ∖ B_r)` for every `r > 0`.
    pub fn is_far_integrable(&self) -> bool {
        if self.cutoff.is_some() {
            return true;
        }
        match &self.spec.family {
            KernelFamily::TwoExponent { s1, .. } => *s1 > 0.0,
            _ => true,
        }
    }

    /// Whether `K ∈ L¹(ℝⁿ)`.
    pub fn is_integrable(&self) -> bool {
        self.locally_integrable() && self.is_far_integrable()
    }

    /// `‖K‖_{L¹}`, or `+∞` for non-integrable kernels.
    pub fn total_mass(&self) -> f64 {
        if !self.is_integrable() {
            return f64::INFINITY;
        }
        self.radial_integral(0.0, f64::INFINITY)
    }

    /// `∫_{a < |x| < b} K`, with `a = 0` allowed for locally integrable kernels.
    pub(crate) fn radial_integral(&self, a: f64, b: f64) -> f64 {
        let b = b.min(self.support_radius());
        if a >= b {
            return 0.0;
        }
        let n = self.spec.n;
        let sigma = sphere_measure(n);
        match &self.spec.family {
            KernelFamily::Fractional { s } | KernelFamily::TruncatedFractional { s, .. } => {
                sigma * power_integral(a, b, *s)
            }
            KernelFamily::TwoExponent { s0, s1 } => {
                let mut total = 0.0;
                if a < 1.0 {
                    total += power_integral(a, b.min(1.0), *s0);
                }
                if b > 1.0 {
                    total += power_integral(a.max(1.0), b, *s1);
                }
                sigma * total
            }
            KernelFamily::Logarithmic { alpha } => sigma * log_profile_integral(0.0, *alpha, a, b),
            KernelFamily::FracLog { s, alpha } => sigma * log_profile_integral(*s, *alpha, a, b),
            KernelFamily::ConstantBall { .. } => ball_volume(n) * (b.powi(n as i32) - a.powi(n as i32)),
            KernelFamily::Custom { radii, values } => sigma * custom_integral(radii, values, n, a, b),
        }
    }

    /// Annulus mass `φ_K(ε, R) = ∫_{B_R ∖ B_ε} K`; `r` may be `+∞`.
    pub fn phi(&self, eps: f64, r: f64) -> Result<f64> {
        if !(eps > 0.0) || !(eps < r) {
            return Err(Error::BadRange { eps, r });
        }
        Ok(self.radial_integral(eps, r))
    }

    /// Mollified modulus `ℓ_K(ε, R) = ∫_{B_1} ρ(y)/φ_K(2ε|y|, R) dy` for the
    /// bump `ρ ∝ (1 - |y|²)⁴`, integrated with `samples` Gauss-Legendre panels.
    pub fn ell(&self, eps: f64, r: f64, samples: usize) -> Result<f64> {
        if !(eps > 0.0) || !(2.0 * eps < r) {
            return Err(Error::BadRange { eps, r });
        }
        let n = self.spec.n as i32;
        let bump = |t: f64| (1.0 - t * t).powi(4) * t.powi(n - 1);
        let norm = quad::gauss_legendre(bump, 0.0, 1.0, samples);
        let weighted = quad::gauss_legendre(
            |t| {
                let phi = self.radial_integral(2.0 * eps * t, r);
                if phi.is_infinite() {
                    0.0
                } else {
                    bump(t) / phi
                }
            },
            0.0,
            1.0,
            samples,
        );
        Ok(weighted / norm)
    }
}

/// `∫_a^b ρ^{-s-1} (1 - ln ρ)^{-α} dρ` over `(a, min(b, 1))`.
fn log_profile_integral(s: f64, alpha: f64, a: f64, b: f64) -> f64 {
    let b = b.min(1.0);
    if a >= b {
        return 0.0;
    }
    if alpha == 0.0 {
        return power_integral(a, b, s);
    }
    if s == 0.0 {
        // t = 1 - ln ρ turns the integrand into t^{-α} dt.
        let t_hi = if a == 0.0 { f64::INFINITY } else { 1.0 - a.ln() };
        let t_lo = 1.0 - b.ln();
        if alpha == 1.0 {
            return if t_hi.is_infinite() {
                f64::INFINITY
            } else {
                (t_hi / t_lo).ln()
            };
        }
        let e = 1.0 - alpha;
        let hi = if t_hi.is_infinite() {
            if e > 0.0 {
                return f64::INFINITY;
            }
            0.0
        } else {
            t_hi.powf(e)
        };
        return (hi - t_lo.powf(e)) / e;
    }
    if a == 0.0 {
        return f64::INFINITY;
    }
    // u = ln ρ: ∫ e^{-s u} (1 - u)^{-α} du.
    let f = |u: f64| (-s * u).exp() * (1.0 - u).powf(-alpha);
    quad::adaptive(&f, a.ln(), b.ln(), 1e-13)
}

/// Log-log slope of each custom segment; `None` where an endpoint is zero.
fn custom_slopes(radii: &[f64], values: &[f64]) -> Vec<Option<f64>> {
    radii
        .windows(2)
        .zip(values.windows(2))
        .map(|(r, v)| {
            if v[0] > 0.0 && v[1] > 0.0 {
                Some((v[1] / v[0]).ln() / (r[1] / r[0]).ln())
            } else {
                None
            }
        })
        .collect()
}

fn custom_profile(radii: &[f64], values: &[f64], rho: f64) -> f64 {
    let last = radii.len() - 1;
    if rho > radii[last] {
        return 0.0;
    }
    let seg = if rho <= radii[0] {
        0
    } else {
        radii.partition_point(|&r| r < rho).saturating_sub(1).min(last - 1)
    };
    let (r0, r1, v0, v1) = (radii[seg], radii[seg + 1], values[seg], values[seg + 1]);
    if v0 > 0.0 && v1 > 0.0 {
        let p = (v1 / v0).ln() / (r1 / r0).ln();
        v0 * (rho / r0).powf(p)
    } else if rho <= r0 {
        v0
    } else {
        v0 + (v1 - v0) * (rho - r0) / (r1 - r0)
    }
}

/// `∫_a^b K(ρ) ρ^{n-1} dρ` for the custom interpolant, segment by segment.
fn custom_integral(radii: &[f64], values: &[f64], n: usize, a: f64, b: f64) -> f64 {
    let slopes = custom_slopes(radii, values);
    let nf = n as f64;
    let mut total = 0.0;
    let last = radii.len() - 1;
    // Segment k covers [lo_k, hi_k]; the first one extends down to 0.
    for k in 0..last {
        let lo = if k == 0 { 0.0 } else { radii[k] };
        let hi = radii[k + 1];
        let (x0, x1) = (a.max(lo), b.min(hi));
        if x0 >= x1 {
            continue;
        }
        let (r0, v0, v1) = (radii[k], values[k], values[k + 1]);
        match slopes[k] {
            Some(p) => {
                // v0 (ρ/r0)^p ρ^{n-1}
                let e = p + nf;
                let c = v0 * r0.powf(-p);
                if e == 0.0 {
                    total += if x0 == 0.0 { f64::INFINITY } else { c * (x1 / x0).ln() };
                } else if e < 0.0 && x0 == 0.0 {
                    total += f64::INFINITY;
                } else {
                    total += c * (x1.powf(e) - x0.powf(e)) / e;
                }
            }
            None => {
                // Below the first sample the profile is flat at v0.
                let (c0, c1) = if k == 0 && x0 < r0 {
                    let flat_hi = x1.min(r0);
                    total += v0 * (flat_hi.powf(nf) - x0.powf(nf)) / nf;
                    if x1 <= r0 {
                        continue;
                    }
                    (r0, x1)
                } else {
                    (x0, x1)
                };
                let slope = (v1 - v0) / (radii[k + 1] - r0);
                let offset = v0 - slope * r0;
                total += offset * (c1.powf(nf) - c0.powf(nf)) / nf
                    + slope * (c1.powf(nf + 1.0) - c0.powf(nf + 1.0)) / (nf + 1.0);
            }
        }
    }
    total
}

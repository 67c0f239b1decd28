use serde::Serialize;
use std::fmt;

use super::{Kernel, KernelFamily};

/// How the flags of a [`KernelReport`] were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assessment {
    /// Closed-form classification of a built-in family.
    Proved,
    /// Sampled on probe radii (custom profiles).
    Estimated,
}

/// Structural assumptions satisfied by a kernel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelReport {
    pub is_symmetric: bool,
    pub is_radial: bool,
    /// Profile strictly decreasing near the origin.
    pub strictly_decreasing: bool,
    pub is_far_integrable: bool,
    pub is_nts: bool,
    pub is_non_integrable: bool,
    pub is_positive: bool,
    pub inf_positive: bool,
    /// Largest `q` with `K(y)|y|^q ≤ K(x)|x|^q` for `|x| ≤ |y|`; `None` if undetermined.
    pub dec_exponent: Option<f64>,
    /// `K(y)|y|^n < K(x)|x|^n` for `|x| < |y|`.
    pub dec_n_strict: bool,
    /// Supremum of admissible doubling radii (`+∞` for globally doubling kernels).
    pub doubling_radius: f64,
    pub doubling_constant: Option<f64>,
    pub doubling_exponent: Option<f64>,
    /// Decay exponent sampled on the probe radii, for cross-checking.
    pub sampled_dec_exponent: Option<f64>,
    pub assessment: Assessment,
    pub notes: Vec<String>,
}

/// Sampled decay exponent: the largest `q` keeping `K(ρ)ρ^q` nonincreasing
/// along the probe radii, or `None` if `K` increases somewhere.
fn sampled_decay(kernel: &Kernel, radii: &[f64]) -> Option<f64> {
    let mut q = f64::INFINITY;
    for w in radii.windows(2) {
        let (k0, k1) = (kernel.profile(w[0]), kernel.profile(w[1]));
        if k1 == 0.0 {
            continue;
        }
        if k0 == 0.0 {
            return None;
        }
        q = q.min((k0 / k1).ln() / (w[1] / w[0]).ln());
    }
    if q < -1e-12 {
        None
    } else {
        Some(q.max(0.0))
    }
}

/// Sampled doubling constant `max K(ρ)/K(2ρ)` over probes with `2ρ` in the support.
fn sampled_doubling(kernel: &Kernel, radii: &[f64]) -> Option<f64> {
    let mut c: f64 = 1.0;
    let mut any = false;
    for &r in radii {
        let (k0, k1) = (kernel.profile(r), kernel.profile(2.0 * r));
        if k1 > 0.0 {
            c = c.max(k0 / k1);
            any = true;
        } else if k0 > 0.0 {
            break;
        }
    }
    any.then_some(c)
}

/// Classifies `kernel` against the structural assumptions. Built-in families
/// are classified in closed form; custom profiles are sampled on `probe_radii`.
pub fn check_assumptions(kernel: &Kernel, probe_radii: &[f64]) -> KernelReport {
    let n = kernel.dim() as f64;
    let mut notes = Vec::new();
    let valid_probes = !probe_radii.is_empty()
        && probe_radii.iter().all(|r| r.is_finite() && *r > 0.0)
        && probe_radii.windows(2).all(|w| w[0] < w[1]);
    let probes: Vec<f64> = if valid_probes {
        probe_radii.to_vec()
    } else {
        notes.push("probe radii must be positive and increasing; default ladder used".into());
        (0..24).map(|i| 2f64.powf(-8.0 + 0.5 * i as f64)).collect()
    };
    let sampled = sampled_decay(kernel, &probes);
    let support = kernel.support_radius();
    let compact = support.is_finite();
    let far = kernel.is_far_integrable();
    let nint = !kernel.is_integrable();

    let (dec, dec_n_strict, doubling_constant, assessment) = match kernel.family() {
        KernelFamily::Fractional { s } | KernelFamily::TruncatedFractional { s, .. } => {
            (Some(n + s), true, Some(2f64.powf(n + s)), Assessment::Proved)
        }
        KernelFamily::TwoExponent { s0, s1 } => (
            Some(n + s0),
            *s1 > 0.0 || *s0 > 0.0,
            Some(2f64.powf(n + s1)),
            Assessment::Proved,
        ),
        KernelFamily::Logarithmic { alpha } => log_classification(n, 0.0, *alpha, &mut notes),
        KernelFamily::FracLog { s, alpha } => log_classification(n, *s, *alpha, &mut notes),
        KernelFamily::ConstantBall { .. } => (Some(0.0), false, Some(1.0), Assessment::Proved),
        KernelFamily::Custom { .. } => {
            notes.push("custom profile: exponents estimated on probe radii".into());
            let strict = sampled.is_some_and(|q| q > n);
            (sampled, strict, sampled_doubling(kernel, &probes), Assessment::Estimated)
        }
    };
    // A cutoff on top of the family makes the kernel compactly supported.
    let doubling_radius = if compact { support / 2.0 } else { f64::INFINITY };
    if compact {
        notes.push(format!(
            "doubling holds for every D < {doubling_radius}; positivity fails beyond radius {support}"
        ));
    }
    let strictly_decreasing = match kernel.family() {
        KernelFamily::ConstantBall { .. } => false,
        KernelFamily::Custom { radii, values } => {
            let p0 = super::custom_slopes(radii, values)[0];
            p0.is_some_and(|p| p < 0.0)
        }
        _ => true,
    };
    if let (Some(q), Some(sq)) = (dec, sampled) {
        if sq + 1e-9 < q {
            notes.push(format!("sampled decay exponent {sq:.6} below reported {q:.6}"));
        }
    }
    // Nts: (1 ∧ |x|) K integrable; the local part needs decay below n + 1.
    let local_nts = kernel.origin_exponent() < n + 1.0;
    KernelReport {
        is_symmetric: true,
        is_radial: true,
        strictly_decreasing,
        is_far_integrable: far,
        is_nts: far && local_nts,
        is_non_integrable: nint,
        is_positive: !compact,
        inf_positive: kernel.profile(support.min(1.0) * 1e-6) > 0.0,
        dec_exponent: dec,
        dec_n_strict,
        doubling_radius,
        doubling_exponent: doubling_constant.map(f64::log2),
        doubling_constant,
        sampled_dec_exponent: sampled,
        assessment,
        notes,
    }
}

fn log_classification(
    n: f64,
    s: f64,
    alpha: f64,
    notes: &mut Vec<String>,
) -> (Option<f64>, bool, Option<f64>, Assessment) {
    let dec = if alpha <= 0.0 {
        Some(n + s)
    } else {
        notes.push(format!(
            "decay exponent undetermined: Dec_q holds for every q < {} but not at the endpoint",
            n + s
        ));
        None
    };
    // K(x)|x|^n = ρ^{-s}(1 - ln ρ)^{-α} on the unit ball.
    let strict = s > 0.0 || alpha < 0.0;
    let c = 2f64.powf(n + s) * (1.0 + std::f64::consts::LN_2).powf((-alpha).max(0.0));
    (dec, strict, Some(c), Assessment::Proved)
}

impl fmt::Display for KernelReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("undetermined".to_string(), |x| format!("{x:.6}"));
        writeln!(f, "assessment          {:?}", self.assessment)?;
        writeln!(f, "symmetric           {}", self.is_symmetric)?;
        writeln!(f, "radial              {}", self.is_radial)?;
        writeln!(f, "strictly decreasing {}", self.strictly_decreasing)?;
        writeln!(f, "far integrable      {}", self.is_far_integrable)?;
        writeln!(f, "not too singular    {}", self.is_nts)?;
        writeln!(f, "non integrable      {}", self.is_non_integrable)?;
        writeln!(f, "positive            {}", self.is_positive)?;
        writeln!(f, "inf positive        {}", self.inf_positive)?;
        writeln!(f, "decay exponent q    {}", opt(self.dec_exponent))?;
        writeln!(f, "strict Dec_n        {}", self.dec_n_strict)?;
        writeln!(f, "doubling radius D   {}", self.doubling_radius)?;
        writeln!(f, "doubling constant C {}", opt(self.doubling_constant))?;
        writeln!(f, "doubling exponent p {}", opt(self.doubling_exponent))?;
        write!(f, "sampled q           {}", opt(self.sampled_dec_exponent))?;
        for note in &self.notes {
            write!(f, "\nnote: {note}")?;
        }
        Ok(())
    }
}

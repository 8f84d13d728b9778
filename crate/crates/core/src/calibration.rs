//! Two-waveguide calibration formulas: directional-coupler power transfer,
//! detuning from the maximum transferred power, exponential
//! coupling-versus-separation fits, and the effective trapping rate of a
//! semi-infinite sink chain.

use serde::Serialize;

use crate::{Error, Result};

/// Power in guide 2 after distance `z` when only guide 1 is excited:
/// (C²/Ω²)·sin²(Ωz), Ω = √(C² + (Δβ/2)²).
pub fn pair_transfer(c: f64, delta_beta: f64, z: f64) -> f64 {
    let omega = c.hypot(0.5 * delta_beta);
    if omega == 0.0 {
        return 0.0;
    }
    let s = (omega * z).sin();
    (c / omega).powi(2) * s * s
}

/// Maximum transferred power C²/(C² + Δβ²/4) for a detuning ratio Δβ/C.
pub fn max_transfer(detuning_ratio: f64) -> f64 {
    1.0 / (1.0 + 0.25 * detuning_ratio * detuning_ratio)
}

/// Inverts [`max_transfer`]: Δβ/C = 2·√(1/p_max − 1).
pub fn detuning_from_max_transfer(p_max: f64) -> Result<f64> {
    if !(p_max > 0.0 && p_max <= 1.0) {
        return Err(Error::domain("maximum transfer", format!("{p_max} is outside (0, 1]")));
    }
    Ok(2.0 * (1.0 / p_max - 1.0).sqrt())
}

/// C(s) = A·exp(−s/d), fitted to measured (separation µm, coupling cm⁻¹) pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingCurve {
    pub samples: Vec<(f64, f64)>,
    /// A (cm⁻¹).
    pub amplitude: f64,
    /// d (µm).
    pub decay_length: f64,
    /// ln C_i − ln C(s_i) for each sample.
    pub residuals: Vec<f64>,
}

impl CouplingCurve {
    pub fn coupling_at(&self, separation: f64) -> f64 {
        self.amplitude * (-separation / self.decay_length).exp()
    }

    pub fn separation_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(s, _)| (lo.min(s), hi.max(s)))
    }
}

/// Least-squares fit of ln C against s.
pub fn fit_coupling_curve(samples: &[(f64, f64)]) -> Result<CouplingCurve> {
    for (k, &(s, c)) in samples.iter().enumerate() {
        if !(s > 0.0 && s.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(Error::Fit(format!("sample {k} ({s}, {c}) must have positive separation and coupling")));
        }
    }
    let n = samples.len() as f64;
    let mean_s = samples.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|p| (p.0 - mean_s).powi(2)).sum();
    if samples.len() < 2 || sxx <= f64::EPSILON * mean_s * mean_s {
        return Err(Error::Fit("need at least two distinct separations".into()));
    }
    let sxy: f64 = samples.iter().map(|p| (p.0 - mean_s) * (p.1.ln() - mean_y)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Err(Error::Fit("coupling does not decay with separation".into()));
    }
    let intercept = mean_y - slope * mean_s;
    let residuals = samples.iter().map(|p| p.1.ln() - (intercept + slope * p.0)).collect();
    Ok(CouplingCurve { samples: samples.to_vec(), amplitude: intercept.exp(), decay_length: -1.0 / slope, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationEstimate {
    /// Separation in µm.
    pub separation: f64,
    /// True when the separation lies outside the sampled range.
    pub extrapolated: bool,
}

/// Separation giving coupling `c_target`: s = −d·ln(c_target/A).
pub fn separation_for_coupling(curve: &CouplingCurve, c_target: f64) -> Result<SeparationEstimate> {
    if !(c_target > 0.0 && c_target.is_finite()) {
        return Err(Error::domain("target coupling", format!("{c_target} cm⁻¹ is not positive")));
    }
    let separation = -curve.decay_length * (c_target / curve.amplitude).ln();
    let (lo, hi) = curve.separation_range();
    Ok(SeparationEstimate { separation, extrapolated: separation < lo || separation > hi })
}

/// x = C_trap / C_sink, restricted to (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TrapRatio(f64);

impl TrapRatio {
    pub fn new(x: f64) -> Result<Self> {
        if x > 0.0 && x < 1.0 {
            Ok(TrapRatio(x))
        } else {
            Err(Error::domain("trap ratio", format!("x = {x} must lie in (0, 1); the rate diverges at x ≥ 1")))
        }
    }

    pub fn from_couplings(c_trap: f64, c_sink: f64) -> Result<Self> {
        Self::new(c_trap / c_sink)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// κ = C_sink · 2x²/√(1 − x²) (cm⁻¹). Reduces to 2·C_trap²/C_sink for x ≪ 1.
pub fn effective_trap_rate(x: TrapRatio, c_sink: f64) -> f64 {
    let x2 = x.0 * x.0;
    c_sink * 2.0 * x2 / (1.0 - x2).sqrt()
}

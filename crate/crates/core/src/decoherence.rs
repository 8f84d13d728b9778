//! Illumination spectra, first-order coherence g⁽¹⁾(τ), decoherence strength
//! γ, and decoherence by spectral ensemble averaging.
//!
//! Continuous spectra (tophat, gaussian) are uniform/gaussian in angular
//! frequency about ω₀ = 2πc/λ₀, with the frequency width set from the
//! wavelength width at λ₀: Δω = 2πcΔλ/λ₀². With the inverse-λ detuning law,
//! z·Δβ(λ) = ω·τ for τ = zΔβ₀λ₀/(2πc), so averaging coherent runs over the
//! spectrum reproduces ρ_ab(0)·g⁽¹⁾(τ) exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::lattice::{build_hamiltonian, NetworkSpec};
use crate::propagate::{AmplitudeState, DensityState, UnitaryPropagator};
use crate::quadrature::{gauss_legendre, integrate_adaptive};
use crate::{Error, Result, C64};

/// Speed of light (cm/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e10;

const NM_TO_CM: f64 = 1e-7;

/// Gaussian nodes span ±5σ in angular frequency.
const GAUSSIAN_HALF_SPAN_SIGMAS: f64 = 5.0;

pub const DEFAULT_NODES: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub wavelength_nm: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Spectrum {
    /// Flat over a band of width `fwhm_nm` (at λ₀) centred on `center_nm`.
    Tophat {
        center_nm: f64,
        fwhm_nm: f64,
    },
    Gaussian {
        center_nm: f64,
        fwhm_nm: f64,
    },
    /// Monochromatic.
    Delta {
        center_nm: f64,
    },
    /// Explicit lines; weights are normalized to sum to one.
    Discrete {
        lines: Vec<SpectralLine>,
    },
}

fn check_center(center_nm: f64) -> Result<()> {
    if center_nm > 0.0 && center_nm.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("spectrum.center_nm", "must be positive"))
    }
}

fn check_width(fwhm_nm: f64, center_nm: f64) -> Result<()> {
    // The frequency band must stay at positive frequency.
    if fwhm_nm >= 0.0 && fwhm_nm < 2.0 * center_nm {
        Ok(())
    } else {
        Err(Error::validation("spectrum.fwhm_nm", "must be non-negative and below twice the centre wavelength"))
    }
}

impl Spectrum {
    pub fn tophat(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        check_center(center_nm)?;
        check_width(fwhm_nm, center_nm)?;
        Ok(Spectrum::Tophat { center_nm, fwhm_nm })
    }

    pub fn gaussian(center_nm: f64, fwhm_nm: f64) -> Result<Self> {
        check_center(center_nm)?;
        // Keep ±5σ clear of zero frequency.
        if !(fwhm_nm >= 0.0 && fwhm_nm < 0.4 * center_nm) {
            return Err(Error::validation("spectrum.fwhm_nm", "gaussian width must be non-negative and below 0.4 λ₀"));
        }
        Ok(Spectrum::Gaussian { center_nm, fwhm_nm })
    }

    pub fn delta(center_nm: f64) -> Result<Self> {
        check_center(center_nm)?;
        Ok(Spectrum::Delta { center_nm })
    }

    pub fn discrete(lines: &[(f64, f64)]) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::validation("spectrum.lines", "need at least one line"));
        }
        for (k, &(lambda, w)) in lines.iter().enumerate() {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::validation(format!("spectrum.lines[{k}].wavelength_nm"), "must be positive"));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::validation(format!("spectrum.lines[{k}].weight"), "must be non-negative"));
            }
        }
        let total: f64 = lines.iter().map(|l| l.1).sum();
        if total <= 0.0 {
            return Err(Error::validation("spectrum.lines", "weights sum to zero"));
        }
        let lines = lines.iter().map(|&(wavelength_nm, w)| SpectralLine { wavelength_nm, weight: w / total }).collect();
        Ok(Spectrum::Discrete { lines })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Spectrum::Tophat { center_nm, fwhm_nm } => Spectrum::tophat(*center_nm, *fwhm_nm).map(|_| ()),
            Spectrum::Gaussian { center_nm, fwhm_nm } => Spectrum::gaussian(*center_nm, *fwhm_nm).map(|_| ()),
            Spectrum::Delta { center_nm } => check_center(*center_nm),
            Spectrum::Discrete { lines } => {
                let pairs: Vec<_> = lines.iter().map(|l| (l.wavelength_nm, l.weight)).collect();
                Spectrum::discrete(&pairs)?;
                let total: f64 = lines.iter().map(|l| l.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::validation("spectrum.lines", "weights must sum to one"));
                }
                Ok(())
            }
        }
    }

    /// Centre wavelength; weighted mean for discrete spectra.
    pub fn center_nm(&self) -> f64 {
        match self {
            Spectrum::Tophat { center_nm, .. }
            | Spectrum::Gaussian { center_nm, .. }
            | Spectrum::Delta { center_nm } => *center_nm,
            Spectrum::Discrete { lines } => lines.iter().map(|l| l.wavelength_nm * l.weight).sum(),
        }
    }

    pub fn fwhm_nm(&self) -> f64 {
        match self {
            Spectrum::Tophat { fwhm_nm, .. } | Spectrum::Gaussian { fwhm_nm, .. } => *fwhm_nm,
            Spectrum::Delta { .. } | Spectrum::Discrete { .. } => 0.0,
        }
    }

    fn is_monochromatic(&self) -> bool {
        match self {
            Spectrum::Delta { .. } => true,
            Spectrum::Tophat { fwhm_nm, .. } | Spectrum::Gaussian { fwhm_nm, .. } => *fwhm_nm == 0.0,
            Spectrum::Discrete { lines } => lines.len() == 1,
        }
    }

    /// Angular-frequency width Δω = 2πcΔλ/λ₀² (rad/s).
    pub fn angular_width(&self) -> f64 {
        let center = self.center_nm() * NM_TO_CM;
        2.0 * PI * SPEED_OF_LIGHT * self.fwhm_nm() * NM_TO_CM / (center * center)
    }

    /// Quadrature nodes (wavelength nm, weight) with weights summing to one.
    /// Continuous spectra use an `n`-point Gauss–Legendre rule in angular
    /// frequency; odd `n` places a node exactly at the centre wavelength.
    pub fn nodes(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        if n == 0 {
            return Err(Error::validation("nodes", "need at least one quadrature node"));
        }
        if let Spectrum::Discrete { lines } = self {
            return Ok(lines.iter().map(|l| (l.wavelength_nm, l.weight)).collect());
        }
        let center = self.center_nm();
        if self.is_monochromatic() {
            return Ok(vec![(center, 1.0)]);
        }
        let (x, w) = gauss_legendre(n);
        // ω/ω₀ = 1 + δ with δ the relative frequency offset; λ = λ₀/(1 + δ).
        let rel_width = self.fwhm_nm() / center;
        let at = |delta: f64| if delta == 0.0 { center } else { center / (1.0 + delta) };
        let nodes = match self {
            Spectrum::Tophat { .. } => {
                x.iter().zip(&w).map(|(&xi, &wi)| (at(0.5 * xi * rel_width), 0.5 * wi)).collect()
            }
            Spectrum::Gaussian { .. } => {
                let sigma_rel = rel_width / (2.0 * (2.0 * 2f64.ln()).sqrt());
                let raw: Vec<(f64, f64)> = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| {
                        let u = GAUSSIAN_HALF_SPAN_SIGMAS * xi;
                        (at(u * sigma_rel), wi * (-0.5 * u * u).exp())
                    })
                    .collect();
                let total: f64 = raw.iter().map(|p| p.1).sum();
                raw.into_iter().map(|(l, wt)| (l, wt / total)).collect()
            }
            Spectrum::Delta { .. } | Spectrum::Discrete { .. } => unreachable!(),
        };
        Ok(nodes)
    }
}

fn angular_frequency(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * NM_TO_CM)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Normalized first-order coherence g⁽¹⁾(τ) = ∫S(ω)e^{−iωτ}dω, carrier
/// included, for a delay `tau` in seconds.
pub fn g1(spectrum: &Spectrum, tau: f64) -> C64 {
    let carrier = |omega: f64| C64::new(0.0, -omega * tau).exp();
    match spectrum {
        Spectrum::Tophat { center_nm, .. } => {
            carrier(angular_frequency(*center_nm)) * sinc(0.5 * spectrum.angular_width() * tau)
        }
        Spectrum::Gaussian { center_nm, .. } => {
            let sigma = spectrum.angular_width() / (2.0 * (2.0 * 2f64.ln()).sqrt());
            carrier(angular_frequency(*center_nm)) * (-0.5 * sigma * sigma * tau * tau).exp()
        }
        Spectrum::Delta { center_nm } => carrier(angular_frequency(*center_nm)),
        Spectrum::Discrete { lines } => {
            lines.iter().map(|l| carrier(angular_frequency(l.wavelength_nm)) * l.weight).sum()
        }
    }
}

/// Delay τ (s) equivalent to propagating `z` cm with detuning `delta_beta`
/// cm⁻¹ specified at `lambda0_nm`: τ = zΔβλ₀/(2πc).
pub fn equivalent_delay(delta_beta: f64, lambda0_nm: f64, z: f64) -> f64 {
    z * delta_beta * lambda0_nm * NM_TO_CM / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Closed-form γ = ΔβΔλ/(2πλ₀) for a tophat spectrum.
pub fn tophat_decoherence_strength(delta_beta: f64, fwhm_nm: f64, lambda0_nm: f64) -> f64 {
    delta_beta * fwhm_nm / (2.0 * PI * lambda0_nm)
}

/// γ = [(2πc/(Δβλ₀))·∫|g⁽¹⁾(τ)|²dτ]⁻¹ in cm⁻¹, with the coherence integral
/// evaluated by adaptive quadrature. Line spectra never lose coherence, so
/// their γ is 0.
pub fn decoherence_strength(spectrum: &Spectrum, delta_beta: f64, lambda0_nm: f64) -> Result<f64> {
    if !(delta_beta > 0.0 && delta_beta.is_finite()) {
        return Err(Error::domain("detuning", format!("Δβ = {delta_beta} cm⁻¹ must be positive")));
    }
    check_center(lambda0_nm)?;
    let time_scale = match spectrum {
        Spectrum::Delta { .. } | Spectrum::Discrete { .. } => return Ok(0.0),
        _ if spectrum.fwhm_nm() == 0.0 => return Ok(0.0),
        Spectrum::Tophat { .. } => 2.0 / spectrum.angular_width(),
        Spectrum::Gaussian { .. } => 2.0 * (2.0 * 2f64.ln()).sqrt() / spectrum.angular_width(),
    };
    let integral = 2.0 * time_scale * coherence_integral(|x| g1(spectrum, x * time_scale).norm_sqr());
    Ok(delta_beta * lambda0_nm * NM_TO_CM / (2.0 * PI * SPEED_OF_LIGHT * integral))
}

/// ∫₀^∞ f(x)dx for an even, non-negative |g1|²-like integrand in scaled
/// time. Integrates panel by panel out to X and closes with an algebraic
/// tail estimate assuming f ~ m/x² with m the mean of x²f on the last panel.
fn coherence_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    const PANELS: usize = 2000;
    let width = PI;
    let mut total = 0.0;
    for k in 0..PANELS {
        let a = k as f64 * width;
        total += integrate_adaptive(&f, a, a + width, 1e-15);
    }
    let end = PANELS as f64 * width;
    let mean_x2f = integrate_adaptive(|x| x * x * f(x), end - width, end, 1e-12) / width;
    total + mean_x2f / end
}

/// Coherence between two uncoupled guides, guide a carrying the extra
/// propagation constant Δβ: ρ_ab(z) = ρ_ab(0)·g⁽¹⁾(zΔβλ₀/(2πc)).
pub fn coherence_decay_pair(delta_beta: f64, lambda0_nm: f64, spectrum: &Spectrum, z: f64, rho_ab0: C64) -> C64 {
    rho_ab0 * g1(spectrum, equivalent_delay(delta_beta, lambda0_nm, z))
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub averaged_populations: Vec<f64>,
    pub averaged_density: DensityState,
    pub node_count: usize,
    /// (wavelength nm, weight) of each node.
    pub nodes: Vec<(f64, f64)>,
    pub n_system: usize,
}

impl EnsembleResult {
    /// Spectrum-averaged population on explicit sink guides.
    pub fn sink_fraction(&self) -> f64 {
        self.averaged_populations[self.n_system..].iter().sum()
    }
}

/// Propagates `psi0` to `z` at every spectral node and averages the density
/// matrices with the node weights. Node results are summed in index order.
pub fn ensemble_average(
    net: &NetworkSpec,
    spectrum: &Spectrum,
    psi0: &AmplitudeState,
    z: f64,
    nodes: usize,
    exec: Execution,
) -> Result<EnsembleResult> {
    spectrum.validate()?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::validation("z", "must be finite and non-negative"));
    }
    let dim = net.dimension();
    if psi0.dimension() != dim {
        return Err(Error::validation("psi0", format!("state has {} entries, network has {dim}", psi0.dimension())));
    }
    let points = spectrum.nodes(nodes)?;
    let contributions = exec.try_map(points.len(), |k| -> Result<DMatrix<C64>> {
        let (lambda, weight) = points[k];
        let h = build_hamiltonian(net, lambda)?;
        let psi = UnitaryPropagator::new(&h)?.propagate(psi0, z);
        Ok((&psi.0 * psi.0.adjoint()).map(|x| x * weight))
    })?;
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for c in &contributions {
        rho += c;
    }
    let averaged_density = DensityState(rho);
    Ok(EnsembleResult {
        averaged_populations: averaged_density.populations(),
        averaged_density,
        node_count: points.len(),
        nodes: points,
        n_system: net.n_sites,
    })
}

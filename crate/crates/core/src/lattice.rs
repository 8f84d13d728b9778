//! Network descriptions and assembly of the wavelength-dependent tight-binding
//! Hamiltonian.
//!
//! A [`NetworkSpec`] lists the system waveguides, their detunings and
//! couplings at the centre wavelength, a dispersion model giving how those
//! constants move with wavelength, and optionally an explicit sink: a linear
//! chain of tightly coupled guides attached to the target site.
//!
//! The common propagation constant is kept as an explicit parameter but
//! defaults to zero; only differences in propagation constants affect
//! populations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Threshold below which omitted (non-neighbour) couplings are considered
/// negligible, as a fraction of the weakest retained coupling.
pub const TIGHT_BINDING_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningLaw {
    /// Δβ(λ) = Δβ(λ₀)·λ₀/λ: a constant effective-index difference.
    InverseLambda,
    /// Δβ(λ) = Δβ(λ₀).
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    /// Wavelength λ₀ at which the listed network constants hold (nm).
    pub center_wavelength_nm: f64,
    /// Common propagation constant at λ₀ (cm⁻¹); follows the detuning law.
    pub beta0: f64,
    pub detuning_law: DetuningLaw,
    /// Relative coupling slope σ_C (nm⁻¹): C(λ) = C₀·exp(σ_C·(λ − λ₀)).
    /// Placeholder value; no measured coupling dispersion is available.
    pub coupling_slope_per_nm: f64,
}

impl DispersionModel {
    pub const DEFAULT_COUPLING_SLOPE_PER_NM: f64 = 0.02;

    pub fn new(center_wavelength_nm: f64) -> Self {
        DispersionModel {
            center_wavelength_nm,
            beta0: 0.0,
            detuning_law: DetuningLaw::InverseLambda,
            coupling_slope_per_nm: Self::DEFAULT_COUPLING_SLOPE_PER_NM,
        }
    }

    /// No wavelength dependence at all.
    pub fn flat(center_wavelength_nm: f64) -> Self {
        DispersionModel {
            center_wavelength_nm,
            beta0: 0.0,
            detuning_law: DetuningLaw::Constant,
            coupling_slope_per_nm: 0.0,
        }
    }

    pub fn with_coupling_slope(mut self, slope_per_nm: f64) -> Self {
        self.coupling_slope_per_nm = slope_per_nm;
        self
    }

    pub fn with_detuning_law(mut self, law: DetuningLaw) -> Self {
        self.detuning_law = law;
        self
    }

    fn detuning_factor(&self, lambda_nm: f64) -> f64 {
        match self.detuning_law {
            DetuningLaw::InverseLambda => {
                if lambda_nm == self.center_wavelength_nm {
                    1.0
                } else {
                    self.center_wavelength_nm / lambda_nm
                }
            }
            DetuningLaw::Constant => 1.0,
        }
    }

    /// Propagation-constant offset at `lambda_nm` for a site with offset
    /// `detuning0` at λ₀.
    pub fn detuning_at(&self, detuning0: f64, lambda_nm: f64) -> f64 {
        detuning0 * self.detuning_factor(lambda_nm)
    }

    pub fn beta_at(&self, lambda_nm: f64) -> f64 {
        self.detuning_at(self.beta0, lambda_nm)
    }

    pub fn coupling_at(&self, coupling0: f64, lambda_nm: f64) -> f64 {
        let offset = lambda_nm - self.center_wavelength_nm;
        if offset == 0.0 {
            coupling0
        } else {
            coupling0 * (self.coupling_slope_per_nm * offset).exp()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.center_wavelength_nm > 0.0 && self.center_wavelength_nm.is_finite()) {
            return Err(Error::validation("dispersion.center_wavelength_nm", "must be positive"));
        }
        if !self.beta0.is_finite() {
            return Err(Error::validation("dispersion.beta0", "must be finite"));
        }
        if !self.coupling_slope_per_nm.is_finite() {
            return Err(Error::validation("dispersion.coupling_slope_per_nm", "must be finite"));
        }
        Ok(())
    }
}

/// Explicit sink: a chain of `n_sink` guides attached to the target site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkSpec {
    pub n_sink: usize,
    /// Target-to-first-sink-guide coupling (cm⁻¹).
    pub c_trap: f64,
    /// Coupling between neighbouring sink guides (cm⁻¹).
    pub c_sink: f64,
}

impl SinkSpec {
    /// Long enough that light entering at λ₀ ± 45 nm does not return to the
    /// system within 15 cm.
    pub const DEFAULT_LENGTH: usize = 100;

    pub fn new(n_sink: usize, c_trap: f64, c_sink: f64) -> Result<Self> {
        let sink = SinkSpec { n_sink, c_trap, c_sink };
        sink.validate()?;
        Ok(sink)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sink < 1 {
            return Err(Error::validation("sink.n_sink", "need at least one sink guide"));
        }
        if !(self.c_trap > 0.0 && self.c_trap.is_finite()) {
            return Err(Error::validation("sink.c_trap", "must be positive"));
        }
        if !(self.c_sink > 0.0 && self.c_sink.is_finite()) {
            return Err(Error::validation("sink.c_sink", "must be positive"));
        }
        Ok(())
    }

    pub fn with_length(mut self, n_sink: usize) -> Self {
        self.n_sink = n_sink;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    /// Coupling at λ₀ (cm⁻¹).
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteDetuning {
    pub site: usize,
    /// Offset of the propagation constant at λ₀ (cm⁻¹).
    pub detuning: f64,
}

/// Declarative network description. Site indices are zero-based; sink guides
/// (if any) follow the `n_sites` system sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_sites: usize,
    pub site_detunings: Vec<SiteDetuning>,
    pub couplings: Vec<Coupling>,
    pub dispersion: DispersionModel,
    pub sink: Option<SinkSpec>,
    pub input_site: usize,
    pub target_site: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::validation("n_sites", "network needs at least one site"));
        }
        self.dispersion.validate()?;
        if let Some(sink) = &self.sink {
            sink.validate()?;
        }
        if self.input_site >= self.n_sites {
            return Err(Error::validation("input_site", format!("{} is not a system site", self.input_site)));
        }
        if self.target_site >= self.n_sites {
            return Err(Error::validation("target_site", format!("{} is not a system site", self.target_site)));
        }
        let mut seen_sites = vec![false; self.n_sites];
        for (k, d) in self.site_detunings.iter().enumerate() {
            if d.site >= self.n_sites {
                return Err(Error::validation(format!("site_detunings[{k}].site"), "index out of range"));
            }
            if std::mem::replace(&mut seen_sites[d.site], true) {
                return Err(Error::validation(format!("site_detunings[{k}].site"), "site listed twice"));
            }
            if !d.detuning.is_finite() {
                return Err(Error::validation(format!("site_detunings[{k}].detuning"), "must be finite"));
            }
        }
        let mut pairs = Vec::with_capacity(self.couplings.len());
        for (k, c) in self.couplings.iter().enumerate() {
            if c.a >= self.n_sites || c.b >= self.n_sites {
                return Err(Error::validation(format!("couplings[{k}]"), "site index out of range"));
            }
            if c.a == c.b {
                return Err(Error::validation(format!("couplings[{k}]"), "a site cannot couple to itself"));
            }
            if !(c.strength > 0.0 && c.strength.is_finite()) {
                return Err(Error::validation(format!("couplings[{k}].strength"), "must be positive"));
            }
            let pair = (c.a.min(c.b), c.a.max(c.b));
            if pairs.contains(&pair) {
                return Err(Error::validation(format!("couplings[{k}]"), "pair listed twice"));
            }
            pairs.push(pair);
        }
        Ok(())
    }

    /// Total number of guides including the sink chain.
    pub fn dimension(&self) -> usize {
        self.n_sites + self.sink.map_or(0, |s| s.n_sink)
    }

    pub fn center_wavelength_nm(&self) -> f64 {
        self.dispersion.center_wavelength_nm
    }

    pub fn detuning_of(&self, site: usize) -> f64 {
        self.site_detunings.iter().find(|d| d.site == site).map_or(0.0, |d| d.detuning)
    }

    /// Site with the largest |Δβ₀|, if any site is detuned.
    pub fn most_detuned_site(&self) -> Option<usize> {
        self.site_detunings
            .iter()
            .filter(|d| d.detuning != 0.0)
            .max_by(|x, y| x.detuning.abs().total_cmp(&y.detuning.abs()))
            .map(|d| d.site)
    }

    pub fn without_sink(&self) -> NetworkSpec {
        NetworkSpec { sink: None, ..self.clone() }
    }

    pub fn with_sink(&self, sink: SinkSpec) -> NetworkSpec {
        NetworkSpec { sink: Some(sink), ..self.clone() }
    }

    /// Copy with every site detuning multiplied by `factor`.
    pub fn with_scaled_detunings(&self, factor: f64) -> NetworkSpec {
        let mut net = self.clone();
        for d in &mut net.site_detunings {
            d.detuning *= factor;
        }
        net
    }

    pub fn with_dispersion(&self, dispersion: DispersionModel) -> NetworkSpec {
        NetworkSpec { dispersion, ..self.clone() }
    }
}

/// Real-symmetric Hamiltonian (cm⁻¹) at one wavelength. Rows `0..n_system`
/// are the system sites; any remaining rows are explicit sink guides.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<f64>,
    pub wavelength_nm: f64,
    pub n_system: usize,
}

impl HamiltonianMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>, wavelength_nm: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::validation("hamiltonian", "matrix must be square"));
        }
        if matrix != matrix.transpose() {
            return Err(Error::validation("hamiltonian", "matrix must be symmetric"));
        }
        let n_system = matrix.nrows();
        Ok(HamiltonianMatrix { matrix, wavelength_nm, n_system })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn has_explicit_sink(&self) -> bool {
        self.dimension() > self.n_system
    }

    /// The system block with sink guides removed.
    pub fn system_block(&self) -> HamiltonianMatrix {
        let n = self.n_system;
        HamiltonianMatrix {
            matrix: self.matrix.view((0, 0), (n, n)).into_owned(),
            wavelength_nm: self.wavelength_nm,
            n_system: n,
        }
    }
}

/// Four guides in a chain 1–2–3–4 with equal coupling `c`, guide 4 detuned by
/// `delta_beta`, input at guide 1 and the sink attached to guide 3.
pub fn enaqt4_network(
    c: f64,
    delta_beta: f64,
    sink: Option<SinkSpec>,
    dispersion: DispersionModel,
) -> Result<NetworkSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::validation("coupling", "must be positive"));
    }
    let net = NetworkSpec {
        n_sites: 4,
        site_detunings: vec![SiteDetuning { site: 3, detuning: delta_beta }],
        couplings: (0..3).map(|k| Coupling { a: k, b: k + 1, strength: c }).collect(),
        dispersion,
        sink,
        input_site: 0,
        target_site: 2,
    };
    net.validate()?;
    Ok(net)
}

/// The fabricated design: Δβ = C = 1.0 cm⁻¹, C_trap = 1.5 cm⁻¹,
/// C_sink = 1.75 cm⁻¹, centred at 792.5 nm.
pub fn design_network() -> NetworkSpec {
    let sink = SinkSpec { n_sink: SinkSpec::DEFAULT_LENGTH, c_trap: 1.5, c_sink: 1.75 };
    enaqt4_network(1.0, 1.0, Some(sink), DispersionModel::new(792.5)).expect("valid design network")
}

pub fn build_hamiltonian(net: &NetworkSpec, lambda_nm: f64) -> Result<HamiltonianMatrix> {
    if !(lambda_nm > 0.0 && lambda_nm.is_finite()) {
        return Err(Error::domain("wavelength", format!("{lambda_nm} nm is not positive")));
    }
    net.validate()?;
    let disp = &net.dispersion;
    let dim = net.dimension();
    let beta = disp.beta_at(lambda_nm);
    let mut m = DMatrix::from_diagonal_element(dim, dim, beta);
    for d in &net.site_detunings {
        m[(d.site, d.site)] += disp.detuning_at(d.detuning, lambda_nm);
    }
    for c in &net.couplings {
        let v = disp.coupling_at(c.strength, lambda_nm);
        m[(c.a, c.b)] = v;
        m[(c.b, c.a)] = v;
    }
    if let Some(sink) = &net.sink {
        let first = net.n_sites;
        let trap = disp.coupling_at(sink.c_trap, lambda_nm);
        m[(net.target_site, first)] = trap;
        m[(first, net.target_site)] = trap;
        let inner = disp.coupling_at(sink.c_sink, lambda_nm);
        for k in first..dim - 1 {
            m[(k, k + 1)] = inner;
            m[(k + 1, k)] = inner;
        }
    }
    Ok(HamiltonianMatrix { matrix: m, wavelength_nm: lambda_nm, n_system: net.n_sites })
}

/// An omitted coupling estimate between two system sites (cm⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmittedCoupling {
    pub a: usize,
    pub b: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingReport {
    pub min_retained: f64,
    pub threshold: f64,
    /// Omitted couplings larger than `threshold · min_retained`, with their ratio.
    pub flagged: Vec<(OmittedCoupling, f64)>,
}

impl TightBindingReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Flags any omitted coupling exceeding 5 % of the weakest coupling kept in
/// the model.
pub fn validate_tight_binding(net: &NetworkSpec, omitted: &[OmittedCoupling]) -> TightBindingReport {
    let min_retained = net.couplings.iter().map(|c| c.strength).fold(f64::INFINITY, f64::min);
    let flagged = omitted
        .iter()
        .map(|o| (*o, o.estimate.abs() / min_retained))
        .filter(|(_, ratio)| *ratio > TIGHT_BINDING_THRESHOLD)
        .collect();
    TightBindingReport { min_retained, threshold: TIGHT_BINDING_THRESHOLD, flagged }
}

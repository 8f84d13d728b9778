//! Evolution engines.
//!
//! * [`evolve_unitary`]: closed coupled-mode propagation, exact via the
//!   eigendecomposition of the real-symmetric Hamiltonian.
//! * [`evolve_trapped`]: non-Hermitian propagation with an irreversible decay
//!   channel of rate κ on the target site.
//! * [`evolve_lindblad`]: master equation with trapping and pure dephasing,
//!   integrated by classical RK4 with step-doubling error control.

use nalgebra::{DMatrix, DVector};

use crate::lattice::{build_hamiltonian, HamiltonianMatrix, NetworkSpec};
use crate::linalg::{expm, hermitian_eigenvalues, symmetric_eigen};
use crate::{Error, Result, C64};

const NORM_TOLERANCE: f64 = 1e-9;

/// Pure state over all guides (system plus any explicit sink guides).
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState(pub DVector<C64>);

impl AmplitudeState {
    /// All light in guide `site`.
    pub fn basis(dimension: usize, site: usize) -> Self {
        assert!(site < dimension, "site {site} outside dimension {dimension}");
        let mut v = DVector::zeros(dimension);
        v[site] = C64::new(1.0, 0.0);
        AmplitudeState(v)
    }

    /// Normalized state from real amplitudes.
    pub fn from_real(amplitudes: &[f64]) -> Self {
        let v = DVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&a| C64::new(a, 0.0)));
        let norm = v.norm();
        AmplitudeState(v / C64::new(norm, 0.0))
    }

    /// Zero-pads to `dimension` guides (e.g. to add empty sink guides).
    pub fn padded(&self, dimension: usize) -> Self {
        let mut v = DVector::zeros(dimension);
        v.rows_mut(0, self.0.len()).copy_from(&self.0);
        AmplitudeState(v)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Density matrix over guides.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState(pub DMatrix<C64>);

impl DensityState {
    pub fn pure(psi: &AmplitudeState) -> Self {
        DensityState(&psi.0 * psi.0.adjoint())
    }

    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dimension()).map(|k| self.0[(k, k)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ|ρ_ij|² for Hermitian ρ
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest |ρ − ρ†| entry.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eigenvalues(&self.0)?.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// How the trapped population is accounted for in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkModel {
    /// Sum of populations on explicit sink guides.
    ExplicitChain,
    /// Norm (or trace) lost to the effective decay channel.
    Effective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub z_grid: Vec<f64>,
    /// `populations[k][m]`: population of guide `m` at `z_grid[k]`, all guides.
    pub populations: Vec<Vec<f64>>,
    pub sink_population: Vec<f64>,
    pub n_system: usize,
    pub sink_model: SinkModel,
}

impl EvolutionTrace {
    /// Index of `z` on the grid; off-grid values are refused rather than interpolated.
    pub fn index_of(&self, z: f64) -> Result<usize> {
        let tol = 1e-9 * z.abs().max(1.0);
        self.z_grid.iter().position(|&g| (g - z).abs() <= tol).ok_or(Error::OffGrid(z))
    }

    pub fn system_populations(&self, k: usize) -> &[f64] {
        &self.populations[k][..self.n_system]
    }

    pub fn system_total(&self, k: usize) -> f64 {
        self.system_populations(k).iter().sum()
    }

    fn from_states(z_grid: &[f64], states: &[AmplitudeState], n_system: usize, model: SinkModel) -> Self {
        let populations: Vec<Vec<f64>> = states.iter().map(|s| s.populations()).collect();
        let sink_population = match model {
            SinkModel::ExplicitChain => populations.iter().map(|p| p[n_system..].iter().sum()).collect(),
            SinkModel::Effective => states.iter().map(|s| 1.0 - s.norm_sqr()).collect(),
        };
        EvolutionTrace { z_grid: z_grid.to_vec(), populations, sink_population, n_system, sink_model: model }
    }
}

pub(crate) fn validate_grid(z_grid: &[f64]) -> Result<()> {
    if z_grid.is_empty() {
        return Err(Error::validation("z_grid", "grid is empty"));
    }
    if z_grid.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::validation("z_grid", "distances must be finite and non-negative"));
    }
    if z_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("z_grid", "distances must be non-decreasing"));
    }
    Ok(())
}

fn check_state(h: &HamiltonianMatrix, psi0: &AmplitudeState) -> Result<()> {
    if psi0.dimension() != h.dimension() {
        return Err(Error::validation(
            "psi0",
            format!("state has {} entries, Hamiltonian has {}", psi0.dimension(), h.dimension()),
        ));
    }
    if (psi0.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::validation("psi0", "state must be normalized"));
    }
    Ok(())
}

/// Closed propagator exp(−iHz) held in eigen form.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl UnitaryPropagator {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        let (eigenvalues, eigenvectors) = symmetric_eigen(&h.matrix)?;
        Ok(UnitaryPropagator { eigenvalues, eigenvectors })
    }

    pub fn propagate(&self, psi0: &AmplitudeState, z: f64) -> AmplitudeState {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut coeffs = DVector::<C64>::zeros(n);
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..n {
                acc += psi0.0[m] * v[(m, k)];
            }
            coeffs[k] = acc * C64::new(0.0, -self.eigenvalues[k] * z).exp();
        }
        let mut out = DVector::<C64>::zeros(n);
        for m in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += coeffs[k] * v[(m, k)];
            }
            out[m] = acc;
        }
        AmplitudeState(out)
    }
}

/// ψ(z) = exp(−iHz)ψ₀ on each grid point. Any guides beyond `h.n_system` are
/// treated as an explicit sink.
pub fn evolve_unitary(h: &HamiltonianMatrix, psi0: &AmplitudeState, z_grid: &[f64]) -> Result<EvolutionTrace> {
    validate_grid(z_grid)?;
    check_state(h, psi0)?;
    let prop = UnitaryPropagator::new(h)?;
    let states: Vec<_> = z_grid.iter().map(|&z| prop.propagate(psi0, z)).collect();
    Ok(EvolutionTrace::from_states(z_grid, &states, h.n_system, SinkModel::ExplicitChain))
}

/// H − i(κ/2)|t⟩⟨t| as a complex matrix.
pub fn effective_hamiltonian(h: &HamiltonianMatrix, kappa: f64, target: usize) -> DMatrix<C64> {
    let mut heff = h.matrix.map(|x| C64::new(x, 0.0));
    heff[(target, target)] -= C64::new(0.0, 0.5 * kappa);
    heff
}

/// ψ(z) = exp(−i(H − i(κ/2)|t⟩⟨t|)z)ψ₀; the trapped fraction is 1 − ‖ψ(z)‖².
pub fn evolve_trapped(
    h: &HamiltonianMatrix,
    kappa: f64,
    target: usize,
    psi0: &AmplitudeState,
    z_grid: &[f64],
) -> Result<EvolutionTrace> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain("trapping rate", format!("κ = {kappa} must be non-negative")));
    }
    if target >= h.dimension() {
        return Err(Error::validation("target", "index out of range"));
    }
    validate_grid(z_grid)?;
    check_state(h, psi0)?;
    let heff = effective_hamiltonian(h, kappa, target);
    let states = z_grid
        .iter()
        .map(|&z| {
            let u = expm(&heff.map(|x| x * C64::new(0.0, -z)))?;
            Ok(AmplitudeState(u * &psi0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionTrace::from_states(z_grid, &states, h.n_system, SinkModel::Effective))
}

/// Which coherences the dephasing channel damps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasingScope {
    /// Coherences ρ_sm and ρ_ms (m ≠ s) between site `s` and every other site.
    Site(usize),
    /// Every off-diagonal element.
    Uniform,
}

/// Parameters of dρ/dz = −i[H,ρ] − (κ/2){|t⟩⟨t|, ρ} − γ·(mask ∘ ρ).
///
/// Damped coherences decay at rate γ itself (not γ/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladModel {
    pub kappa: f64,
    pub target: usize,
    pub dephasing_rate: f64,
    pub dephasing: DephasingScope,
    /// Per-step absolute error tolerance of the integrator.
    pub tolerance: f64,
}

impl LindbladModel {
    pub const DEFAULT_TOLERANCE: f64 = 1e-9;

    pub fn new(kappa: f64, target: usize, dephasing_rate: f64, dephasing: DephasingScope) -> Self {
        LindbladModel { kappa, target, dephasing_rate, dephasing, tolerance: Self::DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn mask(&self, n: usize) -> Result<DMatrix<f64>> {
        let mut mask = DMatrix::zeros(n, n);
        match self.dephasing {
            DephasingScope::Site(s) => {
                if s >= n {
                    return Err(Error::validation("dephasing_site", "index out of range"));
                }
                for m in (0..n).filter(|&m| m != s) {
                    mask[(s, m)] = 1.0;
                    mask[(m, s)] = 1.0;
                }
            }
            DephasingScope::Uniform => {
                mask.fill(1.0);
                mask.fill_diagonal(0.0);
            }
        }
        Ok(mask)
    }
}

/// Density-matrix trace plus the states themselves at each grid point.
#[derive(Debug, Clone)]
pub struct LindbladRun {
    pub trace: EvolutionTrace,
    pub states: Vec<DensityState>,
    /// Accepted integration steps.
    pub steps: usize,
}

pub fn evolve_lindblad(
    h: &HamiltonianMatrix,
    model: &LindbladModel,
    rho0: &DensityState,
    z_grid: &[f64],
) -> Result<LindbladRun> {
    if !(model.kappa >= 0.0 && model.kappa.is_finite()) {
        return Err(Error::domain("trapping rate", format!("κ = {} must be non-negative", model.kappa)));
    }
    if !(model.dephasing_rate >= 0.0 && model.dephasing_rate.is_finite()) {
        return Err(Error::domain("dephasing rate", format!("γ = {} must be non-negative", model.dephasing_rate)));
    }
    if model.tolerance.is_nan() || model.tolerance <= 0.0 {
        return Err(Error::validation("tolerance", "must be positive"));
    }
    let n = h.dimension();
    if model.target >= n {
        return Err(Error::validation("target", "index out of range"));
    }
    if rho0.dimension() != n {
        return Err(Error::validation("rho0", "dimension does not match Hamiltonian"));
    }
    validate_grid(z_grid)?;

    // f(ρ) = Gρ + ρG† − γ·mask∘ρ with G = −iH_eff.
    let g = effective_hamiltonian(h, model.kappa, model.target).map(|x| x * C64::new(0.0, -1.0));
    let g_adj = g.adjoint();
    let damping = model.mask(n)?.map(|x| C64::new(x * model.dephasing_rate, 0.0));
    let rhs = |rho: &DMatrix<C64>| -> DMatrix<C64> { &g * rho + rho * &g_adj - damping.component_mul(rho) };

    let scale = g.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64 + model.dephasing_rate;
    let mut step = 0.1 / scale.max(1.0);
    let mut rho = rho0.0.clone();
    let mut z = 0.0;
    let mut states = Vec::with_capacity(z_grid.len());
    let mut accepted = 0usize;

    for &target_z in z_grid {
        while z < target_z {
            let remaining = target_z - z;
            let h_try = step.min(remaining);
            if h_try < 1e-13 * target_z.max(1.0) && h_try < remaining {
                return Err(Error::Numerical(format!(
                    "Lindblad step size underflow at z = {z} cm (step {h_try:e}, tolerance {:e})",
                    model.tolerance
                )));
            }
            let full = rk4_step(&rhs, &rho, h_try);
            let half = rk4_step(&rhs, &rho, 0.5 * h_try);
            let two_halves = rk4_step(&rhs, &half, 0.5 * h_try);
            let diff = &two_halves - &full;
            let err = diff.iter().map(|x| x.norm()).fold(0.0, f64::max) / 15.0;
            if !err.is_finite() {
                return Err(Error::Numerical(format!("non-finite Lindblad state at z = {z} cm")));
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (model.tolerance / err).powf(0.2)).clamp(0.2, 4.0) };
            if err <= model.tolerance {
                let next = two_halves + diff.map(|x| x / 15.0);
                rho = (&next + next.adjoint()).map(|x| x * 0.5);
                z = if h_try == remaining { target_z } else { z + h_try };
                accepted += 1;
                if h_try == step || factor < 1.0 {
                    step = h_try * factor;
                }
            } else {
                step = h_try * factor;
            }
        }
        states.push(DensityState(rho.clone()));
    }

    let populations: Vec<Vec<f64>> = states.iter().map(|s| s.populations()).collect();
    let sink_population = states.iter().map(|s| 1.0 - s.trace()).collect();
    let trace = EvolutionTrace {
        z_grid: z_grid.to_vec(),
        populations,
        sink_population,
        n_system: h.n_system,
        sink_model: SinkModel::Effective,
    };
    Ok(LindbladRun { trace, states, steps: accepted })
}

fn rk4_step<F>(f: &F, y: &DMatrix<C64>, h: f64) -> DMatrix<C64>
where
    F: Fn(&DMatrix<C64>) -> DMatrix<C64>,
{
    let hc = C64::new(h, 0.0);
    let half = C64::new(0.5 * h, 0.0);
    let k1 = f(y);
    let k2 = f(&(y + &k1 * half));
    let k3 = f(&(y + &k2 * half));
    let k4 = f(&(y + &k3 * hc));
    y + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoReturnReport {
    pub n_sink: usize,
    pub z_max: f64,
    /// Largest population seen on the last sink guide.
    pub last_guide_max: f64,
    /// Largest change in any system-site population when five guides are added.
    pub system_shift_max: f64,
    pub threshold: f64,
}

impl NoReturnReport {
    pub const THRESHOLD: f64 = 1e-3;

    pub fn passed(&self) -> bool {
        self.last_guide_max <= self.threshold && self.system_shift_max <= self.threshold
    }
}

/// Checks that light entering the explicit sink does not reach its far end
/// or come back into the system within `z_max`, at the centre wavelength.
pub fn sink_no_return_check(net: &NetworkSpec, z_max: f64) -> Result<NoReturnReport> {
    let sink = net.sink.ok_or_else(|| Error::validation("sink", "no-return check needs an explicit sink"))?;
    if !(z_max >= 0.0 && z_max.is_finite()) {
        return Err(Error::validation("z_max", "must be finite and non-negative"));
    }
    const DZ: f64 = 0.05;
    let n = (z_max / DZ).ceil() as usize;
    let grid: Vec<f64> = if n == 0 { vec![0.0] } else { (0..=n).map(|k| z_max * k as f64 / n as f64).collect() };
    let lambda = net.center_wavelength_nm();

    let run = |net: &NetworkSpec| -> Result<EvolutionTrace> {
        let h = build_hamiltonian(net, lambda)?;
        let psi0 = AmplitudeState::basis(h.dimension(), net.input_site);
        evolve_unitary(&h, &psi0, &grid)
    };
    let base = run(net)?;
    let longer = run(&net.with_sink(sink.with_length(sink.n_sink + 5)))?;

    let last = net.dimension() - 1;
    let last_guide_max = base.populations.iter().map(|p| p[last]).fold(0.0, f64::max);
    let mut system_shift_max: f64 = 0.0;
    for k in 0..grid.len() {
        for (a, b) in base.system_populations(k).iter().zip(longer.system_populations(k)) {
            system_shift_max = system_shift_max.max((a - b).abs());
        }
    }
    Ok(NoReturnReport {
        n_sink: sink.n_sink,
        z_max,
        last_guide_max,
        system_shift_max,
        threshold: NoReturnReport::THRESHOLD,
    })
}

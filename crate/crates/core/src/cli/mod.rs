//! Command-line front end: config ingestion, experiment dispatch, CSV and
//! manifest output.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! numerical or I/O failures and failed checks.

pub mod config;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    dark_state_diagnostics, dynamics, effective_model, enaqt_map, sweep_bandwidth, sweep_wavelength, BandwidthOptions,
    MapOptions, SweepResult,
};
use crate::calibration::{fit_coupling_curve, separation_for_coupling};
use crate::decoherence::{decoherence_strength, ensemble_average, tophat_decoherence_strength, Spectrum};
use crate::lattice::build_hamiltonian;
use crate::propagate::{
    evolve_lindblad, evolve_trapped, sink_no_return_check, AmplitudeState, DensityState, DephasingScope, LindbladModel,
    UnitaryPropagator,
};
use crate::Execution;

pub use config::{parse_config, parse_config_str, ConfigError, OutputFormat, RunConfig};
pub use manifest::{OutputRecord, RunManifest};

/// Environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "ENAQT_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "enaqt", version, about = "Environment-assisted transport in waveguide networks")]
pub struct Cli {
    /// Cap on worker threads for sweep points (1 runs sequentially).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: Option<u32>,

    /// Print the default configuration (the fabricated design) and exit.
    #[arg(long)]
    pub print_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Coherent dynamics at the centre wavelength, explicit and effective sink.
    Simulate { config: Option<PathBuf> },
    /// Narrowband efficiency versus wavelength.
    SweepWavelength { config: Option<PathBuf> },
    /// Broadband enhancement versus bandwidth (ensemble and master equation).
    SweepBandwidth { config: Option<PathBuf> },
    /// Efficiency and enhancement over the (z, γ) grid.
    Map {
        config: Option<PathBuf>,
        /// Use the extended grids (long distances, strong dephasing).
        #[arg(long)]
        extended: bool,
    },
    /// Fit C(d) = A·exp(−d/d₀) to a CSV of (separation, coupling) rows.
    Calibrate {
        csv: PathBuf,
        /// Also report the separation that gives this coupling.
        #[arg(long, value_name = "C")]
        target_coupling_per_cm: Option<f64>,
    },
    /// Run the invariant suite on a network.
    Check { config: Option<PathBuf> },
    /// Re-run the experiment recorded in a manifest and compare outputs.
    Rerun { manifest: PathBuf },
}

/// An experiment that produces files; recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Experiment {
    Simulate,
    SweepWavelength,
    SweepBandwidth,
    Map { extended: bool },
    Check,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::SweepWavelength => "sweep-wavelength",
            Experiment::SweepBandwidth => "sweep-bandwidth",
            Experiment::Map { extended: false } => "map",
            Experiment::Map { extended: true } => "map-extended",
            Experiment::Check => "check",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Simulation(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
    #[error("re-run outputs differ from the manifest: {0:?}")]
    Mismatch(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Simulation(crate::Error::Validation { .. }) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let exec = cli.workers.map_or(Execution::default(), |n| Execution::with_workers(n as usize));
    if cli.print_defaults {
        println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("defaults serialize"));
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Usage("no subcommand given (see --help)".into()));
    };
    let (experiment, path) = match command {
        Command::Simulate { config } => (Experiment::Simulate, config),
        Command::SweepWavelength { config } => (Experiment::SweepWavelength, config),
        Command::SweepBandwidth { config } => (Experiment::SweepBandwidth, config),
        Command::Map { config, extended } => (Experiment::Map { extended: *extended }, config),
        Command::Check { config } => (Experiment::Check, config),
        Command::Calibrate { csv, target_coupling_per_cm } => return calibrate(csv, *target_coupling_per_cm),
        Command::Rerun { manifest } => return manifest::rerun(manifest, exec, cli.workers),
    };
    let (config, input) = match path {
        Some(p) => {
            let bytes =
                std::fs::read(p).map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?;
            let text = String::from_utf8_lossy(&bytes);
            (parse_config_str(&text)?, Some((p.display().to_string(), bytes)))
        }
        None => (RunConfig::default(), None),
    };
    let written = manifest::execute(experiment, &config, input, exec, cli.workers)?;
    written.outcome.into_result()
}

/// Tables and headline numbers produced by one experiment.
pub struct Outcome {
    pub tables: Vec<(String, SweepResult)>,
    pub extra_csv: Vec<(String, Vec<u8>)>,
    pub summary: serde_json::Value,
    pub failed_checks: usize,
}

impl Outcome {
    fn into_result(self) -> Result<(), CliError> {
        if self.failed_checks > 0 {
            Err(CliError::CheckFailed(self.failed_checks))
        } else {
            Ok(())
        }
    }
}

pub fn run_experiment(experiment: Experiment, cfg: &RunConfig, exec: Execution) -> Result<Outcome, CliError> {
    let net = cfg.network_spec()?;
    let e = &cfg.experiment;
    let name = experiment.name().to_string();
    let outcome = |table: SweepResult, summary| Outcome {
        tables: vec![(name.clone(), table)],
        extra_csv: Vec::new(),
        summary,
        failed_checks: 0,
    };
    match experiment {
        Experiment::Simulate => {
            let grid = e.z_grid_cm.values("experiment.z_grid_cm")?;
            let table = dynamics(&net, &grid)?;
            let mut summary = json!({ "z_cm": e.z_cm });
            let h = build_hamiltonian(&net, net.center_wavelength_nm())?;
            let psi0 = AmplitudeState::basis(h.dimension(), net.input_site);
            let psi = UnitaryPropagator::new(&h)?.propagate(&psi0, e.z_cm);
            let eta_explicit: f64 = psi.populations()[net.n_sites..].iter().sum();
            summary["efficiency_explicit"] = eta_explicit.into();
            if net.sink.is_some() {
                let (hs, kappa) = effective_model(&net)?;
                let t = evolve_trapped(
                    &hs,
                    kappa,
                    net.target_site,
                    &AmplitudeState::basis(net.n_sites, net.input_site),
                    &[e.z_cm],
                )?;
                let dark =
                    dark_state_diagnostics(&hs, net.target_site, &AmplitudeState::basis(net.n_sites, net.input_site))?;
                let spectrum = cfg.spectrum()?;
                let ens = ensemble_average(&net, &spectrum, &psi0, e.z_cm, cfg.numerics.quadrature_nodes, exec)?;
                summary["effective_trap_rate_per_cm"] = kappa.into();
                summary["efficiency_effective"] = t.sink_population[0].into();
                summary["dark_state_count"] = dark.dark_count().into();
                summary["infinite_time_bound"] = dark.efficiency_bound.into();
                summary["efficiency_broadband"] = ens.sink_fraction().into();
            }
            Ok(outcome(table, summary))
        }
        Experiment::SweepWavelength => {
            let grid = e.wavelength_grid_nm.values("experiment.wavelength_grid_nm")?;
            let table = sweep_wavelength(&net, &grid, e.z_cm, exec)?;
            let (l_min, eta_min) =
                table
                    .rows
                    .iter()
                    .map(|r| (r[0], r[1]))
                    .fold((f64::NAN, f64::INFINITY), |m, p| if p.1 < m.1 { p } else { m });
            Ok(outcome(table, json!({ "minimum_wavelength_nm": l_min, "minimum_efficiency": eta_min })))
        }
        Experiment::SweepBandwidth => {
            let grid = e.bandwidth_grid_nm.values("experiment.bandwidth_grid_nm")?;
            let opts = BandwidthOptions {
                nodes: cfg.numerics.quadrature_nodes,
                tolerance: cfg.numerics.lindblad_tolerance,
                dephasing: cfg.dephasing(),
                sensitivity: e.sensitivity_band,
            };
            let table = sweep_bandwidth(&net, &grid, e.z_cm, opts, exec)?;
            let last = table.rows.last().cloned().unwrap_or_default();
            let summary = json!({
                "bandwidth_nm": last.first(),
                "enaqt_ensemble": last.get(3),
                "enaqt_lindblad": last.get(5),
                "measured_enaqt_reference": crate::analysis::MEASURED_ENAQT.0,
            });
            Ok(outcome(table, summary))
        }
        Experiment::Map { extended } => {
            let (zg, gg) = if extended {
                (
                    e.extended_z_grid_cm.values("experiment.extended_z_grid_cm")?,
                    e.extended_gamma_grid_per_cm.values("experiment.extended_gamma_grid_per_cm")?,
                )
            } else {
                (
                    e.z_grid_cm.values("experiment.z_grid_cm")?,
                    e.gamma_grid_per_cm.values("experiment.gamma_grid_per_cm")?,
                )
            };
            let opts = MapOptions { tolerance: cfg.numerics.lindblad_tolerance, dephasing: cfg.dephasing() };
            let table = enaqt_map(&net, &zg, &gg, opts, exec)?;
            let corner = table.rows.last().map(|r| r[2]);
            Ok(outcome(
                table,
                json!({ "z_points": zg.len(), "gamma_points": gg.len(), "efficiency_at_grid_end": corner }),
            ))
        }
        Experiment::Check => run_checks(cfg, exec),
    }
}

struct CheckLine {
    name: &'static str,
    value: f64,
    threshold: f64,
    passed: bool,
}

fn check_line(name: &'static str, value: f64, threshold: f64) -> CheckLine {
    CheckLine { name, value, threshold, passed: value <= threshold }
}

fn run_checks(cfg: &RunConfig, exec: Execution) -> Result<Outcome, CliError> {
    let net = cfg.network_spec()?;
    let z = cfg.experiment.z_cm;
    let mut lines = Vec::new();
    let psi_sys = AmplitudeState::basis(net.n_sites, net.input_site);

    let h = build_hamiltonian(&net, net.center_wavelength_nm())?;
    let psi0 = AmplitudeState::basis(h.dimension(), net.input_site);
    let norm = UnitaryPropagator::new(&h)?.propagate(&psi0, z).norm_sqr();
    lines.push(check_line("unitary_norm", (norm - 1.0).abs(), 1e-10));

    if net.sink.is_some() {
        let (hs, kappa) = effective_model(&net)?;
        let dark = dark_state_diagnostics(&hs, net.target_site, &psi_sys)?;
        let t = evolve_trapped(&hs, kappa, net.target_site, &psi_sys, &[500.0])?;
        lines.push(check_line("dark_state_bound", (dark.efficiency_bound - t.sink_population[0]).abs(), 1e-3));

        let nr = sink_no_return_check(&net, z)?;
        lines.push(check_line("sink_no_return", nr.last_guide_max.max(nr.system_shift_max), nr.threshold));

        let spectrum = cfg.spectrum()?;
        let a = ensemble_average(&net, &spectrum, &psi0, z, cfg.numerics.quadrature_nodes, exec)?;
        let b = ensemble_average(&net, &spectrum, &psi0, z, cfg.numerics.convergence_nodes, exec)?;
        let diff = (a.sink_fraction() - b.sink_fraction()).abs();
        lines.push(check_line("quadrature_convergence", diff, 1e-4));

        let gamma = 0.02;
        let scope = cfg.dephasing().or(net.most_detuned_site().map(DephasingScope::Site));
        if let Some(scope) = scope {
            let model = LindbladModel::new(kappa, net.target_site, gamma, scope)
                .with_tolerance(cfg.numerics.lindblad_tolerance);
            let run = evolve_lindblad(&hs, &model, &DensityState::pure(&psi_sys), &[z])?;
            let rho = &run.states[0];
            let negativity = (-rho.min_eigenvalue()?).max(0.0);
            lines.push(check_line("lindblad_hermiticity", rho.hermiticity_error(), 1e-12));
            lines.push(check_line("lindblad_positivity", negativity, 1e-9));
        }
    }

    if let (Spectrum::Tophat { fwhm_nm, center_nm }, Some(site)) = (cfg.spectrum()?, net.most_detuned_site()) {
        let d = net.detuning_of(site).abs();
        if fwhm_nm > 0.0 {
            let q = decoherence_strength(&cfg.spectrum()?, d, center_nm)?;
            let closed = tophat_decoherence_strength(d, fwhm_nm, center_nm);
            lines.push(check_line("decoherence_strength_quadrature", ((q - closed) / closed).abs(), 1e-6));
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "value", "threshold", "passed"]).map_err(csv_err)?;
    for l in &lines {
        println!("{} {} = {:e} (threshold {:e})", if l.passed { "PASS" } else { "FAIL" }, l.name, l.value, l.threshold);
        w.write_record([l.name.to_string(), format!("{}", l.value), format!("{}", l.threshold), l.passed.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    let failed = lines.iter().filter(|l| !l.passed).count();
    let summary = json!({
        "checks": lines.len(),
        "failed": failed,
        "results": lines.iter().map(|l| json!({ "check": l.name, "value": l.value, "passed": l.passed })).collect::<Vec<_>>(),
    });
    Ok(Outcome { tables: Vec::new(), extra_csv: vec![("check".into(), bytes)], summary, failed_checks: failed })
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io { path: "<csv>".into(), source: std::io::Error::other(e) }
}

#[derive(Debug, Serialize)]
struct CalibrationOutput {
    amplitude_per_cm: f64,
    decay_length_um: f64,
    samples: usize,
    residuals_per_cm: Vec<f64>,
    separation_range_um: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<TargetSeparation>,
}

#[derive(Debug, Serialize)]
struct TargetSeparation {
    coupling_per_cm: f64,
    separation_um: f64,
    extrapolated: bool,
}

/// Reads `(separation_um, coupling_per_cm)` rows; a non-numeric first row is
/// taken as a header and `#` starts a comment.
pub fn read_calibration_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_path(path).map_err(
            |e| match e.into_kind() {
                csv::ErrorKind::Io(source) => {
                    CliError::Config(ConfigError::Read { path: path.display().to_string(), source })
                }
                other => CliError::Usage(format!("{}: {other:?}", path.display())),
            },
        )?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let parsed: Option<(f64, f64)> = match (record.get(0), record.get(1), record.len()) {
            (Some(a), Some(b), 2) => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => rows.push(p),
            None if i == 0 => continue,
            None => {
                return Err(CliError::Usage(format!(
                    "{}: line {} is not a (separation_um, coupling_per_cm) pair",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn calibrate(path: &Path, target: Option<f64>) -> Result<(), CliError> {
    let samples = read_calibration_csv(path)?;
    let curve = fit_coupling_curve(&samples)?;
    let target = target
        .map(|c| {
            separation_for_coupling(&curve, c).map(|s| TargetSeparation {
                coupling_per_cm: c,
                separation_um: s.separation,
                extrapolated: s.extrapolated,
            })
        })
        .transpose()?;
    let out = CalibrationOutput {
        amplitude_per_cm: curve.amplitude,
        decay_length_um: curve.decay_length,
        samples: samples.len(),
        residuals_per_cm: curve.residuals.clone(),
        separation_range_um: curve.separation_range(),
        target,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("calibration serializes"));
    Ok(())
}

/// `ENAQT_OUTPUT_DIR` if set, else the configured directory.
pub fn output_directory(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(&cfg.output.directory),
    }
}

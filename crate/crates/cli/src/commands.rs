//! Command bodies. Each takes a fully resolved configuration so that a
//! manifest re-run goes through exactly the same code path.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lis_core::channel::{self, ExperimentConfig};
use lis_core::eigen::{dof_sweep_on, write_summary_csv, write_sweep_csv};
use lis_core::spectrum::{gram_report, write_patterns_csv};
use lis_core::{
    assemble, build_manifold, far_field, solve, sphere_grid, GeometryKind, GeometrySpec,
    SampledManifold, Wavenumber,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{ChannelArgs, DofsArgs, GeometryArgs, SharedArgs, SlepianArgs, SpectraArgs};
use crate::manifest::RunManifest;

/// Aperture used when `--aperture` is absent (the reference 5 cm array).
pub const DEFAULT_APERTURE: f64 = 0.05;
/// Characteristic length of a custom mesh when `--aperture` is absent.
pub const DEFAULT_CUSTOM_APERTURE: f64 = 1.0;
/// Weighted orthonormality required of exported Slepian functions.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] lis_core::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_config_error() => 2,
            CliError::Core(_) | CliError::Numerical(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DofsConfig {
    pub geometry: GeometrySpec,
    pub kappa_l: Vec<f64>,
    pub dump_operator: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlepianConfig {
    pub geometry: GeometrySpec,
    pub kappa_l: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectraConfig {
    pub geometry: GeometrySpec,
    pub kappa_l: f64,
    pub count: usize,
    pub grid: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub experiment: ExperimentConfig,
    pub dump_trials: bool,
}

fn resolve_geometry(args: &GeometryArgs, shared: &SharedArgs) -> CliResult<GeometrySpec> {
    let kind = args.geometry;
    let spec = if kind == GeometryKind::Custom {
        let mesh = args
            .mesh
            .as_ref()
            .ok_or_else(|| CliError::Config("--geometry custom requires --mesh".into()))?;
        let mesh = fs::canonicalize(mesh).map_err(io_err(format!("mesh {}", mesh.display())))?;
        let mut spec = GeometrySpec::custom(mesh);
        spec.aperture_l = shared.aperture.unwrap_or(DEFAULT_CUSTOM_APERTURE);
        spec
    } else {
        if args.mesh.is_some() {
            return Err(CliError::Config(format!(
                "--mesh only applies to custom geometry, not {kind}"
            )));
        }
        GeometrySpec::new(
            kind,
            shared.aperture.unwrap_or(DEFAULT_APERTURE),
            args.nodes.unwrap_or(kind.default_resolution()),
        )
    };
    let spec = spec.with_quadrature(args.quadrature);
    spec.validate()?;
    Ok(spec)
}

/// κL from the explicit flag, else from `--beta`, else the reference `L = 5β` (10π).
fn resolve_kappa_l(explicit: &[f64], shared: &SharedArgs, aperture: f64) -> CliResult<Vec<f64>> {
    match (explicit.is_empty(), shared.beta) {
        (false, Some(_)) => Err(CliError::Config(
            "--beta and --kappa-l both fix the wavelength; give only one".into(),
        )),
        (false, None) => Ok(explicit.to_vec()),
        (true, Some(beta)) if beta.is_finite() && beta > 0.0 => {
            Ok(vec![2.0 * PI * aperture / beta])
        }
        (true, Some(beta)) => Err(CliError::Config(format!(
            "--beta must be positive, got {beta}"
        ))),
        (true, None) => Ok(vec![10.0 * PI]),
    }
}

fn single_kappa_l(explicit: Option<f64>, shared: &SharedArgs, aperture: f64) -> CliResult<f64> {
    let list: Vec<f64> = explicit.into_iter().collect();
    Ok(resolve_kappa_l(&list, shared, aperture)?[0])
}

pub fn resolve_dofs(args: &DofsArgs, shared: &SharedArgs) -> CliResult<DofsConfig> {
    let geometry = resolve_geometry(&args.geometry, shared)?;
    let kappa_l = resolve_kappa_l(&args.kappa_l, shared, geometry.aperture_l)?;
    Ok(DofsConfig {
        geometry,
        kappa_l,
        dump_operator: args.dump_operator,
    })
}

pub fn resolve_slepian(args: &SlepianArgs, shared: &SharedArgs) -> CliResult<SlepianConfig> {
    let geometry = resolve_geometry(&args.geometry, shared)?;
    let kappa_l = single_kappa_l(args.kappa_l, shared, geometry.aperture_l)?;
    Ok(SlepianConfig {
        geometry,
        kappa_l,
        count: args.count,
    })
}

pub fn resolve_spectra(args: &SpectraArgs, shared: &SharedArgs) -> CliResult<SpectraConfig> {
    let geometry = resolve_geometry(&args.geometry, shared)?;
    let kappa_l = single_kappa_l(args.kappa_l, shared, geometry.aperture_l)?;
    Ok(SpectraConfig {
        geometry,
        kappa_l,
        count: args.count,
        grid: args.grid,
    })
}

pub fn resolve_channel(args: &ChannelArgs, shared: &SharedArgs) -> CliResult<ChannelConfig> {
    let path = args
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("channel requires --config <experiment.json>".into()))?;
    let text = fs::read_to_string(path).map_err(io_err(format!("config {}", path.display())))?;
    let mut experiment: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    if let Some(seed) = shared.seed {
        experiment.rng_seed = seed;
    }
    if let Some(beta) = shared.beta {
        experiment.beta = beta;
    }
    if let Some(l) = shared.aperture {
        experiment.aperture_l = l;
    }
    experiment.validate()?;
    Ok(ChannelConfig {
        experiment,
        dump_trials: args.dump_trials,
    })
}

/// Collects output files and writes them under one directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(io_err(format!("output directory {}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let context = format!("writing {}", path.display());
        let file = File::create(&path).map_err(io_err(context.clone()))?;
        let mut out = BufWriter::new(file);
        body(&mut out).map_err(io_err(context.clone()))?;
        out.flush().map_err(io_err(context))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn finish(self, mut manifest: RunManifest) -> CliResult<RunManifest> {
        manifest.outputs = self.written;
        manifest.write_atomic(&self.dir).map_err(io_err(format!(
            "writing manifest in {}",
            self.dir.display()
        )))?;
        Ok(manifest)
    }
}

fn geometry_constants(manifest: &mut RunManifest, spec: &GeometrySpec, m: &SampledManifold) {
    manifest.derive("nodes", m.len());
    manifest.derive("measure", m.measure());
    manifest.derive("aperture_l", spec.aperture_l);
    if spec.kind == GeometryKind::Paraboloid {
        manifest.derive(
            "paraboloid_area",
            lis_core::geometry::paraboloid_area(spec.aperture_l),
        );
    }
}

pub fn run_dofs(
    config: &DofsConfig,
    mut manifest: RunManifest,
    mut out: Outputs,
) -> CliResult<RunManifest> {
    let spec = &config.geometry;
    let manifold = Arc::new(build_manifold(spec)?);
    let reports = dof_sweep_on(&manifold, spec.kind, spec.aperture_l, &config.kappa_l)?;
    out.write("dofs_sweep.csv", |w| write_sweep_csv(&reports, w))?;
    out.write("dofs_summary.csv", |w| write_summary_csv(&reports, w))?;
    if config.dump_operator {
        for (i, &kl) in config.kappa_l.iter().enumerate() {
            let op = assemble(
                Arc::clone(&manifold),
                Wavenumber::for_kappa_l(kl, spec.aperture_l)?,
            )?;
            out.write(&format!("operator_{}.csv", i + 1), |w| op.write_csv(w))?;
        }
    }
    geometry_constants(&mut manifest, spec, &manifold);
    let wavelengths: Vec<f64> = config
        .kappa_l
        .iter()
        .map(|kl| 2.0 * PI * spec.aperture_l / kl)
        .collect();
    manifest.derive("beta", wavelengths);
    out.finish(manifest)
}

pub fn run_slepian(
    config: &SlepianConfig,
    mut manifest: RunManifest,
    mut out: Outputs,
) -> CliResult<RunManifest> {
    let spec = &config.geometry;
    let manifold = build_manifold(spec)?;
    check_count(config.count, manifold.len())?;
    let k = Wavenumber::for_kappa_l(config.kappa_l, spec.aperture_l)?;
    let spectrum = solve(&assemble(manifold, k)?)?;
    let defect = spectrum.orthonormality_defect(config.count);
    if defect > ORTHONORMALITY_TOL {
        return Err(CliError::Numerical(format!(
            "Slepian functions not orthonormal under the weights: defect {defect:e} > {ORTHONORMALITY_TOL:e}"
        )));
    }
    let m = Arc::clone(spectrum.manifold());
    out.write("slepian.csv", |w| {
        write!(w, "node,x,y,z,weight")?;
        for i in 1..=config.count {
            write!(w, ",psi_{i}")?;
        }
        writeln!(w)?;
        for (j, (r, wt)) in m.nodes().iter().zip(m.weights()).enumerate() {
            write!(w, "{},{},{},{},{}", j + 1, r[0], r[1], r[2], wt)?;
            for i in 0..config.count {
                write!(w, ",{}", spectrum.slepian(i)[j])?;
            }
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.write("eigenvalues.csv", |w| {
        write_eigenvalues(w, spectrum.eigenvalues())
    })?;
    geometry_constants(&mut manifest, spec, &m);
    manifest.derive("beta", k.beta);
    manifest.derive("orthonormality_defect", defect);
    manifest.derive("clipped_magnitude", spectrum.clipped_magnitude());
    out.finish(manifest)
}

pub fn run_spectra(
    config: &SpectraConfig,
    mut manifest: RunManifest,
    mut out: Outputs,
) -> CliResult<RunManifest> {
    let spec = &config.geometry;
    let manifold = build_manifold(spec)?;
    check_count(config.count, manifold.len())?;
    let grid = Arc::new(sphere_grid(config.grid)?);
    let k = Wavenumber::for_kappa_l(config.kappa_l, spec.aperture_l)?;
    let spectrum = solve(&assemble(manifold, k)?)?;
    let patterns = (0..config.count)
        .map(|i| far_field(i, &spectrum, &grid))
        .collect::<lis_core::Result<Vec<_>>>()?;
    let report = gram_report(&patterns);
    let indexed: Vec<(usize, &_)> = patterns
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1, p))
        .collect();
    out.write("spectra.csv", |w| write_patterns_csv(&indexed, w))?;
    out.write("plancherel.csv", |w| {
        writeln!(w, "i,k,re,im,expected")?;
        for i in 0..report.count {
            for j in 0..report.count {
                let g = report.entry(i, j);
                let expected = if i == j {
                    2.0 * PI * k.beta * k.beta * spectrum.eigenvalues()[i]
                } else {
                    0.0
                };
                writeln!(w, "{},{},{},{},{}", i + 1, j + 1, g.re, g.im, expected)?;
            }
        }
        Ok(())
    })?;
    out.write("eigenvalues.csv", |w| {
        write_eigenvalues(w, spectrum.eigenvalues())
    })?;
    geometry_constants(&mut manifest, spec, spectrum.manifold());
    manifest.derive("beta", k.beta);
    manifest.derive("plancherel_max_offdiag_ratio", report.max_offdiag_ratio);
    out.finish(manifest)
}

pub fn run_channel(
    config: &ChannelConfig,
    mut manifest: RunManifest,
    mut out: Outputs,
) -> CliResult<RunManifest> {
    let report = channel::run_experiment(&config.experiment)?;
    out.write("channel_report.csv", |w| {
        channel::write_report_csv(&report, w)
    })?;
    out.write("channel_report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(io::Error::other)?;
        writeln!(w)
    })?;
    if config.dump_trials {
        out.write("channel_trials.csv", |w| {
            channel::write_trials_csv(&report, w)
        })?;
    }
    manifest.derive("rayleigh_distance", report.rayleigh_distance);
    manifest.derive("propagation_model", report.propagation_model.clone());
    manifest.derive("near_field_trials", report.near_field_trials);
    manifest.derive("far_field_trials", report.far_field_trials);
    manifest.derive("resampled", report.resampled);
    manifest.derive("resample_rate", json!(report.resample_rate()));
    out.finish(manifest)
}

fn check_count(count: usize, n: usize) -> CliResult<()> {
    if count == 0 || count > n {
        return Err(CliError::Config(format!(
            "--count must be in 1..={n}, got {count}"
        )));
    }
    Ok(())
}

fn write_eigenvalues(w: &mut dyn Write, lambda: &[f64]) -> io::Result<()> {
    writeln!(w, "index,lambda,lambda_scaled")?;
    for (i, v) in lambda.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, v, v / lambda[0])?;
    }
    Ok(())
}

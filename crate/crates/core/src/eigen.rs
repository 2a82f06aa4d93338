//! Eigen-decomposition of the concentration operator and degrees of freedom.

use std::io::{self, Write};
use std::sync::Arc;

use faer::linalg::evd::EvdError;
use faer::Side;
use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_manifold, GeometryKind, GeometrySpec, SampledManifold};
use crate::kernel::{assemble, ConcentrationOperator, Wavenumber};

/// Negative eigenvalues down to `-PSD_TOLERANCE · λ₁` are round-off and get clipped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Sorted eigenvalues and node-sampled Slepian functions.
#[derive(Debug, Clone)]
pub struct ConcentrationSpectrum {
    eigenvalues: Vec<f64>,
    // Column-major n×n; column i holds ψ_i at the manifold nodes.
    slepian: Vec<f64>,
    n: usize,
    clipped: f64,
    manifold: Arc<SampledManifold>,
    wavenumber: Wavenumber,
}

impl ConcentrationSpectrum {
    /// Eigenvalues, nonincreasing and nonnegative.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_i / λ_1`.
    pub fn scaled_eigenvalues(&self) -> Vec<f64> {
        scale_by_first(&self.eigenvalues)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// ψ_i sampled at the manifold nodes (0-based `i`).
    pub fn slepian(&self, i: usize) -> &[f64] {
        &self.slepian[i * self.n..(i + 1) * self.n]
    }

    pub fn manifold(&self) -> &Arc<SampledManifold> {
        &self.manifold
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.wavenumber
    }

    /// Largest magnitude of a negative eigenvalue that was clipped to zero.
    pub fn clipped_magnitude(&self) -> f64 {
        self.clipped
    }

    /// `Σ_j w_j ψ_a(r_j) ψ_b(r_j)`.
    pub fn weighted_inner(&self, a: usize, b: usize) -> f64 {
        let (pa, pb) = (self.slepian(a), self.slepian(b));
        self.manifold
            .weights()
            .iter()
            .zip(pa.iter().zip(pb))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Max deviation of the weighted Gram matrix of the first `count` functions from identity.
    pub fn orthonormality_defect(&self, count: usize) -> f64 {
        let count = count.min(self.n);
        (0..count)
            .into_par_iter()
            .map(|a| {
                (a..count)
                    .map(|b| {
                        let target = if a == b { 1.0 } else { 0.0 };
                        (self.weighted_inner(a, b) - target).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

fn scale_by_first(values: &[f64]) -> Vec<f64> {
    match values.first() {
        Some(&first) if first > 0.0 => values.iter().map(|v| v / first).collect(),
        _ => vec![0.0; values.len()],
    }
}

fn evd_failure(op: &ConcentrationOperator) -> Error {
    let diag = (0..op.n()).map(|i| op.get(i, i));
    let (min_diag, max_diag) = diag.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d), hi.max(d))
    });
    Error::NoConvergence {
        n: op.n(),
        min_diag,
        max_diag,
    }
}

/// Orders ascending solver output descending (stable, so exact ties keep
/// solver order), checks positive semidefiniteness and clips round-off.
fn order_and_clip(ascending: &[f64]) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    let mut order: Vec<usize> = (0..ascending.len()).collect();
    order.sort_by(|&a, &b| ascending[b].total_cmp(&ascending[a]));
    let largest = ascending[order[0]];
    let smallest = ascending[*order.last().expect("non-empty")];
    if !(largest > 0.0) {
        return Err(Error::Numerical(format!(
            "largest eigenvalue {largest:e} is not positive"
        )));
    }
    if smallest < -PSD_TOLERANCE * largest {
        return Err(Error::NotPositiveSemidefinite {
            min: smallest,
            max: largest,
        });
    }
    let mut clipped: f64 = 0.0;
    let values = order
        .iter()
        .map(|&i| {
            let v = ascending[i];
            if v < 0.0 {
                clipped = clipped.max(-v);
                0.0
            } else {
                v
            }
        })
        .collect();
    if clipped > 0.0 {
        debug!("clipped negative eigenvalues down to -{clipped:e} (λ₁ = {largest:e})");
    }
    Ok((order, values, clipped))
}

pub fn solve(op: &ConcentrationOperator) -> Result<ConcentrationSpectrum> {
    let n = op.n();
    let evd = op
        .matrix()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|EvdError::NoConvergence| evd_failure(op))?;
    let s = evd.S().column_vector();
    let ascending: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let (order, eigenvalues, clipped) = order_and_clip(&ascending)?;

    let u = evd.U();
    let inv_sqrt_w: Vec<f64> = op
        .manifold()
        .weights()
        .iter()
        .map(|w| 1.0 / w.sqrt())
        .collect();
    let mut slepian = vec![0.0; n * n];
    slepian
        .par_chunks_mut(n)
        .zip(order.par_iter())
        .for_each(|(column, &src)| {
            for (j, value) in column.iter_mut().enumerate() {
                *value = u[(j, src)] * inv_sqrt_w[j];
            }
            // Sign convention: the largest-magnitude sample is positive.
            let peak =
                column.iter().copied().fold(
                    0.0f64,
                    |best, v| if v.abs() > best.abs() { v } else { best },
                );
            if peak < 0.0 {
                column.iter_mut().for_each(|v| *v = -*v);
            }
        });

    Ok(ConcentrationSpectrum {
        eigenvalues,
        slepian,
        n,
        clipped,
        manifold: Arc::clone(op.manifold()),
        wavenumber: op.wavenumber(),
    })
}

/// Eigenvalues only (nonincreasing, clipped), for DoF analysis.
pub fn solve_eigenvalues(op: &ConcentrationOperator) -> Result<Vec<f64>> {
    let ascending = op
        .matrix()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|EvdError::NoConvergence| evd_failure(op))?;
    let (_, values, _) = order_and_clip(&ascending)?;
    Ok(values)
}

/// Smallest `N` such that the top-`N` eigenvalues hold at least `fraction` of the total.
pub fn dof_numerical(eigenvalues: &[f64], fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "eigenvalue sum must be positive".into(),
        ));
    }
    let mut acc = 0.0;
    for (i, v) in eigenvalues.iter().enumerate() {
        acc += v;
        if acc / total >= fraction {
            return Ok(i + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Closed-form degrees of freedom where one is known.
pub fn dof_theoretical(kind: GeometryKind, kappa_l: f64) -> Option<f64> {
    use std::f64::consts::PI;
    match kind {
        GeometryKind::Linear => Some(kappa_l / PI),
        GeometryKind::Circular => Some(kappa_l),
        GeometryKind::Square => Some(kappa_l * kappa_l / (4.0 * PI)),
        GeometryKind::Paraboloid | GeometryKind::Custom => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofReport {
    pub kappa_l: f64,
    pub dof_th: Option<f64>,
    pub dof_90: usize,
    pub dof_99: usize,
    pub eigenvalues_scaled: Vec<f64>,
}

impl DofReport {
    pub fn from_eigenvalues(kind: GeometryKind, kappa_l: f64, eigenvalues: &[f64]) -> Result<Self> {
        Ok(Self {
            kappa_l,
            dof_th: dof_theoretical(kind, kappa_l),
            dof_90: dof_numerical(eigenvalues, 0.9)?,
            dof_99: dof_numerical(eigenvalues, 0.99)?,
            eigenvalues_scaled: scale_by_first(eigenvalues),
        })
    }
}

/// Fixes the aperture and varies the wavelength so that `κL` walks the given grid.
pub fn dof_sweep(spec: &GeometrySpec, kappa_l_values: &[f64]) -> Result<Vec<DofReport>> {
    let manifold = Arc::new(build_manifold(spec)?);
    dof_sweep_on(&manifold, spec.kind, spec.aperture_l, kappa_l_values)
}

pub fn dof_sweep_on(
    manifold: &Arc<SampledManifold>,
    kind: GeometryKind,
    aperture_l: f64,
    kappa_l_values: &[f64],
) -> Result<Vec<DofReport>> {
    if kappa_l_values.is_empty() {
        return Err(Error::InvalidInput("empty κL grid".into()));
    }
    if kappa_l_values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput("κL values must be positive".into()));
    }
    if kappa_l_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "κL values must be strictly ascending".into(),
        ));
    }
    kappa_l_values
        .par_iter()
        .map(|&kappa_l| {
            let k = Wavenumber::for_kappa_l(kappa_l, aperture_l)?;
            let op = assemble(Arc::clone(manifold), k)?;
            let eigenvalues = solve_eigenvalues(&op)?;
            DofReport::from_eigenvalues(kind, kappa_l, &eigenvalues)
        })
        .collect()
}

/// `kappa_l,index,lambda_scaled` with 1-based index.
pub fn write_sweep_csv<W: Write>(reports: &[DofReport], mut out: W) -> io::Result<()> {
    writeln!(out, "kappa_l,index,lambda_scaled")?;
    for r in reports {
        for (i, v) in r.eigenvalues_scaled.iter().enumerate() {
            writeln!(out, "{},{},{}", r.kappa_l, i + 1, v)?;
        }
    }
    Ok(())
}

/// `kappa_l,dof_th,dof_90,dof_99`; `dof_th` is empty where no formula exists.
pub fn write_summary_csv<W: Write>(reports: &[DofReport], mut out: W) -> io::Result<()> {
    writeln!(out, "kappa_l,dof_th,dof_90,dof_99")?;
    for r in reports {
        let th = r.dof_th.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", r.kappa_l, th, r.dof_90, r.dof_99)?;
    }
    Ok(())
}

//! Far-field spectra on the wavenumber sphere and plane-wave fits.
//!
//! The forward transform of a field sampled on `M` is taken with the
//! `e^{-jk·r}` sign, so that plane waves `e^{+jκ d·r}` are its inverse.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::ConcentrationSpectrum;
use crate::error::{Error, Result};
use crate::geometry::{dot, Point3, SampledManifold};
use crate::kernel::Wavenumber;

/// Singular values below this fraction of the largest are dropped in least squares.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

pub const MIN_SPHERE_POINTS: usize = 16;

/// `n` near-uniform unit vectors on a Fibonacci spiral, equal-area in `z`.
pub fn fibonacci_directions(n: usize) -> Vec<Point3> {
    let golden_angle = PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * k as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Solid-angle quadrature over the unit sphere of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    directions: Vec<Point3>,
    weights: Vec<f64>,
}

pub fn sphere_grid(n: usize) -> Result<SphereGrid> {
    if n < MIN_SPHERE_POINTS {
        return Err(Error::InvalidInput(format!(
            "sphere grid needs at least {MIN_SPHERE_POINTS} points, got {n}"
        )));
    }
    Ok(SphereGrid {
        directions: fibonacci_directions(n),
        weights: vec![4.0 * PI / n as f64; n],
    })
}

impl SphereGrid {
    pub fn directions(&self) -> &[Point3] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
        F: Fn(&Point3) -> T,
    {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| f(d) * *w)
            .sum()
    }

    /// Polar and azimuth angles `(θ, φ)` of direction `k`.
    pub fn angles(&self, k: usize) -> (f64, f64) {
        let d = self.directions[k];
        (d[2].clamp(-1.0, 1.0).acos(), d[1].atan2(d[0]))
    }

    /// Applies a row-major rotation to every direction.
    pub fn rotated(&self, rotation: [[f64; 3]; 3]) -> Self {
        Self {
            directions: self
                .directions
                .iter()
                .map(|d| {
                    [
                        dot(&rotation[0], d),
                        dot(&rotation[1], d),
                        dot(&rotation[2], d),
                    ]
                })
                .collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Values of `ψ̂(κd)` for every direction `d` of a grid.
#[derive(Debug, Clone)]
pub struct FarFieldPattern {
    values: Vec<Complex64>,
    grid: Arc<SphereGrid>,
    wavenumber: Wavenumber,
}

impl FarFieldPattern {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.wavenumber
    }

    /// `Σ_k w_k |ψ̂(κ d_k)|²`.
    pub fn energy(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum()
    }

    /// Sphere inner product `Σ_k w_k a_k b_k*`.
    pub fn inner(&self, other: &FarFieldPattern) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b.conj() * *w)
            .sum()
    }
}

/// Discrete Fourier transform of arbitrary samples on `manifold`, restricted to the sphere `‖k‖ = κ`.
pub fn field_far_field(
    samples: &[Complex64],
    manifold: &SampledManifold,
    k: Wavenumber,
    grid: &Arc<SphereGrid>,
) -> Result<FarFieldPattern> {
    if samples.len() != manifold.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples for a manifold of {} nodes",
            samples.len(),
            manifold.len()
        )));
    }
    let weighted: Vec<Complex64> = samples
        .iter()
        .zip(manifold.weights())
        .map(|(s, w)| s * *w)
        .collect();
    let nodes = manifold.nodes();
    let values = grid
        .directions()
        .par_iter()
        .map(|d| {
            nodes
                .iter()
                .zip(&weighted)
                .map(|(r, ws)| ws * Complex64::from_polar(1.0, -k.kappa * dot(d, r)))
                .sum()
        })
        .collect();
    Ok(FarFieldPattern {
        values,
        grid: Arc::clone(grid),
        wavenumber: k,
    })
}

/// Far-field pattern of the `psi_index`-th (0-based) Slepian function.
pub fn far_field(
    psi_index: usize,
    spectrum: &ConcentrationSpectrum,
    grid: &Arc<SphereGrid>,
) -> Result<FarFieldPattern> {
    if psi_index >= spectrum.len() {
        return Err(Error::InvalidInput(format!(
            "Slepian index {psi_index} out of range ({} functions)",
            spectrum.len()
        )));
    }
    let samples: Vec<Complex64> = spectrum
        .slepian(psi_index)
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    field_far_field(&samples, spectrum.manifold(), spectrum.wavenumber(), grid)
}

#[derive(Debug, Clone)]
pub struct PlancherelReport {
    pub count: usize,
    /// Row-major `count × count` Gram matrix of the far-field patterns.
    pub gram: Vec<Complex64>,
    /// `max_{i≠k} |G_ik| / √(G_ii G_kk)`.
    pub max_offdiag_ratio: f64,
}

impl PlancherelReport {
    pub fn entry(&self, i: usize, k: usize) -> Complex64 {
        self.gram[i * self.count + k]
    }
}

pub fn plancherel_check(
    spectrum: &ConcentrationSpectrum,
    grid: &Arc<SphereGrid>,
    count: usize,
) -> Result<PlancherelReport> {
    if count == 0 || count > spectrum.len() {
        return Err(Error::InvalidInput(format!(
            "count must be in 1..={}, got {count}",
            spectrum.len()
        )));
    }
    let patterns = (0..count)
        .map(|i| far_field(i, spectrum, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(gram_report(&patterns))
}

pub fn gram_report(patterns: &[FarFieldPattern]) -> PlancherelReport {
    let count = patterns.len();
    let mut gram = vec![Complex64::new(0.0, 0.0); count * count];
    for i in 0..count {
        for k in 0..count {
            gram[i * count + k] = patterns[i].inner(&patterns[k]);
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..count {
        for k in 0..count {
            if i != k {
                let scale = (gram[i * count + i].re * gram[k * count + k].re).sqrt();
                worst = worst.max(gram[i * count + k].norm() / scale);
            }
        }
    }
    PlancherelReport {
        count,
        gram,
        max_offdiag_ratio: worst,
    }
}

#[derive(Debug, Clone)]
pub struct PlaneWaveFit {
    pub directions: Vec<Point3>,
    pub coefficients: Vec<Complex64>,
    /// `√(Σ w|u − fit|² / Σ w|u|²)`, zero for a zero field.
    pub residual: f64,
    pub rank: usize,
    /// True when singular values were dropped (minimum-norm solution).
    pub rank_deficient: bool,
}

/// Least-squares fit of `u` by `P` plane waves along Fibonacci directions.
pub fn plane_wave_fit(
    u_samples: &[Complex64],
    manifold: &SampledManifold,
    k: Wavenumber,
    p: usize,
) -> Result<PlaneWaveFit> {
    if p == 0 {
        return Err(Error::InvalidInput(
            "need at least one plane-wave direction".into(),
        ));
    }
    plane_wave_fit_with_directions(u_samples, manifold, k, &fibonacci_directions(p))
}

pub fn plane_wave_fit_with_directions(
    u_samples: &[Complex64],
    manifold: &SampledManifold,
    k: Wavenumber,
    directions: &[Point3],
) -> Result<PlaneWaveFit> {
    let n = manifold.len();
    let p = directions.len();
    if p == 0 {
        return Err(Error::InvalidInput(
            "need at least one plane-wave direction".into(),
        ));
    }
    if u_samples.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} samples for a manifold of {n} nodes",
            u_samples.len()
        )));
    }
    if u_samples
        .iter()
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::InvalidInput("field samples must be finite".into()));
    }
    let sqrt_w: Vec<f64> = manifold.weights().iter().map(|w| w.sqrt()).collect();
    let rhs: Vec<Complex64> = u_samples.iter().zip(&sqrt_w).map(|(u, s)| u * *s).collect();
    let rhs_norm = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return Ok(PlaneWaveFit {
            directions: directions.to_vec(),
            coefficients: vec![Complex64::new(0.0, 0.0); p],
            residual: 0.0,
            rank: 0,
            rank_deficient: false,
        });
    }

    let nodes = manifold.nodes();
    let design = Mat::<Complex64>::from_fn(n, p, |j, m| {
        Complex64::from_polar(sqrt_w[j], k.kappa * dot(&nodes[j], &directions[m]))
    });
    let svd = design
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let rank_cap = s.nrows();
    let s_max = (0..rank_cap).map(|i| s[i].re).fold(0.0, f64::max);
    let mut coefficients = vec![Complex64::new(0.0, 0.0); p];
    let mut rank = 0;
    for i in 0..rank_cap {
        let sigma = s[i].re;
        if !(sigma > SINGULAR_VALUE_FLOOR * s_max) {
            continue;
        }
        rank += 1;
        let proj: Complex64 = (0..n).map(|j| u[(j, i)].conj() * rhs[j]).sum::<Complex64>() / sigma;
        for (m, c) in coefficients.iter_mut().enumerate() {
            *c += v[(m, i)] * proj;
        }
    }

    let misfit: f64 = (0..n)
        .map(|j| {
            let fit: Complex64 = (0..p).map(|m| design[(j, m)] * coefficients[m]).sum();
            (rhs[j] - fit).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Ok(PlaneWaveFit {
        directions: directions.to_vec(),
        coefficients,
        residual: misfit / rhs_norm,
        rank,
        rank_deficient: rank < p,
    })
}

/// `psi,theta,phi,abs,arg` rows for each (1-based index, pattern) pair.
pub fn write_patterns_csv<W: Write>(
    patterns: &[(usize, &FarFieldPattern)],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "psi,theta,phi,abs,arg")?;
    for (index, pattern) in patterns {
        let grid = pattern.grid();
        for (k, value) in pattern.values().iter().enumerate() {
            let (theta, phi) = grid.angles(k);
            writeln!(
                out,
                "{index},{theta},{phi},{},{}",
                value.norm(),
                value.arg()
            )?;
        }
    }
    Ok(())
}

//! Concentration kernel and its Nyström discretization.
//!
//! The kernel is the inverse Fourier transform of the uniform measure on the
//! wavenumber sphere,
//!
//! ```text
//! K(r, r′) = (2π)⁻³ κ² ∬ e^{jκ d·(r − r′)} dΘ = (2/β²) sinc(κ‖r − r′‖).
//! ```
//!
//! With midpoint/centroid weights `w` the integral operator becomes the
//! nonsymmetric matrix `K W`; we store the similar symmetric matrix
//! `W^{1/2} K W^{1/2}` so that symmetric eigensolvers apply.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use faer::MatRef;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Point3, SampledManifold};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wavenumber {
    /// rad/m
    pub kappa: f64,
    /// Wavelength in meters.
    pub beta: f64,
}

impl Wavenumber {
    pub fn from_wavelength(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {beta}"
            )));
        }
        Ok(Self {
            kappa: 2.0 * PI / beta,
            beta,
        })
    }

    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavenumber must be positive, got {kappa}"
            )));
        }
        Ok(Self {
            kappa,
            beta: 2.0 * PI / kappa,
        })
    }

    /// Wavenumber giving the dimensionless product `κL` on an aperture `L`.
    pub fn for_kappa_l(kappa_l: f64, aperture_l: f64) -> Result<Self> {
        if !(aperture_l.is_finite() && aperture_l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "aperture must be positive, got {aperture_l}"
            )));
        }
        Self::from_kappa(kappa_l / aperture_l)
    }

    /// Kernel value at zero separation, `2/β²`.
    pub fn peak(&self) -> f64 {
        2.0 / (self.beta * self.beta)
    }
}

/// `sin(x)/x`, with a Taylor series around the removable singularity.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

#[inline]
pub fn kernel_value(r: &Point3, r_prime: &Point3, k: &Wavenumber) -> f64 {
    k.peak() * sinc(k.kappa * distance(r, r_prime))
}

/// Dense symmetric Nyström matrix `A_ij = √w_i K(r_i, r_j) √w_j`.
#[derive(Debug, Clone)]
pub struct ConcentrationOperator {
    n: usize,
    // Symmetric, so row-major and column-major layouts coincide.
    data: Vec<f64>,
    manifold: Arc<SampledManifold>,
    wavenumber: Wavenumber,
}

impl ConcentrationOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.n, self.n)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn manifold(&self) -> &Arc<SampledManifold> {
        &self.manifold
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.wavenumber
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Dumps the matrix as CSV: a `#` header line, then one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# lis-operator v1 n={} kappa={} beta={} layout=row-major",
            self.n, self.wavenumber.kappa, self.wavenumber.beta
        )?;
        for i in 0..self.n {
            let row = self.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.write_all(b",")?;
                }
                write!(out, "{v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn assemble(
    manifold: impl Into<Arc<SampledManifold>>,
    k: Wavenumber,
) -> Result<ConcentrationOperator> {
    let manifold = manifold.into();
    let n = manifold.len();
    let entries = n.checked_mul(n).ok_or(Error::SizeOverflow { n })?;
    let bytes = entries
        .checked_mul(std::mem::size_of::<f64>())
        .filter(|b| *b <= isize::MAX as usize)
        .ok_or(Error::SizeOverflow { n })?;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(entries)
        .map_err(|_| Error::Allocation { n, bytes })?;
    data.resize(entries, 0.0);

    let nodes = manifold.nodes();
    let sqrt_w: Vec<f64> = manifold.weights().iter().map(|w| w.sqrt()).collect();
    let peak = k.peak();
    data.par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let ri = &nodes[i];
            for (j, a) in row.iter_mut().enumerate() {
                // (√w_i √w_j) is commutative, so A stays bit-for-bit symmetric.
                *a = peak * sinc(k.kappa * distance(ri, &nodes[j])) * (sqrt_w[i] * sqrt_w[j]);
            }
        });

    Ok(ConcentrationOperator {
        n,
        data,
        manifold,
        wavenumber: k,
    })
}

//! Line-of-sight channel between two linear apertures: expansion of the
//! received field in Slepian versus Fourier bases.
//!
//! Geometry is planar (`z = 0`). The transmitter is centered at the origin,
//! the receiver at `(0, d, 0)`; a tilt `θ` rotates a segment about its own
//! center, with `θ = 0` meaning the segment runs along `x` (parallel
//! apertures facing each other broadside). Positions along a segment use the
//! segment-local coordinate `r₁ ∈ [0, L]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use log::{info, warn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{solve, ConcentrationSpectrum};
use crate::error::{Error, Result};
use crate::geometry::{distance, gauss_legendre, Point3, SampledManifold};
use crate::kernel::{assemble, Wavenumber};

/// Gauss–Legendre nodes used for the transmit-side line integral.
pub const TX_QUADRATURE_NODES: usize = 256;

/// Receiver samples closer than this many wavelengths to a transmit node are rejected.
pub const NEAR_SINGULAR_WAVELENGTHS: f64 = 1e-6;

/// Attempts per trial before giving up on drawing a valid scenario.
pub const MAX_RESAMPLES: usize = 1000;

pub const PROPAGATION_MODEL: &str = "scalar free-space Green's function exp(-j*kappa*R)/(4*pi*R)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosScenario {
    pub aperture_l: f64,
    pub beta: f64,
    pub theta_tx: f64,
    pub theta_rx: f64,
    /// Center-to-center distance in meters.
    pub distance_d: f64,
}

impl LosScenario {
    pub fn parallel(aperture_l: f64, beta: f64, distance_d: f64) -> Self {
        Self {
            aperture_l,
            beta,
            theta_tx: 0.0,
            theta_rx: 0.0,
            distance_d,
        }
    }

    pub fn wavenumber(&self) -> Result<Wavenumber> {
        Wavenumber::from_wavelength(self.beta)
    }

    pub fn tx_center(&self) -> Point3 {
        [0.0, 0.0, 0.0]
    }

    pub fn rx_center(&self) -> Point3 {
        [0.0, self.distance_d, 0.0]
    }

    fn point_on(&self, center: Point3, theta: f64, r1: f64) -> Point3 {
        let s = r1 - 0.5 * self.aperture_l;
        [
            center[0] + s * theta.cos(),
            center[1] + s * theta.sin(),
            center[2],
        ]
    }

    pub fn tx_point(&self, r1: f64) -> Point3 {
        self.point_on(self.tx_center(), self.theta_tx, r1)
    }

    pub fn rx_point(&self, r1: f64) -> Point3 {
        self.point_on(self.rx_center(), self.theta_rx, r1)
    }

    /// Near/far boundary `L²/(2β)` (12.5 cm for `L = 5 cm`, `β = 1 cm`).
    pub fn rayleigh_distance(&self) -> f64 {
        self.aperture_l * self.aperture_l / (2.0 * self.beta)
    }

    pub fn is_near_field(&self) -> bool {
        self.distance_d < self.rayleigh_distance()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.aperture_l,
            self.beta,
            self.theta_tx,
            self.theta_rx,
            self.distance_d,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidScenario("non-finite parameter".into()));
        }
        if self.distance_d <= 0.0 || self.aperture_l <= 0.0 || self.beta <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "distance, aperture and wavelength must be positive (d={}, L={}, β={})",
                self.distance_d, self.aperture_l, self.beta
            )));
        }
        let l = self.aperture_l;
        if segments_intersect(
            (self.tx_point(0.0), self.tx_point(l)),
            (self.rx_point(0.0), self.rx_point(l)),
        ) {
            return Err(Error::InvalidScenario(format!(
                "segments intersect (d={}, θ_tx={}, θ_rx={})",
                self.distance_d, self.theta_tx, self.theta_rx
            )));
        }
        Ok(())
    }
}

fn orient(a: Point3, b: Point3, c: Point3) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Point3, b: Point3, p: Point3, tol: f64) -> bool {
    p[0] >= a[0].min(b[0]) - tol
        && p[0] <= a[0].max(b[0]) + tol
        && p[1] >= a[1].min(b[1]) - tol
        && p[1] <= a[1].max(b[1]) + tol
}

/// Planar closed-segment intersection, touching endpoints included.
/// Orientations within round-off of zero count as collinear.
fn segments_intersect(s1: (Point3, Point3), s2: (Point3, Point3)) -> bool {
    let (p1, p2) = s1;
    let (q1, q2) = s2;
    let scale = distance(&p1, &p2).max(distance(&q1, &q2));
    let eps = 1e-12 * scale * scale;
    let sign = |v: f64| {
        if v.abs() <= eps {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let d1 = sign(orient(q1, q2, p1));
    let d2 = sign(orient(q1, q2, p2));
    let d3 = sign(orient(p1, p2, q1));
    let d4 = sign(orient(p1, p2, q2));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    let tol = 1e-12 * scale;
    (d1 == 0 && on_segment(q1, q2, p1, tol))
        || (d2 == 0 && on_segment(q1, q2, p2, tol))
        || (d3 == 0 && on_segment(p1, p2, q1, tol))
        || (d4 == 0 && on_segment(p1, p2, q2, tol))
}

/// `e^{-jκR} / (4πR)`.
#[inline]
pub fn free_space_green(r: &Point3, r_prime: &Point3, k: Wavenumber) -> Complex64 {
    let dist = distance(r, r_prime);
    Complex64::from_polar(1.0 / (4.0 * PI * dist), -k.kappa * dist)
}

/// Field radiated by weighted point sources, evaluated at `rx_nodes`.
pub fn point_source_field(
    sources: &[(Point3, Complex64)],
    rx_nodes: &[Point3],
    k: Wavenumber,
) -> Result<Vec<Complex64>> {
    let guard = NEAR_SINGULAR_WAVELENGTHS * k.beta;
    rx_nodes
        .iter()
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (s, amp) in sources {
                if distance(r, s) < guard {
                    return Err(Error::InvalidScenario(format!(
                        "receiver node {r:?} within {guard:e} m of a source"
                    )));
                }
                acc += amp * free_space_green(r, s, k);
            }
            Ok(acc)
        })
        .collect()
}

/// Coefficients of a transmit current on the orthonormal Legendre basis
/// `√((2k+1)/L) P_k(2r₁/L − 1)` over `r₁ ∈ [0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentCoefficients(pub Vec<Complex64>);

impl CurrentCoefficients {
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, r1: f64, aperture_l: f64) -> Complex64 {
        let t = 2.0 * r1 / aperture_l - 1.0;
        let (mut p_prev, mut p) = (0.0, 1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                let kf = k as f64;
                let next = ((2.0 * kf - 1.0) * t * p - (kf - 1.0) * p_prev) / kf;
                p_prev = p;
                p = next;
            }
            acc += c * (((2 * k + 1) as f64 / aperture_l).sqrt() * p);
        }
        acc
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }
}

fn draw_current<R: Rng>(degree: usize, rng: &mut R) -> CurrentCoefficients {
    let mut coeffs: Vec<Complex64> = (0..=degree)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    coeffs.iter_mut().for_each(|c| *c /= norm);
    CurrentCoefficients(coeffs)
}

/// Random complex-Gaussian Legendre current with unit L² energy.
pub fn random_smooth_current(degree: usize, seed: u64) -> CurrentCoefficients {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    draw_current(degree, &mut rng)
}

/// Received field `u(r) = ∫ σ(r′) G(r, r′) dr′` over the transmit segment.
pub fn los_field(
    scenario: &LosScenario,
    current: &CurrentCoefficients,
    rx_nodes: &[Point3],
) -> Result<Vec<Complex64>> {
    scenario.validate()?;
    let k = scenario.wavenumber()?;
    let l = scenario.aperture_l;
    let (t, w) = gauss_legendre(TX_QUADRATURE_NODES);
    let sources: Vec<(Point3, Complex64)> = t
        .iter()
        .zip(&w)
        .map(|(ti, wi)| {
            let r1 = 0.5 * l * (ti + 1.0);
            (scenario.tx_point(r1), current.eval(r1, l) * (0.5 * l * wi))
        })
        .collect();
    point_source_field(&sources, rx_nodes, k)
}

/// Midpoint samples along the receiving segment, shared by both bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverGrid {
    aperture_l: f64,
    r1: Vec<f64>,
    weights: Vec<f64>,
}

impl ReceiverGrid {
    pub fn midpoint(aperture_l: f64, n: usize) -> Result<Self> {
        if n < 2 || !(aperture_l > 0.0 && aperture_l.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "receiver grid needs n ≥ 2 and L > 0 (n={n}, L={aperture_l})"
            )));
        }
        let h = aperture_l / n as f64;
        Ok(Self {
            aperture_l,
            r1: (0..n).map(|i| (i as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        })
    }

    pub fn aperture(&self) -> f64 {
        self.aperture_l
    }

    pub fn r1(&self) -> &[f64] {
        &self.r1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }

    pub fn positions(&self, scenario: &LosScenario) -> Vec<Point3> {
        self.r1.iter().map(|&r| scenario.rx_point(r)).collect()
    }

    /// The same samples as a linear manifold in local coordinates.
    pub fn manifold(&self) -> Result<SampledManifold> {
        SampledManifold::new(
            self.r1.iter().map(|&r| [r, 0.0, 0.0]).collect(),
            self.weights.clone(),
            1,
            format!("receiver(L={})", self.aperture_l),
        )
    }
}

/// Slepian functions of the receiving segment at wavenumber `k`.
pub fn receiver_basis(grid: &ReceiverGrid, k: Wavenumber) -> Result<ConcentrationSpectrum> {
    let op = assemble(grid.manifold()?, k)?;
    solve(&op)
}

/// Fourier indices `−⌊N/2⌋ ..= ⌈N/2⌉ − 1`.
pub fn fourier_indices(n_terms: usize) -> impl Iterator<Item = i64> {
    let lo = -((n_terms / 2) as i64);
    let hi = n_terms.div_ceil(2) as i64 - 1;
    lo..=hi
}

/// `e^{j2π i r₁/L} / √L`.
#[inline]
pub fn fourier_mode(index: i64, r1: f64, aperture_l: f64) -> Complex64 {
    Complex64::from_polar(
        1.0 / aperture_l.sqrt(),
        2.0 * PI * index as f64 * r1 / aperture_l,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierExpansion {
    pub indices: Vec<i64>,
    pub coefficients: Vec<Complex64>,
}

impl FourierExpansion {
    pub fn coefficient(&self, index: i64) -> Option<Complex64> {
        self.indices
            .iter()
            .position(|&i| i == index)
            .map(|p| self.coefficients[p])
    }

    pub fn reconstruct(&self, grid: &ReceiverGrid) -> Vec<Complex64> {
        grid.r1()
            .iter()
            .map(|&r| {
                self.indices
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(&i, c)| c * fourier_mode(i, r, grid.aperture()))
                    .sum()
            })
            .collect()
    }
}

fn check_len(u: &[Complex64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} samples for {n} nodes",
            u.len()
        )));
    }
    Ok(())
}

/// Projection of `u` onto the first `n_terms` orthonormal exponentials.
pub fn fourier_coefficients(
    u: &[Complex64],
    grid: &ReceiverGrid,
    n_terms: usize,
) -> Result<FourierExpansion> {
    check_len(u, grid.len())?;
    if n_terms == 0 {
        return Err(Error::InvalidInput("need at least one Fourier term".into()));
    }
    let indices: Vec<i64> = fourier_indices(n_terms).collect();
    let coefficients = indices
        .iter()
        .map(|&i| {
            u.iter()
                .zip(grid.r1().iter().zip(grid.weights()))
                .map(|(uj, (&r, &w))| uj * fourier_mode(i, r, grid.aperture()).conj() * w)
                .sum()
        })
        .collect();
    Ok(FourierExpansion {
        indices,
        coefficients,
    })
}

/// `γ_i = Σ_j w_j u(r_j) ψ_i(r_j)` for the first `n_terms` Slepian functions.
pub fn slepian_coefficients(
    u: &[Complex64],
    basis: &ConcentrationSpectrum,
    n_terms: usize,
) -> Result<Vec<Complex64>> {
    let weights = basis.manifold().weights();
    check_len(u, weights.len())?;
    if n_terms > basis.len() {
        return Err(Error::InvalidInput(format!(
            "requested {n_terms} Slepian functions, basis has {}",
            basis.len()
        )));
    }
    Ok((0..n_terms)
        .map(|i| {
            u.iter()
                .zip(basis.slepian(i).iter().zip(weights))
                .map(|(uj, (psi, w))| uj * (psi * w))
                .sum()
        })
        .collect())
}

pub fn slepian_reconstruct(
    coefficients: &[Complex64],
    basis: &ConcentrationSpectrum,
) -> Vec<Complex64> {
    let n = basis.manifold().len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in coefficients.iter().enumerate() {
        for (o, psi) in out.iter_mut().zip(basis.slepian(i)) {
            *o += c * psi;
        }
    }
    out
}

/// `Σ w|u − û|² / Σ w|u|²`.
pub fn normalized_error(
    u: &[Complex64],
    reconstruction: &[Complex64],
    weights: &[f64],
) -> Result<f64> {
    check_len(u, weights.len())?;
    check_len(reconstruction, weights.len())?;
    let energy: f64 = u.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let misfit: f64 = u
        .iter()
        .zip(reconstruction)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b).norm_sqr())
        .sum();
    Ok(misfit / energy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    Parallel,
    RandomTilt,
}

fn default_mode() -> ScenarioMode {
    ScenarioMode::Parallel
}
fn default_d_range() -> [f64; 2] {
    [0.05, 0.25]
}
fn default_trials() -> usize {
    1000
}
fn default_n_values() -> Vec<usize> {
    (1..=20).collect()
}
fn default_degree() -> usize {
    8
}
fn default_rx_resolution() -> usize {
    512
}
fn default_aperture() -> f64 {
    0.05
}
fn default_beta() -> f64 {
    0.01
}

/// Monte-Carlo setup. Every field has a default, so `{}` is a valid config
/// reproducing the reference scenario (`L = 5β`, `β = 1 cm`, `d ∈ [5, 25] cm`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mode")]
    pub scenario_mode: ScenarioMode,
    #[serde(default = "default_d_range")]
    pub d_range: [f64; 2],
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_n_values", alias = "N_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_degree")]
    pub polynomial_degree: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_rx_resolution")]
    pub rx_resolution: usize,
    #[serde(default = "default_aperture")]
    pub aperture_l: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario_mode: default_mode(),
            d_range: default_d_range(),
            trials: default_trials(),
            n_values: default_n_values(),
            polynomial_degree: default_degree(),
            rng_seed: 0,
            rx_resolution: default_rx_resolution(),
            aperture_l: default_aperture(),
            beta: default_beta(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_values.is_empty() || self.n_values[0] == 0 {
            return bad("N values must be positive and non-empty".into());
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return bad("N values must be strictly ascending".into());
        }
        if self.rx_resolution < 2 || *self.n_values.last().unwrap() > self.rx_resolution {
            return bad(format!(
                "rx_resolution ({}) must be ≥ 2 and ≥ the largest N",
                self.rx_resolution
            ));
        }
        let [lo, hi] = self.d_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return bad(format!("invalid distance range [{lo}, {hi}]"));
        }
        if !(self.aperture_l.is_finite() && self.aperture_l > 0.0) {
            return bad(format!(
                "aperture must be positive, got {}",
                self.aperture_l
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("wavelength must be positive, got {}", self.beta));
        }
        Ok(())
    }

    pub fn rayleigh_distance(&self) -> f64 {
        self.aperture_l * self.aperture_l / (2.0 * self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Slepian,
    Fourier,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::Slepian => "slepian",
            Basis::Fourier => "fourier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub scenario: LosScenario,
    pub near_field: bool,
    pub resamples: usize,
    /// Indexed like `ExperimentConfig::n_values`.
    pub slepian_errors: Vec<f64>,
    pub fourier_errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub basis: Basis,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelExperimentReport {
    pub config: ExperimentConfig,
    pub propagation_model: String,
    pub rayleigh_distance: f64,
    pub near_field_trials: usize,
    pub far_field_trials: usize,
    pub resampled: usize,
    pub stats: Vec<ErrorStats>,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

impl ChannelExperimentReport {
    pub fn stats_for(&self, n: usize, basis: Basis) -> Option<&ErrorStats> {
        self.stats.iter().find(|s| s.n == n && s.basis == basis)
    }

    pub fn resample_rate(&self) -> f64 {
        self.resampled as f64 / (self.resampled + self.trials.len()) as f64
    }
}

/// Everything that does not change between trials.
struct TrialContext {
    grid: ReceiverGrid,
    basis: ConcentrationSpectrum,
    // Fourier modes for every index any requested N uses, keyed by index.
    modes: BTreeMap<i64, Vec<Complex64>>,
}

impl TrialContext {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let grid = ReceiverGrid::midpoint(config.aperture_l, config.rx_resolution)?;
        let k = Wavenumber::from_wavelength(config.beta)?;
        let basis = receiver_basis(&grid, k)?;
        let max_n = *config.n_values.last().expect("validated");
        let modes = fourier_indices(max_n)
            .map(|i| {
                let values = grid
                    .r1()
                    .iter()
                    .map(|&r| fourier_mode(i, r, grid.aperture()))
                    .collect();
                (i, values)
            })
            .collect();
        Ok(Self { grid, basis, modes })
    }

    fn errors(&self, u: &[Complex64], n_values: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.grid.weights();
        let max_n = *n_values.last().expect("validated");
        let gamma = slepian_coefficients(u, &self.basis, max_n)?;
        let mut slepian = Vec::with_capacity(n_values.len());
        let mut fourier = Vec::with_capacity(n_values.len());
        for &n in n_values {
            let recon = slepian_reconstruct(&gamma[..n], &self.basis);
            slepian.push(normalized_error(u, &recon, w)?);

            let mut recon = vec![Complex64::new(0.0, 0.0); u.len()];
            for i in fourier_indices(n) {
                let mode = &self.modes[&i];
                let coeff: Complex64 = u
                    .iter()
                    .zip(mode)
                    .zip(w)
                    .map(|((uj, m), wj)| uj * m.conj() * *wj)
                    .sum();
                for (r, m) in recon.iter_mut().zip(mode) {
                    *r += coeff * m;
                }
            }
            fourier.push(normalized_error(u, &recon, w)?);
        }
        Ok((slepian, fourier))
    }
}

fn run_trial(config: &ExperimentConfig, ctx: &TrialContext, trial: usize) -> Result<TrialRecord> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(trial as u64);
    let [lo, hi] = config.d_range;
    for resamples in 0..MAX_RESAMPLES {
        let distance_d = lo + (hi - lo) * rng.random::<f64>();
        let (theta_tx, theta_rx) = match config.scenario_mode {
            ScenarioMode::Parallel => (0.0, 0.0),
            ScenarioMode::RandomTilt => (
                2.0 * PI * rng.random::<f64>(),
                2.0 * PI * rng.random::<f64>(),
            ),
        };
        let current = draw_current(config.polynomial_degree, &mut rng);
        let scenario = LosScenario {
            aperture_l: config.aperture_l,
            beta: config.beta,
            theta_tx,
            theta_rx,
            distance_d,
        };
        let u = match los_field(&scenario, &current, &ctx.grid.positions(&scenario)) {
            Ok(u) => u,
            Err(Error::InvalidScenario(reason)) => {
                info!("trial {trial}: resampling ({reason})");
                continue;
            }
            Err(e) => return Err(e),
        };
        let (slepian_errors, fourier_errors) = ctx.errors(&u, &config.n_values)?;
        return Ok(TrialRecord {
            trial,
            scenario,
            near_field: scenario.is_near_field(),
            resamples,
            slepian_errors,
            fourier_errors,
        });
    }
    Err(Error::InvalidScenario(format!(
        "trial {trial}: no valid scenario after {MAX_RESAMPLES} draws"
    )))
}

/// Runs the Monte-Carlo comparison. Trial `t` draws from ChaCha stream `t`
/// of the master seed, so results do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ChannelExperimentReport> {
    config.validate()?;
    let ctx = Arc::new(TrialContext::new(config)?);
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &ctx, t))
        .collect::<Result<Vec<_>>>()?;

    let mut stats = Vec::with_capacity(2 * config.n_values.len());
    for (slot, &n) in config.n_values.iter().enumerate() {
        for basis in [Basis::Slepian, Basis::Fourier] {
            let errors = trials.iter().map(|t| match basis {
                Basis::Slepian => t.slepian_errors[slot],
                Basis::Fourier => t.fourier_errors[slot],
            });
            let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for e in errors {
                sum += e;
                min = min.min(e);
                max = max.max(e);
            }
            stats.push(ErrorStats {
                n,
                basis,
                mean: sum / trials.len() as f64,
                min,
                max,
            });
        }
    }

    let resampled: usize = trials.iter().map(|t| t.resamples).sum();
    let near_field_trials = trials.iter().filter(|t| t.near_field).count();
    let report = ChannelExperimentReport {
        config: config.clone(),
        propagation_model: PROPAGATION_MODEL.to_string(),
        rayleigh_distance: config.rayleigh_distance(),
        near_field_trials,
        far_field_trials: trials.len() - near_field_trials,
        resampled,
        stats,
        trials,
    };
    let rate = report.resample_rate();
    if rate > 0.01 {
        warn!(
            "resampled {resampled} invalid scenarios ({:.2}%)",
            100.0 * rate
        );
    } else {
        info!("resampled {resampled} invalid scenarios");
    }
    Ok(report)
}

/// `N,basis,mean,min,max`, ordered by N then basis.
pub fn write_report_csv<W: Write>(report: &ChannelExperimentReport, mut out: W) -> io::Result<()> {
    writeln!(out, "N,basis,mean,min,max")?;
    for s in &report.stats {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.n,
            s.basis.as_str(),
            s.mean,
            s.min,
            s.max
        )?;
    }
    Ok(())
}

/// One row per (trial, N).
pub fn write_trials_csv<W: Write>(report: &ChannelExperimentReport, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "trial,distance_d,theta_tx,theta_rx,near_field,resamples,N,slepian_error,fourier_error"
    )?;
    for t in &report.trials {
        for (slot, n) in report.config.n_values.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                t.trial,
                t.scenario.distance_d,
                t.scenario.theta_tx,
                t.scenario.theta_rx,
                t.near_field,
                t.resamples,
                n,
                t.slepian_errors[slot],
                t.fourier_errors[slot]
            )?;
        }
    }
    Ok(())
}

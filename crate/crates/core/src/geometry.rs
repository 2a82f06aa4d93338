//! Quadrature discretizations of antenna shapes.
//!
//! Every shape is reduced to a [`SampledManifold`]: a list of nodes on the
//! shape and positive weights such that `Σ w_j f(r_j) ≈ ∫_M f`. The four
//! built-in shapes share an equivalent aperture `L`:
//!
//! | kind       | set                                                  | measure |
//! |------------|------------------------------------------------------|---------|
//! | linear     | `r1 ∈ [0, L]`                                        | `L`     |
//! | circular   | `[r1, r2] = L/2 [cos θ, sin θ]`                      | `πL`    |
//! | square     | `r1, r2 ∈ [0, L]`                                    | `L²`    |
//! | paraboloid | `[r1, r2] = ½√(L(L − r3)) [cos θ, sin θ]`, `r3 ∈ [0, L]` | see [`paraboloid_area`] |

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh;

/// Position in meters.
pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Linear,
    Circular,
    Square,
    Paraboloid,
    Custom,
}

impl GeometryKind {
    pub const BUILT_IN: [GeometryKind; 4] = [
        GeometryKind::Linear,
        GeometryKind::Circular,
        GeometryKind::Square,
        GeometryKind::Paraboloid,
    ];

    /// Node count used when the caller does not ask for one. Square and
    /// paraboloid match the 4096- and 4500-cell meshes of the reference study.
    pub fn default_resolution(self) -> usize {
        match self {
            GeometryKind::Linear | GeometryKind::Circular => 1024,
            GeometryKind::Square => 4096,
            GeometryKind::Paraboloid => 4500,
            GeometryKind::Custom => 0,
        }
    }

    pub fn intrinsic_dim(self) -> Option<usize> {
        match self {
            GeometryKind::Linear | GeometryKind::Circular => Some(1),
            GeometryKind::Square | GeometryKind::Paraboloid => Some(2),
            GeometryKind::Custom => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Linear => "linear",
            GeometryKind::Circular => "circular",
            GeometryKind::Square => "square",
            GeometryKind::Paraboloid => "paraboloid",
            GeometryKind::Custom => "custom",
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "l-lis" | "line" => Ok(GeometryKind::Linear),
            "circular" | "c-lis" | "circle" => Ok(GeometryKind::Circular),
            "square" | "s-lis" => Ok(GeometryKind::Square),
            "paraboloid" | "p-lis" => Ok(GeometryKind::Paraboloid),
            "custom" | "mesh" => Ok(GeometryKind::Custom),
            other => Err(Error::UnsupportedGeometry(other.to_string())),
        }
    }
}

/// Rule used along straight parameter axes (linear and square shapes).
///
/// Curved shapes always use the midpoint/centroid rule; on the circle that
/// rule is already spectrally accurate because the integrand is periodic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    Midpoint,
    GaussLegendre,
}

impl FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "midpoint" => Ok(QuadratureRule::Midpoint),
            "gauss-legendre" | "gauss" | "gl" => Ok(QuadratureRule::GaussLegendre),
            other => Err(Error::InvalidInput(format!(
                "unknown quadrature rule '{other}'"
            ))),
        }
    }
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuadratureRule::Midpoint => "midpoint",
            QuadratureRule::GaussLegendre => "gauss-legendre",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    /// Equivalent aperture `L` in meters.
    pub aperture_l: f64,
    /// Node (cell) count target.
    pub resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_path: Option<PathBuf>,
    #[serde(default)]
    pub quadrature: QuadratureRule,
}

impl GeometrySpec {
    pub fn new(kind: GeometryKind, aperture_l: f64, resolution: usize) -> Self {
        Self {
            kind,
            aperture_l,
            resolution,
            mesh_path: None,
            quadrature: QuadratureRule::Midpoint,
        }
    }

    pub fn with_default_resolution(kind: GeometryKind, aperture_l: f64) -> Self {
        Self::new(kind, aperture_l, kind.default_resolution())
    }

    pub fn custom(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: GeometryKind::Custom,
            aperture_l: 1.0,
            resolution: 2,
            mesh_path: Some(path.into()),
            quadrature: QuadratureRule::Midpoint,
        }
    }

    pub fn with_quadrature(mut self, rule: QuadratureRule) -> Self {
        self.quadrature = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aperture_l.is_finite() && self.aperture_l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "aperture must be positive and finite, got {}",
                self.aperture_l
            )));
        }
        if self.kind != GeometryKind::Custom && self.resolution < 2 {
            return Err(Error::InvalidInput(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        if self.kind == GeometryKind::Custom && self.mesh_path.is_none() {
            return Err(Error::InvalidInput(
                "custom geometry requires a mesh path".into(),
            ));
        }
        if self.quadrature == QuadratureRule::GaussLegendre
            && !matches!(self.kind, GeometryKind::Linear | GeometryKind::Square)
        {
            return Err(Error::InvalidInput(format!(
                "gauss-legendre quadrature is only available for linear and square shapes, not {}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Nodes and positive quadrature weights discretizing a curve, surface or volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledManifold {
    nodes: Vec<Point3>,
    weights: Vec<f64>,
    dim: usize,
    label: String,
}

impl SampledManifold {
    pub fn new(
        nodes: Vec<Point3>,
        weights: Vec<f64>,
        dim: usize,
        label: impl Into<String>,
    ) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.is_empty() {
            return Err(Error::InvalidInput(
                "manifold needs at least one node".into(),
            ));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if let Some(i) = nodes.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput(format!("node {i} is not finite")));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weight {i} must be strictly positive, got {}",
                weights[i]
            )));
        }
        Ok(Self {
            nodes,
            weights,
            dim,
            label: label.into(),
        })
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total quadrature measure `Σ w_j`.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn translated(&self, t: Point3) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
            .collect();
        Self {
            nodes,
            weights: self.weights.clone(),
            dim: self.dim,
            label: self.label.clone(),
        }
    }

    /// Applies `p ↦ R p` to every node. `rotation` is row-major.
    pub fn rotated(&self, rotation: [[f64; 3]; 3]) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|p| {
                [
                    dot(&rotation[0], p),
                    dot(&rotation[1], p),
                    dot(&rotation[2], p),
                ]
            })
            .collect();
        Self {
            nodes,
            weights: self.weights.clone(),
            dim: self.dim,
            label: self.label.clone(),
        }
    }

    /// Multiplies coordinates by `s` and weights by `s^dim`.
    pub fn scaled(&self, s: f64) -> Self {
        let factor = s.powi(self.dim as i32);
        Self {
            nodes: self
                .nodes
                .iter()
                .map(|p| [p[0] * s, p[1] * s, p[2] * s])
                .collect(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            dim: self.dim,
            label: self.label.clone(),
        }
    }
}

pub fn build_manifold(spec: &GeometrySpec) -> Result<SampledManifold> {
    spec.validate()?;
    let l = spec.aperture_l;
    let n = spec.resolution;
    match spec.kind {
        GeometryKind::Linear => {
            let (s, w) = segment_rule(spec.quadrature, n, l);
            let nodes = s.into_iter().map(|x| [x, 0.0, 0.0]).collect();
            SampledManifold::new(nodes, w, 1, format!("linear(L={l})"))
        }
        GeometryKind::Circular => circle(l, n),
        GeometryKind::Square => square(spec.quadrature, l, n),
        GeometryKind::Paraboloid => {
            let (bands, azimuth) = paraboloid_grid(n)?;
            paraboloid(l, bands, azimuth)
        }
        GeometryKind::Custom => {
            let path = spec.mesh_path.as_ref().expect("validated above");
            mesh::load_custom_mesh(path)
        }
    }
}

fn segment_rule(rule: QuadratureRule, n: usize, l: f64) -> (Vec<f64>, Vec<f64>) {
    match rule {
        QuadratureRule::Midpoint => {
            let h = l / n as f64;
            ((0..n).map(|i| (i as f64 + 0.5) * h).collect(), vec![h; n])
        }
        QuadratureRule::GaussLegendre => {
            let (x, w) = gauss_legendre(n);
            (
                x.iter().map(|t| 0.5 * l * (t + 1.0)).collect(),
                w.iter().map(|wi| 0.5 * l * wi).collect(),
            )
        }
    }
}

fn circle(l: f64, n: usize) -> Result<SampledManifold> {
    let radius = 0.5 * l;
    let dtheta = 2.0 * PI / n as f64;
    let nodes = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dtheta;
            [radius * t.cos(), radius * t.sin(), 0.0]
        })
        .collect();
    SampledManifold::new(
        nodes,
        vec![PI * l / n as f64; n],
        1,
        format!("circular(L={l})"),
    )
}

fn square(rule: QuadratureRule, l: f64, n: usize) -> Result<SampledManifold> {
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n || m < 2 {
        return Err(Error::InvalidInput(format!(
            "square mesh needs a perfect-square cell count of at least 4, got {n}"
        )));
    }
    let (s, w) = segment_rule(rule, m, l);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (y, wy) in s.iter().zip(&w) {
        for (x, wx) in s.iter().zip(&w) {
            nodes.push([*x, *y, 0.0]);
            weights.push(wx * wy);
        }
    }
    SampledManifold::new(nodes, weights, 2, format!("square(L={l})"))
}

/// Split a paraboloid cell budget into meridian bands × azimuth cells,
/// aiming for roughly 1.8 azimuth cells per band (4500 → 50 × 90).
pub fn paraboloid_grid(cells: usize) -> Result<(usize, usize)> {
    let target = (cells as f64 / 1.8).sqrt();
    let bands = (1..=cells)
        .filter(|b| cells % b == 0)
        .min_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(1);
    let azimuth = cells / bands;
    if bands < 2 || azimuth < 3 {
        return Err(Error::InvalidInput(format!(
            "cannot mesh a paraboloid with {cells} cells; need a count with a factorization bands × azimuth, bands ≥ 2, azimuth ≥ 3"
        )));
    }
    Ok((bands, azimuth))
}

// The meridian is parametrized by its radius ρ ∈ [0, L/2] with z = L − 4ρ²/L,
// so dz/dρ = −aρ with a = 8/L and the arclength element is √(1 + a²ρ²) dρ.

fn meridian_arclength(rho: f64, a: f64) -> f64 {
    let q = (1.0 + a * a * rho * rho).sqrt();
    0.5 * (rho * q + (a * rho).asinh() / a)
}

fn meridian_radius_at(s: f64, a: f64, rho_max: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, rho_max);
    let mut rho = s.clamp(lo, hi);
    for _ in 0..100 {
        let f = meridian_arclength(rho, a) - s;
        if f.abs() <= 1e-15 * s.max(1e-300) {
            break;
        }
        if f > 0.0 {
            hi = rho;
        } else {
            lo = rho;
        }
        let step = f / (1.0 + a * a * rho * rho).sqrt();
        let next = rho - step;
        rho = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    rho
}

/// Area of the surface of revolution swept by radii `ρ ∈ [rho_lo, rho_hi]`.
fn band_area(rho_lo: f64, rho_hi: f64, a: f64) -> f64 {
    let f = |rho: f64| (1.0 + a * a * rho * rho).powf(1.5);
    2.0 * PI / (3.0 * a * a) * (f(rho_hi) - f(rho_lo))
}

/// Lateral area of the paraboloid with aperture `l`.
pub fn paraboloid_area(l: f64) -> f64 {
    band_area(0.0, 0.5 * l, 8.0 / l)
}

fn paraboloid(l: f64, bands: usize, azimuth: usize) -> Result<SampledManifold> {
    let a = 8.0 / l;
    let rho_max = 0.5 * l;
    let total = meridian_arclength(rho_max, a);
    let ds = total / bands as f64;
    let edges: Vec<f64> = (0..=bands)
        .map(|b| match b {
            0 => 0.0,
            b if b == bands => rho_max,
            b => meridian_radius_at(b as f64 * ds, a, rho_max),
        })
        .collect();
    let dtheta = 2.0 * PI / azimuth as f64;
    let mut nodes = Vec::with_capacity(bands * azimuth);
    let mut weights = Vec::with_capacity(bands * azimuth);
    for b in 0..bands {
        let rho = meridian_radius_at((b as f64 + 0.5) * ds, a, rho_max);
        let z = l - 4.0 * rho * rho / l;
        let w = band_area(edges[b], edges[b + 1], a) / azimuth as f64;
        for k in 0..azimuth {
            let t = (k as f64 + 0.5) * dtheta;
            nodes.push([rho * t.cos(), rho * t.sin(), z]);
            weights.push(w);
        }
    }
    SampledManifold::new(nodes, weights, 2, format!("paraboloid(L={l})"))
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

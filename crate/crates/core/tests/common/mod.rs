//! Independent reference computations shared by the integration tests.
//! None of these call into the kernel, eigen or geometry modules.

#![allow(dead_code)]

use std::f64::consts::PI;

use faer::{Mat, Side};

/// `|M|` of the paraboloid with aperture 1, frozen from [`adaptive_simpson`]
/// on the surface-of-revolution integral (tolerance 1e-14).
pub const PARABOLOID_AREA_L1: f64 = 2.261_056_449_838_213;

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫₀^L 2π ρ(z) √(1 + ρ′(z)²) dz` with `ρ(z) = ½√(L(L − z))`.
pub fn paraboloid_area_oracle(l: f64) -> f64 {
    // ρ√(1+ρ′²) = √(ρ² + (ρρ′)²) and ρρ′ = −L/8, which removes the apex singularity.
    let integrand = |z: f64| 2.0 * PI * (0.25 * l * (l - z) + l * l / 64.0).sqrt();
    adaptive_simpson(&integrand, 0.0, l, 1e-14)
}

/// Eigenvalues (descending) of `(W/π) sinc(W(t − t′))` on `[−T/2, T/2]`,
/// midpoint rule with `n` nodes.
pub fn prolate_eigenvalues(w: f64, t: f64, n: usize) -> Vec<f64> {
    let h = t / n as f64;
    let nodes: Vec<f64> = (0..n).map(|i| -0.5 * t + (i as f64 + 0.5) * h).collect();
    let a = Mat::<f64>::from_fn(n, n, |i, j| {
        let x = w * (nodes[i] - nodes[j]);
        let s = if x == 0.0 { 1.0 } else { x.sin() / x };
        (w / PI) * s * h
    });
    let mut values: Vec<f64> = a
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("oracle eigensolve");
    values.reverse();
    values
}

/// `(2π)⁻³ κ² ∬_{S²} e^{jκ d·Δ} dΘ` by a product midpoint rule in (cos θ, φ).
pub fn kernel_by_sphere_quadrature(delta: [f64; 3], kappa: f64, n_u: usize, n_phi: usize) -> f64 {
    let mut re = 0.0;
    let hu = 2.0 / n_u as f64;
    let hp = 2.0 * PI / n_phi as f64;
    for i in 0..n_u {
        let u = -1.0 + (i as f64 + 0.5) * hu;
        let s = (1.0 - u * u).sqrt();
        for j in 0..n_phi {
            let phi = (j as f64 + 0.5) * hp;
            let d = [s * phi.cos(), s * phi.sin(), u];
            let phase = kappa * (d[0] * delta[0] + d[1] * delta[1] + d[2] * delta[2]);
            re += phase.cos() * hu * hp;
        }
    }
    kappa * kappa * re / (8.0 * PI * PI * PI)
}

/// Rotation by `angle` about the unit `axis` (Rodrigues).
pub fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let [x, y, z] = axis.map(|v| v / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Least-squares fit of `y ≈ c₀ + c₁x + c₂x²` via the normal equations, returning R².
pub fn quadratic_r_squared(x: &[f64], y: &[f64]) -> f64 {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let p = [1.0, xi, xi * xi];
        for a in 0..3 {
            r[a] += p[a] * yi;
            for b in 0..3 {
                m[a][b] += p[a] * p[b];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let coef: Vec<f64> = (0..3)
        .map(|c| {
            let mut mc = m;
            for row in 0..3 {
                mc[row][c] = r[row];
            }
            det(&mc) / d
        })
        .collect();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let fit = coef[0] + coef[1] * xi + coef[2] * xi * xi;
        ss_res += (yi - fit).powi(2);
        ss_tot += (yi - mean).powi(2);
    }
    1.0 - ss_res / ss_tot
}

//! Cell-centered colatitude-longitude discretization of the unit sphere.
//!
//! Nodes sit at θ_j = (j + 1/2)·Δθ, φ_i = i·Δφ, so no node lies on a pole;
//! quadrature weights are exact cell areas (they sum to 4π to roundoff), and
//! the flux-form Laplacian closes naturally at the poles because the polar
//! cell edge has zero length.

use serde::{Deserialize, Serialize};

use crate::divisor::{chordal, Divisor};
use crate::error::{Result, SslError};

/// Non-node rotations used to push marked points away from the poles.
const REORIENT_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub d_theta: f64,
    pub d_phi: f64,
    /// Cell-center colatitudes (j + 1/2)Δθ.
    pub thetas: Vec<f64>,
    /// Longitudes i·Δφ.
    pub phis: Vec<f64>,
    /// Exact cell area per θ-row: Δφ·(cos θ_{j−1/2} − cos θ_{j+1/2}).
    pub row_weights: Vec<f64>,
    /// Geodesic radius of the disks around marked points excluded from
    /// sup-norm residuals and interpolation-based diagnostics.
    pub exclusion_radius: f64,
    /// Marked points the exclusions are measured from.
    pub exclusions: Vec<[f64; 3]>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 8 || n_phi < 8 {
            return Err(SslError::Domain(format!(
                "grid {n_theta}x{n_phi} too coarse; need at least 8x8"
            )));
        }
        if n_phi % 2 != 0 {
            return Err(SslError::Domain(
                "longitude count must be even (antipodal symmetry)".into(),
            ));
        }
        let d_theta = std::f64::consts::PI / n_theta as f64;
        let d_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let thetas: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * d_theta).collect();
        let phis: Vec<f64> = (0..n_phi).map(|i| i as f64 * d_phi).collect();
        let row_weights: Vec<f64> = (0..n_theta)
            .map(|j| {
                let lo = j as f64 * d_theta;
                let hi = (j as f64 + 1.0) * d_theta;
                d_phi * (lo.cos() - hi.cos())
            })
            .collect();
        Ok(SphereGrid {
            n_theta,
            n_phi,
            d_theta,
            d_phi,
            thetas,
            phis,
            row_weights,
            exclusion_radius: 4.0 * d_theta,
            exclusions: Vec::new(),
        })
    }

    /// Parse `"256x128"` as (n_theta, n_phi).
    pub fn parse_spec(spec: &str) -> Result<(usize, usize)> {
        let parts: Vec<&str> = spec.split(['x', 'X']).collect();
        if parts.len() != 2 {
            return Err(SslError::Format(format!("grid spec {spec:?}: want NxM")));
        }
        let n_theta = parts[0]
            .trim()
            .parse()
            .map_err(|_| SslError::Format(format!("bad grid dimension {:?}", parts[0])))?;
        let n_phi = parts[1]
            .trim()
            .parse()
            .map_err(|_| SslError::Format(format!("bad grid dimension {:?}", parts[1])))?;
        Ok((n_theta, n_phi))
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Resolution scale: the colatitude spacing. Exclusion radii and minimum
    /// diagnostic radii are expressed in multiples of this.
    pub fn h(&self) -> f64 {
        self.d_theta
    }

    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.n_phi + i
    }

    pub fn node(&self, j: usize, i: usize) -> [f64; 3] {
        let (st, ct) = self.thetas[j].sin_cos();
        let (sp, cp) = self.phis[i].sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn node_flat(&self, idx: usize) -> [f64; 3] {
        self.node(idx / self.n_phi, idx % self.n_phi)
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.row_weights[idx / self.n_phi]
    }

    /// Register exclusion disks around the divisor's marked points.
    pub fn with_exclusions(mut self, d: &Divisor) -> Self {
        self.exclusions = d.points().to_vec();
        self
    }

    pub fn is_excluded(&self, x: &[f64; 3]) -> bool {
        self.exclusions
            .iter()
            .any(|p| geodesic(p, x) < self.exclusion_radius)
    }

    /// Indices of nodes inside some exclusion disk.
    pub fn excluded_nodes(&self) -> Vec<usize> {
        if self.exclusions.is_empty() {
            return Vec::new();
        }
        (0..self.len())
            .filter(|idx| self.is_excluded(&self.node_flat(*idx)))
            .collect()
    }

    /// Smallest colatitude margin any marked point keeps from the two poles.
    pub fn pole_margin(&self, d: &Divisor) -> f64 {
        d.points()
            .iter()
            .map(|p| {
                let theta = p[2].clamp(-1.0, 1.0).acos();
                theta.min(std::f64::consts::PI - theta)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn geodesic(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    dot.acos()
}

/// Rotation matrix (as rows) sending unit vector `from` to unit vector `to`.
pub fn rotation_between(from: &[f64; 3], to: &[f64; 3]) -> [[f64; 3]; 3] {
    let v = cross(from, to);
    let c = dot(from, to);
    let s2 = dot(&v, &v);
    if s2 < 1e-30 {
        if c > 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        // antipodal: rotate by pi around any axis orthogonal to `from`
        let axis = orthonormal_to(from);
        return rotation_about(&axis, std::f64::consts::PI);
    }
    let s = s2.sqrt();
    let k = [v[0] / s, v[1] / s, v[2] / s];
    rotation_about_cs(&k, s, c)
}

pub fn rotation_about(axis: &[f64; 3], angle: f64) -> [[f64; 3]; 3] {
    rotation_about_cs(axis, angle.sin(), angle.cos())
}

fn rotation_about_cs(k: &[f64; 3], s: f64, c: f64) -> [[f64; 3]; 3] {
    let mut r = [[0.0f64; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let eye = if a == b { 1.0 } else { 0.0 };
            r[a][b] = eye * c + (1.0 - c) * k[a] * k[b] + s * cross_matrix_entry(a, b, k);
        }
    }
    r
}

fn cross_matrix_entry(a: usize, b: usize, k: &[f64; 3]) -> f64 {
    match (a, b) {
        (0, 1) => -k[2],
        (1, 0) => k[2],
        (0, 2) => k[1],
        (2, 0) => -k[1],
        (1, 2) => -k[0],
        (2, 1) => k[0],
        _ => 0.0,
    }
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn orthonormal_to(v: &[f64; 3]) -> [f64; 3] {
    let candidate = if v[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let w = cross(v, &candidate);
    let n = dot(&w, &w).sqrt();
    [w[0] / n, w[1] / n, w[2] / n]
}

/// Find a rotation putting every marked point at least 6Δθ from the poles.
/// Identity when the divisor is already oriented acceptably.
pub fn reorient_divisor(
    d: &Divisor,
    grid: &SphereGrid,
) -> Result<(Divisor, Option<[[f64; 3]; 3]>)> {
    let margin = 6.0 * grid.d_theta;
    let fine = |dd: &Divisor| dd.is_empty() || grid.pole_margin(dd) > margin;
    if fine(d) {
        return Ok((d.clone(), None));
    }
    for k in 1..=REORIENT_ATTEMPTS {
        let angle = 0.37 + 0.213 * k as f64;
        let tilt = 0.29 + 0.171 * k as f64;
        let r1 = rotation_about(&[0.0, 0.0, 1.0], angle);
        let r2 = rotation_about(&[0.0, 1.0, 0.0], tilt);
        let r = mat_mul(&r2, &r1);
        let rotated = d.rotated(&r);
        if fine(&rotated) {
            return Ok((rotated, Some(r)));
        }
    }
    Err(SslError::Numerical(
        "could not orient marked points away from the grid poles".into(),
    ))
}

pub fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Deterministic pairwise reduction; the summation tree depends only on the
/// slice length, so totals are bitwise reproducible.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn distinct_chordal(points: &[[f64; 3]]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min(chordal(&points[i], &points[j]));
        }
    }
    best
}

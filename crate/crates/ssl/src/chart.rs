//! Stereographic chart transfer. The chart at `center` projects from the
//! antipode, so the plane radius is ρ = tan(θ/2) in geodesic colatitude θ
//! from the center, the equator sits at ρ = 1, and the round metric is
//! e^{2v₀} g_euc with v₀ = log(2/(1+ρ²)). A sphere field u becomes
//! ũ = u∘x + v₀, which turns the curvature equation into its Euclidean form
//! on the chart.
//!
//! Fields with a known logarithmic part are sampled as smooth-part
//! interpolation plus the exact singular sum, so circles may pass close to a
//! cone point without losing accuracy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::divisor::{chordal, Divisor};
use crate::error::{Result, SslError};
use crate::field::SphereField;
use crate::grid::{cross, dot, orthonormal_to, SphereGrid};

/// Default chart validity: the open hemisphere.
pub const DEFAULT_MAX_RHO: f64 = 1.0;
/// Tensor Lagrange stencil width (6 points per direction, O(h^6) on smooth fields).
const STENCIL: usize = 6;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChartFrame {
    pub center: [f64; 3],
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl ChartFrame {
    pub fn at(center: &[f64; 3]) -> ChartFrame {
        let e1 = orthonormal_to(center);
        let e2 = cross(center, &e1);
        ChartFrame {
            center: *center,
            e1,
            e2,
        }
    }

    /// Sphere point of chart coordinates (ρ, α).
    pub fn point(&self, rho: f64, alpha: f64) -> [f64; 3] {
        let theta = 2.0 * rho.atan();
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = alpha.sin_cos();
        [
            ct * self.center[0] + st * (ca * self.e1[0] + sa * self.e2[0]),
            ct * self.center[1] + st * (ca * self.e1[1] + sa * self.e2[1]),
            ct * self.center[2] + st * (ca * self.e1[2] + sa * self.e2[2]),
        ]
    }

    /// d(point)/dρ along the ray of angle α.
    pub fn point_drho(&self, rho: f64, alpha: f64) -> [f64; 3] {
        let theta = 2.0 * rho.atan();
        let dtheta = 2.0 / (1.0 + rho * rho);
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = alpha.sin_cos();
        [
            dtheta * (-st * self.center[0] + ct * (ca * self.e1[0] + sa * self.e2[0])),
            dtheta * (-st * self.center[1] + ct * (ca * self.e1[1] + sa * self.e2[1])),
            dtheta * (-st * self.center[2] + ct * (ca * self.e1[2] + sa * self.e2[2])),
        ]
    }

    /// Chart coordinates of a sphere point (ρ = tan(θ/2), α).
    pub fn coordinates(&self, x: &[f64; 3]) -> (f64, f64) {
        let c = dot(x, &self.center).clamp(-1.0, 1.0);
        let theta = c.acos();
        let rho = (theta / 2.0).tan();
        let a1 = dot(x, &self.e1);
        let a2 = dot(x, &self.e2);
        let alpha = a2.atan2(a1).rem_euclid(2.0 * std::f64::consts::PI);
        (rho, alpha)
    }
}

/// Conformal log-factor of the chart: v₀(ρ) = log(2/(1+ρ²)).
pub fn log_factor(rho: f64) -> f64 {
    (2.0 / (1.0 + rho * rho)).ln()
}

pub fn log_factor_drho(rho: f64) -> f64 {
    -2.0 * rho / (1.0 + rho * rho)
}

/// High-order interpolation of grid values at an arbitrary sphere point.
/// Rows past a pole continue across it (θ → −θ, φ → φ + π), so the stencil
/// is valid everywhere.
pub fn interpolate(grid: &SphereGrid, values: &[f64], x: &[f64; 3]) -> f64 {
    let theta = x[2].clamp(-1.0, 1.0).acos();
    let phi = x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI);
    let tf = theta / grid.d_theta - 0.5;
    let pf = phi / grid.d_phi;
    let jstart = tf.floor() as isize - (STENCIL as isize / 2 - 1);
    let mut row_vals = [0.0f64; STENCIL];
    for (k, row) in row_vals.iter_mut().enumerate() {
        let j = jstart + k as isize;
        let (jj, shift) = reflect_row(grid, j);
        *row = lagrange_periodic(grid, values, jj, pf + shift as f64);
    }
    lagrange_uniform(&row_vals, tf - jstart as f64)
}

fn reflect_row(grid: &SphereGrid, j: isize) -> (usize, usize) {
    let nt = grid.n_theta as isize;
    if j < 0 {
        ((-1 - j) as usize, grid.n_phi / 2)
    } else if j >= nt {
        ((2 * nt - 1 - j) as usize, grid.n_phi / 2)
    } else {
        (j as usize, 0)
    }
}

/// 6-point Lagrange along a periodic φ-row at fractional index `pf`.
fn lagrange_periodic(grid: &SphereGrid, values: &[f64], j: usize, pf: f64) -> f64 {
    let np = grid.n_phi;
    let istart = pf.floor() as isize - (STENCIL as isize / 2 - 1);
    let mut vals = [0.0f64; STENCIL];
    for (k, v) in vals.iter_mut().enumerate() {
        let i = (istart + k as isize).rem_euclid(np as isize) as usize;
        *v = values[j * np + i];
    }
    lagrange_uniform(&vals, pf - istart as f64)
}

/// Barycentric Lagrange on the uniform nodes 0..5 at parameter t.
fn lagrange_uniform(vals: &[f64; STENCIL], t: f64) -> f64 {
    const W: [f64; STENCIL] = [1.0, -5.0, 10.0, -10.0, 5.0, -1.0];
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..STENCIL {
        let dist = t - k as f64;
        if dist.abs() < 1e-12 {
            return vals[k];
        }
        let w = W[k] / dist;
        num += w * vals[k];
        den += w;
    }
    num / den
}

/// Samples chart quantities of a field that may carry a divisor's logarithmic
/// part: the smooth carrier is interpolated, the singular sum is exact.
pub struct ChartSampler<'a> {
    pub frame: ChartFrame,
    smooth: &'a SphereField,
    divisor: Option<&'a Divisor>,
    beta: Vec<f64>,
}

impl<'a> ChartSampler<'a> {
    /// `smooth` is the whole field when `divisor` is `None`, otherwise the
    /// regular part w of u = S + w.
    pub fn new(
        smooth: &'a SphereField,
        divisor: Option<&'a Divisor>,
        center: &[f64; 3],
    ) -> ChartSampler<'a> {
        let beta = divisor.map(|d| d.beta_f64()).unwrap_or_default();
        ChartSampler {
            frame: ChartFrame::at(center),
            smooth,
            divisor,
            beta,
        }
    }

    pub fn smooth_at(&self, rho: f64, alpha: f64) -> f64 {
        let x = self.frame.point(rho, alpha);
        interpolate(&self.smooth.grid, &self.smooth.values, &x)
    }

    /// Exact singular sum S(x(ρ,α)) and its ρ-derivative.
    pub fn singular_at(&self, rho: f64, alpha: f64) -> (f64, f64) {
        let Some(d) = self.divisor else {
            return (0.0, 0.0);
        };
        let x = self.frame.point(rho, alpha);
        let xp = self.frame.point_drho(rho, alpha);
        let mut s = 0.0;
        let mut ds = 0.0;
        for (p, b) in d.points().iter().zip(&self.beta) {
            let diff = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
            let r2 = dot(&diff, &diff);
            s += b * 0.5 * r2.ln();
            ds += b * dot(&xp, &diff) / r2;
        }
        (s, ds)
    }

    /// ũ(ρ, α) = u + v₀ with u = smooth + S.
    pub fn u_tilde(&self, rho: f64, alpha: f64) -> f64 {
        let (s, _) = self.singular_at(rho, alpha);
        self.smooth_at(rho, alpha) + s + log_factor(rho)
    }

    /// One full circle of ũ samples.
    pub fn circle(&self, rho: f64, n_angle: usize) -> Vec<f64> {
        (0..n_angle)
            .map(|k| {
                let alpha = 2.0 * std::f64::consts::PI * k as f64 / n_angle as f64;
                self.u_tilde(rho, alpha)
            })
            .collect()
    }

    /// ∂ũ/∂ρ on a circle: smooth part by five-point finite differences of the
    /// interpolant, singular and conformal parts analytically.
    pub fn circle_drho(&self, rho: f64, n_angle: usize) -> Vec<f64> {
        let delta = 5e-3 * rho;
        (0..n_angle)
            .map(|k| {
                let alpha = 2.0 * std::f64::consts::PI * k as f64 / n_angle as f64;
                let f = |r: f64| self.smooth_at(r, alpha);
                let smooth_d = (-f(rho + 2.0 * delta) + 8.0 * f(rho + delta)
                    - 8.0 * f(rho - delta)
                    + f(rho - 2.0 * delta))
                    / (12.0 * delta);
                let (_, ds) = self.singular_at(rho, alpha);
                smooth_d + ds + log_factor_drho(rho)
            })
            .collect()
    }
}

/// Chart snapshot of a field: ũ on concentric circles, the smooth carrier on
/// the same circles, and the per-circle conformal log term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartView {
    pub frame: ChartFrame,
    pub radii: Vec<f64>,
    pub n_angle: usize,
    pub u_tilde: Vec<Vec<f64>>,
    pub smooth: Vec<Vec<f64>>,
    pub log_factors: Vec<f64>,
    pub max_rho: f64,
}

/// Geometric radius ladder from r_min to r_max.
pub fn geometric_radii(r_min: f64, r_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && r_min > 0.0 && r_max > r_min);
    let ratio = (r_max / r_min).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| r_min * ratio.powi(k as i32)).collect()
}

/// Sample a field on chart circles around `center`. `divisor` marks fields
/// given as a regular part w of u = S + w.
pub fn to_chart(
    f: &SphereField,
    center: &[f64; 3],
    divisor: Option<&Divisor>,
    radii: &[f64],
    n_angle: usize,
    max_rho: f64,
) -> Result<ChartView> {
    for r in radii {
        if *r <= 0.0 || *r > max_rho {
            return Err(SslError::Numerical(format!(
                "chart radius {r} outside validity (0, {max_rho}]"
            )));
        }
    }
    let sampler = ChartSampler::new(f, divisor, center);
    let mut u_tilde = Vec::with_capacity(radii.len());
    let mut smooth = Vec::with_capacity(radii.len());
    for r in radii {
        u_tilde.push(sampler.circle(*r, n_angle));
        smooth.push(
            (0..n_angle)
                .map(|k| {
                    let alpha = 2.0 * std::f64::consts::PI * k as f64 / n_angle as f64;
                    sampler.smooth_at(*r, alpha)
                })
                .collect(),
        );
    }
    Ok(ChartView {
        frame: sampler.frame,
        radii: radii.to_vec(),
        n_angle,
        u_tilde,
        smooth,
        log_factors: radii.iter().map(|r| log_factor(*r)).collect(),
        max_rho,
    })
}

impl ChartView {
    /// Inverse transfer: interpolate the smooth carrier back onto grid nodes
    /// that fall inside the sampled annulus. Radii must be geometric (uniform
    /// in log ρ) with at least six circles.
    pub fn sphere_values(&self, grid: &Arc<SphereGrid>) -> Result<Vec<Option<f64>>> {
        if self.radii.len() < STENCIL {
            return Err(SslError::Numerical(
                "inverse chart transfer needs at least 6 circles".into(),
            ));
        }
        let logs: Vec<f64> = self.radii.iter().map(|r| r.ln()).collect();
        let dlog = logs[1] - logs[0];
        for w in logs.windows(2) {
            if ((w[1] - w[0]) - dlog).abs() > 1e-9 * dlog.abs() {
                return Err(SslError::Numerical(
                    "inverse chart transfer requires geometric radii".into(),
                ));
            }
        }
        let dalpha = 2.0 * std::f64::consts::PI / self.n_angle as f64;
        let mut out = vec![None; grid.len()];
        for idx in 0..grid.len() {
            let x = grid.node_flat(idx);
            let (rho, alpha) = self.frame.coordinates(&x);
            if rho <= 0.0 {
                continue;
            }
            let tf = (rho.ln() - logs[0]) / dlog;
            // interior only: the radial stencil must not extrapolate
            if tf < (STENCIL / 2 - 1) as f64 || tf > (self.radii.len() - STENCIL / 2) as f64 {
                continue;
            }
            let pf = alpha / dalpha;
            let jstart = (tf.floor() as isize - (STENCIL as isize / 2 - 1))
                .clamp(0, (self.radii.len() - STENCIL) as isize) as usize;
            let mut ring_vals = [0.0f64; STENCIL];
            for (k, rv) in ring_vals.iter_mut().enumerate() {
                let ring = &self.smooth[jstart + k];
                let istart = pf.floor() as isize - (STENCIL as isize / 2 - 1);
                let mut vals = [0.0f64; STENCIL];
                for (kk, v) in vals.iter_mut().enumerate() {
                    let i = (istart + kk as isize).rem_euclid(self.n_angle as isize) as usize;
                    *v = ring[i];
                }
                *rv = lagrange_uniform(&vals, pf - istart as f64);
            }
            out[idx] = Some(lagrange_uniform(&ring_vals, tf - jstart as f64));
        }
        Ok(out)
    }
}

/// Spectral derivative of a periodic sample vector (d/dα).
pub fn spectral_derivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let half = n / 2;
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    // direct real DFT; circle sample counts are small
    let mut a = vec![0.0f64; half + 1];
    let mut b = vec![0.0f64; half + 1];
    for k in 1..half {
        let mut ak = 0.0;
        let mut bk = 0.0;
        for (idx, s) in samples.iter().enumerate() {
            let (sn, cs) = (tau * k as f64 * idx as f64).sin_cos();
            ak += s * cs;
            bk += s * sn;
        }
        a[k] = 2.0 * ak / n as f64;
        b[k] = 2.0 * bk / n as f64;
    }
    (0..n)
        .map(|idx| {
            let mut d = 0.0;
            for k in 1..half {
                let (sn, cs) = (tau * k as f64 * idx as f64).sin_cos();
                d += k as f64 * (-a[k] * sn + b[k] * cs);
            }
            d
        })
        .collect()
}

/// Trapezoidal (= spectrally accurate) mean over a periodic circle.
pub fn circle_mean(samples: &[f64]) -> f64 {
    crate::grid::pairwise_sum(samples) / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;
    use std::f64::consts::PI;

    fn grid(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(nt, np).unwrap())
    }

    #[test]
    fn interpolation_reproduces_smooth_field() {
        let g = grid(96, 96);
        let f = SphereField::from_fn(g.clone(), "smooth", |p| {
            (1.3 * p[0] + 0.4 * p[1]).sin() * (0.9 * p[2]).cos()
        });
        let mut sup = 0.0f64;
        for k in 0..500 {
            let t = 0.15 + 2.8 * (k as f64 / 500.0);
            let ph = 3.9 * k as f64;
            let x = [t.sin() * ph.cos(), t.sin() * ph.sin(), t.cos()];
            let exact = (1.3 * x[0] + 0.4 * x[1]).sin() * (0.9 * x[2]).cos();
            sup = sup.max((interpolate(&g, &f.values, &x) - exact).abs());
        }
        // O(h^6); the 1e-8 contract case (coordinate field round trip) is below
        assert!(sup < 1e-7, "interpolation sup error {sup}");
    }

    #[test]
    fn interpolation_works_across_poles() {
        let g = grid(64, 64);
        let f = SphereField::from_fn(g.clone(), "harmonic", |p| p[0] * p[2] + 0.5 * p[2]);
        for t in [0.01f64, 0.03, PI - 0.01] {
            let x = [t.sin() * 0.3f64.cos(), t.sin() * 0.3f64.sin(), t.cos()];
            let exact = x[0] * x[2] + 0.5 * x[2];
            assert!((interpolate(&g, &f.values, &x) - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn round_sphere_chart_matches_closed_form() {
        // u ≡ 0: ũ = log(2/(1+ρ²)); at the equator circle ρ=1 we get log 1 = 0
        let g = grid(48, 48);
        let zero = SphereField::constant(g, 0.0, "zero");
        let center = [0.7f64, 0.1, 0.3];
        let n = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
        let center = [center[0] / n, center[1] / n, center[2] / n];
        let view = to_chart(&zero, &center, None, &[0.25, 0.5, 1.0], 64, 1.0).unwrap();
        for (ri, r) in view.radii.iter().enumerate() {
            let expected = log_factor(*r);
            for v in &view.u_tilde[ri] {
                assert!((v - expected).abs() < 1e-12);
            }
        }
        assert!(view.u_tilde[2].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn chart_euclidean_equation_on_round_sphere() {
        // −Δ_euc ũ = e^{2ũ} for ũ = log(2/(1+ρ²)); assemble the planar
        // Laplacian from the chart machinery's own derivatives
        let g = grid(96, 96);
        let zero = SphereField::constant(g, 0.0, "zero");
        let center = [0.0, 0.0, 1.0];
        let sampler = ChartSampler::new(&zero, None, &center);
        for rho in [0.3f64, 0.6, 0.9] {
            let n = 64;
            let up = sampler.circle_drho(rho, n);
            let delta = 5e-3 * rho;
            let d2: Vec<f64> = {
                let um = sampler.circle_drho(rho - delta, n);
                let upp = sampler.circle_drho(rho + delta, n);
                (0..n).map(|i| (upp[i] - um[i]) / (2.0 * delta)).collect()
            };
            let u0 = sampler.circle(rho, n);
            let dalpha2 = {
                let d1 = spectral_derivative(&u0);
                spectral_derivative(&d1)
            };
            for i in 0..n {
                let lap = d2[i] + up[i] / rho + dalpha2[i] / (rho * rho);
                let rhs = -(2.0 * u0[i]).exp();
                assert!(
                    (lap - rhs).abs() < 1e-4,
                    "rho={rho}, i={i}: lap {lap} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn chart_round_trip_on_coordinate_field() {
        let g = grid(96, 96);
        let f = SphereField::from_fn(g.clone(), "z", |p| p[2]);
        let center = [0.48f64, -0.36, 0.8];
        let nrm = (center[0] * center[0] + center[1] * center[1] + center[2] * center[2]).sqrt();
        let center = [center[0] / nrm, center[1] / nrm, center[2] / nrm];
        let radii = geometric_radii(0.08, 1.0, 72);
        let view = to_chart(&f, &center, None, &radii, 96, 1.0).unwrap();
        let back = view.sphere_values(&g).unwrap();
        let mut count = 0;
        let mut sup = 0.0f64;
        for idx in 0..g.len() {
            if let Some(v) = back[idx] {
                count += 1;
                sup = sup.max((v - f.values[idx]).abs());
            }
        }
        assert!(count > 400, "annulus covered {count} nodes");
        assert!(sup < 1e-8, "round-trip sup error {sup}");
    }

    #[test]
    fn chart_rejects_radius_beyond_validity() {
        let g = grid(32, 32);
        let zero = SphereField::constant(g, 0.0, "zero");
        let err = to_chart(&zero, &[0.0, 0.0, 1.0], None, &[0.5, 1.4], 32, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn singular_part_is_exact_on_chart() {
        // field w identically zero with one cone: ũ = β ln‖x−p‖ + v0 exactly
        let g = grid(64, 64);
        let p = [1.0, 0.0, 0.0];
        let d = Divisor::new(vec![p], vec![rat(1, 2)]).unwrap();
        let w = SphereField::constant(g, 0.0, "w");
        let sampler = ChartSampler::new(&w, Some(&d), &p);
        let rho = 0.2;
        let x = sampler.frame.point(rho, 1.1);
        let expected = 0.5 * chordal(&x, &p).ln() + log_factor(rho);
        assert!((sampler.u_tilde(rho, 1.1) - expected).abs() < 1e-13);
    }

    #[test]
    fn spectral_derivative_of_harmonics() {
        let n = 64;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                (3.0 * a).sin() + 0.5 * (5.0 * a).cos()
            })
            .collect();
        let d = spectral_derivative(&samples);
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            let exact = 3.0 * (3.0 * a).cos() - 2.5 * (5.0 * a).sin();
            assert!((d[k] - exact).abs() < 1e-10);
        }
    }
}

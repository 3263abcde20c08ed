//! Closed-form reference solutions: the two-cone constant-curvature metric
//! (equal cones at antipodal points) and the radial plane profile every
//! smooth bubble converges to. Both serve as independent oracles for the
//! solver and the diagnostics.

use std::sync::Arc;

use crate::divisor::Divisor;
use crate::error::{Result, SslError};
use crate::field::SphereField;
use crate::grid::{geodesic, SphereGrid};
use crate::rat::Rat;

/// Chart profile of the two-cone metric with coefficient β at 0 and ∞:
/// ũ(ρ) = log(2(β+1)) + β ln ρ − ln(1 + ρ^{2β+2}), which solves
/// −Δ ũ = e^{2ũ} away from the cones with total mass 4π(1+β).
pub fn football_profile(beta: f64, rho: f64) -> f64 {
    let p = 2.0 * beta + 2.0;
    (2.0 * (beta + 1.0)).ln() + beta * rho.ln() - ln_one_plus_pow(rho, p)
}

/// d ũ/dρ of the chart profile.
pub fn football_profile_drho(beta: f64, rho: f64) -> f64 {
    let p = 2.0 * beta + 2.0;
    beta / rho - p * pow_over_one_plus_pow(rho, p) / rho
}

/// ln(1 + ρ^p), stable for large ρ.
fn ln_one_plus_pow(rho: f64, p: f64) -> f64 {
    if rho > 1.0 {
        p * rho.ln() + rho.powf(-p).ln_1p()
    } else {
        rho.powf(p).ln_1p()
    }
}

/// ρ^p/(1+ρ^p), stable for large ρ.
fn pow_over_one_plus_pow(rho: f64, p: f64) -> f64 {
    if rho > 1.0 {
        1.0 / (1.0 + rho.powf(-p))
    } else {
        let t = rho.powf(p);
        t / (1.0 + t)
    }
}

/// Sphere-side value of the two-cone solution with cones β at `axis` and its
/// antipode, optionally composed with the boost z ↦ λz of the chart at
/// `axis` (every boost of a solution is again a solution).
pub fn football_u(beta: f64, axis: &[f64; 3], boost: f64, x: &[f64; 3]) -> f64 {
    let theta = geodesic(axis, x);
    let rho = (theta / 2.0).tan().max(1e-300);
    football_profile(beta, boost * rho) + boost.ln() - crate::chart::log_factor(rho)
}

/// The two-cone solution sampled on a grid.
pub fn football_exact(grid: &Arc<SphereGrid>, beta: f64, axis: &[f64; 3]) -> SphereField {
    SphereField::from_fn(grid.clone(), "football", |x| football_u(beta, axis, 1.0, x))
}

/// The divisor the two-cone solution represents.
pub fn football_divisor(beta: Rat, axis: [f64; 3]) -> Result<Divisor> {
    Divisor::new(
        vec![axis, [-axis[0], -axis[1], -axis[2]]],
        vec![beta.clone(), beta],
    )
}

/// Radially symmetric plane solution of u'' + u'/r = −K₀ e^{2u},
/// u(0) = u'(0) = 0, integrated by the classical fourth-order one-step
/// method, with the cumulative curvature 2π ∫₀^r K₀ e^{2u} s ds carried
/// along. The exact solution is −log(1 + K₀ r²/4) with total mass 4π.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub cumulative: Vec<f64>,
}

pub fn radial_plane_solve(k0: f64, r_max: f64, n: usize) -> Result<RadialProfile> {
    if k0 <= 0.0 {
        return Err(SslError::Domain("plane curvature must be positive".into()));
    }
    if n < 2 || r_max <= 0.0 {
        return Err(SslError::Domain(
            "need n >= 2 steps and positive radius".into(),
        ));
    }
    let h = r_max / n as f64;
    // state y = (u, v = u', m = cumulative mass)
    let rhs = |r: f64, y: &[f64; 3]| -> [f64; 3] {
        let e = (2.0 * y[0]).exp();
        let dv = if r == 0.0 {
            // u''(0) = −K₀/2 from the symmetric expansion
            -0.5 * k0 * e
        } else {
            -k0 * e - y[1] / r
        };
        [y[1], dv, 2.0 * std::f64::consts::PI * k0 * e * r]
    };
    let mut y = [0.0f64; 3];
    let mut r = Vec::with_capacity(n + 1);
    let mut u = Vec::with_capacity(n + 1);
    let mut m = Vec::with_capacity(n + 1);
    r.push(0.0);
    u.push(0.0);
    m.push(0.0);
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = rhs(t, &y);
        let y2 = add_scaled(&y, &k1, 0.5 * h);
        let k2 = rhs(t + 0.5 * h, &y2);
        let y3 = add_scaled(&y, &k2, 0.5 * h);
        let k3 = rhs(t + 0.5 * h, &y3);
        let y4 = add_scaled(&y, &k3, h);
        let k4 = rhs(t + h, &y4);
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        r.push(t + h);
        u.push(y[0]);
        m.push(y[2]);
    }
    Ok(RadialProfile {
        r,
        u,
        cumulative: m,
    })
}

fn add_scaled(y: &[f64; 3], dy: &[f64; 3], s: f64) -> [f64; 3] {
    [y[0] + s * dy[0], y[1] + s * dy[1], y[2] + s * dy[2]]
}

//! Discrete operators over sphere fields: the free-space kernel that peels
//! Dirac masses off the singular equation, the logarithmic singular part of a
//! divisor, the flux-form Laplacian, and quadrature (global, geodesic-disk,
//! and the singularity-aware mass quadrature used by the diagnostics).

use std::sync::Arc;

use crate::divisor::{chordal, Divisor};
use crate::error::{Result, SslError};
use crate::field::SphereField;
use crate::grid::{geodesic, pairwise_sum, SphereGrid};

/// Chordal distance below which evaluation counts as "at the point".
const SINGULAR_EVAL_EPS: f64 = 1e-13;
/// Cells whose center lies within this many Δθ of a marked point are
/// subdivided during mass quadrature.
const SUBSAMPLE_RADIUS_CELLS: f64 = 8.0;
const SUBSAMPLE_FACTOR: usize = 8;

/// Kernel of the Laplace operator with mean-zero forcing:
/// G_p(x) = −(1/2π)·ln‖x−p‖ satisfies −Δ G_p = δ_p − 1/(4π).
/// No mean-zero normalization is applied to G itself.
pub fn green(x: &[f64; 3], p: &[f64; 3]) -> Result<f64> {
    let r = chordal(x, p);
    if r < SINGULAR_EVAL_EPS {
        return Err(SslError::Numerical(
            "kernel evaluated at its singular point".into(),
        ));
    }
    Ok(-r.ln() / (2.0 * std::f64::consts::PI))
}

pub fn green_field(grid: Arc<SphereGrid>, p: &[f64; 3]) -> Result<SphereField> {
    let mut values = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        values.push(green(&grid.node_flat(idx), p)?);
    }
    Ok(SphereField {
        grid,
        values,
        name: "green".into(),
        units: String::new(),
    })
}

/// Logarithmic singular part of a divisor: S(x) = Σᵢ βᵢ ln‖x−pᵢ‖ and the
/// conformal density h = e^{2S} = Πᵢ ‖x−pᵢ‖^{2βᵢ}. Nodes that coincide with a
/// marked point are declared singular (NaN) and listed.
#[derive(Debug, Clone)]
pub struct SingularPart {
    pub s: SphereField,
    pub h: SphereField,
    pub declared_singular: Vec<usize>,
}

pub fn singular_part(grid: Arc<SphereGrid>, d: &Divisor) -> SingularPart {
    let beta = d.beta_f64();
    let mut s_values = Vec::with_capacity(grid.len());
    let mut declared = Vec::new();
    for idx in 0..grid.len() {
        let x = grid.node_flat(idx);
        match s_at_point(d, &beta, &x) {
            Some(v) => s_values.push(v),
            None => {
                s_values.push(f64::NAN);
                declared.push(idx);
            }
        }
    }
    let h_values: Vec<f64> = s_values.iter().map(|s| (2.0 * s).exp()).collect();
    SingularPart {
        s: SphereField {
            grid: grid.clone(),
            values: s_values,
            name: "singular-part".into(),
            units: String::new(),
        },
        h: SphereField {
            grid,
            values: h_values,
            name: "conformal-density".into(),
            units: String::new(),
        },
        declared_singular: declared,
    }
}

/// S at an arbitrary point; `None` when the point sits on a marked point.
pub fn s_at_point(d: &Divisor, beta_f64: &[f64], x: &[f64; 3]) -> Option<f64> {
    let mut s = 0.0;
    for (p, b) in d.points().iter().zip(beta_f64) {
        let r = chordal(x, p);
        if r < SINGULAR_EVAL_EPS {
            return None;
        }
        s += b * r.ln();
    }
    Some(s)
}

/// Flux coefficients of the finite-volume Laplacian, precomputed per grid.
pub struct LaplaceStencil {
    /// sin(edge colatitude)·Δφ/Δθ for edges 0..=n_theta; exactly 0 at poles.
    pub edge: Vec<f64>,
    /// Δθ/(sin θ_j Δφ) per row.
    pub azim: Vec<f64>,
    pub inv_area: Vec<f64>,
}

impl LaplaceStencil {
    pub fn new(grid: &SphereGrid) -> Self {
        let n = grid.n_theta;
        let mut edge = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let v = if k == 0 || k == n {
                0.0
            } else {
                (k as f64 * grid.d_theta).sin() * grid.d_phi / grid.d_theta
            };
            edge.push(v);
        }
        let azim: Vec<f64> = grid
            .thetas
            .iter()
            .map(|t| grid.d_theta / (t.sin() * grid.d_phi))
            .collect();
        let inv_area: Vec<f64> = grid.row_weights.iter().map(|w| 1.0 / w).collect();
        LaplaceStencil {
            edge,
            azim,
            inv_area,
        }
    }

    /// Apply the Laplacian to raw values, writing into `out`.
    pub fn apply(&self, grid: &SphereGrid, values: &[f64], out: &mut [f64]) {
        let (nt, np) = (grid.n_theta, grid.n_phi);
        for j in 0..nt {
            let row = j * np;
            let north = self.edge[j];
            let south = self.edge[j + 1];
            let e = self.azim[j];
            let inv_a = self.inv_area[j];
            for i in 0..np {
                let c = values[row + i];
                let mut acc = 0.0;
                if north != 0.0 {
                    acc += north * (values[row - np + i] - c);
                }
                if south != 0.0 {
                    acc += south * (values[row + np + i] - c);
                }
                let left = values[row + (i + np - 1) % np];
                let right = values[row + (i + 1) % np];
                acc += e * (left - 2.0 * c + right);
                out[row + i] = acc * inv_a;
            }
        }
    }
}

/// Second-order discrete Laplace-Beltrami operator.
pub fn laplace_beltrami(f: &SphereField) -> SphereField {
    let stencil = LaplaceStencil::new(&f.grid);
    let mut out = vec![0.0; f.values.len()];
    stencil.apply(&f.grid, &f.values, &mut out);
    SphereField {
        grid: f.grid.clone(),
        values: out,
        name: format!("laplacian({})", f.name),
        units: String::new(),
    }
}

/// ∫ f dV over the sphere (midpoint rule on exact cell areas, pairwise sum).
pub fn quadrature(f: &SphereField) -> f64 {
    let terms: Vec<f64> = (0..f.values.len())
        .map(|i| f.grid.weight(i) * f.values[i])
        .collect();
    pairwise_sum(&terms)
}

/// Fraction of a cell at geodesic distance `dist` from the disk center that
/// lies inside the disk of radius `r`; linear transition across the local
/// cell size keeps complementary disks exactly additive.
fn boundary_fraction(dist: f64, r: f64, halfwidth: f64) -> f64 {
    (0.5 + (r - dist) / (2.0 * halfwidth)).clamp(0.0, 1.0)
}

fn local_halfwidth(grid: &SphereGrid, theta: f64) -> f64 {
    let along_phi = theta.sin().abs() * grid.d_phi;
    0.5 * (grid.d_theta * grid.d_theta + along_phi * along_phi).sqrt()
}

/// ∫_{B_r(x)} f dV over a geodesic disk, with fractional boundary cells.
pub fn disk_quadrature(f: &SphereField, x: &[f64; 3], r: f64) -> f64 {
    let grid = &f.grid;
    let mut terms = Vec::new();
    for idx in 0..f.values.len() {
        let node = grid.node_flat(idx);
        let dist = geodesic(&node, x);
        let hw = local_halfwidth(grid, grid.thetas[idx / grid.n_phi]);
        let frac = boundary_fraction(dist, r, hw);
        if frac > 0.0 {
            terms.push(grid.weight(idx) * frac * f.values[idx]);
        }
    }
    pairwise_sum(&terms)
}

/// ∫ K·h·e^{2w} dV (over the sphere or a geodesic disk), where h = e^{2S} is
/// the divisor's conformal density evaluated analytically. Cells near marked
/// points are subdivided with exact h at the subpoints and a first-order
/// Taylor model for the smooth factors, so integrable singularities r^{2β}
/// are captured well below the tolerance of the diagnostics.
pub fn mass_quadrature(
    w: &SphereField,
    d: &Divisor,
    k: Option<&SphereField>,
    disk: Option<(&[f64; 3], f64)>,
) -> f64 {
    let grid = &w.grid;
    let beta = d.beta_f64();
    let sub_radius = SUBSAMPLE_RADIUS_CELLS * grid.d_theta;
    let np = grid.n_phi;
    let mut terms = Vec::new();
    for idx in 0..w.values.len() {
        let j = idx / np;
        let i = idx % np;
        let node = grid.node_flat(idx);
        let near_singular = d
            .points()
            .iter()
            .any(|p| geodesic(p, &node) < sub_radius);
        let hw = local_halfwidth(grid, grid.thetas[j]);
        if !near_singular {
            let frac = match disk {
                Some((x, r)) => boundary_fraction(geodesic(&node, x), r, hw),
                None => 1.0,
            };
            if frac > 0.0 {
                let h = match s_at_point(d, &beta, &node) {
                    Some(s) => (2.0 * s).exp(),
                    None => continue,
                };
                let kv = k.map_or(1.0, |kf| kf.values[idx]);
                terms.push(grid.weight(idx) * frac * kv * h * (2.0 * w.values[idx]).exp());
            }
            continue;
        }
        // subdivide the cell; smooth factors by nodal value + central gradient
        let w0 = w.values[idx];
        let (dw_dt, dw_dp) = nodal_gradient(w, j, i);
        let (k0, dk_dt, dk_dp) = match k {
            Some(kf) => {
                let (a, b) = nodal_gradient(kf, j, i);
                (kf.values[idx], a, b)
            }
            None => (1.0, 0.0, 0.0),
        };
        let theta_lo = j as f64 * grid.d_theta;
        let phi_lo = grid.phis[i] - 0.5 * grid.d_phi;
        let sub = SUBSAMPLE_FACTOR;
        let dphi_sub = grid.d_phi / sub as f64;
        for jj in 0..sub {
            let t_lo = theta_lo + jj as f64 * grid.d_theta / sub as f64;
            let t_hi = t_lo + grid.d_theta / sub as f64;
            let t_mid = 0.5 * (t_lo + t_hi);
            let area = dphi_sub * (t_lo.cos() - t_hi.cos());
            for ii in 0..sub {
                let p_mid = phi_lo + (ii as f64 + 0.5) * dphi_sub;
                let (st, ct) = t_mid.sin_cos();
                let (sp, cp) = p_mid.sin_cos();
                let sub_node = [st * cp, st * sp, ct];
                let h = match s_at_point(d, &beta, &sub_node) {
                    Some(s) => (2.0 * s).exp(),
                    None => continue,
                };
                let dt = t_mid - grid.thetas[j];
                let dp = p_mid - grid.phis[i];
                let w_sub = w0 + dw_dt * dt + dw_dp * dp;
                let k_sub = k0 + dk_dt * dt + dk_dp * dp;
                let frac = match disk {
                    Some((x, r)) => {
                        let hw_sub = hw / sub as f64;
                        boundary_fraction(geodesic(&sub_node, x), r, hw_sub)
                    }
                    None => 1.0,
                };
                if frac > 0.0 {
                    terms.push(area * frac * k_sub * h * (2.0 * w_sub).exp());
                }
            }
        }
    }
    pairwise_sum(&terms)
}

fn nodal_gradient(f: &SphereField, j: usize, i: usize) -> (f64, f64) {
    let grid = &f.grid;
    let np = grid.n_phi;
    let at = |jj: usize, ii: usize| f.values[jj * np + ii];
    let d_dt = if j == 0 {
        (at(1, i) - at(0, i)) / grid.d_theta
    } else if j == grid.n_theta - 1 {
        (at(j, i) - at(j - 1, i)) / grid.d_theta
    } else {
        (at(j + 1, i) - at(j - 1, i)) / (2.0 * grid.d_theta)
    };
    let d_dp = (at(j, (i + 1) % np) - at(j, (i + np - 1) % np)) / (2.0 * grid.d_phi);
    (d_dt, d_dp)
}

/// Weighted Rayleigh quotient ⟨f, Δf⟩ / ⟨f, f⟩ for eigenvalue checks.
pub fn rayleigh_quotient(f: &SphereField) -> f64 {
    let lap = laplace_beltrami(f);
    let num: Vec<f64> = (0..f.values.len())
        .map(|i| f.grid.weight(i) * f.values[i] * lap.values[i])
        .collect();
    let den: Vec<f64> = (0..f.values.len())
        .map(|i| f.grid.weight(i) * f.values[i] * f.values[i])
        .collect();
    pairwise_sum(&num) / pairwise_sum(&den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divisor::test_support::generic_points;
    use crate::rat::rat;
    use std::f64::consts::PI;

    fn grid(nt: usize, np: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(nt, np).unwrap())
    }

    #[test]
    fn green_at_antipode_is_maximal_chord() {
        let x = [0.0, 0.0, 1.0];
        let p = [0.0, 0.0, -1.0];
        let v = green(&x, &p).unwrap();
        assert!((v - (-(2.0f64.ln()) / (2.0 * PI))).abs() < 1e-15);
        assert!(green(&x, &x).is_err());
    }

    #[test]
    fn green_integral_closed_form() {
        // ∫ G_p dV = 1 − 2 ln 2 (the integrand's log singularity is
        // integrable; midpoint quadrature converges like h²·log h)
        let g = grid(128, 128);
        let p = [0.6f64.sin() * 0.9f64.cos(), 0.6f64.sin() * 0.9f64.sin(), 0.6f64.cos()];
        let gf = green_field(g, &p).unwrap();
        let total = quadrature(&gf);
        let expected = 1.0 - 2.0 * 2.0f64.ln();
        assert!(
            (total - expected).abs() < 2e-3,
            "got {total}, want {expected}"
        );
    }

    #[test]
    fn green_discrete_laplacian_is_quarter_inv_pi_away_from_pole() {
        let g = grid(96, 96);
        let p = [1.0, 0.0, 0.0];
        let gf = green_field(g.clone(), &p).unwrap();
        let lap = laplace_beltrami(&gf);
        let mut sup = 0.0f64;
        for idx in 0..g.len() {
            let j = idx / g.n_phi;
            // interior rows; the polar flux closure is first-order on
            // non-zonal fields (an O(h^2)-area region, harmless globally)
            if j < 2 || j >= g.n_theta - 2 {
                continue;
            }
            if geodesic(&g.node_flat(idx), &p) > 0.7 {
                sup = sup.max((lap.values[idx] - 1.0 / (4.0 * PI)).abs());
            }
        }
        // O(h^2) truncation (the constant grows like the kernel's fourth
        // derivative toward the singular point)
        assert!(sup < 5.0 * g.d_theta * g.d_theta, "sup residual {sup}");
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid(24, 24);
        let f = SphereField::constant(g, 3.25, "c");
        let lap = laplace_beltrami(&f);
        let sup = lap.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(sup < 1e-12);
    }

    #[test]
    fn laplacian_degree_one_harmonic() {
        // zonal harmonic z has eigenvalue −l(l+1) = −2; sup error O(h²)
        for (nt, np) in [(48usize, 48usize), (96, 96)] {
            let g = grid(nt, np);
            let f = SphereField::from_fn(g.clone(), "z", |p| p[2]);
            let lap = laplace_beltrami(&f);
            let mut sup = 0.0f64;
            for idx in 0..g.len() {
                sup = sup.max((lap.values[idx] + 2.0 * f.values[idx]).abs());
            }
            assert!(
                sup < 4.0 * g.d_theta * g.d_theta,
                "{nt}x{np}: sup {sup} vs h^2 {}",
                g.d_theta * g.d_theta
            );
        }
    }

    #[test]
    fn laplacian_eigenvalues_low_degrees() {
        let g = grid(96, 96);
        // mixed harmonics of degree 1..4 via Rayleigh quotients
        let harmonics: Vec<(i32, Box<dyn Fn(&[f64; 3]) -> f64>)> = vec![
            (1, Box::new(|p: &[f64; 3]| p[0] + 0.3 * p[2])),
            (2, Box::new(|p: &[f64; 3]| 1.5 * p[2] * p[2] - 0.5 + 0.4 * p[0] * p[1])),
            (3, Box::new(|p: &[f64; 3]| 2.5 * p[2].powi(3) - 1.5 * p[2])),
            (4, Box::new(|p: &[f64; 3]| {
                (35.0 * p[2].powi(4) - 30.0 * p[2] * p[2] + 3.0) / 8.0
            })),
        ];
        let h2 = g.d_theta * g.d_theta;
        for (l, f) in harmonics {
            let field = SphereField::from_fn(g.clone(), "ylm", f);
            let lam = rayleigh_quotient(&field);
            let exact = -(l as f64) * (l as f64 + 1.0);
            assert!(
                (lam - exact).abs() < 12.0 * (l as f64).powi(4) * h2,
                "l={l}: discrete {lam} vs {exact}"
            );
        }
    }

    #[test]
    fn laplacian_refinement_reduces_error() {
        // Y2 zonal: halving h must cut the sup error by at least 3.5x
        let mut sups = Vec::new();
        for nt in [48usize, 96] {
            let g = grid(nt, nt);
            let f = SphereField::from_fn(g.clone(), "y2", |p| 1.5 * p[2] * p[2] - 0.5);
            let lap = laplace_beltrami(&f);
            let mut sup = 0.0f64;
            for idx in 0..g.len() {
                sup = sup.max((lap.values[idx] + 6.0 * f.values[idx]).abs());
            }
            sups.push(sup);
        }
        assert!(
            sups[0] / sups[1] >= 3.5,
            "refinement ratio {} from sups {:?}",
            sups[0] / sups[1],
            sups
        );
    }

    #[test]
    fn quadrature_of_one_is_sphere_area() {
        let g = grid(64, 64);
        let f = SphereField::constant(g, 1.0, "one");
        let total = quadrature(&f);
        assert!((total - 4.0 * PI).abs() / (4.0 * PI) < 1e-12);
    }

    #[test]
    fn quadrature_of_odd_field_vanishes() {
        let g = grid(64, 64);
        // antipodally antisymmetric: odd-degree polynomial in the coordinates
        let f = SphereField::from_fn(g, "odd", |p| p[2].powi(3) - 0.3 * p[0] + p[1] * p[2] * p[0]);
        assert!(quadrature(&f).abs() < 1e-10);
    }

    #[test]
    fn quadrature_of_chordal_distance() {
        // closed form: ∫ ‖x−p‖ dV = 16π/3 (mean chord 4/3 times area)
        let g = grid(128, 128);
        let p = generic_points(1)[0];
        let f = SphereField::from_fn(g, "chord", |x| chordal(x, &p));
        let total = quadrature(&f);
        let expected = 16.0 * PI / 3.0;
        assert!(
            (total - expected).abs() / expected < 1e-4,
            "got {total}, want {expected}"
        );
    }

    #[test]
    fn disk_quadrature_cap_area() {
        let g = grid(96, 96);
        let f = SphereField::constant(g, 1.0, "one");
        let x = [0.55f64.sin(), 0.0, 0.55f64.cos()];
        for r in [0.4, 0.9, 1.6] {
            let got = disk_quadrature(&f, &x, r);
            let expected = 2.0 * PI * (1.0 - r.cos());
            assert!(
                (got - expected).abs() / expected < 2e-3,
                "r={r}: got {got}, want {expected}"
            );
        }
    }

    #[test]
    fn disk_quadrature_complementary_caps_are_additive() {
        let g = grid(48, 48);
        let f = SphereField::from_fn(g, "smooth", |p| 1.0 + 0.5 * p[0] - 0.2 * p[1] * p[2]);
        let x = [0.8f64.sin(), 0.0, 0.8f64.cos()];
        let anti = [-x[0], -x[1], -x[2]];
        let r = 0.7;
        let total = quadrature(&f);
        let a = disk_quadrature(&f, &x, r);
        let b = disk_quadrature(&f, &anti, PI - r);
        assert!((a + b - total).abs() < 1e-10 * total.abs().max(1.0));
    }

    #[test]
    fn singular_part_trivial_cases() {
        let g = grid(32, 32);
        let empty = Divisor::empty();
        let sp = singular_part(g.clone(), &empty);
        assert!(sp.s.values.iter().all(|v| *v == 0.0));
        assert!(sp.h.values.iter().all(|v| *v == 1.0));
        assert!(sp.declared_singular.is_empty());

        // single beta = 1 marked point: at the antipode S = ln 2
        let p = generic_points(1)[0];
        let d = Divisor::new(vec![p], vec![rat(1, 1)]).unwrap();
        let beta = d.beta_f64();
        let anti = [-p[0], -p[1], -p[2]];
        let s = s_at_point(&d, &beta, &anti).unwrap();
        assert!((s - 2.0f64.ln()).abs() < 1e-14);
        assert!(s_at_point(&d, &beta, &p).is_none());
    }

    #[test]
    fn mass_quadrature_matches_closed_form_for_half_cone() {
        // h = ‖x−p‖ for beta = 1/2: ∫ h dV = 16π/3, singular-cell subsampling on
        let g = grid(64, 64);
        let p = generic_points(1)[0];
        let d = Divisor::new(vec![p], vec![rat(1, 2)]).unwrap();
        let w = SphereField::constant(g, 0.0, "w0");
        let total = mass_quadrature(&w, &d, None, None);
        let expected = 16.0 * PI / 3.0;
        assert!(
            (total - expected).abs() / expected < 2e-4,
            "got {total}, want {expected}"
        );
    }

    #[test]
    fn mass_quadrature_negative_cone_density() {
        // beta = −1/2 : ∫ ‖x−p‖^{−1} dV = ∫ (2 sin(θ/2))^{−1} dV = 4π
        let g = grid(96, 96);
        let p = generic_points(1)[0];
        let d = Divisor::new(vec![p], vec![rat(-1, 2)]).unwrap();
        let w = SphereField::constant(g, 0.0, "w0");
        let total = mass_quadrature(&w, &d, None, None);
        let expected = 4.0 * PI;
        assert!(
            (total - expected).abs() / expected < 2e-3,
            "got {total}, want {expected}"
        );
    }
}

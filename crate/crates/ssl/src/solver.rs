//! Newton continuation solver for the singular prescribed-curvature equation
//! −Δu = K e^{2u} − 1 − 2π Σ βᵢ δ_{pᵢ} on the sphere.
//!
//! The Dirac masses are handled analytically: writing u = S + w with the
//! logarithmic part S of the divisor (−ΔS = −2π Σ βᵢ δ_{pᵢ} + ½Σβᵢ), the
//! regular part solves the smooth equation
//!
//!   −Δw = K h e^{2w} − ½χ,   h = e^{2S},
//!
//! whose constant right-hand side makes the discrete solvability (mean)
//! condition hold structurally. Newton steps use a banded direct solve with
//! partial pivoting (the grid stencil has bandwidth n_phi) and a damped line
//! search; targets away from the solvable anchor (β = 0, K ≡ 1, w ≡ 0) are
//! reached by a linear continuation path with warm starts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::chart::interpolate;
use crate::divisor::Divisor;
use crate::error::{Result, SslError};
use crate::field::SphereField;
use crate::grid::{mat_mul, pairwise_sum, reorient_divisor, SphereGrid};
use crate::ops::{mass_quadrature, quadrature, singular_part, LaplaceStencil};
use crate::rat::{rat, to_f64, Rat};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveParams {
    /// Residual sup-norm target over nodes outside the exclusion disks.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Smallest accepted line-search fraction (backtracking halves from 1).
    pub min_step: f64,
    /// Stages of the default anchor continuation β(τ) = τ·β, K(τ) = 1+τ(K−1).
    pub continuation_steps: usize,
    /// Mean(u) below this flags a collapse candidate ...
    pub collapse_mean_u: f64,
    /// ... when the area has also shrunk below this fraction of 2πχ.
    pub collapse_area_fraction: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            newton_tol: 1e-10,
            max_newton: 50,
            min_step: (2.0f64).powi(-20),
            continuation_steps: 8,
            collapse_mean_u: -10.0,
            collapse_area_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Collapsed,
}

/// Prescribed curvature: a constant, a closure of the point, or a field
/// sampled by interpolation. Evaluation composes with the solver's internal
/// reorientation, so callers never see rotated coordinates.
#[derive(Clone)]
pub enum Curvature {
    Const(f64),
    Fn(Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>),
    Field(Arc<SphereField>),
}

impl Curvature {
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match self {
            Curvature::Const(c) => *c,
            Curvature::Fn(f) => f(x),
            Curvature::Field(f) => interpolate(&f.grid, &f.values, x),
        }
    }

    /// Values on grid nodes; `rotation` is the map applied to the divisor,
    /// so K is pulled back through its transpose.
    pub fn on_grid(&self, grid: &SphereGrid, rotation: Option<&[[f64; 3]; 3]>) -> Vec<f64> {
        (0..grid.len())
            .map(|idx| {
                let x = grid.node_flat(idx);
                let y = match rotation {
                    Some(r) => [
                        r[0][0] * x[0] + r[1][0] * x[1] + r[2][0] * x[2],
                        r[0][1] * x[0] + r[1][1] * x[1] + r[2][1] * x[2],
                        r[0][2] * x[0] + r[1][2] * x[1] + r[2][2] * x[2],
                    ],
                    None => x,
                };
                self.eval(&y)
            })
            .collect()
    }
}

impl std::fmt::Debug for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Curvature::Const(c) => write!(f, "Curvature::Const({c})"),
            Curvature::Fn(_) => write!(f, "Curvature::Fn(..)"),
            Curvature::Field(_) => write!(f, "Curvature::Field(..)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTrace {
    pub tau: f64,
    pub newton_iters: usize,
    /// Residual sup-norm (non-excluded nodes) after each iteration,
    /// starting with the initial residual.
    pub residuals: Vec<f64>,
    pub status: SolveStatus,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub grid: Arc<SphereGrid>,
    /// Divisor actually used (reoriented when needed).
    pub divisor: Divisor,
    /// Rotation applied to the input divisor, if any.
    pub rotation: Option<[[f64; 3]; 3]>,
    /// Regular part w of u = S + w.
    pub w: SphereField,
    pub residual_sup: f64,
    pub stages: Vec<StageTrace>,
    /// Mean of u over the sphere (collapse indicator).
    pub mean_u: f64,
    /// ∫ e^{2u} dV.
    pub area: f64,
    pub status: SolveStatus,
    /// K on grid nodes (after reorientation), kept for diagnostics.
    pub k_values: Vec<f64>,
}

impl SolveResult {
    /// Reconstruct u = S + w on the grid.
    pub fn u(&self) -> SphereField {
        let sp = singular_part(self.grid.clone(), &self.divisor);
        self.w.zip_with(&sp.s, "u", |w, s| w + s)
    }

    pub fn k_field(&self) -> SphereField {
        SphereField {
            grid: self.grid.clone(),
            values: self.k_values.clone(),
            name: "curvature".into(),
            units: String::new(),
        }
    }

    pub fn newton_iters(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.newton_iters).collect()
    }

    /// ∫ K e^{2u} dV − 2πχ.
    pub fn gauss_bonnet_deviation(&self) -> f64 {
        let total = mass_quadrature(&self.w, &self.divisor, Some(&self.k_field()), None);
        let chi = 2.0 + self.divisor.beta_f64().iter().sum::<f64>();
        total - 2.0 * std::f64::consts::PI * chi
    }
}

struct Workspace {
    grid: Arc<SphereGrid>,
    stencil: LaplaceStencil,
    /// Mask of nodes inside exclusion disks (skipped by the reported sup).
    excluded: Vec<bool>,
}

impl Workspace {
    fn new(grid: Arc<SphereGrid>) -> Self {
        let stencil = LaplaceStencil::new(&grid);
        let excluded = (0..grid.len())
            .map(|idx| grid.is_excluded(&grid.node_flat(idx)))
            .collect();
        Workspace {
            grid,
            stencil,
            excluded,
        }
    }

    /// F(w) = Δw + K h e^{2w} − ½χ.
    fn residual(&self, w: &[f64], kh: &[f64], half_chi: f64, out: &mut [f64]) {
        self.stencil.apply(&self.grid, w, out);
        for idx in 0..out.len() {
            out[idx] += kh[idx] * (2.0 * w[idx]).exp() - half_chi;
        }
    }

    fn sup_non_excluded(&self, f: &[f64]) -> f64 {
        let mut sup = 0.0f64;
        for (v, ex) in f.iter().zip(&self.excluded) {
            if !*ex {
                sup = sup.max(v.abs());
            }
        }
        sup
    }

    fn l2(&self, f: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..f.len())
            .map(|i| self.grid.weight(i) * f[i] * f[i])
            .collect();
        pairwise_sum(&terms).sqrt()
    }

    /// Assemble the Newton matrix Δ + diag(2 K h e^{2w}), banded θ-major.
    fn assemble(&self, w: &[f64], kh: &[f64], shift: f64) -> BandMatrix {
        let grid = &self.grid;
        let (nt, np) = (grid.n_theta, grid.n_phi);
        let n = nt * np;
        let mut m = BandMatrix::zeros(n, np, np);
        for j in 0..nt {
            let north = self.stencil.edge[j];
            let south = self.stencil.edge[j + 1];
            let e = self.stencil.azim[j];
            let inv_a = self.stencil.inv_area[j];
            for i in 0..np {
                let row = j * np + i;
                let mut diag = -(north + south + 2.0 * e) * inv_a;
                diag += 2.0 * kh[row] * (2.0 * w[row]).exp();
                diag += shift * (1.0 + diag.abs());
                m.set(row, row, diag);
                if j > 0 {
                    m.set(row, row - np, north * inv_a);
                }
                if j + 1 < nt {
                    m.set(row, row + np, south * inv_a);
                }
                let left = j * np + (i + np - 1) % np;
                let right = j * np + (i + 1) % np;
                // φ-wrap entries stay within the band (distance ≤ n_phi − 1)
                m.add(row, left, e * inv_a);
                m.add(row, right, e * inv_a);
            }
        }
        m
    }
}

struct StageProblem {
    kh: Vec<f64>,
    half_chi: f64,
}

impl StageProblem {
    fn build(ws: &Workspace, d: &Divisor, k_vals: &[f64]) -> Result<Self> {
        if k_vals.iter().any(|k| !(*k > 0.0)) {
            return Err(SslError::Domain(
                "prescribed curvature must be positive on all nodes".into(),
            ));
        }
        let sp = singular_part(ws.grid.clone(), d);
        if !sp.declared_singular.is_empty() {
            return Err(SslError::Numerical(format!(
                "{} grid node(s) coincide with marked points",
                sp.declared_singular.len()
            )));
        }
        let kh: Vec<f64> = k_vals
            .iter()
            .zip(&sp.h.values)
            .map(|(k, h)| k * h)
            .collect();
        let half_chi = 1.0 + 0.5 * d.beta_f64().iter().sum::<f64>();
        Ok(StageProblem { kh, half_chi })
    }
}

fn newton_stage(
    ws: &Workspace,
    problem: &StageProblem,
    w: &mut Vec<f64>,
    params: &SolveParams,
    tau: f64,
) -> StageTrace {
    let n = w.len();
    let mut residual = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    ws.residual(w, &problem.kh, problem.half_chi, &mut residual);
    let mut residuals = vec![ws.sup_non_excluded(&residual)];
    let mut iters = 0;
    while residuals.last().copied().unwrap() > params.newton_tol {
        if iters >= params.max_newton {
            return StageTrace {
                tau,
                newton_iters: iters,
                residuals,
                status: SolveStatus::Diverged,
            };
        }
        // solve J δ = −F, with escalating diagonal shifts if the band
        // factorization hits an exact zero pivot
        let mut delta: Option<Vec<f64>> = None;
        for shift in [0.0, 1e-12, 1e-8, 1e-4] {
            let matrix = ws.assemble(w, &problem.kh, shift);
            match matrix.factor() {
                Ok(lu) => {
                    let mut rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
                    lu.solve(&mut rhs);
                    delta = Some(rhs);
                    break;
                }
                Err(_) => continue,
            }
        }
        let Some(delta) = delta else {
            return StageTrace {
                tau,
                newton_iters: iters,
                residuals,
                status: SolveStatus::Diverged,
            };
        };
        // backtracking on the weighted l2 norm
        let base_l2 = ws.l2(&residual);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        while lambda >= params.min_step {
            for i in 0..n {
                trial[i] = w[i] + lambda * delta[i];
            }
            ws.residual(&trial, &problem.kh, problem.half_chi, &mut trial_res);
            let new_l2 = ws.l2(&trial_res);
            if new_l2.is_finite() && new_l2 <= (1.0 - 0.25 * lambda) * base_l2 {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return StageTrace {
                tau,
                newton_iters: iters,
                residuals,
                status: SolveStatus::Diverged,
            };
        }
        std::mem::swap(w, &mut trial);
        std::mem::swap(&mut residual, &mut trial_res);
        residuals.push(ws.sup_non_excluded(&residual));
        iters += 1;
    }
    StageTrace {
        tau,
        newton_iters: iters,
        residuals,
        status: SolveStatus::Converged,
    }
}

/// Solve for the divisor and curvature on the given grid, reaching the
/// target through the anchor continuation path.
pub fn solve(
    d: &Divisor,
    k: &Curvature,
    grid_dims: (usize, usize),
    params: &SolveParams,
) -> Result<SolveResult> {
    let base = SphereGrid::new(grid_dims.0, grid_dims.1)?;
    let (d_used, rotation) = reorient_divisor(d, &base)?;
    let grid = Arc::new(base.with_exclusions(&d_used));
    let ws = Workspace::new(grid.clone());
    let k_target = k.on_grid(&grid, rotation.as_ref());

    let steps = params.continuation_steps.max(1);
    let mut w = vec![0.0f64; grid.len()];
    let mut stages = Vec::new();
    let mut failed = false;
    for step in 0..=steps {
        let tau_rat = rat(step as i64, steps as i64);
        let tau = to_f64(&tau_rat);
        let d_tau = d_used.scaled(&tau_rat);
        let k_tau: Vec<f64> = k_target.iter().map(|kv| 1.0 + tau * (kv - 1.0)).collect();
        let problem = StageProblem::build(&ws, &d_tau, &k_tau)?;
        let trace = newton_stage(&ws, &problem, &mut w, params, tau);
        let ok = trace.status == SolveStatus::Converged;
        stages.push(trace);
        if !ok {
            failed = true;
            break;
        }
    }
    finalize(ws, d_used, rotation, w, stages, k_target, params, failed)
}

/// Continuation sweep along the linear β-path between two divisors on the
/// same marked points, warm-starting every step from the previous solution.
/// Stops early when a step fails; the trace of the failed step is retained.
pub fn continuation_sweep(
    d0: &Divisor,
    d1: &Divisor,
    k: &Curvature,
    steps: usize,
    grid_dims: (usize, usize),
    params: &SolveParams,
) -> Result<Vec<SolveResult>> {
    if d0.len() != d1.len() {
        return Err(SslError::Domain(
            "sweep endpoints must share marked points".into(),
        ));
    }
    for (a, b) in d0.points().iter().zip(d1.points()) {
        if crate::divisor::chordal(a, b) > 1e-12 {
            return Err(SslError::Domain(
                "sweep endpoints must share marked points".into(),
            ));
        }
    }
    let base = SphereGrid::new(grid_dims.0, grid_dims.1)?;
    let (d0_used, rotation) = reorient_divisor(d0, &base)?;
    let d1_used = match &rotation {
        Some(r) => d1.rotated(r),
        None => d1.clone(),
    };
    let grid = Arc::new(base.with_exclusions(&d0_used));
    let ws = Workspace::new(grid.clone());
    let k_vals = k.on_grid(&grid, rotation.as_ref());

    let mut results = Vec::new();
    // the first endpoint gets a full anchor continuation
    let first = solve(d0, k, grid_dims, params)?;
    let mut w = first.w.values.clone();
    let first_failed = first.status != SolveStatus::Converged;
    results.push(first);
    if first_failed || steps == 0 {
        return Ok(results);
    }
    for step in 1..=steps {
        let tau_rat = rat(step as i64, steps as i64);
        let tau = to_f64(&tau_rat);
        let one_minus = rat(1, 1) - tau_rat.clone();
        let beta: Vec<Rat> = d0_used
            .beta()
            .iter()
            .zip(d1_used.beta())
            .map(|(a, b)| a * &one_minus + b * &tau_rat)
            .collect();
        let d_tau = Divisor::new(d0_used.points().to_vec(), beta)?;
        let problem = StageProblem::build(&ws, &d_tau, &k_vals)?;
        let mut w_step = w.clone();
        let trace = newton_stage(&ws, &problem, &mut w_step, params, tau);
        let ok = trace.status == SolveStatus::Converged;
        let result = finalize(
            Workspace::new(grid.clone()),
            d_tau,
            rotation,
            w_step.clone(),
            vec![trace],
            k_vals.clone(),
            params,
            !ok,
        )?;
        results.push(result);
        if !ok {
            break;
        }
        w = w_step;
    }
    Ok(results)
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    ws: Workspace,
    divisor: Divisor,
    rotation: Option<[[f64; 3]; 3]>,
    w: Vec<f64>,
    stages: Vec<StageTrace>,
    k_values: Vec<f64>,
    params: &SolveParams,
    failed: bool,
) -> Result<SolveResult> {
    let grid = ws.grid.clone();
    let w_field = SphereField {
        grid: grid.clone(),
        values: w,
        name: "regular-part".into(),
        units: String::new(),
    };
    let k_field = SphereField {
        grid: grid.clone(),
        values: k_values.clone(),
        name: "curvature".into(),
        units: String::new(),
    };
    let sp = singular_part(grid.clone(), &divisor);
    let u = w_field.zip_with(&sp.s, "u", |w, s| w + s);
    let mean_u = quadrature(&u) / (4.0 * std::f64::consts::PI);
    let area = mass_quadrature(&w_field, &divisor, None, None);
    let _ = &k_field;
    let chi = 2.0 + divisor.beta_f64().iter().sum::<f64>();
    let status = if !failed {
        SolveStatus::Converged
    } else if mean_u < params.collapse_mean_u
        && area < params.collapse_area_fraction * 2.0 * std::f64::consts::PI * chi.abs()
    {
        SolveStatus::Collapsed
    } else {
        SolveStatus::Diverged
    };
    let residual_sup = stages
        .last()
        .and_then(|s| s.residuals.last())
        .copied()
        .unwrap_or(f64::INFINITY);
    Ok(SolveResult {
        grid,
        divisor,
        rotation,
        w: w_field,
        residual_sup,
        stages,
        mean_u,
        area,
        status,
        k_values,
    })
}

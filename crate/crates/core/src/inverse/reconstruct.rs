//! `ε₀`, `ε`, `Q`, `H` (and `q_j`, `h`) from the solved main equation.

use rayon::prelude::*;
use serde::Serialize;

use super::main_eq::{solve_at, MainSolution, NodeSet};
use super::model::ModelProblem;
use super::tail::TailCorrection;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::potential::uniform_mesh;
use crate::spectral::SpectralDataSet;

pub const DEFAULT_MESH_POINTS: usize = 257;
/// Off-diagonal residual above which graph-mode data fail the diagonality gate.
pub const DIAGONALITY_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct ReconstructionOptions {
    pub mesh_points: usize,
    pub diagonality_tol: f64,
    /// Add the closed-form contribution of the nodes `n > N`.
    pub tail_correction: bool,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            mesh_points: DEFAULT_MESH_POINTS,
            diagonality_tol: DIAGONALITY_TOL,
            tail_correction: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub condition_max: f64,
    pub residual_max: f64,
    /// Largest `‖Q − Q†‖` before symmetrization.
    pub herm_residual: f64,
    /// Largest off-diagonal entry of `Q` (graph mode), or zero.
    pub offdiag_residual: f64,
    /// Largest relative off-diagonal part of the main-equation solution at
    /// the low nodes; this is what the diagonality gate tests.
    pub offdiag_solution: f64,
    pub eps0_at_zero: f64,
    /// `‖(1/2)∫ε dx + ε₀(π)‖` with trapezoidal quadrature.
    pub omega_check: f64,
    /// Frobenius norms of the fitted tail constants, when the tail term is used.
    pub tail_constants: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphOutput {
    /// `q_j` sampled on the mesh, one array per edge.
    pub q: Vec<Vec<f64>>,
    /// `h` from the coefficient formula (`h̃` of the model).
    pub h: f64,
    /// `h` read off `H = H̃ − Tε₀(π)T`.
    pub h_from_boundary: f64,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub mesh: Vec<f64>,
    pub eps0: Vec<CMat>,
    pub eps: Vec<CMat>,
    /// Hermitian-symmetrized `Q` with the spectrum shift removed.
    pub q: Vec<CMat>,
    pub h: CMat,
    pub epsilon0_pi: CMat,
    pub graph: Option<GraphOutput>,
    pub diagnostics: Diagnostics,
    pub shift: f64,
}

/// `ε₀ = Σ ±S_a α'_a S̃_a†` and `ε₀' = Σ ±(S'_a α'_a S̃_a† + S_a α'_a S̃'_a†)`.
fn eps0_pair(set: &NodeSet, sol: &MainSolution) -> (CMat, CMat) {
    let m = set.basis.dim();
    let mut e = CMat::zeros(m, m);
    let mut de = CMat::zeros(m, m);
    for (a, nd) in set.nodes.iter().enumerate() {
        if nd.alpha_prime.norm() == 0.0 {
            continue;
        }
        let sign = c(if nd.s == 0 { 1.0 } else { -1.0 });
        let sa = &sol.s[a] * &nd.alpha_prime;
        let dsa = &sol.ds[a] * &nd.alpha_prime;
        e += &sa * sol.s_model[a].adjoint() * sign;
        de += (dsa * sol.s_model[a].adjoint() + sa * sol.ds_model[a].adjoint()) * sign;
    }
    (e, de)
}

fn trapezoid(mesh: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    mesh.windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1)))
        .sum()
}

/// `(∫‖A(x) − B(x)‖_F² dx)^{1/2}` on the mesh.
pub fn l2_distance(mesh: &[f64], a: &[CMat], b: &[CMat]) -> f64 {
    trapezoid(mesh, |i| (&a[i] - &b[i]).norm_squared()).sqrt()
}

/// `(∫|a(x) − b(x)|² dx)^{1/2}` on the mesh.
pub fn l2_distance_scalar(mesh: &[f64], a: &[f64], b: &[f64]) -> f64 {
    trapezoid(mesh, |i| (a[i] - b[i]).powi(2)).sqrt()
}

/// Runs the whole reconstruction without the diagonality gate.
pub fn reconstruct_unchecked(
    data: &SpectralDataSet,
    model: &ModelProblem,
    model_data: &SpectralDataSet,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction> {
    if data.shift() != model_data.shift() {
        return Err(Error::InvalidInput(format!(
            "data and model data carry different spectrum shifts ({} vs {})",
            data.shift(),
            model_data.shift()
        )));
    }
    let tail = if opts.tail_correction {
        TailCorrection::fit(data, model_data, model.t.rank())
    } else {
        None
    };
    let mut set = NodeSet::new(data, model, model_data)?;
    if let Some(tc) = &tail {
        set = set.with_tail(tc);
    }
    let n_max = data.n_max();
    let mesh = uniform_mesh(opts.mesh_points.max(2) - 1);
    let solutions: Vec<(CMat, CMat, f64, f64, f64)> = mesh
        .par_iter()
        .map(|&x| {
            let sol = solve_at(&set, x, n_max)?;
            let (e, de) = eps0_pair(&set, &sol);
            Ok((e, de, sol.condition, sol.residual, sol.offdiag))
        })
        .collect::<Result<_>>()?;
    let m = model.dim();
    let shift = data.shift();
    let q_model = model.potential().matrix();
    let mut herm_residual = 0.0f64;
    let mut eps0 = Vec::with_capacity(mesh.len());
    let mut eps = Vec::with_capacity(mesh.len());
    let mut q = Vec::with_capacity(mesh.len());
    for (x, (e, de, ..)) in mesh.iter().zip(&solutions) {
        let mut epsilon = de * c(-2.0);
        if let Some(tc) = &tail {
            epsilon += tc.epsilon(*x);
        }
        let raw = q_model + &epsilon - CMat::identity(m, m) * c(shift);
        herm_residual = herm_residual.max((&raw - raw.adjoint()).norm());
        q.push((&raw + raw.adjoint()) * c(0.5));
        eps0.push(e.clone());
        eps.push(epsilon);
    }
    let condition_max = solutions.iter().map(|s| s.2).fold(0.0, f64::max);
    let residual_max = solutions.iter().map(|s| s.3).fold(0.0, f64::max);
    let mut epsilon0_pi = eps0.last().unwrap().clone();
    if let Some(tc) = &tail {
        epsilon0_pi += tc.epsilon0_at_pi();
    }
    let t = model.t.matrix();
    let h_raw = model.h.matrix() - t * &epsilon0_pi * t;
    let h = (&h_raw + h_raw.adjoint()) * c(0.5);
    let half_integral = CMat::from_fn(m, m, |r, k| {
        let re = trapezoid(&mesh, |i| eps[i][(r, k)].re);
        let im = trapezoid(&mesh, |i| eps[i][(r, k)].im);
        c(0.5) * crate::linalg::C64::new(re, im)
    });
    let omega_check = (half_integral + &epsilon0_pi).norm();
    let offdiag_residual = if model.is_graph() {
        q.iter()
            .flat_map(|qq| {
                (0..m).flat_map(move |r| {
                    (0..m)
                        .filter(move |&k| k != r)
                        .map(move |k| qq[(r, k)].norm())
                })
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let graph = model.graph_h.map(|h_tilde| GraphOutput {
        q: (0..m)
            .map(|j| q.iter().map(|qq| qq[(j, j)].re).collect())
            .collect(),
        h: h_tilde,
        h_from_boundary: h.trace().re / model.t.rank() as f64,
    });
    let diagnostics = Diagnostics {
        condition_max,
        residual_max,
        herm_residual,
        offdiag_residual,
        offdiag_solution: solutions.iter().map(|s| s.4).fold(0.0, f64::max),
        eps0_at_zero: eps0[0].norm(),
        omega_check,
        tail_constants: tail
            .as_ref()
            .map(|tc| [tc.c_first.norm(), tc.c_second.norm()]),
    };
    Ok(Reconstruction {
        mesh,
        eps0,
        eps,
        q,
        h,
        epsilon0_pi,
        graph,
        diagnostics,
        shift,
    })
}

/// Full reconstruction; in graph mode an off-diagonal residual above the
/// tolerance is a diagonality violation.
pub fn reconstruct(
    data: &SpectralDataSet,
    model: &ModelProblem,
    model_data: &SpectralDataSet,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction> {
    let rec = reconstruct_unchecked(data, model, model_data, opts)?;
    if model.is_graph() && rec.diagnostics.offdiag_solution > opts.diagonality_tol {
        return Err(Error::Diagonality(format!(
            "off-diagonal residual {:.3e} exceeds {:.1e}; the main-equation solution is not diagonal",
            rec.diagnostics.offdiag_solution, opts.diagonality_tol
        )));
    }
    Ok(rec)
}

impl Reconstruction {
    /// `L₂` distance of the reconstructed `Q` from `truth`.
    pub fn l2_error_against(&self, truth: impl Fn(f64) -> CMat) -> f64 {
        let t: Vec<CMat> = self.mesh.iter().map(|&x| truth(x)).collect();
        l2_distance(&self.mesh, &self.q, &t)
    }

    /// Per-edge `L₂` errors in the graph case.
    pub fn edge_errors(&self, truth: impl Fn(usize, f64) -> f64) -> Option<Vec<f64>> {
        let g = self.graph.as_ref()?;
        Some(
            g.q.iter()
                .enumerate()
                .map(|(j, qj)| {
                    let t: Vec<f64> = self.mesh.iter().map(|&x| truth(j, x)).collect();
                    l2_distance_scalar(&self.mesh, qj, &t)
                })
                .collect(),
        )
    }
}

//! The model problem `L̃` with constant potential.

use std::f64::consts::PI;

use crate::asymptotics::{check_theorem31, AsymptoticCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{
    c, constant_s, make_graph_projector, CMat, ConstantPotentialBasis, HermitianMatrix,
    OrthogonalProjector,
};
use crate::potential::PotentialGrid;
use crate::problem::MatrixProblem;
use crate::spectral::{compute_spectral_data, SpectralDataSet};

/// Tolerance of the projector conditions required before a model is built.
pub const MODEL_CHECK_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ModelProblem {
    pub basis: ConstantPotentialBasis,
    pub t: OrthogonalProjector,
    pub h: HermitianMatrix,
    /// `h̃` in the graph case.
    pub graph_h: Option<f64>,
    pub problem: MatrixProblem,
}

impl ModelProblem {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn potential(&self) -> &HermitianMatrix {
        &self.basis.potential
    }

    pub fn is_graph(&self) -> bool {
        self.graph_h.is_some()
    }

    /// Spectral data of `L̃` for `n ≤ n_max`, spot-checked against the
    /// closed-form solution: `V(S̃(π, λ̃))` must be singular at every eigenvalue.
    pub fn spectral_data(&self, n_max: usize) -> Result<SpectralDataSet> {
        let data = compute_spectral_data(&self.problem, n_max)?;
        let tp = self.t.complement();
        for e in data.entries().iter().step_by(self.dim().max(1)) {
            let (s, ds) = constant_s(&self.basis, c(e.lambda), PI);
            let v = self.t.matrix() * (ds - self.h.matrix() * &s) - tp.matrix() * &s;
            let smallest = v.singular_values().min();
            let scale = 1.0 + e.lambda.abs().sqrt();
            if smallest > 1e-6 * scale {
                return Err(Error::Inconsistent(format!(
                    "model eigenvalue {} fails the closed-form check (σ_min = {smallest:.3e})",
                    e.lambda
                )));
            }
        }
        Ok(data)
    }
}

fn build(
    q: HermitianMatrix,
    t: OrthogonalProjector,
    h: HermitianMatrix,
    graph_h: Option<f64>,
) -> Result<ModelProblem> {
    let basis = ConstantPotentialBasis::new(q.clone())?;
    let grid = PotentialGrid::constant(q.into_matrix())?;
    let problem = match graph_h {
        Some(hh) => MatrixProblem::graph(grid, hh)?,
        None => MatrixProblem::general(grid, t.clone(), h.clone())?,
    };
    Ok(ModelProblem {
        basis,
        t,
        h,
        graph_h,
        problem,
    })
}

/// `L̃ = L((2/π)Θ̃, T, 0)` with `Θ̃ = Σ_{s∈J} z_s A^(s)`.
pub fn build_model_general(coeffs: &AsymptoticCoefficients) -> Result<ModelProblem> {
    let report = check_theorem31(coeffs, MODEL_CHECK_TOL);
    if !report.passed() {
        return Err(Error::Inconsistent(format!(
            "asymptotic coefficients fail the projector conditions: {}",
            report.failed_names().join(", ")
        )));
    }
    let m = coeffs.dim();
    let mut theta = CMat::zeros(m, m);
    for cl in coeffs.clusters() {
        theta += coeffs.a[cl[0]].matrix() * c(coeffs.z[cl[0]]);
    }
    let theta = HermitianMatrix::symmetrized(theta).0;
    let again = AsymptoticCoefficients::from_parts(&coeffs.t, &theta, &HermitianMatrix::zeros(m))?;
    let dz = again
        .z
        .iter()
        .zip(&coeffs.z)
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let da = again
        .a
        .iter()
        .zip(&coeffs.a)
        .fold(0.0f64, |a, (x, y)| a.max((x.matrix() - y.matrix()).norm()));
    if dz > 1e-10 || da > 1e-10 {
        return Err(Error::Inconsistent(format!(
            "Θ̃ does not reproduce z, A (errors {dz:.3e}, {da:.3e})"
        )));
    }
    let q = HermitianMatrix::symmetrized(theta.matrix() * c(2.0 / PI)).0;
    build(q, coeffs.t.clone(), HermitianMatrix::zeros(m), None)
}

/// Graph model `Q̃ = (2/π)diag(ω)`, `H̃ = h̃T`, `h̃ = (1/m)Σω_j − z₁`.
pub fn build_model_graph(omega: &[f64], z1: f64) -> Result<ModelProblem> {
    let m = omega.len();
    let t = make_graph_projector(m)?;
    let h_tilde = omega.iter().sum::<f64>() / m as f64 - z1;
    let q = HermitianMatrix::from_real_diagonal(
        &omega.iter().map(|w| 2.0 / PI * w).collect::<Vec<_>>(),
    );
    let h = HermitianMatrix::symmetrized(t.matrix() * c(h_tilde)).0;
    build(q, t, h, Some(h_tilde))
}

/// Graph model from fitted or exact coefficients carrying edge means.
pub fn build_model(coeffs: &AsymptoticCoefficients, graph: bool) -> Result<ModelProblem> {
    match (&coeffs.graph_omega, graph) {
        (Some(w), true) => build_model_graph(w, coeffs.z[0]),
        (None, true) => Err(Error::InvalidInput(
            "graph model needs the edge means ω_j".into(),
        )),
        _ => build_model_general(coeffs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_model_boundary_coefficient() {
        assert_eq!(
            build_model_graph(&[0.0, 0.0], 0.0).unwrap().graph_h,
            Some(0.0)
        );
        assert_eq!(
            build_model_graph(&[1.0, 1.0], 0.0).unwrap().graph_h,
            Some(1.0)
        );
        assert!(
            (build_model_graph(&[0.0, 1.0, 2.0], -0.5)
                .unwrap()
                .graph_h
                .unwrap()
                - 1.5)
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn zero_coefficients_give_zero_model() {
        let co = AsymptoticCoefficients::from_graph(&[0.0; 3], 0.0).unwrap();
        let model = build_model_general(&co).unwrap();
        assert!(model.potential().norm() < 1e-14);
        let data = model.spectral_data(4).unwrap();
        for n in 1..=4 {
            assert!((data.entry(n, 1).lambda - (n as f64 - 0.5).powi(2)).abs() < 1e-8);
            assert!((data.entry(n, 2).lambda - (n * n) as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn general_model_reproduces_coefficients() {
        let co = AsymptoticCoefficients::from_graph(&[0.3, -0.2, 1.1], 0.4).unwrap();
        let model = build_model_general(&co).unwrap();
        let again = AsymptoticCoefficients::from_parts(
            &model.t,
            &HermitianMatrix::symmetrized(model.potential().matrix() * c(PI / 2.0)).0,
            &model.h,
        )
        .unwrap();
        for s in 0..3 {
            assert!((again.z[s] - co.z[s]).abs() < 1e-10);
        }
    }

    #[test]
    fn broken_coefficients_are_refused() {
        let mut co = AsymptoticCoefficients::from_graph(&[0.3, -0.2, 1.1], 0.4).unwrap();
        co.a.swap(0, 1);
        assert!(matches!(
            build_model_general(&co),
            Err(Error::Inconsistent(_))
        ));
    }
}

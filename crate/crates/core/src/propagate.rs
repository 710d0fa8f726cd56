//! Propagation of matrix solutions of `−Y'' + Q·Y = λ·Y`.
//!
//! The potential is replaced on each step by its (Hermitian) value at the
//! step midpoint, and the resulting constant-coefficient equation is solved
//! exactly in the eigenbasis of that value. The midpoint scheme is symmetric,
//! so its global error expands in even powers of the step; one Richardson
//! extrapolation between `n` and `2n` steps gives a fourth-order result whose
//! accuracy does not degrade with `|λ|`. Constant potentials are propagated in
//! a single exact step.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    c, cos_root, hermitian_eigen, sin_over_root, CMat, HermitianMatrix, OrthogonalProjector, C64,
};
use crate::potential::{uniform_mesh, PotentialGrid};
use crate::problem::MatrixProblem;

/// Condition number of `Ψ(0, λ)` above which `λ` counts as an eigenvalue.
pub const POLE_COND: f64 = 1e12;
/// `|Im √λ|·π` above which `exp` overflow becomes a risk.
const MAX_GROWTH: f64 = 600.0;

#[derive(Clone, Debug)]
struct StepMesh {
    h: f64,
    eigenvalues: Vec<Vec<f64>>,
    bases: Vec<CMat>,
    /// `V_{k+1}†·V_k`.
    links: Vec<CMat>,
    links_back: Vec<CMat>,
}

impl StepMesh {
    fn sampled(q: &PotentialGrid, steps: usize) -> Self {
        let h = std::f64::consts::PI / steps as f64;
        let (eigenvalues, bases): (Vec<_>, Vec<_>) = (0..steps)
            .map(|k| hermitian_eigen(&q.value_at((k as f64 + 0.5) * h)))
            .unzip();
        Self::assemble(h, eigenvalues, bases)
    }

    fn constant(value: &CMat, steps: usize) -> Self {
        let h = std::f64::consts::PI / steps as f64;
        let (vals, basis) = hermitian_eigen(value);
        Self::assemble(h, vec![vals; steps], vec![basis; steps])
    }

    fn assemble(h: f64, eigenvalues: Vec<Vec<f64>>, bases: Vec<CMat>) -> Self {
        let links: Vec<CMat> = bases.windows(2).map(|w| w[1].adjoint() * &w[0]).collect();
        let links_back = links.iter().map(|l| l.adjoint()).collect();
        Self {
            h,
            eigenvalues,
            bases,
            links,
            links_back,
        }
    }

    fn steps(&self) -> usize {
        self.bases.len()
    }

    fn step(z: &mut CMat, dz: &mut CMat, vals: &[f64], lambda: C64, h: f64) {
        for (i, &ci) in vals.iter().enumerate() {
            let u = lambda - ci;
            let co = cos_root(u, h);
            let si = sin_over_root(u, h);
            let us = -u * si;
            for j in 0..z.ncols() {
                let (a, b) = (z[(i, j)], dz[(i, j)]);
                z[(i, j)] = co * a + si * b;
                dz[(i, j)] = us * a + co * b;
            }
        }
    }

    /// Returns node values in increasing `x` when `record`, else the far endpoint only.
    fn run(
        &self,
        lambda: C64,
        y0: &CMat,
        dy0: &CMat,
        forward: bool,
        record: bool,
    ) -> (Vec<CMat>, Vec<CMat>) {
        let n = self.steps();
        let (first, last) = if forward { (0, n - 1) } else { (n - 1, 0) };
        let mut z = self.bases[first].adjoint() * y0;
        let mut dz = self.bases[first].adjoint() * dy0;
        let mut tmp = CMat::zeros(z.nrows(), z.ncols());
        let (mut ys, mut dys) = (Vec::new(), Vec::new());
        if record {
            ys.push(y0.clone());
            dys.push(dy0.clone());
        }
        let h = if forward { self.h } else { -self.h };
        for idx in 0..n {
            let k = if forward { idx } else { n - 1 - idx };
            Self::step(&mut z, &mut dz, &self.eigenvalues[k], lambda, h);
            if record || k == last {
                ys.push(&self.bases[k] * &z);
                dys.push(&self.bases[k] * &dz);
            }
            if k != last {
                let link = if forward {
                    &self.links[k]
                } else {
                    &self.links_back[k - 1]
                };
                tmp.gemm(c(1.0), link, &z, c(0.0));
                std::mem::swap(&mut z, &mut tmp);
                tmp.gemm(c(1.0), link, &dz, c(0.0));
                std::mem::swap(&mut dz, &mut tmp);
            }
        }
        if !record {
            let y = ys.pop().unwrap();
            let dy = dys.pop().unwrap();
            return (vec![y], vec![dy]);
        }
        if !forward {
            ys.reverse();
            dys.reverse();
        }
        (ys, dys)
    }
}

/// Precomputed step data for one problem.
#[derive(Clone, Debug)]
pub struct Discretization {
    steps: usize,
    exact: Option<StepMesh>,
    coarse: StepMesh,
    fine: Option<StepMesh>,
}

impl Discretization {
    pub fn new(q: &PotentialGrid, steps: usize) -> Self {
        match q.constant_value() {
            Some(v) => Self {
                steps,
                exact: Some(StepMesh::constant(v, 1)),
                coarse: StepMesh::constant(v, steps),
                fine: None,
            },
            None => Self {
                steps,
                exact: None,
                coarse: StepMesh::sampled(q, steps),
                fine: Some(StepMesh::sampled(q, 2 * steps)),
            },
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    fn endpoint(&self, lambda: C64, y0: &CMat, dy0: &CMat, forward: bool) -> (CMat, CMat) {
        if let Some(ex) = &self.exact {
            let (mut y, mut dy) = ex.run(lambda, y0, dy0, forward, false);
            return (y.pop().unwrap(), dy.pop().unwrap());
        }
        let (mut yc, mut dyc) = self.coarse.run(lambda, y0, dy0, forward, false);
        let (mut yf, mut dyf) = self
            .fine
            .as_ref()
            .unwrap()
            .run(lambda, y0, dy0, forward, false);
        let third = c(1.0 / 3.0);
        let (yc, dyc, yf, dyf) = (
            yc.pop().unwrap(),
            dyc.pop().unwrap(),
            yf.pop().unwrap(),
            dyf.pop().unwrap(),
        );
        ((yf * c(4.0) - yc) * third, (dyf * c(4.0) - dyc) * third)
    }

    fn path(&self, lambda: C64, y0: &CMat, dy0: &CMat, forward: bool) -> (Vec<CMat>, Vec<CMat>) {
        let (yc, dyc) = self.coarse.run(lambda, y0, dy0, forward, true);
        let Some(fine) = &self.fine else {
            return (yc, dyc);
        };
        let (yf, dyf) = fine.run(lambda, y0, dy0, forward, true);
        let third = c(1.0 / 3.0);
        let y = yc
            .iter()
            .enumerate()
            .map(|(i, a)| (&yf[2 * i] * c(4.0) - a) * third)
            .collect();
        let dy = dyc
            .iter()
            .enumerate()
            .map(|(i, a)| (&dyf[2 * i] * c(4.0) - a) * third)
            .collect();
        (y, dy)
    }
}

/// A matrix solution and its derivative sampled on the coarse propagation mesh.
#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub lambda: C64,
    pub mesh: Vec<f64>,
    pub y: Vec<CMat>,
    pub dy: Vec<CMat>,
}

impl SolutionPair {
    pub fn at_start(&self) -> (&CMat, &CMat) {
        (&self.y[0], &self.dy[0])
    }

    pub fn at_end(&self) -> (&CMat, &CMat) {
        let n = self.y.len() - 1;
        (&self.y[n], &self.dy[n])
    }
}

fn check_lambda(lambda: C64) -> Result<()> {
    if !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite spectral parameter {lambda}"
        )));
    }
    let growth = lambda.sqrt().im.abs() * std::f64::consts::PI;
    if growth > MAX_GROWTH {
        return Err(Error::Resolution(format!(
            "|Im √λ|·π = {growth:.1} exceeds {MAX_GROWTH}; λ = {lambda} is outside the representable range"
        )));
    }
    Ok(())
}

fn s_initial(m: usize) -> (CMat, CMat) {
    (CMat::zeros(m, m), CMat::identity(m, m))
}

fn psi_terminal(problem: &MatrixProblem) -> (CMat, CMat) {
    let t = problem.projector();
    let y = t.matrix().clone();
    let dy = t.complement().matrix() + problem.boundary_matrix().matrix() * t.matrix();
    (y, dy)
}

/// `S(x, λ)` with `S(0) = 0`, `S'(0) = I` along the whole mesh.
pub fn propagate_s(problem: &MatrixProblem, lambda: C64) -> Result<SolutionPair> {
    check_lambda(lambda)?;
    let (y0, dy0) = s_initial(problem.dim());
    let (y, dy) = problem.disc.path(lambda, &y0, &dy0, true);
    Ok(SolutionPair {
        lambda,
        mesh: uniform_mesh(problem.steps()),
        y,
        dy,
    })
}

/// `Ψ(x, λ)` with `Ψ(π) = T`, `Ψ'(π) = T⊥ + H·T` along the whole mesh.
pub fn propagate_psi(problem: &MatrixProblem, lambda: C64) -> Result<SolutionPair> {
    check_lambda(lambda)?;
    let (y0, dy0) = psi_terminal(problem);
    let (y, dy) = problem.disc.path(lambda, &y0, &dy0, false);
    Ok(SolutionPair {
        lambda,
        mesh: uniform_mesh(problem.steps()),
        y,
        dy,
    })
}

/// `(S(π, λ), S'(π, λ))`.
pub fn s_at_pi(problem: &MatrixProblem, lambda: C64) -> Result<(CMat, CMat)> {
    check_lambda(lambda)?;
    let (y0, dy0) = s_initial(problem.dim());
    Ok(problem.disc.endpoint(lambda, &y0, &dy0, true))
}

/// `(Ψ(0, λ), Ψ'(0, λ))`.
pub fn psi_at_zero(problem: &MatrixProblem, lambda: C64) -> Result<(CMat, CMat)> {
    check_lambda(lambda)?;
    let (y0, dy0) = psi_terminal(problem);
    Ok(problem.disc.endpoint(lambda, &y0, &dy0, false))
}

/// `V(Y) = T(Y'(π) − H·Y(π)) − T⊥·Y(π)`.
pub fn boundary_form(y: &CMat, dy: &CMat, t: &OrthogonalProjector, h: &HermitianMatrix) -> CMat {
    t.matrix() * (dy - h.matrix() * y) - t.complement().matrix() * y
}

/// `⟨A, B⟩ = A·B' − A'·B`.
pub fn wronskian(a: &CMat, da: &CMat, b: &CMat, db: &CMat) -> CMat {
    a * db - da * b
}

/// `V(S(·, λ))`.
pub fn boundary_matrix_of_s(problem: &MatrixProblem, lambda: C64) -> Result<CMat> {
    let (s, ds) = s_at_pi(problem, lambda)?;
    Ok(boundary_form(
        &s,
        &ds,
        problem.projector(),
        problem.boundary_matrix(),
    ))
}

/// `Δ(λ) = det V(S(·, λ))`; zero exactly at the eigenvalues.
pub fn char_det(problem: &MatrixProblem, lambda: C64) -> Result<C64> {
    Ok(boundary_matrix_of_s(problem, lambda)?.determinant())
}

/// Weyl matrix `M(λ) = Ψ'(0, λ)·Ψ(0, λ)⁻¹`.
pub fn weyl_matrix(problem: &MatrixProblem, lambda: C64) -> Result<CMat> {
    let (psi, dpsi) = psi_at_zero(problem, lambda)?;
    let sv = psi.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 0.0) || smax / smin > POLE_COND {
        return Err(Error::PoleProximity(format!(
            "Ψ(0, λ) is singular to working precision at λ = {lambda} (cond {:.3e})",
            smax / smin
        )));
    }
    let inv = psi
        .try_inverse()
        .ok_or_else(|| Error::PoleProximity(format!("Ψ(0, λ) not invertible at λ = {lambda}")))?;
    Ok(dpsi * inv)
}

/// Singular values of an `m × m` matrix in descending order.
pub fn singular_values_desc(a: &DMatrix<C64>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

//! The boundary value problem `L(Q, T, H)`:
//! `−Y'' + Q·Y = λ·Y`, `Y(0) = 0`, `T(Y'(π) − H·Y(π)) − T⊥·Y(π) = 0`.

use crate::error::{Error, Result};
use crate::linalg::{c, make_graph_projector, CMat, HermitianMatrix, OrthogonalProjector};
use crate::potential::PotentialGrid;
use crate::propagate::Discretization;

/// Default number of propagation steps on the coarse mesh.
pub const DEFAULT_STEPS: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    General,
    /// Star graph: diagonal `Q`, `T` with entries `1/m`, `H = h·T`.
    Graph {
        h: f64,
    },
}

#[derive(Clone, Debug)]
pub struct MatrixProblem {
    q: PotentialGrid,
    t: OrthogonalProjector,
    h: HermitianMatrix,
    kind: ProblemKind,
    pub(crate) disc: Discretization,
}

impl MatrixProblem {
    pub fn general(q: PotentialGrid, t: OrthogonalProjector, h: HermitianMatrix) -> Result<Self> {
        Self::with_steps(q, t, h, ProblemKind::General, DEFAULT_STEPS)
    }

    pub fn graph(q: PotentialGrid, h: f64) -> Result<Self> {
        Self::graph_with_steps(q, h, DEFAULT_STEPS)
    }

    pub fn graph_with_steps(q: PotentialGrid, h: f64, steps: usize) -> Result<Self> {
        let m = q.dim();
        let t = make_graph_projector(m)?;
        if q.offdiag_max() > 0.0 {
            return Err(Error::InvalidInput(
                "graph potentials must be diagonal".into(),
            ));
        }
        let hm = HermitianMatrix::new(t.matrix() * c(h))?;
        Self::with_steps(q, t, hm, ProblemKind::Graph { h }, steps)
    }

    pub fn with_steps(
        q: PotentialGrid,
        t: OrthogonalProjector,
        h: HermitianMatrix,
        kind: ProblemKind,
        steps: usize,
    ) -> Result<Self> {
        let m = q.dim();
        if t.dim() != m || h.dim() != m {
            return Err(Error::InvalidDimension(format!(
                "Q is {m}x{m}, T is {0}x{0}, H is {1}x{1}",
                t.dim(),
                h.dim()
            )));
        }
        if t.rank() == 0 || t.rank() == m {
            return Err(Error::InvalidInput(format!(
                "rank(T) must lie in [1, {}]",
                m - 1
            )));
        }
        let res = (t.matrix() * h.matrix() * t.matrix() - h.matrix()).norm();
        if res > 1e-10 * h.matrix().norm().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "H ≠ T·H·T (residual {res:.3e})"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidInput(
                "need at least two propagation steps".into(),
            ));
        }
        let disc = Discretization::new(&q, steps);
        Ok(Self {
            q,
            t,
            h,
            kind,
            disc,
        })
    }

    /// Same problem with a different propagation resolution.
    pub fn with_resolution(&self, steps: usize) -> Result<Self> {
        Self::with_steps(
            self.q.clone(),
            self.t.clone(),
            self.h.clone(),
            self.kind.clone(),
            steps,
        )
    }

    /// `L(Q + shift·I, T, H)`.
    pub fn shifted(&self, shift: f64) -> Result<Self> {
        Self::with_steps(
            self.q.shifted(shift),
            self.t.clone(),
            self.h.clone(),
            self.kind.clone(),
            self.disc.steps(),
        )
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn potential(&self) -> &PotentialGrid {
        &self.q
    }

    pub fn projector(&self) -> &OrthogonalProjector {
        &self.t
    }

    pub fn boundary_matrix(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn is_graph(&self) -> bool {
        matches!(self.kind, ProblemKind::Graph { .. })
    }

    pub fn steps(&self) -> usize {
        self.disc.steps()
    }

    /// `Ω = ½∫₀^π Q(x) dx`.
    pub fn omega(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.q.integral() * c(0.5)).0
    }

    /// Edge potential `q_j` sampled at `x` (graph case: diagonal entry).
    pub fn edge_value(&self, j: usize, x: f64) -> f64 {
        self.q.value_at(x)[(j, j)].re
    }

    pub fn potential_at(&self, x: f64) -> CMat {
        self.q.value_at(x)
    }
}

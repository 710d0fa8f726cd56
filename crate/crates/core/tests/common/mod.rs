#![allow(dead_code)]

use std::f64::consts::PI;

use gsturm::linalg::{c, CMat, HermitianMatrix, OrthogonalProjector};
use gsturm::potential::PotentialGrid;
use gsturm::problem::MatrixProblem;

pub type EdgeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn graph(edges: Vec<EdgeFn>, h: f64) -> MatrixProblem {
    MatrixProblem::graph(PotentialGrid::diagonal_from_fns(512, &edges).unwrap(), h).unwrap()
}

/// `q = (sin x, cos x, x − π/2)`, `h = 0.3`.
pub fn trig_graph() -> MatrixProblem {
    graph(
        vec![
            Box::new(f64::sin),
            Box::new(f64::cos),
            Box::new(|x| x - PI / 2.0),
        ],
        0.3,
    )
}

/// `m = 2`, `Q = [[cos x, g], [g, sin 2x]]`, `T = diag(1, 0)`, `H = diag(0.4, 0)`.
pub fn coupled_general(g: f64) -> MatrixProblem {
    let q = PotentialGrid::from_fn(512, |x| {
        CMat::from_fn(2, 2, |r, k| {
            c(if r != k {
                g
            } else if r == 0 {
                x.cos()
            } else {
                (2.0 * x).sin()
            })
        })
    })
    .unwrap();
    let t = OrthogonalProjector::new(CMat::from_fn(2, 2, |r, k| {
        c(if r == 0 && k == 0 { 1.0 } else { 0.0 })
    }))
    .unwrap();
    let h = HermitianMatrix::from_real_diagonal(&[0.4, 0.0]);
    MatrixProblem::general(q, t, h).unwrap()
}

/// Real rotation by `angle` in the `(0, 1)` plane of `C^m`.
pub fn rotation(m: usize, angle: f64) -> CMat {
    let mut u = CMat::identity(m, m);
    let (s, co) = angle.sin_cos();
    u[(0, 0)] = c(co);
    u[(1, 1)] = c(co);
    u[(0, 1)] = c(-s);
    u[(1, 0)] = c(s);
    u
}

pub fn sup_norm(a: &[CMat]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

//! The truncated main equation
//! `X_a + Σ_b ±X_b α'_b D̃(x, λ_b, λ_a) = S̃(x, λ_a)`
//! over the nodes `(l, j, s)`, `l ≤ N`, and its `x`-derivative.

use nalgebra::DMatrix;

use super::kernel::KernelCache;
use super::model::ModelProblem;
use super::tail::TailCorrection;
use crate::error::{Error, Result};
use crate::linalg::{c, overlap_integral, sin_over_root, CMat, ConstantPotentialBasis, C64};
use crate::spectral::SpectralDataSet;

/// Largest accepted 1-norm condition number of the main-equation matrix.
pub const MAX_CONDITION: f64 = 1e10;
/// Relative residual the dense solve must reach after refinement.
pub const RESIDUAL_TARGET: f64 = 1e-10;

/// One unknown `S_ljs(x)`; `s = 0` are data nodes, `s = 1` model nodes.
#[derive(Clone, Debug)]
pub struct Node {
    pub n: usize,
    pub k: usize,
    pub s: u8,
    pub lambda: f64,
    pub alpha_prime: CMat,
}

impl Node {
    fn sign(&self) -> f64 {
        if self.s == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The nodes together with `α'` rotated into the eigenbasis `V` of `Q̃`.
pub struct NodeSet {
    pub basis: ConstantPotentialBasis,
    pub nodes: Vec<Node>,
    gamma: Vec<CMat>,
    active: Vec<bool>,
    tail: Option<TailNodes>,
}

/// The dropped nodes `N < n ≤ TAIL_EXTENT·N` at their leading-order
/// positions, each carrying its block constant `(2/π)V†CV`.
struct TailNodes {
    mu: Vec<(f64, usize)>,
    gamma: [CMat; 2],
}

/// How far past `N` the dropped nodes are summed in the main equation; the
/// remainder beyond falls off like `1/n³`.
pub const TAIL_EXTENT: usize = 4;

impl NodeSet {
    pub fn new(
        data: &SpectralDataSet,
        model: &ModelProblem,
        model_data: &SpectralDataSet,
    ) -> Result<Self> {
        if data.m() != model.dim()
            || model_data.m() != model.dim()
            || data.n_max() != model_data.n_max()
        {
            return Err(Error::InvalidDimension(
                "data, model and model data disagree in m or N".into(),
            ));
        }
        let mut nodes = Vec::with_capacity(2 * data.entries().len());
        for (d, md) in data.entries().iter().zip(model_data.entries()) {
            for (s, e) in [(0u8, d), (1u8, md)] {
                nodes.push(Node {
                    n: e.n,
                    k: e.k,
                    s,
                    lambda: e.lambda,
                    alpha_prime: e.alpha_prime.matrix().clone(),
                });
            }
        }
        Ok(Self::from_nodes(model.basis.clone(), nodes))
    }

    pub fn from_nodes(basis: ConstantPotentialBasis, nodes: Vec<Node>) -> Self {
        let v = &basis.vectors;
        let gamma: Vec<CMat> = nodes
            .iter()
            .map(|nd| v.adjoint() * &nd.alpha_prime * v)
            .collect();
        let active = nodes.iter().map(|nd| nd.alpha_prime.norm() > 0.0).collect();
        Self {
            basis,
            nodes,
            gamma,
            active,
            tail: None,
        }
    }

    /// Makes the diagonality measure use a right-hand side that carries the
    /// data-minus-model contribution of the dropped nodes, with
    /// `X_b ≈ S̃(x, λ_b)` for them. The reconstruction itself keeps the plain
    /// right-hand side, which preserves the Hermitian structure of `ε₀`.
    pub fn with_tail(mut self, tc: &TailCorrection) -> Self {
        let v = &self.basis.vectors;
        let m = self.basis.dim();
        let center = self.basis.values.iter().sum::<f64>() / m as f64;
        let lift = |cm: &CMat| v.adjoint() * cm * v * c(2.0 / std::f64::consts::PI);
        let mut mu = Vec::new();
        for n in tc.n_max + 1..=TAIL_EXTENT * tc.n_max {
            let nf = n as f64;
            mu.push(((nf - 0.5).powi(2) + center, 0));
            mu.push((nf * nf + center, 1));
        }
        self.tail = Some(TailNodes {
            mu,
            gamma: [lift(&tc.c_first), lift(&tc.c_second)],
        });
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.lambda).collect()
    }
}

/// Solution of the main equation and of its derivative at one `x`.
#[derive(Clone, Debug)]
pub struct MainSolution {
    pub x: f64,
    /// `S_ljs(x)` in node order.
    pub s: Vec<CMat>,
    /// `S'_ljs(x)`.
    pub ds: Vec<CMat>,
    /// `S̃(x, λ_ljs)`.
    pub s_model: Vec<CMat>,
    /// `S̃'(x, λ_ljs)`.
    pub ds_model: Vec<CMat>,
    pub condition: f64,
    pub residual: f64,
    /// `max_a max_{r≠k} |X_a[r,k]| / max(‖X_a‖, ‖S̃_a‖)` over nodes with `n ≤ max(1, N/8)`.
    pub offdiag: f64,
}

fn one_norm<T: nalgebra::ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

struct Factored<T: nalgebra::ComplexField<RealField = f64>> {
    a: DMatrix<T>,
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<T: nalgebra::ComplexField<RealField = f64>> Factored<T> {
    /// LU factorization and the Hager–Higham estimate of the 1-norm
    /// condition number.
    fn new(a: DMatrix<T>) -> Result<(Self, f64)> {
        let lu = a.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::IllConditioned(
                "main-equation matrix is singular".into(),
            ));
        }
        let fac = Self { a, lu };
        let cond = one_norm(&fac.a) * fac.inverse_one_norm();
        Ok((fac, cond))
    }

    /// Solves `A^H z = y` through the triangular factors.
    fn solve_adjoint(&self, y: &DMatrix<T>) -> DMatrix<T> {
        let w = self
            .lu
            .u()
            .ad_solve_upper_triangular(y)
            .unwrap_or_else(|| y.clone());
        let mut v = self.lu.l().ad_solve_lower_triangular(&w).unwrap_or(w);
        self.lu.p().inv_permute_rows(&mut v);
        v
    }

    fn inverse_one_norm(&self) -> f64 {
        let n = self.a.nrows();
        let norm1 = |v: &DMatrix<T>| v.iter().map(|z| z.clone().modulus()).sum::<f64>();
        let mut x = DMatrix::<T>::from_element(n, 1, T::from_real(1.0 / n as f64));
        let mut est = 0.0f64;
        for iter in 0..5 {
            let y = self.lu.solve(&x).unwrap_or_else(|| x.clone());
            let ny = norm1(&y);
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let xi = y.map(|z| {
                let r = z.clone().modulus();
                if r == 0.0 {
                    T::from_real(1.0)
                } else {
                    z.unscale(r)
                }
            });
            let z = self.solve_adjoint(&xi);
            let (j, zj) = z
                .iter()
                .map(|v| v.clone().modulus())
                .enumerate()
                .fold((0, 0.0), |b, (i, v)| if v > b.1 { (i, v) } else { b });
            let zx = (z.adjoint() * &x)[(0, 0)].clone().real();
            if iter > 0 && zj <= zx {
                break;
            }
            x = DMatrix::zeros(n, 1);
            x[(j, 0)] = T::from_real(1.0);
        }
        // Higham's alternating-sign test vector guards against underestimates.
        let alt = DMatrix::<T>::from_fn(n, 1, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            T::from_real(s * (1.0 + i as f64 / (n.max(2) - 1) as f64))
        });
        let t = self
            .lu
            .solve(&alt)
            .map(|v| 2.0 * norm1(&v) / (3.0 * n as f64))
            .unwrap_or(0.0);
        est.max(t)
    }

    /// Solution with up to three steps of iterative refinement, and its relative residual.
    fn solve(&self, f: &DMatrix<T>) -> (DMatrix<T>, f64) {
        let solve = |r: &DMatrix<T>| {
            self.lu
                .solve(r)
                .unwrap_or_else(|| DMatrix::zeros(r.nrows(), r.ncols()))
        };

        let mut y = solve(f);
        let fnorm = f.norm().max(f64::MIN_POSITIVE);
        let mut res = (f - &self.a * &y).norm() / fnorm;
        for _ in 0..3 {
            if res <= RESIDUAL_TARGET * 1e-2 {
                break;
            }
            let y_new = &y + solve(&(f - &self.a * &y));
            let res_new = (f - &self.a * &y_new).norm() / fnorm;
            if res_new >= res {
                break;
            }
            y = y_new;
            res = res_new;
        }
        (y, res)
    }
}

/// Dense factorization of the main-equation matrix; real matrices are
/// handled in real arithmetic.
enum DenseSolver {
    Real(Factored<f64>),
    Complex(Factored<C64>),
}

impl DenseSolver {
    fn new(a: CMat) -> Result<(Self, f64)> {
        if a.iter().all(|z| z.im == 0.0) {
            let (f, cond) = Factored::new(a.map(|z| z.re))?;
            Ok((Self::Real(f), cond))
        } else {
            let (f, cond) = Factored::new(a)?;
            Ok((Self::Complex(f), cond))
        }
    }

    fn solve(&self, f: &CMat) -> (CMat, f64) {
        match self {
            Self::Complex(fac) => fac.solve(f),
            Self::Real(fac) => {
                let (re, r1) = fac.solve(&f.map(|z| z.re));
                if f.iter().all(|z| z.im == 0.0) {
                    return (re.map(c), r1);
                }
                let (im, r2) = fac.solve(&f.map(|z| z.im));
                (re.zip_map(&im, C64::new), r1.max(r2))
            }
        }
    }
}

/// Off-diagonal size of the solution at the low nodes, relative to
/// `max(‖X_a‖, ‖S̃(x, λ_a)‖)`. Truncation alone makes the high nodes
/// (near `n = N`) slightly non-diagonal, so only `n ≤ max(1, N/8)` are inspected.
fn offdiag_ratio(nodes: &[Node], s: &[CMat], s_model: &[CMat]) -> f64 {
    let n_max = nodes.iter().map(|nd| nd.n).max().unwrap_or(1);
    let cutoff = (n_max / 8).max(1);
    // Near zeros of S̃ (e.g. x = π for integer ρ) both norms are roundoff.
    let floor = 1e-6 * s_model.iter().map(|sm| sm.norm()).fold(0.0, f64::max);
    s.iter()
        .zip(s_model)
        .zip(nodes)
        .filter(|(_, nd)| nd.n <= cutoff)
        .map(|((x, sm), _)| {
            let scale = x.norm().max(sm.norm()).max(floor);
            if scale == 0.0 {
                return 0.0;
            }
            let m = x.nrows();
            let off = (0..m)
                .flat_map(|r| (0..m).filter(move |&k| k != r).map(move |k| (r, k)))
                .map(|(r, k)| x[(r, k)].norm())
                .fold(0.0, f64::max);
            off / scale
        })
        .fold(0.0, f64::max)
}

/// `Σ S̃(x, μ)(2/π)C D̃(x, μ, λ_a)` over the dropped nodes, in the `Z` frame.
fn tail_rhs(set: &NodeSet, tail: &TailNodes, x: f64) -> CMat {
    let m = set.basis.dim();
    let v = &set.basis.vectors;
    let lambdas = set.lambdas();
    let mut out = CMat::zeros(lambdas.len() * m, m);
    for &(mu, blk) in &tail.mu {
        let u: Vec<C64> = set.basis.values.iter().map(|&ci| c(mu - ci)).collect();
        let g = &tail.gamma[blk];
        let w = v * CMat::from_fn(m, m, |j, i| g[(j, i)] * sin_over_root(u[j], x).re);
        for (ai, &la) in lambdas.iter().enumerate() {
            for i in 0..m {
                let d = overlap_integral(u[i], c(la - set.basis.values[i]), x).re;
                for r in 0..m {
                    out[(ai * m + i, r)] += w[(r, i)] * d;
                }
            }
        }
    }
    out
}

/// Assembles and solves the main equation at `x`, then its derivative.
///
/// Each row of `X_a` satisfies the same linear system, so one factorization
/// serves all `m` right-hand sides. `n_max` is only used in messages.
pub fn solve_at(set: &NodeSet, x: f64, n_max: usize) -> Result<MainSolution> {
    let m = set.basis.dim();
    let nn = set.len();
    let dim = nn * m;
    let cache = KernelCache::new(&set.basis, &set.lambdas(), &set.active, x);
    let v = &set.basis.vectors;
    // Unknowns Z_a = X_a V; row r of all Z_a solves z (I + C) = rhs, i.e. (I + C)ᵀ zᵀ = rhsᵀ.
    let mut a = CMat::identity(dim, dim);
    for b in 0..nn {
        if !set.active[b] {
            continue;
        }
        let sign = set.nodes[b].sign();
        let g = &set.gamma[b];
        for ai in 0..nn {
            let d = &cache.d[b][ai];
            for k in 0..m {
                for i in 0..m {
                    a[(ai * m + i, b * m + k)] += g[(k, i)] * (sign * d[i]);
                }
            }
        }
    }
    let mut f = CMat::zeros(dim, m);
    for ai in 0..nn {
        for i in 0..m {
            for r in 0..m {
                f[(ai * m + i, r)] = v[(r, i)] * cache.s[ai][i];
            }
        }
    }
    let (solver, condition) = DenseSolver::new(a)?;
    if condition > MAX_CONDITION || !condition.is_finite() {
        return Err(Error::IllConditioned(format!(
            "main equation at x = {x:.6} with N = {n_max} has condition number {condition:.3e} > {MAX_CONDITION:.0e}"
        )));
    }
    let (y, residual) = solver.solve(&f);
    let z: Vec<CMat> = (0..nn)
        .map(|b| CMat::from_fn(m, m, |r, k| y[(b * m + k, r)]))
        .collect();
    // Derivative: same matrix, right-hand side S̃'_a − Σ_b ±X_b α'_b S̃_b† S̃_a.
    let mut g = CMat::zeros(m, m);
    for b in 0..nn {
        if !set.active[b] {
            continue;
        }
        let w = &z[b] * &set.gamma[b];
        let sign = set.nodes[b].sign();
        for r in 0..m {
            for i in 0..m {
                g[(r, i)] += w[(r, i)] * (sign * cache.s[b][i]);
            }
        }
    }
    let mut fd = CMat::zeros(dim, m);
    for ai in 0..nn {
        for i in 0..m {
            for r in 0..m {
                fd[(ai * m + i, r)] = v[(r, i)] * cache.ds[ai][i] - g[(r, i)] * cache.s[ai][i];
            }
        }
    }
    let (yd, residual_d) = solver.solve(&fd);
    let vt = v.adjoint();
    let s: Vec<CMat> = z.iter().map(|zb| zb * &vt).collect();
    let ds = (0..nn)
        .map(|b| CMat::from_fn(m, m, |r, k| yd[(b * m + k, r)]) * &vt)
        .collect();
    let s_model: Vec<CMat> = (0..nn)
        .map(|b| set.basis.conjugate_diag(|i| c(cache.s[b][i])))
        .collect();
    let ds_model = (0..nn)
        .map(|b| set.basis.conjugate_diag(|i| c(cache.ds[b][i])))
        .collect();
    let offdiag = match &set.tail {
        Some(tail) => {
            let (yt, _) = solver.solve(&(f - tail_rhs(set, tail, x)));
            let st: Vec<CMat> = (0..nn)
                .map(|b| CMat::from_fn(m, m, |r, k| yt[(b * m + k, r)]) * &vt)
                .collect();
            offdiag_ratio(&set.nodes, &st, &s_model)
        }
        None => offdiag_ratio(&set.nodes, &s, &s_model),
    };
    Ok(MainSolution {
        x,
        s,
        ds,
        s_model,
        ds_model,
        condition,
        residual: residual.max(residual_d),
        offdiag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_estimate_tracks_exact_value() {
        let n = 40;
        let a = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + i as f64
            } else {
                ((i * 31 + j * 17) % 11) as f64 / 11.0 - 0.5
            }
        });
        let (fac, est) = Factored::new(a.clone()).unwrap();
        let exact = one_norm(&a) * one_norm(&a.clone().try_inverse().unwrap());
        assert!(
            est <= exact * (1.0 + 1e-10) && est >= exact / 3.0,
            "{est} vs {exact}"
        );
        let y = DMatrix::<f64>::from_fn(n, 1, |i, _| (i as f64).sin());
        let z = fac.solve_adjoint(&y);
        assert!((a.transpose() * z - y).norm() < 1e-10);
    }

    #[test]
    fn complex_adjoint_solve() {
        let n = 12;
        let a = CMat::from_fn(n, n, |i, j| {
            C64::new(
                if i == j {
                    3.0
                } else {
                    0.1 * (i as f64 - j as f64)
                },
                0.2 * ((i + 2 * j) % 5) as f64,
            )
        });
        let (fac, _) = Factored::new(a.clone()).unwrap();
        let y = CMat::from_fn(n, 1, |i, _| C64::new(i as f64, 1.0));
        assert!((a.adjoint() * fac.solve_adjoint(&y) - y).norm() < 1e-10);
    }
}

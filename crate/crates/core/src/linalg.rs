//! Small dense Hermitian linear algebra used throughout the crate.
//!
//! Holds the Hermitian and projector newtypes, the closed-form solution of the
//! matrix equation with a constant potential, the roots of the characteristic
//! polynomials that drive the eigenvalue asymptotics, and the projectors
//! `A^(s)` that drive the weight-matrix asymptotics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Hermitian check tolerance, relative to `max(1, ‖A‖)`.
pub const TOL_HERM: f64 = 1e-12;
/// Projector identity tolerance.
pub const TOL_PROJ: f64 = 1e-10;
/// Two roots `z_k`, `z_s` closer than this are treated as equal.
pub const TOL_ROOT_EQ: f64 = 1e-8;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Frobenius norm of `A - A†`.
pub fn hermitian_residual(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// Induced 2-norm.
pub fn spectral_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let sym = (a + a.adjoint()) * c(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub fn new(a: CMat) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "expected a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let res = hermitian_residual(&a);
        if res > TOL_HERM * a.norm().max(1.0) {
            return Err(Error::NonHermitian(format!("‖A − A†‖ = {res:.3e}")));
        }
        Ok(Self(a))
    }

    /// Averages `A` with its adjoint; returns the matrix and `‖A − A†‖`.
    pub fn symmetrized(a: CMat) -> (Self, f64) {
        let res = hermitian_residual(&a);
        let sym = (&a + a.adjoint()) * c(0.5);
        (Self(sym), res)
    }

    pub fn zeros(m: usize) -> Self {
        Self(CMat::zeros(m, m))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let m = d.len();
        Self(CMat::from_fn(
            m,
            m,
            |i, j| if i == j { c(d[i]) } else { c(0.0) },
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn eigen(&self) -> (Vec<f64>, CMat) {
        hermitian_eigen(&self.0)
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalProjector {
    mat: CMat,
    rank: usize,
}

impl OrthogonalProjector {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidDimension("projector must be square".into()));
        }
        let idem = (&mat * &mat - &mat).norm();
        let herm = hermitian_residual(&mat);
        if idem > TOL_PROJ || herm > TOL_PROJ {
            return Err(Error::InvalidInput(format!(
                "not an orthogonal projector: ‖P²−P‖ = {idem:.3e}, ‖P−P†‖ = {herm:.3e}"
            )));
        }
        let (vals, _) = hermitian_eigen(&mat);
        let rank = vals.iter().filter(|&&v| v > 0.5).count();
        Ok(Self { mat, rank })
    }

    /// Projector onto the span of the given orthonormal columns.
    pub fn from_orthonormal_columns(cols: &CMat) -> Self {
        let mat = cols * cols.adjoint();
        Self {
            mat,
            rank: cols.ncols(),
        }
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            mat: CMat::zeros(m, m),
            rank: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn complement(&self) -> Self {
        let m = self.dim();
        Self {
            mat: CMat::identity(m, m) - &self.mat,
            rank: m - self.rank,
        }
    }

    /// Orthonormal basis of the range, as columns (`m × rank`).
    pub fn range_basis(&self) -> CMat {
        let (vals, vecs) = hermitian_eigen(&self.mat);
        let m = self.dim();
        let idx: Vec<usize> = (0..m).filter(|&i| vals[i] > 0.5).collect();
        CMat::from_fn(m, idx.len(), |r, k| vecs[(r, idx[k])])
    }
}

/// The star-graph projector `T` with every entry equal to `1/m`.
pub fn make_graph_projector(m: usize) -> Result<OrthogonalProjector> {
    if m < 2 {
        return Err(Error::InvalidDimension(format!(
            "graph needs m ≥ 2 edges, got {m}"
        )));
    }
    let v = c(1.0 / m as f64);
    Ok(OrthogonalProjector {
        mat: CMat::from_element(m, m, v),
        rank: 1,
    })
}

// ---------------------------------------------------------------------------
// Entire functions of the spectral parameter
// ---------------------------------------------------------------------------

/// `sin(√u·x)/√u`, entire in `u`.
pub fn sin_over_root(u: C64, x: f64) -> C64 {
    if u.norm() < 1e-6 {
        let x2 = x * x;
        return c(x) * (c(1.0) - u * (x2 / 6.0) + u * u * (x2 * x2 / 120.0));
    }
    let nu = u.sqrt();
    (nu * x).sin() / nu
}

/// `cos(√u·x)`, entire in `u`.
pub fn cos_root(u: C64, x: f64) -> C64 {
    if u.norm() < 1e-6 {
        let x2 = x * x;
        return c(1.0) - u * (x2 / 2.0) + u * u * (x2 * x2 / 24.0);
    }
    (u.sqrt() * x).cos()
}

fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        c(1.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `∫₀ˣ g(a,t)·g(b,t) dt` with `g(u,t) = sin(√u t)/√u`.
///
/// Three branches keep the result accurate to near machine precision: a
/// double power series when both arguments are small, the Wronskian quotient
/// when they are well separated, and a sinc form when they are close.
pub fn overlap_integral(a: C64, b: C64, x: f64) -> C64 {
    if x == 0.0 {
        return c(0.0);
    }
    let x2 = x * x;
    let (ax, bx) = (a.norm() * x2, b.norm() * x2);
    if ax.max(bx) < 4.0 {
        const TERMS: usize = 24;
        let mut ca = [c(0.0); TERMS];
        let mut cb = [c(0.0); TERMS];
        ca[0] = c(1.0);
        cb[0] = c(1.0);
        for j in 1..TERMS {
            let d = ((2 * j) * (2 * j + 1)) as f64;
            ca[j] = ca[j - 1] * (-a * x2) / d;
            cb[j] = cb[j - 1] * (-b * x2) / d;
        }
        let mut sum = c(0.0);
        for (j, &aj) in ca.iter().enumerate() {
            for (k, &bk) in cb.iter().enumerate() {
                sum += aj * bk / (2 * j + 2 * k + 3) as f64;
            }
        }
        return sum * (x2 * x);
    }
    if (a - b).norm() * x2 >= 1.0 {
        let (ga, gb) = (sin_over_root(a, x), sin_over_root(b, x));
        let (da, db) = (cos_root(a, x), cos_root(b, x));
        return (ga * db - da * gb) / (a - b);
    }
    let nu = a.sqrt();
    let mut om = b.sqrt();
    if (nu - om).norm() > (nu + om).norm() {
        om = -om;
    }
    (sinc((nu - om) * x) - sinc((nu + om) * x)) * x / (nu * om * 2.0)
}

// ---------------------------------------------------------------------------
// Constant potentials
// ---------------------------------------------------------------------------

/// Diagonalization `C = V·diag(c)·V†` of a constant Hermitian potential.
///
/// `vectors` holds the eigenvectors as columns, so `V† = U` in the usual
/// `C = U†·diag(c)·U` notation.
#[derive(Clone, Debug)]
pub struct ConstantPotentialBasis {
    pub potential: HermitianMatrix,
    pub vectors: CMat,
    pub values: Vec<f64>,
}

impl ConstantPotentialBasis {
    pub fn new(potential: HermitianMatrix) -> Result<Self> {
        let (values, vectors) = potential.eigen();
        let basis = Self {
            potential,
            vectors,
            values,
        };
        let err = (basis.rebuild() - basis.potential.matrix()).norm();
        if err > 1e-10 * basis.potential.matrix().norm().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "eigen-decomposition error {err:.3e}"
            )));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    fn rebuild(&self) -> CMat {
        self.conjugate_diag(|i| c(self.values[i]))
    }

    /// `V·diag(f(i))·V†`.
    pub fn conjugate_diag(&self, f: impl Fn(usize) -> C64) -> CMat {
        let m = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..m {
            let s = f(k);
            for r in 0..m {
                scaled[(r, k)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Closed-form `(S̃(x,λ), S̃'(x,λ))` for a constant potential.
pub fn constant_s(basis: &ConstantPotentialBasis, lambda: C64, x: f64) -> (CMat, CMat) {
    let s = basis.conjugate_diag(|i| sin_over_root(lambda - basis.values[i], x));
    let ds = basis.conjugate_diag(|i| cos_root(lambda - basis.values[i], x));
    (s, ds)
}

// ---------------------------------------------------------------------------
// Characteristic polynomial roots and asymptotic projectors
// ---------------------------------------------------------------------------

fn check_boundary_pair(h: &HermitianMatrix, t: &OrthogonalProjector) -> Result<()> {
    if h.dim() != t.dim() {
        return Err(Error::InvalidDimension("H and T dimensions differ".into()));
    }
    let tht = t.matrix() * h.matrix() * t.matrix();
    let res = (tht - h.matrix()).norm();
    if res > 1e-10 * h.matrix().norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "H ≠ T·H·T (residual {res:.3e})"
        )));
    }
    Ok(())
}

/// Eigenvalues of `B†·X·B` (ascending) and the lifted eigenvectors `B·w`.
pub(crate) fn compressed_eigen(x: &CMat, basis: &CMat) -> (Vec<f64>, CMat) {
    if basis.ncols() == 0 {
        return (Vec::new(), CMat::zeros(basis.nrows(), 0));
    }
    let compressed = basis.adjoint() * x * basis;
    let (vals, w) = hermitian_eigen(&compressed);
    (vals, basis * w)
}

/// `Θ = T(Ω − H)T + T⊥ Ω T⊥`.
pub fn theta_matrix(
    omega: &HermitianMatrix,
    h: &HermitianMatrix,
    t: &OrthogonalProjector,
) -> HermitianMatrix {
    let tm = t.matrix();
    let tp = t.complement();
    let tpm = tp.matrix();
    let th = tm * (omega.matrix() - h.matrix()) * tm + tpm * omega.matrix() * tpm;
    HermitianMatrix::symmetrized(th).0
}

/// Roots `z_1..z_p` of `P₁(z) = z^{p−m} det(zI − T(Ω−H)T)`, ascending.
pub fn roots_p1(
    omega: &HermitianMatrix,
    h: &HermitianMatrix,
    t: &OrthogonalProjector,
) -> Result<Vec<f64>> {
    check_boundary_pair(h, t)?;
    let x = omega.matrix() - h.matrix();
    Ok(compressed_eigen(&x, &t.range_basis()).0)
}

/// Roots `z_{p+1}..z_m`, ascending: the eigenvalues of `T⊥ΩT⊥` on `Ran T⊥`.
///
/// In the graph case these are the roots of `(1/m)·d/dz ∏(z − ω_j)`.
pub fn roots_p2(
    omega: &HermitianMatrix,
    h: &HermitianMatrix,
    t: &OrthogonalProjector,
) -> Result<Vec<f64>> {
    check_boundary_pair(h, t)?;
    Ok(compressed_eigen(omega.matrix(), &t.complement().range_basis()).0)
}

/// All `m` roots `z_1..z_m` (each block ascending).
pub fn all_roots(
    omega: &HermitianMatrix,
    h: &HermitianMatrix,
    t: &OrthogonalProjector,
) -> Result<Vec<f64>> {
    let mut z = roots_p1(omega, h, t)?;
    z.extend(roots_p2(omega, h, t)?);
    Ok(z)
}

/// Indices `k` in the same block as `s` with `z_k = z_s`.
pub fn root_cluster(z: &[f64], p: usize, s: usize) -> Vec<usize> {
    let block = if s < p { 0..p } else { p..z.len() };
    block
        .filter(|&k| (z[k] - z[s]).abs() <= TOL_ROOT_EQ)
        .collect()
}

/// The projectors `A^(s) = U†T_sU` from the spectral decomposition of `Θ`.
pub fn a_matrices_general(
    theta: &HermitianMatrix,
    t: &OrthogonalProjector,
    z: &[f64],
) -> Result<Vec<OrthogonalProjector>> {
    let m = t.dim();
    let p = t.rank();
    if z.len() != m {
        return Err(Error::InvalidDimension(format!(
            "expected {m} roots, got {}",
            z.len()
        )));
    }
    let (v1, w1) = compressed_eigen(theta.matrix(), &t.range_basis());
    let (v2, w2) = compressed_eigen(theta.matrix(), &t.complement().range_basis());
    let mut vectors = CMat::zeros(m, m);
    let mut values = Vec::with_capacity(m);
    for (k, &v) in v1.iter().enumerate() {
        vectors.set_column(k, &w1.column(k));
        values.push(v);
    }
    for (k, &v) in v2.iter().enumerate() {
        vectors.set_column(p + k, &w2.column(k));
        values.push(v);
    }
    for k in 0..m {
        if (values[k] - z[k]).abs() > TOL_ROOT_EQ * (1.0 + z[k].abs()) {
            return Err(Error::Inconsistent(format!(
                "eigenvalue {k} of Θ is {:.12} but z = {:.12}",
                values[k], z[k]
            )));
        }
    }
    Ok((0..m)
        .map(|s| {
            let cluster = root_cluster(z, p, s);
            let cols = CMat::from_fn(m, cluster.len(), |r, j| vectors[(r, cluster[j])]);
            OrthogonalProjector::from_orthonormal_columns(&cols)
        })
        .collect())
}

fn product_except(omega: &[f64], z: f64, skip: &[usize]) -> f64 {
    omega
        .iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, &w)| z - w)
        .product()
}

/// `A(z)` of the graph case: `a_jj = d/dz ∏_{s≠j}(z−ω_s)`, `a_jk = −∏_{s≠j,k}(z−ω_s)`.
pub fn graph_a_polynomial(omega: &[f64], z: f64) -> CMat {
    let m = omega.len();
    CMat::from_fn(m, m, |j, k| {
        if j == k {
            c((0..m)
                .filter(|&t| t != j)
                .map(|t| product_except(omega, z, &[j, t]))
                .sum())
        } else {
            c(-product_except(omega, z, &[j, k]))
        }
    })
}

/// `P₂'(z) = (1/m)·d²/dz² ∏(z − ω_j)`.
pub fn graph_p2_derivative(omega: &[f64], z: f64) -> f64 {
    let m = omega.len();
    let mut sum = 0.0;
    for j in 0..m {
        for k in 0..m {
            if j != k {
                sum += product_except(omega, z, &[j, k]);
            }
        }
    }
    sum / m as f64
}

/// `P₂(z) = (1/m)·d/dz ∏(z − ω_j)`.
pub fn graph_p2(omega: &[f64], z: f64) -> f64 {
    let m = omega.len();
    (0..m).map(|j| product_except(omega, z, &[j])).sum::<f64>() / m as f64
}

/// `A^(1) = T` and `A^(s) = (1/m)·A(z_s)/P₂'(z_s)` for `s ≥ 2`.
///
/// The residue formula assumes simple roots of `P₂`; with a repeated root the
/// projectors are taken from the spectral decomposition of `Θ` instead.
pub fn a_matrices_graph(omega: &[f64], z: &[f64]) -> Result<Vec<OrthogonalProjector>> {
    let m = omega.len();
    if z.len() != m {
        return Err(Error::InvalidDimension(format!(
            "expected {m} roots, got {}",
            z.len()
        )));
    }
    let t = make_graph_projector(m)?;
    let simple = z[1..]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() >= TOL_ROOT_EQ)
        && z[1..]
            .iter()
            .all(|&zs| graph_p2_derivative(omega, zs).abs() > TOL_ROOT_EQ);
    if !simple {
        log::debug!("P₂ has a repeated root; falling back to the spectral construction of A^(s)");
        let h = omega.iter().sum::<f64>() / m as f64 - z[0];
        let om = HermitianMatrix::from_real_diagonal(omega);
        let hm = HermitianMatrix::symmetrized(t.matrix() * c(h)).0;
        return a_matrices_general(&theta_matrix(&om, &hm, &t), &t, z);
    }
    let mut out = vec![t.clone()];
    for &zs in &z[1..] {
        let a =
            graph_a_polynomial(omega, zs) * c(1.0 / (m as f64 * graph_p2_derivative(omega, zs)));
        out.push(OrthogonalProjector::new(
            HermitianMatrix::symmetrized(a).0.into_matrix(),
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn diag(d: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(d)
    }

    fn close(a: &CMat, b: &CMat, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn graph_projector_entries() {
        let t = make_graph_projector(2).unwrap();
        assert!(close(t.matrix(), &CMat::from_element(2, 2, c(0.5)), 0.0));
        let t3 = make_graph_projector(3).unwrap();
        assert_eq!(t3.rank(), 1);
        assert!(t3
            .matrix()
            .iter()
            .all(|v| (*v - c(1.0 / 3.0)).norm() < 1e-16));
        assert!(close(&(t.matrix() * t.matrix()), t.matrix(), 0.0));
        assert!(matches!(
            make_graph_projector(1),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 1)] = c(1.0);
        assert!(matches!(
            HermitianMatrix::new(a),
            Err(Error::NonHermitian(_))
        ));
    }

    #[test]
    fn p1_zero_and_graph_cases() {
        let t = make_graph_projector(3).unwrap();
        let z = roots_p1(&HermitianMatrix::zeros(3), &HermitianMatrix::zeros(3), &t).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].abs() < 1e-14);

        let t2 = make_graph_projector(2).unwrap();
        let z = roots_p1(&diag(&[1.0, 3.0]), &HermitianMatrix::zeros(2), &t2).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn p1_matches_determinant_scan() {
        // Oracle: det(zI − TΩT) = z^{m−p} P₁(z); scan for a sign change away from 0.
        let t = make_graph_projector(3).unwrap();
        let omega = diag(&[1.0, 2.0, 3.0]);
        let tot = t.matrix() * omega.matrix() * t.matrix();
        let f = |z: f64| {
            let m = CMat::identity(3, 3) * c(z) - &tot;
            m.determinant().re / (z * z)
        };
        let (mut lo, mut hi) = (0.5, 5.0);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let z = roots_p1(&omega, &HermitianMatrix::zeros(3), &t).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-12);
        assert!((z[0] - lo).abs() < 1e-10);
    }

    #[test]
    fn p2_graph_cases() {
        let t2 = make_graph_projector(2).unwrap();
        let z = roots_p2(&diag(&[0.3, 1.7]), &HermitianMatrix::zeros(2), &t2).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);

        let t3 = make_graph_projector(3).unwrap();
        let z = roots_p2(&HermitianMatrix::zeros(3), &HermitianMatrix::zeros(3), &t3).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-14));

        // Oracle: z² − 2z + 2/3 = 0 by the quadratic formula.
        let z = roots_p2(&diag(&[0.0, 1.0, 2.0]), &HermitianMatrix::zeros(3), &t3).unwrap();
        let d = (1.0f64 - 2.0 / 3.0).sqrt();
        assert!((z[0] - (1.0 - d)).abs() < 1e-12);
        assert!((z[1] - (1.0 + d)).abs() < 1e-12);
        for &zs in &z {
            assert!(graph_p2(&[0.0, 1.0, 2.0], zs).abs() < 1e-12);
        }
    }

    #[test]
    fn h_must_be_compressed_by_t() {
        let t = make_graph_projector(2).unwrap();
        let h = diag(&[1.0, 0.0]);
        assert!(roots_p1(&HermitianMatrix::zeros(2), &h, &t).is_err());
    }

    #[test]
    fn constant_s_closed_forms() {
        let zero = ConstantPotentialBasis::new(HermitianMatrix::zeros(2)).unwrap();
        let (s, ds) = constant_s(&zero, c(1.0), PI / 2.0);
        assert!(close(&s, &CMat::identity(2, 2), 1e-14));
        assert!(close(&ds, &CMat::zeros(2, 2), 1e-14));
        let (s, _) = constant_s(&zero, c(0.0), PI);
        assert!(close(&s, &(CMat::identity(2, 2) * c(PI)), 1e-14));

        let b = ConstantPotentialBasis::new(diag(&[1.0, 2.0])).unwrap();
        let (s, _) = constant_s(&b, c(3.0), 1.0);
        let want = diag(&[(2f64.sqrt()).sin() / 2f64.sqrt(), 1f64.sin()]);
        assert!(close(&s, want.matrix(), 1e-14));
    }

    #[test]
    fn overlap_integral_branches_agree_with_quadrature() {
        // Oracle: composite Gauss-Legendre (5 points) on 400 panels.
        let gl = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let quad = |a: C64, b: C64, x: f64| {
            let panels = 400;
            let h = x / panels as f64;
            let mut sum = c(0.0);
            for p in 0..panels {
                let mid = (p as f64 + 0.5) * h;
                for &(node, w) in &gl {
                    let t = mid + 0.5 * h * node;
                    sum += sin_over_root(a, t) * sin_over_root(b, t) * (0.5 * h * w);
                }
            }
            sum
        };
        let cases = [
            (c(0.1), c(0.2), 1.0),
            (c(1.0), c(1.0), PI),
            (c(4.0), c(1.0), PI),
            (c(900.0), c(900.0 + 1e-7), PI),
            (c(900.0), c(930.25), 2.0),
            (c(-3.0), c(-3.0), PI),
            (c(0.0), c(50.0), PI),
            (C64::new(5.0, 0.3), c(5.2), 1.3),
        ];
        for (a, b, x) in cases {
            let got = overlap_integral(a, b, x);
            let want = quad(a, b, x);
            assert!(
                (got - want).norm() <= 1e-10 * want.norm().max(1e-3),
                "{a} {b} {x}: {got} vs {want}"
            );
        }
        assert_eq!(overlap_integral(c(3.0), c(2.0), 0.0), c(0.0));
        let v = overlap_integral(c(1.0), c(1.0), PI);
        assert!((v - c(PI / 2.0)).norm() < 1e-14);
    }

    #[test]
    fn a_general_zero_theta() {
        let t = make_graph_projector(3).unwrap();
        let a = a_matrices_general(&HermitianMatrix::zeros(3), &t, &[0.0; 3]).unwrap();
        assert!(close(a[0].matrix(), t.matrix(), 1e-12));
        assert!(close(a[1].matrix(), t.complement().matrix(), 1e-12));
        assert!(close(a[2].matrix(), t.complement().matrix(), 1e-12));
    }

    #[test]
    fn a_general_rejects_inconsistent_roots() {
        let t = make_graph_projector(2).unwrap();
        assert!(matches!(
            a_matrices_general(&HermitianMatrix::zeros(2), &t, &[0.0, 1.0]),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn a_graph_hand_expansion() {
        let a = a_matrices_graph(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
        assert!(close(a[1].matrix(), &want, 1e-14));
        assert!(close(
            a[0].matrix(),
            make_graph_projector(2).unwrap().matrix(),
            0.0
        ));
    }

    #[test]
    fn a_graph_degenerate_falls_back() {
        let omega = [0.7, 0.7, 0.7];
        let t = make_graph_projector(3).unwrap();
        let z = [0.7, 0.7, 0.7];
        let a = a_matrices_graph(&omega, &z).unwrap();
        assert!(close(a[1].matrix(), t.complement().matrix(), 1e-12));
        assert_eq!(a[1].rank(), 2);
    }

    #[test]
    fn a_graph_matches_general_and_sums() {
        let omega = [0.0, 1.0, 2.0];
        let t = make_graph_projector(3).unwrap();
        let om = diag(&omega);
        let h = HermitianMatrix::zeros(3);
        let z = all_roots(&om, &h, &t).unwrap();
        let graph = a_matrices_graph(&omega, &z).unwrap();
        let general = a_matrices_general(&theta_matrix(&om, &h, &t), &t, &z).unwrap();
        for (g, q) in graph.iter().zip(&general) {
            assert!(close(g.matrix(), q.matrix(), 1e-8));
        }
        let sum = graph[1].matrix() + graph[2].matrix();
        assert!(close(&sum, t.complement().matrix(), 1e-10));
    }

    fn hermitian_strategy(m: usize) -> impl Strategy<Value = CMat> {
        proptest::collection::vec(-2.0f64..2.0, 2 * m * m).prop_map(move |v| {
            let a = CMat::from_fn(m, m, |i, j| C64::new(v[i * m + j], v[m * m + i * m + j]));
            (&a + a.adjoint()) * c(0.5)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn general_projectors_are_orthogonal_projectors(q in hermitian_strategy(3), hv in -2.0f64..2.0) {
            let t = make_graph_projector(3).unwrap();
            let omega = HermitianMatrix::new(q).unwrap();
            let h = HermitianMatrix::symmetrized(t.matrix() * c(hv)).0;
            let z = all_roots(&omega, &h, &t).unwrap();
            let a = a_matrices_general(&theta_matrix(&omega, &h, &t), &t, &z).unwrap();
            for p in &a {
                let m = p.matrix();
                prop_assert!((m * m - m).norm() <= 1e-10);
                prop_assert!(hermitian_residual(m) <= 1e-10);
            }
            for s in 0..3 {
                for k in 0..3 {
                    let disjoint = (s < 1) != (k < 1) || (z[s] - z[k]).abs() > TOL_ROOT_EQ;
                    if disjoint {
                        prop_assert!((a[s].matrix() * a[k].matrix()).norm() <= 1e-10);
                    }
                }
            }
            prop_assert!(close(a[0].matrix(), t.matrix(), 1e-10));
        }

        #[test]
        fn roots_invariant_under_commuting_unitary(q in hermitian_strategy(3), phase in 0.0f64..6.0, angle in 0.0f64..6.0) {
            let t = make_graph_projector(3).unwrap();
            let bt = t.range_basis();
            let bp = t.complement().range_basis();
            let rot = CMat::from_row_slice(2, 2, &[
                C64::new(angle.cos(), 0.0), C64::new(0.0, angle.sin()),
                C64::new(0.0, angle.sin()), C64::new(angle.cos(), 0.0),
            ]);
            let u = &bt * C64::from_polar(1.0, phase) * bt.adjoint() + &bp * rot * bp.adjoint();
            let omega = HermitianMatrix::new(q.clone()).unwrap();
            let h = HermitianMatrix::symmetrized(t.matrix() * c(0.4)).0;
            let z0 = all_roots(&omega, &h, &t).unwrap();
            let omega_u = HermitianMatrix::symmetrized(&u * q * u.adjoint()).0;
            let h_u = HermitianMatrix::symmetrized(&u * h.matrix() * u.adjoint()).0;
            let z1 = all_roots(&omega_u, &h_u, &t).unwrap();
            for (a, b) in z0.iter().zip(&z1) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }

        #[test]
        fn constant_s_self_wronskian_vanishes(q in hermitian_strategy(2), re in -20.0f64..60.0, im in -3.0f64..3.0, x in 0.0f64..3.1) {
            let basis = ConstantPotentialBasis::new(HermitianMatrix::new(q).unwrap()).unwrap();
            let lambda = C64::new(re, im);
            let (s, ds) = constant_s(&basis, lambda, x);
            let (sb, dsb) = constant_s(&basis, lambda.conj(), x);
            let w = sb.adjoint() * &ds - dsb.adjoint() * &s;
            prop_assert!(w.norm() <= 1e-10 * (1.0 + s.norm() * ds.norm()));
        }
    }
}

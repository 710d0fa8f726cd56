//! Kernels `D̃(x, λ, μ)` of the model problem in closed form.

use crate::linalg::{
    c, constant_s, cos_root, overlap_integral, sin_over_root, CMat, ConstantPotentialBasis, C64,
};

/// `D̃(x, λ, μ) = ∫₀ˣ S̃†(t, λ̄) S̃(t, μ) dt`, evaluated in the eigenbasis of `Q̃`.
pub fn kernel_d(basis: &ConstantPotentialBasis, x: f64, lambda: C64, mu: C64) -> CMat {
    basis.conjugate_diag(|i| {
        let ci = c(basis.values[i]);
        overlap_integral(lambda - ci, mu - ci, x)
    })
}

/// `∂ₓD̃(x, λ, μ) = S̃†(x, λ̄) S̃(x, μ)`.
pub fn kernel_dx(basis: &ConstantPotentialBasis, x: f64, lambda: C64, mu: C64) -> CMat {
    let a = constant_s(basis, lambda.conj(), x).0;
    let b = constant_s(basis, mu, x).0;
    a.adjoint() * b
}

/// The Wronskian quotient `⟨S̃†(x, λ̄), S̃(x, μ)⟩ / (λ − μ)` for `λ ≠ μ`.
pub fn kernel_d_wronskian(basis: &ConstantPotentialBasis, x: f64, lambda: C64, mu: C64) -> CMat {
    let (s1, d1) = constant_s(basis, lambda.conj(), x);
    let (s2, d2) = constant_s(basis, mu, x);
    (s1.adjoint() * d2 - d1.adjoint() * s2) / (lambda - mu)
}

/// Values at one mesh point `x` for a fixed list of real nodes, stored in
/// the eigenbasis of `Q̃` where every model quantity is diagonal.
pub struct KernelCache {
    pub x: f64,
    /// `sin(√(λ_a − c_i) x)/√(λ_a − c_i)`, indexed `[a][i]`.
    pub s: Vec<Vec<f64>>,
    /// `cos(√(λ_a − c_i) x)`.
    pub ds: Vec<Vec<f64>>,
    /// `D̃` diagonal entries, indexed `[b][a][i]`; only rows with `active[b]`.
    pub d: Vec<Vec<Vec<f64>>>,
}

impl KernelCache {
    pub fn new(basis: &ConstantPotentialBasis, lambdas: &[f64], active: &[bool], x: f64) -> Self {
        let m = basis.dim();
        let shifted = |a: usize, i: usize| c(lambdas[a] - basis.values[i]);
        let s = (0..lambdas.len())
            .map(|a| (0..m).map(|i| sin_over_root(shifted(a, i), x).re).collect())
            .collect();
        let ds = (0..lambdas.len())
            .map(|a| (0..m).map(|i| cos_root(shifted(a, i), x).re).collect())
            .collect();
        let d = (0..lambdas.len())
            .map(|b| {
                if !active[b] {
                    return Vec::new();
                }
                (0..lambdas.len())
                    .map(|a| {
                        (0..m)
                            .map(|i| overlap_integral(shifted(b, i), shifted(a, i), x).re)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { x, s, ds, d }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::HermitianMatrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn basis(diag: &[f64], off: f64) -> ConstantPotentialBasis {
        let mut q = HermitianMatrix::from_real_diagonal(diag).into_matrix();
        q[(0, 1)] = C64::new(off, 0.3 * off);
        q[(1, 0)] = C64::new(off, -0.3 * off);
        ConstantPotentialBasis::new(HermitianMatrix::new(q).unwrap()).unwrap()
    }

    /// Composite Simpson quadrature of `S̃†(t,λ)S̃(t,μ)` on `[0, x]`.
    fn quadrature(b: &ConstantPotentialBasis, x: f64, l: f64, mu: f64) -> CMat {
        let n = 2000;
        let h = x / n as f64;
        let mut acc = CMat::zeros(b.dim(), b.dim());
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += kernel_dx(b, i as f64 * h, c(l), c(mu)) * c(w * h / 3.0);
        }
        acc
    }

    #[test]
    fn empty_integral_at_zero() {
        let b = basis(&[0.4, -1.0, 2.0], 0.5);
        assert_eq!(kernel_d(&b, 0.0, c(3.0), c(7.0)).norm(), 0.0);
    }

    #[test]
    fn zero_potential_coincident_value() {
        let b = basis(&[0.0, 0.0, 0.0], 0.0);
        let d = kernel_d(&b, PI, c(1.0), c(1.0));
        assert!((d - CMat::identity(3, 3) * c(PI / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn against_quadrature() {
        let b = basis(&[0.4, -1.0, 2.0], 0.5);
        for &(l, mu) in &[(4.0, 1.0), (9.3, 9.3 + 1e-7), (0.2, 25.0), (-1.5, 3.0)] {
            let err = (kernel_d(&b, PI, c(l), c(mu)) - quadrature(&b, PI, l, mu)).norm();
            assert!(err < 1e-10, "{l} {mu}: {err:.3e}");
        }
    }

    #[test]
    fn cache_matches_matrix_kernel() {
        let b = basis(&[0.4, -1.0], 0.5);
        let lambdas = [0.3, 2.0, 2.0 + 1e-9, 30.0];
        let cache = KernelCache::new(&b, &lambdas, &[true; 4], 1.3);
        for bi in 0..4 {
            for ai in 0..4 {
                let from_cache = b.conjugate_diag(|i| c(cache.d[bi][ai][i]));
                assert!(
                    (from_cache - kernel_d(&b, 1.3, c(lambdas[bi]), c(lambdas[ai]))).norm() < 1e-14
                );
            }
        }
    }

    proptest! {
        #[test]
        fn two_forms_agree(x in 0.05f64..PI, l in -2.0f64..60.0, mu in -2.0f64..60.0) {
            prop_assume!((l - mu).abs() > 1e-3);
            let b = basis(&[0.4, -1.0, 2.0], 0.5);
            let d = kernel_d(&b, x, c(l), c(mu));
            let w = kernel_d_wronskian(&b, x, c(l), c(mu));
            prop_assert!((d.clone() - w).norm() <= 1e-9 * (1.0 + d.norm()));
        }

        #[test]
        fn adjoint_symmetry(x in 0.0f64..PI, l in -2.0f64..60.0, mu in -2.0f64..60.0) {
            let b = basis(&[0.4, -1.0, 2.0], 0.5);
            let d = kernel_d(&b, x, c(l), c(mu));
            let e = kernel_d(&b, x, c(mu), c(l));
            prop_assert!((d - e.adjoint()).norm() <= 1e-10);
        }
    }
}

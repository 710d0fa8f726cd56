//! Closed-form correction for the dropped tail `n > N`.
//!
//! For large `n` the weight matrices of the data and of the model differ by
//! `(2/π)C_k + O(1/n)` with constant matrices `C_k`. Summed over `n > N` with
//! `S̃(x, λ) ≈ sin(ρx)/ρ`, these terms contribute
//!
//! ```text
//! ε_tail(x) = −(4/π) [ C_I Σ_{n>N} sin((2n−1)x)/(n−1/2) + C_II Σ_{n>N} sin(2nx)/n ],
//! ε₀_tail(π) = (2/π) C_I Σ_{n>N} 1/(n−1/2)²,
//! ```
//!
//! where `C_I` sums `C_k` over the first block (`k ≤ p`) and `C_II` over the
//! second. The full sums over `n ≥ 1` are known in closed form on `(0, π)`,
//! so the remainders are the closed form minus the partial sums. Without this
//! term the truncated reconstruction converges only like `N^{-1/2}` in `L₂`
//! when `Q(0)` or `Q(π)` differs from `Q̃`.

use std::f64::consts::PI;

use crate::asymptotics::fit_matrix_constant;
use crate::linalg::{c, CMat};
use crate::spectral::SpectralDataSet;

#[derive(Clone, Debug)]
pub struct TailCorrection {
    pub n_max: usize,
    pub c_first: CMat,
    pub c_second: CMat,
}

impl TailCorrection {
    /// Fits `C_I`, `C_II` on `n ∈ [N/2, N]`; `p` is the rank of `T`.
    /// Returns `None` when `N < 4`, which leaves too few points for the fit.
    pub fn fit(data: &SpectralDataSet, model_data: &SpectralDataSet, p: usize) -> Option<Self> {
        let (m, n_max) = (data.m(), data.n_max());
        if n_max < 4 {
            return None;
        }
        let block = |ks: std::ops::RangeInclusive<usize>| {
            let pts: Vec<(f64, CMat)> = (n_max / 2..=n_max)
                .map(|n| {
                    let mut acc = CMat::zeros(m, m);
                    for k in ks.clone() {
                        acc += data.entry(n, k).alpha_prime.matrix()
                            - model_data.entry(n, k).alpha_prime.matrix();
                    }
                    (n as f64, acc * c(PI / 2.0))
                })
                .collect();
            let fitted = fit_matrix_constant(&pts);
            (&fitted + fitted.adjoint()) * c(0.5)
        };
        Some(Self {
            n_max,
            c_first: block(1..=p),
            c_second: block(p + 1..=m),
        })
    }

    /// `Σ_{n>N} sin((2n−1)x)/(n−1/2)` and `Σ_{n>N} sin(2nx)/n`, with the
    /// one-sided limits at `x = 0` and `x = π`.
    fn remainders(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            return (PI / 2.0, PI / 2.0);
        }
        if x >= PI {
            return (PI / 2.0, -PI / 2.0);
        }
        let (mut odd, mut even) = (0.0, 0.0);
        for n in 1..=self.n_max {
            let k = (2 * n - 1) as f64;
            odd += (k * x).sin() / k;
            even += (2.0 * n as f64 * x).sin() / n as f64;
        }
        (2.0 * (PI / 4.0 - odd), (PI - 2.0 * x) / 2.0 - even)
    }

    pub fn epsilon(&self, x: f64) -> CMat {
        let (odd, even) = self.remainders(x);
        (&self.c_first * c(odd) + &self.c_second * c(even)) * c(-4.0 / PI)
    }

    pub fn epsilon0_at_pi(&self) -> CMat {
        // Σ_{n>N} 1/(n − 1/2)², summed directly far out and closed with 1/(n − 1/2).
        let far = self.n_max + 100_000;
        let mut sum: f64 = (self.n_max + 1..=far)
            .rev()
            .map(|n| 1.0 / (n as f64 - 0.5).powi(2))
            .sum();
        sum += 1.0 / (far as f64);
        &self.c_first * c(2.0 / PI * sum)
    }
}

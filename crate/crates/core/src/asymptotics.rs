//! Asymptotic coefficients `z_k`, `A^(s)` and the characterization checks.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    a_matrices_general, a_matrices_graph, all_roots, c, compressed_eigen, graph_p2,
    hermitian_eigen, make_graph_projector, spectral_norm, theta_matrix, CMat, HermitianMatrix,
    OrthogonalProjector, TOL_ROOT_EQ,
};
use crate::problem::{MatrixProblem, ProblemKind};
use crate::spectral::{RawSpectralData, SpectralDataSet};

/// Fitted `z` values closer than this (relative) are treated as equal.
pub const Z_FIT_MERGE: f64 = 5e-3;
/// Completeness-surrogate threshold on the smallest Gram singular value.
pub const SURROGATE_THRESHOLD: f64 = 1e-6;
/// Bounds on the tail residuals used by the asymptotics checks.
pub const KAPPA_TAIL_BOUND: f64 = 1.0;
pub const K_TAIL_BOUND: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct AsymptoticCoefficients {
    pub t: OrthogonalProjector,
    pub theta: HermitianMatrix,
    pub z: Vec<f64>,
    /// `A^(s)` for every `s`; equal `z` in one block give equal projectors.
    pub a: Vec<OrthogonalProjector>,
    /// Edge means `ω_j` (graph case only).
    pub graph_omega: Option<Vec<f64>>,
}

impl AsymptoticCoefficients {
    /// Coefficients of `L(Q, T, H)` with `Ω = (1/2)∫Q`.
    pub fn from_parts(
        t: &OrthogonalProjector,
        omega: &HermitianMatrix,
        h: &HermitianMatrix,
    ) -> Result<Self> {
        let theta = theta_matrix(omega, h, t);
        let z = all_roots(omega, h, t)?;
        let a = a_matrices_general(&theta, t, &z)?;
        Ok(Self {
            t: t.clone(),
            theta,
            z,
            a,
            graph_omega: None,
        })
    }

    /// Graph coefficients from the edge means and `z_1`.
    pub fn from_graph(omega: &[f64], z1: f64) -> Result<Self> {
        let m = omega.len();
        let t = make_graph_projector(m)?;
        let h = omega.iter().sum::<f64>() / m as f64 - z1;
        let om = HermitianMatrix::from_real_diagonal(omega);
        let hm = HermitianMatrix::symmetrized(t.matrix() * c(h)).0;
        let theta = theta_matrix(&om, &hm, &t);
        let z = all_roots(&om, &hm, &t)?;
        let a = a_matrices_graph(omega, &z)?;
        Ok(Self {
            t,
            theta,
            z,
            a,
            graph_omega: Some(omega.to_vec()),
        })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.t.rank()
    }

    /// Main part `n − 1/2` or `n` of `ρ_nk`; `k` is one-based.
    pub fn center(&self, n: usize, k: usize) -> f64 {
        if k <= self.p() {
            n as f64 - 0.5
        } else {
            n as f64
        }
    }

    /// Distinct clusters `{k : z_k = z_s}` (zero-based), block by block.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let p = self.p();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for s in 0..self.dim() {
            let cl = crate::linalg::root_cluster(&self.z, p, s);
            if !out.contains(&cl) {
                out.push(cl);
            }
        }
        out
    }

    /// Graph-case boundary coefficient `h = (1/m)Σω_j − z_1`.
    pub fn graph_h(&self) -> Option<f64> {
        self.graph_omega
            .as_ref()
            .map(|w| w.iter().sum::<f64>() / w.len() as f64 - self.z[0])
    }
}

pub fn coefficients_from_problem(problem: &MatrixProblem) -> Result<AsymptoticCoefficients> {
    let omega = problem.omega();
    match problem.kind() {
        ProblemKind::Graph { .. } => {
            let w: Vec<f64> = (0..problem.dim())
                .map(|j| omega.matrix()[(j, j)].re)
                .collect();
            let m = w.len() as f64;
            let h = problem.boundary_matrix().matrix().trace().re;
            AsymptoticCoefficients::from_graph(&w, w.iter().sum::<f64>() / m - h)
        }
        ProblemKind::General => AsymptoticCoefficients::from_parts(
            problem.projector(),
            &omega,
            problem.boundary_matrix(),
        ),
    }
}

/// `α'` summed over the indices `ks` (one-based) of level `n`.
fn level_sum(data: &SpectralDataSet, n: usize, ks: impl Iterator<Item = usize>) -> CMat {
    let m = data.m();
    ks.fold(CMat::zeros(m, m), |acc, k| {
        acc + data.entry(n, k).alpha_prime.matrix()
    })
}

fn tail_range(n_max: usize) -> std::ops::RangeInclusive<usize> {
    (n_max / 2).max(1)..=n_max
}

/// Least-squares fit of `y ≈ a + b/t` over points `(t, y)`; returns `a`.
fn fit_constant_plus_inverse(points: &[(f64, f64)]) -> f64 {
    if points.len() < 3 {
        return points.iter().map(|p| p.1).sum::<f64>() / points.len().max(1) as f64;
    }
    let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, y) in points {
        let x = 1.0 / n;
        s1 += 1.0;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += x * y;
    }
    let det = s1 * sxx - sx * sx;
    (sxx * sy - sx * sxy) / det
}

/// Least-squares fit of matrix samples `Y ≈ C + D/t` over points `(t, Y)`; returns `C`.
pub(crate) fn fit_matrix_constant(points: &[(f64, CMat)]) -> CMat {
    let m = points[0].1.nrows();
    let (mut s1, mut sx, mut sxx) = (0.0, 0.0, 0.0);
    let mut sy = CMat::zeros(m, m);
    let mut sxy = CMat::zeros(m, m);
    for (t, y) in points {
        let x = 1.0 / t;
        s1 += 1.0;
        sx += x;
        sxx += x * x;
        sy += y;
        sxy += y * c(x);
    }
    if points.len() < 3 {
        return sy / c(s1);
    }
    (sy * c(sxx) - sxy * c(sx)) / c(s1 * sxx - sx * sx)
}

/// Residual sequences `κ_nk`, `K_n` of a data set against coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    /// `κ[n−1][k−1]`.
    pub kappa: Vec<Vec<f64>>,
    /// `‖K_n‖` in `α_n^I = (2(n−1/2)²/π)(T + K_n/n)`.
    pub k_first: Vec<f64>,
    /// `‖K_n‖` in `α_n^II = (2n²/π)(T⊥ + K_n/n)`.
    pub k_second: Vec<f64>,
    /// `‖K_n‖` in `α_n^(s) = (2n²/π)(A^(s) + K_n)`, one row per distinct cluster.
    pub k_clusters: Vec<Vec<f64>>,
    /// `(Σ_{n ≤ N'} Σ_k κ_nk²)^{1/2}` for `N' = 1..N`.
    pub kappa_partial_l2: Vec<f64>,
    pub kappa_tail_max: f64,
    pub k_tail_max: f64,
    /// Tail fit of `z_k` from the eigenvalues alone.
    pub z_fit: Vec<f64>,
}

pub fn residuals(data: &SpectralDataSet, coeffs: &AsymptoticCoefficients) -> ResidualReport {
    let (m, n_max, p) = (data.m(), data.n_max(), coeffs.p());
    let tm = coeffs.t.matrix();
    let tpm = coeffs.t.complement().matrix().clone();
    let clusters = coeffs.clusters();
    let mut kappa = Vec::with_capacity(n_max);
    let mut k_first = Vec::with_capacity(n_max);
    let mut k_second = Vec::with_capacity(n_max);
    let mut k_clusters = vec![Vec::with_capacity(n_max); clusters.len()];
    for n in 1..=n_max {
        let nf = n as f64;
        kappa.push(
            (1..=m)
                .map(|k| nf * (data.entry(n, k).rho() - coeffs.center(n, k)) - coeffs.z[k - 1] / PI)
                .collect::<Vec<_>>(),
        );
        let first = level_sum(data, n, 1..=p) * c(PI / (2.0 * (nf - 0.5).powi(2))) - tm;
        k_first.push(nf * spectral_norm(&first));
        let second = level_sum(data, n, p + 1..=m) * c(PI / (2.0 * nf * nf)) - &tpm;
        k_second.push(nf * spectral_norm(&second));
        for (i, cl) in clusters.iter().enumerate() {
            let s = level_sum(data, n, cl.iter().map(|k| k + 1)) * c(PI / (2.0 * nf * nf))
                - coeffs.a[cl[0]].matrix();
            k_clusters[i].push(spectral_norm(&s));
        }
    }
    let mut acc = 0.0;
    let kappa_partial_l2 = kappa
        .iter()
        .map(|row| {
            acc += row.iter().map(|x| x * x).sum::<f64>();
            acc.sqrt()
        })
        .collect();
    let tail = tail_range(n_max);
    let kappa_tail_max = tail
        .clone()
        .flat_map(|n| kappa[n - 1].iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    let k_tail_max = tail
        .clone()
        .map(|n| {
            let mut v = k_first[n - 1].max(k_second[n - 1]);
            for row in &k_clusters {
                v = v.max(row[n - 1]);
            }
            v
        })
        .fold(0.0, f64::max);
    let z_fit = (1..=m)
        .map(|k| {
            let pts: Vec<(f64, f64)> = tail
                .clone()
                .map(|n| {
                    let mu = coeffs.center(n, k);
                    (mu * mu, PI / 2.0 * (data.entry(n, k).lambda - mu * mu))
                })
                .collect();
            fit_constant_plus_inverse(&pts)
        })
        .collect();
    ResidualReport {
        kappa,
        k_first,
        k_second,
        k_clusters,
        kappa_partial_l2,
        kappa_tail_max,
        k_tail_max,
        z_fit,
    }
}

/// Estimates `T`, `z_k`, `A^(s)` (and `ω_j` in the graph case) from the tail
/// `n ∈ [N/2, N]` of the data.
pub fn fit_coefficients(data: &SpectralDataSet, graph: bool) -> Result<AsymptoticCoefficients> {
    let (m, n_max) = (data.m(), data.n_max());
    if n_max < 4 {
        return Err(Error::InvalidInput(format!(
            "need N ≥ 4 to fit asymptotic coefficients, got {n_max}"
        )));
    }
    let tail = tail_range(n_max);
    // p: how many ρ_nk sit closer to n − 1/2 than to n, by majority over the tail.
    let mut votes = vec![0usize; m + 1];
    for n in tail.clone() {
        let p = (1..=m).filter(|&k| {
            let r = data.entry(n, k).rho() - n as f64;
            (r + 0.5).abs() < r.abs()
        });
        votes[p.count()] += 1;
    }
    let p = (0..=m).max_by_key(|&i| votes[i]).unwrap();
    if p == 0 || p == m {
        return Err(Error::Inconsistent(format!(
            "eigenvalue tail does not split into two blocks (p = {p})"
        )));
    }
    // The normalized weight sums approach their limits like 1/n²; extrapolate.
    let limit = |ks: &[usize], mu: &dyn Fn(usize) -> f64| {
        let pts: Vec<(f64, CMat)> = tail
            .clone()
            .map(|n| {
                (
                    mu(n).powi(2),
                    level_sum(data, n, ks.iter().copied()) * c(PI / (2.0 * mu(n).powi(2))),
                )
            })
            .collect();
        fit_matrix_constant(&pts)
    };
    let first: Vec<usize> = (1..=p).collect();
    let t_raw = limit(&first, &|n| n as f64 - 0.5);
    let t_raw = (&t_raw + t_raw.adjoint()) * c(0.5);
    let (vals, vecs) = hermitian_eigen(&t_raw);
    let cols = CMat::from_fn(m, p, |r, j| vecs[(r, m - p + j)]);
    if vals[m - p - 1] > 0.5 || vals[m - p] < 0.5 {
        log::warn!("weight-sum tail does not look like a rank-{p} projector: eigenvalues {vals:?}");
    }
    let t = OrthogonalProjector::from_orthonormal_columns(&cols);
    let center = |n: usize, k: usize| if k <= p { n as f64 - 0.5 } else { n as f64 };
    let z_each: Vec<f64> = (1..=m)
        .map(|k| {
            let pts: Vec<(f64, f64)> = tail
                .clone()
                .map(|n| {
                    (
                        center(n, k).powi(2),
                        PI / 2.0 * (data.entry(n, k).lambda - center(n, k).powi(2)),
                    )
                })
                .collect();
            fit_constant_plus_inverse(&pts)
        })
        .collect();
    let mut z = vec![0.0; m];
    let mut theta = CMat::zeros(m, m);
    let mut a: Vec<Option<OrthogonalProjector>> = vec![None; m];
    for (block, basis) in [
        (0..p, t.range_basis()),
        (p..m, t.complement().range_basis()),
    ] {
        // Merge nearly equal fitted z into clusters.
        let mut order: Vec<usize> = block.clone().collect();
        order.sort_by(|&i, &j| z_each[i].total_cmp(&z_each[j]));
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for &k in &order {
            match clusters.last_mut() {
                Some(cl)
                    if (z_each[k] - z_each[*cl.last().unwrap()]).abs()
                        <= Z_FIT_MERGE * (1.0 + z_each[k].abs()) =>
                {
                    cl.push(k)
                }
                _ => clusters.push(vec![k]),
            }
        }
        let means: Vec<f64> = clusters
            .iter()
            .map(|cl| cl.iter().map(|&k| z_each[k]).sum::<f64>() / cl.len() as f64)
            .collect();
        let mut weighted = CMat::zeros(m, m);
        for (cl, &zm) in clusters.iter().zip(&means) {
            let ks: Vec<usize> = cl.iter().map(|k| k + 1).collect();
            let raw = limit(&ks, &|n| center(n, ks[0]));
            weighted += (&raw + raw.adjoint()) * c(0.5 * zm);
        }
        // Spectral projectors of the fitted Θ on this block, in ascending z.
        let (_, w) = compressed_eigen(&weighted, &basis);
        let mut col = 0;
        for (cl, &zm) in clusters.iter().zip(&means) {
            let sub = CMat::from_fn(m, cl.len(), |r, j| w[(r, col + j)]);
            col += cl.len();
            let proj = OrthogonalProjector::from_orthonormal_columns(&sub);
            theta += proj.matrix() * c(zm);
            for &k in cl {
                z[k] = zm;
                a[k] = Some(proj.clone());
            }
        }
    }
    let theta = HermitianMatrix::symmetrized(theta).0;
    if graph {
        let omega = graph_omega_from_theta(&theta, &t)?;
        return AsymptoticCoefficients::from_graph(&omega, z[0]);
    }
    Ok(AsymptoticCoefficients {
        t,
        theta,
        z,
        a: a.into_iter().map(Option::unwrap).collect(),
        graph_omega: None,
    })
}

/// Least-squares `ω` with `T⊥ diag(ω) T⊥ ≈ T⊥ΘT⊥` for the graph projector `T`.
fn graph_omega_from_theta(theta: &HermitianMatrix, t: &OrthogonalProjector) -> Result<Vec<f64>> {
    let m = theta.dim();
    let graph_t = make_graph_projector(m)?;
    if (graph_t.matrix() - t.matrix()).norm() > 0.1 {
        return Err(Error::Inconsistent(
            "fitted T is not the graph projector".into(),
        ));
    }
    let tp = graph_t.complement();
    let target = tp.matrix() * theta.matrix() * tp.matrix();
    let mut design = nalgebra::DMatrix::<f64>::zeros(m * m, m);
    let mut rhs = DVector::<f64>::zeros(m * m);
    for j in 0..m {
        let e = HermitianMatrix::from_real_diagonal(
            &(0..m)
                .map(|i| if i == j { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        );
        let img = tp.matrix() * e.matrix() * tp.matrix();
        for r in 0..m {
            for s in 0..m {
                design[(r * m + s, j)] = img[(r, s)].re;
            }
        }
    }
    for r in 0..m {
        for s in 0..m {
            rhs[r * m + s] = target[(r, s)].re;
        }
    }
    let svd = design.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::Inconsistent(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub offending: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    fn push(&mut self, name: &str, offending: Vec<(usize, usize)>, detail: String) {
        self.items.push(CheckItem {
            name: name.into(),
            passed: offending.is_empty(),
            detail,
            offending,
        });
    }

    fn push_flag(&mut self, name: &str, passed: bool, detail: String) {
        self.items.push(CheckItem {
            name: name.into(),
            passed,
            detail,
            offending: Vec::new(),
        });
    }

    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failed_names(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.name.as_str())
            .collect()
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.items.extend(other.items);
    }
}

/// Membership in the class SD, condition by condition.
pub fn check_sd(data: &RawSpectralData) -> CheckReport {
    let mut report = CheckReport::default();
    let tag = |e: &crate::spectral::RawEntry| (e.n, e.k);
    report.push(
        "sd.numbering",
        data.numbering_defects(),
        "eigenvalues listed as (1,1)..(N,m) in nondecreasing order".into(),
    );
    let nonreal: Vec<_> = data
        .entries
        .iter()
        .filter(|e| !e.lambda.is_finite())
        .map(tag)
        .collect();
    report.push(
        "sd.real",
        nonreal,
        "eigenvalues are finite real numbers".into(),
    );
    let nonherm: Vec<_> = data
        .entries
        .iter()
        .filter(|e| (&e.alpha - e.alpha.adjoint()).norm() > 1e-10 * e.alpha.norm().max(1e-300))
        .map(tag)
        .collect();
    report.push("sd.hermitian", nonherm, "α = α†".into());
    let mut worst = 0.0f64;
    let nonpsd: Vec<_> = data
        .entries
        .iter()
        .filter(|e| {
            let v = hermitian_eigen(&e.alpha).0[0];
            let bad = v < -1e-10 * e.alpha.norm().max(1e-300);
            if bad {
                worst = worst.min(v);
            }
            bad
        })
        .map(tag)
        .collect();
    report.push(
        "sd.psd",
        nonpsd,
        format!("α ⪰ 0 (most negative eigenvalue {worst:.3e})"),
    );
    let mut unequal = Vec::new();
    let mut rank_bad = Vec::new();
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut i = 0;
    while i < data.entries.len() {
        let mut j = i + 1;
        while j < data.entries.len() && eq(data.entries[j].lambda, data.entries[i].lambda) {
            let d = (&data.entries[j].alpha - &data.entries[i].alpha).norm();
            if d > 1e-8 * data.entries[i].alpha.norm().max(1.0) {
                unequal.push(tag(&data.entries[j]));
            }
            j += 1;
        }
        let (vals, _) = hermitian_eigen(&data.entries[i].alpha);
        let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rank = vals
            .iter()
            .filter(|&&v| v > crate::spectral::MULTIPLICITY_TOL * top)
            .count();
        if rank != j - i {
            rank_bad.push(tag(&data.entries[i]));
        }
        i = j;
    }
    report.push(
        "sd.equal_weights",
        unequal,
        "equal eigenvalues carry equal weight matrices".into(),
    );
    report.push(
        "sd.rank",
        rank_bad,
        "rank(α) equals the multiplicity of λ".into(),
    );
    report
}

/// The projector conditions on `(T, z, A^(s))`, plus the graph-case formulas
/// when edge means are known.
pub fn check_theorem31(coeffs: &AsymptoticCoefficients, tol: f64) -> CheckReport {
    let mut report = CheckReport::default();
    let (m, p) = (coeffs.dim(), coeffs.p());
    let tagged = |s: usize| (s + 1, 0);
    let not_projector: Vec<_> = (0..m)
        .filter(|&s| {
            let a = coeffs.a[s].matrix();
            (a * a - a).norm() > tol || (a - a.adjoint()).norm() > tol
        })
        .map(tagged)
        .collect();
    report.push(
        "coefficients.projectors",
        not_projector,
        "A^(s) are orthogonal projectors".into(),
    );
    let clusters = coeffs.clusters();
    let mut sum1 = CMat::zeros(m, m);
    let mut sum2 = CMat::zeros(m, m);
    for cl in &clusters {
        if cl[0] < p {
            sum1 += coeffs.a[cl[0]].matrix();
        } else {
            sum2 += coeffs.a[cl[0]].matrix();
        }
    }
    let r1 = (sum1 - coeffs.t.matrix()).norm();
    let r2 = (sum2 - coeffs.t.complement().matrix()).norm();
    report.push_flag(
        "coefficients.sums",
        r1 <= tol && r2 <= tol,
        format!("ΣA^(s) = T, T⊥ (residuals {r1:.3e}, {r2:.3e})"),
    );
    let rank_bad: Vec<_> = (0..m)
        .filter(|&s| {
            let a = coeffs.a[s].matrix();
            let trace = a.trace().re;
            (trace - crate::linalg::root_cluster(&coeffs.z, p, s).len() as f64).abs() > 1e-6
        })
        .map(tagged)
        .collect();
    report.push(
        "coefficients.ranks",
        rank_bad,
        "rank A^(s) = #{k : z_k = z_s} within the block".into(),
    );
    let mut orth_bad = Vec::new();
    for s in 0..m {
        for k in 0..m {
            let required = (s < p && k >= p)
                || (s >= p && k < p)
                || (coeffs.z[k] - coeffs.z[s]).abs() > TOL_ROOT_EQ;
            if required && (coeffs.a[s].matrix() * coeffs.a[k].matrix()).norm() > tol {
                orth_bad.push((s + 1, k + 1));
            }
        }
    }
    report.push(
        "coefficients.orthogonality",
        orth_bad,
        "A^(s)A^(k) = 0 across blocks and distinct z".into(),
    );
    let unordered: Vec<_> = (1..m)
        .filter(|&k| k != p && coeffs.z[k] < coeffs.z[k - 1] - tol)
        .map(|k| (k + 1, 0))
        .collect();
    report.push(
        "coefficients.ordering",
        unordered,
        "z nondecreasing within blocks".into(),
    );
    if let Some(w) = &coeffs.graph_omega {
        let scale = w
            .iter()
            .fold(1.0f64, |a, x| a.max(x.abs()))
            .powi(m as i32 - 1);
        let root_bad: Vec<_> = (1..m)
            .filter(|&s| graph_p2(w, coeffs.z[s]).abs() > tol * scale)
            .map(tagged)
            .collect();
        report.push(
            "graph.p2_roots",
            root_bad,
            "z_2..z_m are roots of P₂".into(),
        );
        let first = (coeffs.a[0].matrix() - coeffs.t.matrix()).norm() <= tol && p == 1;
        report.push_flag(
            "graph.first_projector",
            first,
            "A^(1) = T with T_jk = 1/m".into(),
        );
        let formula = a_matrices_graph(w, &coeffs.z);
        let bad: Vec<_> = match &formula {
            Ok(list) => (0..m)
                .filter(|&s| (list[s].matrix() - coeffs.a[s].matrix()).norm() > tol.max(1e-8))
                .map(tagged)
                .collect(),
            Err(_) => vec![(0, 0)],
        };
        report.push(
            "graph.residue_formula",
            bad,
            "A^(s) agree with the residue formula".into(),
        );
    }
    report
}

/// Asymptotic-residual checks on data against coefficients.
pub fn check_asymptotics(report: &ResidualReport) -> CheckReport {
    let mut out = CheckReport::default();
    out.push_flag(
        "asymptotics.eigenvalues",
        report.kappa_tail_max.is_finite() && report.kappa_tail_max <= KAPPA_TAIL_BOUND,
        format!(
            "max |κ_nk| over the tail = {:.3e} (bound {KAPPA_TAIL_BOUND})",
            report.kappa_tail_max
        ),
    );
    out.push_flag(
        "asymptotics.weights",
        report.k_tail_max.is_finite() && report.k_tail_max <= K_TAIL_BOUND,
        format!(
            "max ‖K_n‖ over the tail = {:.3e} (bound {K_TAIL_BOUND})",
            report.k_tail_max
        ),
    );
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct SurrogateReport {
    pub smallest_singular_value: f64,
    pub threshold: f64,
    pub mesh_points: usize,
    /// True means only "no finite obstruction to completeness"; it is not a proof.
    pub no_finite_obstruction: bool,
}

/// Orthonormal basis of `Ran α` with `r` columns: eigenvectors by descending
/// eigenvalue, each scaled so its largest-modulus component is real positive.
pub fn range_basis(alpha: &CMat, r: usize) -> CMat {
    let m = alpha.nrows();
    let (_, vecs) = hermitian_eigen(alpha);
    let mut out = CMat::zeros(m, r);
    for j in 0..r {
        let mut v = vecs.column(m - 1 - j).into_owned();
        let big = (0..m)
            .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
            .unwrap();
        let phase = v[big] / v[big].norm();
        v /= phase;
        out.set_column(j, &v);
    }
    out
}

/// Smallest singular value of the Gram matrix of `ℰ_nk sin(ρ_nk t)/ρ_nk` on a
/// uniform `t`-mesh (trapezoidal weights).
pub fn completeness_surrogate(data: &SpectralDataSet, mesh_t: usize) -> SurrogateReport {
    let m = data.m();
    let entries = data.entries();
    let mut vectors: Vec<DVector<crate::linalg::C64>> = Vec::with_capacity(entries.len());
    let mut i = 0;
    while i < entries.len() {
        let mut j = i + 1;
        while j < entries.len()
            && entries[j].alpha_prime.norm() == 0.0
            && entries[j].lambda == entries[i].lambda
        {
            j += 1;
        }
        let basis = range_basis(entries[i].alpha.matrix(), j - i);
        for col in 0..j - i {
            vectors.push(basis.column(col).into_owned());
        }
        i = j;
    }
    let npts = mesh_t.max(2);
    let h = PI / (npts - 1) as f64;
    let cols = entries.len();
    let mut f = CMat::zeros(npts * m, cols);
    for (b, e) in entries.iter().enumerate() {
        for ti in 0..npts {
            let t = ti as f64 * h;
            let w = if ti == 0 || ti == npts - 1 {
                0.5 * h
            } else {
                h
            };
            let val = crate::linalg::sin_over_root(c(e.lambda), t) * w.sqrt();
            for comp in 0..m {
                f[(ti * m + comp, b)] = vectors[b][comp] * val;
            }
        }
    }
    let gram = f.adjoint() * &f;
    let smallest = gram.singular_values().min();
    SurrogateReport {
        smallest_singular_value: smallest,
        threshold: SURROGATE_THRESHOLD,
        mesh_points: npts,
        no_finite_obstruction: smallest > SURROGATE_THRESHOLD,
    }
}

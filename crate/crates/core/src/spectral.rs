//! Eigenvalues and weight matrices of `L(Q, T, H)`.
//!
//! Eigenvalues are located window by window with Beyn's contour method
//! applied to `V(S(·, λ))`, cross-checked against the winding number of its
//! determinant. Weight matrices are the negated residues of the Weyl matrix,
//! evaluated with the trapezoidal rule on small circles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, CMat, HermitianMatrix, C64};
use crate::problem::MatrixProblem;
use crate::propagate::{boundary_matrix_of_s, propagate_s, weyl_matrix};

/// Trapezoidal nodes on a residue circle.
pub const RESIDUE_NODES: usize = 64;
/// Relative singular value below which a direction counts as null.
pub const MULTIPLICITY_TOL: f64 = 1e-6;
/// Relative tolerance for the node-doubling test of residues.
pub const CONTOUR_TOL: f64 = 1e-8;

const WINDOW_NODES: usize = 64;
const MAX_WINDOW_NODES: usize = 512;
const MAX_SPLIT_DEPTH: usize = 12;
const MAX_RESIDUE_RADIUS: f64 = 0.1;
/// Angular offset keeping contour nodes off the real axis.
const NODE_PHASE: f64 = 0.1234;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Computed,
    Loaded,
}

#[derive(Clone, Debug)]
pub struct SpectralEntry {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub alpha: HermitianMatrix,
    /// `α` on the first index of a multiplicity group, zero afterwards.
    pub alpha_prime: HermitianMatrix,
}

impl SpectralEntry {
    pub fn rho(&self) -> f64 {
        self.lambda.max(0.0).sqrt()
    }
}

/// Eigenvalues `λ_nk` and weight matrices `α_nk` for `n ≤ N`.
#[derive(Clone, Debug)]
pub struct SpectralDataSet {
    m: usize,
    n_max: usize,
    shift: f64,
    provenance: Provenance,
    entries: Vec<SpectralEntry>,
}

fn same_lambda(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn numerical_rank(a: &HermitianMatrix) -> usize {
    let (vals, _) = a.eigen();
    let top = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    vals.iter().filter(|&&v| v > MULTIPLICITY_TOL * top).count()
}

impl SpectralDataSet {
    /// Validates `(λ, α)` pairs listed in Definition-order and fills in `α′`.
    pub fn new(
        m: usize,
        n_max: usize,
        shift: f64,
        provenance: Provenance,
        data: Vec<(f64, HermitianMatrix)>,
    ) -> Result<Self> {
        if m < 2 || n_max < 1 {
            return Err(Error::InvalidDimension(format!(
                "need m ≥ 2 and N ≥ 1, got m = {m}, N = {n_max}"
            )));
        }
        if data.len() != m * n_max {
            return Err(Error::InvalidInput(format!(
                "expected {} entries, got {}",
                m * n_max,
                data.len()
            )));
        }
        let mut entries = Vec::with_capacity(data.len());
        for (i, (lambda, alpha)) in data.into_iter().enumerate() {
            if !lambda.is_finite() {
                return Err(Error::InvalidInput(format!("entry {i} has non-finite λ")));
            }
            if alpha.dim() != m {
                return Err(Error::InvalidDimension(format!(
                    "α of entry {i} is {0}x{0}, expected {m}x{m}",
                    alpha.dim()
                )));
            }
            let (vals, _) = alpha.eigen();
            let scale = alpha.norm();
            if vals[0] < -1e-10 * scale.max(1e-300) {
                return Err(Error::SdViolation(format!(
                    "α of entry {i} is not positive semidefinite (eigenvalue {:.3e})",
                    vals[0]
                )));
            }
            if let Some(prev) = entries.last() {
                let prev: &SpectralEntry = prev;
                if lambda < prev.lambda && !same_lambda(lambda, prev.lambda) {
                    return Err(Error::SdViolation(format!(
                        "eigenvalues not sorted at entry {i}"
                    )));
                }
            }
            entries.push(SpectralEntry {
                n: i / m + 1,
                k: i % m + 1,
                lambda,
                alpha_prime: alpha.clone(),
                alpha,
            });
        }
        dedup_alpha(&mut entries)?;
        Ok(Self {
            m,
            n_max,
            shift,
            provenance,
            entries,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn entries(&self) -> &[SpectralEntry] {
        &self.entries
    }

    /// Entry `(n, k)`, both one-based.
    pub fn entry(&self, n: usize, k: usize) -> &SpectralEntry {
        &self.entries[(n - 1) * self.m + (k - 1)]
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Same data for `Q + c·I`: eigenvalues move by `c`, weights are unchanged.
    pub fn shifted(&self, by: f64) -> Self {
        let mut out = self.clone();
        out.shift += by;
        for e in &mut out.entries {
            e.lambda += by;
        }
        out
    }

    /// Same entries, recording `shift` as the shift already contained in
    /// them. Used for model data whose coefficients were fitted to shifted data.
    pub fn with_shift_label(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.shift = shift;
        out
    }

    /// Replaces the eigenvalue of entry `(n, k)`; `α′` is rebuilt.
    pub fn with_lambda(&self, n: usize, k: usize, lambda: f64) -> Result<Self> {
        let mut data: Vec<_> = self
            .entries
            .iter()
            .map(|e| (e.lambda, e.alpha.clone()))
            .collect();
        data[(n - 1) * self.m + (k - 1)].0 = lambda;
        Self::new(self.m, self.n_max, self.shift, self.provenance, data)
    }

    /// First `n` levels only.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.n_max);
        let data = self.entries[..n * self.m]
            .iter()
            .map(|e| (e.lambda, e.alpha.clone()))
            .collect();
        Self::new(self.m, n, self.shift, self.provenance, data)
    }
}

/// Sets `α′` per multiplicity group: `α` on the first index and zero on the rest.
pub fn dedup_alpha(entries: &mut [SpectralEntry]) -> Result<()> {
    let mut i = 0;
    while i < entries.len() {
        let mut j = i + 1;
        while j < entries.len() && same_lambda(entries[j].lambda, entries[i].lambda) {
            let diff = (entries[j].alpha.matrix() - entries[i].alpha.matrix()).norm();
            if diff > 1e-8 * entries[i].alpha.norm().max(1.0) {
                return Err(Error::SdViolation(format!(
                    "equal eigenvalues at ({}, {}) and ({}, {}) carry different weights (‖Δα‖ = {diff:.3e})",
                    entries[i].n, entries[i].k, entries[j].n, entries[j].k
                )));
            }
            j += 1;
        }
        let rank = numerical_rank(&entries[i].alpha);
        if rank != j - i {
            return Err(Error::SdViolation(format!(
                "λ = {} at ({}, {}) has multiplicity {} but rank(α) = {rank}",
                entries[i].lambda,
                entries[i].n,
                entries[i].k,
                j - i
            )));
        }
        let m = entries[i].alpha.dim();
        entries[i].alpha_prime = entries[i].alpha.clone();
        for e in &mut entries[i + 1..j] {
            e.alpha_prime = HermitianMatrix::zeros(m);
        }
        i = j;
    }
    Ok(())
}

/// One distinct eigenvalue with its multiplicity.
#[derive(Clone, Debug)]
pub struct EigenCluster {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Distance to the nearest other located eigenvalue.
    pub gap: f64,
}

/// Located eigenvalues covering at least the first `N·m`.
#[derive(Clone, Debug)]
pub struct LocatedSpectrum {
    pub m: usize,
    pub n_max: usize,
    pub clusters: Vec<EigenCluster>,
}

impl LocatedSpectrum {
    /// `λ_nk` for `n ≤ N` in Definition-order, repeated by multiplicity.
    pub fn lambdas(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * self.n_max);
        for cl in &self.clusters {
            for _ in 0..cl.multiplicity {
                out.push(cl.lambda);
            }
        }
        out.truncate(self.m * self.n_max);
        out
    }

    /// Clusters contributing to the first `N·m` eigenvalues.
    pub fn leading_clusters(&self) -> &[EigenCluster] {
        let mut count = 0;
        for (i, cl) in self.clusters.iter().enumerate() {
            count += cl.multiplicity;
            if count >= self.m * self.n_max {
                return &self.clusters[..=i];
            }
        }
        &self.clusters
    }
}

/// Lower bound for the spectrum from the quadratic form.
fn spectrum_lower_bound(problem: &MatrixProblem) -> f64 {
    let q_min = problem
        .potential()
        .values()
        .iter()
        .map(|v| hermitian_eigen(v).0[0])
        .fold(f64::INFINITY, f64::min);
    let h_max = problem
        .boundary_matrix()
        .eigen()
        .0
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0);
    q_min - h_max * h_max - 1.0
}

struct WindowScan {
    eigenvalues: Vec<f64>,
    winding: i64,
}

fn contour_nodes(center: f64, radius: f64, count: usize) -> Vec<C64> {
    (0..count)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / count as f64 + NODE_PHASE;
            c(center) + C64::from_polar(radius, theta)
        })
        .collect()
}

/// Beyn's method on one circle; `None` when the data are inconclusive.
fn scan_window(
    problem: &MatrixProblem,
    a: f64,
    b: f64,
    count: usize,
) -> Result<Option<WindowScan>> {
    let m = problem.dim();
    let center = 0.5 * (a + b);
    let radius = 0.5 * (b - a);
    let nodes = contour_nodes(center, radius, count);
    let mut a0 = CMat::zeros(m, m);
    let mut a1 = CMat::zeros(m, m);
    let mut dets = Vec::with_capacity(count);
    let mut inv_max = 0.0f64;
    for z in &nodes {
        let f = boundary_matrix_of_s(problem, *z)?;
        dets.push(f.determinant());
        let Some(inv) = f.try_inverse() else {
            return Ok(None);
        };
        inv_max = inv_max.max(inv.norm());
        let e = (z - c(center)) / radius;
        a0 += &inv * (e * radius / count as f64);
        a1 += &inv * (e * e * radius / count as f64);
    }
    let mut winding = 0.0;
    for j in 0..count {
        let step = (dets[(j + 1) % count] / dets[j]).arg();
        if step.abs() > PI / 2.0 {
            return Ok(None);
        }
        winding += step;
    }
    let winding = (winding / (2.0 * PI)).round() as i64;
    if winding < 0 || winding as usize > m {
        return Ok(Some(WindowScan {
            eigenvalues: Vec::new(),
            winding,
        }));
    }
    let svd = a0.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let floor = 1e-9 * radius * inv_max;
    let rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > floor)
        .count();
    if rank as i64 != winding {
        return Ok(None);
    }
    if rank == 0 {
        return Ok(Some(WindowScan {
            eigenvalues: Vec::new(),
            winding,
        }));
    }
    let uk = CMat::from_fn(m, rank, |r, k| u[(r, order[k])]);
    let wk = CMat::from_fn(m, rank, |r, k| vt[(order[k], r)].conj());
    let sinv = CMat::from_fn(rank, rank, |r, k| {
        if r == k {
            c(1.0 / svd.singular_values[order[k]])
        } else {
            c(0.0)
        }
    });
    let bmat = uk.adjoint() * a1 * wk * sinv;
    let Some(mu) = Schur::new(bmat).eigenvalues() else {
        return Ok(None);
    };
    let mut eigenvalues = Vec::with_capacity(rank);
    for v in mu.iter() {
        if v.im.abs() > 1e-6 || v.re.abs() >= 1.0 {
            return Ok(None);
        }
        eigenvalues.push(center + radius * v.re);
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(Some(WindowScan {
        eigenvalues,
        winding,
    }))
}

/// Eigenvalues in `(a, b)` with node doubling until the Beyn estimate settles.
fn converged_window(problem: &MatrixProblem, a: f64, b: f64) -> Result<Option<Vec<f64>>> {
    let mut count = WINDOW_NODES;
    let mut previous: Option<Vec<f64>> = None;
    while count <= MAX_WINDOW_NODES {
        let scan = scan_window(problem, a, b, count)?;
        match scan {
            Some(s) if s.winding >= 0 && s.winding as usize <= problem.dim() => {
                if let Some(prev) = &previous {
                    let tol = 1e-9 * (b - a).max(1.0);
                    if prev.len() == s.eigenvalues.len()
                        && prev
                            .iter()
                            .zip(&s.eigenvalues)
                            .all(|(x, y)| (x - y).abs() <= tol)
                    {
                        return Ok(Some(s.eigenvalues));
                    }
                }
                previous = Some(s.eigenvalues);
            }
            Some(_) => return Ok(None),
            None => previous = None,
        }
        count *= 2;
    }
    Ok(None)
}

/// A split point near the middle of `(a, b)` where `V(S)` is well conditioned.
fn split_point(problem: &MatrixProblem, a: f64, b: f64) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut best = (mid, -1.0);
    for off in [0.0, 0.15, -0.15, 0.3, -0.3] {
        let x = mid + off * half;
        let sv = boundary_matrix_of_s(problem, c(x))?.singular_values();
        let score = sv.min() / sv.max().max(1e-300);
        if score > best.1 {
            best = (x, score);
        }
    }
    Ok(best.0)
}

fn solve_window(problem: &MatrixProblem, a: f64, b: f64, depth: usize) -> Result<Vec<f64>> {
    if let Some(found) = converged_window(problem, a, b)? {
        return Ok(found);
    }
    if depth >= MAX_SPLIT_DEPTH {
        return Err(Error::Search(format!(
            "eigenvalue search did not settle on [{a:.6}, {b:.6}] after {depth} subdivisions"
        )));
    }
    log::debug!("splitting search window [{a:.6}, {b:.6}]");
    let s = split_point(problem, a, b)?;
    let mut left = solve_window(problem, a, s, depth + 1)?;
    left.extend(solve_window(problem, s, b, depth + 1)?);
    Ok(left)
}

/// Window boundaries: unit steps below `ρ = 1/4`, then `ρ = j/2 + 1/4`.
fn window_edges(lower: f64, rho_top: f64) -> Vec<f64> {
    let first_rho = 0.25f64;
    let mut edges = vec![lower];
    let mut x = lower + 4.0;
    while x < first_rho * first_rho {
        edges.push(x);
        x += 4.0;
    }
    let mut j = 0;
    loop {
        let rho = 0.5 * j as f64 + 0.25;
        if rho > rho_top {
            break;
        }
        let lam = rho * rho;
        if lam > lower + 1e-3 && lam > *edges.last().unwrap() + 1e-3 {
            edges.push(lam);
        }
        j += 1;
    }
    edges
}

fn cluster(values: &mut Vec<f64>) -> Vec<EigenCluster> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<EigenCluster> = Vec::new();
    for &v in values.iter() {
        match out.last_mut() {
            Some(last) if (v - last.lambda).abs() <= 1e-7 * v.abs().max(1.0) => {
                let r = last.multiplicity as f64;
                last.lambda = (last.lambda * r + v) / (r + 1.0);
                last.multiplicity += 1;
            }
            _ => out.push(EigenCluster {
                lambda: v,
                multiplicity: 1,
                gap: f64::INFINITY,
            }),
        }
    }
    for i in 0..out.len() {
        let left = if i > 0 {
            out[i].lambda - out[i - 1].lambda
        } else {
            f64::INFINITY
        };
        let right = if i + 1 < out.len() {
            out[i + 1].lambda - out[i].lambda
        } else {
            f64::INFINITY
        };
        out[i].gap = left.min(right);
    }
    out
}

/// Locates `λ_nk` for `n ≤ N` (and the window just above, for gaps).
pub fn locate_eigenvalues(problem: &MatrixProblem, n_max: usize) -> Result<LocatedSpectrum> {
    if n_max < 1 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let m = problem.dim();
    let lower = spectrum_lower_bound(problem);
    let mut rho_top = n_max as f64 + 1.25;
    loop {
        let edges = window_edges(lower, rho_top);
        let found: Result<Vec<Vec<f64>>> = edges
            .par_windows(2)
            .map(|w| solve_window(problem, w[0], w[1], 0))
            .collect();
        let mut values: Vec<f64> = found?.into_iter().flatten().collect();
        if values.len() > m * n_max {
            let clusters = cluster(&mut values);
            for cl in &clusters {
                let f = boundary_matrix_of_s(problem, c(cl.lambda))?;
                let sv = f.singular_values();
                let null = sv
                    .iter()
                    .filter(|&&s| s < MULTIPLICITY_TOL * sv.max())
                    .count();
                if null != cl.multiplicity {
                    return Err(Error::Multiplicity(format!(
                        "λ ≈ {} found {} times by the contour search but V(S) has {null} null directions",
                        cl.lambda, cl.multiplicity
                    )));
                }
            }
            return Ok(LocatedSpectrum { m, n_max, clusters });
        }
        if rho_top > 2.0 * n_max as f64 + 10.0 {
            return Err(Error::Search(format!(
                "found only {} eigenvalues below ρ = {rho_top:.2}, expected more than {}",
                values.len(),
                m * n_max
            )));
        }
        rho_top += 2.0;
    }
}

/// `α = −Res M` at an isolated eigenvalue together with a refined `λ₀`.
#[derive(Clone, Debug)]
pub struct WeightResidue {
    pub alpha: HermitianMatrix,
    pub lambda: f64,
}

fn residue_sums(
    problem: &MatrixProblem,
    lambda0: f64,
    radius: f64,
    count: usize,
) -> Result<(CMat, CMat)> {
    let m = problem.dim();
    let mut r0 = CMat::zeros(m, m);
    let mut r1 = CMat::zeros(m, m);
    for z in contour_nodes(lambda0, radius, count) {
        let mm = weyl_matrix(problem, z)?;
        let d = z - c(lambda0);
        r0 += &mm * (d / count as f64);
        r1 += &mm * (d * d / count as f64);
    }
    Ok((r0, r1))
}

/// Contour residue of the Weyl matrix around `λ₀`; `gap` is the distance to
/// the nearest other eigenvalue.
pub fn compute_weight_matrix(
    problem: &MatrixProblem,
    lambda0: f64,
    multiplicity: usize,
    gap: f64,
) -> Result<WeightResidue> {
    let radius = (gap / 3.0).min(MAX_RESIDUE_RADIUS);
    if !(radius > 0.0) {
        return Err(Error::Contour(format!(
            "no isolating circle around λ = {lambda0}"
        )));
    }
    let (coarse, _) = residue_sums(problem, lambda0, radius, RESIDUE_NODES)?;
    let (fine, fine1) = residue_sums(problem, lambda0, radius, 2 * RESIDUE_NODES)?;
    let scale = fine.norm();
    let change = (&coarse - &fine).norm();
    if change > CONTOUR_TOL * scale.max(1e-300) {
        return Err(Error::Contour(format!(
            "residue at λ = {lambda0} changed by {change:.3e} (relative {:.3e}) under node doubling",
            change / scale
        )));
    }
    let alpha = -fine;
    let asym = (&alpha - alpha.adjoint()).norm();
    if asym > 1e-8 * alpha.norm() {
        return Err(Error::Contour(format!(
            "residue at λ = {lambda0} is not Hermitian (‖α − α†‖ = {asym:.3e})"
        )));
    }
    let (vals, vecs) = hermitian_eigen(&alpha);
    let top = vals.last().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&v| v > MULTIPLICITY_TOL * top).count();
    if rank != multiplicity {
        return Err(Error::Multiplicity(format!(
            "rank(α) = {rank} at λ = {lambda0}, expected multiplicity {multiplicity}"
        )));
    }
    let m = alpha.nrows();
    // Keep the `multiplicity` leading directions; the rest is quadrature noise.
    let kept = CMat::from_fn(m, m, |i, j| {
        if i == j && i + multiplicity >= m {
            c(vals[i])
        } else {
            c(0.0)
        }
    });
    let cleaned = &vecs * kept * vecs.adjoint();
    let refined = lambda0 - (fine1.trace() / alpha.trace()).re;
    Ok(WeightResidue {
        alpha: HermitianMatrix::symmetrized(cleaned).0,
        lambda: refined,
    })
}

/// `Σᵢ Yᵢ'(0)·Yᵢ'(0)†` over an orthonormal eigenbasis; an independent check of
/// the contour residue.
pub fn eigenfunction_residue_oracle(
    problem: &MatrixProblem,
    lambda0: f64,
    multiplicity: usize,
) -> Result<HermitianMatrix> {
    let m = problem.dim();
    let f = boundary_matrix_of_s(problem, c(lambda0))?;
    let svd = f.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let null: Vec<usize> = (0..m)
        .filter(|&i| svd.singular_values[i] < MULTIPLICITY_TOL * smax)
        .collect();
    if null.len() != multiplicity {
        return Err(Error::Multiplicity(format!(
            "eigenspace at λ = {lambda0} has dimension {}, expected {multiplicity}",
            null.len()
        )));
    }
    let cm = CMat::from_fn(m, null.len(), |r, k| vt[(null[k], r)].conj());
    let fine = problem.with_resolution(4 * problem.steps())?;
    let sol = propagate_s(&fine, c(lambda0))?;
    let h = PI / (sol.y.len() - 1) as f64;
    let mut gram = CMat::zeros(m, m);
    for (i, y) in sol.y.iter().enumerate() {
        let last = sol.y.len() - 1;
        let w = if i == 0 || i == last {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        gram += y.adjoint() * y * c(w * h / 3.0);
    }
    let g = cm.adjoint() * gram * &cm;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| Error::Multiplicity("singular eigenfunction Gram matrix".into()))?;
    Ok(HermitianMatrix::symmetrized(&cm * ginv * cm.adjoint()).0)
}

/// Eigenvalues and weight matrices of `problem` for `n ≤ N`.
pub fn compute_spectral_data(problem: &MatrixProblem, n_max: usize) -> Result<SpectralDataSet> {
    let located = locate_eigenvalues(problem, n_max)?;
    let m = located.m;
    let residues: Vec<WeightResidue> = located
        .leading_clusters()
        .par_iter()
        .map(|cl| compute_weight_matrix(problem, cl.lambda, cl.multiplicity, cl.gap))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(m * n_max);
    for (cl, res) in located.leading_clusters().iter().zip(residues) {
        for _ in 0..cl.multiplicity {
            if data.len() < m * n_max {
                data.push((res.lambda, res.alpha.clone()));
            }
        }
    }
    SpectralDataSet::new(m, n_max, 0.0, Provenance::Computed, data)
}

/// Spectral data as read from a file, before any class checks.
#[derive(Clone, Debug)]
pub struct RawEntry {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub alpha: CMat,
}

#[derive(Clone, Debug)]
pub struct RawSpectralData {
    pub m: usize,
    pub n_max: usize,
    pub shift: f64,
    pub provenance: Provenance,
    pub entries: Vec<RawEntry>,
}

impl RawSpectralData {
    pub fn from_set(set: &SpectralDataSet) -> Self {
        Self {
            m: set.m,
            n_max: set.n_max,
            shift: set.shift,
            provenance: set.provenance,
            entries: set
                .entries
                .iter()
                .map(|e| RawEntry {
                    n: e.n,
                    k: e.k,
                    lambda: e.lambda,
                    alpha: e.alpha.matrix().clone(),
                })
                .collect(),
        }
    }

    /// Indices that break the `(1,1), (1,2), …, (N,m)` listing, if any.
    pub fn numbering_defects(&self) -> Vec<(usize, usize)> {
        let mut bad: Vec<(usize, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| e.n != i / self.m + 1 || e.k != i % self.m + 1)
            .map(|(_, e)| (e.n, e.k))
            .collect();
        for w in self.entries.windows(2) {
            if w[1].lambda < w[0].lambda && !same_lambda(w[0].lambda, w[1].lambda) {
                bad.push((w[1].n, w[1].k));
            }
        }
        if self.entries.len() != self.m * self.n_max {
            bad.push((self.n_max, self.m));
        }
        bad
    }

    pub fn validate(&self) -> Result<SpectralDataSet> {
        let bad = self.numbering_defects();
        if let Some(&(n, k)) = bad.first() {
            return Err(Error::SdViolation(format!(
                "entry ({n}, {k}) breaks the eigenvalue numbering"
            )));
        }
        let mut data = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let alpha = HermitianMatrix::new(e.alpha.clone())
                .map_err(|err| Error::SdViolation(format!("α at ({}, {}): {err}", e.n, e.k)))?;
            data.push((e.lambda, alpha));
        }
        SpectralDataSet::new(self.m, self.n_max, self.shift, self.provenance, data)
    }
}

/// `‖α − α†‖` over all entries; used by reports.
pub fn max_asymmetry(entries: &[SpectralEntry]) -> f64 {
    entries
        .iter()
        .map(|e| {
            let a: &DMatrix<C64> = e.alpha.matrix();
            (a - a.adjoint()).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::make_graph_projector;
    use crate::potential::PotentialGrid;

    fn zero_graph(m: usize) -> MatrixProblem {
        MatrixProblem::graph(PotentialGrid::constant(CMat::zeros(m, m)).unwrap(), 0.0).unwrap()
    }

    /// Bisection for a sign change of `f` on `[a, b]`.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let mut fa = f(a);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = f(mid);
            if fm == 0.0 {
                return mid;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// All sign changes of `f` on a fine grid.
    fn scalar_roots(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64) -> Vec<f64> {
        let n = 20_000;
        let mut out = Vec::new();
        let mut x0 = lo;
        let mut f0 = f(lo);
        for i in 1..=n {
            let x1 = lo + (hi - lo) * i as f64 / n as f64;
            let f1 = f(x1);
            if (f0 > 0.0) != (f1 > 0.0) {
                out.push(bisect(f, x0, x1));
            }
            x0 = x1;
            f0 = f1;
        }
        out
    }

    #[test]
    fn zero_potential_graph_eigenvalues() {
        let spec = locate_eigenvalues(&zero_graph(3), 3).unwrap();
        let rho: Vec<f64> = spec.lambdas().iter().map(|l| l.sqrt()).collect();
        let want = [0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0, 3.0];
        for (r, w) in rho.iter().zip(want) {
            assert!((r - w).abs() < 1e-10, "{rho:?}");
        }
    }

    #[test]
    fn constant_shift_moves_eigenvalues() {
        let c0 = 2.75;
        let shifted = MatrixProblem::graph(
            PotentialGrid::constant(CMat::identity(3, 3) * c(c0)).unwrap(),
            0.0,
        )
        .unwrap();
        let a = locate_eigenvalues(&zero_graph(3), 4).unwrap().lambdas();
        let b = locate_eigenvalues(&shifted, 4).unwrap().lambdas();
        for (x, y) in a.iter().zip(&b) {
            assert!((x + c0 - y).abs() < 1e-8);
        }
    }

    #[test]
    fn coupled_constant_potential_against_decoupled_scalars() {
        // Q = [[0, g], [g, 0]] has eigenvectors (1, ±1)/√2 = Ran T, Ran T⊥, so the problem
        // splits into y(π)' = 0-type (q = g) and y(π) = 0-type (q = −g) scalar problems.
        let g = 0.1;
        let q = CMat::from_row_slice(2, 2, &[c(0.0), c(g), c(g), c(0.0)]);
        let t = make_graph_projector(2).unwrap();
        let p = MatrixProblem::general(
            PotentialGrid::constant(q).unwrap(),
            t,
            HermitianMatrix::zeros(2),
        )
        .unwrap();
        let got = locate_eigenvalues(&p, 5).unwrap().lambdas();
        // T-part: −y'' + g y = λy, y(0) = 0, y'(π) = 0 → cos(√(λ−g)π) = 0.
        // T⊥-part: −y'' − g y = λy, y(0) = 0, y(π) = 0 → sin(√(λ+g)π) = 0.
        let f1 = |l: f64| ((l - g).max(0.0).sqrt() * PI).cos();
        let f2 = |l: f64| ((l + g).sqrt() * PI).sin() / (l + g).sqrt();
        let mut want = scalar_roots(f1, g, 40.0);
        want.extend(scalar_roots(f2, 0.01, 40.0));
        want.sort_by(f64::total_cmp);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-8, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn negative_eigenvalues_are_found() {
        let q = PotentialGrid::constant(CMat::identity(2, 2) * c(-9.0)).unwrap();
        let p = MatrixProblem::graph(q, 0.0).unwrap();
        let l = locate_eigenvalues(&p, 2).unwrap().lambdas();
        let want = [0.25 - 9.0, 1.0 - 9.0, 2.25 - 9.0, 4.0 - 9.0];
        for (x, y) in l.iter().zip(want) {
            assert!((x - y).abs() < 1e-8, "{l:?}");
        }
    }

    #[test]
    fn zero_potential_weights_closed_form() {
        let p = zero_graph(3);
        let t = p.projector().clone();
        for n in 1..=3 {
            let l = (n as f64 - 0.5).powi(2);
            let w = compute_weight_matrix(&p, l, 1, 0.5).unwrap();
            let want = t.matrix() * c(2.0 * l / PI);
            assert!((w.alpha.matrix() - want).norm() < 1e-9, "n = {n}");
            let l = (n * n) as f64;
            let w = compute_weight_matrix(&p, l, 2, 0.5).unwrap();
            let want = t.complement().matrix() * c(2.0 * l / PI);
            assert!((w.alpha.matrix() - want).norm() < 1e-9 * l);
        }
    }

    #[test]
    fn oracle_matches_scalar_reduction_and_zero_potential() {
        let p = zero_graph(3);
        let want = p.projector().matrix() * c(1.0 / (2.0 * PI));
        let got = eigenfunction_residue_oracle(&p, 0.25, 1).unwrap();
        assert!((got.matrix() - want).norm() < 1e-8);
        let got = eigenfunction_residue_oracle(&p, 4.0, 2).unwrap();
        let want = p.projector().complement().matrix() * c(8.0 / PI);
        assert!((got.matrix() - want).norm() < 1e-7);
    }

    #[test]
    fn contour_and_oracle_agree_on_diagonal_potential() {
        let q = PotentialGrid::from_fn(256, |x| {
            HermitianMatrix::from_real_diagonal(&[x.cos(), 0.5 * x, (2.0 * x).sin()]).into_matrix()
        })
        .unwrap();
        let p = MatrixProblem::graph(q, 0.3).unwrap();
        let spec = locate_eigenvalues(&p, 3).unwrap();
        for cl in spec.leading_clusters() {
            let w = compute_weight_matrix(&p, cl.lambda, cl.multiplicity, cl.gap).unwrap();
            let o = eigenfunction_residue_oracle(&p, w.lambda, cl.multiplicity).unwrap();
            let rel = (w.alpha.matrix() - o.matrix()).norm() / o.norm();
            assert!(rel < 1e-6, "λ = {} rel {rel:.3e}", cl.lambda);
            assert!((w.lambda - cl.lambda).abs() < 1e-8 * cl.lambda.abs().max(1.0));
        }
    }

    #[test]
    fn full_data_zero_potential_and_dedup() {
        let d = compute_spectral_data(&zero_graph(3), 3).unwrap();
        assert_eq!(d.entries().len(), 9);
        let e = d.entry(2, 2);
        let f = d.entry(2, 3);
        assert!((e.lambda - 4.0).abs() < 1e-10 && (f.lambda - 4.0).abs() < 1e-10);
        assert_eq!(e.alpha_prime, e.alpha);
        assert!(f.alpha_prime.norm() == 0.0);
        assert!(max_asymmetry(d.entries()) < 1e-12);
        // α-sums per level match the exact values with vanishing remainder.
        for n in 1..=3 {
            let s = (1..=3).fold(CMat::zeros(3, 3), |acc, k| {
                acc + d.entry(n, k).alpha_prime.matrix()
            });
            let nf = n as f64;
            let t = make_graph_projector(3).unwrap();
            let want = t.matrix() * c(2.0 * (nf - 0.5).powi(2) / PI)
                + t.complement().matrix() * c(2.0 * nf * nf / PI);
            assert!((s - &want).norm() < 1e-6 * want.norm());
        }
    }

    fn entry(lambda: f64, alpha: &[f64]) -> (f64, HermitianMatrix) {
        (lambda, HermitianMatrix::from_real_diagonal(alpha))
    }

    #[test]
    fn dedup_patterns() {
        let simple = SpectralDataSet::new(
            2,
            1,
            0.0,
            Provenance::Loaded,
            vec![entry(1.0, &[1.0, 0.0]), entry(2.0, &[0.0, 1.0])],
        )
        .unwrap();
        assert!(simple.entries().iter().all(|e| e.alpha_prime == e.alpha));
        let triple = SpectralDataSet::new(
            3,
            1,
            0.0,
            Provenance::Loaded,
            vec![
                entry(1.0, &[1.0, 2.0, 3.0]),
                entry(1.0, &[1.0, 2.0, 3.0]),
                entry(1.0, &[1.0, 2.0, 3.0]),
            ],
        )
        .unwrap();
        assert_eq!(
            triple.entry(1, 1).alpha_prime.norm(),
            triple.entry(1, 1).alpha.norm()
        );
        assert_eq!(triple.entry(1, 2).alpha_prime.norm(), 0.0);
        assert_eq!(triple.entry(1, 3).alpha_prime.norm(), 0.0);
    }

    #[test]
    fn unequal_weights_on_equal_eigenvalues_rejected() {
        let bad = SpectralDataSet::new(
            2,
            1,
            0.0,
            Provenance::Loaded,
            vec![entry(1.0, &[1.0, 1.0]), entry(1.0, &[1.0, 2.0])],
        );
        assert!(matches!(bad, Err(Error::SdViolation(_))));
        let rank = SpectralDataSet::new(
            2,
            1,
            0.0,
            Provenance::Loaded,
            vec![entry(1.0, &[1.0, 1.0]), entry(2.0, &[0.0, 1.0])],
        );
        assert!(matches!(rank, Err(Error::SdViolation(_))));
    }
}

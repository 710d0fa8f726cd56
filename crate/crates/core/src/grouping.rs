//! Grouping of the eigenvalue square roots of two data sets and the distance Ξ.

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, CMat};
use crate::spectral::SpectralDataSet;

/// Minimal gap between consecutive groups, in `ρ` units.
pub const GROUP_SEPARATION: f64 = 0.1;
const Z_EQUAL: f64 = 1e-8;

/// A collection `G_k` split into subcollections; every `(l, j)` listed stands
/// for both `ρ_lj0` (data) and `ρ_lj1` (model).
#[derive(Clone, Debug)]
pub struct Group {
    /// Main part `n_k` of the asymptotics for this collection.
    pub center: f64,
    pub subgroups: Vec<Vec<(usize, usize)>>,
    pub xi: f64,
}

impl Group {
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.subgroups.iter().flatten().copied()
    }
}

#[derive(Clone, Debug)]
pub struct GroupPartition {
    pub n0: usize,
    pub groups: Vec<Group>,
    /// `Ξ = (Σ (k ξ_k)²)^{1/2}` over the truncated groups.
    pub xi_total: f64,
}

impl GroupPartition {
    /// Index of the group holding `(l, j)`.
    pub fn group_of(&self, l: usize, j: usize) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.indices().any(|t| t == (l, j)))
    }
}

fn rho_pair(data: &SpectralDataSet, model: &SpectralDataSet, l: usize, j: usize) -> (f64, f64) {
    (data.entry(l, j).rho(), model.entry(l, j).rho())
}

fn interval(data: &SpectralDataSet, model: &SpectralDataSet, idx: &[(usize, usize)]) -> (f64, f64) {
    idx.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(l, j)| {
            let (a, b) = rho_pair(data, model, l, j);
            (lo.min(a).min(b), hi.max(a).max(b))
        })
}

/// Distinct index sets `{k : z_k = z_s}` within `range`, one-based.
fn index_sets(z: &[f64], range: std::ops::Range<usize>) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for s in range.clone() {
        let set: Vec<usize> = range
            .clone()
            .filter(|&k| (z[k] - z[s]).abs() <= Z_EQUAL * (1.0 + z[s].abs()))
            .map(|k| k + 1)
            .collect();
        if !sets.contains(&set) {
            sets.push(set);
        }
    }
    sets
}

/// Splits the low levels `n ≤ n₀` into the components of "equal `λ` or equal `λ̃`".
fn low_subgroups(
    data: &SpectralDataSet,
    model: &SpectralDataSet,
    n0: usize,
) -> Vec<Vec<(usize, usize)>> {
    let m = data.m();
    let count = n0 * m;
    let mut parent: Vec<usize> = (0..count).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    for a in 0..count {
        for b in a + 1..count {
            let (ea, eb) = (&data.entries()[a], &data.entries()[b]);
            let (ma, mb) = (&model.entries()[a], &model.entries()[b]);
            if eq(ea.lambda, eb.lambda) || eq(ma.lambda, mb.lambda) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut comps: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for i in 0..count {
        let r = find(&mut parent, i);
        let tag = (i / m + 1, i % m + 1);
        match comps.iter_mut().find(|(root, _)| *root == r) {
            Some((_, v)) => v.push(tag),
            None => comps.push((r, vec![tag])),
        }
    }
    comps.into_iter().map(|(_, v)| v).collect()
}

fn alpha_sum(set: &SpectralDataSet, idx: &[(usize, usize)]) -> CMat {
    let m = set.m();
    idx.iter().fold(CMat::zeros(m, m), |acc, &(l, j)| {
        acc + set.entry(l, j).alpha_prime.matrix()
    })
}

/// `ξ_k` of one collection; `k` is one-based.
fn xi_of(
    data: &SpectralDataSet,
    model: &SpectralDataSet,
    k: usize,
    subgroups: &[Vec<(usize, usize)>],
) -> f64 {
    let kf = k as f64;
    let mut spread = 0.0;
    let mut alpha_terms = 0.0;
    for sub in subgroups {
        let rhos: Vec<f64> = sub
            .iter()
            .flat_map(|&(l, j)| {
                let (a, b) = rho_pair(data, model, l, j);
                [a, b]
            })
            .collect();
        for a in &rhos {
            for b in &rhos {
                spread += (a - b).abs();
            }
        }
        alpha_terms += spectral_norm(&(alpha_sum(data, sub) - alpha_sum(model, sub)));
    }
    let all: Vec<(usize, usize)> = subgroups.iter().flatten().copied().collect();
    let whole = spectral_norm(&(alpha_sum(data, &all) - alpha_sum(model, &all)));
    spread + alpha_terms / kf.powi(3) + whole / kf.powi(2)
}

fn layout(
    m: usize,
    p: usize,
    z: &[f64],
    n0: usize,
    n_max: usize,
    low: Vec<Vec<(usize, usize)>>,
) -> Vec<(f64, Vec<Vec<(usize, usize)>>)> {
    let j1 = index_sets(z, 0..p);
    let j2 = index_sets(z, p..m);
    let mut out = vec![(0.0, low)];
    for n in n0 + 1..=n_max {
        let first = j1
            .iter()
            .map(|s| s.iter().map(|&k| (n, k)).collect())
            .collect();
        let second = j2
            .iter()
            .map(|s| s.iter().map(|&k| (n, k)).collect())
            .collect();
        out.push((n as f64 - 0.5, first));
        out.push((n as f64, second));
    }
    out
}

fn separated(
    data: &SpectralDataSet,
    model: &SpectralDataSet,
    groups: &[(f64, Vec<Vec<(usize, usize)>>)],
) -> bool {
    let spans: Vec<(f64, f64)> = groups
        .iter()
        .map(|(_, subs)| {
            interval(
                data,
                model,
                &subs.iter().flatten().copied().collect::<Vec<_>>(),
            )
        })
        .collect();
    spans
        .windows(2)
        .all(|w| w[1].0 - w[0].1 >= GROUP_SEPARATION)
}

/// Builds `G_k`, `G_ki`, `ξ_k` and `Ξ` for `data` against `model`, where `p`
/// and `z` are the shared asymptotic coefficients.
pub fn build_groups(
    data: &SpectralDataSet,
    model: &SpectralDataSet,
    p: usize,
    z: &[f64],
) -> Result<GroupPartition> {
    let m = data.m();
    if model.m() != m || model.n_max() != data.n_max() || z.len() != m || p == 0 || p >= m {
        return Err(Error::InvalidDimension(format!(
            "data (m = {m}, N = {}) and model (m = {}, N = {}) do not match, or z/p are inconsistent",
            data.n_max(),
            model.m(),
            model.n_max()
        )));
    }
    let n_max = data.n_max();
    for n0 in 1..=(n_max / 2).max(1) {
        let groups = layout(m, p, z, n0, n_max, low_subgroups(data, model, n0));
        if !separated(data, model, &groups) {
            continue;
        }
        let groups: Vec<Group> = groups
            .into_iter()
            .enumerate()
            .map(|(i, (center, subgroups))| {
                let xi = xi_of(data, model, i + 1, &subgroups);
                Group {
                    center,
                    subgroups,
                    xi,
                }
            })
            .collect();
        let xi_total = groups
            .iter()
            .enumerate()
            .map(|(i, g)| ((i + 1) as f64 * g.xi).powi(2))
            .sum::<f64>()
            .sqrt();
        return Ok(GroupPartition {
            n0,
            groups,
            xi_total,
        });
    }
    Err(Error::Grouping(format!(
        "no n0 ≤ {} separates the eigenvalue groups by {GROUP_SEPARATION}; the data do not follow the model asymptotics",
        (n_max / 2).max(1)
    )))
}

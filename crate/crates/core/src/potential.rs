//! Sampled Hermitian matrix potentials on `[0, π]` with cubic interpolation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_residual, CMat, TOL_HERM};

/// Smallest accepted number of mesh intervals.
pub const MIN_INTERVALS: usize = 64;

#[derive(Clone, Debug)]
pub struct PotentialGrid {
    mesh: Vec<f64>,
    values: Vec<CMat>,
}

impl PotentialGrid {
    pub fn new(mesh: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if mesh.len() != values.len() {
            return Err(Error::InvalidInput("mesh and value counts differ".into()));
        }
        if mesh.len() < MIN_INTERVALS + 1 {
            return Err(Error::InvalidInput(format!(
                "potential mesh needs at least {} nodes, got {}",
                MIN_INTERVALS + 1,
                mesh.len()
            )));
        }
        if mesh[0] != 0.0 || mesh[mesh.len() - 1] != PI {
            return Err(Error::InvalidInput(
                "potential mesh must start at 0 and end at π".into(),
            ));
        }
        if mesh.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "potential mesh must be strictly increasing".into(),
            ));
        }
        let m = values[0].nrows();
        for (i, v) in values.iter().enumerate() {
            if v.nrows() != m || v.ncols() != m {
                return Err(Error::InvalidDimension(format!(
                    "potential sample {i} is not {m}x{m}"
                )));
            }
            let res = hermitian_residual(v);
            if res > TOL_HERM * v.norm().max(1.0) {
                return Err(Error::NonHermitian(format!(
                    "potential sample at x = {:.6} has ‖Q − Q†‖ = {res:.3e}",
                    mesh[i]
                )));
            }
        }
        Ok(Self { mesh, values })
    }

    /// Samples `f` on a uniform mesh with `intervals` intervals.
    pub fn from_fn(intervals: usize, f: impl Fn(f64) -> CMat) -> Result<Self> {
        let mesh = uniform_mesh(intervals);
        let values = mesh.iter().map(|&x| f(x)).collect();
        Self::new(mesh, values)
    }

    pub fn constant(value: CMat) -> Result<Self> {
        Self::from_fn(MIN_INTERVALS, |_| value.clone())
    }

    /// Diagonal potential from per-edge scalar functions.
    pub fn diagonal_from_fns(
        intervals: usize,
        edges: &[Box<dyn Fn(f64) -> f64 + Send + Sync>],
    ) -> Result<Self> {
        let m = edges.len();
        Self::from_fn(intervals, |x| {
            CMat::from_fn(m, m, |i, j| if i == j { c(edges[i](x)) } else { c(0.0) })
        })
    }

    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    /// The common value when every sample is identical.
    pub fn constant_value(&self) -> Option<&CMat> {
        let first = &self.values[0];
        self.values.iter().all(|v| v == first).then_some(first)
    }

    /// Largest off-diagonal modulus over all samples.
    pub fn offdiag_max(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for v in &self.values {
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        worst = worst.max(v[(i, j)].norm());
                    }
                }
            }
        }
        worst
    }

    /// Cubic (four-point Lagrange) interpolation.
    pub fn value_at(&self, x: f64) -> CMat {
        let n = self.mesh.len();
        let i = match self.mesh.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return self.values[i].clone(),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let start = i.saturating_sub(1).min(n - 4);
        let xs = &self.mesh[start..start + 4];
        let mut out = CMat::zeros(self.dim(), self.dim());
        for (a, xa) in xs.iter().enumerate() {
            let mut w = 1.0;
            for (b, xb) in xs.iter().enumerate() {
                if a != b {
                    w *= (x - xb) / (xa - xb);
                }
            }
            out += &self.values[start + a] * c(w);
        }
        out
    }

    /// `∫₀^π Q(x) dx` of the interpolant, exact for the piecewise cubic.
    pub fn integral(&self) -> CMat {
        let g = 0.5 / 3f64.sqrt();
        let mut sum = CMat::zeros(self.dim(), self.dim());
        for w in self.mesh.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = b - a;
            let mid = 0.5 * (a + b);
            sum += (self.value_at(mid - g * h) + self.value_at(mid + g * h)) * c(0.5 * h);
        }
        sum
    }

    /// Same potential shifted by `shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let m = self.dim();
        let id = CMat::identity(m, m) * c(shift);
        Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v + &id).collect(),
        }
    }
}

pub fn uniform_mesh(intervals: usize) -> Vec<f64> {
    let mut mesh: Vec<f64> = (0..=intervals)
        .map(|i| PI * i as f64 / intervals as f64)
        .collect();
    mesh[intervals] = PI;
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_or_misaligned_mesh() {
        let short = uniform_mesh(10);
        let vals = vec![CMat::zeros(1, 1); short.len()];
        assert!(PotentialGrid::new(short, vals).is_err());
        let mut mesh = uniform_mesh(64);
        mesh[64] = 3.0;
        let vals = vec![CMat::zeros(1, 1); mesh.len()];
        assert!(PotentialGrid::new(mesh, vals).is_err());
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let g = PotentialGrid::from_fn(64, |x| CMat::from_element(1, 1, c(f(x)))).unwrap();
        for &x in &[0.013, 1.0, 2.5, 3.1] {
            assert!((g.value_at(x)[(0, 0)].re - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn integral_of_cosine() {
        let g =
            PotentialGrid::from_fn(512, |x| CMat::from_element(1, 1, c(x.cos() + 1.0))).unwrap();
        assert!((g.integral()[(0, 0)].re - PI).abs() < 1e-10);
    }
}

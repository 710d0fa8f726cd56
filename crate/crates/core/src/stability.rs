//! Stability experiment: perturb one eigenvalue of the model data, rebuild,
//! and compare the reconstruction error with `Ξ`.

use serde::Serialize;

use crate::asymptotics::AsymptoticCoefficients;
use crate::error::{Error, Result};
use crate::grouping::build_groups;
use crate::inverse::{reconstruct_unchecked, ModelProblem, ReconstructionOptions};
use crate::spectral::SpectralDataSet;

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub delta: f64,
    pub xi: f64,
    pub q_error: f64,
    pub h_error: f64,
    /// `q_error / Ξ`, absent when `Ξ = 0`.
    pub ratio: Option<f64>,
    pub n0: usize,
    pub offdiag_solution: f64,
}

/// Model data with `ρ_nk` replaced by `ρ̃_nk + δ`.
pub fn perturb_rho(
    model_data: &SpectralDataSet,
    n: usize,
    k: usize,
    delta: f64,
) -> Result<SpectralDataSet> {
    if n == 0 || n > model_data.n_max() || k == 0 || k > model_data.m() {
        return Err(Error::InvalidInput(format!(
            "no entry ({n}, {k}) in data with N = {}, m = {}",
            model_data.n_max(),
            model_data.m()
        )));
    }
    let e = model_data.entry(n, k);
    if e.lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "entry ({n}, {k}) has λ = {} < 0; shift the spectrum first",
            e.lambda
        )));
    }
    model_data.with_lambda(n, k, (e.rho() + delta).powi(2))
}

/// One row per `δ`: `Ξ` from the grouping, `‖Q − Q̃‖_{L₂}` and `‖H − H̃‖`.
pub fn stability_sweep(
    model: &ModelProblem,
    coeffs: &AsymptoticCoefficients,
    model_data: &SpectralDataSet,
    entry: (usize, usize),
    deltas: &[f64],
    opts: &ReconstructionOptions,
) -> Result<Vec<StabilityRow>> {
    let q_model = model.potential().matrix().clone();
    deltas
        .iter()
        .map(|&delta| {
            let data = perturb_rho(model_data, entry.0, entry.1, delta)?;
            let groups = build_groups(&data, model_data, coeffs.p(), &coeffs.z)?;
            let rec = reconstruct_unchecked(&data, model, model_data, opts)?;
            let q_error = rec.l2_error_against(|_| q_model.clone());
            let h_error = (&rec.h - model.h.matrix()).norm();
            let ratio = (groups.xi_total > 0.0).then(|| q_error / groups.xi_total);
            Ok(StabilityRow {
                delta,
                xi: groups.xi_total,
                q_error,
                h_error,
                ratio,
                n0: groups.n0,
                offdiag_solution: rec.diagnostics.offdiag_solution,
            })
        })
        .collect()
}

/// `max ratio / min ratio` over the rows with `Ξ > 0`.
pub fn ratio_spread(rows: &[StabilityRow]) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if r.is_empty() {
        return None;
    }
    let hi = r.iter().cloned().fold(f64::MIN, f64::max);
    let lo = r.iter().cloned().fold(f64::MAX, f64::min);
    Some(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::build_model_graph;

    #[test]
    fn zero_row_and_scaling() {
        let coeffs = AsymptoticCoefficients::from_graph(&[0.0; 3], 0.0).unwrap();
        let model = build_model_graph(&[0.0; 3], 0.0).unwrap();
        let md = model.spectral_data(6).unwrap();
        let opts = ReconstructionOptions {
            mesh_points: 65,
            ..Default::default()
        };
        let rows =
            stability_sweep(&model, &coeffs, &md, (1, 1), &[0.0, 1e-3, 1e-2], &opts).unwrap();
        assert_eq!(rows[0].xi, 0.0);
        assert!(rows[0].q_error <= 1e-6, "{}", rows[0].q_error);
        assert!(rows[1].xi > 0.0 && rows[2].xi > rows[1].xi);
        let spread = ratio_spread(&rows).unwrap();
        assert!(spread < 3.0, "{spread}");
    }

    #[test]
    fn rejects_missing_entry() {
        let model = build_model_graph(&[0.0; 2], 0.0).unwrap();
        let md = model.spectral_data(2).unwrap();
        assert!(matches!(
            perturb_rho(&md, 3, 1, 0.1),
            Err(Error::InvalidInput(_))
        ));
    }
}

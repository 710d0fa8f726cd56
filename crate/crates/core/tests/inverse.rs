mod common;

use proptest::prelude::*;

use common::{rotation, trig_graph};
use gsturm::asymptotics::{fit_coefficients, AsymptoticCoefficients};
use gsturm::error::Error;
use gsturm::inverse::{
    build_model_general, build_model_graph, l2_distance, reconstruct, solve_at, NodeSet,
    ReconstructionOptions,
};
use gsturm::linalg::HermitianMatrix;
use gsturm::spectral::{compute_spectral_data, Provenance, SpectralDataSet};
use gsturm::stability::stability_sweep;

fn coarse() -> ReconstructionOptions {
    ReconstructionOptions {
        mesh_points: 33,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn own_data_is_a_fixed_point(w in prop::array::uniform3(-1.0f64..1.0), z1 in -1.0f64..1.0) {
        let model = build_model_graph(&w, z1).unwrap();
        let md = model.spectral_data(4).unwrap();
        let rec = reconstruct(&md, &model, &md, &coarse()).unwrap();
        for q in &rec.q {
            prop_assert!((q - model.potential().matrix()).norm() < 1e-8);
        }
        prop_assert!((&rec.h - model.h.matrix()).norm() < 1e-8);
    }
}

#[test]
fn error_shrinks_with_the_perturbation() {
    let coeffs = AsymptoticCoefficients::from_graph(&[0.2, -0.1, 0.4], 0.3).unwrap();
    let model = build_model_graph(&[0.2, -0.1, 0.4], 0.3).unwrap();
    let md = model.spectral_data(5).unwrap();
    let rows = stability_sweep(
        &model,
        &coeffs,
        &md,
        (2, 2),
        &[1e-2, 1e-3, 1e-4, 0.0],
        &coarse(),
    )
    .unwrap();
    for w in rows.windows(2) {
        assert!(
            w[1].q_error < w[0].q_error,
            "{} !< {}",
            w[1].q_error,
            w[0].q_error
        );
    }
    assert!(rows[3].q_error < 1e-8);
}

#[test]
fn derivative_matches_central_difference() {
    let p = trig_graph();
    let data = compute_spectral_data(&p, 6).unwrap();
    let coeffs = fit_coefficients(&data, true).unwrap();
    let model = gsturm::inverse::build_model(&coeffs, true).unwrap();
    let md = model.spectral_data(6).unwrap();
    let set = NodeSet::new(&data, &model, &md).unwrap();
    let (x, h) = (1.3, 1e-5);
    let mid = solve_at(&set, x, 6).unwrap();
    let hi = solve_at(&set, x + h, 6).unwrap();
    let lo = solve_at(&set, x - h, 6).unwrap();
    for a in 0..set.len() {
        let fd = (&hi.s[a] - &lo.s[a]) / gsturm::linalg::c(2.0 * h);
        let scale = mid.ds[a].norm().max(1.0);
        assert!(
            (&fd - &mid.ds[a]).norm() / scale < 1e-6,
            "node {a}: {:.3e}",
            (&fd - &mid.ds[a]).norm()
        );
    }
}

fn rotated(data: &SpectralDataSet, angle: f64) -> SpectralDataSet {
    let u = rotation(data.m(), angle);
    let entries = data
        .entries()
        .iter()
        .map(|e| {
            let a = if (e.n, e.k) == (2, 1) {
                &u * e.alpha.matrix() * u.adjoint()
            } else {
                e.alpha.matrix().clone()
            };
            (e.lambda, HermitianMatrix::symmetrized(a).0)
        })
        .collect();
    SpectralDataSet::new(
        data.m(),
        data.n_max(),
        data.shift(),
        Provenance::Loaded,
        entries,
    )
    .unwrap()
}

#[test]
fn gate_rejects_rotated_weights_only_in_graph_mode() {
    let data = rotated(&compute_spectral_data(&trig_graph(), 8).unwrap(), 0.1);
    let graph = build_model_graph(&[0.0; 3], 0.0).unwrap();
    let gd = graph.spectral_data(8).unwrap();
    match reconstruct(&data, &graph, &gd, &coarse()) {
        Err(Error::Diagonality(msg)) => assert!(msg.contains("off-diagonal residual")),
        other => panic!(
            "expected a diagonality error, got {:?}",
            other.map(|r| r.diagnostics)
        ),
    }
    let coeffs = fit_coefficients(&data, false).unwrap();
    let general = build_model_general(&coeffs).unwrap();
    let md = general.spectral_data(8).unwrap();
    assert!(reconstruct(&data, &general, &md, &coarse()).is_ok());
}

#[test]
fn graph_and_general_models_agree() {
    let p = trig_graph();
    let data = compute_spectral_data(&p, 10).unwrap();
    let graph_coeffs = fit_coefficients(&data, true).unwrap();
    let graph = gsturm::inverse::build_model(&graph_coeffs, true).unwrap();
    let general = build_model_general(&graph_coeffs).unwrap();
    let a = reconstruct(&data, &graph, &graph.spectral_data(10).unwrap(), &coarse()).unwrap();
    let b = reconstruct(
        &data,
        &general,
        &general.spectral_data(10).unwrap(),
        &coarse(),
    )
    .unwrap();
    let dq = l2_distance(&a.mesh, &a.q, &b.q);
    let err = a.l2_error_against(|x| p.potential_at(x));
    // The two models differ only by the H̃/Q̃ split; both runs should land within truncation error.
    assert!(dq < err, "{dq:.3e} vs error {err:.3e}");
    assert!((&a.h - &b.h).norm() < 1e-3, "{:.3e}", (&a.h - &b.h).norm());
}

// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ics_ensemble::detectors::{
    fit_iforest, fit_iforest_detector, fit_ocnn, fit_ocnn_detector, fit_ocsvm, fit_ocsvm_detector, measure_from_path,
    score, Detector, IforestParams, OcnnParams, OcsvmParams,
};
use ics_ensemble::ensemble::{fit_base, DetectorParams};
use ics_ensemble::FeatureMatrix;

fn gaussian_rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..2).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn gaussian(n: usize, seed: u64) -> FeatureMatrix {
    FeatureMatrix::from_rows(&gaussian_rows(n, seed)).unwrap()
}

#[test]
fn ocsvm_flags_far_point_and_keeps_dual_box() {
    let data = gaussian(200, 11);
    let params = OcsvmParams::default();
    let (model, warnings) = fit_ocsvm(&data, &params).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert!(model.score_row(&[25.0, 25.0]) < 0.0);
    assert!(model.n_support() <= 200);
    let bound = 1.0 / (params.nu * 200.0);
    let coefs: Vec<f64> = model.per_row_coefficients().collect();
    assert!(coefs.iter().all(|&a| (0.0..=bound + 1e-12).contains(&a)), "{coefs:?}");
    assert!((coefs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn ocsvm_scores_do_not_depend_on_row_order() {
    let rows = gaussian_rows(150, 4);
    let mut shuffled = rows.clone();
    shuffled.reverse();
    shuffled.swap(3, 90);
    // differences between two solves are of the order of the KKT tolerance
    let params = OcsvmParams { tolerance: 1e-10, max_passes: 10_000, ..Default::default() };
    let a = fit_ocsvm(&FeatureMatrix::from_rows(&rows).unwrap(), &params).unwrap().0;
    let b = fit_ocsvm(&FeatureMatrix::from_rows(&shuffled).unwrap(), &params).unwrap().0;
    for r in gaussian(100, 99).rows() {
        assert!((a.score_row(r) - b.score_row(r)).abs() < 1e-7);
    }
}

#[test]
fn duplicated_rows_get_duplicated_scores() {
    let mut rows = gaussian_rows(60, 2);
    rows.push(rows[5].clone());
    let data = FeatureMatrix::from_rows(&rows).unwrap();
    let params = DetectorParams::seeded(1);
    for fitted in [
        fit_ocsvm_detector(&data, &params.ocsvm).unwrap(),
        fit_ocnn_detector(&data, &OcnnParams { epochs: 20, ..params.ocnn.clone() }).unwrap(),
        fit_iforest_detector(&data, &params.iforest).unwrap(),
    ] {
        let s = score(&fitted.detector, &data).unwrap();
        assert_eq!(s[5].to_bits(), s[60].to_bits(), "{:?}", fitted.detector.kind());
    }
}

#[test]
fn ocnn_keeps_dense_cluster_normal() {
    let data = gaussian(400, 21);
    let params = OcnnParams { rng_seed: 4, ..Default::default() };
    let model = fit_ocnn(&data, &params).unwrap();
    let normal = data.rows().filter(|r| model.score_row(r) >= 0.0).count() as f64 / 400.0;
    assert!(normal >= 1.0 - params.nu - 0.05, "{normal}");
    assert!(model.score_row(&[25.0, 25.0]) < 0.0);
}

#[test]
fn iforest_respects_height_limit_and_contamination() {
    let data = gaussian(1000, 8);
    let params = IforestParams { rng_seed: 12, ..Default::default() };
    assert_eq!((params.n_estimators, params.max_samples, params.contamination), (100, 256, 0.007));
    let (model, _) = fit_iforest(&data, &params).unwrap();
    assert!(model.trees.iter().all(|t| t.depth() <= 8));
    let negative = data.rows().filter(|r| model.score_row(r) < 0.0).count() as f64 / 1000.0;
    assert!(negative <= params.contamination + 0.01, "{negative}");
}

#[test]
fn anomaly_measure_falls_as_paths_lengthen() {
    let norm = 10.0;
    let mut last = f64::INFINITY;
    for d in 0..40 {
        let a = measure_from_path(d as f64 * 0.5, norm);
        assert!(a < last && a > 0.0 && a <= 1.0);
        last = a;
    }
    assert_eq!(measure_from_path(norm, norm), 0.5);
}

#[test]
fn training_scores_match_rescoring() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..4).map(|_| f64::from(rng.random_range(0..3u8))).collect())
        .collect();
    let data = FeatureMatrix::from_rows(&rows).unwrap();
    let base = fit_base(&data, &DetectorParams::seeded(2)).unwrap();
    for (detector, raw) in base.detectors.iter().zip(&base.raw_scores) {
        let again = score(detector, &data).unwrap();
        assert!(again.iter().zip(raw).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

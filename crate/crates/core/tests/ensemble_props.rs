//! Weighted-ensemble properties: convexity, relabeling invariance, the
//! group-averaged prediction oracle, and serialization.

mod common;

use clustree::data::Dataset;
use clustree::ensemble::{
    fit_ensemble, predict_group, predict_point, shared_weights, BaseKind, PredictionMode,
};
use clustree::model_io::{load_model, save_model, ModelFile};
use clustree::numerics::RandomSource;
use clustree::simgen::{generate, Setting, SimConfig};
use clustree::stage1::Stage1Kind;
use clustree::tree::TreeConfig;
use common::dataset_from_rows;

/// Three clearly separated groups with different linear outcome patterns.
fn clustered_data(rng: &mut RandomSource) -> Dataset {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let mut groups = Vec::new();
    let patterns: [(f64, f64, f64); 3] = [(0.0, 1.0, 0.0), (6.0, -2.0, 1.0), (12.0, 0.5, -3.0)];
    for (g, (center, slope, intercept)) in patterns.iter().enumerate() {
        for _ in 0..20 {
            let x0 = center + rng.standard_normal();
            let x1 = rng.uniform(-1.0, 1.0);
            rows.push(vec![x0, x1]);
            ys.push(intercept + slope * x0 + 0.1 * rng.standard_normal());
            groups.push(format!("g{g}"));
        }
    }
    dataset_from_rows(&rows, &ys, &groups)
}

#[test]
fn predictions_stay_in_convex_hull_of_learners() {
    let mut rng = RandomSource::new(404);
    let data = clustered_data(&mut rng);
    let ens = fit_ensemble(
        &data,
        BaseKind::Tree,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        1,
        &RandomSource::new(0),
    )
    .unwrap();
    for _ in 0..1000 {
        let x = [rng.uniform(-5.0, 17.0), rng.uniform(-2.0, 2.0)];
        let member: Vec<f64> = ens
            .learners()
            .iter()
            .map(|l| l.predict(&x).unwrap())
            .collect();
        let lo = member.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = member.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let pred = predict_point(&ens, &x).unwrap();
        assert!(
            pred >= lo - 1e-12 && pred <= hi + 1e-12,
            "prediction {pred} outside [{lo}, {hi}]"
        );
    }
}

#[test]
fn group_relabeling_leaves_predictions_unchanged() {
    let mut rng = RandomSource::new(505);
    let data = clustered_data(&mut rng);
    // rename groups so their sort order reverses: g0 -> z, g1 -> m, g2 -> a
    let renames = [("g0", "z"), ("g1", "m"), ("g2", "a")];
    let renamed_groups: Vec<String> = data
        .groups()
        .iter()
        .map(|g| {
            renames
                .iter()
                .find(|(from, _)| from == g)
                .map(|(_, to)| to.to_string())
                .unwrap()
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..data.n_rows()).map(|i| data.row(i).to_vec()).collect();
    let renamed = dataset_from_rows(&rows, data.outcomes(), &renamed_groups);

    let fit = |d: &Dataset| {
        fit_ensemble(
            d,
            BaseKind::Tree,
            Stage1Kind::GaussianNaiveBayes,
            &TreeConfig::default(),
            1,
            &RandomSource::new(0),
        )
        .unwrap()
    };
    let a = fit(&data);
    let b = fit(&renamed);
    for _ in 0..200 {
        let x = [rng.uniform(-5.0, 17.0), rng.uniform(-2.0, 2.0)];
        let pa = predict_point(&a, &x).unwrap();
        let pb = predict_point(&b, &x).unwrap();
        assert!((pa - pb).abs() < 1e-12, "{pa} vs {pb}");
    }
}

#[test]
fn identical_learners_reduce_to_single_learner() {
    // two groups with identical rows: y depends on x0 only
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let mut groups = Vec::new();
    for pass in 0..2 {
        for i in 0..10 {
            let x = i as f64 * 0.3;
            rows.push(vec![x]);
            ys.push(x * 2.0);
            groups.push(if pass == 0 { "a".to_string() } else { "b".to_string() });
        }
    }
    let data = dataset_from_rows(&rows, &ys, &groups);
    let ens = fit_ensemble(
        &data,
        BaseKind::Tree,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        1,
        &RandomSource::new(0),
    )
    .unwrap();
    let mut rng = RandomSource::new(9);
    for _ in 0..100 {
        let x = [rng.uniform(-1.0, 4.0)];
        let pred = predict_point(&ens, &x).unwrap();
        let single = ens.learners()[0].predict(&x).unwrap();
        assert!((pred - single).abs() < 1e-12);
    }
}

#[test]
fn group_averaged_prediction_matches_hand_rolled_loop() {
    let mut rng = RandomSource::new(606);
    let data = clustered_data(&mut rng);
    let ens = fit_ensemble(
        &data,
        BaseKind::Tree,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        1,
        &RandomSource::new(0),
    )
    .unwrap();

    // a 10-row query block
    let queries: Vec<Vec<f64>> = (0..10)
        .map(|_| vec![rng.uniform(-2.0, 14.0), rng.uniform(-1.0, 1.0)])
        .collect();
    let refs: Vec<&[f64]> = queries.iter().map(|r| r.as_slice()).collect();
    let got = predict_group(&ens, &refs, PredictionMode::GroupAveraged).unwrap();

    // oracle: explicit W-weighted double loop over (learner, row)
    let w = shared_weights(&ens, &refs).unwrap();
    for (row, &fast) in refs.iter().zip(&got) {
        let mut manual = 0.0;
        for (j, learner) in ens.learners().iter().enumerate() {
            manual += w.values()[j] * learner.predict(row).unwrap();
        }
        assert!((manual - fast).abs() < 1e-12, "{manual} vs {fast}");
    }
}

#[test]
fn setting1_fit_produces_eight_learners() {
    // n = 40, K = 10, sigma_alpha = 4: the 80/20 split leaves J = 8 groups
    let config = SimConfig {
        setting: Setting::One,
        dgp: None,
        n: 40,
        k: 10,
        sigma_alpha: 4.0,
        seed: 2,
    };
    let sim = generate(&config).unwrap();
    let ens = fit_ensemble(
        &sim.train,
        BaseKind::Tree,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        1,
        &RandomSource::new(0),
    )
    .unwrap();
    assert_eq!(ens.n_learners(), 8);
}

#[test]
fn forest_variant_sizes_forests_as_requested() {
    let mut rng = RandomSource::new(707);
    let data = clustered_data(&mut rng);
    let ens = fit_ensemble(
        &data,
        BaseKind::Forest,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        20,
        &RandomSource::new(1),
    )
    .unwrap();
    assert_eq!(ens.n_learners(), 3);
    let total: usize = ens
        .learners()
        .iter()
        .map(|l| match l {
            clustree::ensemble::BaseLearner::Forest(f) => f.n_trees(),
            clustree::ensemble::BaseLearner::Tree(_) => panic!("expected forests"),
        })
        .sum();
    assert_eq!(total, 60);
}

#[test]
fn model_file_roundtrip_is_prediction_lossless() {
    let mut rng = RandomSource::new(808);
    let data = clustered_data(&mut rng);
    let ens = fit_ensemble(
        &data,
        BaseKind::Forest,
        Stage1Kind::MultinomialLogistic,
        &TreeConfig::default(),
        4,
        &RandomSource::new(3),
    )
    .unwrap();
    let file = ModelFile::new(ens, data.feature_names().to_vec()).unwrap();
    let mut buf = Vec::new();
    save_model(&file, &mut buf).unwrap();
    let back = load_model(&buf[..]).unwrap();
    for _ in 0..200 {
        let x = [rng.uniform(-5.0, 17.0), rng.uniform(-2.0, 2.0)];
        let a = predict_point(&file.model, &x).unwrap();
        let b = predict_point(&back.model, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

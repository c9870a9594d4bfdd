//! Importance and interaction properties: permutation stability, H-squared
//! bounds, and convexity/linearity of the weighted VIVI combination.

mod common;

use clustree::importance::{
    pairwise_interaction, permutation_importance, vivi_matrix, weighted_vivi, ViviMatrix,
};
use clustree::numerics::RandomSource;
use clustree::stage1::WeightVector;
use clustree::tree::{fit_tree, TreeConfig};
use common::dataset_from_rows;
use proptest::prelude::*;

fn single_split_fixture() -> (clustree::tree::RegressionTree, clustree::Dataset) {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for i in 0..10 {
        rows.push(vec![0.1 * i as f64, 0.5 * (i % 3) as f64]);
        ys.push(0.0);
    }
    for i in 0..10 {
        rows.push(vec![5.0 + 0.1 * i as f64, 0.5 * (i % 3) as f64]);
        ys.push(10.0);
    }
    let groups = vec!["g".to_string(); 20];
    let data = dataset_from_rows(&rows, &ys, &groups);
    let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
    assert_eq!(tree.n_leaves(), 2);
    (tree, data)
}

#[test]
fn importance_stable_across_seeds() {
    // coefficient of variation of importance(0) over 20 seeds stays small
    let (tree, data) = single_split_fixture();
    let values: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = RandomSource::new(seed);
            permutation_importance(&tree, &data, 10, &mut rng)
                .unwrap()
                .clamped[0]
        })
        .collect();
    let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
    let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / values.len() as f64;
    let cv = var.sqrt() / mean;
    assert!(mean > 0.0);
    assert!(cv < 0.5, "coefficient of variation {cv}");
}

#[test]
fn vivi_diagonal_is_importance_and_offdiagonal_is_interaction() {
    let (tree, data) = single_split_fixture();
    let mut rng = RandomSource::new(3);
    let matrix = vivi_matrix(&tree, &data, 5, 8, &mut rng).unwrap().matrix;
    assert_eq!(matrix.n_features(), 2);
    assert!(matrix.get(0, 0) > 0.0);
    assert_eq!(matrix.get(1, 1), 0.0); // unused feature
    assert_eq!(matrix.get(0, 1), matrix.get(1, 0));
}

#[test]
fn h_squared_zero_for_single_feature_models() {
    // y depends on feature 0 alone; the fitted tree never splits feature 1,
    // so every pairwise interaction must vanish
    let mut rng = RandomSource::new(44);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)])
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| if r[0] > 0.5 { 3.0 } else { -3.0 }).collect();
    let groups = vec!["g".to_string(); 40];
    let data = dataset_from_rows(&rows, &ys, &groups);
    let tree = fit_tree(&data, &TreeConfig::default()).unwrap();
    assert_eq!(tree.used_features(), vec![0]);
    let (matrix, _) = pairwise_interaction(&tree, &data, 10).unwrap();
    assert!(matrix[1].abs() < 1e-10, "H2 = {}", matrix[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// weighted_vivi entries stay inside the entrywise range of the inputs.
    #[test]
    fn weighted_vivi_is_entrywise_convex(
        diag_a in prop::collection::vec(0.0f64..5.0, 3),
        diag_b in prop::collection::vec(0.0f64..5.0, 3),
        off_a in 0.0f64..1.0,
        off_b in 0.0f64..1.0,
        w0 in 0.0f64..1.0,
    ) {
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let build = |diag: &[f64], off: f64| {
            let mut values = vec![0.0; 9];
            for i in 0..3 {
                values[i * 3 + i] = diag[i];
            }
            values[1] = off; values[3] = off;
            ViviMatrix::new(names.clone(), values).unwrap()
        };
        let a = build(&diag_a, off_a);
        let b = build(&diag_b, off_b);
        let weights = WeightVector::new(vec![w0, 1.0 - w0]).unwrap();
        let combined = weighted_vivi(&[a.clone(), b.clone()], &weights).unwrap();
        for (idx, &v) in combined.values().iter().enumerate() {
            let lo = a.values()[idx].min(b.values()[idx]);
            let hi = a.values()[idx].max(b.values()[idx]);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    /// weighted_vivi is linear in the weight vector.
    #[test]
    fn weighted_vivi_linear_in_weights(
        mix in 0.0f64..1.0,
        w1a in 0.05f64..0.95,
        w2a in 0.05f64..0.95,
    ) {
        let names: Vec<String> = (0..2).map(|i| format!("f{i}")).collect();
        let a = ViviMatrix::new(names.clone(), vec![1.0, 0.2, 0.2, 4.0]).unwrap();
        let b = ViviMatrix::new(names.clone(), vec![3.0, 0.9, 0.9, 0.5]).unwrap();
        let vivis = [a, b];

        let w1 = WeightVector::new(vec![w1a, 1.0 - w1a]).unwrap();
        let w2 = WeightVector::new(vec![w2a, 1.0 - w2a]).unwrap();
        let blended = WeightVector::new(vec![
            mix * w1a + (1.0 - mix) * w2a,
            mix * (1.0 - w1a) + (1.0 - mix) * (1.0 - w2a),
        ])
        .unwrap();

        let direct = weighted_vivi(&vivis, &blended).unwrap();
        let via_parts = {
            let va = weighted_vivi(&vivis, &w1).unwrap();
            let vb = weighted_vivi(&vivis, &w2).unwrap();
            va.values()
                .iter()
                .zip(vb.values())
                .map(|(x, y)| mix * x + (1.0 - mix) * y)
                .collect::<Vec<f64>>()
        };
        for (d, v) in direct.values().iter().zip(&via_parts) {
            prop_assert!((d - v).abs() < 1e-12);
        }
    }
}

#[test]
fn repeats_zero_rejected() {
    let (tree, data) = single_split_fixture();
    let mut rng = RandomSource::new(0);
    assert!(permutation_importance(&tree, &data, 0, &mut rng).is_err());
}

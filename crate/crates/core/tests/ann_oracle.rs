mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use touchsig_core::ann::{mlp_init, scg_train, train_ann, AnnConfig, InputScaling, MlpModel, ScgConfig, SplitSpec};
use touchsig_core::files::ModelFile;
use touchsig_core::model::Label;
use touchsig_core::Phase;

#[test]
fn forward_matches_scalar_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for seed in 0..30 {
        let (d, h, c) = (rng.random_range(1..20), rng.random_range(1..30), rng.random_range(2..11));
        let classes = Label::all_digits()[..c].to_vec();
        let params: Vec<f64> = mlp_init(d, h, classes.clone(), seed)
            .unwrap()
            .params()
            .iter()
            .map(|p| p + 0.1 * normal.sample(&mut rng))
            .collect();
        let model = MlpModel::from_params(d, h, classes, params.clone()).unwrap();
        let x: Vec<f64> = (0..d).map(|_| 3.0 * normal.sample(&mut rng)).collect();
        let got = model.forward(&x).unwrap();
        let want = common::mlp_posterior(&params, d, h, c, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ranked_output_is_sorted_posterior() {
    let classes = Label::all_digits();
    let model = mlp_init(4, 6, classes.clone(), 3).unwrap();
    let x = [0.5, -1.0, 2.0, 0.0];
    let post = model.forward(&x).unwrap();
    let ranked = model.predict_ranked(&x).unwrap();
    assert_eq!(ranked.len(), 10);
    assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    for (label, p) in &ranked {
        let i = classes.iter().position(|l| l == label).unwrap();
        assert_eq!(*p, post[i]);
    }
    assert_eq!(model.predict(&x).unwrap(), ranked[0].0);
}

#[test]
fn scaling_maps_training_range_to_unit_interval() {
    let rows = [vec![0.0, 5.0, 1.0], vec![10.0, 5.0, 3.0], vec![4.0, 5.0, 2.0]];
    let s = InputScaling::fit(rows.iter().map(Vec::as_slice)).unwrap();
    assert_eq!(s.apply(&rows[0]), vec![-1.0, 0.0, -1.0]);
    assert_eq!(s.apply(&rows[1]), vec![1.0, 0.0, 1.0]);
    assert_eq!(s.apply(&rows[2]), vec![-0.2, 0.0, 0.0]);
}

#[test]
fn wide_hidden_layer_trains() {
    // a very wide network still fits in memory and takes finite steps
    let classes = Label::all_digits()[..3].to_vec();
    let data: Vec<(Vec<f64>, usize)> = (0..30).map(|i| (vec![(i % 3) as f64, (i % 5) as f64 * 0.1], i % 3)).collect();
    let init = mlp_init(2, 10_000, classes, 1).unwrap();
    let cfg = ScgConfig {
        max_epochs: 5,
        ..Default::default()
    };
    let (m, h) = scg_train(&init, &data, None, &cfg).unwrap();
    assert!(h.epochs.iter().all(|e| e.train_loss.is_finite()));
    assert!(m.loss(&data).unwrap() <= h.epochs[0].train_loss);
}

#[test]
fn early_stopping_returns_best_validation_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1.5).unwrap();
    // heavily overlapping classes so validation loss turns upward
    let rows: Vec<(Vec<f64>, Label)> = (0..120)
        .map(|i| {
            let c = i % 2;
            let x = (0..8).map(|_| c as f64 * 0.5 + noise.sample(&mut rng)).collect();
            (x, Label::all_digits()[c])
        })
        .collect();
    let samples: Vec<(&[f64], Label)> = rows.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
    let cfg = AnnConfig {
        hidden: 40,
        split: SplitSpec {
            seed: 2,
            ..Default::default()
        },
        ..Default::default()
    };
    let trained = train_ann(&samples, &cfg).unwrap();
    let h = &trained.history;
    let best = h.epochs[h.best_epoch].val_loss.unwrap();
    assert!(h.epochs.iter().filter_map(|e| e.val_loss).all(|v| v >= best));
    let val: Vec<(Vec<f64>, usize)> = trained
        .split
        .validation
        .iter()
        .map(|&i| (rows[i].0.clone(), Label::all_digits().iter().position(|l| *l == rows[i].1).unwrap()))
        .collect();
    assert!((trained.model.loss(&val).unwrap() - best).abs() < 1e-12);

    let again = train_ann(&samples, &cfg).unwrap();
    assert_eq!(again.model, trained.model);
}

#[test]
fn model_file_round_trip() {
    let classes = Label::all_digits();
    let model = mlp_init(150, 7, classes, 5).unwrap();
    let file = ModelFile::mlp(Phase::Phase2, AnnConfig::default(), None, model);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    file.save(&path).unwrap();
    assert_eq!(ModelFile::load(&path).unwrap(), file);
}

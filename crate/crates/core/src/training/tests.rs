use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::datamodel::tests::random_sample;
use crate::numerics::Tensor;

fn data(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut s = random_sample(&mut rng);
            s.scene_id = (i % 4) as u32;
            s.event_id = (i / 3) as u64;
            s
        })
        .collect()
}

fn small(model: &str) -> TrainConfig {
    TrainConfig {
        model: model.into(),
        gru_hidden: 8,
        epochs: 3,
        batch_size: 8,
        validation_fraction: 0.25,
        ..TrainConfig::default()
    }
}

#[test]
fn memorizes_a_repeated_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut one = random_sample(&mut rng);
    one.label = Behavior::ChangeRight;
    let copies = vec![one; 50];
    let cfg = TrainConfig {
        epochs: 200,
        patience: 200,
        validation_fraction: 0.0,
        ..TrainConfig::default()
    };
    let out = train(&copies, &cfg).unwrap();
    let last = out.history.last().unwrap();
    let best = out.history.iter().map(|r| r.train_nll).fold(f64::INFINITY, f64::min);
    assert!(best < 0.05, "best train NLL {} after {} epochs", best, last.epoch);
}

#[test]
fn same_seed_same_history() {
    let d = data(40, 1);
    let a = train(&d, &small("vbin")).unwrap();
    let b = train(&d, &small("vbin")).unwrap();
    let bits = |h: &[EpochRecord]| -> Vec<(u64, Option<u64>)> {
        h.iter().map(|r| (r.train_nll.to_bits(), r.val_nll.map(f64::to_bits))).collect()
    };
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_eq!(a.checkpoint, b.checkpoint);
}

#[test]
fn single_class_dataset_still_trains() {
    let mut d = data(12, 2);
    for s in d.iter_mut() {
        s.label = Behavior::LaneKeep;
    }
    let out = train(&d, &small("vlstm")).unwrap();
    assert_eq!(out.history.len(), 3);
}

#[test]
fn best_checkpoint_has_lowest_validation_nll() {
    let d = data(48, 4);
    let cfg = TrainConfig {
        epochs: 6,
        ..small("vlstm")
    };
    let out = train(&d, &cfg).unwrap();
    let val: Vec<LabeledSample> = out.val_indices.iter().map(|&i| d[i].clone()).collect();
    let best = evaluate_loss(&val, &out.checkpoint.model).unwrap();
    for r in &out.history {
        assert!(best <= r.val_nll.unwrap() + 1e-12);
    }
    assert_eq!(best, out.history[out.best_epoch - 1].val_nll.unwrap());
}

#[test]
fn validation_split_is_scene_disjoint() {
    let d = data(40, 5);
    let (train_idx, val_idx) = split_by_scene(&d, 0.25, 9);
    assert_eq!(train_idx.len() + val_idx.len(), d.len());
    let ts: BTreeSet<u32> = train_idx.iter().map(|&i| d[i].scene_id).collect();
    let vs: BTreeSet<u32> = val_idx.iter().map(|&i| d[i].scene_id).collect();
    assert!(ts.is_disjoint(&vs));
    assert_eq!(vs.len(), 1);
}

fn set(model: &mut Model, name: &str, value: Tensor) {
    let k = model.params().index_of(name).unwrap();
    *model.params_mut().get_mut(k) = value;
}

#[test]
fn uniform_and_perfect_models() {
    let d = data(10, 6);
    let mut m = Model::new(ModelKind::Vbin, 8, 0).unwrap();
    set(&mut m, "decoder.fc5.w", Tensor::zeros(&[48, 3]));
    set(&mut m, "decoder.fc5.b", Tensor::zeros(&[3]));
    assert!((evaluate_loss(&d, &m).unwrap() - 3f64.ln()).abs() < 1e-12);

    let mut same = d.clone();
    for s in same.iter_mut() {
        s.label = Behavior::ChangeLeft;
    }
    set(&mut m, "decoder.fc5.b", Tensor::vector(vec![0.0, 1000.0, 0.0]));
    assert_eq!(evaluate_loss(&same, &m).unwrap(), 0.0);
}

#[test]
fn evaluate_loss_matches_hand_recomputation() {
    let d = data(5, 7);
    let m = Model::new(ModelKind::Vbin, 8, 1).unwrap();
    let probs = m.predict(&d, 2).unwrap();
    let hand = d
        .iter()
        .zip(&probs)
        .map(|(s, p)| -p[s.label.index()].ln())
        .sum::<f64>()
        / 5.0;
    assert!((evaluate_loss(&d, &m).unwrap() - hand).abs() < 1e-12);
}

#[test]
fn evaluation_matches_training_step_loss() {
    let d = data(9, 8);
    let batch = SocialBatch::from_samples(&d);
    let m = Model::new(ModelKind::Vbin, 8, 2).unwrap();
    let eval = evaluate_loss(&d, &m).unwrap();
    let mut t = Trainer::new(m, 1e-3);
    let step = t.step(&batch).unwrap();
    assert!((eval - step).abs() < 1e-12);
}

#[test]
fn fixed_batch_loss_descends() {
    let d = data(16, 9);
    let batch = SocialBatch::from_samples(&d);
    let mut m = Model::new(ModelKind::Vbin, 16, 3).unwrap();
    m.set_scaling(FeatureScaling::fit(&d));
    let mut t = Trainer::new(m, 1e-4);
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let loss = t.step(&batch).unwrap();
        assert!(loss <= prev, "{} after {}", loss, prev);
        prev = loss;
    }
}

#[test]
fn non_finite_parameters_abort_the_step() {
    let d = data(4, 10);
    let mut m = Model::new(ModelKind::Vlstm, 8, 0).unwrap();
    set(&mut m, "head.fc_b.b", Tensor::vector(vec![f64::NAN, 0.0, 0.0]));
    let mut t = Trainer::new(m, 1e-3);
    assert!(matches!(t.step(&SocialBatch::from_samples(&d)), Err(Error::NonFinite(_))));
}

#[test]
fn history_and_config_validation() {
    let h = [
        EpochRecord { epoch: 1, train_nll: 1.5, val_nll: Some(1.25) },
        EpochRecord { epoch: 2, train_nll: 1.0, val_nll: None },
    ];
    let mut buf = Vec::new();
    write_history(&h, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_nll,val_nll\n1,1.5,1.25\n2,1,\n");

    for bad in [
        TrainConfig { model: "slstm".into(), ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
    assert!(train(&[], &TrainConfig::default()).is_err());
}

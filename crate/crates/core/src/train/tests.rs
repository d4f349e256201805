use super::*;
use crate::dataio::shapes::builtin_corpus;
use crate::dataio::{generate_pair, PairGenConfig};
use crate::dcpnet::{decode_checkpoint, encode_checkpoint};

fn dataset(count: usize, n: usize, seed: u64) -> Vec<LabeledPair> {
    let cfg = PairGenConfig {
        n_points: n,
        seed,
        ..PairGenConfig::default()
    };
    let mut rng = cfg.rng();
    builtin_corpus(count, n, seed)
        .unwrap()
        .iter()
        .map(|c| generate_pair(c, &cfg, &mut rng).unwrap())
        .collect()
}

fn small_model() -> DcpConfig {
    DcpConfig {
        widths: alloc::vec![8, 8],
        emb_dims: 16,
        k: 6,
        ..DcpConfig::v1()
    }
}

#[test]
fn zero_epochs_returns_initial_weights() {
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::desk(3)
    };
    let (p, log) = train::<f32>(&small_model(), &[], &[], &cfg, |_, _| {}).unwrap();
    assert!(log.is_empty());
    assert_eq!(p, ModelParams::init(&small_model(), 3).unwrap());
    assert!(matches!(
        train::<f32>(&small_model(), &[], &[], &TrainConfig::desk(3), |_, _| {}),
        Err(TrainError::EmptyDataset)
    ));
}

#[test]
fn same_seed_gives_identical_checkpoint() {
    let data = dataset(12, 32, 4);
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        eval_every: 0,
        ..TrainConfig::desk(8)
    };
    let (a, _) = train::<f32>(&small_model(), &data, &[], &cfg, |_, _| {}).unwrap();
    let (b, _) = train::<f32>(&small_model(), &data, &[], &cfg, |_, _| {}).unwrap();
    assert_eq!(encode_checkpoint(&a), encode_checkpoint(&b));
    let c: ModelParams<f32> = decode_checkpoint(&encode_checkpoint(&a)).unwrap();
    assert_eq!(c, a);
}

#[test]
fn zero_lr_without_decay_keeps_weights() {
    let data = dataset(8, 32, 5);
    let mut cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        eval_every: 0,
        ..TrainConfig::desk(1)
    };
    cfg.schedule.base = 0.0;
    cfg.adam.weight_decay = 0.0;
    let (p, _) = train::<f64>(&small_model(), &data, &[], &cfg, |_, _| {}).unwrap();
    let init = ModelParams::<f64>::init(&small_model(), 1).unwrap();
    for (a, b) in p.entries().iter().zip(init.entries()) {
        if a.trainable {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }
    // running statistics still track the data
    assert_ne!(p.get("emb.0.bn.mean"), init.get("emb.0.bn.mean"));
}

#[test]
fn loss_decreases_on_a_small_run() {
    let data = dataset(64, 48, 6);
    let model = DcpConfig {
        widths: alloc::vec![16, 16, 32],
        emb_dims: 32,
        k: 8,
        ..DcpConfig::v1()
    };
    let cfg = TrainConfig {
        epochs: 12,
        batch_size: 8,
        eval_every: 0,
        ..TrainConfig::desk(2)
    };
    let mut epochs = 0;
    let (_, log) = train::<f32>(&model, &data, &[], &cfg, |_, _| epochs += 1).unwrap();
    assert_eq!(epochs, 12);
    let first = log.first().unwrap().train_loss;
    let last = log.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn evaluation_produces_consistent_metrics() {
    let data = dataset(6, 32, 7);
    let p = ModelParams::<f32>::init(&small_model(), 0).unwrap();
    let m = evaluate(&p, &data, 4).unwrap();
    assert_eq!(m.count, 6);
    assert_eq!(m.rmse_r, m.mse_r.sqrt());
    assert!(m.mae_r >= 0.0 && m.mae_t >= 0.0);
}

use geoscatt::linalg::Matrix;
use geoscatt::metagraph::{
    sage_forward, sage_grad_check, train_sage, MetaGraph, NodeMask, SageConfig, SageInput,
    SageParams,
};
use geoscatt::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 40 nodes in two label blocks: heavy edges inside a block, light across.
fn block_graph(seed: u64) -> MetaGraph<f64> {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
    let features = Matrix::from_fn(n, 16, |i, j| {
        let signal = if j < 2 && usize::from(labels[i]) == j {
            0.5
        } else {
            0.0
        };
        signal + rng.gen_range(-1.0..1.0)
    });
    let weights = Matrix::from_fn(n, n, |i, j| {
        if i == j || labels[i] == labels[j] {
            1.0
        } else {
            0.05
        }
    });
    let masks = (0..n)
        .map(|i| match i % 10 {
            0..=5 => NodeMask::Train,
            6 | 7 => NodeMask::Val,
            _ => NodeMask::Test,
        })
        .collect();
    MetaGraph::from_parts(features, weights, 1.0, labels, masks).unwrap()
}

fn accuracy(mg: &MetaGraph<f64>, p: &SageParams<f64>, mask: NodeMask) -> f64 {
    let logits = sage_forward(mg, p, None, None).unwrap();
    let nodes = mg.nodes(mask);
    let hits = nodes
        .iter()
        .filter(|&&i| u8::from(logits[(i, 1)] > logits[(i, 0)]) == mg.labels[i])
        .count();
    hits as f64 / nodes.len() as f64
}

#[test]
fn block_graph_is_fit_within_300_epochs() {
    let mg = block_graph(1);
    let cfg = SageConfig {
        epochs: 300,
        patience: None,
        seed: 3,
        ..SageConfig::default()
    };
    let out = train_sage(&mg, &cfg).unwrap();
    assert_eq!(accuracy(&mg, &out.params, NodeMask::Train), 1.0);
    assert_eq!(out.log.len(), 300);
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let mg = block_graph(2);
    let cfg = SageConfig {
        epochs: 30,
        seed: 5,
        ..SageConfig::default()
    };
    let save = || {
        let mut buf = Vec::new();
        train_sage(&mg, &cfg)
            .unwrap()
            .params
            .save(&mut buf)
            .unwrap();
        buf
    };
    assert_eq!(save(), save());
}

#[test]
fn patience_zero_returns_the_last_improving_epoch() {
    let mg = block_graph(4);
    let cfg = SageConfig {
        epochs: 500,
        patience: Some(0),
        seed: 6,
        adam: geoscatt::nn::AdamConfig {
            lr: 0.05,
            ..SageConfig::default().adam
        },
        ..SageConfig::default()
    };
    let out = train_sage(&mg, &cfg).unwrap();
    let last = out.log.last().unwrap();
    assert!(out.log.len() < 500);
    assert_eq!(last.epoch, out.best_epoch + 1);
    assert!(last.val_loss >= out.best_val_loss);
}

#[test]
fn single_class_training_mask_is_rejected() {
    let mut mg = block_graph(5);
    for (i, m) in mg.masks.iter_mut().enumerate() {
        if mg.labels[i] == 1 && *m == NodeMask::Train {
            *m = NodeMask::Test;
        }
    }
    assert!(matches!(
        train_sage(&mg, &SageConfig::default()),
        Err(Error::DegenerateLabels)
    ));
}

#[test]
fn gradient_check_at_full_feature_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 12;
    let x = Matrix::from_fn(n, 595, |_, _| rng.gen_range(0.0..1.0));
    let labels = (0..n).map(|i| u8::from(i < 5)).collect();
    let mg = MetaGraph::build(x, labels, vec![NodeMask::Train; n]).unwrap();
    let input = SageInput::new(&mg, None).unwrap();
    let p = SageParams::init(595, 0.5, 9);
    let r = sage_grad_check(&input, &mg.labels, &mg.nodes(NodeMask::Train), &p, 1e-5).unwrap();
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

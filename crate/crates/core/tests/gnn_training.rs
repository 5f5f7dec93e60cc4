use geoscatt::gnn::{grad_check, train_gin, GinParams, TrainConfig};
use geoscatt::ingest::{parse_smiles, MolecularGraph};
use geoscatt::nn::AdamConfig;
use geoscatt::Error;

/// Carbon-only chains against chains carrying a nitro group.
fn toy_set() -> (Vec<MolecularGraph>, Vec<u8>) {
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for n in 1..=10 {
        graphs.push(parse_smiles(&"C".repeat(n)).unwrap());
        labels.push(0);
        graphs.push(parse_smiles(&format!("{}[N+](=O)[O-]", "C".repeat(n))).unwrap());
        labels.push(1);
    }
    (graphs, labels)
}

fn cfg(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        epochs,
        patience: None,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_toy_set_is_fit() {
    let (g, y) = toy_set();
    let out = train_gin::<f64>(&g, &y, &g, &y, &cfg(1e-2, 200)).unwrap();
    assert!(out.best_val_loss < 0.1, "{}", out.best_val_loss);
    assert!(out.log.iter().any(|e| e.train_loss < 0.1));
}

#[test]
fn same_seed_gives_identical_parameter_files() {
    let (g, y) = toy_set();
    let bytes = || {
        let out = train_gin::<f64>(&g, &y, &g[..6], &y[..6], &cfg(1e-2, 15)).unwrap();
        let mut buf = Vec::new();
        out.params.save(&mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(), bytes());
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (g, y) = toy_set();
    let out = train_gin::<f64>(&g, &y, &g, &y, &cfg(0.0, 5)).unwrap();
    let mut init = GinParams::<f64>::init(11);
    init.fit_input_scaling(&g);
    assert_eq!(out.params.weights, init.weights);
    assert_eq!(out.log.len(), 5);
    assert!(out
        .log
        .windows(2)
        .all(|w| w[0].train_loss == w[1].train_loss));
}

#[test]
fn patience_zero_stops_at_first_non_improvement() {
    let (g, y) = toy_set();
    // A large step overshoots quickly on the held-out pair.
    let mut c = cfg(0.5, 50);
    c.patience = Some(0);
    let out = train_gin::<f64>(&g, &y, &g[..2], &y[..2], &c).unwrap();
    let last = out.log.last().unwrap();
    assert_eq!(last.epoch, out.best_epoch + 1);
    assert!(last.val_loss >= out.best_val_loss);
    assert!(out.log[..out.best_epoch]
        .windows(2)
        .all(|w| w[1].val_loss < w[0].val_loss));
}

#[test]
fn degenerate_inputs_are_rejected() {
    let (g, y) = toy_set();
    let zeros = vec![0; g.len()];
    assert!(matches!(
        train_gin::<f64>(&g, &zeros, &g, &y, &cfg(1e-3, 1)),
        Err(Error::DegenerateLabels)
    ));
    assert!(matches!(
        train_gin::<f64>(&g, &y, &[], &[], &cfg(1e-3, 1)),
        Err(Error::DegenerateSplit(_))
    ));
}

#[test]
fn gradient_check_on_trained_parameters() {
    let (g, y) = toy_set();
    let out = train_gin::<f64>(&g, &y, &g, &y, &cfg(1e-2, 10)).unwrap();
    for i in [3, 8] {
        let r = grad_check(&out.params, &g[i], y[i], 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }
}

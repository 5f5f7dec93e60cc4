mod common;

use geoscatt::evalhead::metrics;
use geoscatt::gnn::gin_forward;
use geoscatt::graphcore::{build_matrices, eig_sym, from_adjacency};
use geoscatt::gst::{diffusion_filters, ggs_features, GgsConfig};
use geoscatt::ingest::elements::default_valences;
use geoscatt::ingest::MolecularGraph;
use geoscatt::ingest::{
    canonical_key, dedup_clear_evidence, parse_smiles, preprocess, write_smiles, DatasetRecord,
    PreprocessConfig,
};
use geoscatt::metagraph::kernel_weights;
use geoscatt::nn::{cross_entropy, softmax_row, Adam, AdamConfig, Params};
use geoscatt::scatter2d::rasterize;
use geoscatt::{GinParams, GraphMatrices, Matrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// True when the layout eigenvectors (2 and 3 of the combinatorial Laplacian)
/// are unique up to sign and the sign rule picks a unique pivot. Graphs with
/// fewer than three atoms use fixed positions.
fn layout_is_unique(g: &MolecularGraph) -> bool {
    let n = g.n_atoms();
    if n < 4 {
        return n < 3;
    }
    let mut lap = Matrix::<f64>::zeros(n, n);
    for b in &g.bonds {
        lap[(b.a, b.b)] -= 1.0;
        lap[(b.b, b.a)] -= 1.0;
        lap[(b.a, b.a)] += 1.0;
        lap[(b.b, b.b)] += 1.0;
    }
    let (vecs, vals) = eig_sym(&lap).unwrap();
    let gaps = (1..=2).all(|k| vals[k] - vals[k - 1] > 1e-6 && vals[k + 1] - vals[k] > 1e-6);
    let pivots = (1..=2).all(|k| {
        let mut a: Vec<f64> = vecs.col(k).iter().map(|x| x.abs()).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        a[0] - a[1] > 1e-6
    });
    gaps && pivots
}

fn power(t: &Matrix<f64>, k: usize) -> Matrix<f64> {
    (1..k).fold(t.clone(), |acc, _| acc.matmul(t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smiles_round_trip_keeps_the_key(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 25);
        let back = preprocess(&parse_smiles(&write_smiles(&g)).unwrap(), &PreprocessConfig::default()).unwrap();
        prop_assert_eq!(canonical_key(&g), canonical_key(&back));
    }

    #[test]
    fn canonical_key_ignores_atom_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 25);
        let perm = shuffled(&mut r, g.n_atoms());
        prop_assert_eq!(canonical_key(&g), canonical_key(&g.permute(&perm)));
    }

    #[test]
    fn preprocess_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 25);
        let again = preprocess(&g, &PreprocessConfig::default()).unwrap();
        prop_assert_eq!(canonical_key(&g), canonical_key(&again));
        prop_assert_eq!(g.n_atoms(), again.n_atoms());
    }

    #[test]
    fn dedup_is_idempotent(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        // A small pool so duplicates are common.
        let pool: Vec<String> = (0..5).map(|_| { let k = r.gen_range(1..6); common::random_smiles(&mut r, k) }).collect();
        let cfg = PreprocessConfig::default();
        let records: Vec<DatasetRecord> = (0..n)
            .map(|_| DatasetRecord::from_smiles(pool.choose(&mut r).unwrap(), r.gen_range(0..2), &cfg).unwrap())
            .collect();
        let once = dedup_clear_evidence(&records);
        let twice = dedup_clear_evidence(&once);
        let keys = |v: &[DatasetRecord]| v.iter().map(|x| (x.canonical_key.clone(), x.label)).collect::<Vec<_>>();
        prop_assert_eq!(keys(&once), keys(&twice));
    }

    #[test]
    fn parsed_valences_are_standard(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 25);
        for (i, a) in g.atoms.iter().enumerate() {
            let v = g.total_valence(i);
            prop_assert!(default_valences(a.element).iter().any(|&d| u32::from(d) == v), "atom {i} valence {v}");
        }
    }

    #[test]
    fn relabeling_conjugates_weights_and_keeps_spectrum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 2, 30);
        let perm = shuffled(&mut r, g.n_atoms());
        let a: GraphMatrices = build_matrices(&g).unwrap();
        let b: GraphMatrices = build_matrices(&g.permute(&perm)).unwrap();
        prop_assert_eq!(a.adjacency.permute_symmetric(&perm), b.adjacency);
        for (x, y) in a.eigvals.iter().zip(&b.eigvals) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn lazy_walk_is_stochastic_with_unit_spectrum(seed in any::<u64>(), n in 2usize..25, extra in 0usize..10) {
        let mut r = rng(seed);
        let mut w = Matrix::zeros(n, n);
        for (a, b) in common::random_connected_edges(&mut r, n, extra) {
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
        }
        let gm: GraphMatrices = from_adjacency(w).unwrap();
        for i in 0..n {
            let row = gm.lazy_walk.row(i);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // T is similar to I - L_norm / 2.
        for &l in &gm.eigvals {
            prop_assert!(l >= -1e-10, "L_norm eigenvalue {l}");
            let t = 1.0 - l / 2.0;
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&t), "walk eigenvalue {t}");
        }
    }

    #[test]
    fn diffusion_wavelets_telescope(seed in any::<u64>(), n in 2usize..21, scales in 1usize..6) {
        let mut r = rng(seed);
        let mut w = Matrix::zeros(n, n);
        for (a, b) in common::random_connected_edges(&mut r, n, 4) {
            w[(a, b)] = 1.0;
            w[(b, a)] = 1.0;
        }
        let t = from_adjacency::<f64>(w).unwrap().lazy_walk;
        let bank = diffusion_filters(&t, scales).unwrap();
        let sum = bank.filters[1..].iter().fold(Matrix::zeros(n, n), |acc, h| acc.add(h));
        let want = t.sub(&power(&t, 1 << (scales - 1)));
        prop_assert!(sum.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn kernel_weights_are_symmetric_and_scale_free(seed in any::<u64>(), n in 3usize..20, f in 2usize..12, log_c in -3.0f64..3.0) {
        let mut r = rng(seed);
        let s = Matrix::from_fn(n, f, |_, _| r.gen_range(-1.0..1.0));
        let (w, _) = kernel_weights(&s).unwrap();
        let (wc, _) = kernel_weights(&s.scale(10f64.powf(log_c))).unwrap();
        prop_assert!(w.max_asymmetry() <= 1e-12);
        prop_assert!(w.max_abs_diff(&wc) <= 1e-9);
        let max = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)])
            .fold(f64::MIN, f64::max);
        prop_assert_eq!(max, 1.0);
    }

    #[test]
    fn mcc_flips_sign_with_one_sided_flip(seed in any::<u64>(), n in 2usize..50) {
        let mut r = rng(seed);
        let y: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
        let base = metrics(&y, &s, 0.5).unwrap();
        let y_flip: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let s_flip: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        // Scores exactly at 0.5 would not flip cleanly.
        prop_assume!(s.iter().all(|&v| v != 0.5));
        let both = metrics(&y_flip, &s_flip, 0.5).unwrap();
        prop_assert!((both.mcc - base.mcc).abs() < 1e-12);
        let one = metrics(&y_flip, &s, 0.5).unwrap();
        prop_assert!((one.mcc + base.mcc).abs() < 1e-12);
        let f1 = if base.tp == 0 { 0.0 } else { 2.0 * base.tp as f64 / (2 * base.tp + base.fp + base.fn_) as f64 };
        prop_assert!((base.f1 - f1).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms(seed in any::<u64>(), n in 2usize..50) {
        let mut r = rng(seed);
        let y: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        let s: Vec<f64> = (0..n).map(|_| f64::from(r.gen_range(0..8u8)) / 8.0).collect();
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        let a = metrics(&y, &s, 0.5).unwrap().auc;
        let b = metrics(&y, &t, 0.5).unwrap().auc;
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ggs_is_permutation_invariant_and_nonnegative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 2, 20);
        let cfg = GgsConfig::default();
        let a = ggs_features::<f64>(&g, &cfg).unwrap();
        let b = ggs_features::<f64>(&g.permute(&shuffled(&mut r, g.n_atoms())), &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
        for (v, l) in a.values.iter().zip(&a.labels) {
            if l.order() >= 1 {
                prop_assert!(*v >= -1e-12);
            }
        }
    }

    #[test]
    fn rendering_ignores_atom_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 20);
        prop_assume!(layout_is_unique(&g));
        let a = rasterize::<f64>(&g, 64).unwrap();
        let b = rasterize::<f64>(&g.permute(&shuffled(&mut r, g.n_atoms())), 64).unwrap();
        let differing = a.pixels.iter().zip(&b.pixels).filter(|(x, y)| x != y).count();
        prop_assert_eq!(differing, 0);
    }

    #[test]
    fn gin_outputs_are_invariant_and_normalized(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = common::random_molecule(&mut r, 1, 20);
        let p: GinParams = GinParams::init(seed);
        let a = gin_forward(&g, &p).unwrap();
        let b = gin_forward(&g.permute(&shuffled(&mut r, g.n_atoms())), &p).unwrap();
        for (x, y) in a.embedding.iter().zip(&b.embedding) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let probs = a.probabilities();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for label in 0..2 {
            prop_assert!(cross_entropy(&a.logits, label).0 >= 0.0);
        }
    }

    #[test]
    fn weight_decay_alone_shrinks_the_norm(seed in any::<u64>(), decay in 1e-3f64..1e-1) {
        let mut r = rng(seed);
        let mut p = Params::new();
        p.push("w", Matrix::from_fn(6, 5, |_, _| r.gen_range(-1.0..1.0)));
        p.push("b", Matrix::from_fn(1, 5, |_, _| r.gen_range(-1.0..1.0)));
        let zero = p.zeros_like();
        let mut adam = Adam::new(AdamConfig { lr: 1e-3, weight_decay: decay, ..AdamConfig::default() }, &p);
        let mut last = p.norm();
        for _ in 0..30 {
            adam.step(&mut p, &zero);
            let now = p.norm();
            prop_assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn softmax_sums_to_one(z in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
        prop_assert!((softmax_row(&z).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

//! Random molecules and a synthetic labelled set for integration tests.
#![allow(dead_code)]

use geoscatt::ingest::{
    write_smiles, Atom, Bond, BondOrder, DatasetRecord, MolecularGraph, PreprocessConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random connected heavy-atom skeleton. Every atom keeps one free valence,
/// so a substituent can be attached anywhere. A few ring closures are added.
pub fn random_skeleton(rng: &mut ChaCha8Rng, n: usize) -> MolecularGraph {
    assert!(n >= 1);
    let mut degree = vec![0usize; n];
    let mut bonds = Vec::new();
    for v in 1..n {
        let open: Vec<usize> = (0..v).filter(|&u| degree[u] < 3).collect();
        let u = *open.choose(rng).expect("tree always has an open atom");
        bonds.push(Bond {
            a: u,
            b: v,
            order: BondOrder::Single,
        });
        degree[u] += 1;
        degree[v] += 1;
    }
    for _ in 0..rng.gen_range(0..=2) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let exists = bonds
            .iter()
            .any(|x| (x.a, x.b) == (a, b) || (x.a, x.b) == (b, a));
        if a != b && !exists && degree[a] < 3 && degree[b] < 3 {
            bonds.push(Bond {
                a,
                b,
                order: BondOrder::Single,
            });
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    let atoms = degree
        .iter()
        .map(|&d| {
            let element = match (d, rng.gen_range(0..10)) {
                (1, 0) => 8,
                (1 | 2, 1) => 7,
                (1, 2) => 16,
                _ => 6,
            };
            let valence = match element {
                6 => 4,
                7 => 3,
                _ => 2,
            };
            let mut atom = Atom::new(element);
            atom.implicit_h = (valence - d) as u8;
            atom
        })
        .collect();
    MolecularGraph::from_parts(atoms, bonds)
}

pub fn random_smiles(rng: &mut ChaCha8Rng, n: usize) -> String {
    write_smiles(&random_skeleton(rng, n))
}

/// Parses and preprocesses a random molecule with `lo..=hi` heavy atoms.
pub fn random_molecule(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> MolecularGraph {
    let n = rng.gen_range(lo..=hi);
    let smiles = random_smiles(rng, n);
    DatasetRecord::from_smiles(&smiles, 0, &PreprocessConfig::default())
        .unwrap_or_else(|e| panic!("{smiles}: {e}"))
        .graph
}

/// Random connected simple graph on `n` nodes as a 0/1 adjacency list.
pub fn random_connected_edges(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (a, b) = (a.min(b), a.max(b));
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    edges
}

const ALERTS: [&str; 4] = [
    "O=[N+]([O-])c1ccccc1",
    "Nc1ccc2ccccc2c1",
    "O=[N+]([O-])",
    "C1OC1",
];
const DECOYS: [&str; 4] = ["Oc1ccccc1", "CC(=O)", "OC(=O)", "c1ccncc1"];

/// Synthetic mutagenicity-like set: positives carry a structural alert,
/// negatives a decoy fragment, both attached to a random skeleton. `noise` is
/// the fraction of flipped labels. Half the rows are positive.
pub fn synthetic_mutagen_set(n: usize, noise: f64, seed: u64) -> Vec<(String, u8)> {
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let positive = i % 2 == 1;
            let frag = if positive {
                ALERTS.choose(&mut rng).unwrap()
            } else {
                DECOYS.choose(&mut rng).unwrap()
            };
            let size = rng.gen_range(2..=12);
            let smiles = format!("{frag}{}", random_smiles(&mut rng, size));
            let mut label = u8::from(positive);
            if rng.gen_bool(noise) {
                label = 1 - label;
            }
            (smiles, label)
        })
        .collect()
}

//! Permutation-invariant molecule keys by iterative label refinement.

use sha2::{Digest, Sha256};

use super::molecule::MolecularGraph;

/// Initial atom invariant: element, charge, aromatic flag, heavy degree, hydrogens.
type Invariant = (u8, i8, bool, usize, u32);

/// Canonical key of a molecular graph.
///
/// Atom classes start from `(element, charge, aromatic, degree, hydrogens)` and
/// are refined with the sorted multiset of `(bond order, neighbor class)` until
/// the number of classes stops growing. Class ids are ranks of sorted
/// signatures, so they depend only on the graph and never on atom order. The
/// key is a SHA-256 digest over the class table and the sorted edge list.
pub fn canonical_key(g: &MolecularGraph) -> String {
    let n = g.n_atoms();
    let adj = g.adjacency();
    let invariants: Vec<Invariant> = (0..n)
        .map(|i| {
            let a = &g.atoms[i];
            (
                a.element,
                a.formal_charge,
                a.aromatic,
                adj[i].len(),
                a.total_h(),
            )
        })
        .collect();

    let mut classes = rank(&invariants);
    let mut n_classes = count_distinct(&classes);
    loop {
        let signatures: Vec<(usize, Vec<(u8, usize)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(u8, usize)> = adj[i]
                    .iter()
                    .map(|&(u, k)| (g.bonds[k].order.code(), classes[u]))
                    .collect();
                nb.sort_unstable();
                (classes[i], nb)
            })
            .collect();
        let refined = rank(&signatures);
        let refined_count = count_distinct(&refined);
        classes = refined;
        if refined_count == n_classes {
            break;
        }
        n_classes = refined_count;
    }

    // Class table: (class, invariant) pairs, sorted; then edges by class pair.
    let mut table: Vec<(usize, Invariant)> = (0..n).map(|i| (classes[i], invariants[i])).collect();
    table.sort_unstable();
    let mut edges: Vec<(usize, usize, u8)> = g
        .bonds
        .iter()
        .map(|b| {
            let (x, y) = (classes[b.a], classes[b.b]);
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    edges.sort_unstable();

    let mut text = String::with_capacity(16 * (n + edges.len()));
    for (c, (z, q, ar, d, h)) in &table {
        text.push_str(&format!("{c}:{z},{q},{},{d},{h};", u8::from(*ar)));
    }
    text.push('|');
    for (x, y, o) in &edges {
        text.push_str(&format!("{x}-{y}-{o};"));
    }
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Dense ranks of `items` by sorted order.
fn rank<K: Ord + Clone>(items: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = items.to_vec();
    sorted.sort();
    sorted.dedup();
    items
        .iter()
        .map(|k| sorted.binary_search(k).expect("present"))
        .collect()
}

fn count_distinct(classes: &[usize]) -> usize {
    let mut c = classes.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::ingest::parse_smiles;

    fn key(s: &str) -> String {
        canonical_key(&parse_smiles(s).unwrap())
    }

    #[test]
    fn relabeling_invariance() {
        assert_eq!(key("CCO"), key("OCC"));
        assert_eq!(key("c1ccccc1O"), key("Oc1ccccc1"));
    }

    #[test]
    fn different_molecules_differ() {
        assert_ne!(key("CCO"), key("CCN"));
        assert_ne!(key("CCO"), key("COC"));
        assert_ne!(key("c1ccccc1"), key("C1CCCCC1"));
        assert_ne!(key("Cc1ccccc1C"), key("Cc1cccc(C)c1"));
    }

    #[test]
    fn benzene_permutations_share_one_key() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut keys = std::collections::BTreeSet::new();
        let mut perm: Vec<usize> = (0..6).collect();
        for _ in 0..100 {
            perm.shuffle(&mut rng);
            keys.insert(canonical_key(&g.permute(&perm)));
        }
        assert_eq!(keys.len(), 1);
        assert!(keys.contains(&canonical_key(&g)));
    }

    #[test]
    fn key_is_hex_digest() {
        let k = key("C");
        assert_eq!(k.len(), 64);
        assert!(k.bytes().all(|b| b.is_ascii_hexdigit()));
    }
}

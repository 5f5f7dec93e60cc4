//! Molecular graph types and per-atom feature computation.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::elements;

/// Number of per-atom input features.
pub const NODE_FEATURES: usize = 7;

/// Column names of [`MolecularGraph::node_features`], in order.
pub const NODE_FEATURE_NAMES: [&str; NODE_FEATURES] = [
    "atomic_number",
    "formal_charge",
    "hybridization",
    "total_hydrogens",
    "aromatic",
    "atomic_mass",
    "total_valence",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum, aromatic counted as one.
    pub fn valence_units(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: u8,
    pub formal_charge: i8,
    pub aromatic: bool,
    /// Hydrogens given explicitly: bracket H count plus folded `[H]` atoms.
    pub explicit_h: u8,
    /// Hydrogens implied by the valence model for organic-subset atoms.
    pub implicit_h: u8,
    pub ring_membership: bool,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Self {
            element,
            formal_charge: 0,
            aromatic: false,
            explicit_h: 0,
            implicit_h: 0,
            ring_membership: false,
        }
    }

    pub fn total_h(&self) -> u32 {
        u32::from(self.explicit_h) + u32::from(self.implicit_h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MolecularGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// One row per atom, columns as in [`NODE_FEATURE_NAMES`].
    pub node_features: Vec<[f64; NODE_FEATURES]>,
    pub label: Option<u8>,
}

impl MolecularGraph {
    /// Builds a graph and derives ring flags and node features from the structure.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let mut g = Self {
            atoms,
            bonds,
            node_features: Vec::new(),
            label: None,
        };
        g.refresh();
        g
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// Recomputes ring membership and node features after a structural edit.
    pub fn refresh(&mut self) {
        let in_ring = ring_atoms(self.atoms.len(), &self.bonds);
        for (atom, r) in self.atoms.iter_mut().zip(in_ring) {
            atom.ring_membership = r;
        }
        self.node_features = (0..self.atoms.len())
            .map(|i| self.compute_features(i))
            .collect();
    }

    /// Neighbor lists `(neighbor, bond index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, b) in self.bonds.iter().enumerate() {
            adj[b.a].push((b.b, k));
            adj[b.b].push((b.a, k));
        }
        adj
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.a == atom || b.b == atom)
            .count()
    }

    fn incident(&self, atom: usize) -> impl Iterator<Item = &Bond> {
        self.bonds
            .iter()
            .filter(move |b| b.a == atom || b.b == atom)
    }

    /// Integer valence: bond orders (aromatic as one) plus hydrogens, plus one
    /// for an aromatic atom that donates a double bond to its ring.
    pub fn total_valence(&self, atom: usize) -> u32 {
        let a = &self.atoms[atom];
        let base: u32 = self
            .incident(atom)
            .map(|b| b.order.valence_units())
            .sum::<u32>()
            + a.total_h();
        if a.aromatic {
            let fits = elements::base_valence(a.element, a.formal_charge)
                .is_some_and(|v| (base + 1) as i32 <= v);
            if fits {
                return base + 1;
            }
        }
        base
    }

    /// Hybridization code: 1 = sp, 2 = sp2, 3 = sp3.
    pub fn hybridization(&self, atom: usize) -> u8 {
        let mut doubles = 0;
        let mut triple = false;
        let mut aromatic = self.atoms[atom].aromatic;
        for b in self.incident(atom) {
            match b.order {
                BondOrder::Double => doubles += 1,
                BondOrder::Triple => triple = true,
                BondOrder::Aromatic => aromatic = true,
                BondOrder::Single => {}
            }
        }
        if triple || doubles >= 2 {
            1
        } else if doubles == 1 || aromatic {
            2
        } else {
            3
        }
    }

    fn compute_features(&self, i: usize) -> [f64; NODE_FEATURES] {
        let a = &self.atoms[i];
        [
            f64::from(a.element),
            f64::from(a.formal_charge),
            f64::from(self.hybridization(i)),
            f64::from(a.total_h()),
            if a.aromatic { 1.0 } else { 0.0 },
            elements::atomic_mass(a.element),
            f64::from(self.total_valence(i)),
        ]
    }

    /// Node features as an `N x 7` matrix.
    pub fn feature_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.atoms.len(), NODE_FEATURES, |i, j| {
            T::of(self.node_features[i][j])
        })
    }

    /// Connected components as sorted atom index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut k = 0;
            while k < comp.len() {
                for &(u, _) in &adj[comp[k]] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                    }
                }
                k += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on `keep` (order preserved), features refreshed.
    pub fn subgraph(&self, keep: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| index[b.a] != usize::MAX && index[b.b] != usize::MAX)
            .map(|b| Bond {
                a: index[b.a],
                b: index[b.b],
                order: b.order,
            })
            .collect();
        let mut g = Self::from_parts(atoms, bonds);
        g.label = self.label;
        g
    }

    /// Relabels atoms so that old atom `i` becomes `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![Atom::new(0); self.atoms.len()];
        let mut features = vec![[0.0; NODE_FEATURES]; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old].clone();
            features[new] = self.node_features[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
            })
            .collect();
        Self {
            atoms,
            bonds,
            node_features: features,
            label: self.label,
        }
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Atoms incident to at least one non-bridge bond.
fn ring_atoms(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (k, b) in bonds.iter().enumerate() {
        adj[b.a].push((b.b, k));
        adj[b.b].push((b.a, k));
    }
    // Iterative Tarjan bridge search.
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; bonds.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, parent_edge, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let (u, k) = adj[v][*next];
                *next += 1;
                if k == parent_edge {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, k, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    let mut in_ring = vec![false; n];
    for (k, b) in bonds.iter().enumerate() {
        if !is_bridge[k] {
            in_ring[b.a] = true;
            in_ring[b.b] = true;
        }
    }
    in_ring
}

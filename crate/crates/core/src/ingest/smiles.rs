//! SMILES reader and writer for the organic subset plus bracket atoms.
//!
//! Supported: organic-subset atoms (`B C N O P S F Cl Br I` and aromatic
//! `b c n o p s`), bracket atoms with isotope, H count, charge and atom class,
//! branches, ring closures (`0-9` and `%nn`), bond symbols `- = # :` and the
//! disconnection `.`. Stereo markers (`/ \ @`) are accepted and dropped.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::elements;
use super::molecule::{Atom, Bond, BondOrder, MolecularGraph};

#[derive(Clone, Copy, Debug)]
enum BondSpec {
    Order(BondOrder),
    /// `/` or `\`: a single bond carrying stereo information we ignore.
    Directional,
}

struct RingOpen {
    atom: usize,
    bond: Option<BondSpec>,
    position: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    /// Whether the atom came from a bracket (its H count is then explicit).
    bracket: Vec<bool>,
    bonds: Vec<Bond>,
    rings: HashMap<u32, RingOpen>,
}

/// Parses a SMILES string into a molecular graph with implicit hydrogens and
/// node features filled in.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !text.is_ascii() {
        let position = text
            .char_indices()
            .find(|(_, c)| !c.is_ascii())
            .map_or(0, |(i, _)| i);
        return Err(Error::Syntax {
            position,
            reason: "non-ASCII character".into(),
        });
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bracket: Vec::new(),
        bonds: Vec::new(),
        rings: HashMap::new(),
    };
    p.run()?;
    let Parser {
        mut atoms,
        bracket,
        bonds,
        ..
    } = p;
    assign_implicit_h(&mut atoms, &bracket, &bonds);
    Ok(MolecularGraph::from_parts(atoms, bonds))
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn syntax(&self, reason: &str) -> Error {
        Error::Syntax {
            position: self.pos,
            reason: reason.into(),
        }
    }

    fn run(&mut self) -> Result<()> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<BondSpec> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(p) = prev else {
                        return Err(Error::UnbalancedParenthesis { position: self.pos });
                    };
                    if pending.is_some() {
                        return Err(self.syntax("bond symbol before branch"));
                    }
                    branches.push((p, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    let Some((p, _)) = branches.pop() else {
                        return Err(Error::UnbalancedParenthesis { position: self.pos });
                    };
                    if pending.is_some() {
                        return Err(self.syntax("dangling bond symbol"));
                    }
                    prev = Some(p);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() {
                        return Err(self.syntax("bond symbol before '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if pending.is_some() {
                        return Err(self.syntax("consecutive bond symbols"));
                    }
                    pending = Some(match c {
                        b'-' => BondSpec::Order(BondOrder::Single),
                        b'=' => BondSpec::Order(BondOrder::Double),
                        b'#' => BondSpec::Order(BondOrder::Triple),
                        b':' => BondSpec::Order(BondOrder::Aromatic),
                        _ => BondSpec::Directional,
                    });
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(self.syntax("ring closure before any atom"));
                    };
                    let start = self.pos;
                    let label = self.ring_label()?;
                    self.ring_closure(atom, label, pending.take(), start)?;
                }
                b'$' => return Err(self.syntax("quadruple bonds are not supported")),
                _ => {
                    let atom = self.atom()?;
                    if let Some(p) = prev {
                        self.add_bond(p, atom, pending.take())?;
                    } else if pending.is_some() {
                        return Err(self.syntax("bond symbol without a preceding atom"));
                    }
                    prev = Some(atom);
                }
            }
        }
        if let Some(&(_, position)) = branches.last() {
            return Err(Error::UnbalancedParenthesis { position });
        }
        if pending.is_some() {
            return Err(self.syntax("dangling bond symbol at end of input"));
        }
        if let Some((&label, open)) = self.rings.iter().min_by_key(|(_, o)| o.position) {
            return Err(Error::UnmatchedRingBond {
                label,
                position: open.position,
            });
        }
        if self.atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(())
    }

    fn ring_label(&mut self) -> Result<u32> {
        let c = self.peek().unwrap_or(b'0');
        if c == b'%' {
            let digits = self.text.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(u32::from(d[0] - b'0') * 10 + u32::from(d[1] - b'0'))
                }
                _ => Err(self.syntax("'%' must be followed by two digits")),
            }
        } else {
            self.pos += 1;
            Ok(u32::from(c - b'0'))
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        label: u32,
        bond: Option<BondSpec>,
        position: usize,
    ) -> Result<()> {
        match self.rings.remove(&label) {
            None => {
                self.rings.insert(
                    label,
                    RingOpen {
                        atom,
                        bond,
                        position,
                    },
                );
                Ok(())
            }
            Some(open) => {
                if open.atom == atom {
                    return Err(Error::Syntax {
                        position,
                        reason: "ring closure to the same atom".into(),
                    });
                }
                let spec = match (open.bond, bond) {
                    (Some(BondSpec::Order(a)), Some(BondSpec::Order(b))) if a != b => {
                        return Err(Error::Syntax {
                            position,
                            reason: "conflicting ring-closure bond symbols".into(),
                        })
                    }
                    (Some(BondSpec::Order(a)), _) => Some(BondSpec::Order(a)),
                    (_, Some(b)) => Some(b),
                    (a, None) => a,
                };
                self.add_bond(open.atom, atom, spec)
                    .map_err(|_| Error::Syntax {
                        position,
                        reason: "ring closure duplicates an existing bond".into(),
                    })
            }
        }
    }

    fn add_bond(&mut self, a: usize, b: usize, spec: Option<BondSpec>) -> Result<()> {
        let order = match spec {
            Some(BondSpec::Order(o)) => o,
            Some(BondSpec::Directional) => BondOrder::Single,
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        let duplicate = self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a));
        if duplicate || a == b {
            return Err(self.syntax("duplicate bond"));
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn atom(&mut self) -> Result<usize> {
        let start = self.pos;
        let c = self.text[self.pos];
        let atom = if c == b'[' {
            self.bracket_atom()?
        } else {
            let (symbol, aromatic, len) = match (c, self.text.get(self.pos + 1).copied()) {
                (b'C', Some(b'l')) => ("Cl", false, 2),
                (b'B', Some(b'r')) => ("Br", false, 2),
                (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => (
                    std::str::from_utf8(&self.text[self.pos..self.pos + 1]).unwrap(),
                    false,
                    1,
                ),
                (b'b', _) => ("B", true, 1),
                (b'c', _) => ("C", true, 1),
                (b'n', _) => ("N", true, 1),
                (b'o', _) => ("O", true, 1),
                (b'p', _) => ("P", true, 1),
                (b's', _) => ("S", true, 1),
                _ => {
                    let end = self.symbol_end(self.pos);
                    return Err(Error::UnknownElement {
                        symbol: String::from_utf8_lossy(&self.text[self.pos..end]).into_owned(),
                        position: start,
                    });
                }
            };
            self.pos += len;
            let mut a = Atom::new(elements::atomic_number(symbol).expect("organic subset"));
            a.aromatic = aromatic;
            self.bracket.push(false);
            a
        };
        self.atoms.push(atom);
        Ok(self.atoms.len() - 1)
    }

    fn symbol_end(&self, from: usize) -> usize {
        let mut end = from + 1;
        while end < self.text.len() && self.text[end].is_ascii_lowercase() && end < from + 2 {
            end += 1;
        }
        end.min(self.text.len())
    }

    fn bracket_atom(&mut self) -> Result<Atom> {
        let open = self.pos;
        self.pos += 1;
        let close = self.text[self.pos..]
            .iter()
            .position(|&c| c == b']')
            .map(|i| self.pos + i)
            .ok_or(Error::Syntax {
                position: open,
                reason: "unterminated bracket atom".into(),
            })?;

        while self.pos < close && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }

        let sym_start = self.pos;
        let rest = &self.text[self.pos..close];
        let (element, aromatic, len) = bracket_symbol(rest).ok_or_else(|| {
            let end = if rest.is_empty() {
                sym_start
            } else {
                self.symbol_end(sym_start).min(close)
            };
            Error::UnknownElement {
                symbol: String::from_utf8_lossy(&self.text[sym_start..end]).into_owned(),
                position: sym_start,
            }
        })?;
        self.pos += len;

        // Chirality: '@', '@@', '@TH1', '@SP2', '@OH15', ...
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else if self.pos + 1 < close
                && self.text[self.pos].is_ascii_uppercase()
                && self.text[self.pos + 1].is_ascii_uppercase()
            {
                self.pos += 2;
                while self.pos < close && self.text[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }

        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;

        if self.peek() == Some(b'H') && self.pos < close {
            self.pos += 1;
            let mut count = 1u32;
            let digits_start = self.pos;
            while self.pos < close && self.text[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos > digits_start {
                count = parse_digits(&self.text[digits_start..self.pos]);
            }
            atom.explicit_h = count.min(u32::from(u8::MAX)) as u8;
        }

        if self.pos < close && matches!(self.text[self.pos], b'+' | b'-') {
            let sign_char = self.text[self.pos];
            let sign: i32 = if sign_char == b'+' { 1 } else { -1 };
            self.pos += 1;
            let mut magnitude = 1i32;
            if self.pos < close && self.text[self.pos] == sign_char {
                while self.pos < close && self.text[self.pos] == sign_char {
                    magnitude += 1;
                    self.pos += 1;
                }
            } else {
                let digits_start = self.pos;
                while self.pos < close && self.text[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos > digits_start {
                    magnitude = parse_digits(&self.text[digits_start..self.pos]) as i32;
                }
            }
            let charge = sign * magnitude;
            if !(-4..=4).contains(&charge) {
                return Err(Error::Syntax {
                    position: self.pos,
                    reason: format!("formal charge {charge} outside [-4, 4]"),
                });
            }
            atom.formal_charge = charge as i8;
        }

        if self.pos < close && self.text[self.pos] == b':' {
            self.pos += 1;
            while self.pos < close && self.text[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }

        if self.pos != close {
            return Err(self.syntax("unexpected character in bracket atom"));
        }
        self.pos = close + 1;
        self.bracket.push(true);
        Ok(atom)
    }
}

fn parse_digits(d: &[u8]) -> u32 {
    d.iter().fold(0u32, |acc, &c| {
        acc.saturating_mul(10).saturating_add(u32::from(c - b'0'))
    })
}

/// Element symbol at the start of bracket contents: `(atomic number, aromatic, length)`.
fn bracket_symbol(rest: &[u8]) -> Option<(u8, bool, usize)> {
    let first = *rest.first()?;
    if first.is_ascii_lowercase() {
        for (sym, z) in [("se", 34u8), ("as", 33), ("te", 52)] {
            if rest.starts_with(sym.as_bytes()) {
                return Some((z, true, 2));
            }
        }
        let z = match first {
            b'b' => 5,
            b'c' => 6,
            b'n' => 7,
            b'o' => 8,
            b'p' => 15,
            b's' => 16,
            _ => return None,
        };
        return Some((z, true, 1));
    }
    if !first.is_ascii_uppercase() {
        return None;
    }
    if let Some(&second) = rest.get(1) {
        if second.is_ascii_lowercase() {
            let two = std::str::from_utf8(&rest[..2]).ok()?;
            if let Some(z) = elements::atomic_number(two) {
                return Some((z, false, 2));
            }
        }
    }
    let one = std::str::from_utf8(&rest[..1]).ok()?;
    elements::atomic_number(one).map(|z| (z, false, 1))
}

/// Implicit hydrogens for organic-subset atoms from the default valence table.
fn assign_implicit_h(atoms: &mut [Atom], bracket: &[bool], bonds: &[Bond]) {
    let mut sums = vec![0u32; atoms.len()];
    for b in bonds {
        sums[b.a] += b.order.valence_units();
        sums[b.b] += b.order.valence_units();
    }
    for (i, atom) in atoms.iter_mut().enumerate() {
        if bracket[i] {
            continue;
        }
        atom.implicit_h = implicit_h_for(atom.element, atom.aromatic, sums[i]);
    }
}

/// Hydrogens an unbracketed atom receives given its bond-order sum.
pub(crate) fn implicit_h_for(element: u8, aromatic: bool, bond_sum: u32) -> u8 {
    let valences = elements::default_valences(element);
    if aromatic {
        let v0 = u32::from(valences.first().copied().unwrap_or(0));
        return v0.saturating_sub(bond_sum + 1) as u8;
    }
    valences
        .iter()
        .map(|&v| u32::from(v))
        .find(|&v| v >= bond_sum)
        .map_or(0, |v| (v - bond_sum) as u8)
}

/// Writes a SMILES string that parses back to an isomorphic graph with the
/// same per-atom hydrogen counts, charges and aromatic flags.
pub fn write_smiles(g: &MolecularGraph) -> String {
    let adj = g.adjacency();
    let n = g.n_atoms();
    let mut visited = vec![false; n];
    let mut out = String::new();
    let mut writer = Writer {
        g,
        adj: &adj,
        ring_numbers: HashMap::new(),
        free_numbers: Vec::new(),
        next_number: 1,
    };
    for start in 0..n {
        if visited[start] {
            continue;
        }
        if !out.is_empty() {
            out.push('.');
        }
        // First pass: spanning tree in DFS order, remaining edges are ring closures.
        let mut parent_bond = vec![usize::MAX; n];
        let mut tree_children: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut seen_tree = visited.clone();
        seen_tree[start] = true;
        dfs_tree(
            start,
            &adj,
            &mut seen_tree,
            &mut parent_bond,
            &mut tree_children,
        );
        let is_tree_bond: Vec<bool> = {
            let mut t = vec![false; g.n_bonds()];
            for &k in parent_bond.iter().filter(|&&k| k != usize::MAX) {
                t[k] = true;
            }
            t
        };
        writer.emit(start, &tree_children, &is_tree_bond, &mut visited, &mut out);
    }
    out
}

fn dfs_tree(
    v: usize,
    adj: &[Vec<(usize, usize)>],
    seen: &mut [bool],
    parent_bond: &mut [usize],
    children: &mut [Vec<usize>],
) {
    for &(u, k) in &adj[v] {
        if !seen[u] {
            seen[u] = true;
            parent_bond[u] = k;
            children[v].push(u);
            dfs_tree(u, adj, seen, parent_bond, children);
        }
    }
}

struct Writer<'a> {
    g: &'a MolecularGraph,
    adj: &'a [Vec<(usize, usize)>],
    /// Open ring closures keyed by bond index.
    ring_numbers: HashMap<usize, u32>,
    free_numbers: Vec<u32>,
    next_number: u32,
}

impl Writer<'_> {
    fn emit(
        &mut self,
        v: usize,
        children: &[Vec<usize>],
        is_tree_bond: &[bool],
        visited: &mut [bool],
        out: &mut String,
    ) {
        visited[v] = true;
        out.push_str(&self.atom_text(v));
        for &(u, k) in &self.adj[v] {
            if is_tree_bond[k] {
                continue;
            }
            if let Some(num) = self.ring_numbers.remove(&k) {
                out.push_str(&ring_text(num));
                self.free_numbers.push(num);
                self.free_numbers.sort_unstable_by(|a, b| b.cmp(a));
            } else if !visited[u] {
                let num = self.free_numbers.pop().unwrap_or_else(|| {
                    let n = self.next_number;
                    self.next_number += 1;
                    n
                });
                out.push_str(self.bond_text(k));
                out.push_str(&ring_text(num));
                self.ring_numbers.insert(k, num);
            }
        }
        let kids = &children[v];
        for (i, &c) in kids.iter().enumerate() {
            let k = self.adj[v]
                .iter()
                .find(|&&(u, k)| u == c && is_tree_bond[k])
                .map(|&(_, k)| k)
                .expect("tree bond");
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(self.bond_text(k));
            self.emit(c, children, is_tree_bond, visited, out);
            if !last {
                out.push(')');
            }
        }
    }

    fn bond_text(&self, k: usize) -> &'static str {
        let b = &self.g.bonds[k];
        let both_aromatic = self.g.atoms[b.a].aromatic && self.g.atoms[b.b].aromatic;
        match (b.order, both_aromatic) {
            (BondOrder::Single, true) => "-",
            (BondOrder::Single, false) => "",
            (BondOrder::Double, _) => "=",
            (BondOrder::Triple, _) => "#",
            (BondOrder::Aromatic, true) => "",
            (BondOrder::Aromatic, false) => ":",
        }
    }

    fn atom_text(&self, v: usize) -> String {
        let a = &self.g.atoms[v];
        let bond_sum: u32 = self.adj[v]
            .iter()
            .map(|&(_, k)| self.g.bonds[k].order.valence_units())
            .sum();
        let symbol = elements::symbol(a.element);
        let organic = elements::is_organic_subset(a.element);
        let h = a.total_h();
        if organic
            && a.formal_charge == 0
            && u32::from(implicit_h_for(a.element, a.aromatic, bond_sum)) == h
        {
            return if a.aromatic {
                symbol.to_ascii_lowercase()
            } else {
                symbol.to_string()
            };
        }
        let mut s = String::from("[");
        if a.aromatic {
            s.push_str(&symbol.to_ascii_lowercase());
        } else {
            s.push_str(symbol);
        }
        match h {
            0 => {}
            1 => s.push('H'),
            n => s.push_str(&format!("H{n}")),
        }
        match a.formal_charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            q if q > 0 => s.push_str(&format!("+{q}")),
            q => s.push_str(&format!("-{}", -q)),
        }
        s.push(']');
        s
    }
}

fn ring_text(num: u32) -> String {
    if num < 10 {
        num.to_string()
    } else {
        format!("%{num:02}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_h(g: &MolecularGraph) -> Vec<u32> {
        g.atoms.iter().map(Atom::total_h).collect()
    }

    #[test]
    fn methane() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(g.n_atoms(), 1);
        assert_eq!(g.n_bonds(), 0);
        assert_eq!(g.node_features[0][3], 4.0);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.n_atoms(), 6);
        assert_eq!(g.n_bonds(), 6);
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(g.node_features.iter().all(|f| f[4] == 1.0));
        assert_eq!(total_h(&g), vec![1; 6]);
        assert!(g.node_features.iter().all(|f| f[6] == 4.0 && f[2] == 2.0));
    }

    #[test]
    fn ammonium() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atoms[0].element, 7);
        assert_eq!(g.atoms[0].formal_charge, 1);
        assert_eq!(g.atoms[0].explicit_h, 4);
        assert_eq!(g.node_features[0][6], 4.0);
    }

    #[test]
    fn unclosed_ring() {
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(Error::UnmatchedRingBond {
                label: 1,
                position: 1
            })
        ));
    }

    #[test]
    fn error_positions() {
        assert!(matches!(parse_smiles(""), Err(Error::EmptyInput)));
        assert!(matches!(
            parse_smiles("CC(C"),
            Err(Error::UnbalancedParenthesis { position: 2 })
        ));
        assert!(matches!(
            parse_smiles("CC)C"),
            Err(Error::UnbalancedParenthesis { position: 2 })
        ));
        match parse_smiles("CCX") {
            Err(Error::UnknownElement { symbol, position }) => {
                assert_eq!(symbol, "X");
                assert_eq!(position, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_smiles("C[Xx]"),
            Err(Error::UnknownElement { position: 2, .. })
        ));
    }

    #[test]
    fn heteroaromatics() {
        let pyridine = parse_smiles("c1ccncc1").unwrap();
        assert_eq!(total_h(&pyridine), vec![1, 1, 1, 0, 1, 1]);
        let pyrrole = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(total_h(&pyrrole), vec![1, 1, 1, 1, 1]);
        assert_eq!(pyrrole.node_features[3][6], 3.0);
        let thiophene = parse_smiles("c1ccsc1").unwrap();
        assert_eq!(thiophene.atoms[3].total_h(), 0);
        assert_eq!(thiophene.node_features[3][6], 2.0);
        let naphthalene = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!(naphthalene.atoms[3].total_h(), 0);
        assert_eq!(naphthalene.node_features[3][6], 4.0);
    }

    #[test]
    fn bonds_branches_and_percent_rings() {
        let g = parse_smiles("CC(=O)O").unwrap();
        assert_eq!(g.bonds[1].order, BondOrder::Double);
        assert_eq!(total_h(&g), vec![3, 0, 0, 1]);
        let g = parse_smiles("C%12CC%12").unwrap();
        assert_eq!(g.n_bonds(), 3);
        let g = parse_smiles("C#N").unwrap();
        assert_eq!(g.node_features[0][2], 1.0);
        assert_eq!(g.node_features[1][2], 1.0);
        let g = parse_smiles("C=C=C").unwrap();
        assert_eq!(g.node_features[1][2], 1.0);
        assert_eq!(g.node_features[0][2], 2.0);
        let g = parse_smiles("CCO").unwrap();
        assert!(g.node_features.iter().all(|f| f[2] == 3.0));
    }

    #[test]
    fn stereo_is_ignored() {
        let a = parse_smiles("F/C=C/F").unwrap();
        let b = parse_smiles("FC=CF").unwrap();
        assert_eq!(a.bonds, b.bonds);
        let c = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        let d = parse_smiles("NC(C)C(=O)O").unwrap();
        assert_eq!(total_h(&c), total_h(&d));
    }

    #[test]
    fn bracket_details() {
        let g = parse_smiles("[13CH3][O-]").unwrap();
        assert_eq!(g.atoms[0].explicit_h, 3);
        assert_eq!(g.atoms[1].formal_charge, -1);
        let g = parse_smiles("[Fe++]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, 2);
        let g = parse_smiles("[N+](=O)[O-]").unwrap();
        assert_eq!(g.atoms[0].formal_charge, 1);
        assert!(parse_smiles("[C+5]").is_err());
        assert!(parse_smiles("[CH4").is_err());
    }

    #[test]
    fn write_then_parse_keeps_hydrogens() {
        for s in [
            "c1ccccc1",
            "CC(=O)[O-]",
            "c1ccc2ccccc2c1",
            "c1cc[nH]c1",
            "O=[N+]([O-])c1ccc(N)cc1",
            "C1CC2CCC1CC2",
            "c1ccccc1-c1ccccc1",
            "[NH4+]",
            "C#CC=C",
        ] {
            let g = parse_smiles(s).unwrap();
            let text = write_smiles(&g);
            let h = parse_smiles(&text).unwrap_or_else(|e| panic!("{s} -> {text}: {e}"));
            assert_eq!(g.n_atoms(), h.n_atoms(), "{s} -> {text}");
            assert_eq!(g.n_bonds(), h.n_bonds(), "{s} -> {text}");
            let mut a = total_h(&g);
            let mut b = total_h(&h);
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b, "{s} -> {text}");
        }
    }

    #[test]
    fn many_rings_use_percent_labels() {
        // Eleven simultaneously open ring bonds force two-digit labels.
        let mut s = String::from("C");
        for i in 1..=11 {
            s.push_str(&format!("%{i:02}"));
        }
        s.push_str("CCCCCCCCCCC");
        let mut chars = String::new();
        for i in 1..=11 {
            chars.push_str(&format!("C%{i:02}"));
        }
        let text = format!("{s}{chars}");
        let g = parse_smiles(&text).unwrap();
        let out = write_smiles(&g);
        let h = parse_smiles(&out).unwrap();
        assert_eq!(g.n_bonds(), h.n_bonds());
    }
}

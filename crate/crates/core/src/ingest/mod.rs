//! Molecule ingestion: SMILES parsing, salt/metal stripping, duplicate
//! resolution and stratified splitting.

mod canon;
pub mod elements;
mod molecule;
mod smiles;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use canon::canonical_key;
pub use molecule::{Atom, Bond, BondOrder, MolecularGraph, NODE_FEATURES, NODE_FEATURE_NAMES};
pub use smiles::{parse_smiles, write_smiles};

#[derive(Clone, Debug)]
pub struct PreprocessConfig {
    /// Atomic numbers removed together with their bonds.
    pub metals: Vec<u8>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            metals: elements::default_metals(),
        }
    }
}

/// Strips explicit hydrogens and metals and keeps the largest fragment.
///
/// Explicit `[H]` atoms are folded into their neighbor's hydrogen count.
/// Fragment ties are broken by bond count, then by the lowest canonical key.
pub fn preprocess(g: &MolecularGraph, cfg: &PreprocessConfig) -> Result<MolecularGraph> {
    let mut atoms = g.atoms.clone();
    let mut remove = vec![false; atoms.len()];
    for (i, a) in g.atoms.iter().enumerate() {
        if a.element == 1 || cfg.metals.contains(&a.element) {
            remove[i] = true;
        } else if !elements::ORGANIC_ELEMENTS.contains(&a.element) {
            return Err(Error::UnknownElement {
                symbol: elements::symbol(a.element).to_string(),
                position: i,
            });
        }
    }
    for b in &g.bonds {
        for (h, heavy) in [(b.a, b.b), (b.b, b.a)] {
            if g.atoms[h].element == 1 && g.atoms[heavy].element != 1 && !remove[heavy] {
                atoms[heavy].explicit_h = atoms[heavy].explicit_h.saturating_add(1);
            }
        }
    }
    let keep: Vec<usize> = (0..atoms.len()).filter(|&i| !remove[i]).collect();
    if keep.is_empty() {
        return Err(Error::EmptyAfterPreprocess);
    }
    let mut stripped = g.clone();
    stripped.atoms = atoms;
    let stripped = stripped.subgraph(&keep);

    let comps = stripped.components();
    if comps.len() == 1 {
        return Ok(stripped);
    }
    let best = comps
        .iter()
        .map(|c| {
            let frag = stripped.subgraph(c);
            (c.len(), frag.n_bonds(), canonical_key(&frag), frag)
        })
        .min_by(|x, y| {
            y.0.cmp(&x.0)
                .then(y.1.cmp(&x.1))
                .then_with(|| x.2.cmp(&y.2))
        })
        .map(|(_, _, _, frag)| frag)
        .expect("non-empty");
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct DatasetRecord {
    pub smiles: String,
    pub canonical_key: String,
    pub label: u8,
    pub graph: MolecularGraph,
}

impl DatasetRecord {
    /// Parses, preprocesses and keys one labeled SMILES string.
    pub fn from_smiles(smiles: &str, label: u8, cfg: &PreprocessConfig) -> Result<Self> {
        let parsed = parse_smiles(smiles)?;
        let mut graph = preprocess(&parsed, cfg)?;
        graph.label = Some(label);
        Ok(Self {
            smiles: smiles.trim().to_string(),
            canonical_key: canonical_key(&graph),
            label,
            graph,
        })
    }
}

/// Keeps one record per canonical key, in first-occurrence order. A key is
/// labeled positive if any of its duplicates is positive.
pub fn dedup_clear_evidence(records: &[DatasetRecord]) -> Vec<DatasetRecord> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<DatasetRecord> = Vec::new();
    for r in records {
        match index.get(r.canonical_key.as_str()) {
            Some(&i) => {
                if r.label == 1 {
                    out[i].label = 1;
                    out[i].graph.label = Some(1);
                }
            }
            None => {
                index.insert(&r.canonical_key, out.len());
                out.push(r.clone());
            }
        }
    }
    out
}

/// Stratified index split. Returns `(train, test)` indices in input order.
pub fn split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::DegenerateSplit(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; labels.len()];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test >= members.len() {
            return Err(Error::DegenerateSplit(format!(
                "class {class} with {} records cannot be split at fraction {test_fraction}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            is_test[i] = true;
        }
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::DegenerateSplit("labels must be 0 or 1".into()));
    }
    let train = (0..labels.len()).filter(|&i| !is_test[i]).collect();
    let test = (0..labels.len()).filter(|&i| is_test[i]).collect();
    Ok((train, test))
}

/// Stratified, seeded train/test split of records.
pub fn split_dataset(
    records: &[DatasetRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>)> {
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    let (train, test) = split_indices(&labels, test_fraction, seed)?;
    Ok((
        train.into_iter().map(|i| records[i].clone()).collect(),
        test.into_iter().map(|i| records[i].clone()).collect(),
    ))
}

/// One input row that failed to parse or preprocess.
#[derive(Debug)]
pub struct Rejected {
    pub line: usize,
    pub smiles: String,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub rows: usize,
    pub rejected: Vec<Rejected>,
    pub parsed: usize,
    pub unique: usize,
    pub positives: usize,
}

/// Reads a `smiles,label` CSV.
pub fn read_labeled_csv<R: Read>(reader: R) -> Result<Vec<(String, u8)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("missing '{name}' column")))
    };
    let (si, li) = (col("smiles")?, col("label")?);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let label = match rec.get(li).map(str::trim) {
            Some("0") => 0,
            Some("1") => 1,
            other => {
                return Err(Error::Format(format!(
                    "row {}: label {:?} is not 0 or 1",
                    line + 2,
                    other.unwrap_or("")
                )))
            }
        };
        rows.push((rec.get(si).unwrap_or("").to_string(), label));
    }
    Ok(rows)
}

/// Parses and preprocesses rows in parallel (output order follows input),
/// then applies duplicate resolution.
pub fn ingest_rows(
    rows: &[(String, u8)],
    cfg: &PreprocessConfig,
) -> (Vec<DatasetRecord>, IngestReport) {
    let results: Vec<Result<DatasetRecord>> = rows
        .par_iter()
        .map(|(s, l)| DatasetRecord::from_smiles(s, *l, cfg))
        .collect();
    let mut report = IngestReport {
        rows: rows.len(),
        ..Default::default()
    };
    let mut records = Vec::with_capacity(rows.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(error) => report.rejected.push(Rejected {
                line: i + 2,
                smiles: rows[i].0.clone(),
                error,
            }),
        }
    }
    report.parsed = records.len();
    let unique = dedup_clear_evidence(&records);
    report.unique = unique.len();
    report.positives = unique.iter().filter(|r| r.label == 1).count();
    (unique, report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub canonical_key: String,
    pub label: u8,
    pub split: Split,
    pub smiles: String,
}

/// Writes the dataset manifest: `canonical_key,label,split,smiles`.
pub fn write_manifest<W: Write>(w: W, rows: &[ManifestRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["canonical_key", "label", "split", "smiles"])?;
    for r in rows {
        wtr.write_record([
            r.canonical_key.as_str(),
            if r.label == 1 { "1" } else { "0" },
            r.split.as_str(),
            r.smiles.as_str(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_manifest<R: Read>(r: R) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let expected = ["canonical_key", "label", "split"];
    if headers.iter().take(3).ne(expected.iter().copied()) {
        return Err(Error::Format(format!(
            "manifest header must start with canonical_key,label,split (got {:?})",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let label = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Format(format!("bad label {other:?}"))),
        };
        let split = match &rec[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::Format(format!("bad split {other:?}"))),
        };
        rows.push(ManifestRow {
            canonical_key: rec[0].to_string(),
            label,
            split,
            smiles: rec.get(3).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

pub fn read_manifest_path(path: &Path) -> Result<Vec<ManifestRow>> {
    read_manifest(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: &str, label: u8) -> DatasetRecord {
        let mut r = DatasetRecord::from_smiles("C", label, &PreprocessConfig::default()).unwrap();
        r.canonical_key = key.to_string();
        r
    }

    fn keys_labels(rs: &[DatasetRecord]) -> Vec<(String, u8)> {
        rs.iter()
            .map(|r| (r.canonical_key.clone(), r.label))
            .collect()
    }

    #[test]
    fn clear_evidence_rule() {
        let out = dedup_clear_evidence(&[rec("K1", 0), rec("K1", 1)]);
        assert_eq!(keys_labels(&out), vec![("K1".into(), 1)]);
        let out = dedup_clear_evidence(&[rec("K1", 0), rec("K1", 0)]);
        assert_eq!(keys_labels(&out), vec![("K1".into(), 0)]);
        let out = dedup_clear_evidence(&[rec("K1", 1), rec("K2", 0)]);
        assert_eq!(keys_labels(&out), vec![("K1".into(), 1), ("K2".into(), 0)]);
    }

    #[test]
    fn dedup_idempotent() {
        let input = [
            rec("A", 0),
            rec("B", 1),
            rec("A", 1),
            rec("C", 0),
            rec("B", 0),
        ];
        let once = dedup_clear_evidence(&input);
        let twice = dedup_clear_evidence(&once);
        assert_eq!(keys_labels(&once), keys_labels(&twice));
        assert_eq!(
            keys_labels(&once),
            vec![("A".into(), 1), ("B".into(), 1), ("C".into(), 0)]
        );
    }

    #[test]
    fn sodium_acetate_keeps_acetate() {
        let g = parse_smiles("CC(=O)[O-].[Na+]").unwrap();
        let p = preprocess(&g, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.n_atoms(), 4);
        assert!(p.atoms.iter().all(|a| a.element != 11));
        assert_eq!(
            canonical_key(&p),
            canonical_key(&parse_smiles("CC(=O)[O-]").unwrap())
        );
    }

    #[test]
    fn explicit_hydrogens_are_folded() {
        let g = parse_smiles("[H]C([H])([H])[H]").unwrap();
        let p = preprocess(&g, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.n_atoms(), 1);
        assert_eq!(p.node_features[0][3], 4.0);
        assert_eq!(
            canonical_key(&p),
            canonical_key(&parse_smiles("C").unwrap())
        );
    }

    #[test]
    fn connected_molecule_unchanged_and_idempotent() {
        let cfg = PreprocessConfig::default();
        let g = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let p = preprocess(&g, &cfg).unwrap();
        assert_eq!(p.n_atoms(), g.n_atoms());
        assert_eq!(preprocess(&p, &cfg).unwrap(), p);
    }

    #[test]
    fn largest_fragment_tie_breaks_on_bonds() {
        // Both fragments have three heavy atoms; the ring has more bonds.
        let g = parse_smiles("CCC.C1CC1").unwrap();
        let p = preprocess(&g, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.n_bonds(), 3);
    }

    #[test]
    fn only_metal_is_empty() {
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        let p = preprocess(&g, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.atoms[0].element, 17);
        let g = parse_smiles("[Na+]").unwrap();
        assert!(matches!(
            preprocess(&g, &PreprocessConfig::default()),
            Err(Error::EmptyAfterPreprocess)
        ));
    }

    #[test]
    fn unsupported_metalloid_rejected() {
        let g = parse_smiles("C[As](C)C").unwrap();
        assert!(matches!(
            preprocess(&g, &PreprocessConfig::default()),
            Err(Error::UnknownElement { .. })
        ));
    }

    #[test]
    fn stratified_split_arithmetic() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 60)).collect();
        let (train, test) = split_indices(&labels, 0.2, 7).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 12);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 8);
        let again = split_indices(&labels, 0.2, 7).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        let mut all: Vec<usize> = train.into_iter().chain(test).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_split() {
        assert!(matches!(
            split_indices(&[1, 1, 1, 0], 0.2, 1),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(split_indices(&[1, 0], 1.5, 1).is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let rows = vec![
            ManifestRow {
                canonical_key: "abc".into(),
                label: 1,
                split: Split::Train,
                smiles: "CC,O".into(),
            },
            ManifestRow {
                canonical_key: "def".into(),
                label: 0,
                split: Split::Test,
                smiles: "c1ccccc1".into(),
            },
        ];
        let mut buf = Vec::new();
        write_manifest(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"canonical_key,label,split,smiles\n"));
        assert_eq!(read_manifest(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn labeled_csv_requires_binary_labels() {
        let ok = read_labeled_csv("smiles,label\nCCO,1\nCC,0\n".as_bytes()).unwrap();
        assert_eq!(ok, vec![("CCO".into(), 1), ("CC".into(), 0)]);
        assert!(read_labeled_csv("smiles,label\nCCO,2\n".as_bytes()).is_err());
        assert!(read_labeled_csv("smi,label\nCCO,1\n".as_bytes()).is_err());
    }
}

//! Subcommand implementations. Every command reads its inputs from the work
//! directory (or explicit paths), writes fixed-name artifacts there and
//! records a `<command>.runlog`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use geoscatt::evalhead::{
    fit_logreg, kfold_cv, metrics, CvReport, LogRegModel, MetricsReport, DEFAULT_THRESHOLD,
};
use geoscatt::gnn::{embed_all, train_gin, EpochLog, GinParams};
use geoscatt::gst::ggs_features;
use geoscatt::ingest::{
    ingest_rows, read_labeled_csv, read_manifest_path, split_indices, write_manifest,
    DatasetRecord, ManifestRow, MolecularGraph, PreprocessConfig, Split,
};
use geoscatt::io::{load_fmat, save_fmat, write_pgm, FORMAT_VERSION};
use geoscatt::metagraph::{sage_forward, train_sage, MetaGraph, NodeMask, SageParams};
use geoscatt::nn::softmax_row;
use geoscatt::scatter2d::{
    chi2_scores, chi2_select, morlet_bank, rasterize, scatter_images, Image,
};
use geoscatt::{Error, Matrix, Result};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

pub const MANIFEST: &str = "manifest.csv";
pub const REJECTED: &str = "ingest_rejected.csv";
pub const GGS: &str = "ggs.fmat";
pub const SCATTER2D: &str = "scatter2d.fmat";
pub const SCATTER2D_COLUMNS: &str = "scatter2d_columns.csv";
pub const GIN_PARAMS: &str = "gin.gprm";
pub const GIN_CURVE: &str = "gin_curve.csv";
pub const GIN_EMBEDDINGS: &str = "gin_embeddings.fmat";
pub const MG_NODES: &str = "metagraph_nodes.csv";
pub const MG_WEIGHTS: &str = "metagraph_weights.fmat";
pub const MG_FEATURES: &str = "metagraph_features.fmat";
pub const SAGE_PARAMS: &str = "sage.gprm";
pub const SAGE_CURVE: &str = "sage_curve.csv";
pub const HEAD_PARAMS: &str = "head.gprm";
pub const EVALUATION: &str = "evaluation.csv";
pub const EVALUATION_SCORES: &str = "evaluation_scores.csv";
pub const CV_REPORT: &str = "cv.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalModel {
    Head,
    Sage,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Ingest,
    FeaturizeGst {
        manifest: Option<PathBuf>,
    },
    Featurize2d {
        manifest: Option<PathBuf>,
        images: Option<PathBuf>,
    },
    TrainGin {
        manifest: Option<PathBuf>,
    },
    ExportEmbeddings {
        manifest: Option<PathBuf>,
    },
    BuildMetagraph {
        manifest: Option<PathBuf>,
        features: Vec<PathBuf>,
    },
    TrainSage,
    FitHead {
        manifest: Option<PathBuf>,
        features: Vec<PathBuf>,
    },
    Evaluate {
        manifest: Option<PathBuf>,
        model: EvalModel,
        features: Vec<PathBuf>,
    },
    Cv {
        manifest: Option<PathBuf>,
        features: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::FeaturizeGst { .. } => "featurize-gst",
            Command::Featurize2d { .. } => "featurize-2d",
            Command::TrainGin { .. } => "train-gin",
            Command::ExportEmbeddings { .. } => "export-embeddings",
            Command::BuildMetagraph { .. } => "build-metagraph",
            Command::TrainSage => "train-sage",
            Command::FitHead { .. } => "fit-head",
            Command::Evaluate { .. } => "evaluate",
            Command::Cv { .. } => "cv",
        }
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Run record: config digest, seed, versions and file digests. Contains no
/// timestamps, so identical runs give identical logs.
struct RunLog<'a> {
    command: &'static str,
    cfg: &'a PipelineConfig,
    workdir: &'a Path,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: Vec<(String, String)>,
}

impl RunLog<'_> {
    fn display(&self, p: &Path) -> String {
        p.strip_prefix(self.workdir)
            .unwrap_or(p)
            .display()
            .to_string()
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    fn finish(self) -> Result<PathBuf> {
        let mut root = toml::Table::new();
        root.insert("command".into(), self.command.into());
        root.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        root.insert("format_version".into(), i64::from(FORMAT_VERSION).into());
        root.insert("config_sha256".into(), self.cfg.digest().into());
        root.insert("seed".into(), (self.cfg.seed()? as i64).into());
        for (section, files) in [("inputs", &self.inputs), ("outputs", &self.outputs)] {
            let mut t = toml::Table::new();
            for f in files {
                t.insert(self.display(f), sha256_file(f)?.into());
            }
            root.insert(section.into(), t.into());
        }
        let mut notes = toml::Table::new();
        for (k, v) in &self.notes {
            notes.insert(k.clone(), v.clone().into());
        }
        root.insert("notes".into(), notes.into());
        root.insert(
            "config".into(),
            toml::Table::try_from(self.cfg)
                .map_err(|e| Error::Config(e.to_string()))?
                .into(),
        );
        let path = self.workdir.join(format!("{}.runlog", self.command));
        fs::write(
            &path,
            toml::to_string(&root).map_err(|e| Error::Config(e.to_string()))?,
        )?;
        Ok(path)
    }
}

pub struct Pipeline<'a> {
    cfg: &'a PipelineConfig,
    workdir: PathBuf,
}

/// What a command produced: a message for the terminal and its files.
#[derive(Debug)]
pub struct Outcome {
    pub message: String,
    pub outputs: Vec<PathBuf>,
}

fn create<P: AsRef<Path>>(p: P) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p)?))
}

fn open<P: AsRef<Path>>(p: P) -> Result<BufReader<File>> {
    let p = p.as_ref();
    File::open(p).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", p.display()),
        ))
    })
}

fn write_curve(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "epoch,train_loss,val_loss")?;
    for e in log {
        writeln!(w, "{},{:e},{:e}", e.epoch, e.train_loss, e.val_loss)?;
    }
    w.flush()?;
    Ok(())
}

fn write_report_csv(path: &Path, name: &str, r: &MetricsReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "set,n,tp,tn,fp,fn,acc,se,sp,f1,mcc,auc,flags")?;
    let auc = r
        .auc
        .map_or_else(|| "NA".to_string(), |a| format!("{a:.6}"));
    writeln!(
        w,
        "{name},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{auc},{}",
        r.n(),
        r.tp,
        r.tn,
        r.fp,
        r.fn_,
        r.acc,
        r.se,
        r.sp,
        r.f1,
        r.mcc,
        r.flags
    )?;
    w.flush()?;
    Ok(())
}

fn report_text(name: &str, r: &MetricsReport) -> String {
    let auc = r
        .auc
        .map_or_else(|| "NA".to_string(), |a| format!("{a:.4}"));
    let mut s = format!(
        "{name}: n={} tp={} tn={} fp={} fn={}\nACC={:.4} SE={:.4} SP={:.4} F1={:.4} MCC={:.4} AUC={auc}",
        r.n(),
        r.tp,
        r.tn,
        r.fp,
        r.fn_,
        r.acc,
        r.se,
        r.sp,
        r.f1,
        r.mcc
    );
    if r.flags.any() {
        let _ = write!(s, "\ndegenerate denominators: {}", r.flags);
    }
    s
}

impl<'a> Pipeline<'a> {
    /// Validates the config and creates the work directory.
    pub fn new(cfg: &'a PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let workdir = cfg.paths.workdir.clone();
        fs::create_dir_all(&workdir)?;
        Ok(Self { cfg, workdir })
    }

    pub fn workdir(&self) -> &Path {
        &self.workdir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }

    /// Paths that exist as given are used as is; anything else is looked up
    /// in the work directory.
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() || p.exists() {
            p.to_path_buf()
        } else {
            self.workdir.join(p)
        }
    }

    fn log(&self, command: &'static str) -> RunLog<'_> {
        RunLog {
            command,
            cfg: self.cfg,
            workdir: &self.workdir,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn run(&self, cmd: &Command) -> Result<Outcome> {
        let mut log = self.log(cmd.name());
        let message = match cmd {
            Command::Ingest => self.ingest(&mut log)?,
            Command::FeaturizeGst { manifest } => {
                self.featurize_gst(manifest.as_deref(), &mut log)?
            }
            Command::Featurize2d { manifest, images } => {
                self.featurize_2d(manifest.as_deref(), images.as_deref(), &mut log)?
            }
            Command::TrainGin { manifest } => self.train_gin(manifest.as_deref(), &mut log)?,
            Command::ExportEmbeddings { manifest } => {
                self.export_embeddings(manifest.as_deref(), &mut log)?
            }
            Command::BuildMetagraph { manifest, features } => {
                self.build_metagraph(manifest.as_deref(), features, &mut log)?
            }
            Command::TrainSage => self.train_sage(&mut log)?,
            Command::FitHead { manifest, features } => {
                self.fit_head(manifest.as_deref(), features, &mut log)?
            }
            Command::Evaluate {
                manifest,
                model,
                features,
            } => self.evaluate(manifest.as_deref(), *model, features, &mut log)?,
            Command::Cv { manifest, features } => {
                self.cv(manifest.as_deref(), features, &mut log)?
            }
        };
        let mut outputs = log.outputs.clone();
        outputs.push(log.finish()?);
        Ok(Outcome { message, outputs })
    }

    fn manifest(&self, given: Option<&Path>, log: &mut RunLog) -> Result<Vec<ManifestRow>> {
        let path = given.map_or_else(|| self.path(MANIFEST), |p| self.resolve(p));
        let rows = read_manifest_path(&path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(
                io.kind(),
                format!("{}: {io}", path.display()),
            )),
            other => other,
        })?;
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        log.inputs.push(path);
        Ok(rows)
    }

    fn graphs(rows: &[ManifestRow]) -> Result<Vec<MolecularGraph>> {
        let cfg = PreprocessConfig::default();
        rows.par_iter()
            .map(|r| {
                if r.smiles.is_empty() {
                    return Err(Error::Format(format!(
                        "manifest row {} has no smiles",
                        r.canonical_key
                    )));
                }
                DatasetRecord::from_smiles(&r.smiles, r.label, &cfg).map(|d| d.graph)
            })
            .collect()
    }

    /// Loads and concatenates feature files column-wise.
    fn features(
        &self,
        files: &[PathBuf],
        default: &str,
        n: usize,
        log: &mut RunLog,
    ) -> Result<Matrix<f64>> {
        let files: Vec<PathBuf> = if files.is_empty() {
            vec![self.path(default)]
        } else {
            files.iter().map(|f| self.resolve(f)).collect()
        };
        let mut out: Option<Matrix<f64>> = None;
        for f in files {
            let m: Matrix<f64> = load_fmat(&f)?;
            if m.rows() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} has {} rows, manifest has {n}",
                    f.display(),
                    m.rows()
                )));
            }
            log.inputs.push(f);
            out = Some(match out {
                None => m,
                Some(acc) => acc.hcat(&m)?,
            });
        }
        Ok(out.expect("at least one feature file"))
    }

    fn split_rows(rows: &[ManifestRow], split: Split) -> Vec<usize> {
        (0..rows.len())
            .filter(|&i| rows[i].split == split)
            .collect()
    }

    fn ingest(&self, log: &mut RunLog) -> Result<String> {
        let input = self
            .cfg
            .paths
            .input
            .as_ref()
            .ok_or_else(|| Error::Config("ingest needs --input".into()))?;
        let rows = read_labeled_csv(open(input)?)?;
        log.inputs.push(input.clone());
        let (records, report) = ingest_rows(&rows, &PreprocessConfig::default());
        let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
        let (_, test) = split_indices(&labels, self.cfg.data.test_fraction, self.cfg.seed()?)?;
        let mut is_test = vec![false; records.len()];
        for i in test {
            is_test[i] = true;
        }
        let manifest: Vec<ManifestRow> = records
            .iter()
            .zip(&is_test)
            .map(|(r, &t)| ManifestRow {
                canonical_key: r.canonical_key.clone(),
                label: r.label,
                split: if t { Split::Test } else { Split::Train },
                smiles: r.smiles.clone(),
            })
            .collect();
        let path = self.path(MANIFEST);
        let mut w = create(&path)?;
        write_manifest(&mut w, &manifest)?;
        w.flush()?;
        log.outputs.push(path);

        let rej = self.path(REJECTED);
        let mut w = csv_writer(&rej)?;
        w.write_record(["line", "smiles", "category", "error"])?;
        for r in &report.rejected {
            w.write_record([
                r.line.to_string(),
                r.smiles.clone(),
                r.error.category().into(),
                r.error.to_string(),
            ])?;
        }
        w.flush()?;
        log.outputs.push(rej);

        let n_test = is_test.iter().filter(|&&t| t).count();
        log.note("rows", report.rows);
        log.note("rejected", report.rejected.len());
        log.note("parsed", report.parsed);
        log.note("unique", report.unique);
        log.note("positives", report.positives);
        log.note("test", n_test);
        Ok(format!(
            "rows {} | rejected {} | parsed {} | unique {} ({} positive, {} negative) | train {} / test {}",
            report.rows,
            report.rejected.len(),
            report.parsed,
            report.unique,
            report.positives,
            report.unique - report.positives,
            records.len() - n_test,
            n_test
        ))
    }

    fn featurize_gst(&self, manifest: Option<&Path>, log: &mut RunLog) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let graphs = Self::graphs(&rows)?;
        let cfg = self.cfg.ggs()?;
        let dim = geoscatt::gst::ggs_dim(&cfg);
        let vecs = graphs
            .par_iter()
            .map(|g| ggs_features::<f64>(g, &cfg).map(|v| v.values))
            .collect::<Result<Vec<_>>>()?;
        let m = Matrix::from_vec(rows.len(), dim, vecs.concat())?;
        let path = self.path(GGS);
        save_fmat(&path, &m)?;
        log.outputs.push(path);
        log.note("columns", dim);
        Ok(format!("{} molecules x {dim} GGS features", rows.len()))
    }

    fn featurize_2d(
        &self,
        manifest: Option<&Path>,
        images: Option<&Path>,
        log: &mut RunLog,
    ) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let graphs = Self::graphs(&rows)?;
        let s = &self.cfg.scatter2d;
        let bank = morlet_bank::<f64>(s.scales, s.orientations, s.size, self.cfg.morlet())?;
        let imgs = graphs
            .par_iter()
            .map(|g| rasterize::<f64>(g, s.size))
            .collect::<Result<Vec<Image<f64>>>>()?;
        if let Some(dir) = images {
            fs::create_dir_all(dir)?;
            for (i, img) in imgs.iter().enumerate() {
                let mut w = create(dir.join(format!("{i:05}.pgm")))?;
                write_pgm(&mut w, img.size, img.size, &img.pixels)?;
                w.flush()?;
            }
            log.note("images", dir.display());
        }
        let (x, labels) = scatter_images(&imgs, &bank, s.order)?;

        // Selection statistics come from the training rows only.
        let train = Self::split_rows(&rows, Split::Train);
        let xtr = x.select_rows(&train);
        let ytr: Vec<u8> = train.iter().map(|&i| rows[i].label).collect();
        let k = s.k_select.min(x.cols());
        let keep = chi2_select(&xtr, &ytr, k)?;
        let scores = chi2_scores(&xtr, &ytr)?;
        let selected = x.select_cols(&keep);

        let path = self.path(SCATTER2D);
        save_fmat(&path, &selected)?;
        log.outputs.push(path);
        let cols = self.path(SCATTER2D_COLUMNS);
        let mut w = csv_writer(&cols)?;
        w.write_record(["column", "source_index", "label", "chi2"])?;
        for (c, &j) in keep.iter().enumerate() {
            w.write_record([
                c.to_string(),
                j.to_string(),
                labels[j].to_string(),
                format!("{:e}", scores[j]),
            ])?;
        }
        w.flush()?;
        log.outputs.push(cols);
        log.note("coefficients", x.cols());
        log.note("k_selected", k);
        Ok(format!(
            "{} images {}x{} -> {} scattering coefficients, kept {k} by chi-squared",
            rows.len(),
            s.size,
            s.size,
            x.cols()
        ))
    }

    /// Stratified train/validation split of the manifest's training rows.
    fn inner_split(&self, rows: &[ManifestRow]) -> Result<(Vec<usize>, Vec<usize>)> {
        let train = Self::split_rows(rows, Split::Train);
        let labels: Vec<u8> = train.iter().map(|&i| rows[i].label).collect();
        let (tr, va) = split_indices(&labels, self.cfg.data.val_fraction, self.cfg.seed()?)?;
        Ok((
            tr.into_iter().map(|i| train[i]).collect(),
            va.into_iter().map(|i| train[i]).collect(),
        ))
    }

    fn train_gin(&self, manifest: Option<&Path>, log: &mut RunLog) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let graphs = Self::graphs(&rows)?;
        let (tr, va) = self.inner_split(&rows)?;
        let pick = |idx: &[usize]| -> (Vec<MolecularGraph>, Vec<u8>) {
            (
                idx.iter().map(|&i| graphs[i].clone()).collect(),
                idx.iter().map(|&i| rows[i].label).collect(),
            )
        };
        let (gtr, ytr) = pick(&tr);
        let (gva, yva) = pick(&va);
        let out = train_gin::<f64>(&gtr, &ytr, &gva, &yva, &self.cfg.gin_train()?)?;
        let path = self.path(GIN_PARAMS);
        let mut w = create(&path)?;
        out.params.save(&mut w)?;
        w.flush()?;
        log.outputs.push(path);
        let curve = self.path(GIN_CURVE);
        write_curve(&curve, &out.log)?;
        log.outputs.push(curve);
        log.note("best_epoch", out.best_epoch);
        log.note("best_val_loss", format!("{:e}", out.best_val_loss));
        Ok(format!(
            "GIN trained on {} graphs ({} validation): best epoch {} of {}, val loss {:.4}",
            gtr.len(),
            gva.len(),
            out.best_epoch,
            out.log.len(),
            out.best_val_loss
        ))
    }

    fn export_embeddings(&self, manifest: Option<&Path>, log: &mut RunLog) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let graphs = Self::graphs(&rows)?;
        let pp = self.path(GIN_PARAMS);
        let params = GinParams::<f64>::load(open(&pp)?)?;
        log.inputs.push(pp);
        let emb = embed_all(&graphs, &params)?;
        let path = self.path(GIN_EMBEDDINGS);
        save_fmat(&path, &emb)?;
        log.outputs.push(path);
        Ok(format!("{} x {} GIN embeddings", emb.rows(), emb.cols()))
    }

    fn build_metagraph(
        &self,
        manifest: Option<&Path>,
        features: &[PathBuf],
        log: &mut RunLog,
    ) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let x = self.features(features, GGS, rows.len(), log)?;
        let (_, va) = self.inner_split(&rows)?;
        let mut masks: Vec<NodeMask> = rows
            .iter()
            .map(|r| {
                if r.split == Split::Test {
                    NodeMask::Test
                } else {
                    NodeMask::Train
                }
            })
            .collect();
        for i in va {
            masks[i] = NodeMask::Val;
        }
        let labels = rows.iter().map(|r| r.label).collect();
        let mg = MetaGraph::build(x, labels, masks)?;
        let paths = [
            self.path(MG_NODES),
            self.path(MG_WEIGHTS),
            self.path(MG_FEATURES),
        ];
        let (mut a, mut b, mut c) = (create(&paths[0])?, create(&paths[1])?, create(&paths[2])?);
        mg.save(&mut a, &mut b, &mut c)?;
        for w in [&mut a, &mut b, &mut c] {
            w.flush()?;
        }
        log.outputs.extend(paths);
        log.note("sigma", format!("{:e}", mg.sigma));
        Ok(format!(
            "meta-graph over {} molecules, kernel sigma {:.6}",
            mg.n(),
            mg.sigma
        ))
    }

    fn load_metagraph(&self, log: &mut RunLog) -> Result<MetaGraph<f64>> {
        let paths = [
            self.path(MG_NODES),
            self.path(MG_WEIGHTS),
            self.path(MG_FEATURES),
        ];
        let mg = MetaGraph::load(open(&paths[0])?, open(&paths[1])?, open(&paths[2])?)?;
        log.inputs.extend(paths);
        Ok(mg)
    }

    fn train_sage(&self, log: &mut RunLog) -> Result<String> {
        let mg = self.load_metagraph(log)?;
        let out = train_sage(&mg, &self.cfg.sage_train()?)?;
        let path = self.path(SAGE_PARAMS);
        let mut w = create(&path)?;
        out.params.save(&mut w)?;
        w.flush()?;
        log.outputs.push(path);
        let curve = self.path(SAGE_CURVE);
        write_curve(&curve, &out.log)?;
        log.outputs.push(curve);
        log.note("best_epoch", out.best_epoch);
        log.note("best_val_loss", format!("{:e}", out.best_val_loss));
        Ok(format!(
            "SAGE trained: best epoch {} of {}, val loss {:.4}",
            out.best_epoch,
            out.log.len(),
            out.best_val_loss
        ))
    }

    fn fit_head(
        &self,
        manifest: Option<&Path>,
        features: &[PathBuf],
        log: &mut RunLog,
    ) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let x = self.features(features, GGS, rows.len(), log)?;
        let train = Self::split_rows(&rows, Split::Train);
        let y: Vec<u8> = train.iter().map(|&i| rows[i].label).collect();
        let model = fit_logreg(&x.select_rows(&train), &y, &self.cfg.head_cfg())?;
        let path = self.path(HEAD_PARAMS);
        let mut w = create(&path)?;
        model.save(&mut w)?;
        w.flush()?;
        log.outputs.push(path);
        log.note("iterations", model.iterations);
        log.note("grad_norm", format!("{:e}", model.grad_norm));
        Ok(format!(
            "logistic head on {} rows x {} features: {} iterations, gradient norm {:.2e}",
            train.len(),
            x.cols(),
            model.iterations,
            model.grad_norm
        ))
    }

    fn evaluate(
        &self,
        manifest: Option<&Path>,
        model: EvalModel,
        features: &[PathBuf],
        log: &mut RunLog,
    ) -> Result<String> {
        let (ids, y, scores) = match model {
            EvalModel::Head => {
                let rows = self.manifest(manifest, log)?;
                let x = self.features(features, GGS, rows.len(), log)?;
                let hp = self.path(HEAD_PARAMS);
                let head = LogRegModel::<f64>::load(open(&hp)?)?;
                log.inputs.push(hp);
                let test = Self::split_rows(&rows, Split::Test);
                let p = head.predict_proba(&x.select_rows(&test))?;
                let y: Vec<u8> = test.iter().map(|&i| rows[i].label).collect();
                (test, y, p)
            }
            EvalModel::Sage => {
                let mg = self.load_metagraph(log)?;
                let sp = self.path(SAGE_PARAMS);
                let params = SageParams::<f64>::load(open(&sp)?)?;
                log.inputs.push(sp);
                let logits = sage_forward(&mg, &params, self.cfg.sage_train()?.top_k, None)?;
                let test = mg.nodes(NodeMask::Test);
                let p = test
                    .iter()
                    .map(|&i| softmax_row(logits.row(i))[1])
                    .collect();
                let y: Vec<u8> = test.iter().map(|&i| mg.labels[i]).collect();
                (test, y, p)
            }
        };
        let report = metrics(&y, &scores, DEFAULT_THRESHOLD)?;
        let path = self.path(EVALUATION);
        write_report_csv(&path, "test", &report)?;
        log.outputs.push(path);
        let sp = self.path(EVALUATION_SCORES);
        let mut w = create(&sp)?;
        writeln!(w, "row,label,score")?;
        for ((i, l), s) in ids.iter().zip(&y).zip(&scores) {
            writeln!(w, "{i},{l},{s:e}")?;
        }
        w.flush()?;
        log.outputs.push(sp);
        Ok(report_text("test", &report))
    }

    fn cv(
        &self,
        manifest: Option<&Path>,
        features: &[PathBuf],
        log: &mut RunLog,
    ) -> Result<String> {
        let rows = self.manifest(manifest, log)?;
        let x = self.features(features, GGS, rows.len(), log)?;
        let train = Self::split_rows(&rows, Split::Train);
        let y: Vec<u8> = train.iter().map(|&i| rows[i].label).collect();
        let report: CvReport = kfold_cv(
            &x.select_rows(&train),
            &y,
            self.cfg.cv.k,
            self.cfg.seed()?,
            &self.cfg.head_cfg(),
        )?;
        let path = self.path(CV_REPORT);
        let mut w = create(&path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
        log.outputs.push(path);
        Ok(report.table())
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use geoscatt::Error;
use geoscatt_cli::config::PipelineConfig;
use geoscatt_cli::pipeline::{Command, EvalModel, Pipeline};

/// Molecular mutagenicity pipeline: ingestion, scattering features, graph
/// networks and a logistic head.
#[derive(Parser, Debug)]
#[command(name = "geoscatt", version, about)]
struct Cli {
    /// Labeled SMILES CSV (`smiles,label`)
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Directory for artifacts and run logs
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Random seed (required, here or in the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, env = "GEOSCATT_THREADS")]
    threads: Option<usize>,
    /// Override a config entry, e.g. `--set gin.epochs=50`
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct ManifestArg {
    /// Manifest CSV (default: <workdir>/manifest.csv)
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeatureArgs {
    #[command(flatten)]
    manifest: ManifestArg,
    /// FMAT feature files, concatenated column-wise (default: ggs.fmat)
    #[arg(long = "features")]
    features: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Head,
    Sage,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Parse, preprocess, deduplicate and split the input CSV
    Ingest,
    /// Compute geometric graph scattering features
    FeaturizeGst(ManifestArg),
    /// Rasterize molecules and compute 2D scattering features
    #[command(name = "featurize-2d")]
    Featurize2d {
        #[command(flatten)]
        manifest: ManifestArg,
        /// Also write the rasterized images as PGM files here
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Train the graph isomorphism network
    TrainGin(ManifestArg),
    /// Write GIN graph embeddings for every manifest row
    ExportEmbeddings(ManifestArg),
    /// Build the molecule similarity graph from feature files
    BuildMetagraph(FeatureArgs),
    /// Train GraphSAGE on the meta-graph
    TrainSage,
    /// Fit the logistic regression head on the training split
    FitHead(FeatureArgs),
    /// Score the test split
    Evaluate {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, value_enum, default_value = "head")]
        model: ModelArg,
    },
    /// Stratified k-fold cross-validation of the logistic head
    Cv {
        #[command(flatten)]
        features: FeatureArgs,
        /// Number of folds
        #[arg(long)]
        k: Option<usize>,
    },
}

fn build_config(cli: &Cli) -> geoscatt::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects section.key=value, got {o:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(p) = &cli.input {
        cfg.paths.input = Some(p.clone());
    }
    if let Some(p) = &cli.workdir {
        cfg.paths.workdir = p.clone();
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = Some(s);
    }
    if let Some(t) = cli.threads {
        cfg.run.threads = t;
    }
    if let Sub::Cv { k: Some(k), .. } = &cli.command {
        cfg.cv.k = *k;
    }
    Ok(cfg)
}

fn command(sub: Sub) -> Command {
    match sub {
        Sub::Ingest => Command::Ingest,
        Sub::FeaturizeGst(m) => Command::FeaturizeGst {
            manifest: m.manifest,
        },
        Sub::Featurize2d { manifest, images } => Command::Featurize2d {
            manifest: manifest.manifest,
            images,
        },
        Sub::TrainGin(m) => Command::TrainGin {
            manifest: m.manifest,
        },
        Sub::ExportEmbeddings(m) => Command::ExportEmbeddings {
            manifest: m.manifest,
        },
        Sub::BuildMetagraph(f) => Command::BuildMetagraph {
            manifest: f.manifest.manifest,
            features: f.features,
        },
        Sub::TrainSage => Command::TrainSage,
        Sub::FitHead(f) => Command::FitHead {
            manifest: f.manifest.manifest,
            features: f.features,
        },
        Sub::Evaluate { features, model } => Command::Evaluate {
            manifest: features.manifest.manifest,
            features: features.features,
            model: match model {
                ModelArg::Head => EvalModel::Head,
                ModelArg::Sage => EvalModel::Sage,
            },
        },
        Sub::Cv { features, .. } => Command::Cv {
            manifest: features.manifest.manifest,
            features: features.features,
        },
    }
}

fn run(cli: Cli) -> geoscatt::Result<()> {
    let cfg = build_config(&cli)?;
    cfg.seed()?;
    if cfg.run.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global();
    }
    let pipeline = Pipeline::new(&cfg)?;
    let outcome = pipeline.run(&command(cli.command))?;
    println!("{}", outcome.message);
    for p in &outcome.outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if !usage {
                return ExitCode::SUCCESS;
            }
            eprintln!("error category: usage");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("error category: {}", e.category());
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dhbn::harness::{
    cross_validate, evaluate, ingest, load_bundle, parse_folds, recognize, save_bundle,
    segment_word, select_smooth_width, sweep, synthesize, train_lexicon, Config, Dataset, Fold,
    HarnessError, SweepAxis, SweepOptions, SMOOTH_WIDTH_CANDIDATES,
};
use dhbn::imaging::{load_image, BinaryImage};

#[derive(Parser)]
#[command(
    name = "dhbn",
    version,
    about = "Handwritten word recognition with dynamic hierarchical Bayesian networks"
)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (or file, for `segment --debug`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic word corpus with a manifest.
    Synth {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        per_class: usize,
    },
    /// Train a codebook and one model per class; writes a bundle to --out.
    Train {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Manifest path; defaults to <data>/manifest.tsv.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "ab")]
        folds: String,
        /// Pick the smoothing width on this fold before training.
        #[arg(long)]
        select_width_on: Option<Fold>,
    },
    /// Evaluate a bundle on held-out folds; writes CSV reports to --out.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "d")]
        folds: String,
    },
    /// Four-fold leave-one-out cross-validation.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Retrain and evaluate over one parameter axis.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// cells, states, codebook or smooth_width.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values; defaults to the axis's standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        #[arg(long, default_value = "ab")]
        train: String,
        #[arg(long, default_value = "c")]
        eval: String,
    },
    /// Rank the lexicon classes for one image.
    Recognize {
        #[arg(long)]
        bundle: PathBuf,
        image: PathBuf,
    },
    /// Print the character intervals of one image.
    Segment {
        image: PathBuf,
        /// Write the canonical image with cut columns marked in grey.
        #[arg(long)]
        debug: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_dataset(data: &Path, manifest: Option<&PathBuf>) -> Result<Dataset, HarnessError> {
    let manifest = manifest
        .cloned()
        .unwrap_or_else(|| data.join("manifest.tsv"));
    ingest(data, &manifest)
}

fn folds(s: &str) -> Result<Vec<Fold>, HarnessError> {
    parse_folds(s).map_err(HarnessError::Config)
}

fn out_dir(cli: &Cli) -> Result<&Path, HarnessError> {
    let dir = cli
        .out
        .as_deref()
        .ok_or_else(|| HarnessError::Config("--out is required".into()))?;
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::IoFailure {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Synth { classes, per_class } => {
            let dir = out_dir(&cli)?;
            let ds = synthesize(*classes, *per_class, cfg.seed, dir)?;
            println!(
                "wrote {} images and {}",
                ds.len(),
                dir.join("manifest.tsv").display()
            );
        }
        Command::Train {
            data,
            manifest,
            folds: f,
            select_width_on,
        } => {
            let ds = load_dataset(data, manifest.as_ref())?;
            if let Some(fold) = select_width_on {
                let (w, table) =
                    select_smooth_width(&ds, &[*fold], &cfg, &SMOOTH_WIDTH_CANDIDATES)?;
                for (width, agreement) in table {
                    println!("smooth.width {width}: segmentation agreement {agreement:.4}");
                }
                println!("selected smooth.width = {w}");
                cfg.smooth_width = w;
            }
            let trained = train_lexicon(&ds, &folds(f)?, &cfg)?;
            let dir = out_dir(&cli)?;
            save_bundle(dir, &cfg, &trained.codebook, &trained.lexicon)?;
            println!(
                "k-means: {} iterations, distortion {:.6}",
                trained.kmeans.iterations,
                trained
                    .kmeans
                    .distortion
                    .last()
                    .copied()
                    .unwrap_or(f64::NAN)
            );
            for (label, report) in &trained.em {
                println!(
                    "{label}: {} EM iterations, log-likelihood {:.4} -> {:.4}",
                    report.history.len(),
                    report.initial_loglik,
                    report
                        .history
                        .last()
                        .copied()
                        .unwrap_or(report.initial_loglik)
                );
            }
            println!("bundle written to {}", dir.display());
        }
        Command::Evaluate {
            bundle,
            data,
            manifest,
            folds: f,
        } => {
            let b = load_bundle(bundle)?;
            let ds = load_dataset(data, manifest.as_ref())?;
            let report = evaluate(&b.lexicon, &b.codebook, &ds, &folds(f)?, &b.config)?;
            print!("{}", report.summary_csv());
            if let Some(dir) = cli.out.is_some().then(|| out_dir(&cli)).transpose()? {
                write(&dir.join("summary.csv"), &report.summary_csv())?;
                write(&dir.join("confusion.csv"), &report.confusion_csv())?;
                write(&dir.join("pr_curve.csv"), &report.pr_csv())?;
                write(&dir.join("predictions.csv"), &report.predictions_csv())?;
            }
        }
        Command::Crossval { data, manifest } => {
            let ds = load_dataset(data, manifest.as_ref())?;
            let report = cross_validate(&ds, &cfg)?;
            print!("{}", report.to_csv());
            if let Some(dir) = cli.out.is_some().then(|| out_dir(&cli)).transpose()? {
                write(&dir.join("crossval.csv"), &report.to_csv())?;
            }
        }
        Command::Sweep {
            data,
            manifest,
            axis,
            values,
            train,
            eval,
        } => {
            let ds = load_dataset(data, manifest.as_ref())?;
            let values = if values.is_empty() {
                axis.default_values()
            } else {
                values.clone()
            };
            let opts = SweepOptions {
                train: folds(train)?,
                eval: folds(eval)?,
                ..SweepOptions::default()
            };
            let table = sweep(&ds, &cfg, *axis, &values, &opts)?;
            print!("{}", table.to_csv());
            if let Some((v, r)) = table.best() {
                println!("best {axis} = {v} (rate {r:.4})");
            }
            if let Some(dir) = cli.out.is_some().then(|| out_dir(&cli)).transpose()? {
                write(&dir.join(format!("sweep_{axis}.csv")), &table.to_csv())?;
            }
        }
        Command::Recognize { bundle, image } => {
            let b = load_bundle(bundle)?;
            let img = load_image(image).map_err(|source| HarnessError::Imaging {
                word_id: image.display().to_string(),
                source,
            })?;
            let ranked = recognize(&b.lexicon, &b.codebook, &img, &b.config)?;
            println!("label,loglik");
            for (label, ll) in ranked {
                println!("{label},{ll:.6}");
            }
        }
        Command::Segment { image, debug } => {
            let wrap = |source| HarnessError::Imaging {
                word_id: image.display().to_string(),
                source,
            };
            let img = load_image(image).map_err(wrap)?;
            let seg = segment_word(&img, &cfg).map_err(wrap)?;
            println!("start,end");
            for (s, e) in &seg.bounds.intervals {
                println!("{s},{e}");
            }
            if let Some(path) = debug {
                write_bytes(path, &debug_pgm(&seg.canonical, &seg.bounds.intervals))?;
            }
        }
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}

/// P5 image: ink black, background white, interval edges grey.
fn debug_pgm(img: &BinaryImage, intervals: &[(usize, usize)]) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut marked = vec![false; w];
    for &(s, e) in intervals {
        marked[s] = true;
        marked[e - 1] = true;
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for (c, &edge) in marked.iter().enumerate() {
            out.push(match (img.get(r, c), edge) {
                (true, _) => 0,
                (false, true) => 160,
                (false, false) => 255,
            });
        }
    }
    out
}

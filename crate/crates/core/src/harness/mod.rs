//! Experiment harness: configuration, datasets, the synthetic corpus,
//! training, evaluation and trained-system bundles.

mod bundle;
mod config;
mod dataset;
mod eval;
mod pipeline;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::dhbn::DhbnError;
use crate::imaging::ImagingError;
use crate::persist::PersistError;
use crate::quantize::QuantizeError;

pub use bundle::{load_bundle, save_bundle, Bundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use config::Config;
pub use dataset::{ingest, parse_folds, parse_manifest, Dataset, Fold, Sample};
pub use eval::{
    cross_validate, evaluate, fold_scheme, mean_rate, precision_recall, segmentation_agreement,
    select_smooth_width, sweep, CrossValReport, EvalReport, FoldResult, FoldSplit, PrPoint,
    Prediction, SweepAxis, SweepOptions, SweepTable, SMOOTH_WIDTH_CANDIDATES,
};
pub use pipeline::{
    batch_features, recognize, sample_features, segment_word, train_lexicon, word_features,
    Segmentation, TrainedSystem,
};
pub use synth::{class_strings, prototype_contains, render_word, synthesize, PROTOTYPE_COUNT};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    MalformedManifest { line: usize, reason: String },
    #[error("image listed in manifest does not exist: {0}")]
    MissingImage(PathBuf),
    #[error("{word_id}: {source}")]
    Imaging {
        word_id: String,
        #[source]
        source: ImagingError,
    },
    #[error("{context}: {source}")]
    Quantize {
        context: String,
        #[source]
        source: QuantizeError,
    },
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: DhbnError,
    },
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("class `{0}` has no training samples")]
    ClassTooSmall(String),
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("label `{0}` is not in the lexicon")]
    UnknownLabel(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("fold {0} has no samples")]
    MissingFold(Fold),
}

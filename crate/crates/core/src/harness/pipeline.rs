//! Image → features → symbols → lexicon training.

use rayon::prelude::*;

use super::config::Config;
use super::dataset::{Dataset, Fold, Sample};
use super::HarnessError;
use crate::dhbn::{em_train, EmReport, Lexicon, WordModel};
use crate::features::{extract_features, FeatureVector, WordFeatures};
use crate::imaging::{
    load_image, preprocess, remove_diacritics, segment_characters_with_min_width, smooth_histogram,
    split_grid, vertical_projection, BinaryImage, CellGrid, ImagingError, ProjectionHistogram,
    SegmentBounds,
};
use crate::quantize::{kmeans_fit, Codebook, KMeansTrace, SymbolSequence};

/// Every intermediate of the segmentation stage.
#[derive(Clone, Debug)]
pub struct Segmentation {
    /// Cropped and rescaled word, diacritics included.
    pub canonical: BinaryImage,
    pub stripped: BinaryImage,
    pub smoothed: ProjectionHistogram,
    pub bounds: SegmentBounds,
    pub grid: CellGrid,
}

/// Canonicalises, strips dots, cuts at projection valleys and splits the
/// un-stripped word into the cell grid.
pub fn segment_word(img: &BinaryImage, cfg: &Config) -> Result<Segmentation, ImagingError> {
    let canonical = preprocess(img, cfg.canvas_height, cfg.canvas_width)?;
    let stripped = remove_diacritics(&canonical, cfg.diacritic_area_ratio)?;
    let smoothed = smooth_histogram(&vertical_projection(&stripped), cfg.smooth_width)?;
    // blocks must be at least one column per cell
    let bounds = segment_characters_with_min_width(&smoothed, cfg.valley_frac, cfg.cells.max(2))?;
    let grid = split_grid(&canonical, &bounds, cfg.frames, cfg.cells)?;
    Ok(Segmentation {
        canonical,
        stripped,
        smoothed,
        bounds,
        grid,
    })
}

pub fn word_features(img: &BinaryImage, cfg: &Config) -> Result<WordFeatures, ImagingError> {
    let seg = segment_word(img, cfg)?;
    Ok(extract_features(&seg.grid, cfg.zernike_order))
}

pub fn sample_features(sample: &Sample, cfg: &Config) -> Result<WordFeatures, HarnessError> {
    let wrap = |source| HarnessError::Imaging {
        word_id: sample.word_id.clone(),
        source,
    };
    let img = load_image(&sample.image).map_err(wrap)?;
    word_features(&img, cfg).map_err(wrap)
}

/// Features for many samples, computed in parallel, returned in input order.
pub fn batch_features(
    samples: &[&Sample],
    cfg: &Config,
) -> Result<Vec<WordFeatures>, HarnessError> {
    samples
        .par_iter()
        .map(|s| sample_features(s, cfg))
        .collect()
}

/// Result of [`train_lexicon`] with training diagnostics.
#[derive(Clone, Debug)]
pub struct TrainedSystem {
    pub lexicon: Lexicon,
    pub codebook: Codebook,
    pub kmeans: KMeansTrace,
    pub em: Vec<(String, EmReport)>,
}

/// Deterministic per-class seed.
fn class_seed(seed: u64, class: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(class as u64 + 1)
}

/// Full training run on the samples in `folds`: one shared codebook and one
/// EM-trained model per class.
pub fn train_lexicon(
    ds: &Dataset,
    folds: &[Fold],
    cfg: &Config,
) -> Result<TrainedSystem, HarnessError> {
    cfg.validate()?;
    let labels = ds.labels();
    let train: Vec<&Sample> = ds.in_folds(folds).collect();
    for label in &labels {
        if !train.iter().any(|s| &s.label == label) {
            return Err(HarnessError::ClassTooSmall(label.clone()));
        }
    }
    let features = batch_features(&train, cfg)?;
    let vectors: Vec<FeatureVector> = features
        .iter()
        .flat_map(|w| w.iter_vectors().cloned())
        .collect();
    let (codebook, kmeans) =
        kmeans_fit(&vectors, &cfg.kmeans()).map_err(|source| HarnessError::Quantize {
            context: format!("fitting codebook on {} training cells", vectors.len()),
            source,
        })?;
    let sequences: Vec<SymbolSequence> = features
        .iter()
        .zip(&train)
        .map(|(f, s)| {
            codebook
                .quantize_word(f)
                .map_err(|source| HarnessError::Quantize {
                    context: format!("quantising {}", s.word_id),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;

    let trained = labels
        .par_iter()
        .enumerate()
        .map(|(class, label)| {
            let class_seqs: Vec<SymbolSequence> = train
                .iter()
                .zip(&sequences)
                .filter(|(s, _)| &s.label == label)
                .map(|(_, q)| q.clone())
                .collect();
            let context = |source| HarnessError::Model {
                context: format!("class `{label}`"),
                source,
            };
            let init =
                WordModel::init(cfg.model_shape(), cfg.topology, class_seed(cfg.seed, class))
                    .map_err(context)?;
            let (model, report) = em_train(&init, &class_seqs, &cfg.em()).map_err(context)?;
            Ok((label.clone(), model, report))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut entries = Vec::with_capacity(trained.len());
    let mut em = Vec::with_capacity(trained.len());
    for (label, model, report) in trained {
        entries.push((label.clone(), model));
        em.push((label, report));
    }
    let lexicon = Lexicon::new(entries).map_err(|source| HarnessError::Model {
        context: "assembling lexicon".into(),
        source,
    })?;
    Ok(TrainedSystem {
        lexicon,
        codebook,
        kmeans,
        em,
    })
}

/// Ranked `(label, log-likelihood)` for one word image.
pub fn recognize(
    lexicon: &Lexicon,
    codebook: &Codebook,
    img: &BinaryImage,
    cfg: &Config,
) -> Result<Vec<(String, f64)>, HarnessError> {
    let feats = word_features(img, cfg).map_err(|source| HarnessError::Imaging {
        word_id: "<input>".into(),
        source,
    })?;
    let seq = codebook
        .quantize_word(&feats)
        .map_err(|source| HarnessError::Quantize {
            context: "quantising input".into(),
            source,
        })?;
    lexicon
        .classify(&seq)
        .map_err(|source| HarnessError::Model {
            context: "classifying input".into(),
            source,
        })
}

//! Python bindings for the `dhbn` word recogniser.

use std::path::{Path, PathBuf};

use dhbn::dhbn::{
    em_train, forward_loglik, viterbi_decode, EmConfig, Lexicon, ModelShape, Topology, WordModel,
};
use dhbn::harness::{self, Config, Fold};
use dhbn::imaging::{self, BinaryImage};
use dhbn::quantize::{Codebook, SymbolSequence};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: harness::HarnessError) -> PyErr {
    match e {
        harness::HarnessError::IoFailure { .. } | harness::HarnessError::MissingImage(_) => {
            PyOSError::new_err(e.to_string())
        }
        e => value_err(e),
    }
}

fn config(path: Option<PathBuf>) -> PyResult<Config> {
    path.map_or_else(
        || Ok(Config::default()),
        |p| Config::load(&p).map_err(harness_err),
    )
}

fn folds(tags: &str) -> PyResult<Vec<Fold>> {
    harness::parse_folds(tags).map_err(value_err)
}

fn sequence(slices: Vec<Vec<usize>>) -> SymbolSequence {
    SymbolSequence::new(slices)
}

/// Binary word image; `True` is ink.
#[pyclass(name = "Image", skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: BinaryImage,
}

#[pymethods]
impl PyImage {
    /// Builds an image from text rows where `#` marks ink.
    #[staticmethod]
    fn from_rows(rows: Vec<String>) -> PyResult<Self> {
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        Ok(Self {
            inner: BinaryImage::from_ascii(&rows).map_err(value_err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn foreground_count(&self) -> usize {
        self.inner.foreground_count()
    }

    fn to_rows(&self) -> Vec<String> {
        (0..self.inner.height())
            .map(|r| {
                (0..self.inner.width())
                    .map(|c| if self.inner.get(r, c) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    fn save_pgm(&self, path: PathBuf) -> PyResult<()> {
        imaging::write_pgm(&self.inner, path).map_err(|e| PyOSError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Image({}x{}, ink={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.foreground_count()
        )
    }
}

#[pyfunction]
fn load_image(path: PathBuf) -> PyResult<PyImage> {
    let inner = imaging::load_image(&path).map_err(|e| match e {
        imaging::ImagingError::MissingFile(_) | imaging::ImagingError::Io { .. } => {
            PyOSError::new_err(e.to_string())
        }
        e => value_err(e),
    })?;
    Ok(PyImage { inner })
}

/// Character column intervals `[(start, end), ...]` of a word image.
#[pyfunction]
#[pyo3(signature = (image, config_path=None))]
fn segment(
    image: PyRef<'_, PyImage>,
    config_path: Option<PathBuf>,
) -> PyResult<Vec<(usize, usize)>> {
    let cfg = config(config_path)?;
    let seg = harness::segment_word(&image.inner, &cfg).map_err(value_err)?;
    Ok(seg.bounds.intervals)
}

/// Per-cell feature vectors of a word, `[block][frame * cells + cell][component]`.
#[pyfunction]
#[pyo3(signature = (image, config_path=None))]
fn features(
    image: PyRef<'_, PyImage>,
    config_path: Option<PathBuf>,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let cfg = config(config_path)?;
    let f = harness::word_features(&image.inner, &cfg).map_err(value_err)?;
    Ok(f.blocks
        .into_iter()
        .map(|b| b.into_iter().map(|v| v.0).collect())
        .collect())
}

/// Dynamic hierarchical Bayesian network for one word class.
#[pyclass(name = "WordModel", skip_from_py_object)]
#[derive(Clone)]
struct PyWordModel {
    inner: WordModel,
}

#[pymethods]
impl PyWordModel {
    #[new]
    #[pyo3(signature = (n_root, n_sub, n_frames, n_cells, n_symbols, topology="left-right", seed=0))]
    fn new(
        n_root: usize,
        n_sub: usize,
        n_frames: usize,
        n_cells: usize,
        n_symbols: usize,
        topology: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let topology: Topology = topology.parse().map_err(value_err)?;
        let shape = ModelShape::new(n_root, n_sub, n_frames, n_cells, n_symbols);
        Ok(Self {
            inner: WordModel::init(shape, topology, seed).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: WordModel::from_text(text).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi.clone()
    }

    #[getter]
    fn trans(&self) -> Vec<Vec<f64>> {
        self.inner.trans.clone()
    }

    #[getter]
    fn emit(&self) -> Vec<Vec<f64>> {
        self.inner.emit.clone()
    }

    #[getter]
    fn frame_cpt(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.frame_cpt.clone()
    }

    fn slice_loglik(&self, slice: Vec<usize>, root_state: usize) -> PyResult<f64> {
        self.inner
            .slice_emission_loglik(&slice, root_state)
            .map_err(value_err)
    }

    fn forward_loglik(&self, slices: Vec<Vec<usize>>) -> PyResult<f64> {
        forward_loglik(&self.inner, &sequence(slices)).map_err(value_err)
    }

    /// `(root path, log-probability)` of the best path.
    fn viterbi(&self, slices: Vec<Vec<usize>>) -> PyResult<(Vec<usize>, f64)> {
        viterbi_decode(&self.inner, &sequence(slices)).map_err(value_err)
    }

    /// `(root path, slices)` drawn from the model.
    #[pyo3(signature = (length, seed=0))]
    fn sample(&self, length: usize, seed: u64) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (path, seq) = self.inner.sample(length, &mut rng);
        (path, seq.slices)
    }

    /// Runs EM; returns `(trained model, log-likelihood history)`.
    #[pyo3(signature = (sequences, max_iter=100, tol=1e-4))]
    fn train(
        &self,
        sequences: Vec<Vec<Vec<usize>>>,
        max_iter: usize,
        tol: f64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let seqs: Vec<SymbolSequence> = sequences.into_iter().map(sequence).collect();
        let (model, report) =
            em_train(&self.inner, &seqs, &EmConfig { max_iter, tol }).map_err(value_err)?;
        Ok((Self { inner: model }, report.history))
    }
}

/// A trained system loaded from a bundle directory.
#[pyclass(name = "Recognizer", skip_from_py_object)]
struct PyRecognizer {
    config: Config,
    codebook: Codebook,
    lexicon: Lexicon,
}

#[pymethods]
impl PyRecognizer {
    #[staticmethod]
    fn load(bundle_dir: PathBuf) -> PyResult<Self> {
        let b = harness::load_bundle(&bundle_dir).map_err(harness_err)?;
        Ok(Self {
            config: b.config,
            codebook: b.codebook,
            lexicon: b.lexicon,
        })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.lexicon.labels().map(str::to_string).collect()
    }

    /// Ranked `[(label, log-likelihood), ...]`, best first.
    fn recognize(&self, image: PyRef<'_, PyImage>) -> PyResult<Vec<(String, f64)>> {
        harness::recognize(&self.lexicon, &self.codebook, &image.inner, &self.config)
            .map_err(harness_err)
    }

    /// Ranks an already quantised sequence.
    fn classify(&self, slices: Vec<Vec<usize>>) -> PyResult<Vec<(String, f64)>> {
        self.lexicon.classify(&sequence(slices)).map_err(value_err)
    }
}

/// Writes a synthetic corpus and returns the number of images.
#[pyfunction]
#[pyo3(signature = (out_dir, n_classes=5, per_class=40, seed=0))]
fn synthesize(out_dir: PathBuf, n_classes: usize, per_class: usize, seed: u64) -> PyResult<usize> {
    Ok(harness::synthesize(n_classes, per_class, seed, &out_dir)
        .map_err(harness_err)?
        .len())
}

fn dataset(data_dir: &Path) -> PyResult<harness::Dataset> {
    harness::ingest(data_dir, &data_dir.join("manifest.tsv")).map_err(harness_err)
}

/// Trains on `folds` of the corpus in `data_dir` and writes a bundle.
#[pyfunction]
#[pyo3(signature = (data_dir, bundle_dir, fold_tags="ab", config_path=None))]
fn train(
    data_dir: PathBuf,
    bundle_dir: PathBuf,
    fold_tags: &str,
    config_path: Option<PathBuf>,
) -> PyResult<Vec<String>> {
    let cfg = config(config_path)?;
    let ds = dataset(&data_dir)?;
    let t = harness::train_lexicon(&ds, &folds(fold_tags)?, &cfg).map_err(harness_err)?;
    harness::save_bundle(&bundle_dir, &cfg, &t.codebook, &t.lexicon).map_err(harness_err)?;
    Ok(t.lexicon.labels().map(str::to_string).collect())
}

/// Recognition rate of a bundle on `folds` of the corpus in `data_dir`.
#[pyfunction]
#[pyo3(signature = (bundle_dir, data_dir, fold_tags="d"))]
fn evaluate(bundle_dir: PathBuf, data_dir: PathBuf, fold_tags: &str) -> PyResult<f64> {
    let b = harness::load_bundle(&bundle_dir).map_err(harness_err)?;
    let ds = dataset(&data_dir)?;
    let report = harness::evaluate(&b.lexicon, &b.codebook, &ds, &folds(fold_tags)?, &b.config)
        .map_err(harness_err)?;
    Ok(report.recognition_rate)
}

#[pyfunction]
fn mean_rate(rates: Vec<f64>) -> f64 {
    harness::mean_rate(&rates)
}

#[pymodule]
fn pydhbn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyWordModel>()?;
    m.add_class::<PyRecognizer>()?;
    m.add_function(wrap_pyfunction!(load_image, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(mean_rate, m)?)?;
    Ok(())
}

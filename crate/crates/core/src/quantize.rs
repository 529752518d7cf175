//! k-means codebook over standardised feature vectors and the mapping from
//! cells to discrete symbols.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{FeatureVector, Standardizer, WordFeatures};
use crate::persist::{self, PersistError};

/// Codebook sizes explored by the codebook sweep.
pub const CANDIDATE_CODEBOOK_SIZES: [usize; 8] = [6, 18, 24, 36, 48, 58, 68, 100];

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("need at least {k} distinct vectors, found {distinct}")]
    TooFewVectors { k: usize, distinct: usize },
    #[error("codebook size must be at least 1")]
    InvalidK,
    #[error("dimension mismatch: codebook has d = {expected}, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite feature value")]
    NonFinite,
    #[error(
        "word features are not rectangular: block {block} has {got} cells, expected {expected}"
    )]
    Ragged {
        block: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    /// Centroids in standardised coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub standardizer: Standardizer,
}

/// Per-slice symbol arrays of one word; `slices[t][f * C + c]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolSequence {
    pub slices: Vec<Vec<usize>>,
}

impl SymbolSequence {
    pub fn new(slices: Vec<Vec<usize>>) -> Self {
        Self { slices }
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub standardize: bool,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 100,
            tol: 1e-6,
            standardize: true,
        }
    }
}

/// Distortion after every assignment step, plus convergence status.
#[derive(Clone, Debug, Default)]
pub struct KMeansTrace {
    pub distortion: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeded: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; the lowest index wins ties.
fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            // unreachable with ≥ k distinct points
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_fit(
    vectors: &[FeatureVector],
    cfg: &KMeansConfig,
) -> Result<(Codebook, KMeansTrace), QuantizeError> {
    if cfg.k == 0 {
        return Err(QuantizeError::InvalidK);
    }
    let dim = vectors.first().map_or(0, FeatureVector::len);
    for v in vectors {
        if v.len() != dim {
            return Err(QuantizeError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if v.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(QuantizeError::NonFinite);
        }
    }
    let standardizer = if cfg.standardize {
        Standardizer::fit(vectors.iter().map(FeatureVector::as_slice), dim)
    } else {
        Standardizer::identity(dim)
    };
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| standardizer.apply(v.as_slice()))
        .collect();
    let distinct = count_distinct(&points);
    if distinct < cfg.k {
        return Err(QuantizeError::TooFewVectors { k: cfg.k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = kmeans_pp_init(&points, cfg.k, &mut rng);
    let mut trace = KMeansTrace::default();
    let mut assignment = vec![0usize; points.len()];
    let mut dist = vec![0.0; points.len()];

    for _ in 0..cfg.max_iter {
        let mut distortion = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (a, d) = nearest(&centroids, p);
            assignment[i] = a;
            dist[i] = d;
            distortion += d;
        }
        if let Some(&prev) = trace.distortion.last() {
            debug_assert!(
                distortion <= prev + 1e-9 * prev.max(1.0),
                "Lloyd distortion increased: {prev} -> {distortion}"
            );
        }
        trace.distortion.push(distortion);
        trace.iterations += 1;

        let mut sums = vec![vec![0.0; dim]; cfg.k];
        let mut counts = vec![0usize; cfg.k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..cfg.k {
            let updated = if counts[j] > 0 {
                sums[j].iter().map(|s| s / counts[j] as f64).collect()
            } else {
                // farthest point from its own centroid takes over the empty cluster
                let far = (0..points.len())
                    .fold(0, |best, i| if dist[i] > dist[best] { i } else { best });
                dist[far] = 0.0;
                trace.reseeded += 1;
                points[far].clone()
            };
            shift = shift.max(sq_dist(&updated, &centroids[j]).sqrt());
            centroids[j] = updated;
        }
        if shift < cfg.tol {
            trace.converged = true;
            break;
        }
    }

    Ok((
        Codebook {
            centroids,
            standardizer,
        },
        trace,
    ))
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Centroid `i` mapped back to raw feature coordinates.
    pub fn centroid_raw(&self, i: usize) -> Vec<f64> {
        self.standardizer.invert(&self.centroids[i])
    }

    pub fn assign_symbol(&self, v: &FeatureVector) -> Result<usize, QuantizeError> {
        if v.len() != self.dim() {
            return Err(QuantizeError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(nearest(&self.centroids, &self.standardizer.apply(v.as_slice())).0)
    }

    /// Sum of squared standardised distances to the assigned centroids.
    pub fn distortion(&self, vectors: &[FeatureVector]) -> f64 {
        vectors
            .iter()
            .map(|v| nearest(&self.centroids, &self.standardizer.apply(v.as_slice())).1)
            .sum()
    }

    pub fn quantize_word(&self, features: &WordFeatures) -> Result<SymbolSequence, QuantizeError> {
        let expected = features.frames * features.cells;
        let slices = features
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| {
                if block.len() != expected {
                    return Err(QuantizeError::Ragged {
                        block: b,
                        expected,
                        got: block.len(),
                    });
                }
                block.iter().map(|v| self.assign_symbol(v)).collect()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SymbolSequence { slices })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{CODEBOOK_MAGIC} {CODEBOOK_VERSION} {} {}\n",
            self.k(),
            self.dim()
        );
        out.push_str("mean ");
        persist::push_reals(&mut out, &self.standardizer.mean);
        out.push_str("std ");
        persist::push_reals(&mut out, &self.standardizer.std);
        for c in &self.centroids {
            persist::push_reals(&mut out, c);
        }
        persist::seal(out)
    }

    pub fn from_text(text: &str) -> Result<Self, PersistError> {
        persist::check_header(text.lines().next(), CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
        let body = persist::unseal(text)?;
        let mut lines = body.lines();
        let header = persist::check_header(lines.next(), CODEBOOK_MAGIC, CODEBOOK_VERSION)?;
        let k: usize = persist::parse_field(header.first().copied(), "K")?;
        let d: usize = persist::parse_field(header.get(1).copied(), "d")?;
        if k == 0 {
            return Err(PersistError::Malformed("K must be positive".into()));
        }
        let tagged = |line: Option<&str>, tag: &str| -> Result<Vec<f64>, PersistError> {
            let rest = line
                .and_then(|l| l.strip_prefix(tag))
                .ok_or_else(|| PersistError::Malformed(format!("missing `{}` line", tag.trim())))?;
            persist::parse_reals(Some(rest), d, tag.trim())
        };
        let mean = tagged(lines.next(), "mean ")?;
        let std = tagged(lines.next(), "std ")?;
        if std.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(PersistError::Malformed(
                "std components must be positive".into(),
            ));
        }
        let centroids = (0..k)
            .map(|i| persist::parse_reals(lines.next(), d, &format!("centroid {i}")))
            .collect::<Result<Vec<_>, _>>()?;
        if lines.next().is_some() {
            return Err(PersistError::Malformed(
                "trailing data after centroids".into(),
            ));
        }
        Ok(Self {
            centroids,
            standardizer: Standardizer { mean, std },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        persist::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        let text = persist::read_sealed(path)?;
        Self::from_text(&text).map_err(|e| match e {
            PersistError::ChecksumMismatch(None) => {
                PersistError::ChecksumMismatch(Some(path.into()))
            }
            e => e,
        })
    }
}

pub const CODEBOOK_MAGIC: &str = "DHBN-CB";
pub const CODEBOOK_VERSION: &str = "v1";

//! Recognition metrics, cross-validation and parameter sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::Config;
use super::dataset::{Dataset, Fold, Sample};
use super::pipeline::{batch_features, segment_word, train_lexicon};
use super::HarnessError;
use crate::dhbn::Lexicon;
use crate::imaging::load_image;
use crate::quantize::{Codebook, CANDIDATE_CODEBOOK_SIZES};

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub word_id: String,
    pub truth: String,
    pub ranked: Vec<(String, f64)>,
}

impl Prediction {
    pub fn top(&self) -> &str {
        &self.ranked[0].0
    }

    pub fn is_correct(&self) -> bool {
        self.top() == self.truth
    }

    /// Log-likelihood gap between the best and second-best class; `+inf`
    /// when there is no finite runner-up.
    pub fn margin(&self) -> f64 {
        match self.ranked.get(1) {
            Some((_, second)) if second.is_finite() => self.ranked[0].1 - second,
            _ => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    /// Interpolated precision: best raw precision at this or any lower threshold.
    pub precision: f64,
    pub raw_precision: f64,
    pub recall: f64,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub labels: Vec<String>,
    /// `confusion[truth][predicted]`, both in lexicon order.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_rate: Vec<f64>,
    pub recognition_rate: f64,
    /// Thresholds in descending order.
    pub pr_curve: Vec<PrPoint>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// `label,samples,correct,rate` per class plus an `overall` row.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("label,samples,correct,rate\n");
        for (i, label) in self.labels.iter().enumerate() {
            let n: usize = self.confusion[i].iter().sum();
            let _ = writeln!(
                out,
                "{label},{n},{},{:.6}",
                self.confusion[i][i], self.per_class_rate[i]
            );
        }
        let _ = writeln!(
            out,
            "overall,{},{},{:.6}",
            self.total(),
            self.correct(),
            self.recognition_rate
        );
        out
    }

    /// Square matrix with a `truth\predicted` header row.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.confusion) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn pr_csv(&self) -> String {
        let mut out = String::from("threshold,precision,raw_precision,recall,accepted\n");
        for p in &self.pr_curve {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6},{}",
                p.threshold, p.precision, p.raw_precision, p.recall, p.accepted
            );
        }
        out
    }

    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("word_id,truth,predicted,loglik,margin\n");
        for p in &self.predictions {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6}",
                p.word_id,
                p.truth,
                p.top(),
                p.ranked[0].1,
                p.margin()
            );
        }
        out
    }
}

/// Precision/recall over an acceptance threshold on the top-1 margin.
/// Recall is relative to all evaluated samples, so at the lowest threshold
/// it equals the recognition rate.
pub fn precision_recall(predictions: &[Prediction], points: usize) -> Vec<PrPoint> {
    let margins: Vec<f64> = predictions.iter().map(Prediction::margin).collect();
    let finite: Vec<f64> = margins.iter().copied().filter(|m| m.is_finite()).collect();
    let (lo, hi) = if finite.is_empty() {
        (0.0, 1.0)
    } else {
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let points = points.max(2);
    // descending from the largest margin to just below the smallest
    let below = lo - (hi - lo) / (points - 1) as f64;
    let mut thresholds: Vec<f64> = (0..points)
        .map(|i| hi - (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    thresholds.push(below);

    let total = predictions.len().max(1) as f64;
    let mut curve: Vec<PrPoint> = thresholds
        .iter()
        .map(|&t| {
            let (mut accepted, mut correct) = (0usize, 0usize);
            for (p, &m) in predictions.iter().zip(&margins) {
                if m >= t {
                    accepted += 1;
                    correct += usize::from(p.is_correct());
                }
            }
            let raw = if accepted == 0 {
                1.0
            } else {
                correct as f64 / accepted as f64
            };
            PrPoint {
                threshold: t,
                precision: raw,
                raw_precision: raw,
                recall: correct as f64 / total,
                accepted,
            }
        })
        .collect();
    // interpolate from the low-threshold end upwards
    let mut best: f64 = 0.0;
    for p in curve.iter_mut().rev() {
        best = best.max(p.raw_precision);
        p.precision = best;
    }
    curve
}

/// Classifies every sample of `folds` against the lexicon.
pub fn evaluate(
    lex: &Lexicon,
    cb: &Codebook,
    ds: &Dataset,
    folds: &[Fold],
    cfg: &Config,
) -> Result<EvalReport, HarnessError> {
    let samples: Vec<&Sample> = ds.in_folds(folds).collect();
    if samples.is_empty() {
        return Err(HarnessError::EmptyEvalSet);
    }
    let labels: Vec<String> = lex.labels().map(str::to_string).collect();
    let index_of = |label: &str| labels.iter().position(|l| l == label);
    for s in &samples {
        if index_of(&s.label).is_none() {
            return Err(HarnessError::UnknownLabel(s.label.clone()));
        }
    }
    let features = batch_features(&samples, cfg)?;
    let predictions: Vec<Prediction> = samples
        .par_iter()
        .zip(features.par_iter())
        .map(|(s, f)| {
            let seq = cb
                .quantize_word(f)
                .map_err(|source| HarnessError::Quantize {
                    context: format!("quantising {}", s.word_id),
                    source,
                })?;
            let ranked = lex.classify(&seq).map_err(|source| HarnessError::Model {
                context: format!("classifying {}", s.word_id),
                source,
            })?;
            Ok(Prediction {
                word_id: s.word_id.clone(),
                truth: s.label.clone(),
                ranked,
            })
        })
        .collect::<Result<_, HarnessError>>()?;

    let n = labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for p in &predictions {
        let t = index_of(&p.truth).expect("checked above");
        let q = index_of(p.top()).expect("lexicon label");
        confusion[t][q] += 1;
    }
    let per_class_rate = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                0.0
            } else {
                row[i] as f64 / total as f64
            }
        })
        .collect();
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    let recognition_rate = correct as f64 / predictions.len() as f64;
    let pr_curve = precision_recall(&predictions, cfg.pr_points);
    Ok(EvalReport {
        labels,
        confusion,
        per_class_rate,
        recognition_rate,
        pr_curve,
        predictions,
    })
}

/// Train/test fold assignment for one cross-validation run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub train: Vec<Fold>,
    pub test: Fold,
}

/// Leave-one-fold-out in the order a, b, c, d held out.
pub fn fold_scheme() -> Vec<FoldSplit> {
    Fold::ALL
        .iter()
        .map(|&test| FoldSplit {
            train: Fold::ALL.iter().copied().filter(|&f| f != test).collect(),
            test,
        })
        .collect()
}

pub fn mean_rate(rates: &[f64]) -> f64 {
    rates.iter().sum::<f64>() / rates.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub split: FoldSplit,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    pub mean_rate: f64,
}

impl CrossValReport {
    pub fn rates(&self) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| f.report.recognition_rate)
            .collect()
    }

    /// `train,test,rate` rows (rates in percent, 4 decimals) and a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("train,test,rate_percent\n");
        for f in &self.folds {
            let train: String = f.split.train.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(
                out,
                "{train},{},{:.4}",
                f.split.test,
                100.0 * f.report.recognition_rate
            );
        }
        let _ = writeln!(out, "mean,,{:.4}", 100.0 * self.mean_rate);
        out
    }
}

pub fn cross_validate(ds: &Dataset, cfg: &Config) -> Result<CrossValReport, HarnessError> {
    for fold in Fold::ALL {
        if ds.count_in_fold(fold) == 0 {
            return Err(HarnessError::MissingFold(fold));
        }
    }
    let mut folds = Vec::with_capacity(4);
    for split in fold_scheme() {
        let trained = train_lexicon(ds, &split.train, cfg)?;
        let report = evaluate(&trained.lexicon, &trained.codebook, ds, &[split.test], cfg)?;
        folds.push(FoldResult { split, report });
    }
    let rates: Vec<f64> = folds.iter().map(|f| f.report.recognition_rate).collect();
    Ok(CrossValReport {
        mean_rate: mean_rate(&rates),
        folds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Cells,
    States,
    Codebook,
    SmoothWidth,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cells" => Ok(SweepAxis::Cells),
            "states" => Ok(SweepAxis::States),
            "codebook" => Ok(SweepAxis::Codebook),
            "smooth_width" | "smooth-width" => Ok(SweepAxis::SmoothWidth),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Cells => "cells",
            SweepAxis::States => "states",
            SweepAxis::Codebook => "codebook",
            SweepAxis::SmoothWidth => "smooth_width",
        })
    }
}

pub const SMOOTH_WIDTH_CANDIDATES: [usize; 8] = [3, 5, 7, 9, 11, 13, 15, 21];

impl SweepAxis {
    pub fn default_values(self) -> Vec<usize> {
        match self {
            SweepAxis::Cells => (2..=8).collect(),
            SweepAxis::States => (9..=25).collect(),
            SweepAxis::Codebook => CANDIDATE_CODEBOOK_SIZES.to_vec(),
            SweepAxis::SmoothWidth => SMOOTH_WIDTH_CANDIDATES.to_vec(),
        }
    }

    pub fn check(self, value: usize) -> Result<(), HarnessError> {
        let ok = match self {
            SweepAxis::Cells => (2..=8).contains(&value),
            SweepAxis::States => (9..=25).contains(&value),
            SweepAxis::Codebook => CANDIDATE_CODEBOOK_SIZES.contains(&value),
            SweepAxis::SmoothWidth => value % 2 == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::InvalidSweep(format!(
                "{value} is outside the {self} axis range"
            )))
        }
    }

    pub fn apply(self, cfg: &mut Config, value: usize) {
        match self {
            SweepAxis::Cells => cfg.cells = value,
            SweepAxis::States => cfg.states = value,
            SweepAxis::Codebook => cfg.codebook_size = value,
            SweepAxis::SmoothWidth => cfg.smooth_width = value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<(usize, f64)>,
}

impl SweepTable {
    /// Best row; the first one wins ties.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .copied()
            .fold(None, |best, row| match best {
                Some((_, r)) if r >= row.1 => best,
                _ => Some(row),
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},recognition_rate\n", self.axis);
        for (v, r) in &self.rows {
            let _ = writeln!(out, "{v},{r:.6}");
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub train: Vec<Fold>,
    pub eval: Vec<Fold>,
    /// Skip the per-axis range check.
    pub allow_out_of_range: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            train: vec![Fold::A, Fold::B],
            eval: vec![Fold::C],
            allow_out_of_range: false,
        }
    }
}

/// Retrains and re-evaluates once per value, all other settings fixed.
pub fn sweep(
    ds: &Dataset,
    cfg: &Config,
    axis: SweepAxis,
    values: &[usize],
    opts: &SweepOptions,
) -> Result<SweepTable, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::InvalidSweep("no sweep values".into()));
    }
    if !opts.allow_out_of_range {
        values.iter().try_for_each(|&v| axis.check(v))?;
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut run = cfg.clone();
        axis.apply(&mut run, value);
        run.validate()?;
        let trained = train_lexicon(ds, &opts.train, &run)?;
        let report = evaluate(&trained.lexicon, &trained.codebook, ds, &opts.eval, &run)?;
        rows.push((value, report.recognition_rate));
    }
    Ok(SweepTable { axis, rows })
}

/// Fraction of samples whose block count matches the target: the known
/// character count when the manifest has one, else the class's most common
/// count at that width.
pub fn segmentation_agreement(
    ds: &Dataset,
    folds: &[Fold],
    cfg: &Config,
) -> Result<f64, HarnessError> {
    let samples: Vec<&Sample> = ds.in_folds(folds).collect();
    if samples.is_empty() {
        return Err(HarnessError::EmptyEvalSet);
    }
    let counts: Vec<usize> = samples
        .par_iter()
        .map(|s| {
            let wrap = |source| HarnessError::Imaging {
                word_id: s.word_id.clone(),
                source,
            };
            let img = load_image(&s.image).map_err(wrap)?;
            Ok(segment_word(&img, cfg).map_err(wrap)?.bounds.len())
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut modal = std::collections::HashMap::new();
    for label in ds.labels() {
        let mut hist = std::collections::BTreeMap::new();
        for (s, &c) in samples.iter().zip(&counts) {
            if s.label == label {
                *hist.entry(c).or_insert(0usize) += 1;
            }
        }
        if let Some((&c, _)) = hist.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
            modal.insert(label, c);
        }
    }
    let hits = samples
        .iter()
        .zip(&counts)
        .filter(|(s, &c)| s.expected_blocks.or_else(|| modal.get(&s.label).copied()) == Some(c))
        .count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Picks the smoothing width with the best segmentation agreement on
/// `folds`; the smaller width wins ties.
pub fn select_smooth_width(
    ds: &Dataset,
    folds: &[Fold],
    cfg: &Config,
    candidates: &[usize],
) -> Result<(usize, Vec<(usize, f64)>), HarnessError> {
    let mut table = Vec::with_capacity(candidates.len());
    for &w in candidates {
        let mut run = cfg.clone();
        run.smooth_width = w;
        run.validate()?;
        table.push((w, segmentation_agreement(ds, folds, &run)?));
    }
    let best = table
        .iter()
        .fold(None, |best: Option<(usize, f64)>, &(w, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((w, a)),
        })
        .ok_or_else(|| HarnessError::InvalidSweep("no candidate widths".into()))?;
    Ok((best.0, table))
}

//! Dynamic hierarchical Bayesian network word models.
//!
//! Each time slice holds one root state `x_t` (the character position), one
//! hidden sub-state per horizontal frame drawn from `frame_cpt[f][x_t]`, and
//! `C` observed cell symbols per frame drawn from `emit[sub-state]`. Only the
//! root states are linked across slices, so after marginalising the
//! sub-states inside each slice the network is an HMM over root states with
//! emission
//!
//! ```text
//! b_j(Y_t) = ∏_f Σ_s frame_cpt[f][j][s] · ∏_c emit[s][y_{t,f,c}]
//! ```
//!
//! All inference runs in log space.

#![allow(clippy::needless_range_loop)]

mod inference;
mod io;
mod learn;
mod lexicon;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::quantize::SymbolSequence;

pub use inference::{forward_loglik, viterbi_decode, EmissionTable};
pub use learn::{em_train, EmConfig, EmReport, SMOOTHING_PSEUDOCOUNT};
pub use lexicon::{classify, Lexicon};

/// Tolerance on probability row sums.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DhbnError {
    #[error("all model dimensions must be at least 1")]
    InvalidCounts,
    #[error("symbol {symbol} out of range for codebook of size {k}")]
    SymbolOutOfRange { symbol: usize, k: usize },
    #[error("slice {slice} has {got} symbols, model expects {expected}")]
    SliceShape {
        slice: usize,
        expected: usize,
        got: usize,
    },
    #[error("empty observation sequence")]
    EmptySequence,
    #[error("observation sequence has probability zero under the model")]
    ImpossibleSequence,
    #[error("no training sequences")]
    NoSequences,
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("duplicate lexicon label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Topology {
    Ergodic,
    /// Self-loop or step to the next state; the last state only self-loops.
    #[default]
    LeftRight,
}

impl Topology {
    pub fn allows(self, from: usize, to: usize, n: usize) -> bool {
        match self {
            Topology::Ergodic => true,
            Topology::LeftRight => to == from || (to == from + 1 && to < n),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Ergodic => "ergodic",
            Topology::LeftRight => "left-right",
        })
    }
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ergodic" => Ok(Topology::Ergodic),
            "left-right" | "leftright" | "left_right" => Ok(Topology::LeftRight),
            other => Err(format!("unknown topology `{other}`")),
        }
    }
}

/// Model dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub n_root: usize,
    pub n_sub: usize,
    pub n_frames: usize,
    pub n_cells: usize,
    pub n_symbols: usize,
}

impl ModelShape {
    pub fn new(
        n_root: usize,
        n_sub: usize,
        n_frames: usize,
        n_cells: usize,
        n_symbols: usize,
    ) -> Self {
        Self {
            n_root,
            n_sub,
            n_frames,
            n_cells,
            n_symbols,
        }
    }

    pub fn slice_len(&self) -> usize {
        self.n_frames * self.n_cells
    }
}

/// One word class: `λ = (pi, trans, frame_cpt, emit)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordModel {
    pub n_root: usize,
    pub n_sub: usize,
    pub n_frames: usize,
    pub n_cells: usize,
    pub n_symbols: usize,
    pub topology: Topology,
    pub pi: Vec<f64>,
    /// `trans[i][j] = P(x_t = j | x_{t-1} = i)`
    pub trans: Vec<Vec<f64>>,
    /// `frame_cpt[f][j][s] = P(sub-state of frame f = s | x_t = j)`
    pub frame_cpt: Vec<Vec<Vec<f64>>>,
    /// `emit[s][k] = P(cell symbol = k | sub-state s)`, shared by the cells of a frame
    pub emit: Vec<Vec<f64>>,
}

fn normalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
}

fn jittered_row(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut row: Vec<f64> = (0..len)
        .map(|_| 1.0 / len as f64 + rng.random::<f64>() * 0.01)
        .collect();
    normalize(&mut row);
    row
}

/// `log(Σ exp(values))`, `-inf` when every term is `-inf`.
pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values
        .into_iter()
        .map(|v| (v - max).exp())
        .sum::<f64>()
        .ln()
}

impl WordModel {
    /// Near-uniform start: `pi`, frame CPTs and emissions are uniform plus
    /// seeded `U[0, 0.01]` jitter then renormalised; transitions are uniform
    /// over the successors the topology allows.
    pub fn init(shape: ModelShape, topology: Topology, seed: u64) -> Result<Self, DhbnError> {
        let ModelShape {
            n_root,
            n_sub,
            n_frames,
            n_cells,
            n_symbols,
        } = shape;
        if [n_root, n_sub, n_frames, n_cells, n_symbols].contains(&0) {
            return Err(DhbnError::InvalidCounts);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = jittered_row(n_root, &mut rng);
        let trans = (0..n_root)
            .map(|i| {
                let allowed = (0..n_root)
                    .filter(|&j| topology.allows(i, j, n_root))
                    .count();
                (0..n_root)
                    .map(|j| {
                        if topology.allows(i, j, n_root) {
                            1.0 / allowed as f64
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let frame_cpt = (0..n_frames)
            .map(|_| (0..n_root).map(|_| jittered_row(n_sub, &mut rng)).collect())
            .collect();
        let emit = (0..n_sub)
            .map(|_| jittered_row(n_symbols, &mut rng))
            .collect();
        Ok(Self {
            n_root,
            n_sub,
            n_frames,
            n_cells,
            n_symbols,
            topology,
            pi,
            trans,
            frame_cpt,
            emit,
        })
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape::new(
            self.n_root,
            self.n_sub,
            self.n_frames,
            self.n_cells,
            self.n_symbols,
        )
    }

    /// Shape and stochasticity check.
    pub fn validate(&self) -> Result<(), DhbnError> {
        let bad = |what: String| Err(DhbnError::InvalidModel(what));
        let shape = self.shape();
        if [
            shape.n_root,
            shape.n_sub,
            shape.n_frames,
            shape.n_cells,
            shape.n_symbols,
        ]
        .contains(&0)
        {
            return Err(DhbnError::InvalidCounts);
        }
        let check_row = |row: &[f64], len: usize, what: &str| -> Result<(), DhbnError> {
            if row.len() != len {
                return Err(DhbnError::InvalidModel(format!(
                    "{what}: length {} != {len}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(DhbnError::InvalidModel(format!(
                    "{what}: negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(DhbnError::InvalidModel(format!("{what}: sums to {sum}")));
            }
            Ok(())
        };
        check_row(&self.pi, self.n_root, "pi")?;
        if self.trans.len() != self.n_root {
            return bad("trans row count".into());
        }
        for (i, row) in self.trans.iter().enumerate() {
            check_row(row, self.n_root, &format!("trans[{i}]"))?;
            for (j, &v) in row.iter().enumerate() {
                if v > 0.0 && !self.topology.allows(i, j, self.n_root) {
                    return bad(format!(
                        "trans[{i}][{j}] violates {} topology",
                        self.topology
                    ));
                }
            }
        }
        if self.frame_cpt.len() != self.n_frames {
            return bad("frame_cpt count".into());
        }
        for (f, cpt) in self.frame_cpt.iter().enumerate() {
            if cpt.len() != self.n_root {
                return bad(format!("frame_cpt[{f}] row count"));
            }
            for (j, row) in cpt.iter().enumerate() {
                check_row(row, self.n_sub, &format!("frame_cpt[{f}][{j}]"))?;
            }
        }
        if self.emit.len() != self.n_sub {
            return bad("emit row count".into());
        }
        for (s, row) in self.emit.iter().enumerate() {
            check_row(row, self.n_symbols, &format!("emit[{s}]"))?;
        }
        Ok(())
    }

    pub(crate) fn check_slice(&self, index: usize, slice: &[usize]) -> Result<(), DhbnError> {
        let expected = self.n_frames * self.n_cells;
        if slice.len() != expected {
            return Err(DhbnError::SliceShape {
                slice: index,
                expected,
                got: slice.len(),
            });
        }
        if let Some(&symbol) = slice.iter().find(|&&y| y >= self.n_symbols) {
            return Err(DhbnError::SymbolOutOfRange {
                symbol,
                k: self.n_symbols,
            });
        }
        Ok(())
    }

    pub(crate) fn check_sequence(&self, seq: &SymbolSequence) -> Result<(), DhbnError> {
        if seq.is_empty() {
            return Err(DhbnError::EmptySequence);
        }
        seq.slices
            .iter()
            .enumerate()
            .try_for_each(|(t, s)| self.check_slice(t, s))
    }

    /// `frame_ll[f][s] = Σ_c log emit[s][y_{f,c}]` for one slice.
    pub(crate) fn frame_logliks(&self, slice: &[usize]) -> Vec<Vec<f64>> {
        (0..self.n_frames)
            .map(|f| {
                let cells = &slice[f * self.n_cells..(f + 1) * self.n_cells];
                self.emit
                    .iter()
                    .map(|row| cells.iter().map(|&y| row[y].ln()).sum())
                    .collect()
            })
            .collect()
    }

    /// `log b_j(slice)` for every root state `j`.
    pub(crate) fn slice_logliks(&self, slice: &[usize]) -> Vec<f64> {
        let frame_ll = self.frame_logliks(slice);
        (0..self.n_root)
            .map(|j| {
                (0..self.n_frames)
                    .map(|f| {
                        let cpt = &self.frame_cpt[f][j];
                        log_sum_exp((0..self.n_sub).map(|s| cpt[s].ln() + frame_ll[f][s]))
                    })
                    .sum()
            })
            .collect()
    }

    /// Log-probability of one slice given the root state, with frame
    /// sub-states summed out.
    pub fn slice_emission_loglik(
        &self,
        slice: &[usize],
        root_state: usize,
    ) -> Result<f64, DhbnError> {
        self.check_slice(0, slice)?;
        if root_state >= self.n_root {
            return Err(DhbnError::InvalidModel(format!(
                "root state {root_state} out of range {}",
                self.n_root
            )));
        }
        let frame_ll = self.frame_logliks(slice);
        Ok((0..self.n_frames)
            .map(|f| {
                let cpt = &self.frame_cpt[f][root_state];
                log_sum_exp((0..self.n_sub).map(|s| cpt[s].ln() + frame_ll[f][s]))
            })
            .sum())
    }

    /// Draws a root-state path and its observations.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> (Vec<usize>, SymbolSequence) {
        fn draw(row: &[f64], rng: &mut impl Rng) -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        }
        let mut path: Vec<usize> = Vec::with_capacity(len);
        let mut slices = Vec::with_capacity(len);
        for t in 0..len {
            let root = if t == 0 {
                draw(&self.pi, rng)
            } else {
                draw(&self.trans[path[t - 1]], rng)
            };
            path.push(root);
            let mut slice = Vec::with_capacity(self.n_frames * self.n_cells);
            for f in 0..self.n_frames {
                let sub = draw(&self.frame_cpt[f][root], rng);
                for _ in 0..self.n_cells {
                    slice.push(draw(&self.emit[sub], rng));
                }
            }
            slices.push(slice);
        }
        (path, SymbolSequence::new(slices))
    }
}

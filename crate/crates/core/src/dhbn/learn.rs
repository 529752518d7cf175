//! Baum-Welch generalised to the slice hierarchy.

use rayon::prelude::*;

use super::inference::{backward_table, forward_table, EmissionTable};
use super::{log_sum_exp, DhbnError, WordModel};
use crate::quantize::SymbolSequence;

/// Added to every expected count of an allowed parameter before renormalising.
pub const SMOOTHING_PSEUDOCOUNT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop once the relative improvement of the total log-likelihood drops below this.
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmReport {
    /// Total log-likelihood of the starting model.
    pub initial_loglik: f64,
    /// Total log-likelihood after each re-estimation.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Expected sufficient statistics.
#[derive(Clone, Debug)]
struct Counts {
    loglik: f64,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    frame_cpt: Vec<Vec<Vec<f64>>>,
    emit: Vec<Vec<f64>>,
}

impl Counts {
    fn zeros(m: &WordModel) -> Self {
        Self {
            loglik: 0.0,
            pi: vec![0.0; m.n_root],
            trans: vec![vec![0.0; m.n_root]; m.n_root],
            frame_cpt: vec![vec![vec![0.0; m.n_sub]; m.n_root]; m.n_frames],
            emit: vec![vec![0.0; m.n_symbols]; m.n_sub],
        }
    }

    fn add(&mut self, other: &Counts) {
        fn add_rows(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += y;
                }
            }
        }
        self.loglik += other.loglik;
        for (x, y) in self.pi.iter_mut().zip(&other.pi) {
            *x += y;
        }
        add_rows(&mut self.trans, &other.trans);
        for (a, b) in self.frame_cpt.iter_mut().zip(&other.frame_cpt) {
            add_rows(a, b);
        }
        add_rows(&mut self.emit, &other.emit);
    }
}

fn expected_counts(m: &WordModel, seq: &SymbolSequence) -> Result<Counts, DhbnError> {
    let (n, s_count) = (m.n_root, m.n_sub);
    let emis = EmissionTable::new(m, seq)?;
    let alpha = forward_table(m, &emis);
    let beta = backward_table(m, &emis);
    let t_len = seq.len();
    let loglik = log_sum_exp(alpha[t_len - 1].iter().copied());
    if !loglik.is_finite() {
        return Err(DhbnError::ImpossibleSequence);
    }
    let mut c = Counts::zeros(m);
    c.loglik = loglik;
    let log_trans: Vec<Vec<f64>> = m
        .trans
        .iter()
        .map(|r| r.iter().map(|v| v.ln()).collect())
        .collect();

    let mut sub_post = vec![0.0; s_count];
    for t in 0..t_len {
        let gamma: Vec<f64> = (0..n)
            .map(|j| (alpha[t][j] + beta[t][j] - loglik).exp())
            .collect();
        if t == 0 {
            c.pi.iter_mut().zip(&gamma).for_each(|(p, g)| *p += g);
        } else {
            for i in 0..n {
                for j in 0..n {
                    if m.trans[i][j] > 0.0 {
                        c.trans[i][j] +=
                            (alpha[t - 1][i] + log_trans[i][j] + emis.values[t][j] + beta[t][j]
                                - loglik)
                                .exp();
                    }
                }
            }
        }

        // sub-state posteriors within each frame, conditioned on the root state
        let slice = &seq.slices[t];
        let frame_ll = m.frame_logliks(slice);
        for f in 0..m.n_frames {
            let cells = &slice[f * m.n_cells..(f + 1) * m.n_cells];
            for j in 0..n {
                if gamma[j] == 0.0 {
                    continue;
                }
                let cpt = &m.frame_cpt[f][j];
                for s in 0..s_count {
                    sub_post[s] = cpt[s].ln() + frame_ll[f][s];
                }
                let norm = log_sum_exp(sub_post.iter().copied());
                if norm == f64::NEG_INFINITY {
                    continue;
                }
                for s in 0..s_count {
                    let w = gamma[j] * (sub_post[s] - norm).exp();
                    c.frame_cpt[f][j][s] += w;
                    for &y in cells {
                        c.emit[s][y] += w;
                    }
                }
            }
        }
    }
    Ok(c)
}

/// Per-sequence statistics computed in parallel, summed in input order.
fn accumulate(m: &WordModel, sequences: &[SymbolSequence]) -> Result<Counts, DhbnError> {
    let per_seq = sequences
        .par_iter()
        .map(|s| expected_counts(m, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = Counts::zeros(m);
    for c in &per_seq {
        total.add(c);
    }
    Ok(total)
}

fn reestimate_row(counts: &[f64], allowed: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut row: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if allowed(i) {
                c + SMOOTHING_PSEUDOCOUNT
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
    row
}

fn maximize(m: &WordModel, c: &Counts) -> WordModel {
    let n = m.n_root;
    let topology = m.topology;
    WordModel {
        pi: reestimate_row(&c.pi, |_| true),
        trans: (0..n)
            .map(|i| {
                reestimate_row(&c.trans[i], |j| {
                    topology.allows(i, j, n) && m.trans[i][j] > 0.0
                })
            })
            .collect(),
        frame_cpt: c
            .frame_cpt
            .iter()
            .map(|cpt| {
                cpt.iter()
                    .map(|row| reestimate_row(row, |_| true))
                    .collect()
            })
            .collect(),
        emit: c
            .emit
            .iter()
            .map(|row| reestimate_row(row, |_| true))
            .collect(),
        ..m.clone()
    }
}

/// Fits `model` to `sequences` by expectation-maximisation.
pub fn em_train(
    model: &WordModel,
    sequences: &[SymbolSequence],
    cfg: &EmConfig,
) -> Result<(WordModel, EmReport), DhbnError> {
    if sequences.is_empty() {
        return Err(DhbnError::NoSequences);
    }
    model.validate()?;
    let mut current = model.clone();
    let mut stats = accumulate(&current, sequences)?;
    let mut report = EmReport {
        initial_loglik: stats.loglik,
        history: Vec::new(),
        converged: false,
    };
    let mut previous = stats.loglik;
    for _ in 0..cfg.max_iter {
        current = maximize(&current, &stats);
        stats = accumulate(&current, sequences)?;
        let ll = stats.loglik;
        report.history.push(ll);
        let improvement = (ll - previous) / previous.abs().max(f64::MIN_POSITIVE);
        previous = ll;
        if improvement < cfg.tol {
            report.converged = true;
            break;
        }
    }
    Ok((current, report))
}

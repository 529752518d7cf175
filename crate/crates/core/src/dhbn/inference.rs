use super::{log_sum_exp, DhbnError, WordModel};
use crate::quantize::SymbolSequence;

/// `log b_j(Y_t)` for every slice `t` and root state `j`.
#[derive(Clone, Debug)]
pub struct EmissionTable {
    pub values: Vec<Vec<f64>>,
}

impl EmissionTable {
    pub fn new(model: &WordModel, seq: &SymbolSequence) -> Result<Self, DhbnError> {
        model.check_sequence(seq)?;
        Ok(Self {
            values: seq.slices.iter().map(|s| model.slice_logliks(s)).collect(),
        })
    }
}

fn ln_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|v| v.ln()).collect())
        .collect()
}

/// Log forward variables `alpha[t][j]`.
pub(crate) fn forward_table(model: &WordModel, emis: &EmissionTable) -> Vec<Vec<f64>> {
    let n = model.n_root;
    let log_trans = ln_matrix(&model.trans);
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(emis.values.len());
    alpha.push(
        (0..n)
            .map(|j| model.pi[j].ln() + emis.values[0][j])
            .collect(),
    );
    for e in &emis.values[1..] {
        let prev = alpha.last().unwrap();
        let next = (0..n)
            .map(|j| log_sum_exp((0..n).map(|i| prev[i] + log_trans[i][j])) + e[j])
            .collect();
        alpha.push(next);
    }
    alpha
}

/// Log backward variables `beta[t][i]`.
pub(crate) fn backward_table(model: &WordModel, emis: &EmissionTable) -> Vec<Vec<f64>> {
    let n = model.n_root;
    let t_len = emis.values.len();
    let log_trans = ln_matrix(&model.trans);
    let mut beta = vec![vec![0.0; n]; t_len];
    for t in (0..t_len - 1).rev() {
        let e = &emis.values[t + 1];
        for i in 0..n {
            beta[t][i] = log_sum_exp((0..n).map(|j| log_trans[i][j] + e[j] + beta[t + 1][j]));
        }
    }
    beta
}

/// `log P(Y | λ)`; `-inf` for a sequence the model cannot produce.
pub fn forward_loglik(model: &WordModel, seq: &SymbolSequence) -> Result<f64, DhbnError> {
    let emis = EmissionTable::new(model, seq)?;
    let alpha = forward_table(model, &emis);
    Ok(log_sum_exp(alpha.last().unwrap().iter().copied()))
}

/// Most probable root-state path. Ties resolve to the lower state index.
pub fn viterbi_decode(
    model: &WordModel,
    seq: &SymbolSequence,
) -> Result<(Vec<usize>, f64), DhbnError> {
    let emis = EmissionTable::new(model, seq)?;
    let n = model.n_root;
    let t_len = seq.len();
    let log_trans = ln_matrix(&model.trans);

    let mut delta: Vec<f64> = (0..n)
        .map(|j| model.pi[j].ln() + emis.values[0][j])
        .collect();
    let mut backptr = vec![vec![0usize; n]; t_len];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, d) in delta.iter().enumerate() {
                let v = d + log_trans[i][j];
                if v > best.1 {
                    best = (i, v);
                }
            }
            backptr[t][j] = best.0;
            next[j] = best.1 + emis.values[t][j];
        }
        delta = next;
    }
    let (mut state, best) = delta.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
    );
    if best == f64::NEG_INFINITY || best.is_nan() {
        return Err(DhbnError::ImpossibleSequence);
    }
    let mut path = vec![0; t_len];
    for t in (0..t_len).rev() {
        path[t] = state;
        state = backptr[t][state];
    }
    Ok((path, best))
}

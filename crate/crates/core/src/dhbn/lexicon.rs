use std::cmp::Ordering;

use super::{forward_loglik, DhbnError, WordModel};
use crate::quantize::SymbolSequence;

/// Ordered `(label, model)` pairs with unique labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    entries: Vec<(String, WordModel)>,
}

impl Lexicon {
    pub fn new(entries: Vec<(String, WordModel)>) -> Result<Self, DhbnError> {
        for (i, (label, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(DhbnError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, WordModel)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&WordModel> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, m)| m)
    }

    pub fn classify(&self, seq: &SymbolSequence) -> Result<Vec<(String, f64)>, DhbnError> {
        classify(self, seq)
    }
}

/// Scores `seq` under every model, best first. Equal scores keep lexicon
/// order; impossible sequences score `-inf` and sort last.
pub fn classify(lex: &Lexicon, seq: &SymbolSequence) -> Result<Vec<(String, f64)>, DhbnError> {
    if lex.is_empty() {
        return Err(DhbnError::EmptyLexicon);
    }
    if seq.is_empty() {
        return Err(DhbnError::EmptySequence);
    }
    let mut ranked = lex
        .entries
        .iter()
        .map(|(label, model)| {
            let ll = forward_loglik(model, seq)?;
            Ok((
                label.clone(),
                if ll.is_nan() { f64::NEG_INFINITY } else { ll },
            ))
        })
        .collect::<Result<Vec<_>, DhbnError>>()?;
    // stable sort keeps lexicon order among ties
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    Ok(ranked)
}

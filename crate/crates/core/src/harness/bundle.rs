//! On-disk trained system: a directory holding
//!
//! ```text
//! pipeline.cfg     sealed configuration
//! codebook.txt     codebook
//! lexicon.tsv      sealed `label<TAB>models/NNN.wm` index
//! models/NNN.wm    one word model per class
//! ```

use std::path::Path;

use super::config::Config;
use super::HarnessError;
use crate::dhbn::{Lexicon, WordModel};
use crate::persist::{self, PersistError};
use crate::quantize::Codebook;

pub const BUNDLE_MAGIC: &str = "DHBN-LEX";
pub const BUNDLE_VERSION: &str = "v1";
const CONFIG_MAGIC: &str = "DHBN-CFG";

#[derive(Clone, Debug)]
pub struct Bundle {
    pub config: Config,
    pub codebook: Codebook,
    pub lexicon: Lexicon,
}

fn with_path(e: PersistError, path: &Path) -> PersistError {
    match e {
        PersistError::ChecksumMismatch(None) => PersistError::ChecksumMismatch(Some(path.into())),
        e => e,
    }
}

fn read_sealed_body(path: &Path, magic: &str) -> Result<String, PersistError> {
    let text = persist::read_sealed(path)?;
    persist::check_header(text.lines().next(), magic, BUNDLE_VERSION)?;
    let body = persist::unseal(&text).map_err(|e| with_path(e, path))?;
    Ok(body.lines().skip(1).collect::<Vec<_>>().join("\n"))
}

pub fn save_bundle(
    dir: &Path,
    config: &Config,
    codebook: &Codebook,
    lexicon: &Lexicon,
) -> Result<(), HarnessError> {
    let models = dir.join("models");
    std::fs::create_dir_all(&models).map_err(|source| HarnessError::IoFailure {
        path: models.clone(),
        source,
    })?;
    let cfg_text = format!("{CONFIG_MAGIC} {BUNDLE_VERSION}\n{}", config.to_text());
    persist::write_file(&dir.join("pipeline.cfg"), &persist::seal(cfg_text))?;
    codebook.save(&dir.join("codebook.txt"))?;
    let mut index = format!("{BUNDLE_MAGIC} {BUNDLE_VERSION} {}\n", lexicon.len());
    for (i, (label, model)) in lexicon.entries().iter().enumerate() {
        let rel = format!("models/{i:03}.wm");
        model.save(&dir.join(&rel))?;
        index.push_str(&format!("{label}\t{rel}\n"));
    }
    persist::write_file(&dir.join("lexicon.tsv"), &persist::seal(index))?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<Bundle, HarnessError> {
    let cfg_path = dir.join("pipeline.cfg");
    let config = Config::parse(&read_sealed_body(&cfg_path, CONFIG_MAGIC)?)?;
    let codebook = Codebook::load(&dir.join("codebook.txt"))?;

    let index_path = dir.join("lexicon.tsv");
    let text = persist::read_sealed(&index_path)?;
    let header = persist::check_header(text.lines().next(), BUNDLE_MAGIC, BUNDLE_VERSION)?;
    let count: usize = persist::parse_field(header.first().copied(), "model count")?;
    let body = persist::unseal(&text).map_err(|e| with_path(e, &index_path))?;
    let mut entries = Vec::with_capacity(count);
    for line in body.lines().skip(1) {
        let (label, rel) = line
            .split_once('\t')
            .ok_or_else(|| PersistError::Malformed(format!("lexicon entry `{line}`")))?;
        let model = WordModel::load(&dir.join(rel))?;
        if model.n_symbols != codebook.k() {
            return Err(PersistError::Malformed(format!(
                "model `{label}` expects {} symbols, codebook has {}",
                model.n_symbols,
                codebook.k()
            ))
            .into());
        }
        entries.push((label.to_string(), model));
    }
    if entries.len() != count {
        return Err(PersistError::Malformed(format!(
            "lexicon lists {} models, header says {count}",
            entries.len()
        ))
        .into());
    }
    let lexicon = Lexicon::new(entries).map_err(|source| HarnessError::Model {
        context: "loading lexicon".into(),
        source,
    })?;
    Ok(Bundle {
        config,
        codebook,
        lexicon,
    })
}

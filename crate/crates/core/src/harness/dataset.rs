use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;
use crate::imaging::load_image;

/// Corpus partition tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fold {
    A,
    B,
    C,
    D,
}

impl Fold {
    pub const ALL: [Fold; 4] = [Fold::A, Fold::B, Fold::C, Fold::D];

    pub fn round_robin(index: usize) -> Self {
        Self::ALL[index % 4]
    }
}

impl fmt::Display for Fold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fold::A => "a",
            Fold::B => "b",
            Fold::C => "c",
            Fold::D => "d",
        })
    }
}

impl FromStr for Fold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" => Ok(Fold::A),
            "b" => Ok(Fold::B),
            "c" => Ok(Fold::C),
            "d" => Ok(Fold::D),
            other => Err(format!("unknown fold tag `{other}`")),
        }
    }
}

/// Parses fold lists such as `ab`, `a,b` or `c`.
pub fn parse_folds(s: &str) -> Result<Vec<Fold>, String> {
    let mut folds: Vec<Fold> = s
        .chars()
        .filter(|c| !matches!(c, ',' | ' '))
        .map(|c| c.to_string().parse())
        .collect::<Result<_, _>>()?;
    folds.sort();
    folds.dedup();
    if folds.is_empty() {
        return Err("empty fold list".into());
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub word_id: String,
    pub label: String,
    pub image: PathBuf,
    pub fold: Fold,
    /// Character count known from the generator, when available.
    pub expected_blocks: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Labels in order of first appearance.
    pub fn labels(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.samples
            .iter()
            .filter(|s| seen.insert(s.label.as_str()))
            .map(|s| s.label.clone())
            .collect()
    }

    pub fn in_folds<'a>(&'a self, folds: &'a [Fold]) -> impl Iterator<Item = &'a Sample> + 'a {
        self.samples.iter().filter(move |s| folds.contains(&s.fold))
    }

    pub fn count_in_fold(&self, fold: Fold) -> usize {
        self.samples.iter().filter(|s| s.fold == fold).count()
    }

    /// Manifest text in the ingest format, paths relative to `root`.
    pub fn manifest_text(&self, root: &Path) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let rel = s.image.strip_prefix(root).unwrap_or(&s.image);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}",
                s.word_id,
                s.label,
                rel.display(),
                s.fold
            ));
            if let Some(n) = s.expected_blocks {
                out.push_str(&format!("\t{n}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Reads `word_id<TAB>label<TAB>relative-image-path<TAB>fold[<TAB>char-count]`
/// lines and checks that every image exists and parses.
pub fn ingest(root_dir: &Path, manifest: &Path) -> Result<Dataset, HarnessError> {
    let text = std::fs::read_to_string(manifest).map_err(|source| HarnessError::IoFailure {
        path: manifest.to_path_buf(),
        source,
    })?;
    let dataset = parse_manifest(root_dir, &text)?;
    for s in &dataset.samples {
        if !s.image.is_file() {
            return Err(HarnessError::MissingImage(s.image.clone()));
        }
        load_image(&s.image).map_err(|source| HarnessError::Imaging {
            word_id: s.word_id.clone(),
            source,
        })?;
    }
    Ok(dataset)
}

pub fn parse_manifest(root_dir: &Path, text: &str) -> Result<Dataset, HarnessError> {
    let mut samples = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| HarnessError::MalformedManifest {
            line: lineno,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(bad(format!(
                "expected 4 or 5 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let (word_id, label, path, fold) = (
            fields[0].trim(),
            fields[1].trim(),
            fields[2].trim(),
            fields[3].trim(),
        );
        if word_id.is_empty() || label.is_empty() || path.is_empty() {
            return Err(bad("empty field".into()));
        }
        if !ids.insert(word_id.to_string()) {
            return Err(bad(format!("duplicate word_id `{word_id}`")));
        }
        let fold: Fold = fold.parse().map_err(bad)?;
        let expected_blocks = match fields.get(4) {
            Some(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("invalid character count `{v}`")))?,
            ),
            None => None,
        };
        samples.push(Sample {
            word_id: word_id.to_string(),
            label: label.to_string(),
            image: root_dir.join(path),
            fold,
            expected_blocks,
        });
    }
    Ok(Dataset { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_line_manifest() {
        let ds = parse_manifest(
            Path::new("/data"),
            "w1\tcat\timg/1.pgm\ta\nw2\tdog\timg/2.pgm\tc\t4\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples[0].image, PathBuf::from("/data/img/1.pgm"));
        assert_eq!(ds.samples[1].fold, Fold::C);
        assert_eq!(ds.samples[1].expected_blocks, Some(4));
        assert_eq!(ds.labels(), vec!["cat", "dog"]);
    }

    #[test]
    fn duplicate_id_named() {
        let err = parse_manifest(Path::new("."), "w1\tx\t1.pgm\ta\nw1\ty\t2.pgm\tb\n").unwrap_err();
        match err {
            HarnessError::MalformedManifest { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("w1"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_fold_and_field_count() {
        assert!(parse_manifest(Path::new("."), "w1\tx\t1.pgm\te\n").is_err());
        assert!(parse_manifest(Path::new("."), "w1 x 1.pgm a\n").is_err());
    }

    #[test]
    fn fold_lists() {
        assert_eq!(parse_folds("ba").unwrap(), vec![Fold::A, Fold::B]);
        assert_eq!(
            parse_folds("a,c,d").unwrap(),
            vec![Fold::A, Fold::C, Fold::D]
        );
        assert!(parse_folds("x").is_err());
        assert!(parse_folds("").is_err());
    }

    #[test]
    fn missing_image_reported() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.tsv");
        std::fs::write(&manifest, "w1\tx\tnope.pgm\ta\n").unwrap();
        match ingest(dir.path(), &manifest).unwrap_err() {
            HarnessError::MissingImage(p) => assert!(p.ends_with("nope.pgm")),
            e => panic!("unexpected {e}"),
        }
    }
}

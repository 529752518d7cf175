//! `DHBN-WM v1` model files.
//!
//! ```text
//! DHBN-WM v1 N S F C K topology
//! pi                       (1 row of N)
//! trans                    (N rows of N)
//! frame_cpt                (F × N rows of S, frame-major)
//! emit                     (S rows of K)
//! sha256 <hex>
//! ```

use std::path::Path;

use super::{Topology, WordModel};
use crate::persist::{self, PersistError};

pub const MODEL_MAGIC: &str = "DHBN-WM";
pub const MODEL_VERSION: &str = "v1";

impl WordModel {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MODEL_MAGIC} {MODEL_VERSION} {} {} {} {} {} {}\n",
            self.n_root, self.n_sub, self.n_frames, self.n_cells, self.n_symbols, self.topology
        );
        persist::push_reals(&mut out, &self.pi);
        for row in &self.trans {
            persist::push_reals(&mut out, row);
        }
        for row in self.frame_cpt.iter().flatten() {
            persist::push_reals(&mut out, row);
        }
        for row in &self.emit {
            persist::push_reals(&mut out, row);
        }
        persist::seal(out)
    }

    pub fn from_text(text: &str) -> Result<Self, PersistError> {
        persist::check_header(text.lines().next(), MODEL_MAGIC, MODEL_VERSION)?;
        let body = persist::unseal(text)?;
        let mut lines = body.lines();
        let header = persist::check_header(lines.next(), MODEL_MAGIC, MODEL_VERSION)?;
        let mut fields = header.into_iter();
        let mut count = |what: &str| -> Result<usize, PersistError> {
            let v: usize = persist::parse_field(fields.next(), what)?;
            if v == 0 {
                return Err(PersistError::Malformed(format!("{what} must be positive")));
            }
            Ok(v)
        };
        let (n, s, f, c, k) = (
            count("N")?,
            count("S")?,
            count("F")?,
            count("C")?,
            count("K")?,
        );
        let topology: Topology = fields
            .next()
            .ok_or_else(|| PersistError::Malformed("missing topology".into()))?
            .parse()
            .map_err(PersistError::Malformed)?;

        let mut rows =
            |count: usize, len: usize, what: &str| -> Result<Vec<Vec<f64>>, PersistError> {
                (0..count)
                    .map(|i| persist::parse_reals(lines.next(), len, &format!("{what} row {i}")))
                    .collect()
            };
        let pi = rows(1, n, "pi")?.remove(0);
        let trans = rows(n, n, "trans")?;
        let frame_cpt = (0..f)
            .map(|fi| rows(n, s, &format!("frame_cpt[{fi}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let emit = rows(s, k, "emit")?;
        if lines.next().is_some() {
            return Err(PersistError::Malformed(
                "trailing data after emit rows".into(),
            ));
        }
        let model = WordModel {
            n_root: n,
            n_sub: s,
            n_frames: f,
            n_cells: c,
            n_symbols: k,
            topology,
            pi,
            trans,
            frame_cpt,
            emit,
        };
        model
            .validate()
            .map_err(|e| PersistError::Malformed(e.to_string()))?;
        Ok(model)
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

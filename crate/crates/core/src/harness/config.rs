//! Line-oriented `key = value` run configuration. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;
use crate::dhbn::{EmConfig, ModelShape, Topology};
use crate::quantize::KMeansConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub smooth_width: usize,
    pub valley_frac: f64,
    pub diacritic_area_ratio: f64,
    pub canvas_height: usize,
    pub canvas_width: usize,
    pub frames: usize,
    pub cells: usize,
    pub zernike_order: usize,
    pub standardize: bool,
    pub codebook_size: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub states: usize,
    pub substates: usize,
    pub topology: Topology,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub pr_points: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            smooth_width: 5,
            valley_frac: 0.05,
            diacritic_area_ratio: 0.08,
            canvas_height: 100,
            canvas_width: 200,
            frames: 3,
            cells: 2,
            zernike_order: 8,
            standardize: true,
            codebook_size: 24,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-6,
            states: 13,
            substates: 4,
            topology: Topology::LeftRight,
            em_max_iter: 100,
            em_tol: 1e-4,
            pr_points: 64,
            seed: 0,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl Config {
    pub const KEYS: [&'static str; 19] = [
        "smooth.width",
        "segment.valley_frac",
        "diacritic.area_ratio",
        "canvas.height",
        "canvas.width",
        "grid.frames",
        "grid.cells",
        "features.zernike_order",
        "features.standardize",
        "codebook.size",
        "kmeans.max_iter",
        "kmeans.tol",
        "model.states",
        "model.substates",
        "model.topology",
        "em.max_iter",
        "em.tol",
        "eval.pr_points",
        "seed",
    ];

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
            value
                .parse()
                .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "smooth.width" => self.smooth_width = num(key, value)?,
            "segment.valley_frac" => self.valley_frac = num(key, value)?,
            "diacritic.area_ratio" => self.diacritic_area_ratio = num(key, value)?,
            "canvas.height" => self.canvas_height = num(key, value)?,
            "canvas.width" => self.canvas_width = num(key, value)?,
            "grid.frames" => self.frames = num(key, value)?,
            "grid.cells" => self.cells = num(key, value)?,
            "features.zernike_order" => self.zernike_order = num(key, value)?,
            "features.standardize" => {
                self.standardize = parse_bool(value).ok_or_else(|| {
                    HarnessError::Config(format!("invalid value `{value}` for `{key}` (on/off)"))
                })?
            }
            "codebook.size" => self.codebook_size = num(key, value)?,
            "kmeans.max_iter" => self.kmeans_max_iter = num(key, value)?,
            "kmeans.tol" => self.kmeans_tol = num(key, value)?,
            "model.states" => self.states = num(key, value)?,
            "model.substates" => self.substates = num(key, value)?,
            "model.topology" => self.topology = value.parse().map_err(HarnessError::Config)?,
            "em.max_iter" => self.em_max_iter = num(key, value)?,
            "em.tol" => self.em_tol = num(key, value)?,
            "eval.pr_points" => self.pr_points = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown config key `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.smooth_width == 0 || self.smooth_width.is_multiple_of(2) {
            return fail("smooth.width must be odd and positive");
        }
        if !(0.0..1.0).contains(&self.valley_frac) {
            return fail("segment.valley_frac must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.diacritic_area_ratio) {
            return fail("diacritic.area_ratio must lie in [0, 1]");
        }
        if self.canvas_height == 0 || self.canvas_width == 0 {
            return fail("canvas dimensions must be positive");
        }
        if self.smooth_width > self.canvas_width {
            return fail("smooth.width exceeds canvas.width");
        }
        if self.frames == 0 || self.cells == 0 {
            return fail("grid.frames and grid.cells must be positive");
        }
        if self.codebook_size == 0 || self.states == 0 || self.substates == 0 {
            return fail("codebook.size, model.states and model.substates must be positive");
        }
        if self.pr_points < 2 {
            return fail("eval.pr_points must be at least 2");
        }
        Ok(())
    }

    /// Serialises every key, in `KEYS` order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let b = |v: bool| if v { "on" } else { "off" };
        let _ = writeln!(out, "smooth.width = {}", self.smooth_width);
        let _ = writeln!(out, "segment.valley_frac = {}", self.valley_frac);
        let _ = writeln!(out, "diacritic.area_ratio = {}", self.diacritic_area_ratio);
        let _ = writeln!(out, "canvas.height = {}", self.canvas_height);
        let _ = writeln!(out, "canvas.width = {}", self.canvas_width);
        let _ = writeln!(out, "grid.frames = {}", self.frames);
        let _ = writeln!(out, "grid.cells = {}", self.cells);
        let _ = writeln!(out, "features.zernike_order = {}", self.zernike_order);
        let _ = writeln!(out, "features.standardize = {}", b(self.standardize));
        let _ = writeln!(out, "codebook.size = {}", self.codebook_size);
        let _ = writeln!(out, "kmeans.max_iter = {}", self.kmeans_max_iter);
        let _ = writeln!(out, "kmeans.tol = {:e}", self.kmeans_tol);
        let _ = writeln!(out, "model.states = {}", self.states);
        let _ = writeln!(out, "model.substates = {}", self.substates);
        let _ = writeln!(out, "model.topology = {}", self.topology);
        let _ = writeln!(out, "em.max_iter = {}", self.em_max_iter);
        let _ = writeln!(out, "em.tol = {:e}", self.em_tol);
        let _ = writeln!(out, "eval.pr_points = {}", self.pr_points);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.codebook_size,
            seed: self.seed,
            max_iter: self.kmeans_max_iter,
            tol: self.kmeans_tol,
            standardize: self.standardize,
        }
    }

    pub fn em(&self) -> EmConfig {
        EmConfig {
            max_iter: self.em_max_iter,
            tol: self.em_tol,
        }
    }

    pub fn model_shape(&self) -> ModelShape {
        ModelShape::new(
            self.states,
            self.substates,
            self.frames,
            self.cells,
            self.codebook_size,
        )
    }
}

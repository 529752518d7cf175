//! Synthetic pseudo-word corpus with known character counts.
//!
//! Every class is a fixed string of 3–6 glyph prototypes. Each sample renders
//! the string left to right with per-glyph jitter (±2 px shift, ±10°
//! rotation, 0.9–1.1 scale) and occasional detached dots above a glyph.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, Fold, Sample};
use super::HarnessError;
use crate::imaging::{write_pgm_bytes, BinaryImage};

/// Glyph box edge in pixels.
const GLYPH: f64 = 40.0;
const GAP: f64 = 14.0;
const MARGIN: f64 = 10.0;
/// Room above the glyphs for dots.
const DOT_BAND: f64 = 16.0;
const DOT_PROBABILITY: f64 = 0.3;

/// Number of distinct glyph prototypes.
pub const PROTOTYPE_COUNT: usize = 12;

/// Membership test for prototype `id` in unit coordinates (`v` points down).
pub fn prototype_contains(id: usize, u: f64, v: f64) -> bool {
    let r = (u * u + v * v).sqrt();
    match id {
        // filled disc
        0 => r < 0.7,
        // ring
        1 => (0.42..0.78).contains(&r),
        // vertical bar
        2 => u.abs() < 0.22 && v.abs() < 0.8,
        // plus sign
        3 => (u.abs() < 0.16 && v.abs() < 0.8) || (v.abs() < 0.16 && u.abs() < 0.8),
        // upward triangle
        4 => v < 0.65 && v > -0.75 && u.abs() < (v + 0.75) * 0.55,
        // L
        5 => {
            (u > -0.65 && u < -0.3 && v.abs() < 0.8)
                || (v > 0.45 && v < 0.8 && u > -0.65 && u < 0.65)
        }
        // E
        6 => {
            (u > -0.6 && u < -0.3 && v.abs() < 0.8)
                || (u > -0.6
                    && u < 0.6
                    && ((v + 0.65).abs() < 0.15 || v.abs() < 0.15 || (v - 0.65).abs() < 0.15))
        }
        // square outline
        7 => {
            let m = u.abs().max(v.abs());
            (0.45..0.75).contains(&m)
        }
        // T
        8 => (v > -0.8 && v < -0.5 && u.abs() < 0.7) || (u.abs() < 0.16 && v > -0.8 && v < 0.8),
        // filled diamond
        9 => u.abs() + v.abs() < 0.8,
        // X
        10 => ((u - v).abs() < 0.24 || (u + v).abs() < 0.24) && u.abs() < 0.65 && v.abs() < 0.65,
        // crescent opening right
        11 => r < 0.75 && ((u - 0.3).powi(2) + v * v).sqrt() > 0.5,
        _ => false,
    }
}

/// Glyph strings for `n_classes` distinct classes.
pub fn class_strings(n_classes: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1a5);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n_classes);
    while out.len() < n_classes {
        let len = rng.random_range(3..=6);
        let word: Vec<usize> = (0..len)
            .map(|_| rng.random_range(0..PROTOTYPE_COUNT))
            .collect();
        if seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

struct Placement {
    proto: usize,
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    half: f64,
}

/// Renders one sample of `glyphs`.
pub fn render_word(glyphs: &[usize], rng: &mut impl Rng) -> BinaryImage {
    let n = glyphs.len() as f64;
    let width = (2.0 * MARGIN + n * GLYPH + (n - 1.0) * GAP).ceil() as usize;
    let height = (2.0 * MARGIN + DOT_BAND + GLYPH).ceil() as usize;
    let baseline_cy = MARGIN + DOT_BAND + GLYPH / 2.0;

    let mut placements = Vec::with_capacity(glyphs.len());
    let mut dots = Vec::new();
    for (k, &proto) in glyphs.iter().enumerate() {
        let cx = MARGIN + k as f64 * (GLYPH + GAP) + GLYPH / 2.0 + rng.random_range(-2.0..=2.0);
        let cy = baseline_cy + rng.random_range(-2.0..=2.0);
        let angle = rng.random_range(-10.0f64..=10.0).to_radians();
        let scale = rng.random_range(0.9..=1.1);
        placements.push(Placement {
            proto,
            cx,
            cy,
            cos: angle.cos(),
            sin: angle.sin(),
            half: scale * GLYPH / 2.0,
        });
        if rng.random::<f64>() < DOT_PROBABILITY {
            let dx = cx + rng.random_range(-6.0..=6.0);
            let dy = MARGIN + DOT_BAND / 2.0 - 2.0;
            dots.push((dx, dy));
        }
    }

    BinaryImage::from_fn(width, height, |r, c| {
        let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
        if dots
            .iter()
            .any(|&(dx, dy)| (x - dx).powi(2) + (y - dy).powi(2) <= 4.0)
        {
            return true;
        }
        placements.iter().any(|p| {
            let (dx, dy) = (x - p.cx, y - p.cy);
            // inverse rotation into the prototype frame
            let u = (p.cos * dx + p.sin * dy) / p.half;
            let v = (-p.sin * dx + p.cos * dy) / p.half;
            u.abs() <= 1.0 && v.abs() <= 1.0 && prototype_contains(p.proto, u, v)
        })
    })
}

/// Writes `per_class` samples for each of `n_classes` classes under
/// `out_dir/images/` plus `out_dir/manifest.tsv`. Folds go round-robin
/// a, b, c, d within each class.
pub fn synthesize(
    n_classes: usize,
    per_class: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Dataset, HarnessError> {
    if n_classes < 2 || per_class < 4 {
        return Err(HarnessError::Config(
            "synthesis needs at least 2 classes and 4 samples per class".into(),
        ));
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::IoFailure { path, source }
    };
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).map_err(io(&image_dir))?;

    let strings = class_strings(n_classes, seed);
    let mut samples = Vec::with_capacity(n_classes * per_class);
    for (class, glyphs) in strings.iter().enumerate() {
        let label = format!("class{class:02}");
        for i in 0..per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(1_000_003) ^ ((class * 100_000 + i) as u64),
            );
            let img = render_word(glyphs, &mut rng);
            let word_id = format!("{label}_{i:04}");
            let rel = format!("images/{word_id}.pgm");
            let path = out_dir.join(&rel);
            std::fs::write(&path, write_pgm_bytes(&img)).map_err(io(&path))?;
            samples.push(Sample {
                word_id,
                label: label.clone(),
                image: path,
                fold: Fold::round_robin(i),
                expected_blocks: Some(glyphs.len()),
            });
        }
    }
    let ds = Dataset { samples };
    let manifest = out_dir.join("manifest.tsv");
    std::fs::write(&manifest, ds.manifest_text(out_dir)).map_err(io(&manifest))?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::label_components;

    #[test]
    fn prototypes_are_single_components() {
        for id in 0..PROTOTYPE_COUNT {
            let img = BinaryImage::from_fn(64, 64, |r, c| {
                let u = (c as f64 + 0.5 - 32.0) / 32.0;
                let v = (r as f64 + 0.5 - 32.0) / 32.0;
                prototype_contains(id, u, v)
            });
            let comps = label_components(&img);
            assert_eq!(comps.count(), 1, "prototype {id}");
            assert!(comps.area(1) > 300, "prototype {id} too thin");
        }
    }

    #[test]
    fn class_strings_are_distinct() {
        let s = class_strings(30, 1);
        assert_eq!(s.iter().collect::<HashSet<_>>().len(), 30);
        assert!(s.iter().all(|w| (3..=6).contains(&w.len())));
        assert_eq!(class_strings(30, 1), s);
    }

    #[test]
    fn rejects_tiny_requests() {
        let dir = tempfile::tempdir().unwrap();
        assert!(synthesize(1, 10, 0, dir.path()).is_err());
        assert!(synthesize(3, 3, 0, dir.path()).is_err());
    }
}

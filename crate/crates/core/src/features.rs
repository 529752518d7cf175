//! Moment descriptors per cell: the seven Hu invariants followed by Zernike
//! magnitudes `|Z_nm|` for `0 ≤ m ≤ n ≤ max_order`, `n − m` even.

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::imaging::{BinaryImage, CellGrid};

pub const HU_COUNT: usize = 7;
pub const DEFAULT_ZERNIKE_ORDER: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("invalid Zernike order {0}")]
    InvalidOrder(i64),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Feature vectors of one word, `blocks[t][f * C + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordFeatures {
    pub blocks: Vec<Vec<FeatureVector>>,
    pub frames: usize,
    pub cells: usize,
}

impl WordFeatures {
    pub fn iter_vectors(&self) -> impl Iterator<Item = &FeatureVector> {
        self.blocks.iter().flatten()
    }
}

/// `(n, m)` pairs in output order.
pub fn zernike_indices(max_order: usize) -> Vec<(usize, usize)> {
    (0..=max_order)
        .flat_map(|n| {
            (0..=n)
                .filter(move |m| (n - m) % 2 == 0)
                .map(move |m| (n, m))
        })
        .collect()
}

pub fn feature_dimension(max_order: usize) -> usize {
    HU_COUNT + zernike_indices(max_order).len()
}

/// Central moments up to order 3, indexed `mu[p][q]`.
fn central_moments(cell: &BinaryImage) -> Option<(f64, [[f64; 4]; 4])> {
    let (r0, c0, r1, c1) = cell.bounding_box()?;
    // coordinates relative to the ink box so whole-pixel shifts give identical sums
    let mut m00 = 0.0;
    let mut m10 = 0.0;
    let mut m01 = 0.0;
    for r in r0..r1 {
        for c in c0..c1 {
            if cell.get(r, c) {
                m00 += 1.0;
                m10 += (c - c0) as f64;
                m01 += (r - r0) as f64;
            }
        }
    }
    let (xbar, ybar) = (m10 / m00, m01 / m00);
    let mut mu = [[0.0; 4]; 4];
    for r in r0..r1 {
        for c in c0..c1 {
            if !cell.get(r, c) {
                continue;
            }
            let dx = (c - c0) as f64 - xbar;
            let dy = (r - r0) as f64 - ybar;
            let (dx2, dy2) = (dx * dx, dy * dy);
            mu[2][0] += dx2;
            mu[0][2] += dy2;
            mu[1][1] += dx * dy;
            mu[3][0] += dx2 * dx;
            mu[0][3] += dy2 * dy;
            mu[2][1] += dx2 * dy;
            mu[1][2] += dx * dy2;
        }
    }
    mu[0][0] = m00;
    Some((m00, mu))
}

/// Hu's seven invariants of the normalised central moments; zeros for a
/// blank cell.
pub fn hu_moments(cell: &BinaryImage) -> [f64; HU_COUNT] {
    let Some((m00, mu)) = central_moments(cell) else {
        return [0.0; HU_COUNT];
    };
    let eta = |p: usize, q: usize| mu[p][q] / m00.powf(1.0 + (p + q) as f64 / 2.0);
    let (n20, n02, n11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (n30, n03, n21, n12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));

    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;
    [
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ]
}

/// Coefficients of the radial polynomial `R_nm` as `(power, coefficient)`.
fn radial_coefficients(n: usize, m: usize) -> Vec<(usize, f64)> {
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    (0..=(n - m) / 2)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            let coeff =
                sign * fact(n - s) / (fact(s) * fact((n + m) / 2 - s) * fact((n - m) / 2 - s));
            (n - 2 * s, coeff)
        })
        .collect()
}

/// Zernike magnitudes over a disc centred on the ink centroid, radius half
/// the cell's shorter side. Ink outside the disc is ignored; sums are scaled
/// by the per-pixel disc area (π over the number of lattice points in the disc).
pub fn zernike_moments(cell: &BinaryImage, max_order: i64) -> Result<Vec<f64>, FeatureError> {
    if max_order < 0 {
        return Err(FeatureError::InvalidOrder(max_order));
    }
    let max_order = max_order as usize;
    let indices = zernike_indices(max_order);
    let Some((r0, c0, r1, c1)) = cell.bounding_box() else {
        return Ok(vec![0.0; indices.len()]);
    };
    let radial: Vec<_> = indices
        .iter()
        .map(|&(n, m)| radial_coefficients(n, m))
        .collect();

    // ink-box-relative coordinates keep whole-pixel shifts exact
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for r in r0..r1 {
        for c in c0..c1 {
            if cell.get(r, c) {
                m00 += 1.0;
                m10 += (c - c0) as f64;
                m01 += (r - r0) as f64;
            }
        }
    }
    let (xbar, ybar) = (m10 / m00, m01 / m00);
    let radius = cell.width().min(cell.height()) as f64 / 2.0;

    let reach = radius.ceil() as i64 + 1;
    let (xi, yi) = (xbar.floor() as i64, ybar.floor() as i64);
    let mut disc_pixels = 0usize;
    for dy in yi - reach..=yi + reach {
        for dx in xi - reach..=xi + reach {
            let (x, y) = (dx as f64 - xbar, dy as f64 - ybar);
            if x * x + y * y <= radius * radius {
                disc_pixels += 1;
            }
        }
    }

    let mut re = vec![0.0; indices.len()];
    let mut im = vec![0.0; indices.len()];
    let mut rho_pow = vec![0.0; max_order + 1];
    let mut cos_m = vec![0.0; max_order + 1];
    let mut sin_m = vec![0.0; max_order + 1];
    for r in r0..r1 {
        let y = ((r - r0) as f64 - ybar) / radius;
        for c in c0..c1 {
            if !cell.get(r, c) {
                continue;
            }
            let x = ((c - c0) as f64 - xbar) / radius;
            let rho2 = x * x + y * y;
            if rho2 > 1.0 {
                continue;
            }
            let rho = rho2.sqrt();
            let (ct, st) = if rho > 0.0 {
                (x / rho, y / rho)
            } else {
                (1.0, 0.0)
            };
            rho_pow[0] = 1.0;
            cos_m[0] = 1.0;
            sin_m[0] = 0.0;
            for k in 1..=max_order {
                rho_pow[k] = rho_pow[k - 1] * rho;
                cos_m[k] = cos_m[k - 1] * ct - sin_m[k - 1] * st;
                sin_m[k] = sin_m[k - 1] * ct + cos_m[k - 1] * st;
            }
            for (i, &(_, m)) in indices.iter().enumerate() {
                let rv: f64 = radial[i].iter().map(|&(p, k)| k * rho_pow[p]).sum();
                // conj(V_nm) = R_nm(ρ) e^{-imθ}
                re[i] += rv * cos_m[m];
                im[i] -= rv * sin_m[m];
            }
        }
    }
    let area = PI / disc_pixels as f64;
    Ok(indices
        .iter()
        .enumerate()
        .map(|(i, &(n, _))| (n as f64 + 1.0) / PI * area * re[i].hypot(im[i]))
        .collect())
}

pub fn cell_features(cell: &BinaryImage, max_order: usize) -> FeatureVector {
    let mut v = hu_moments(cell).to_vec();
    v.extend(zernike_moments(cell, max_order as i64).expect("order is non-negative"));
    FeatureVector(v)
}

/// One vector per cell in block, frame, cell order.
pub fn extract_features(grid: &CellGrid, max_order: usize) -> WordFeatures {
    let blocks = grid
        .blocks
        .iter()
        .map(|b| {
            b.cells
                .iter()
                .map(|c| cell_features(c, max_order))
                .collect()
        })
        .collect();
    WordFeatures {
        blocks,
        frames: grid.frames_per_block,
        cells: grid.cells_per_frame,
    }
}

/// Per-component z-scoring. A constant component gets unit scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        let rows: Vec<&[f64]> = vectors.into_iter().collect();
        for v in &rows {
            for (s, x) in sum.iter_mut().zip(v.iter()) {
                *s += x;
            }
            n += 1;
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for v in &rows {
            for ((q, x), m) in sq.iter_mut().zip(v.iter()).zip(&mean) {
                *q += (x - m) * (x - m);
            }
        }
        let std = sq
            .iter()
            .map(|q| {
                let s = (q / n as f64).sqrt();
                if s > 1e-12 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }
}

/// Writes `word_id,block,frame,cell,v0..v{d-1}` rows.
pub fn write_feature_csv<'a, W: Write>(
    mut out: W,
    words: impl IntoIterator<Item = (&'a str, &'a WordFeatures)>,
) -> std::io::Result<()> {
    let mut header_written = false;
    for (word_id, feats) in words {
        for (b, block) in feats.blocks.iter().enumerate() {
            for (i, v) in block.iter().enumerate() {
                if !header_written {
                    write!(out, "word_id,block,frame,cell")?;
                    for k in 0..v.len() {
                        write!(out, ",v{k}")?;
                    }
                    writeln!(out)?;
                    header_written = true;
                }
                write!(out, "{word_id},{b},{},{}", i / feats.cells, i % feats.cells)?;
                for x in v.as_slice() {
                    write!(out, ",{x:e}")?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

//! Independent reference implementations used as test oracles.
#![allow(dead_code, clippy::needless_range_loop)]

use dhbn::dhbn::{Topology, WordModel};
use dhbn::imaging::BinaryImage;
use dhbn::quantize::SymbolSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_row(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| 0.05 + rng.random::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// A model with strongly non-uniform random parameters.
pub fn random_model(
    n: usize,
    s: usize,
    f: usize,
    c: usize,
    k: usize,
    topology: Topology,
    rng: &mut impl Rng,
) -> WordModel {
    let trans = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    if topology.allows(i, j, n) {
                        0.05 + rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    WordModel {
        n_root: n,
        n_sub: s,
        n_frames: f,
        n_cells: c,
        n_symbols: k,
        topology,
        pi: random_row(n, rng),
        trans,
        frame_cpt: (0..f)
            .map(|_| (0..n).map(|_| random_row(s, rng)).collect())
            .collect(),
        emit: (0..s).map(|_| random_row(k, rng)).collect(),
    }
}

pub fn random_sequence(t: usize, slice_len: usize, k: usize, rng: &mut impl Rng) -> SymbolSequence {
    SymbolSequence::new(
        (0..t)
            .map(|_| (0..slice_len).map(|_| rng.random_range(0..k)).collect())
            .collect(),
    )
}

/// `P(slice | root)` by summing over every joint sub-state assignment.
pub fn brute_slice_prob(m: &WordModel, slice: &[usize], root: usize) -> f64 {
    let combos = m.n_sub.pow(m.n_frames as u32);
    let mut total = 0.0;
    for code in 0..combos {
        let mut rest = code;
        let mut p = 1.0;
        for f in 0..m.n_frames {
            let s = rest % m.n_sub;
            rest /= m.n_sub;
            p *= m.frame_cpt[f][root][s];
            for c in 0..m.n_cells {
                p *= m.emit[s][slice[f * m.n_cells + c]];
            }
        }
        total += p;
    }
    total
}

fn paths(n: usize, t: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n.pow(t as u32)).map(move |mut code| {
        (0..t)
            .map(|_| {
                let s = code % n;
                code /= n;
                s
            })
            .collect()
    })
}

/// Joint probability of a root path and the observations.
pub fn path_prob(m: &WordModel, seq: &SymbolSequence, path: &[usize]) -> f64 {
    let mut p = m.pi[path[0]] * brute_slice_prob(m, &seq.slices[0], path[0]);
    for t in 1..path.len() {
        p *= m.trans[path[t - 1]][path[t]] * brute_slice_prob(m, &seq.slices[t], path[t]);
    }
    p
}

/// `log P(Y)` summed over all `N^T` root paths.
pub fn brute_forward(m: &WordModel, seq: &SymbolSequence) -> f64 {
    paths(m.n_root, seq.len())
        .map(|p| path_prob(m, seq, &p))
        .sum::<f64>()
        .ln()
}

/// Exhaustive argmax over root paths (first maximum in enumeration order).
pub fn brute_viterbi(m: &WordModel, seq: &SymbolSequence) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for p in paths(m.n_root, seq.len()) {
        let v = path_prob(m, seq, &p);
        if v > best.1 {
            best = (p, v);
        }
    }
    (best.0, best.1.ln())
}

/// Plain discrete HMM forward pass with per-step scaling. `b[j][t]` is the
/// probability of observation `t` in state `j`.
pub fn plain_hmm_loglik(pi: &[f64], a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = pi.len();
    let t_len = b[0].len();
    let mut alpha: Vec<f64> = (0..n).map(|j| pi[j] * b[j][0]).collect();
    let mut loglik = 0.0;
    for t in 0..t_len {
        if t > 0 {
            alpha = (0..n)
                .map(|j| (0..n).map(|i| alpha[i] * a[i][j]).sum::<f64>() * b[j][t])
                .collect();
        }
        let scale: f64 = alpha.iter().sum();
        loglik += scale.ln();
        alpha.iter_mut().for_each(|v| *v /= scale);
    }
    loglik
}

/// Relative error for log-probabilities; below magnitude 1 the difference
/// is taken absolutely, which bounds the relative error of the probability.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(1.0)
    }
}

/// Raw moment `Σ x^p y^q` over ink pixels, pixel indices as coordinates.
fn raw_moment(img: &BinaryImage, p: i32, q: i32) -> f64 {
    let mut sum = 0.0;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(y, x) {
                sum += (x as f64).powi(p) * (y as f64).powi(q);
            }
        }
    }
    sum
}

/// Hu invariants from a direct double sum: raw moments, then central moments
/// about the centroid, then normalised moments.
pub fn oracle_hu(img: &BinaryImage) -> [f64; 7] {
    let m00 = raw_moment(img, 0, 0);
    if m00 == 0.0 {
        return [0.0; 7];
    }
    let xc = raw_moment(img, 1, 0) / m00;
    let yc = raw_moment(img, 0, 1) / m00;
    let mu = |p: i32, q: i32| {
        let mut sum = 0.0;
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(y, x) {
                    sum += (x as f64 - xc).powi(p) * (y as f64 - yc).powi(q);
                }
            }
        }
        sum
    };
    let eta = |p: i32, q: i32| mu(p, q) / m00.powf(1.0 + (p + q) as f64 / 2.0);
    let (e20, e02, e11) = (eta(2, 0), eta(0, 2), eta(1, 1));
    let (e30, e03, e21, e12) = (eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2));
    [
        e20 + e02,
        (e20 - e02).powi(2) + 4.0 * e11.powi(2),
        (e30 - 3.0 * e12).powi(2) + (3.0 * e21 - e03).powi(2),
        (e30 + e12).powi(2) + (e21 + e03).powi(2),
        (e30 - 3.0 * e12) * (e30 + e12) * ((e30 + e12).powi(2) - 3.0 * (e21 + e03).powi(2))
            + (3.0 * e21 - e03) * (e21 + e03) * (3.0 * (e30 + e12).powi(2) - (e21 + e03).powi(2)),
        (e20 - e02) * ((e30 + e12).powi(2) - (e21 + e03).powi(2))
            + 4.0 * e11 * (e30 + e12) * (e21 + e03),
        (3.0 * e21 - e03) * (e30 + e12) * ((e30 + e12).powi(2) - 3.0 * (e21 + e03).powi(2))
            - (e30 - 3.0 * e12) * (e21 + e03) * (3.0 * (e30 + e12).powi(2) - (e21 + e03).powi(2)),
    ]
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn radial(n: usize, m: usize, rho: f64) -> f64 {
    (0..=(n - m) / 2)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n - s)
                / (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s))
                * rho.powi((n - 2 * s) as i32)
        })
        .sum()
}

/// Zernike magnitudes by direct complex summation over a disc of radius
/// half the shorter side, centred on the ink centroid, normalised by the
/// number of lattice points in the disc.
pub fn oracle_zernike(img: &BinaryImage, max_order: usize) -> Vec<f64> {
    let order: Vec<(usize, usize)> = (0..=max_order)
        .flat_map(|n| {
            (0..=n)
                .filter(move |m| (n - m) % 2 == 0)
                .map(move |m| (n, m))
        })
        .collect();
    let m00 = raw_moment(img, 0, 0);
    if m00 == 0.0 {
        return vec![0.0; order.len()];
    }
    let xc = raw_moment(img, 1, 0) / m00;
    let yc = raw_moment(img, 0, 1) / m00;
    let radius = img.width().min(img.height()) as f64 / 2.0;
    let reach = radius as i64 + 2;
    let mut lattice = 0usize;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (x, y) = (xc.floor() + dx as f64 - xc, yc.floor() + dy as f64 - yc);
            if x * x + y * y <= radius * radius {
                lattice += 1;
            }
        }
    }
    order
        .iter()
        .map(|&(n, m)| {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if !img.get(y, x) {
                        continue;
                    }
                    let (u, v) = ((x as f64 - xc) / radius, (y as f64 - yc) / radius);
                    let rho = u.hypot(v);
                    if rho > 1.0 {
                        continue;
                    }
                    let theta = v.atan2(u);
                    let r = radial(n, m, rho);
                    re += r * (m as f64 * theta).cos();
                    im -= r * (m as f64 * theta).sin();
                }
            }
            (n as f64 + 1.0) / std::f64::consts::PI
                * (std::f64::consts::PI / lattice as f64)
                * re.hypot(im)
        })
        .collect()
}

/// Shape `id` drawn centred in an `n × n` canvas, box half-edge `half`,
/// rotated by `degrees`.
pub fn glyph(id: usize, n: usize, half: f64, degrees: f64) -> BinaryImage {
    let c = n as f64 / 2.0;
    let (cos, sin) = (degrees.to_radians().cos(), degrees.to_radians().sin());
    BinaryImage::from_fn(n, n, |r, col| {
        let (x, y) = (col as f64 + 0.5 - c, r as f64 + 0.5 - c);
        let u = (cos * x + sin * y) / half;
        let v = (-sin * x + cos * y) / half;
        u.abs() <= 1.0 && v.abs() <= 1.0 && dhbn::harness::prototype_contains(id, u, v)
    })
}

pub fn shift(img: &BinaryImage, dr: usize, dc: usize) -> BinaryImage {
    BinaryImage::from_fn(img.width(), img.height(), |r, c| {
        r >= dr && c >= dc && img.get(r - dr, c - dc)
    })
}

/// Component-wise relative deviation. Components smaller than `frac` times
/// the largest magnitude in either vector are measured against that floor.
pub fn max_rel_dev(a: &[f64], b: &[f64], frac: f64) -> f64 {
    let top = a.iter().chain(b).fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = frac * top;
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs()).max(floor);
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// 8-connected flood fill; returns the size of the component owning each
/// pixel (0 for background).
pub fn flood_fill_sizes(img: &BinaryImage) -> Vec<usize> {
    let (w, h) = (img.width(), img.height());
    let mut comp = vec![usize::MAX; w * h];
    let mut sizes = Vec::new();
    for start in 0..w * h {
        if !img.pixels()[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (r, c) = ((p / w) as i64, (p % w) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                        continue;
                    }
                    let q = nr as usize * w + nc as usize;
                    if img.pixels()[q] && comp[q] == usize::MAX {
                        comp[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        sizes.push(size);
    }
    comp.iter()
        .map(|&c| if c == usize::MAX { 0 } else { sizes[c] })
        .collect()
}

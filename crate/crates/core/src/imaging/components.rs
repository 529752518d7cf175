use super::{BinaryImage, ImagingError};

/// 8-connected component labelling. Label 0 is background; components are
/// numbered `1..=count` in raster order of their first pixel.
#[derive(Clone, Debug)]
pub struct ComponentLabels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub areas: Vec<usize>,
}

impl ComponentLabels {
    pub fn count(&self) -> usize {
        self.areas.len()
    }

    pub fn area(&self, label: u32) -> usize {
        self.areas[label as usize - 1]
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labelling.
pub fn label_components(img: &BinaryImage) -> ComponentLabels {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for r in 0..h {
        for c in 0..w {
            if !img.get(r, c) {
                continue;
            }
            // already-visited neighbours: W, NW, N, NE
            let mut neighbours = [0u32; 4];
            let mut k = 0;
            if c > 0 {
                neighbours[k] = labels[r * w + c - 1];
                k += 1;
            }
            if r > 0 {
                if c > 0 {
                    neighbours[k] = labels[(r - 1) * w + c - 1];
                    k += 1;
                }
                neighbours[k] = labels[(r - 1) * w + c];
                k += 1;
                if c + 1 < w {
                    neighbours[k] = labels[(r - 1) * w + c + 1];
                    k += 1;
                }
            }
            let mut current = 0u32;
            for &n in neighbours[..k].iter().filter(|&&n| n != 0) {
                if current == 0 {
                    current = n;
                } else {
                    union(&mut parent, current, n);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[r * w + c] = current;
        }
    }

    // compact roots to 1..=count in order of first appearance
    let mut remap = vec![0u32; parent.len()];
    let mut areas = Vec::new();
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *l);
        if remap[root as usize] == 0 {
            areas.push(0);
            remap[root as usize] = areas.len() as u32;
        }
        *l = remap[root as usize];
        areas[*l as usize - 1] += 1;
    }

    ComponentLabels {
        width: w,
        height: h,
        labels,
        areas,
    }
}

/// Drops every component smaller than `area_ratio` times the largest one.
pub fn remove_diacritics(img: &BinaryImage, area_ratio: f64) -> Result<BinaryImage, ImagingError> {
    let comps = label_components(img);
    let largest = comps
        .areas
        .iter()
        .copied()
        .max()
        .ok_or(ImagingError::EmptyImage)?;
    let min_area = area_ratio * largest as f64;
    let keep: Vec<bool> = comps.areas.iter().map(|&a| a as f64 >= min_area).collect();
    let pixels = comps
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    BinaryImage::new(img.width(), img.height(), pixels)
}

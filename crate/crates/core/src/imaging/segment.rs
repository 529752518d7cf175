use super::{BinaryImage, ImagingError};

/// Per-column ink mass.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionHistogram {
    pub values: Vec<f64>,
}

impl ProjectionHistogram {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Sorted, disjoint, half-open column ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentBounds {
    pub intervals: Vec<(usize, usize)>,
}

impl SegmentBounds {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

pub fn vertical_projection(img: &BinaryImage) -> ProjectionHistogram {
    let mut values = vec![0.0; img.width()];
    for r in 0..img.height() {
        for (c, v) in values.iter_mut().enumerate() {
            if img.get(r, c) {
                *v += 1.0;
            }
        }
    }
    ProjectionHistogram { values }
}

/// Centred moving average; windows are truncated at the ends and averaged
/// over the columns they actually cover.
pub fn smooth_histogram(
    hist: &ProjectionHistogram,
    width: usize,
) -> Result<ProjectionHistogram, ImagingError> {
    let n = hist.len();
    if width == 0 || width.is_multiple_of(2) || width > n {
        return Err(ImagingError::InvalidWidth { width, len: n });
    }
    if width == 1 {
        return Ok(hist.clone());
    }
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in &hist.values {
        prefix.push(prefix.last().unwrap() + v);
    }
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    Ok(ProjectionHistogram { values })
}

/// Narrowest interval kept on its own; anything thinner is merged.
const MIN_INTERVAL_WIDTH: usize = 2;

/// Cuts the histogram at valley columns (value ≤ `valley_frac` × max).
/// Runs narrower than two columns are merged into the nearest neighbour.
pub fn segment_characters(
    hist: &ProjectionHistogram,
    valley_frac: f64,
) -> Result<SegmentBounds, ImagingError> {
    segment_characters_with_min_width(hist, valley_frac, MIN_INTERVAL_WIDTH)
}

/// As [`segment_characters`], merging runs narrower than `min_width`
/// (nearest neighbour by gap, ties to the left).
pub fn segment_characters_with_min_width(
    hist: &ProjectionHistogram,
    valley_frac: f64,
    min_width: usize,
) -> Result<SegmentBounds, ImagingError> {
    let max = hist.max();
    if max <= 0.0 {
        return Err(ImagingError::NoForeground);
    }
    let threshold = valley_frac * max;
    let mut intervals = Vec::new();
    let mut start = None;
    for (j, &v) in hist.values.iter().enumerate() {
        match (v > threshold, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                intervals.push((s, j));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, hist.len()));
    }

    while intervals.len() > 1 {
        let Some(i) = intervals.iter().position(|&(s, e)| e - s < min_width) else {
            break;
        };
        let left_gap = (i > 0).then(|| intervals[i].0 - intervals[i - 1].1);
        let right_gap = intervals.get(i + 1).map(|next| next.0 - intervals[i].1);
        let target = match (left_gap, right_gap) {
            (Some(l), Some(r)) if r < l => i + 1,
            (Some(_), _) => i - 1,
            (None, _) => i + 1,
        };
        let (a, b) = (i.min(target), i.max(target));
        intervals[a] = (intervals[a].0, intervals[b].1);
        intervals.remove(b);
    }
    Ok(SegmentBounds { intervals })
}

/// One character block cut into `frames × cells` sub-images (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct CharacterBlock {
    pub columns: (usize, usize),
    pub cells: Vec<BinaryImage>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    pub blocks: Vec<CharacterBlock>,
    pub frames_per_block: usize,
    pub cells_per_frame: usize,
}

impl CellGrid {
    pub fn cell(&self, block: usize, frame: usize, cell: usize) -> &BinaryImage {
        &self.blocks[block].cells[frame * self.cells_per_frame + cell]
    }

    pub fn cells_per_block(&self) -> usize {
        self.frames_per_block * self.cells_per_frame
    }
}

/// Splits `len` into `parts` near-equal pieces; the first `len % parts`
/// pieces are one longer.
pub(crate) fn uniform_pieces(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let piece = (start, start + size);
            start += size;
            piece
        })
        .collect()
}

pub fn split_grid(
    img: &BinaryImage,
    bounds: &SegmentBounds,
    frames: usize,
    cells: usize,
) -> Result<CellGrid, ImagingError> {
    if bounds.is_empty() {
        return Err(ImagingError::DegenerateBlock("no intervals".into()));
    }
    if frames == 0 || cells == 0 {
        return Err(ImagingError::DegenerateBlock(format!(
            "grid {frames}x{cells} has a zero dimension"
        )));
    }
    if img.height() < frames {
        return Err(ImagingError::DegenerateBlock(format!(
            "image height {} < {frames} frames",
            img.height()
        )));
    }
    let bands = uniform_pieces(img.height(), frames);
    let mut blocks = Vec::with_capacity(bounds.len());
    for &(start, end) in &bounds.intervals {
        if end > img.width() || end <= start {
            return Err(ImagingError::DegenerateBlock(format!(
                "interval ({start},{end}) outside width {}",
                img.width()
            )));
        }
        if end - start < cells {
            return Err(ImagingError::DegenerateBlock(format!(
                "interval ({start},{end}) narrower than {cells} cells"
            )));
        }
        let cols = uniform_pieces(end - start, cells);
        let mut block_cells = Vec::with_capacity(frames * cells);
        for &(r0, r1) in &bands {
            for &(c0, c1) in &cols {
                block_cells.push(img.crop(r0..r1, start + c0..start + c1));
            }
        }
        blocks.push(CharacterBlock {
            columns: (start, end),
            cells: block_cells,
        });
    }
    Ok(CellGrid {
        blocks,
        frames_per_block: frames,
        cells_per_frame: cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(v: &[f64]) -> ProjectionHistogram {
        ProjectionHistogram::new(v.to_vec())
    }

    #[test]
    fn projection_of_blank_and_single_column() {
        assert_eq!(
            vertical_projection(&BinaryImage::blank(5, 3)).values,
            vec![0.0; 5]
        );
        let img = BinaryImage::from_fn(5, 7, |_, c| c == 2);
        assert_eq!(
            vertical_projection(&img).values,
            vec![0.0, 0.0, 7.0, 0.0, 0.0]
        );
    }

    #[test]
    fn smoothing_examples() {
        let h = hist(&[1.0, 5.0, 2.0, 0.0]);
        assert_eq!(smooth_histogram(&h, 1).unwrap(), h);
        assert_eq!(
            smooth_histogram(&hist(&[4.0; 4]), 3).unwrap().values,
            vec![4.0; 4]
        );
        assert_eq!(
            smooth_histogram(&hist(&[0.0, 0.0, 6.0, 0.0, 0.0]), 3)
                .unwrap()
                .values,
            vec![0.0, 2.0, 2.0, 2.0, 0.0]
        );
    }

    #[test]
    fn smoothing_rejects_bad_widths() {
        let h = hist(&[1.0, 2.0, 3.0]);
        for w in [0, 2, 4, 5] {
            assert!(matches!(
                smooth_histogram(&h, w),
                Err(ImagingError::InvalidWidth { .. })
            ));
        }
    }

    #[test]
    fn zero_gaps_separate_characters() {
        let b = segment_characters(&hist(&[0., 5., 5., 0., 0., 7., 7., 0.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(1, 3), (5, 7)]);
    }

    #[test]
    fn all_zero_histogram() {
        assert!(matches!(
            segment_characters(&hist(&[0.0; 6]), 0.05),
            Err(ImagingError::NoForeground)
        ));
    }

    #[test]
    fn narrow_interval_merges_into_nearest() {
        // (0,3) gap 1 -> (4,5) gap 3 -> (8,10): merges left
        let b = segment_characters(&hist(&[9., 9., 9., 0., 9., 0., 0., 0., 9., 9.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(0, 5), (8, 10)]);
        // equal gaps: tie goes left
        let b = segment_characters(&hist(&[9., 9., 0., 9., 0., 9., 9.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(0, 4), (5, 7)]);
        // leading narrow interval merges right
        let b = segment_characters(&hist(&[9., 0., 9., 9.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(0, 4)]);
    }

    #[test]
    fn lone_narrow_interval_survives() {
        let b = segment_characters(&hist(&[0., 3., 0.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(1, 2)]);
    }

    #[test]
    fn valley_threshold_is_relative() {
        // 0.4 ≤ 0.05 * 10 = 0.5 counts as a valley
        let b = segment_characters(&hist(&[10., 10., 0.4, 10., 10.]), 0.05).unwrap();
        assert_eq!(b.intervals, vec![(0, 2), (3, 5)]);
    }

    #[test]
    fn uniform_grid() {
        let img = BinaryImage::from_fn(60, 90, |r, c| (r + c) % 3 == 0);
        let bounds = SegmentBounds {
            intervals: vec![(0, 60)],
        };
        let grid = split_grid(&img, &bounds, 3, 2).unwrap();
        assert_eq!(grid.blocks.len(), 1);
        assert_eq!(grid.blocks[0].cells.len(), 6);
        for cell in &grid.blocks[0].cells {
            assert_eq!((cell.height(), cell.width()), (30, 30));
        }
    }

    #[test]
    fn remainder_goes_to_leading_pieces() {
        assert_eq!(uniform_pieces(100, 3), vec![(0, 34), (34, 67), (67, 100)]);
        let img = BinaryImage::blank(10, 100);
        let grid = split_grid(
            &img,
            &SegmentBounds {
                intervals: vec![(2, 7)],
            },
            3,
            2,
        )
        .unwrap();
        let heights: Vec<_> = (0..3).map(|f| grid.cell(0, f, 0).height()).collect();
        assert_eq!(heights, vec![34, 33, 33]);
        assert_eq!(grid.cell(0, 0, 0).width(), 3);
        assert_eq!(grid.cell(0, 0, 1).width(), 2);
    }

    #[test]
    fn degenerate_blocks() {
        let img = BinaryImage::blank(10, 2);
        let narrow = SegmentBounds {
            intervals: vec![(0, 1)],
        };
        assert!(matches!(
            split_grid(&img, &narrow, 1, 2),
            Err(ImagingError::DegenerateBlock(_))
        ));
        let wide = SegmentBounds {
            intervals: vec![(0, 10)],
        };
        assert!(matches!(
            split_grid(&img, &wide, 3, 2),
            Err(ImagingError::DegenerateBlock(_))
        ));
    }
}

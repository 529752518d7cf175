mod common;

use common::*;
use dhbn::dhbn::{
    em_train, forward_loglik, viterbi_decode, EmConfig, Lexicon, ModelShape, Topology, WordModel,
};
use dhbn::features::{hu_moments, zernike_moments, FeatureVector};
use dhbn::harness::{precision_recall, Config, Prediction};
use dhbn::imaging::{
    preprocess, segment_characters, smooth_histogram, split_grid, vertical_projection, BinaryImage,
    ProjectionHistogram, SegmentBounds,
};
use dhbn::quantize::{kmeans_fit, KMeansConfig, SymbolSequence};
use proptest::prelude::*;
use rand::Rng;

fn image() -> impl Strategy<Value = BinaryImage> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<bool>(), w * h)
            .prop_map(move |px| BinaryImage::new(w, h, px).unwrap())
    })
}

fn inked_image() -> impl Strategy<Value = BinaryImage> {
    image().prop_filter("needs ink", |img| img.foreground_count() > 0)
}

fn topology() -> impl Strategy<Value = Topology> {
    prop_oneof![Just(Topology::Ergodic), Just(Topology::LeftRight)]
}

fn assert_stochastic(m: &WordModel) {
    let rows = std::iter::once(&m.pi)
        .chain(&m.trans)
        .chain(m.frame_cpt.iter().flatten())
        .chain(&m.emit);
    for row in rows {
        assert!(row.iter().all(|&v| v >= 0.0 && v.is_finite()));
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unsmoothed_projection_sums_to_ink(img in image()) {
        let h = vertical_projection(&img);
        prop_assert_eq!(h.len(), img.width());
        prop_assert!(h.values.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(h.values.iter().sum::<f64>(), img.foreground_count() as f64);
    }

    #[test]
    fn smoothing_keeps_length_and_range(values in proptest::collection::vec(0.0f64..50.0, 1..60), half in 0usize..6) {
        let width = 2 * half + 1;
        prop_assume!(width <= values.len());
        let h = ProjectionHistogram::new(values.clone());
        let s = smooth_histogram(&h, width).unwrap();
        prop_assert_eq!(s.len(), values.len());
        let max = values.iter().copied().fold(0.0, f64::max);
        prop_assert!(s.values.iter().all(|&v| v >= -1e-12 && v <= max + 1e-9));
    }

    #[test]
    fn segment_bounds_are_sorted_disjoint_and_inside(values in proptest::collection::vec(0.0f64..10.0, 1..80), frac in 0.0f64..0.5) {
        let h = ProjectionHistogram::new(values.clone());
        prop_assume!(h.max() > 0.0);
        let b = segment_characters(&h, frac).unwrap();
        prop_assert!(!b.is_empty());
        for &(s, e) in &b.intervals {
            prop_assert!(s < e && e <= values.len());
        }
        for w in b.intervals.windows(2) {
            prop_assert!(w[0].1 <= w[1].0);
        }
    }

    #[test]
    fn grid_partitions_each_block(img in inked_image(), frames in 1usize..4, cells in 1usize..4) {
        prop_assume!(img.height() >= frames && img.width() >= cells);
        let bounds = SegmentBounds { intervals: vec![(0, img.width())] };
        let grid = split_grid(&img, &bounds, frames, cells).unwrap();
        let block = &grid.blocks[0];
        prop_assert_eq!(block.cells.len(), frames * cells);
        let heights: usize = (0..frames).map(|f| grid.cell(0, f, 0).height()).sum();
        prop_assert_eq!(heights, img.height());
        for f in 0..frames {
            let widths: usize = (0..cells).map(|c| grid.cell(0, f, c).width()).sum();
            prop_assert_eq!(widths, img.width());
        }
        let ink: usize = block.cells.iter().map(BinaryImage::foreground_count).sum();
        prop_assert_eq!(ink, img.foreground_count());
    }

    #[test]
    fn preprocess_hits_target_and_is_idempotent(img in inked_image(), h in 1usize..30, w in 1usize..30) {
        let out = preprocess(&img, h, w).unwrap();
        prop_assert_eq!((out.height(), out.width()), (h, w));
        if out.bounding_box() == Some((0, 0, h, w)) {
            prop_assert_eq!(preprocess(&out, h, w).unwrap(), out);
        }
    }

    #[test]
    fn hu_is_bit_exact_under_translation(img in inked_image(), dr in 0usize..5, dc in 0usize..5) {
        let (w, h) = (img.width(), img.height());
        let moved = BinaryImage::from_fn(w + dc, h + dr, |r, c| r >= dr && c >= dc && img.get(r - dr, c - dc));
        prop_assert_eq!(hu_moments(&img), hu_moments(&moved));
    }

    #[test]
    fn moments_match_double_sum_oracle(img in image()) {
        let hu = hu_moments(&img);
        prop_assert!(max_rel_dev(&hu, &oracle_hu(&img), 1e-9) < 1e-8);
        let z = zernike_moments(&img, 6).unwrap();
        prop_assert!(max_rel_dev(&z, &oracle_zernike(&img, 6), 1e-6) < 1e-8);
        prop_assert!(hu.iter().chain(&z).all(|v| v.is_finite()));
    }

    #[test]
    fn assign_symbol_matches_exhaustive_scan(seed in any::<u64>(), k in 1usize..8) {
        let mut r = rng(seed);
        let data: Vec<FeatureVector> = (0..40)
            .map(|_| FeatureVector((0..3).map(|_| r.random::<f64>() * 4.0).collect()))
            .collect();
        let cfg = KMeansConfig { standardize: seed % 2 == 0, ..KMeansConfig::new(k, seed) };
        let (cb, trace) = kmeans_fit(&data, &cfg).unwrap();
        for w in trace.distortion.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let z = |v: &[f64]| -> Vec<f64> {
            v.iter().enumerate().map(|(i, x)| (x - cb.standardizer.mean[i]) / cb.standardizer.std[i]).collect()
        };
        for _ in 0..20 {
            let v = FeatureVector((0..3).map(|_| r.random::<f64>() * 5.0 - 0.5).collect());
            let zv = z(v.as_slice());
            let mut best = (0, f64::INFINITY);
            for (i, c) in cb.centroids.iter().enumerate() {
                let d: f64 = c.iter().zip(&zv).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            prop_assert_eq!(cb.assign_symbol(&v).unwrap(), best.0);
        }
        for i in 0..cb.k() {
            prop_assert_eq!(cb.assign_symbol(&FeatureVector(cb.centroid_raw(i))).unwrap(), i);
        }
    }

    #[test]
    fn init_is_stochastic_and_deterministic(
        n in 1usize..6, s in 1usize..4, f in 1usize..4, c in 1usize..3, k in 1usize..7,
        topo in topology(), seed in any::<u64>(),
    ) {
        let shape = ModelShape::new(n, s, f, c, k);
        let m = WordModel::init(shape, topo, seed).unwrap();
        assert_stochastic(&m);
        for i in 0..n {
            for j in 0..n {
                if !topo.allows(i, j, n) {
                    prop_assert_eq!(m.trans[i][j], 0.0);
                }
            }
        }
        prop_assert_eq!(WordModel::init(shape, topo, seed).unwrap(), m);
    }

    #[test]
    fn em_stays_stochastic_and_monotone(seed in any::<u64>(), topo in topology()) {
        let mut r = rng(seed);
        let (n, s, f, c, k) = (r.random_range(1..5), r.random_range(1..4), r.random_range(1..3), r.random_range(1..3), r.random_range(1..5));
        let gen = random_model(n, s, f, c, k, topo, &mut r);
        let seqs: Vec<SymbolSequence> = (0..6).map(|_| gen.sample(r.random_range(1..6), &mut r).1).collect();
        let init = WordModel::init(gen.shape(), topo, seed).unwrap();
        let (m, report) = em_train(&init, &seqs, &EmConfig { max_iter: 15, tol: 0.0 }).unwrap();
        assert_stochastic(&m);
        let mut prev = report.initial_loglik;
        for &ll in &report.history {
            prop_assert!(ll >= prev - 1e-9, "{} -> {}", prev, ll);
            prev = ll;
        }
        for i in 0..n {
            for j in 0..n {
                if !topo.allows(i, j, n) {
                    prop_assert_eq!(m.trans[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn viterbi_beats_sampled_paths(seed in any::<u64>(), topo in topology()) {
        let mut r = rng(seed);
        let (n, s) = (r.random_range(1..5), r.random_range(1..4));
        let m = random_model(n, s, 2, 2, 4, topo, &mut r);
        let seq = random_sequence(r.random_range(1..6), 4, 4, &mut r);
        let (path, logp) = viterbi_decode(&m, &seq).unwrap();
        prop_assert!(rel_err(path_prob(&m, &seq, &path).ln(), logp) <= 1e-10);
        for _ in 0..1000 {
            let p: Vec<usize> = (0..seq.len()).map(|_| r.random_range(0..n)).collect();
            let v = path_prob(&m, &seq, &p);
            prop_assert!(v == 0.0 || v.ln() <= logp + 1e-10 * logp.abs().max(1.0));
        }
    }

    #[test]
    fn model_text_round_trip_is_exact(seed in any::<u64>(), topo in topology()) {
        let mut r = rng(seed);
        let m = random_model(r.random_range(1..5), r.random_range(1..4), 3, 2, 5, topo, &mut r);
        let back = WordModel::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn classify_is_sorted_and_complete(seed in any::<u64>()) {
        let mut r = rng(seed);
        let entries = (0..4)
            .map(|i| (format!("w{i}"), random_model(3, 2, 2, 1, 3, Topology::LeftRight, &mut r)))
            .collect();
        let lex = Lexicon::new(entries).unwrap();
        let seq = random_sequence(r.random_range(1..6), 2, 3, &mut r);
        let ranked = lex.classify(&seq).unwrap();
        prop_assert_eq!(ranked.len(), 4);
        for w in ranked.windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
        for (label, ll) in &ranked {
            prop_assert_eq!(*ll, forward_loglik(lex.get(label).unwrap(), &seq).unwrap());
        }
    }

    #[test]
    fn pr_curve_is_monotone(margins in proptest::collection::vec((0.0f64..20.0, any::<bool>()), 1..40), points in 2usize..80) {
        let preds: Vec<Prediction> = margins
            .iter()
            .enumerate()
            .map(|(i, &(m, ok))| Prediction {
                word_id: format!("s{i}"),
                truth: if ok { "a".into() } else { "b".into() },
                ranked: vec![("a".into(), -1.0), ("b".into(), -1.0 - m)],
            })
            .collect();
        let curve = precision_recall(&preds, points);
        prop_assert!(curve.len() > points);
        for w in curve.windows(2) {
            prop_assert!(w[1].precision <= w[0].precision);
            prop_assert!(w[1].recall >= w[0].recall);
        }
        for p in &curve {
            prop_assert!((0.0..=1.0).contains(&p.precision) && (0.0..=1.0).contains(&p.recall));
        }
        let correct = margins.iter().filter(|m| m.1).count() as f64 / margins.len() as f64;
        let last = curve.last().unwrap();
        prop_assert_eq!(last.accepted, margins.len());
        prop_assert!((last.recall - correct).abs() < 1e-12);
    }

    #[test]
    fn config_text_round_trip(width in 0usize..10, states in 1usize..30, seed in any::<u64>()) {
        let cfg = Config { smooth_width: 2 * width + 1, states, seed, ..Config::default() };
        prop_assert_eq!(Config::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn forward_survives_long_sequences() {
    let m = WordModel::init(ModelShape::new(4, 2, 3, 2, 6), Topology::LeftRight, 1).unwrap();
    let mut r = rng(4);
    let seq = random_sequence(5000, 6, 6, &mut r);
    let ll = forward_loglik(&m, &seq).unwrap();
    assert!(ll.is_finite() && ll < 0.0);
    let (path, logp) = viterbi_decode(&m, &seq).unwrap();
    assert_eq!(path.len(), 5000);
    assert!(logp.is_finite() && logp <= ll);
}

use std::collections::BTreeSet;

use proptest::prelude::*;
use ulcerbench_core::postprocess::*;
use ulcerbench_core::{BinaryMask, ProbMap};
use ulcerbench_oracles::{enclosing_box, flood_fill_components, PixelSet};

fn mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side, 0.1f64..0.7).prop_flat_map(|(h, w, density)| {
        prop::collection::vec(prop::bool::weighted(density), h * w)
            .prop_map(move |v| BinaryMask::from_fn(h, w, |x, y| v[y * w + x]).unwrap())
    })
}

fn probmap(max_side: usize) -> impl Strategy<Value = ProbMap> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(h, w)| {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..=1.0, 0.7f64..=1.0], h * w)
            .prop_map(move |v| ProbMap::new(h, w, v).unwrap())
    })
}

fn as_sets(components: &[Component]) -> BTreeSet<PixelSet> {
    components.iter().map(|c| c.pixels.iter().copied().collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn components_match_flood_fill(m in mask(32)) {
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let ours = connected_components(&m, conn);
            let oracle = flood_fill_components(&m, conn);
            prop_assert_eq!(ours.len(), oracle.len());
            prop_assert_eq!(as_sets(&ours), oracle.into_iter().collect::<BTreeSet<_>>());
            for c in &ours {
                let set: PixelSet = c.pixels.iter().copied().collect();
                prop_assert_eq!(c.bbox, enclosing_box(&set));
            }
        }
    }

    #[test]
    fn components_partition_the_foreground(m in mask(24)) {
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let comps = connected_components(&m, conn);
            let total: usize = comps.iter().map(|c| c.pixels.len()).sum();
            prop_assert_eq!(total, m.count_ones());
            let union: PixelSet = comps.iter().flat_map(|c| c.pixels.iter().copied()).collect();
            prop_assert_eq!(union.len(), total);
            prop_assert!(union.iter().all(|&(x, y)| m.get(x as usize, y as usize)));
            // each 8-connected region is a union of whole 4-connected regions
            prop_assert!(connected_components(&m, Connectivity::Eight).len() <= connected_components(&m, Connectivity::Four).len());
        }
    }

    #[test]
    fn component_order_is_canonical(m in mask(20)) {
        let comps = connected_components(&m, Connectivity::Eight);
        let keys: Vec<_> = comps.iter().map(|c| (c.bbox.ymin(), c.bbox.xmin(), c.area())).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        prop_assert_eq!(keys, sorted);
    }

    #[test]
    fn detections_are_thresholded_regions(map in probmap(40), min_area in 1u64..40, min_conf in 0.0f64..1.0) {
        let cfg = DetectConfig { min_area, min_mean_confidence: min_conf, ..Default::default() };
        let regions = detect_regions(&map, &cfg);
        let all = connected_components(&binarize(&map, cfg.pixel_threshold), cfg.connectivity);
        for r in &regions {
            prop_assert!(r.area() >= min_area);
            prop_assert!(r.mean_confidence >= min_conf);
            prop_assert!(r.bbox.fits_within(map.height(), map.width()));
            let mean = r.pixels.iter().map(|&(x, y)| map.get(x as usize, y as usize)).sum::<f64>() / r.area() as f64;
            prop_assert!((mean - r.mean_confidence).abs() < 1e-12);
            prop_assert!(all.iter().any(|c| c.pixels == r.pixels));
        }
        let kept = all
            .iter()
            .filter(|c| c.area() >= min_area)
            .filter(|c| region_confidence(&c.pixels, &map).unwrap() >= min_conf)
            .count();
        prop_assert_eq!(kept, regions.len());

        let dets = detect(&map, &cfg);
        prop_assert_eq!(dets.len(), regions.len());
        prop_assert!(dets.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_le()));
        prop_assert_eq!(detect(&map, &cfg), dets);
    }

    #[test]
    fn stricter_thresholds_keep_a_subset(map in probmap(30), a in 1u64..30, b in 1u64..30, c in 0.0f64..1.0, d in 0.0f64..1.0) {
        let loose = DetectConfig { min_area: a.min(b), min_mean_confidence: c.min(d), ..Default::default() };
        let strict = DetectConfig { min_area: a.max(b), min_mean_confidence: c.max(d), ..Default::default() };
        let l: BTreeSet<_> = detect(&map, &loose).into_iter().map(|d| d.bbox).collect();
        let s: BTreeSet<_> = detect(&map, &strict).into_iter().map(|d| d.bbox).collect();
        prop_assert!(s.is_subset(&l));
    }
}

fn block_map(size: usize, side: usize, value: f64) -> ProbMap {
    ProbMap::from_fn(size, size, |x, y| {
        if x >= 10 && y >= 10 && x < 10 + side && y < 10 + side {
            value
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn default_thresholds_at_their_boundaries() {
    let cfg = DetectConfig::default();
    let hit = detect(&block_map(64, 20, 0.9), &cfg);
    assert_eq!(hit.len(), 1);
    assert_eq!(
        (
            hit[0].bbox.xmin(),
            hit[0].bbox.ymin(),
            hit[0].bbox.xmax(),
            hit[0].bbox.ymax()
        ),
        (10, 10, 30, 30)
    );
    assert!(detect(&block_map(64, 10, 0.9), &cfg).is_empty());
    assert!(detect(&block_map(64, 20, 0.55), &cfg).is_empty());

    // 10 x 20 block: area exactly 200, mean exactly 0.6
    let edge = ProbMap::from_fn(40, 40, |x, y| if x < 10 && y < 20 { 0.6 } else { 0.0 }).unwrap();
    assert_eq!(detect(&edge, &cfg).len(), 1);
    let one_short = ProbMap::from_fn(40, 40, |x, y| {
        if x < 10 && y < 20 && (x, y) != (9, 19) {
            0.6
        } else {
            0.0
        }
    })
    .unwrap();
    assert!(detect(&one_short, &cfg).is_empty());
}

#[test]
fn diagonal_touching_respects_connectivity() {
    let map = ProbMap::from_fn(40, 40, |x, y| {
        if (x < 15 && y < 15) || (x >= 15 && y >= 15 && x < 30 && y < 30) {
            0.9
        } else {
            0.0
        }
    })
    .unwrap();
    let eight = DetectConfig {
        min_area: 100,
        ..Default::default()
    };
    let four = DetectConfig {
        connectivity: Connectivity::Four,
        ..eight
    };
    assert_eq!(detect(&map, &eight).len(), 1);
    assert_eq!(detect(&map, &four).len(), 2);
}

#[test]
fn empty_and_full_maps() {
    let cfg = DetectConfig::default();
    assert!(detect(&ProbMap::filled(30, 30, 0.0).unwrap(), &cfg).is_empty());
    let full = detect(&ProbMap::filled(30, 30, 0.8).unwrap(), &cfg);
    assert_eq!(full.len(), 1);
    assert_eq!(full[0].bbox.area(), 900);
    assert!((full[0].confidence() - 0.8).abs() < 1e-12);
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [
        DetectConfig {
            pixel_threshold: 0.0,
            ..Default::default()
        },
        DetectConfig {
            min_mean_confidence: 1.5,
            ..Default::default()
        },
        DetectConfig {
            min_area: 0,
            ..Default::default()
        },
    ] {
        assert!(cfg.validate().is_err());
    }
    assert!(DetectConfig::default().validate().is_ok());
}

use proptest::prelude::*;
use ulcerbench_core::metrics::*;
use ulcerbench_core::rng::XorShift64Star;
use ulcerbench_core::{BBox, BinaryMask, Detection};
use ulcerbench_oracles::{all_label_sequences, ap_from_pr_table, greedy_labels, iou_by_pixels, random_box};

const MODES: [(ApInterpolation, bool); 2] = [(ApInterpolation::AllPoint, false), (ApInterpolation::ElevenPoint, true)];

#[test]
fn ap_matches_pr_table_exhaustively() {
    for n in 0..=4 {
        for labels in all_label_sequences(n) {
            let tps = labels.iter().filter(|&&t| t).count();
            for gt in tps..=3 {
                for (interp, eleven) in MODES {
                    let ours = average_precision(&labels, gt, interp);
                    let oracle = ap_from_pr_table(&labels, gt, eleven);
                    assert!(
                        (ours - oracle).abs() <= 1e-12,
                        "{labels:?} gt={gt} {interp:?}: {ours} vs {oracle}"
                    );
                }
            }
        }
    }
}

#[test]
fn dataset_ap_matches_oracle_on_random_images() {
    let mut rng = XorShift64Star::new(2024);
    for _ in 0..1000 {
        let n_det = rng.int_inclusive(0, 10) as usize;
        let n_gt = rng.int_inclusive(0, 4) as usize;
        let gts: Vec<BBox> = (0..n_gt).map(|_| random_box(&mut rng, 24)).collect();
        let dets: Vec<(BBox, f64)> = (0..n_det)
            .map(|_| {
                let b = if !gts.is_empty() && rng.bernoulli(0.6) {
                    let g = gts[rng.int_inclusive(0, n_gt as i64 - 1) as usize];
                    let dx = rng.int_inclusive(0, 2) as u32;
                    BBox::new(g.xmin() + dx, g.ymin(), g.xmax() + dx, g.ymax()).unwrap()
                } else {
                    random_box(&mut rng, 24)
                };
                // coarse confidences force ties
                (b, rng.int_inclusive(0, 8) as f64 / 8.0)
            })
            .collect();
        let oracle_labels = greedy_labels(&dets, &gts, 0.5);
        let image = ImageEval {
            image_id: "img".into(),
            detections: dets.iter().map(|&(b, c)| Detection::new(b, c).unwrap()).collect(),
            ground_truth: gts.clone(),
            masks: None,
        };
        for (interp, eleven) in MODES {
            let cfg = MatchConfig {
                ap_interpolation: interp,
                ..Default::default()
            };
            let report = evaluate_dataset(std::slice::from_ref(&image), &cfg).unwrap();
            let oracle = ap_from_pr_table(&oracle_labels, gts.len(), eleven);
            assert!(
                (report.ap - oracle).abs() <= 1e-12,
                "{dets:?} {gts:?}: {} vs {oracle}",
                report.ap
            );
            assert_eq!(report.tp, oracle_labels.iter().filter(|&&t| t).count());
        }
    }
}

fn boxes(max: usize) -> impl Strategy<Value = Vec<BBox>> {
    prop::collection::vec(
        (0u32..30, 0u32..30, 1u32..12, 1u32..12).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap()),
        0..=max,
    )
}

fn dets(max: usize) -> impl Strategy<Value = Vec<Detection>> {
    (boxes(max), prop::collection::vec(0u8..=10, max)).prop_map(|(bs, cs)| {
        bs.into_iter()
            .zip(cs)
            .map(|(b, c)| Detection::new(b, c as f64 / 10.0).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn box_iou_is_symmetric_and_bounded(a in boxes(1), b in boxes(1)) {
        if let (Some(a), Some(b)) = (a.first(), b.first()) {
            let ab = box_iou(a, b);
            prop_assert_eq!(ab, box_iou(b, a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - iou_by_pixels(a, b)).abs() < 1e-15);
            prop_assert_eq!(box_iou(a, a), 1.0);
        }
    }

    #[test]
    fn matching_agrees_with_oracle(d in dets(8), g in boxes(6), thr in 0.1f64..=1.0) {
        let cfg = MatchConfig { iou_threshold: thr, ..Default::default() };
        let out = match_detections(&d, &g, &cfg);
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.sort_by(|&a, &b| d[a].rank_cmp(&d[b]));
        let ranked: Vec<bool> = order.iter().map(|&i| out.labels[i] == MatchLabel::Tp).collect();
        let pairs: Vec<(BBox, f64)> = d.iter().map(|x| (x.bbox, x.confidence())).collect();
        prop_assert_eq!(ranked, greedy_labels(&pairs, &g, thr));
        prop_assert_eq!(out.tp() + out.unmatched_gt, g.len());
        // each ground truth is claimed at most once
        let mut claimed: Vec<usize> = out.matched_gt.iter().flatten().copied().collect();
        claimed.sort();
        claimed.dedup();
        prop_assert_eq!(claimed.len(), out.tp());
    }

    #[test]
    fn metrics_ignore_input_order(d in dets(8), g in boxes(5), rot in 0usize..8) {
        let cfg = MatchConfig::default();
        let mut shuffled = d.clone();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
        }
        shuffled.reverse();
        prop_assert_eq!(detection_prf(&d, &g, &cfg), detection_prf(&shuffled, &g, &cfg));
    }

    #[test]
    fn order_preserving_rescaling_keeps_ap(d in dets(8), g in boxes(5)) {
        let cfg = MatchConfig::default();
        let eval = |dets: Vec<Detection>| evaluate_dataset(&[ImageEval {
            image_id: "i".into(), detections: dets, ground_truth: g.clone(), masks: None,
        }], &cfg).unwrap();
        let base = eval(d.clone());
        let scaled = eval(d.iter().map(|x| Detection::new(x.bbox, x.confidence() * 0.5).unwrap()).collect());
        let squared = eval(d.iter().map(|x| Detection::new(x.bbox, x.confidence().powi(2)).unwrap()).collect());
        prop_assert_eq!(base.ap, scaled.ap);
        prop_assert_eq!(base.ap, squared.ap);
        prop_assert_eq!(base.det_f1, scaled.det_f1);
    }

    #[test]
    fn prf_stays_in_unit_interval(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let p = prf_from_counts(tp, fp, fn_);
        for v in [p.precision, p.recall, p.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(p.f1 <= p.precision.max(p.recall) + 1e-15);
    }

    #[test]
    fn pixel_f1_and_iou_are_linked(
        (h, w, a, b) in (1usize..12, 1usize..12).prop_flat_map(|(h, w)| (
            Just(h), Just(w),
            prop::collection::vec(0u8..=1, h * w),
            prop::collection::vec(0u8..=1, h * w),
        ))
    ) {
        let p = BinaryMask::new(h, w, a).unwrap();
        let g = BinaryMask::new(h, w, b).unwrap();
        let f1 = pixel_f1(&p, &g).unwrap();
        let iou = pixel_iou(&p, &g).unwrap();
        prop_assert!((f1 - 2.0 * iou / (1.0 + iou)).abs() <= 1e-12);
        prop_assert!(iou <= f1 + 1e-15);
        prop_assert_eq!(f1, pixel_f1(&g, &p).unwrap());
    }
}

#[test]
fn duplicate_detections_yield_one_tp() {
    let g = BBox::new(0, 0, 10, 10).unwrap();
    let d = vec![Detection::new(g, 0.9).unwrap(), Detection::new(g, 0.9).unwrap()];
    let out = match_detections(&d, &[g], &MatchConfig::default());
    assert_eq!(out.labels, vec![MatchLabel::Tp, MatchLabel::Fp]);
    assert_eq!(greedy_labels(&[(g, 0.9), (g, 0.9)], &[g], 0.5), vec![true, false]);
}

#[test]
fn images_are_pooled_into_one_ranking() {
    let g = BBox::new(0, 0, 10, 10).unwrap();
    let far = BBox::new(50, 50, 60, 60).unwrap();
    let images = vec![
        ImageEval {
            image_id: "a".into(),
            detections: vec![Detection::new(far, 0.95).unwrap()],
            ground_truth: vec![g],
            masks: None,
        },
        ImageEval {
            image_id: "b".into(),
            detections: vec![Detection::new(g, 0.9).unwrap()],
            ground_truth: vec![g],
            masks: None,
        },
    ];
    let r = evaluate_dataset(&images, &MatchConfig::default()).unwrap();
    assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
    assert_eq!(r.ap, ap_from_pr_table(&[false, true], 2, false));
    assert_eq!(r.ap, 0.25);
    assert!(r.pixel_f1.is_none());
}

//! Detection metrics: IoU, greedy matching against ground truth,
//! Precision/Recall/F1 at a fixed confidence cutoff, average precision,
//! and PR-curve sampling over a threshold grid.
//!
//! Matching is greedy by confidence with one-to-one assignment, the
//! standard detection-benchmark policy. All tie-breaks are total orders
//! so results are deterministic.

use crate::model::{BoundingBox, Detection, DetectionSet, OrdF64};

/// TP/FP/FN tallies for one evaluation. `true_positives +
/// false_negatives` always equals the number of ground-truth boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: &MatchCounts) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// One sampled point of a precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One row of a study table; fractions in [0, 1], rendered as
/// percentages by the report writer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap: f64,
}

/// Result of matching one detection set against one ground-truth list.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub counts: MatchCounts,
    /// `(confidence, is_tp)` per detection, in descending-confidence
    /// match order; feeds AP and PR-curve computation.
    pub scored: Vec<(f64, bool)>,
}

/// Intersection over union of two boxes: symmetric, in [0, 1], 1 iff
/// identical, 0 iff interiors disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Sorts detection indices by descending confidence, breaking ties by
/// larger area, then lexicographic coordinates, then input order.
pub(crate) fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by_key(|&i| {
        (
            std::cmp::Reverse(OrdF64(dets[i].confidence())),
            dets[i].bbox().tie_break_key(),
            i,
        )
    });
    order
}

/// Greedy one-to-one matching of detections against ground-truth boxes.
///
/// Detections are visited in descending confidence; each one matches
/// the still-unmatched ground truth with maximal IoU when that IoU
/// reaches `iou_threshold` (TP), otherwise it counts as FP. Equal IoUs
/// go to the lower-index ground truth. Unmatched ground truths are FN.
///
/// Callers evaluating at a confidence cutoff must pre-filter `dets`.
pub fn match_detections(
    dets: &DetectionSet,
    gts: &[BoundingBox],
    iou_threshold: f64,
) -> MatchResult {
    let items = dets.as_slice();
    let order = confidence_order(items);
    let mut gt_taken = vec![false; gts.len()];
    let mut scored = Vec::with_capacity(items.len());
    let mut counts = MatchCounts::default();

    for &di in &order {
        let det = &items[di];
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if gt_taken[gi] {
                continue;
            }
            let overlap = iou(det.bbox(), gt);
            // strict > keeps equal-IoU matches on the lower gt index
            if best.map_or(true, |(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        let is_tp = match best {
            Some((gi, overlap)) if overlap >= iou_threshold => {
                gt_taken[gi] = true;
                true
            }
            _ => false,
        };
        if is_tp {
            counts.true_positives += 1;
        } else {
            counts.false_positives += 1;
        }
        scored.push((det.confidence(), is_tp));
    }
    counts.false_negatives = gt_taken.iter().filter(|&&t| !t).count();
    MatchResult { counts, scored }
}

/// Precision, recall, and F1 from match counts, with the 0/0 -> 0
/// convention for each ratio.
pub fn precision_recall_f1(counts: &MatchCounts) -> (f64, f64, f64) {
    let tp = counts.true_positives as f64;
    let p = ratio(tp, tp + counts.false_positives as f64);
    let r = ratio(tp, tp + counts.false_negatives as f64);
    let f1 = ratio(2.0 * p * r, p + r);
    (p, r, f1)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Average precision `sum_t (R_t - R_{t-1}) * P_t` with thresholds at
/// the distinct confidence values in decreasing order and `R_0 = 0`.
/// Defined as 0 when there is no ground truth.
pub fn average_precision(scored: &[(f64, bool)], gt_count: usize) -> f64 {
    if gt_count == 0 {
        return 0.0;
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by_key(|&(conf, _)| std::cmp::Reverse(OrdF64(conf)));

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].0;
        // absorb the whole group of equal confidences before sampling
        while i < sorted.len() && sorted[i].0 == threshold {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = tp as f64 / gt_count as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Average precision over a caller-supplied threshold grid (ascending,
/// each in [0, 1]); the grid is consumed in decreasing order so the
/// recall increments are non-negative.
pub fn average_precision_on_grid(
    scored: &[(f64, bool)],
    gt_count: usize,
    thresholds: &[f64],
) -> f64 {
    if gt_count == 0 {
        return 0.0;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in thresholds.iter().rev() {
        let (p, r) = precision_recall_at(scored, gt_count, t);
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

fn precision_recall_at(scored: &[(f64, bool)], gt_count: usize, threshold: f64) -> (f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    for &(conf, is_tp) in scored {
        if conf >= threshold {
            if is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let p = ratio(tp as f64, (tp + fp) as f64);
    let r = ratio(tp as f64, gt_count as f64);
    (p, r)
}

/// The 9-point confidence grid 0.1 .. 0.9.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Samples precision and recall at each threshold of an ascending grid.
pub fn pr_curve(scored: &[(f64, bool)], gt_count: usize, thresholds: &[f64]) -> Vec<PrPoint> {
    thresholds
        .iter()
        .map(|&t| {
            let (precision, recall) = precision_recall_at(scored, gt_count, t);
            PrPoint {
                threshold: t,
                precision,
                recall,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Detection;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(b: BoundingBox, c: f64) -> Detection {
        Detection::new(b, c).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        // intersection 50, union 150
        assert_eq!(iou(&a, &bx(5.0, 0.0, 15.0, 10.0)), 50.0 / 150.0);
    }

    #[test]
    fn iou_touching_edges_is_zero() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(10.0, 0.0, 20.0, 10.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn match_exact_overlap() {
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        let dets = DetectionSet::from_vec(vec![det(gt, 0.9)]);
        let res = match_detections(&dets, &[gt], 0.5);
        assert_eq!(
            res.counts,
            MatchCounts {
                true_positives: 1,
                false_positives: 0,
                false_negatives: 0
            }
        );
    }

    #[test]
    fn match_below_iou_threshold() {
        // IoU = 1/3 < 0.5
        let dets = DetectionSet::from_vec(vec![det(bx(5.0, 0.0, 15.0, 10.0), 0.8)]);
        let res = match_detections(&dets, &[bx(0.0, 0.0, 10.0, 10.0)], 0.5);
        assert_eq!(
            res.counts,
            MatchCounts {
                true_positives: 0,
                false_positives: 1,
                false_negatives: 1
            }
        );
    }

    #[test]
    fn match_one_to_one_greedy() {
        // second det overlaps the same gt, which is already consumed
        let gt = bx(0.0, 0.0, 10.0, 10.0);
        let dets = DetectionSet::from_vec(vec![
            det(gt, 0.9),
            det(bx(1.0, 1.0, 11.0, 11.0), 0.8),
        ]);
        let res = match_detections(&dets, &[gt], 0.5);
        assert_eq!(
            res.counts,
            MatchCounts {
                true_positives: 1,
                false_positives: 1,
                false_negatives: 0
            }
        );
        // the 0.9 detection is the TP
        assert_eq!(res.scored[0], (0.9, true));
        assert_eq!(res.scored[1], (0.8, false));
    }

    #[test]
    fn match_empty_inputs() {
        let res = match_detections(&DetectionSet::new(), &[], 0.5);
        assert_eq!(res.counts, MatchCounts::default());
        assert!(res.scored.is_empty());
    }

    #[test]
    fn prf_perfect() {
        let counts = MatchCounts {
            true_positives: 10,
            false_positives: 0,
            false_negatives: 0,
        };
        assert_eq!(precision_recall_f1(&counts), (1.0, 1.0, 1.0));
    }

    #[test]
    fn prf_zero_convention() {
        assert_eq!(precision_recall_f1(&MatchCounts::default()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn prf_hand_arithmetic() {
        let counts = MatchCounts {
            true_positives: 3,
            false_positives: 1,
            false_negatives: 2,
        };
        let (p, r, f1) = precision_recall_f1(&counts);
        assert_eq!(p, 0.75);
        assert_eq!(r, 0.6);
        assert!((f1 - 2.0 * 0.45 / 1.35).abs() < 1e-15);
    }

    #[test]
    fn ap_single_perfect_detection() {
        assert_eq!(average_precision(&[(0.9, true)], 1), 1.0);
    }

    #[test]
    fn ap_hand_enumeration() {
        // thresholds 0.9 / 0.8 / 0.7 give (P, R) = (1, 0.5), (0.5, 0.5), (2/3, 1)
        let scored = [(0.9, true), (0.8, false), (0.7, true)];
        let ap = average_precision(&scored, 2);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn ap_zero_cases() {
        assert_eq!(average_precision(&[], 3), 0.0);
        assert_eq!(average_precision(&[(0.5, false)], 3), 0.0);
        assert_eq!(average_precision(&[(0.9, true)], 0), 0.0);
    }

    #[test]
    fn pr_curve_perfect_detector() {
        let scored: Vec<(f64, bool)> = (0..5).map(|_| (0.95, true)).collect();
        let points = pr_curve(&scored, 5, &default_threshold_grid());
        assert_eq!(points.len(), 9);
        for p in points {
            assert_eq!(p.precision, 1.0);
            assert_eq!(p.recall, 1.0);
        }
    }

    #[test]
    fn pr_curve_empty_detections() {
        let points = pr_curve(&[], 4, &default_threshold_grid());
        assert_eq!(points.len(), 9);
        for p in points {
            assert_eq!(p.precision, 0.0);
            assert_eq!(p.recall, 0.0);
        }
    }

    #[test]
    fn pr_curve_hand_filtering() {
        let scored = [(0.9, true), (0.8, false), (0.7, true)];
        let points = pr_curve(&scored, 2, &[0.75, 0.85]);
        assert_eq!(points[0].precision, 0.5);
        assert_eq!(points[0].recall, 0.5);
        assert_eq!(points[1].precision, 1.0);
        assert_eq!(points[1].recall, 0.5);
    }

    #[test]
    fn table_one_f1_fixture() {
        // percent-scale P/R from the single-modality results table
        let p: f64 = 0.6353;
        let r: f64 = 0.4584;
        let f1 = 2.0 * p * r / (p + r);
        assert!((f1 * 100.0 - 53.25).abs() < 0.01);
    }
}

//! Exact ROC curves over every distinct score threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`,
    /// one point per distinct threshold.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_positive: usize,
    pub n_negative: usize,
}

impl RocResult {
    /// Copy with at most about `max_points` curve points, dropping points that
    /// move less than `1 / max_points` in both coordinates. The area is kept.
    pub fn thinned(&self, max_points: usize) -> Self {
        let step = 1.0 / max_points.max(1) as f64;
        let mut points = Vec::new();
        let mut last: Option<(f64, f64)> = None;
        for (i, &p) in self.points.iter().enumerate() {
            let keep = match last {
                None => true,
                Some(q) => i + 1 == self.points.len() || (p.0 - q.0).abs() >= step || (p.1 - q.1).abs() >= step,
            };
            if keep {
                points.push(p);
                last = Some(p);
            }
        }
        Self {
            points,
            ..self.clone()
        }
    }
}

/// ROC curve and its area for scores where larger means more anomalous.
///
/// The area is the trapezoidal integral of the exact curve. Tied scores form
/// one diagonal step, so a tied positive/negative pair counts one half, which
/// equals the Mann-Whitney statistic.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::shape(scores.len(), labels.len()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::UndefinedAuc(format!("score {s} is not a number")));
    }
    let n_positive = labels.iter().filter(|&&l| l).count();
    let n_negative = labels.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        return Err(Error::UndefinedAuc(format!(
            "need both classes, got {n_positive} positive and {n_negative} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (n_positive as f64, n_negative as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of pairs, kept integral until the end.
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push((fp as f64 / n, tp as f64 / p));
    }
    let auc = area2 as f64 / (2.0 * p * n);
    Ok(RocResult {
        points,
        auc,
        n_positive,
        n_negative,
    })
}

/// Same as [`roc_auc`] for single-precision scores.
pub fn roc_auc_f32(scores: &[f32], labels: &[bool]) -> Result<RocResult> {
    let wide: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    roc_auc(&wide, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fraction of positive/negative pairs ordered correctly, ties one half.
    fn pair_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut won, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if si > sj {
                        won += 1.0;
                    } else if si == sj {
                        won += 0.5;
                    }
                }
            }
        }
        won / pairs
    }

    #[test]
    fn worked_examples() {
        let r = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(r.auc, 0.75);
        assert_eq!((r.n_positive, r.n_negative), (2, 2));
        assert_eq!(roc_auc(&[0.0, 1.0], &[false, true]).unwrap().auc, 1.0);
        let flat = roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let scores: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let labels: Vec<bool> = (0..5000).map(|i| i % 3 == 0).collect();
        let r = roc_auc(&scores, &labels).unwrap();
        let t = r.thinned(100);
        assert!(t.points.len() <= 202, "{}", t.points.len());
        assert_eq!(t.points.first(), r.points.first());
        assert_eq!(t.points.last(), r.points.last());
        assert_eq!(t.auc, r.auc);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc(_))));
        assert!(matches!(roc_auc(&[], &[]), Err(Error::UndefinedAuc(_))));
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.0], &[true, false]).is_err());
    }

    fn labelled(max: usize, distinct: u32) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0..distinct, any::<bool>()), 2..=max)
            .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
            .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 7.0, l)).unzip())
    }

    proptest! {
        #[test]
        fn matches_pair_counting((s, l) in prop_oneof![labelled(200, 1_000_000), labelled(200, 3)]) {
            let r = roc_auc(&s, &l).unwrap();
            prop_assert!((r.auc - pair_oracle(&s, &l)).abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.auc));
        }

        #[test]
        fn curve_is_monotone((s, l) in labelled(100, 10)) {
            let r = roc_auc(&s, &l).unwrap();
            prop_assert_eq!(r.points.first().copied(), Some((0.0, 0.0)));
            prop_assert_eq!(r.points.last().copied(), Some((1.0, 1.0)));
            for w in r.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
        }

        #[test]
        fn invariant_under_increasing_maps((s, l) in labelled(100, 20)) {
            let base = roc_auc(&s, &l).unwrap().auc;
            let t: Vec<f64> = s.iter().map(|x| (3.0 * x).exp() - 2.0).collect();
            prop_assert!((roc_auc(&t, &l).unwrap().auc - base).abs() <= 1e-12);
        }

        #[test]
        fn complement_symmetry((s, l) in labelled(100, 20)) {
            let flipped: Vec<bool> = l.iter().map(|x| !x).collect();
            let a = roc_auc(&s, &l).unwrap().auc;
            let b = roc_auc(&s, &flipped).unwrap().auc;
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }
}

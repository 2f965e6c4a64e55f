//! Per-class and averaged classification metrics from confusion counts.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// One-vs-rest counts per class, in the order of `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub classes: Vec<String>,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    #[serde(rename = "fn")]
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    /// Counts given directly per class. All vectors must match `classes` in length.
    pub fn from_counts(
        classes: Vec<String>,
        tp: Vec<u64>,
        fp: Vec<u64>,
        fn_: Vec<u64>,
    ) -> Result<Self> {
        let n = classes.len();
        if tp.len() != n || fp.len() != n || fn_.len() != n {
            return Err(Error::invalid(
                "per-class count vectors must match the class list",
            ));
        }
        Ok(ConfusionCounts {
            classes,
            tp,
            fp,
            fn_,
        })
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Number of labelled instances, Σtp + Σfn.
    pub fn total(&self) -> u64 {
        self.tp.iter().sum::<u64>() + self.fn_.iter().sum::<u64>()
    }

    /// True when Σfp = Σfn, as every single-label confusion satisfies.
    pub fn is_single_label(&self) -> bool {
        self.fp.iter().sum::<u64>() == self.fn_.iter().sum::<u64>()
    }
}

pub fn confusion_from_labels<S: AsRef<str>>(
    truth: &[S],
    predicted: &[S],
    classes: &[S],
) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "truth has {} labels but predicted has {}",
            truth.len(),
            predicted.len()
        )));
    }
    let index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_ref(), i))
        .collect();
    let lookup = |label: &str| {
        index
            .get(label)
            .copied()
            .ok_or_else(|| Error::invalid(format!("label {label:?} is not a known class")))
    };
    let n = classes.len();
    let (mut tp, mut fp, mut fn_) = (vec![0; n], vec![0; n], vec![0; n]);
    for (t, p) in truth.iter().zip(predicted) {
        let (t, p) = (lookup(t.as_ref())?, lookup(p.as_ref())?);
        if t == p {
            tp[t] += 1;
        } else {
            fn_[t] += 1;
            fp[p] += 1;
        }
    }
    Ok(ConfusionCounts {
        classes: classes.iter().map(|c| c.as_ref().to_string()).collect(),
        tp,
        fp,
        fn_,
    })
}

/// A ratio that may have had a zero denominator; undefined ratios read as 0.
fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl ClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let (precision, precision_undefined) = ratio(tp as f64, (tp + fp) as f64);
        let (recall, recall_undefined) = ratio(tp as f64, (tp + fn_) as f64);
        ClassMetrics {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: tp + fn_,
            precision_undefined,
            recall_undefined,
            f1_undefined: precision_undefined || recall_undefined,
        }
    }

    /// `"93.33% 93.33% 93.33% 15"`: precision, recall, F1 to two decimals, then support.
    pub fn row(&self) -> String {
        format!(
            "{} {} {} {}",
            percent2(self.precision),
            percent2(self.recall),
            percent2(self.f1),
            self.support
        )
    }
}

fn percent2(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

pub fn class_metrics(counts: &ConfusionCounts, class: &str) -> Result<ClassMetrics> {
    let i = counts
        .index_of(class)
        .ok_or_else(|| Error::invalid(format!("class {class:?} not present")))?;
    Ok(ClassMetrics::from_counts(
        counts.tp[i],
        counts.fp[i],
        counts.fn_[i],
    ))
}

pub fn all_class_metrics(counts: &ConfusionCounts) -> Vec<ClassMetrics> {
    (0..counts.classes.len())
        .map(|i| ClassMetrics::from_counts(counts.tp[i], counts.fp[i], counts.fn_[i]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Σtp / total instances.
    pub accuracy: f64,
}

/// Precision, recall and F1 averaged over classes, plus accuracy.
///
/// Micro pools the counts before dividing. Macro is the plain mean of the
/// per-class values (undefined ratios count as 0). Weighted weights each class
/// by its support.
pub fn averaged_metrics(counts: &ConfusionCounts, mode: Averaging) -> Result<AveragedMetrics> {
    let total = counts.total();
    if total == 0 {
        return Err(Error::InsufficientData("no labelled instances".into()));
    }
    let sum_tp: u64 = counts.tp.iter().sum();
    let accuracy = sum_tp as f64 / total as f64;

    let (precision, recall, f1) = match mode {
        Averaging::Micro => {
            let sum_fp: u64 = counts.fp.iter().sum();
            let sum_fn: u64 = counts.fn_.iter().sum();
            let (p, _) = ratio(sum_tp as f64, (sum_tp + sum_fp) as f64);
            let (r, _) = ratio(sum_tp as f64, (sum_tp + sum_fn) as f64);
            (p, r, harmonic(p, r))
        }
        Averaging::Macro => {
            let per = all_class_metrics(counts);
            let n = per.len() as f64;
            (
                per.iter().map(|m| m.precision).sum::<f64>() / n,
                per.iter().map(|m| m.recall).sum::<f64>() / n,
                per.iter().map(|m| m.f1).sum::<f64>() / n,
            )
        }
        Averaging::Weighted => {
            let per = all_class_metrics(counts);
            let t = total as f64;
            let weighted = |f: fn(&ClassMetrics) -> f64| {
                per.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / t
            };
            (
                weighted(|m| m.precision),
                weighted(|m| m.recall),
                weighted(|m| m.f1),
            )
        }
    };
    Ok(AveragedMetrics {
        precision,
        recall,
        f1,
        accuracy,
    })
}

/// Share of instances whose true label is among the first `k` entries of its
/// ranked prediction list. Lists are taken in the order given, so equally
/// scored classes count by position. Lists shorter than `k` are used whole.
pub fn top_k_accuracy<S: AsRef<str>>(truth: &[S], ranked: &[Vec<S>], k: usize) -> Result<f64> {
    if truth.len() != ranked.len() {
        return Err(Error::invalid(format!(
            "{} true labels but {} prediction lists",
            truth.len(),
            ranked.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no instances".into()));
    }
    let hits = truth
        .iter()
        .zip(ranked)
        .filter(|(t, preds)| preds.iter().take(k).any(|p| p.as_ref() == t.as_ref()))
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn all_correct_has_no_errors() {
        let l = ["A", "B", "A", "C"];
        let c = confusion_from_labels(&l, &l, &["A", "B", "C"]).unwrap();
        assert!(c.fp.iter().chain(&c.fn_).all(|&x| x == 0));
        assert_eq!(c.tp, vec![2, 1, 1]);
    }

    #[test]
    fn hand_enumerated_two_class() {
        let c = confusion_from_labels(&["A", "A", "B"], &["A", "B", "B"], &["A", "B"]).unwrap();
        assert_eq!((c.tp[0], c.fp[0], c.fn_[0]), (1, 0, 1));
        assert_eq!((c.tp[1], c.fp[1], c.fn_[1]), (1, 1, 0));
    }

    #[test]
    fn empty_sequences_give_zero_counts() {
        let empty: [&str; 0] = [];
        let c = confusion_from_labels(&empty, &empty, &["A", "B"]).unwrap();
        assert_eq!(c.total(), 0);
        assert!(averaged_metrics(&c, Averaging::Micro).is_err());
    }

    #[test]
    fn bad_inputs() {
        assert!(confusion_from_labels(&["A"], &["A", "B"], &["A", "B"]).is_err());
        assert!(confusion_from_labels(&["A"], &["Z"], &["A", "B"]).is_err());
    }

    fn single(tp: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts::from_counts(vec!["x".into()], vec![tp], vec![fp], vec![fn_]).unwrap()
    }

    #[test]
    fn table_rows() {
        let m = class_metrics(&single(14, 1, 1), "x").unwrap();
        assert!(approx(m.precision, 0.9333) && approx(m.recall, 0.9333) && approx(m.f1, 0.9333));
        assert_eq!(m.support, 15);
        assert_eq!(m.row(), "93.33% 93.33% 93.33% 15");

        let m = class_metrics(&single(4, 0, 0), "x").unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.support), (1.0, 1.0, 1.0, 4));
        assert_eq!(m.row(), "100.00% 100.00% 100.00% 4");
    }

    #[test]
    fn degenerate_class_is_flagged() {
        let m = class_metrics(&single(0, 0, 0), "x").unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.support), (0.0, 0.0, 0.0, 0));
        assert!(m.precision_undefined && m.recall_undefined && m.f1_undefined);
        assert!(class_metrics(&single(0, 0, 0), "y").is_err());
    }

    #[test]
    fn one_class_all_correct() {
        let c = single(5, 0, 0);
        for mode in [Averaging::Micro, Averaging::Macro, Averaging::Weighted] {
            let m = averaged_metrics(&c, mode).unwrap();
            assert_eq!(
                (m.precision, m.recall, m.f1, m.accuracy),
                (1.0, 1.0, 1.0, 1.0)
            );
        }
    }

    #[test]
    fn macro_and_weighted_by_hand() {
        // A: tp1 fp0 fn1 -> p1 r.5 ; B: tp1 fp1 fn0 -> p.5 r1
        let c = confusion_from_labels(&["A", "A", "B"], &["A", "B", "B"], &["A", "B"]).unwrap();
        let m = averaged_metrics(&c, Averaging::Macro).unwrap();
        assert!(approx(m.precision, 0.75) && approx(m.recall, 0.75) && approx(m.f1, 2.0 / 3.0));
        let w = averaged_metrics(&c, Averaging::Weighted).unwrap();
        assert!(approx(w.precision, (2.0 * 1.0 + 0.5) / 3.0));
        assert!(approx(w.recall, 2.0 / 3.0));
        assert!(approx(w.accuracy, 2.0 / 3.0));
    }

    #[test]
    fn top_k_counts_by_position() {
        let truth = ["a", "b", "c", "a"];
        let ranked = vec![
            vec!["a", "b", "c"],
            vec!["a", "b", "c"],
            vec!["a", "b", "c"],
            vec!["b", "c"],
        ];
        assert_eq!(top_k_accuracy(&truth, &ranked, 1).unwrap(), 0.25);
        assert_eq!(top_k_accuracy(&truth, &ranked, 2).unwrap(), 0.5);
        assert_eq!(top_k_accuracy(&truth, &ranked, 3).unwrap(), 0.75);
        assert_eq!(top_k_accuracy(&truth, &ranked, 9).unwrap(), 0.75);
        assert!(top_k_accuracy(&truth, &ranked, 0).is_err());
        assert!(top_k_accuracy(&truth[..3], &ranked, 1).is_err());
        assert!(top_k_accuracy::<&str>(&[], &[], 1).is_err());
    }

    #[test]
    fn top_one_is_plain_accuracy() {
        let truth = ["x", "y", "y", "z", "x"];
        let first = ["x", "y", "x", "x", "x"];
        let ranked: Vec<Vec<&str>> = first.iter().map(|p| vec![*p, "z"]).collect();
        let counts = confusion_from_labels(&truth, &first, &["x", "y", "z"]).unwrap();
        let acc = averaged_metrics(&counts, Averaging::Micro)
            .unwrap()
            .accuracy;
        assert_eq!(top_k_accuracy(&truth, &ranked, 1).unwrap(), acc);
        assert!(top_k_accuracy(&truth, &ranked, 2).unwrap() >= acc);
    }
}

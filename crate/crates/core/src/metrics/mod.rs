//! Threshold-free ranking metrics and the top-k image score.
//!
//! All metrics are computed from a [`ScoreTally`]: per distinct score, the
//! number of positive and negative samples. The tally is exact (no binning),
//! can be filled image by image, and its memory grows with the number of
//! distinct scores rather than the number of samples. Sweeps over it are
//! exact in integer arithmetic up to the final division.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, ScalarField};

/// Largest number of points kept per curve in a [`MetricsReport`].
pub const MAX_CURVE_POINTS: usize = 2048;

/// Scores with binary labels, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::dims(scores.len(), labels.len()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("scores must be finite".into()));
        }
        Ok(Self { scores, labels })
    }

    /// Convenience constructor with `{0, 1}` labels.
    pub fn from_binary(scores: &[f64], labels: &[u8]) -> Result<Self> {
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Self::new(scores.to_vec(), labels.iter().map(|&l| l == 1).collect())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn tally(&self) -> ScoreTally {
        let mut t = ScoreTally::default();
        for (&s, &l) in self.scores.iter().zip(&self.labels) {
            t.push(s, l);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    pos: u64,
    neg: u64,
}

/// Exact score histogram: `(positives, negatives)` per distinct score.
#[derive(Debug, Clone, Default)]
pub struct ScoreTally {
    groups: BTreeMap<OrderedFloat<f64>, Counts>,
    n_pos: u64,
    n_neg: u64,
}

impl ScoreTally {
    /// Adds one sample. `-0.0` and `0.0` are the same score.
    pub fn push(&mut self, score: f64, positive: bool) {
        debug_assert!(score.is_finite());
        let key = OrderedFloat(if score == 0.0 { 0.0 } else { score });
        let c = self.groups.entry(key).or_default();
        if positive {
            c.pos += 1;
            self.n_pos += 1;
        } else {
            c.neg += 1;
            self.n_neg += 1;
        }
    }

    pub fn merge(&mut self, other: &ScoreTally) {
        for (k, c) in &other.groups {
            let e = self.groups.entry(*k).or_default();
            e.pos += c.pos;
            e.neg += c.neg;
        }
        self.n_pos += other.n_pos;
        self.n_neg += other.n_neg;
    }

    pub fn n_pos(&self) -> u64 {
        self.n_pos
    }

    pub fn n_neg(&self) -> u64 {
        self.n_neg
    }

    pub fn distinct_scores(&self) -> usize {
        self.groups.len()
    }

    fn require_both(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg == 0 {
            Err(Error::SingleClass)
        } else {
            Ok(())
        }
    }

    /// Mann–Whitney AUROC: P(random positive outscores random negative), ties count 1/2.
    pub fn auroc(&self) -> Result<f64> {
        self.require_both()?;
        // Twice the U statistic, kept integral.
        let mut twice_u: u128 = 0;
        let mut neg_below: u128 = 0;
        for c in self.groups.values() {
            twice_u += c.pos as u128 * (2 * neg_below + c.neg as u128);
            neg_below += c.neg as u128;
        }
        Ok(twice_u as f64 / (2.0 * self.n_pos as f64 * self.n_neg as f64))
    }

    /// Average precision; a group of tied scores is admitted as one step.
    pub fn aupr(&self) -> Result<f64> {
        if self.n_pos == 0 {
            return Err(Error::NoPositives);
        }
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut ap = 0.0;
        for c in self.groups.values().rev() {
            tp += c.pos;
            fp += c.neg;
            if c.pos > 0 {
                ap += c.pos as f64 * (tp as f64 / (tp + fp) as f64);
            }
        }
        Ok(ap / self.n_pos as f64)
    }

    /// Best `(sensitivity + specificity) / 2` over thresholds `score >= t`,
    /// with the smallest threshold attaining it.
    pub fn balanced_accuracy(&self) -> Result<(f64, f64)> {
        self.require_both()?;
        let (p, n) = (self.n_pos as u128, self.n_neg as u128);
        let (mut tp, mut fp) = (0u128, 0u128);
        // Numerator of the balanced accuracy over the common denominator 2PN.
        let mut best: Option<(u128, f64)> = None;
        for (score, c) in self.groups.iter().rev() {
            tp += c.pos as u128;
            fp += c.neg as u128;
            let value = tp * n + (n - fp) * p;
            if best.map_or(true, |(b, _)| value >= b) {
                best = Some((value, score.0));
            }
        }
        let (value, threshold) = best.expect("tally is non-empty");
        Ok((value as f64 / (2.0 * p as f64 * n as f64), threshold))
    }

    /// ROC operating points `(fpr, tpr)` from the strictest threshold down.
    pub fn roc_curve(&self) -> Result<Vec<[f64; 2]>> {
        self.require_both()?;
        let (p, n) = (self.n_pos as f64, self.n_neg as f64);
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut pts = vec![[0.0, 0.0]];
        for c in self.groups.values().rev() {
            tp += c.pos;
            fp += c.neg;
            pts.push([fp as f64 / n, tp as f64 / p]);
        }
        Ok(pts)
    }

    /// Precision–recall points `(recall, precision)` from the strictest threshold down.
    pub fn pr_curve(&self) -> Result<Vec<[f64; 2]>> {
        if self.n_pos == 0 {
            return Err(Error::NoPositives);
        }
        let p = self.n_pos as f64;
        let (mut tp, mut fp) = (0u64, 0u64);
        let mut pts = Vec::with_capacity(self.groups.len());
        for c in self.groups.values().rev() {
            tp += c.pos;
            fp += c.neg;
            pts.push([tp as f64 / p, tp as f64 / (tp + fp) as f64]);
        }
        Ok(pts)
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let (balanced_acc, threshold_star) = self.balanced_accuracy()?;
        Ok(MetricsReport {
            auroc: self.auroc()?,
            aupr: self.aupr()?,
            balanced_acc,
            threshold_star,
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            roc: decimate(self.roc_curve()?),
            pr: decimate(self.pr_curve()?),
        })
    }
}

/// Keeps at most [`MAX_CURVE_POINTS`] evenly spaced points, always including both ends.
fn decimate(points: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    if points.len() <= MAX_CURVE_POINTS {
        return points;
    }
    let last = points.len() - 1;
    (0..MAX_CURVE_POINTS)
        .map(|i| points[i * last / (MAX_CURVE_POINTS - 1)])
        .collect()
}

pub fn auroc(set: &ScoredSet) -> Result<f64> {
    set.tally().auroc()
}

pub fn aupr(set: &ScoredSet) -> Result<f64> {
    set.tally().aupr()
}

/// Returns `(balanced accuracy, threshold)`.
pub fn balanced_accuracy(set: &ScoredSet) -> Result<(f64, f64)> {
    set.tally().balanced_accuracy()
}

/// Evaluation summary, serialized as JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auroc: f64,
    pub aupr: f64,
    pub balanced_acc: f64,
    /// Smallest threshold attaining `balanced_acc` (scores `>=` it are positive).
    pub threshold_star: f64,
    pub n_pos: u64,
    pub n_neg: u64,
    /// `(fpr, tpr)` points, at most [`MAX_CURVE_POINTS`].
    pub roc: Vec<[f64; 2]>,
    /// `(recall, precision)` points, at most [`MAX_CURVE_POINTS`].
    pub pr: Vec<[f64; 2]>,
}

impl MetricsReport {
    /// Console table in the column order AUROC, ACC, AUPR.
    pub fn table(&self, title: &str) -> String {
        format!(
            "{title}\n{:<8} {:<8} {:<8}\n{:<8.4} {:<8.4} {:<8.4}\n",
            "AUROC", "ACC", "AUPR", self.auroc, self.balanced_acc, self.aupr
        )
    }
}

/// Mean of the `k` largest values (of all values when the map is smaller than `k`).
pub fn image_score(pred: &ScalarField, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut values = pred.data().to_vec();
    let k = k.min(values.len());
    let split = values.len() - k;
    if split > 0 {
        values.select_nth_unstable_by(split, f64::total_cmp);
    }
    let mut top = values[split..].to_vec();
    // Fixed summation order keeps the score independent of the selection's layout.
    top.sort_unstable_by(f64::total_cmp);
    Ok(top.iter().sum::<f64>() / k as f64)
}

/// How pixel-level metrics combine images.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelPooling {
    /// All pixels of all images form one population.
    #[default]
    Pooled,
    /// Metrics per image (images with both classes only), then averaged.
    PerImage,
}

fn pixel_tally(pred: &ScalarField, gt: &BinaryMask) -> Result<ScoreTally> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(
            format!("{:?}", gt.dims()),
            format!("prediction {:?}", pred.dims()),
        ));
    }
    let mut t = ScoreTally::default();
    for (&s, &l) in pred.data().iter().zip(gt.data()) {
        t.push(s, l != 0);
    }
    Ok(t)
}

/// Pixel-level AUROC / balanced accuracy / AUPR over all images pooled together.
pub fn eval_pixel(preds: &[ScalarField], gts: &[BinaryMask]) -> Result<MetricsReport> {
    eval_pixel_with(preds, gts, PixelPooling::Pooled)
}

pub fn eval_pixel_with(
    preds: &[ScalarField],
    gts: &[BinaryMask],
    pooling: PixelPooling,
) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("pixel evaluation needs at least one image"));
    }
    if preds.len() != gts.len() {
        return Err(Error::dims(
            format!("{} masks", preds.len()),
            format!("{} masks", gts.len()),
        ));
    }
    let mut pooled = ScoreTally::default();
    let mut per_image = Vec::new();
    for (p, g) in preds.iter().zip(gts) {
        let t = pixel_tally(p, g)?;
        pooled.merge(&t);
        if pooling == PixelPooling::PerImage && t.n_pos() > 0 && t.n_neg() > 0 {
            per_image.push(t.report()?);
        }
    }
    let mut report = pooled.report()?;
    if pooling == PixelPooling::PerImage {
        let n = per_image.len() as f64;
        report.auroc = per_image.iter().map(|r| r.auroc).sum::<f64>() / n;
        report.aupr = per_image.iter().map(|r| r.aupr).sum::<f64>() / n;
        report.balanced_acc = per_image.iter().map(|r| r.balanced_acc).sum::<f64>() / n;
    }
    Ok(report)
}

/// Image-level metrics on top-`k` scores of each prediction map.
pub fn eval_image(preds: &[ScalarField], labels: &[bool], k: usize) -> Result<MetricsReport> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("image evaluation needs at least one image"));
    }
    if preds.len() != labels.len() {
        return Err(Error::dims(
            format!("{} labels", preds.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let scores = preds
        .iter()
        .map(|p| image_score(p, k))
        .collect::<Result<Vec<_>>>()?;
    ScoredSet::new(scores, labels.to_vec())?.tally().report()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(scores: &[f64], labels: &[u8]) -> ScoredSet {
        ScoredSet::from_binary(scores, labels).unwrap()
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&set(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(auroc(&set(&[0.5; 4], &[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(auroc(&set(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0])).unwrap(), 0.75);
        assert!(matches!(auroc(&set(&[0.1, 0.2], &[1, 1])), Err(Error::SingleClass)));
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&set(&[0.9, 0.8, 0.2], &[1, 1, 0])).unwrap(), 1.0);
        assert_eq!(aupr(&set(&[0.9, 0.8], &[0, 1])).unwrap(), 0.5);
        let v = aupr(&set(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0])).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        assert!(matches!(aupr(&set(&[0.1], &[0])), Err(Error::NoPositives)));
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&set(&[0.9, 0.8, 0.2], &[1, 1, 0])).unwrap().0, 1.0);
        assert_eq!(balanced_accuracy(&set(&[0.4; 5], &[1, 0, 0, 0, 0])).unwrap().0, 0.5);
        assert_eq!(
            balanced_accuracy(&set(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0])).unwrap(),
            (0.75, 0.7)
        );
        assert!(balanced_accuracy(&set(&[0.3], &[0])).is_err());
    }

    #[test]
    fn image_score_examples() {
        assert!((image_score(&ScalarField::filled(8, 8, 0.3), 10).unwrap() - 0.3).abs() < 1e-15);
        let mut ten = vec![0.0; 50];
        ten[..10].iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(image_score(&ScalarField::new(5, 10, ten).unwrap(), 10).unwrap(), 1.0);
        let ramp: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let s = image_score(&ScalarField::new(1, 20, ramp).unwrap(), 10).unwrap();
        assert!((s - 0.775).abs() < 1e-12);
        let small = ScalarField::new(1, 3, vec![0.1, 0.2, 0.6]).unwrap();
        assert!((image_score(&small, 10).unwrap() - 0.3).abs() < 1e-15);
        assert!(image_score(&small, 0).is_err());
    }

    #[test]
    fn perfect_pixel_predictor_scores_one() {
        let gt = BinaryMask::new(2, 3, vec![0, 1, 0, 0, 1, 1]).unwrap();
        let r = eval_pixel(&[gt.to_field()], &[gt.clone()]).unwrap();
        assert_eq!((r.auroc, r.aupr, r.balanced_acc), (1.0, 1.0, 1.0));
        let flat = eval_pixel(&[ScalarField::filled(2, 3, 0.4)], &[gt]).unwrap();
        assert_eq!(flat.auroc, 0.5);
    }

    #[test]
    fn pixel_evaluation_rejects_bad_input() {
        let gt = BinaryMask::zeros(2, 2);
        assert!(eval_pixel(&[], &[]).is_err());
        assert!(eval_pixel(&[ScalarField::filled(2, 3, 0.1)], &[gt.clone()]).is_err());
        assert!(eval_pixel(&[ScalarField::filled(2, 2, 0.1)], &[gt.clone(), gt]).is_err());
    }

    #[test]
    fn per_image_pooling_averages_images() {
        let a = BinaryMask::new(1, 2, vec![1, 0]).unwrap();
        let b = BinaryMask::new(1, 2, vec![0, 1]).unwrap();
        let pa = ScalarField::new(1, 2, vec![0.9, 0.1]).unwrap();
        let pb = ScalarField::new(1, 2, vec![0.9, 0.1]).unwrap();
        let preds = [pa, pb];
        let gts = [a, b];
        let r = eval_pixel_with(&preds, &gts, PixelPooling::PerImage).unwrap();
        assert_eq!(r.auroc, 0.5);
        assert_eq!(eval_pixel(&preds, &gts).unwrap().auroc, 0.5);
    }

    #[test]
    fn image_evaluation_uses_top_k_scores() {
        let mut bright = vec![0.1; 64];
        bright[..12].iter_mut().for_each(|v| *v = 0.9);
        let pos = ScalarField::new(8, 8, bright).unwrap();
        let neg = ScalarField::filled(8, 8, 0.1);
        let r = eval_image(&[pos.clone(), neg.clone(), pos, neg], &[true, false, true, false], 10).unwrap();
        assert_eq!(r.auroc, 1.0);
        assert!(matches!(
            eval_image(&[ScalarField::filled(2, 2, 0.1)], &[true], 10),
            Err(Error::SingleClass)
        ));
        assert!(eval_image(&[ScalarField::filled(2, 2, 0.1)], &[true, false], 10).is_err());
    }

    #[test]
    fn curves_start_and_end_at_the_corners() {
        let t = set(&[0.9, 0.8, 0.7, 0.6], &[1, 0, 1, 0]).tally();
        let roc = t.roc_curve().unwrap();
        assert_eq!(roc.first(), Some(&[0.0, 0.0]));
        assert_eq!(roc.last(), Some(&[1.0, 1.0]));
        assert_eq!(t.pr_curve().unwrap().last().unwrap()[0], 1.0);
        let long: Vec<[f64; 2]> = (0..10_000).map(|i| [i as f64, 0.0]).collect();
        let d = decimate(long);
        assert_eq!(d.len(), MAX_CURVE_POINTS);
        assert_eq!(d.last().unwrap()[0], 9999.0);
    }

    #[test]
    fn negative_zero_and_zero_tie() {
        let s = set(&[0.0, -0.0], &[1, 0]);
        assert_eq!(auroc(&s).unwrap(), 0.5);
    }
}

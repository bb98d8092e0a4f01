//! One-to-one polygon matching and precision / recall / F1.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use crate::geom::{polygon_iou, TextPolygon};

/// Default IoU needed for a prediction to count as a hit.
pub const DEFAULT_IOU: f64 = 0.5;

/// `num / den`, or 0 when `den` is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0. Works in any
/// consistent unit (fractions or percentages).
pub fn f1_from_pr(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ImageCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ImageCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn f1(&self) -> f64 {
        f1_from_pr(self.precision(), self.recall())
    }
}

impl Add for ImageCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for ImageCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Accepted `(pred, gt, iou)` pairs, in acceptance order.
///
/// Candidate pairs are visited by IoU descending, then prediction index,
/// then ground-truth index; a pair is accepted when its IoU reaches
/// `iou_thresh` and neither member is taken yet.
pub fn match_pairs(
    preds: &[TextPolygon],
    gts: &[TextPolygon],
    iou_thresh: f64,
) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::new();
    for (p, pred) in preds.iter().enumerate() {
        for (g, gt) in gts.iter().enumerate() {
            let iou = polygon_iou(pred, gt);
            if iou >= iou_thresh && iou > 0.0 {
                pairs.push((p, g, iou));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut accepted = Vec::new();
    for (p, g, iou) in pairs {
        if !pred_used[p] && !gt_used[g] {
            pred_used[p] = true;
            gt_used[g] = true;
            accepted.push((p, g, iou));
        }
    }
    accepted
}

pub fn match_image(preds: &[TextPolygon], gts: &[TextPolygon], iou_thresh: f64) -> ImageCounts {
    let tp = match_pairs(preds, gts, iou_thresh).len() as u64;
    ImageCounts::new(tp, preds.len() as u64 - tp, gts.len() as u64 - tp)
}

/// Matching with "don't care" ground truth. Flagged regions never count as
/// misses, and a prediction left unmatched after the regular matching that
/// overlaps a flagged region by `iou_thresh` is not a false positive.
pub fn match_image_with_ignore(
    preds: &[TextPolygon],
    gts: &[TextPolygon],
    ignore: &[bool],
    iou_thresh: f64,
) -> ImageCounts {
    let flagged = |g: usize| ignore.get(g).copied().unwrap_or(false);
    let (cared, dont): (Vec<usize>, Vec<usize>) = (0..gts.len()).partition(|&g| !flagged(g));
    let cared_polys: Vec<TextPolygon> = cared.iter().map(|&g| gts[g].clone()).collect();
    let matched = match_pairs(preds, &cared_polys, iou_thresh);
    let mut pred_used = vec![false; preds.len()];
    for &(p, _, _) in &matched {
        pred_used[p] = true;
    }
    let tp = matched.len() as u64;
    let fp = (0..preds.len())
        .filter(|&p| !pred_used[p])
        .filter(|&p| {
            !dont
                .iter()
                .any(|&g| polygon_iou(&preds[p], &gts[g]) >= iou_thresh)
        })
        .count() as u64;
    ImageCounts::new(tp, fp, cared.len() as u64 - tp)
}

/// Totals over a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Sorted by image name.
    pub per_image: Vec<(String, ImageCounts)>,
}

/// Sums counts first, then derives the rates, so the result does not depend
/// on image order.
pub fn aggregate(images: impl IntoIterator<Item = (String, ImageCounts)>) -> EvalReport {
    let mut per_image: Vec<(String, ImageCounts)> = images.into_iter().collect();
    per_image.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then((a.1.tp, a.1.fp, a.1.fn_).cmp(&(b.1.tp, b.1.fp, b.1.fn_)))
    });
    let total = per_image
        .iter()
        .fold(ImageCounts::default(), |acc, (_, c)| acc + *c);
    EvalReport {
        tp: total.tp,
        fp: total.fp,
        fn_: total.fn_,
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        per_image,
    }
}

impl EvalReport {
    pub fn counts(&self) -> ImageCounts {
        ImageCounts::new(self.tp, self.fp, self.fn_)
    }

    /// Human-readable table, rates in percent to one decimal.
    pub fn to_table(&self) -> String {
        let width = self
            .per_image
            .iter()
            .map(|(n, _)| n.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>6} {:>6} {:>6}  {:>6} {:>6} {:>6}",
            "image", "tp", "fp", "fn", "P(%)", "R(%)", "F1(%)"
        );
        let mut row = |name: &str, c: ImageCounts| {
            let _ = writeln!(
                s,
                "{:<width$}  {:>6} {:>6} {:>6}  {:>6.1} {:>6.1} {:>6.1}",
                name,
                c.tp,
                c.fp,
                c.fn_,
                100.0 * c.precision(),
                100.0 * c.recall(),
                100.0 * c.f1()
            );
        };
        for (name, c) in &self.per_image {
            row(name, *c);
        }
        row("total", self.counts());
        s
    }

    /// One `key=value` per line; rates as fractions.
    pub fn to_key_values(&self) -> String {
        format!(
            "images={}\ntp={}\nfp={}\nfn={}\nprecision={:.6}\nrecall={:.6}\nf1={:.6}\n",
            self.per_image.len(),
            self.tp,
            self.fp,
            self.fn_,
            self.precision,
            self.recall,
            self.f1
        )
    }
}

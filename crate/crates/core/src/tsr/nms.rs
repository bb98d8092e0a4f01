//! Greedy rotated-rectangle NMS, kept only as the comparison baseline for
//! FPS-based shaping.

use crate::error::{Error, Result};
use crate::geom::{rect_iou, RotatedRect};

/// Indices of the survivors in descending score order. A candidate is
/// dropped when its IoU with any already-kept rectangle exceeds
/// `iou_thresh`. Equal scores keep input order.
pub fn nms_indices(rects: &[RotatedRect], scores: &[f64], iou_thresh: f64) -> Result<Vec<usize>> {
    if rects.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rectangles but {} scores",
            rects.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept
            .iter()
            .all(|&k| rect_iou(&rects[k], &rects[i]) <= iou_thresh)
        {
            kept.push(i);
        }
    }
    Ok(kept)
}

pub fn nms_baseline(
    rects: &[RotatedRect],
    scores: &[f64],
    iou_thresh: f64,
) -> Result<Vec<RotatedRect>> {
    Ok(nms_indices(rects, scores, iou_thresh)?
        .into_iter()
        .map(|i| rects[i])
        .collect())
}

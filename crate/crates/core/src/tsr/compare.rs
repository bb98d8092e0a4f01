//! Side-by-side runs of FPS shaping and the NMS baseline on the same
//! candidate components, with wall time and overlap-computation counts.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{overlap_ops, reset_overlap_ops, RotatedRect};
use crate::maps::GeometryMaps;
use crate::tsr::{
    accumulate_and_close, nms_indices, shape_text_counted, trace_contours, ShapingConfig,
};

pub const FRAME: usize = 256;
const BANDS: usize = 6;
const BAND_HEIGHT: f64 = 10.0;
const CORE_ROWS: usize = 4;
const MARGIN: usize = 16;

/// `k` candidate centre pixels scattered over the cores of a few horizontal
/// text bands, the maps they were drawn from and one rectangle per pixel.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub maps: GeometryMaps,
    pub pixels: Vec<(usize, usize)>,
    pub rects: Vec<RotatedRect>,
    pub scores: Vec<f64>,
}

/// Largest `k` accepted by [`random_candidates`].
pub fn candidate_capacity() -> usize {
    BANDS * CORE_ROWS * (FRAME - 2 * MARGIN)
}

pub fn random_candidates(k: usize, rect_width: f64, seed: u64) -> Result<CandidateSet> {
    if k == 0 || k > candidate_capacity() {
        return Err(Error::InvalidArgument(format!(
            "candidate count {k} outside 1..={}",
            candidate_capacity()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = FRAME / BANDS;
    let centre_row = |b: usize| (b * pitch + pitch / 2) as f64;
    let mut maps = GeometryMaps::zeros(FRAME, FRAME);
    for b in 0..BANDS {
        let c = centre_row(b);
        for i in 0..FRAME {
            if ((i as f64 + 0.5) - c).abs() < BAND_HEIGHT / 2.0 {
                for j in MARGIN..FRAME - MARGIN {
                    maps.text.set2(i, j, 1.0);
                }
            }
        }
    }
    let mut pool: Vec<(usize, usize)> = (0..BANDS)
        .flat_map(|b| {
            let top = centre_row(b) as usize - CORE_ROWS / 2;
            (top..top + CORE_ROWS).flat_map(|i| (MARGIN..FRAME - MARGIN).map(move |j| (i, j)))
        })
        .collect();
    pool.shuffle(&mut rng);
    pool.truncate(k);
    let mut rects = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for &(i, j) in &pool {
        let band = i / pitch;
        let (x, y) = (
            j as f64 + 0.5 + rng.gen_range(-0.5..0.5),
            centre_row(band) + rng.gen_range(-0.5..0.5),
        );
        let h = BAND_HEIGHT + rng.gen_range(-1.0..1.0);
        let theta = rng.gen_range(-0.05..0.05);
        let score = rng.gen_range(0.5..1.0);
        maps.center.set2(i, j, score);
        maps.x.set2(i, j, x);
        maps.y.set2(i, j, y);
        maps.h.set2(i, j, h);
        maps.w.set2(i, j, rect_width);
        maps.theta.set2(i, j, theta);
        rects.push(RotatedRect::new(x, y, h, rect_width, theta)?);
        scores.push(score);
    }
    Ok(CandidateSet {
        maps,
        pixels: pool,
        rects,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathReport {
    pub elapsed: Duration,
    /// Pairwise overlap (IoU) computations performed by the path.
    pub overlap_ops: u64,
    /// Rectangles surviving selection.
    pub components: usize,
    pub polygons: usize,
}

/// Full shaping: per-component FPS, rectangle accumulation, closing and
/// contour tracing.
pub fn run_fps_path(set: &CandidateSet, cfg: &ShapingConfig) -> Result<PathReport> {
    reset_overlap_ops();
    let start = Instant::now();
    let (polygons, components) = shape_text_counted(&set.maps, cfg)?;
    let elapsed = start.elapsed();
    Ok(PathReport {
        elapsed,
        overlap_ops: overlap_ops(),
        components,
        polygons: polygons.len(),
    })
}

/// NMS over all candidate rectangles, then the same accumulation, closing
/// and tracing on the survivors.
pub fn run_nms_path(
    set: &CandidateSet,
    cfg: &ShapingConfig,
    iou_thresh: f64,
) -> Result<PathReport> {
    reset_overlap_ops();
    let start = Instant::now();
    let kept = nms_indices(&set.rects, &set.scores, iou_thresh)?;
    let survivors: Vec<RotatedRect> = kept.iter().map(|&i| set.rects[i]).collect();
    let mask = accumulate_and_close(&survivors, (FRAME, FRAME), cfg)?;
    let polygons = trace_contours(&mask, cfg.min_area)?;
    let elapsed = start.elapsed();
    Ok(PathReport {
        elapsed,
        overlap_ops: overlap_ops(),
        components: survivors.len(),
        polygons: polygons.len(),
    })
}

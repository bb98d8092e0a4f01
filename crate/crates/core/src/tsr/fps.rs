//! Farthest point sampling over a component's centre pixels.

use crate::error::{Error, Result};
use crate::geom::Point;

fn dist2(a: Point, b: Point) -> f64 {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    dx * dx + dy * dy
}

/// Index of the point nearest the centroid; lowest index wins ties.
pub fn centroid_seed(points: &[Point]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "farthest point sampling needs at least one point".into(),
        ));
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let c = Point::new(sx / n, sy / n);
    let mut best = 0;
    for (k, p) in points.iter().enumerate().skip(1) {
        if dist2(*p, c) < dist2(points[best], c) {
            best = k;
        }
    }
    Ok(best)
}

/// Greedy max-min selection seeded at the point nearest the centroid.
///
/// Returns indices into `points` in selection order. Stops after `budget`
/// picks or once the largest remaining min-distance drops below `stop_dist`.
pub fn farthest_point_sample(
    points: &[Point],
    budget: usize,
    stop_dist: f64,
) -> Result<Vec<usize>> {
    let seed = centroid_seed(points)?;
    farthest_point_sample_seeded(points, seed, budget, stop_dist)
}

/// [`farthest_point_sample`] with an explicit first pick.
pub fn farthest_point_sample_seeded(
    points: &[Point],
    seed: usize,
    budget: usize,
    stop_dist: f64,
) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument(
            "farthest point sampling needs at least one point".into(),
        ));
    }
    if seed >= points.len() {
        return Err(Error::InvalidArgument(format!(
            "seed index {seed} out of range for {} points",
            points.len()
        )));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument(
            "sampling budget must be at least 1".into(),
        ));
    }
    if !(stop_dist >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stop distance {stop_dist} must be >= 0"
        )));
    }
    let stop2 = stop_dist * stop_dist;
    let mut selected = vec![seed];
    let mut min_d2: Vec<f64> = points.iter().map(|p| dist2(*p, points[seed])).collect();
    while selected.len() < budget {
        let mut best = 0;
        for k in 1..points.len() {
            if min_d2[k] > min_d2[best] {
                best = k;
            }
        }
        if min_d2[best] < stop2 || min_d2[best] == 0.0 {
            break;
        }
        selected.push(best);
        let q = points[best];
        for (d, p) in min_d2.iter_mut().zip(points) {
            *d = d.min(dist2(*p, q));
        }
    }
    Ok(selected)
}

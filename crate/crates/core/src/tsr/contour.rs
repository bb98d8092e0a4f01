//! Outer boundaries of mask components as polygons.
//!
//! Boundaries follow pixel edges (cracks) rather than pixel centres, so the
//! traced polygon rasterizes back to exactly the component with its holes
//! filled. Douglas-Peucker then removes staircase vertices.

use crate::error::Result;
use crate::geom::{Point, TextPolygon};
use crate::grid::Grid;
use crate::tsr::morph::label_components;

/// Douglas-Peucker tolerance in pixels.
pub const SIMPLIFY_EPS: f64 = 1.0;

/// Outer boundary corners of the 8-connected component containing
/// `start`, where `start` must be its first pixel in raster order.
///
/// Vertices are lattice points `(col, row)` listed clockwise on screen
/// (positive shoelace area with y pointing down), starting at the top-left
/// corner of `start`.
pub fn trace_boundary(inside: impl Fn(i64, i64) -> bool, start: (usize, usize)) -> Vec<Point> {
    let (si, sj) = (start.0 as i64, start.1 as i64);
    // walking along direction d, the component lies on side n = (-dy, dx)
    let origin = (sj, si);
    let first_dir = (1i64, 0i64);
    let (mut v, mut d) = (origin, first_dir);
    let mut corners = vec![Point::new(origin.0 as f64, origin.1 as f64)];
    // only `start` touches the origin vertex, so it is visited once and the
    // walk returns to it heading up, turning right: a corner
    loop {
        let n = (-d.1, d.0);
        // the pixel whose centre is half a step along `off` from v
        let cell = |off: (i64, i64)| {
            inside(
                (2 * v.1 + off.1).div_euclid(2),
                (2 * v.0 + off.0).div_euclid(2),
            )
        };
        let ahead_in = cell((d.0 + n.0, d.1 + n.1));
        let ahead_out = cell((d.0 - n.0, d.1 - n.1));
        // turning outward first keeps diagonal neighbours in the component
        let nd = if ahead_out {
            (-n.0, -n.1)
        } else if ahead_in {
            d
        } else {
            n
        };
        if nd != d && v != origin {
            corners.push(Point::new(v.0 as f64, v.1 as f64));
        }
        d = nd;
        v = (v.0 + d.0, v.1 + d.1);
        if v == origin {
            break;
        }
    }
    corners
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * dx, a.y + t * dy))
}

fn dp_chain(pts: &[Point], eps: f64, keep: &mut [bool]) {
    if pts.len() < 3 {
        return;
    }
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    let (mut far, mut dmax) = (0, 0.0);
    for (k, p) in pts.iter().enumerate().take(pts.len() - 1).skip(1) {
        let d = seg_dist(*p, a, b);
        if d > dmax {
            far = k;
            dmax = d;
        }
    }
    if dmax > eps {
        keep[far] = true;
        dp_chain(&pts[..=far], eps, &mut keep[..=far]);
        dp_chain(&pts[far..], eps, &mut keep[far..]);
    }
}

/// Douglas-Peucker on a closed ring, anchored at vertex 0 and the vertex
/// farthest from it.
pub fn simplify_ring(ring: &[Point], eps: f64) -> Vec<Point> {
    let n = ring.len();
    if n <= 3 {
        return ring.to_vec();
    }
    let far = (1..n).fold(1, |b, k| {
        if ring[k].dist(ring[0]) > ring[b].dist(ring[0]) {
            k
        } else {
            b
        }
    });
    let mut keep = vec![false; n + 1];
    keep[0] = true;
    keep[far] = true;
    let mut closed = ring.to_vec();
    closed.push(ring[0]);
    dp_chain(&closed[..=far], eps, &mut keep[..=far]);
    dp_chain(&closed[far..], eps, &mut keep[far..]);
    (0..n).filter(|&k| keep[k]).map(|k| ring[k]).collect()
}

/// Simplified outer contour of every 8-connected component of `mask >= 0.5`
/// with at least `min_area` pixels, in raster order of their first pixel.
pub fn trace_contours(mask: &Grid, min_area: f64) -> Result<Vec<TextPolygon>> {
    let labeling = label_components(mask, 0.5)?;
    let (h, w) = (labeling.height as i64, labeling.width as i64);
    let mut out = Vec::new();
    for (k, comp) in labeling.components.iter().enumerate() {
        if (comp.len() as f64) < min_area {
            continue;
        }
        let id = k as u32 + 1;
        let inside = |i: i64, j: i64| {
            i >= 0 && j >= 0 && i < h && j < w && labeling.label_at(i as usize, j as usize) == id
        };
        let ring = simplify_ring(&trace_boundary(inside, comp[0]), SIMPLIFY_EPS);
        // degenerate rings (e.g. a single-pixel diagonal chain) are skipped
        if let Ok(poly) = TextPolygon::new(ring) {
            out.push(poly);
        }
    }
    Ok(out)
}

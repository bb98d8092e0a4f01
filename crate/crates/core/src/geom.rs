//! Rotated rectangles, polygons, pixel-centre rasterization and polygon IoU.
//!
//! Pixel `(i, j)` covers `[j, j+1) x [i, i+1)` and is sampled at its centre
//! `(j + 0.5, i + 0.5)`. Inside tests use the even-odd rule with a half-open
//! crossing convention, so a pixel centre lying exactly on a left or top
//! boundary counts as inside and one on a right or bottom boundary does not.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Wraps an angle into `(-pi/2, pi/2]`; a rectangle is symmetric under a
/// half turn so no information is lost.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut t = theta % PI;
    if t > FRAC_PI_2 {
        t -= PI;
    } else if t <= -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// One text component: a `w x h` box centred on `(cx, cy)` whose width axis
/// points along `(cos theta, sin theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub cx: f64,
    pub cy: f64,
    pub h: f64,
    pub w: f64,
    pub theta: f64,
}

impl RotatedRect {
    pub fn new(cx: f64, cy: f64, h: f64, w: f64, theta: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && theta.is_finite()) {
            return Err(Error::Geometry(
                "rectangle centre and angle must be finite".into(),
            ));
        }
        if !(h > 0.0 && w > 0.0 && h.is_finite() && w.is_finite()) {
            return Err(Error::Geometry(format!(
                "rectangle extents must be positive, got h={h} w={w}"
            )));
        }
        Ok(Self {
            cx,
            cy,
            h,
            w,
            theta: normalize_angle(theta),
        })
    }

    /// Corners in counter-clockwise order (positive shoelace area).
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.theta.sin_cos();
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        let at = |u: f64, v: f64| Point::new(self.cx + u * c - v * s, self.cy + u * s + v * c);
        [at(hw, -hh), at(hw, hh), at(-hw, hh), at(-hw, -hh)]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Free-function form of [`RotatedRect::corners`].
pub fn rect_corners(r: &RotatedRect) -> [Point; 4] {
    r.corners()
}

/// A closed polygon (the closing edge is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct TextPolygon {
    vertices: Vec<Point>,
}

impl TextPolygon {
    /// Builds a polygon, dropping consecutive duplicate vertices. Fails when
    /// fewer than three distinct vertices remain or the area is zero.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let mut vs: Vec<Point> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::Geometry("polygon vertex is not finite".into()));
            }
            if vs.last() != Some(&p) {
                vs.push(p);
            }
        }
        while vs.len() > 1 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(Error::Geometry(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                vs.len()
            )));
        }
        let poly = Self { vertices: vs };
        if poly.area() == 0.0 {
            return Err(Error::Geometry("polygon has zero area".into()));
        }
        Ok(poly)
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_convex(&self) -> bool {
        is_convex(&self.vertices)
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(&self.vertices, p)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<Self> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect())
    }
}

impl From<&RotatedRect> for TextPolygon {
    fn from(r: &RotatedRect) -> Self {
        Self {
            vertices: r.corners().to_vec(),
        }
    }
}

/// Anything with a closed polygonal outline.
pub trait Outline {
    fn outline(&self) -> Vec<Point>;
}

impl Outline for RotatedRect {
    fn outline(&self) -> Vec<Point> {
        self.corners().to_vec()
    }
}

impl Outline for TextPolygon {
    fn outline(&self) -> Vec<Point> {
        self.vertices.clone()
    }
}

pub fn signed_area(vs: &[Point]) -> f64 {
    let n = vs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(vs: &[Point], p: Point) -> bool {
    let n = vs.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vs[i], vs[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Convex (including collinear runs) and simple: all turns share a sign and
/// the boundary winds exactly once.
pub fn is_convex(vs: &[Point]) -> bool {
    let n = vs.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    let mut turning = 0.0;
    for i in 0..n {
        let (a, b, c) = (vs[i], vs[(i + 1) % n], vs[(i + 2) % n]);
        let z = cross(a, b, c);
        if z != 0.0 {
            if sign == 0.0 {
                sign = z.signum();
            } else if z.signum() != sign {
                return false;
            }
        }
        let d1 = (b.y - a.y).atan2(b.x - a.x);
        let d2 = (c.y - b.y).atan2(c.x - b.x);
        let mut turn = d2 - d1;
        while turn > PI {
            turn -= 2.0 * PI;
        }
        while turn <= -PI {
            turn += 2.0 * PI;
        }
        turning += turn;
    }
    sign != 0.0 && (turning.abs() - 2.0 * PI).abs() < 1e-6
}

/// Sorted x positions where the horizontal line at `y` crosses the boundary.
fn row_crossings(vs: &[Point], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = vs.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vs[i], vs[j]);
        if (a.y > y) != (b.y > y) {
            out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        j = i;
    }
    out.sort_by(f64::total_cmp);
}

/// Sets to 1 every pixel of the `[h, w]` mask whose centre is inside `shape`.
pub fn rasterize_into(mask: &mut Grid, shape: &impl Outline) -> Result<()> {
    let (h, w) = mask.dims2("rasterize")?;
    let vs = shape.outline();
    if vs.len() < 3 || h == 0 || w == 0 {
        return Ok(());
    }
    let ymin = vs.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = vs.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let i0 = ((ymin - 0.5).floor().max(0.0)) as usize;
    let i1 = ((ymax - 0.5).ceil().max(-1.0) + 1.0).min(h as f64) as usize;
    let mut xs = Vec::new();
    for i in i0..i1 {
        row_crossings(&vs, i as f64 + 0.5, &mut xs);
        for pair in xs.chunks_exact(2) {
            // centres j + 0.5 in [pair[0], pair[1])
            let j0 = (pair[0] - 0.5).ceil().max(0.0);
            let j1 = (pair[1] - 0.5).ceil().min(w as f64);
            if j1 <= j0 {
                continue;
            }
            for j in j0 as usize..j1 as usize {
                mask.set2(i, j, 1.0);
            }
        }
    }
    Ok(())
}

/// Binary `[h, w]` mask of the pixels whose centres fall inside `shape`.
pub fn rasterize(shape: &impl Outline, h: usize, w: usize) -> Grid {
    let mut mask = Grid::zeros(&[h, w]);
    rasterize_into(&mut mask, shape).expect("mask is rank 2");
    mask
}

/// Sutherland-Hodgman: clips `subject` (any simple polygon) against the
/// convex polygon `clip`. The result's area is the intersection area.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let orient = signed_area(clip).signum();
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (e0, e1) = (clip[i], clip[(i + 1) % n]);
        let inside = |p: Point| orient * cross(e0, e1, p) >= 0.0;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for k in 0..m {
            let cur = input[k];
            let prev = input[(k + m - 1) % m];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci {
                if !pi {
                    output.push(line_intersection(prev, cur, e0, e1));
                }
                output.push(cur);
            } else if pi {
                output.push(line_intersection(prev, cur, e0, e1));
            }
        }
    }
    output
}

fn line_intersection(p0: Point, p1: Point, q0: Point, q1: Point) -> Point {
    let d = (p1.x - p0.x) * (q1.y - q0.y) - (p1.y - p0.y) * (q1.x - q0.x);
    if d == 0.0 {
        return p1;
    }
    let t = ((q0.x - p0.x) * (q1.y - q0.y) - (q0.y - p0.y) * (q1.x - q0.x)) / d;
    Point::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y))
}

thread_local! {
    static OVERLAP_OPS: Cell<u64> = const { Cell::new(0) };
}

/// Number of pairwise overlap (IoU) computations performed on this thread
/// since the last [`reset_overlap_ops`].
pub fn overlap_ops() -> u64 {
    OVERLAP_OPS.with(Cell::get)
}

pub fn reset_overlap_ops() {
    OVERLAP_OPS.with(|c| c.set(0));
}

fn count_overlap_op() {
    OVERLAP_OPS.with(|c| c.set(c.get() + 1));
}

fn iou_from_areas(inter: f64, a: f64, b: f64) -> f64 {
    let union = a + b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of two rotated rectangles (exact convex clipping).
pub fn rect_iou(a: &RotatedRect, b: &RotatedRect) -> f64 {
    count_overlap_op();
    let inter = signed_area(&clip_convex(&a.corners(), &b.corners())).abs();
    iou_from_areas(inter, a.area(), b.area())
}

/// Samples per unit length used by the rasterized IoU fallback.
pub const IOU_SUPERSAMPLE: f64 = 4.0;
const IOU_MIN_SAMPLES: f64 = 128.0;
const DEGENERATE_AREA: f64 = 1e-12;

/// Polygon IoU.
///
/// Exact when either operand is convex (that operand becomes the clipper);
/// otherwise estimated on a supersampled grid over the union bounding box.
pub fn polygon_iou(a: &TextPolygon, b: &TextPolygon) -> f64 {
    count_overlap_op();
    let (aa, ab) = (a.area(), b.area());
    if aa < DEGENERATE_AREA || ab < DEGENERATE_AREA {
        return 0.0;
    }
    if !bboxes_overlap(a.vertices(), b.vertices()) {
        return 0.0;
    }
    if b.is_convex() {
        let inter = signed_area(&clip_convex(a.vertices(), b.vertices())).abs();
        iou_from_areas(inter, aa, ab)
    } else if a.is_convex() {
        let inter = signed_area(&clip_convex(b.vertices(), a.vertices())).abs();
        iou_from_areas(inter, aa, ab)
    } else {
        raster_iou(a.vertices(), b.vertices())
    }
}

fn bbox(vs: &[Point]) -> (f64, f64, f64, f64) {
    vs.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
    )
}

fn bboxes_overlap(a: &[Point], b: &[Point]) -> bool {
    let (ax0, ay0, ax1, ay1) = bbox(a);
    let (bx0, by0, bx1, by1) = bbox(b);
    ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
}

/// Number of sample points `x0 + (k + 0.5) * step` (k >= 0) inside `[lo, hi)`.
fn samples_in(lo: f64, hi: f64, x0: f64, step: f64) -> u64 {
    let first = ((lo - x0) / step - 0.5).ceil().max(0.0);
    let end = ((hi - x0) / step - 0.5).ceil().max(0.0);
    (end - first).max(0.0) as u64
}

fn raster_iou(a: &[Point], b: &[Point]) -> f64 {
    let (ax0, ay0, ax1, ay1) = bbox(a);
    let (bx0, by0, bx1, by1) = bbox(b);
    let (x0, y0) = (ax0.min(bx0), ay0.min(by0));
    let (x1, y1) = (ax1.max(bx1), ay1.max(by1));
    let extent = (x1 - x0).max(y1 - y0);
    let res = IOU_SUPERSAMPLE.max(IOU_MIN_SAMPLES / extent);
    let step = 1.0 / res;
    let rows = ((y1 - y0) * res).ceil() as usize;

    let (mut in_a, mut in_b, mut in_both) = (0u64, 0u64, 0u64);
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for r in 0..rows {
        let y = y0 + (r as f64 + 0.5) * step;
        row_crossings(a, y, &mut xa);
        row_crossings(b, y, &mut xb);
        for s in xa.chunks_exact(2) {
            in_a += samples_in(s[0], s[1], x0, step);
        }
        for s in xb.chunks_exact(2) {
            in_b += samples_in(s[0], s[1], x0, step);
        }
        // sorted interval lists: two-pointer intersection
        let (mut i, mut j) = (0, 0);
        while i + 1 < xa.len() && j + 1 < xb.len() {
            let lo = xa[i].max(xb[j]);
            let hi = xa[i + 1].min(xb[j + 1]);
            if lo < hi {
                in_both += samples_in(lo, hi, x0, step);
            }
            if xa[i + 1] < xb[j + 1] {
                i += 2;
            } else {
                j += 2;
            }
        }
    }
    let union = in_a + in_b - in_both;
    if union == 0 {
        0.0
    } else {
        in_both as f64 / union as f64
    }
}

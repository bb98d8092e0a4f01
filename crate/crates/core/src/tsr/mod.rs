//! Bottom-up text shaping: threshold the head maps, sample component centres
//! per centre-region component, place fixed-width rotated rectangles, union
//! and close them, then trace one contour per resulting region.

pub mod compare;
pub mod contour;
pub mod fps;
pub mod morph;
pub mod nms;

pub use contour::trace_contours;
pub use fps::{farthest_point_sample, farthest_point_sample_seeded};
pub use nms::{nms_baseline, nms_indices};

use crate::error::{Error, Result};
use crate::geom::{rasterize_into, Point, RotatedRect, TextPolygon};
use crate::grid::Grid;
use crate::maps::GeometryMaps;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingConfig {
    pub text_thresh: f64,
    pub center_thresh: f64,
    /// Width of every component rectangle, map pixels.
    pub rect_width: f64,
    /// Maximum centres sampled per centre-region component.
    pub fps_budget: usize,
    /// Sampling stops once no candidate is this far from the selected set.
    pub fps_stop_dist: f64,
    /// Side of the square closing element; odd.
    pub close_kernel: usize,
    /// Regions with fewer pixels are dropped.
    pub min_area: f64,
    /// `x`/`y` channels hold offsets from the pixel centre instead of
    /// absolute map coordinates.
    pub offset_mode: bool,
    /// Multiplies output polygon coordinates, e.g. 4 to go from a 1/4-scale
    /// map to input pixels.
    pub output_scale: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        let rect_width = 4.0;
        Self {
            text_thresh: 0.5,
            center_thresh: 0.5,
            rect_width,
            fps_budget: 64,
            fps_stop_dist: rect_width / 2.0,
            close_kernel: 5,
            min_area: 16.0,
            offset_mode: false,
            output_scale: 1.0,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, t) in [
            ("text_thresh", self.text_thresh),
            ("center_thresh", self.center_thresh),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{name} = {t} must lie in (0, 1)"));
            }
        }
        if !(self.rect_width > 0.0 && self.rect_width.is_finite()) {
            return bad(format!("rect_width = {} must be positive", self.rect_width));
        }
        if self.fps_budget == 0 {
            return bad("fps_budget must be at least 1".into());
        }
        if !(self.fps_stop_dist >= 0.0 && self.fps_stop_dist.is_finite()) {
            return bad(format!(
                "fps_stop_dist = {} must be >= 0",
                self.fps_stop_dist
            ));
        }
        if self.close_kernel == 0 || self.close_kernel % 2 == 0 {
            return bad(format!("close_kernel = {} must be odd", self.close_kernel));
        }
        if !(self.min_area >= 0.0 && self.min_area.is_finite()) {
            return bad(format!("min_area = {} must be >= 0", self.min_area));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return bad(format!(
                "output_scale = {} must be positive",
                self.output_scale
            ));
        }
        Ok(())
    }
}

/// Pixels `(row, col)` of each 8-connected component of `center_map >= thresh`.
pub fn extract_centers(center_map: &Grid, thresh: f64) -> Result<Vec<Vec<(usize, usize)>>> {
    Ok(morph::label_components(center_map, thresh)?.components)
}

/// One rectangle per centre pixel, read from the geometry channels. Pixels
/// whose regressed height is not a positive finite number yield nothing.
pub fn build_components(
    centers: &[(usize, usize)],
    geo: &GeometryMaps,
    cfg: &ShapingConfig,
) -> Result<Vec<RotatedRect>> {
    let (h, w) = geo.dims()?;
    let mut rects = Vec::with_capacity(centers.len());
    for &(i, j) in centers {
        if i >= h || j >= w {
            return Err(Error::InvalidArgument(format!(
                "centre ({i}, {j}) outside {h}x{w} maps"
            )));
        }
        let (mut cx, mut cy) = (geo.x.at2(i, j), geo.y.at2(i, j));
        if cfg.offset_mode {
            cx += j as f64 + 0.5;
            cy += i as f64 + 0.5;
        }
        if let Ok(r) =
            RotatedRect::new(cx, cy, geo.h.at2(i, j), cfg.rect_width, geo.theta.at2(i, j))
        {
            rects.push(r);
        }
    }
    Ok(rects)
}

/// Union of the rasterized rectangles, closed with a
/// `close_kernel x close_kernel` square.
pub fn accumulate_and_close(
    rects: &[RotatedRect],
    frame: (usize, usize),
    cfg: &ShapingConfig,
) -> Result<Grid> {
    if frame.0 == 0 || frame.1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "frame {}x{} is empty",
            frame.0, frame.1
        )));
    }
    let mut mask = Grid::zeros(&[frame.0, frame.1]);
    for r in rects {
        rasterize_into(&mut mask, r)?;
    }
    morph::close(&mask, cfg.close_kernel)
}

/// Axis-aligned window `(row0, col0, rows, cols)` covering `rects` plus
/// `pad` pixels, clipped to the frame. `None` when nothing lands inside.
fn window(
    rects: &[RotatedRect],
    frame: (usize, usize),
    pad: usize,
) -> Option<(usize, usize, usize, usize)> {
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for p in rects.iter().flat_map(|r| r.corners()) {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let pad = pad as f64;
    let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
    let (r0, r1) = (
        clip((y0 - pad).floor(), frame.0),
        clip((y1 + pad).ceil(), frame.0),
    );
    let (c0, c1) = (
        clip((x0 - pad).floor(), frame.1),
        clip((x1 + pad).ceil(), frame.1),
    );
    (r1 > r0 && c1 > c0).then_some((r0, c0, r1 - r0, c1 - c0))
}

/// Contours of one centre-region component. Work happens in a window around
/// its rectangles; the window margin exceeds the closing reach, so the
/// result equals closing on the full frame.
fn shape_component(
    pixels: &[(usize, usize)],
    maps: &GeometryMaps,
    frame: (usize, usize),
    cfg: &ShapingConfig,
) -> Result<(Vec<TextPolygon>, usize)> {
    let points: Vec<Point> = pixels
        .iter()
        .map(|&(i, j)| Point::new(j as f64, i as f64))
        .collect();
    let picked = farthest_point_sample(&points, cfg.fps_budget, cfg.fps_stop_dist)?;
    let centres: Vec<(usize, usize)> = picked.iter().map(|&k| pixels[k]).collect();
    let rects = build_components(&centres, maps, cfg)?;
    let Some((r0, c0, rows, cols)) = window(&rects, frame, cfg.close_kernel + 1) else {
        return Ok((Vec::new(), rects.len()));
    };
    let local: Vec<RotatedRect> = rects
        .iter()
        .map(|r| RotatedRect {
            cx: r.cx - c0 as f64,
            cy: r.cy - r0 as f64,
            ..*r
        })
        .collect();
    let mask = accumulate_and_close(&local, (rows, cols), cfg)?;
    let (dx, dy, s) = (c0 as f64, r0 as f64, cfg.output_scale);
    let polys = trace_contours(&mask, cfg.min_area)?
        .into_iter()
        .map(|p| p.map(|v| Point::new((v.x + dx) * s, (v.y + dy) * s)))
        .collect::<Result<Vec<_>>>()?;
    Ok((polys, rects.len()))
}

/// Runs the whole shaping pipeline on one image's maps. Deterministic; an
/// empty result is not an error.
pub fn shape_text(maps: &GeometryMaps, cfg: &ShapingConfig) -> Result<Vec<TextPolygon>> {
    Ok(shape_text_counted(maps, cfg)?.0)
}

/// [`shape_text`] plus the number of rectangles placed.
pub(crate) fn shape_text_counted(
    maps: &GeometryMaps,
    cfg: &ShapingConfig,
) -> Result<(Vec<TextPolygon>, usize)> {
    cfg.validate()?;
    let frame = maps.dims()?;
    let gated = maps.center.zip_map(&maps.text, "shape_text", |c, t| {
        if c >= cfg.center_thresh && t >= cfg.text_thresh {
            1.0
        } else {
            0.0
        }
    })?;
    let mut out = Vec::new();
    let mut placed = 0;
    for comp in extract_centers(&gated, 0.5)? {
        let (polys, n) = shape_component(&comp, maps, frame, cfg)?;
        out.extend(polys);
        placed += n;
    }
    Ok((out, placed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rect_corners;
    use std::f64::consts::FRAC_PI_4;

    fn constant_maps(h: usize, w: usize, x: f64, y: f64, rh: f64, theta: f64) -> GeometryMaps {
        let mut m = GeometryMaps::zeros(h, w);
        m.x = Grid::filled(&[h, w], x);
        m.y = Grid::filled(&[h, w], y);
        m.h = Grid::filled(&[h, w], rh);
        m.theta = Grid::filled(&[h, w], theta);
        m
    }

    #[test]
    fn defaults_validate() {
        let cfg = ShapingConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.fps_stop_dist, 2.0);
        assert!(ShapingConfig {
            close_kernel: 4,
            ..cfg
        }
        .validate()
        .is_err());
        assert!(ShapingConfig {
            text_thresh: 1.0,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rectangles_from_channels() {
        let cfg = ShapingConfig::default();
        let geo = constant_maps(8, 8, 3.0, 4.0, 6.0, 0.0);
        let rects = build_components(&[(1, 1), (5, 2)], &geo, &cfg).unwrap();
        assert_eq!(
            rects,
            vec![RotatedRect::new(3.0, 4.0, 6.0, 4.0, 0.0).unwrap(); 2]
        );
        assert!(build_components(&[], &geo, &cfg).unwrap().is_empty());

        let geo = constant_maps(8, 8, 3.0, 4.0, 6.0, FRAC_PI_4);
        let r = build_components(&[(0, 0)], &geo, &cfg).unwrap()[0];
        let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        // width axis (c, s), height axis (-s, c)
        let expect = [(2.0, -3.0), (2.0, 3.0), (-2.0, 3.0), (-2.0, -3.0)]
            .map(|(u, v): (f64, f64)| Point::new(3.0 + u * c - v * s, 4.0 + u * s + v * c));
        for (got, want) in rect_corners(&r).iter().zip(expect) {
            assert!(got.dist(want) < 1e-12);
        }

        let offset = ShapingConfig {
            offset_mode: true,
            ..cfg
        };
        let geo = constant_maps(8, 8, 0.0, 0.0, 6.0, 0.0);
        let r = build_components(&[(2, 5)], &geo, &offset).unwrap()[0];
        assert_eq!((r.cx, r.cy), (5.5, 2.5));

        let bad = constant_maps(8, 8, 3.0, 4.0, 0.0, 0.0);
        assert!(build_components(&[(0, 0)], &bad, &cfg).unwrap().is_empty());
    }

    #[test]
    fn accumulation_edges() {
        let cfg = ShapingConfig::default();
        assert_eq!(
            accumulate_and_close(&[], (6, 6), &cfg).unwrap(),
            Grid::zeros(&[6, 6])
        );
        let r = RotatedRect::new(8.0, 8.0, 6.0, 8.0, 0.0).unwrap();
        let m = accumulate_and_close(&[r], (16, 16), &cfg).unwrap();
        assert_eq!(m.data().iter().sum::<f64>(), 48.0);
    }

    #[test]
    fn zero_maps_give_nothing() {
        let maps = GeometryMaps::zeros(32, 32);
        assert!(shape_text(&maps, &ShapingConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn straight_band_shapes_to_box() {
        let (h, w) = (24, 48);
        let mut maps = GeometryMaps::zeros(h, w);
        for i in 0..h {
            for j in 0..w {
                let inside = (8..16).contains(&i) && (6..42).contains(&j);
                let core = (11..13).contains(&i) && (8..40).contains(&j);
                maps.text.set2(i, j, inside as u8 as f64);
                maps.center.set2(i, j, core as u8 as f64);
                maps.x.set2(i, j, j as f64 + 0.5);
                maps.y.set2(i, j, 12.0);
                maps.h.set2(i, j, 8.0);
            }
        }
        let polys = shape_text(&maps, &ShapingConfig::default()).unwrap();
        assert_eq!(polys.len(), 1);
        let a = polys[0].area();
        // rectangles span x in [6.5, 41.5] at height 8
        assert!((a - 35.0 * 8.0).abs() < 16.0, "area {a}");
        let scaled = shape_text(
            &maps,
            &ShapingConfig {
                output_scale: 4.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((scaled[0].area() - 16.0 * a).abs() < 1e-9);
    }
}

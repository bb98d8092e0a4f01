//! Synthetic text bands with exact ground truth.
//!
//! A band is a centreline with a height that varies linearly along it. The
//! ground-truth polygon is the pair of offset curves at `±h/2`; the text
//! map is that polygon rasterized; the centre map keeps `|d| <= h/4` minus
//! the last `END_SHRINK` pixels at each end; the geometry channels hold the
//! nearest centreline point, the local height and the tangent angle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, rasterize, Point, TextPolygon};
use crate::grid::Grid;
use crate::maps::GeometryMaps;
use crate::tsr::morph::dilate;

/// Arc-length spacing of centreline samples.
const STEP: f64 = 0.25;
/// Ground-truth vertices are emitted every this many samples (1 px).
const VERTEX_EVERY: usize = 4;
/// Centre-region trim at each end of a band, px.
pub const END_SHRINK: f64 = 2.0;
/// Value of the `w` channel.
pub const SYNTH_RECT_WIDTH: f64 = 4.0;
const MIN_LENGTH: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Centerline {
    /// `y = y0 + amplitude * sin(2 pi (x - x0) / period + phase)` for x in
    /// `[x0, x1]`.
    Sinusoid {
        x0: f64,
        x1: f64,
        y0: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
    /// Vertices are rounded off with corner cutting before sampling.
    Polyline(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub centerline: Centerline,
    pub height_start: f64,
    pub height_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub bands: Vec<BandSpec>,
    /// Standard deviation of the Gaussian noise added to the text and
    /// centre maps (and the image).
    pub noise_sigma: f64,
    /// Contrast gain toward 0.5 on the score maps, in `(0, 1]`; also scales
    /// image brightness.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub maps: GeometryMaps,
    /// One per band, in spec order.
    pub polygons: Vec<TextPolygon>,
    /// Dim, noisy gray image of the bands.
    pub image: Grid,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    p: Point,
    phi: f64,
    h: f64,
    s: f64,
}

fn chaikin(pts: &[Point], rounds: usize) -> Vec<Point> {
    let mut cur = pts.to_vec();
    for _ in 0..rounds {
        let mut next = vec![cur[0]];
        for w in cur.windows(2) {
            let (a, b) = (w[0], w[1]);
            next.push(Point::new(0.75 * a.x + 0.25 * b.x, 0.75 * a.y + 0.25 * b.y));
            next.push(Point::new(0.25 * a.x + 0.75 * b.x, 0.25 * a.y + 0.75 * b.y));
        }
        next.push(cur[cur.len() - 1]);
        cur = next;
    }
    cur
}

/// Fine polyline approximating the centreline.
fn dense_curve(c: &Centerline) -> Result<Vec<Point>> {
    match c {
        Centerline::Sinusoid {
            x0,
            x1,
            y0,
            amplitude,
            period,
            phase,
        } => {
            if !(x1 > x0)
                || !(*period > 0.0)
                || ![x0, x1, y0, amplitude, phase].iter().all(|v| v.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "sinusoid needs finite x0 < x1 and period > 0, got x0={x0} x1={x1} period={period}"
                )));
            }
            let n = ((x1 - x0) / 0.02).ceil() as usize;
            Ok((0..=n)
                .map(|k| {
                    let x = x0 + (x1 - x0) * k as f64 / n as f64;
                    let y =
                        y0 + amplitude * (std::f64::consts::TAU * (x - x0) / period + phase).sin();
                    Point::new(x, y)
                })
                .collect())
        }
        Centerline::Polyline(pts) => {
            if pts.len() < 2 || pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return Err(Error::InvalidArgument(
                    "polyline needs at least 2 finite points".into(),
                ));
            }
            let smooth = chaikin(pts, 5);
            let mut dense = vec![smooth[0]];
            for w in smooth.windows(2) {
                let m = (w[0].dist(w[1]) / 0.02).ceil().max(1.0) as usize;
                for k in 1..=m {
                    let t = k as f64 / m as f64;
                    dense.push(Point::new(
                        w[0].x + t * (w[1].x - w[0].x),
                        w[0].y + t * (w[1].y - w[0].y),
                    ));
                }
            }
            Ok(dense)
        }
    }
}

/// Resamples at arc spacing [`STEP`] (last gap may be shorter) and attaches
/// tangent angles and heights.
fn sample_band(band: &BandSpec) -> Result<Vec<Sample>> {
    if !(band.height_start > 0.0 && band.height_end > 0.0)
        || !band.height_start.is_finite()
        || !band.height_end.is_finite()
    {
        return Err(Error::InvalidArgument(format!(
            "band heights must be positive, got {} and {}",
            band.height_start, band.height_end
        )));
    }
    let dense = dense_curve(&band.centerline)?;
    let mut arc = vec![0.0];
    for w in dense.windows(2) {
        arc.push(arc.last().unwrap() + w[0].dist(w[1]));
    }
    let total = *arc.last().unwrap();
    if total < MIN_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "band length {total:.2} below {MIN_LENGTH} px"
        )));
    }
    let n = (total / STEP).ceil() as usize;
    let mut pts = Vec::with_capacity(n + 1);
    let mut seg = 0;
    for k in 0..=n {
        let s = (k as f64 * STEP).min(total);
        while seg + 2 < arc.len() && arc[seg + 1] < s {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let t = if len > 0.0 {
            ((s - arc[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (a, b) = (dense[seg], dense[seg + 1]);
        pts.push((Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)), s));
    }
    let m = pts.len();
    let samples: Vec<Sample> = (0..m)
        .map(|k| {
            let (a, b) = (pts[k.saturating_sub(1)].0, pts[(k + 1).min(m - 1)].0);
            let (p, s) = pts[k];
            let h = band.height_start + (band.height_end - band.height_start) * s / total;
            Sample {
                p,
                phi: (b.y - a.y).atan2(b.x - a.x),
                h,
                s,
            }
        })
        .collect();
    // offset curves must not fold: radius of curvature above h/2
    for w in samples.windows(3) {
        let mut dphi = w[2].phi - w[0].phi;
        dphi =
            (dphi + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        let ds = w[2].s - w[0].s;
        if ds > 0.0 && 0.5 * w[1].h * dphi.abs() / ds > 0.9 {
            return Err(Error::InvalidArgument(format!(
                "band bends too sharply for its height near ({:.1}, {:.1})",
                w[1].p.x, w[1].p.y
            )));
        }
    }
    Ok(samples)
}

fn normal(phi: f64) -> (f64, f64) {
    (-phi.sin(), phi.cos())
}

fn band_polygon(samples: &[Sample]) -> Result<TextPolygon> {
    let mut idx: Vec<usize> = (0..samples.len()).step_by(VERTEX_EVERY).collect();
    if *idx.last().unwrap() != samples.len() - 1 {
        idx.push(samples.len() - 1);
    }
    let side = |k: usize, sign: f64| {
        let s = samples[k];
        let (nx, ny) = normal(s.phi);
        Point::new(s.p.x + sign * nx * s.h / 2.0, s.p.y + sign * ny * s.h / 2.0)
    };
    let mut vs: Vec<Point> = idx.iter().map(|&k| side(k, 1.0)).collect();
    vs.extend(idx.iter().rev().map(|&k| side(k, -1.0)));
    TextPolygon::new(vs)
}

/// Contrast compression toward 0.5, then clamping to `[0, 1]`.
pub fn dim(p: f64, gamma: f64) -> f64 {
    (0.5 + gamma * (p - 0.5)).clamp(0.0, 1.0)
}

pub fn synth_maps(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    let (fh, fw) = (spec.height, spec.width);
    if fh == 0 || fw == 0 {
        return Err(Error::InvalidArgument(format!("frame {fh}x{fw} is empty")));
    }
    if !(spec.gamma > 0.0 && spec.gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma {} outside (0, 1]",
            spec.gamma
        )));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma {} must be >= 0",
            spec.noise_sigma
        )));
    }
    let mut maps = GeometryMaps::zeros(fh, fw);
    let mut polygons = Vec::with_capacity(spec.bands.len());
    let mut occupied = Grid::zeros(&[fh, fw]);
    for (b, band) in spec.bands.iter().enumerate() {
        let samples = sample_band(band)?;
        let poly = band_polygon(&samples)?;
        if poly
            .vertices()
            .iter()
            .any(|v| v.x < 0.0 || v.y < 0.0 || v.x > fw as f64 || v.y > fh as f64)
        {
            return Err(Error::InvalidArgument(format!(
                "band {b} leaves the {fh}x{fw} frame"
            )));
        }
        let mask = rasterize(&poly, fh, fw);
        let grown = dilate(&mask, 3)?;
        if grown
            .data()
            .iter()
            .zip(occupied.data())
            .any(|(g, o)| *g > 0.5 && *o > 0.5)
        {
            return Err(Error::InvalidArgument(format!(
                "band {b} touches an earlier band"
            )));
        }
        let total = samples.last().unwrap().s;
        for i in 0..fh {
            for j in 0..fw {
                if mask.at2(i, j) < 0.5 {
                    continue;
                }
                occupied.set2(i, j, 1.0);
                let q = Point::new(j as f64 + 0.5, i as f64 + 0.5);
                let foot = samples
                    .iter()
                    .min_by(|a, c| {
                        let (da, dc) = (a.p.dist(q), c.p.dist(q));
                        da.total_cmp(&dc)
                    })
                    .copied()
                    .unwrap();
                let (nx, ny) = normal(foot.phi);
                let d = (q.x - foot.p.x) * nx + (q.y - foot.p.y) * ny;
                let core =
                    d.abs() <= foot.h / 4.0 && foot.s >= END_SHRINK && foot.s <= total - END_SHRINK;
                maps.text.set2(i, j, 1.0);
                maps.center.set2(i, j, core as u8 as f64);
                maps.x.set2(i, j, foot.p.x);
                maps.y.set2(i, j, foot.p.y);
                maps.h.set2(i, j, foot.h);
                maps.w.set2(i, j, SYNTH_RECT_WIDTH);
                maps.theta.set2(i, j, normalize_angle(foot.phi));
            }
        }
        polygons.push(poly);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut jitter = |v: f64| {
        if spec.noise_sigma > 0.0 {
            v + noise.sample(&mut rng)
        } else {
            v
        }
    };
    let text_clean = maps.text.clone();
    for g in [&mut maps.text, &mut maps.center] {
        for v in g.data_mut() {
            *v = dim(jitter(*v), spec.gamma);
        }
    }
    let mut image = text_clean.map(|t| spec.gamma * (0.15 + 0.7 * t));
    for v in image.data_mut() {
        *v = jitter(*v).clamp(0.0, 1.0);
    }
    Ok(SynthOutput {
        maps,
        polygons,
        image,
    })
}

/// Families of random specs used by tests, benchmarks and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Straight,
    Sinusoid,
    TwoBand,
}

pub const SYNTH_FRAME: (usize, usize) = (128, 192);

fn random_band(rng: &mut ChaCha8Rng, y_range: (f64, f64), max_amp: f64) -> BandSpec {
    let x0 = rng.gen_range(10.0..30.0);
    let x1 = rng.gen_range(150.0..180.0);
    let y0 = rng.gen_range(y_range.0..y_range.1);
    let hmax = if max_amp > 0.0 { 14.0 } else { 16.0 };
    BandSpec {
        centerline: Centerline::Sinusoid {
            x0,
            x1,
            y0,
            amplitude: if max_amp > 0.0 {
                rng.gen_range(2.0..max_amp)
            } else {
                0.0
            },
            period: rng.gen_range(90.0..160.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        },
        height_start: rng.gen_range(10.0..hmax),
        height_end: rng.gen_range(10.0..hmax),
    }
}

fn random_slanted(rng: &mut ChaCha8Rng, y_range: (f64, f64)) -> BandSpec {
    let (x0, x1) = (rng.gen_range(10.0..30.0), rng.gen_range(150.0..180.0));
    let y0 = rng.gen_range(y_range.0..y_range.1);
    let slope: f64 = rng.gen_range(-0.2..0.2);
    BandSpec {
        centerline: Centerline::Polyline(vec![
            Point::new(x0, y0),
            Point::new(x1, y0 + slope * (x1 - x0)),
        ]),
        height_start: rng.gen_range(10.0..16.0),
        height_end: rng.gen_range(10.0..16.0),
    }
}

/// A valid spec of the given family on a [`SYNTH_FRAME`] canvas.
pub fn random_spec(kind: SynthKind, seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, _) = SYNTH_FRAME;
    let hf = h as f64;
    let bands = match kind {
        SynthKind::Straight => vec![random_slanted(&mut rng, (0.4 * hf, 0.6 * hf))],
        SynthKind::Sinusoid => vec![random_band(&mut rng, (0.4 * hf, 0.6 * hf), 12.0)],
        SynthKind::TwoBand => vec![
            random_band(&mut rng, (0.2 * hf, 0.3 * hf), 6.0),
            random_band(&mut rng, (0.7 * hf, 0.8 * hf), 6.0),
        ],
    };
    SynthSpec {
        height: SYNTH_FRAME.0,
        width: SYNTH_FRAME.1,
        bands,
        noise_sigma: 0.0,
        gamma: 1.0,
    }
}

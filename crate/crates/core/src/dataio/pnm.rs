//! Binary PGM (P5) input/output and PPM (P6) overlays, 8 bits per sample.
//!
//! Gray images are `[H, W]` grids with values in `[0, 1]`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::TextPolygon;
use crate::grid::Grid;

/// Outline colour for rendered polygons.
pub const OUTLINE_RGB: [u8; 3] = [255, 0, 0];

fn img_err(msg: impl Into<String>) -> Error {
    Error::Image(msg.into())
}

/// Parsed header fields and the offset of the first sample byte.
fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<(usize, usize, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(img_err(format!(
            "expected `{}` magic",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(img_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = digits
            .parse()
            .map_err(|_| img_err(format!("header field {} is not a small integer", k + 1)))?;
    }
    // exactly one whitespace byte separates the header from the samples
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(img_err("header must end in a single whitespace byte")),
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(img_err(format!("empty image {w}x{h}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(img_err(format!(
            "maxval {maxval} unsupported, need 1..=255"
        )));
    }
    Ok((w as usize, h as usize, maxval, pos))
}

fn samples<'a>(
    bytes: &'a [u8],
    start: usize,
    w: usize,
    h: usize,
    channels: usize,
) -> Result<&'a [u8]> {
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| img_err(format!("dimensions {w}x{h} overflow")))?;
    let body = &bytes[start..];
    if body.len() != n {
        return Err(img_err(format!(
            "expected {n} sample bytes, found {}",
            body.len()
        )));
    }
    Ok(body)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid> {
    let (w, h, maxval, start) = parse_header(bytes, b"P5")?;
    let body = samples(bytes, start, w, h, 1)?;
    let m = maxval as f64;
    Grid::new(
        vec![h, w],
        body.iter().map(|&b| (b as f64 / m).min(1.0)).collect(),
    )
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_pgm(image: &Grid) -> Result<Vec<u8>> {
    let (h, w) = image.dims2("encode_pgm")?;
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

pub fn write_pgm(path: impl AsRef<Path>, image: &Grid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(image)?).map_err(|e| Error::io(path, e))
}

/// 8-bit interleaved RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn from_gray(image: &Grid) -> Result<Self> {
        let (h, w) = image.dims2("RgbImage::from_gray")?;
        let data = image
            .data()
            .iter()
            .flat_map(|&v| [quantize(v); 3])
            .collect();
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let k = 3 * (row * self.width + col);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    /// Writes `rgb` at `(row, col)`; coordinates outside the image are ignored.
    pub fn put(&mut self, row: i64, col: i64, rgb: [u8; 3]) {
        if row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width {
            let k = 3 * (row as usize * self.width + col as usize);
            self.data[k..k + 3].copy_from_slice(&rgb);
        }
    }

    /// Bresenham segment between pixel positions `(x, y)`.
    pub fn line(&mut self, from: (i64, i64), to: (i64, i64), rgb: [u8; 3]) {
        let (mut x, mut y) = from;
        let (dx, dy) = ((to.0 - x).abs(), -(to.1 - y).abs());
        let (sx, sy) = ((to.0 - x).signum(), (to.1 - y).signum());
        let mut err = dx + dy;
        loop {
            self.put(y, x, rgb);
            if (x, y) == to {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Closed 1-px outline through the polygon's vertices, each rounded to
    /// the nearest pixel.
    pub fn draw_polygon(&mut self, poly: &TextPolygon, rgb: [u8; 3]) {
        let vs: Vec<(i64, i64)> = poly
            .vertices()
            .iter()
            .map(|p| (p.x.round() as i64, p.y.round() as i64))
            .collect();
        for k in 0..vs.len() {
            self.line(vs[k], vs[(k + 1) % vs.len()], rgb);
        }
    }
}

/// The gray image with every polygon outlined in [`OUTLINE_RGB`].
pub fn render_overlay(image: &Grid, polys: &[TextPolygon]) -> Result<RgbImage> {
    let mut rgb = RgbImage::from_gray(image)?;
    for p in polys {
        rgb.draw_polygon(p, OUTLINE_RGB);
    }
    Ok(rgb)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let (w, h, maxval, start) = parse_header(bytes, b"P6")?;
    let body = samples(bytes, start, w, h, 3)?;
    let data = if maxval == 255 {
        body.to_vec()
    } else {
        body.iter()
            .map(|&b| ((b as u32 * 255 + maxval / 2) / maxval).min(255) as u8)
            .collect()
    };
    Ok(RgbImage {
        width: w,
        height: h,
        data,
    })
}

pub fn write_ppm(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_round_trip_and_gradient() {
        let g = Grid::from_fn2(5, 7, |i, j| (i * 7 + j) as f64 / 34.0);
        let back = decode_pgm(&encode_pgm(&g).unwrap()).unwrap();
        for (k, v) in back.data().iter().enumerate() {
            let expect = (k as f64 / 34.0 * 255.0).round() / 255.0;
            assert_eq!(*v, expect);
        }
        let q = back.clone();
        assert_eq!(decode_pgm(&encode_pgm(&q).unwrap()).unwrap(), q);
    }

    #[test]
    fn one_pixel_and_comments() {
        let img = decode_pgm(b"P5 # a comment\n1\n1 255\n\x80").unwrap();
        assert_eq!(img.shape(), &[1, 1]);
        assert_eq!(img.data()[0], 128.0 / 255.0);
        assert_eq!(
            decode_pgm(b"P5\n2 1\n15\n\x0f\x00").unwrap().data(),
            &[1.0, 0.0]
        );
    }

    #[test]
    fn malformed_inputs() {
        for bad in [
            &b""[..],
            b"P6\n1 1\n255\n\0\0\0",
            b"P5\n1 1\n255\n",
            b"P5\n1 1\n255\n\0\0",
            b"P5\n0 1\n255\n",
            b"P5\n1 1\n65535\n\0\0",
            b"P5\n99999999999 1\n255\n",
            b"P5\n1 1\n255",
        ] {
            assert!(matches!(decode_pgm(bad), Err(Error::Image(_))), "{bad:?}");
        }
    }

    #[test]
    fn rectangle_outline_pixels() {
        let img = Grid::filled(&[10, 10], 0.5);
        let rect =
            TextPolygon::from_coords(&[(2.0, 2.0), (6.0, 2.0), (6.0, 5.0), (2.0, 5.0)]).unwrap();
        let out = render_overlay(&img, &[rect]).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let on = (2..=6).contains(&j)
                    && (2..=5).contains(&i)
                    && (i == 2 || i == 5 || j == 2 || j == 6);
                let want = if on { OUTLINE_RGB } else { [128; 3] };
                assert_eq!(out.pixel(i, j), want, "({i}, {j})");
            }
        }
        assert_eq!(decode_ppm(&encode_ppm(&out)).unwrap(), out);
        assert_eq!(
            render_overlay(&img, &[]).unwrap(),
            RgbImage::from_gray(&img).unwrap()
        );
    }

    proptest! {
        #[test]
        fn bresenham_is_connected(x0 in -5i64..20, y0 in -5i64..20, x1 in -5i64..20, y1 in -5i64..20) {
            let mut img = RgbImage { width: 30, height: 30, data: vec![0; 2700] };
            let shift = |(x, y): (i64, i64)| (x + 5, y + 5);
            img.line(shift((x0, y0)), shift((x1, y1)), [1, 1, 1]);
            let lit = img.data.chunks(3).filter(|c| c[0] == 1).count() as i64;
            prop_assert_eq!(lit, (x1 - x0).abs().max((y1 - y0).abs()) + 1);
        }

        #[test]
        fn total_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_pgm(&bytes);
            let _ = decode_ppm(&bytes);
            let mut framed = b"P5\n".to_vec();
            framed.extend(&bytes);
            let _ = decode_pgm(&framed);
        }
    }
}

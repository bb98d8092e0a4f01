//! Dense row-major `f64` arrays and the handful of kernels the network
//! modules need: convolution, bilinear sampling, row softmax and 2x bilinear
//! upsampling.
//!
//! Feature maps use the `[batch, channel, height, width]` layout; masks and
//! score maps are plain `[height, width]`.

use crate::error::{Error, Result};

/// A dense array of rank 1 to 4 stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 4 {
            return Err(Error::shape(
                "Grid::new",
                format!("rank must be 1..=4, got {}", shape.len()),
            ));
        }
        let len = checked_volume(&shape)
            .ok_or_else(|| Error::shape("Grid::new", format!("extent overflow in {shape:?}")))?;
        if len != data.len() {
            return Err(Error::shape(
                "Grid::new",
                format!("shape {shape:?} needs {len} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(!shape.is_empty() && shape.len() <= 4, "rank must be 1..=4");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Builds a `[h, w]` grid from a function of `(row, col)`.
    pub fn from_fn2(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                data.push(f(i, j));
            }
        }
        Self {
            shape: vec![h, w],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two grids of identical shape.
    pub fn zip_map(&self, other: &Grid, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.expect_same_shape(other, op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn expect_same_shape(&self, other: &Grid, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape, other.shape),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` of a rank-2 grid.
    pub fn dims2(&self, op: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [h, w] => Ok((h, w)),
            _ => Err(Error::shape(
                op,
                format!("expected rank 2, got {:?}", self.shape),
            )),
        }
    }

    pub fn dims3(&self, op: &str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(
                op,
                format!("expected rank 3, got {:?}", self.shape),
            )),
        }
    }

    pub fn dims4(&self, op: &str) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(Error::shape(
                op,
                format!("expected rank 4, got {:?}", self.shape),
            )),
        }
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    #[inline]
    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        let w = self.shape[1];
        self.data[i * w + j] = v;
    }

    #[inline]
    pub fn at4(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        let s = &self.shape;
        self.data[((b * s[1] + c) * s[2] + y) * s[3] + x]
    }

    /// One `[h, w]` plane of a rank-4 grid.
    pub fn plane(&self, b: usize, c: usize) -> Result<Grid> {
        let (nb, nc, h, w) = self.dims4("plane")?;
        if b >= nb || c >= nc {
            return Err(Error::shape(
                "plane",
                format!("index ({b}, {c}) outside batch {nb} x channels {nc}"),
            ));
        }
        let start = (b * nc + c) * h * w;
        Ok(Grid {
            shape: vec![h, w],
            data: self.data[start..start + h * w].to_vec(),
        })
    }
}

fn checked_volume(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Concatenates two `[B, C, H, W]` grids along the channel axis.
pub fn concat_channels(a: &Grid, b: &Grid, op: &str) -> Result<Grid> {
    let (ba, ca, ha, wa) = a.dims4(op)?;
    let (bb, cb, hb, wb) = b.dims4(op)?;
    if (ba, ha, wa) != (bb, hb, wb) {
        return Err(Error::shape(
            op,
            format!(
                "concat needs equal batch/height/width, got {:?} and {:?}",
                a.shape, b.shape
            ),
        ));
    }
    let plane = ha * wa;
    let mut data = Vec::with_capacity(ba * (ca + cb) * plane);
    for n in 0..ba {
        data.extend_from_slice(&a.data[n * ca * plane..(n + 1) * ca * plane]);
        data.extend_from_slice(&b.data[n * cb * plane..(n + 1) * cb * plane]);
    }
    Grid::new(vec![ba, ca + cb, ha, wa], data)
}

/// 2-D cross-correlation with zero padding.
///
/// `kernel` is `[Cout, Cin, kh, kw]` with odd spatial extents; `bias` has
/// one entry per output channel.
pub fn conv2d(
    input: &Grid,
    kernel: &Grid,
    bias: &[f64],
    stride: usize,
    padding: usize,
) -> Result<Grid> {
    const OP: &str = "conv2d";
    let (nb, cin, h, w) = input.dims4(OP)?;
    let (cout, kcin, kh, kw) = kernel.dims4(OP)?;
    if kcin != cin {
        return Err(Error::shape(
            OP,
            format!("input channels {cin} != kernel input channels {kcin}"),
        ));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::shape(
            OP,
            format!("kernel extent {kh}x{kw} must be odd"),
        ));
    }
    if bias.len() != cout {
        return Err(Error::shape(
            OP,
            format!("bias length {} != output channels {cout}", bias.len()),
        ));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv2d: stride must be >= 1".into()));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(Error::shape(
            OP,
            format!(
                "padded input {}x{} smaller than kernel {kh}x{kw}",
                h + 2 * padding,
                w + 2 * padding
            ),
        ));
    }
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let mut out = vec![0.0; nb * cout * oh * ow];
    let kdata = kernel.data();
    let idata = input.data();

    for n in 0..nb {
        for co in 0..cout {
            let obase = (n * cout + co) * oh * ow;
            out[obase..obase + oh * ow].fill(bias[co]);
            for ci in 0..cin {
                let ibase = (n * cin + ci) * h * w;
                let kbase = (co * cin + ci) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let kv = kdata[kbase + ky * kw + kx];
                        if kv == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let irow = ibase + iy as usize * w;
                            let orow = obase + oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                out[orow + ox] += kv * idata[irow + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Grid::new(vec![nb, cout, oh, ow], out)
}

/// Bilinear corner weights for sampling an `h x w` plane at `(y, x)`.
///
/// Corners outside the plane are dropped, which is equivalent to zero
/// padding. Returns `(flat index, weight)` pairs.
pub(crate) fn bilinear_taps(
    h: usize,
    w: usize,
    y: f64,
    x: f64,
) -> impl Iterator<Item = (usize, f64)> {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as i64, x0 as i64);
    [
        (y0, x0, (1.0 - fy) * (1.0 - fx)),
        (y0, x0 + 1, (1.0 - fy) * fx),
        (y0 + 1, x0, fy * (1.0 - fx)),
        (y0 + 1, x0 + 1, fy * fx),
    ]
    .into_iter()
    .filter(move |&(yy, xx, wt)| {
        wt != 0.0 && yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w
    })
    .map(move |(yy, xx, wt)| (yy as usize * w + xx as usize, wt))
}

/// Samples every channel of a `[C, H, W]` grid at fractional `(y, x)`
/// positions. Returns `[C, N]`.
pub fn bilinear_sample(input: &Grid, points: &[(f64, f64)]) -> Result<Grid> {
    let (c, h, w) = input.dims3("bilinear_sample")?;
    let n = points.len();
    let mut out = vec![0.0; c * n];
    for (k, &(y, x)) in points.iter().enumerate() {
        if !(y.is_finite() && x.is_finite()) {
            continue;
        }
        for (idx, wt) in bilinear_taps(h, w, y, x) {
            for ch in 0..c {
                out[ch * n + k] += wt * input.data[ch * h * w + idx];
            }
        }
    }
    Grid::new(vec![c, n], out)
}

/// Numerically stable softmax of one row, in place.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Softmax over each row of an `[N, M]` grid.
pub fn row_softmax(input: &Grid) -> Result<Grid> {
    let (n, m) = input.dims2("row_softmax")?;
    let mut out = input.clone();
    if m > 0 {
        for r in 0..n {
            softmax_in_place(&mut out.data[r * m..(r + 1) * m]);
        }
    }
    Ok(out)
}

/// Bilinear 2x upsampling with half-pixel centres and edge clamping.
pub fn upsample2x(input: &Grid) -> Result<Grid> {
    let (nb, c, h, w) = input.dims4("upsample2x")?;
    let (oh, ow) = (2 * h, 2 * w);
    // Source coordinate and blend weight for each output row/column.
    let axis = |n: usize, i: usize| -> (usize, usize, f64) {
        let src = ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = src.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        (lo, hi, src - lo as f64)
    };
    let rows: Vec<_> = (0..oh).map(|i| axis(h, i)).collect();
    let cols: Vec<_> = (0..ow).map(|j| axis(w, j)).collect();
    let mut out = Vec::with_capacity(nb * c * oh * ow);
    for plane in input.data.chunks(h * w) {
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Grid::new(vec![nb, c, oh, ow], out)
}

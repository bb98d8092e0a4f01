//! Dynamic snake convolution (forward only).
//!
//! A `1 x L` (or `L x 1`) kernel whose taps walk outward from the centre tap.
//! Each step advances one pixel along the kernel axis plus a clamped offset,
//! and drifts sideways by a clamped perpendicular offset; both accumulate, so
//! the taps trace a continuous bent path instead of a straight line.
//!
//! The offset field is an input (`[2L, H, W]`, shared by all channels and
//! batch elements). Channel `k` is the perpendicular step of tap `k`,
//! channel `L + k` its along-axis step. The centre tap never moves.

use crate::error::{Error, Result};
use crate::grid::{bilinear_taps, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnakeAxis {
    Horizontal,
    Vertical,
}

pub const DEFAULT_SNAKE_LENGTH: usize = 9;
pub const DEFAULT_OFFSET_BOUND: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SnakeKernel {
    axis: SnakeAxis,
    weights: Grid,
    offsets: Grid,
    offset_bound: f64,
}

impl SnakeKernel {
    /// `weights` is `[Cout, Cin, L]` with odd `L`; `offsets` is `[2L, H, W]`.
    pub fn new(axis: SnakeAxis, weights: Grid, offsets: Grid, offset_bound: f64) -> Result<Self> {
        const OP: &str = "SnakeKernel";
        let (_, _, len) = weights.dims3(OP)?;
        if len % 2 == 0 {
            return Err(Error::shape(OP, format!("length {len} must be odd")));
        }
        let (oc, _, _) = offsets.dims3(OP)?;
        if oc != 2 * len {
            return Err(Error::shape(
                OP,
                format!("offset channels {oc} != 2 x length {len}"),
            ));
        }
        if !(offset_bound >= 0.0 && offset_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "offset bound must be finite and non-negative, got {offset_bound}"
            )));
        }
        if !weights.is_finite() || !offsets.is_finite() {
            return Err(Error::InvalidArgument(
                "snake weights and offsets must be finite".into(),
            ));
        }
        Ok(Self {
            axis,
            weights,
            offsets,
            offset_bound,
        })
    }

    /// A kernel whose offsets are all zero over an `h x w` field.
    pub fn straight(axis: SnakeAxis, weights: Grid, h: usize, w: usize) -> Result<Self> {
        let len = weights.shape().get(2).copied().unwrap_or(0);
        Self::new(
            axis,
            weights,
            Grid::zeros(&[2 * len, h, w]),
            DEFAULT_OFFSET_BOUND,
        )
    }

    pub fn axis(&self) -> SnakeAxis {
        self.axis
    }

    pub fn length(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn weights(&self) -> &Grid {
        &self.weights
    }

    pub fn offsets(&self) -> &Grid {
        &self.offsets
    }

    pub fn offset_bound(&self) -> f64 {
        self.offset_bound
    }

    /// Accumulated `(along, across)` displacement of every tap relative to
    /// the output pixel at `(y, x)`.
    pub fn tap_displacements(&self, y: usize, x: usize) -> Vec<(f64, f64)> {
        let len = self.length();
        let centre = (len - 1) / 2;
        let (_, h, w) = (
            self.offsets.shape()[0],
            self.offsets.shape()[1],
            self.offsets.shape()[2],
        );
        let at = |ch: usize| {
            let v = self.offsets.data()[(ch * h + y) * w + x];
            v.clamp(-self.offset_bound, self.offset_bound)
        };
        let mut disp = vec![(0.0, 0.0); len];
        for k in centre + 1..len {
            let (along, across) = disp[k - 1];
            disp[k] = (along + 1.0 + at(len + k), across + at(k));
        }
        for k in (0..centre).rev() {
            let (along, across) = disp[k + 1];
            disp[k] = (along - 1.0 - at(len + k), across + at(k));
        }
        disp
    }

    /// Absolute `(y, x)` sample position of every tap for output `(y, x)`.
    pub fn tap_positions(&self, y: usize, x: usize) -> Vec<(f64, f64)> {
        self.tap_displacements(y, x)
            .into_iter()
            .map(|(along, across)| match self.axis {
                SnakeAxis::Horizontal => (y as f64 + across, x as f64 + along),
                SnakeAxis::Vertical => (y as f64 + along, x as f64 + across),
            })
            .collect()
    }
}

/// Applies a snake kernel to `[B, Cin, H, W]`, producing `[B, Cout, H, W]`.
pub fn dsc_forward(input: &Grid, kernel: &SnakeKernel) -> Result<Grid> {
    const OP: &str = "dsc_forward";
    let (nb, cin, h, w) = input.dims4(OP)?;
    let (cout, kcin, len) = kernel.weights.dims3(OP)?;
    if kcin != cin {
        return Err(Error::shape(
            OP,
            format!("input channels {cin} != kernel input channels {kcin}"),
        ));
    }
    let oshape = kernel.offsets.shape();
    if oshape[1] != h || oshape[2] != w {
        return Err(Error::shape(
            OP,
            format!(
                "offset field is {}x{}, input is {h}x{w}",
                oshape[1], oshape[2]
            ),
        ));
    }

    let plane = h * w;
    let wdata = kernel.weights.data();
    let idata = input.data();
    let mut out = vec![0.0; nb * cout * plane];
    let mut samples = vec![0.0; cin * len];
    for y in 0..h {
        for x in 0..w {
            let taps: Vec<Vec<(usize, f64)>> = kernel
                .tap_positions(y, x)
                .into_iter()
                .map(|(py, px)| bilinear_taps(h, w, py, px).collect())
                .collect();
            for n in 0..nb {
                for ci in 0..cin {
                    let base = (n * cin + ci) * plane;
                    for (k, tap) in taps.iter().enumerate() {
                        samples[ci * len + k] =
                            tap.iter().map(|&(idx, wt)| wt * idata[base + idx]).sum();
                    }
                }
                for co in 0..cout {
                    let wrow = &wdata[co * cin * len..(co + 1) * cin * len];
                    let acc: f64 = wrow.iter().zip(&samples).map(|(a, b)| a * b).sum();
                    out[(n * cout + co) * plane + y * w + x] = acc;
                }
            }
        }
    }
    Grid::new(vec![nb, cout, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, shape: &[usize]) -> Grid {
        let n = shape.iter().product();
        Grid::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    /// Straight 1xL / Lx1 correlation with zero padding.
    fn line_conv(input: &Grid, weights: &Grid, axis: SnakeAxis) -> Grid {
        let s = input.shape();
        let (b, cin, h, w) = (s[0], s[1], s[2], s[3]);
        let (cout, len) = (weights.shape()[0], weights.shape()[2]);
        let c = (len / 2) as i64;
        let mut out = Grid::zeros(&[b, cout, h, w]);
        for n in 0..b {
            for co in 0..cout {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            for k in 0..len {
                                let d = k as i64 - c;
                                let (yy, xx) = match axis {
                                    SnakeAxis::Horizontal => (y as i64, x as i64 + d),
                                    SnakeAxis::Vertical => (y as i64 + d, x as i64),
                                };
                                if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                                    acc += weights.data()[(co * cin + ci) * len + k]
                                        * input.at4(n, ci, yy as usize, xx as usize);
                                }
                            }
                        }
                        out.data_mut()[((n * cout + co) * h + y) * w + x] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn constant_field_interior() {
        let input = Grid::filled(&[1, 2, 12, 12], 1.5);
        let mut weights = Grid::zeros(&[1, 2, 9]);
        for (i, v) in weights.data_mut().iter_mut().enumerate() {
            *v = 0.05 * i as f64;
        }
        let s: f64 = weights.data().iter().sum();
        let k = SnakeKernel::straight(SnakeAxis::Horizontal, weights, 12, 12).unwrap();
        let out = dsc_forward(&input, &k).unwrap();
        for y in 0..12 {
            for x in 4..8 {
                assert!((out.at4(0, 0, y, x) - 1.5 * s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_pixel_perpendicular_offset_splits_impulse() {
        let (h, w) = (7, 7);
        let mut input = Grid::zeros(&[1, 1, h, w]);
        input.data_mut()[3 * w + 3] = 1.0;
        // only tap +1 carries weight; it is shifted half a pixel downward
        let weights = Grid::new(vec![1, 1, 3], vec![0.0, 0.0, 1.0]).unwrap();
        let mut offsets = Grid::zeros(&[6, h, w]);
        offsets.data_mut()[2 * h * w..3 * h * w].fill(0.5);
        let k = SnakeKernel::new(SnakeAxis::Horizontal, weights, offsets, 1.0).unwrap();
        let out = dsc_forward(&input, &k).unwrap();
        // output (y, x) reads (y + 0.5, x + 1): rows 2 and 3 of column 2 straddle the impulse
        assert!((out.at4(0, 0, 2, 2) - 0.5).abs() < 1e-15);
        assert!((out.at4(0, 0, 3, 2) - 0.5).abs() < 1e-15);
        let total: f64 = out.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn offsets_are_clamped() {
        let weights = Grid::zeros(&[1, 1, 5]);
        let offsets = Grid::filled(&[10, 3, 3], 7.0);
        let k = SnakeKernel::new(SnakeAxis::Vertical, weights, offsets, 0.25).unwrap();
        let d = k.tap_displacements(1, 1);
        assert_eq!(d[2], (0.0, 0.0));
        assert_eq!(d[3], (1.25, 0.25));
        assert_eq!(d[4], (2.5, 0.5));
        assert_eq!(d[0], (-2.5, 0.5));
    }

    #[test]
    fn rejects_mismatched_offsets() {
        let weights = Grid::zeros(&[1, 1, 3]);
        assert!(SnakeKernel::new(
            SnakeAxis::Horizontal,
            weights.clone(),
            Grid::zeros(&[5, 4, 4]),
            1.0
        )
        .is_err());
        let k = SnakeKernel::straight(SnakeAxis::Horizontal, weights, 4, 4).unwrap();
        assert!(dsc_forward(&Grid::zeros(&[1, 1, 5, 4]), &k).is_err());
        assert!(SnakeKernel::new(
            SnakeAxis::Horizontal,
            Grid::zeros(&[1, 1, 4]),
            Grid::zeros(&[8, 4, 4]),
            1.0
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn zero_offsets_equal_line_conv(seed in any::<u64>(), vertical in any::<bool>(),
                                        len in prop::sample::select(vec![1usize, 3, 5, 9])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let axis = if vertical { SnakeAxis::Vertical } else { SnakeAxis::Horizontal };
            let input = random_grid(&mut rng, &[2, 3, 6, 7]);
            let weights = random_grid(&mut rng, &[2, 3, len]);
            let k = SnakeKernel::straight(axis, weights.clone(), 6, 7).unwrap();
            let out = dsc_forward(&input, &k).unwrap();
            let oracle = line_conv(&input, &weights, axis);
            let diff = out.data().iter().zip(oracle.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn taps_strictly_increase_along_axis(seed in any::<u64>(), bound in 0.0f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offsets = random_grid(&mut rng, &[18, 4, 4]).map(|v| v * 3.0);
            let k = SnakeKernel::new(SnakeAxis::Horizontal, Grid::zeros(&[1, 1, 9]), offsets, bound).unwrap();
            for y in 0..4 {
                for x in 0..4 {
                    let pos = k.tap_positions(y, x);
                    prop_assert!(pos.windows(2).all(|p| p[1].1 > p[0].1));
                }
            }
        }

        #[test]
        fn linear_in_input(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x1 = random_grid(&mut rng, &[1, 2, 5, 5]);
            let x2 = random_grid(&mut rng, &[1, 2, 5, 5]);
            let offsets = random_grid(&mut rng, &[10, 5, 5]);
            let weights = random_grid(&mut rng, &[2, 2, 5]);
            let k = SnakeKernel::new(SnakeAxis::Vertical, weights, offsets, 1.0).unwrap();
            let mix = x1.zip_map(&x2, "mix", |p, q| a * p + b * q).unwrap();
            let lhs = dsc_forward(&mix, &k).unwrap();
            let f1 = dsc_forward(&x1, &k).unwrap();
            let f2 = dsc_forward(&x2, &k).unwrap();
            for ((l, p), q) in lhs.data().iter().zip(f1.data()).zip(f2.data()) {
                prop_assert!((l - (a * p + b * q)).abs() < 1e-10);
            }
        }
    }
}

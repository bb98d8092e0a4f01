//! Spatial constraint branch: position masks from ground truth, positional
//! merging, a small reconstruction decoder, and the two constraint losses
//! (L1 reconstruction, L2 semantic alignment) with their gradients.
//!
//! Only used to compute training losses; nothing here sits on the shaping
//! path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{rasterize_into, TextPolygon};
use crate::grid::{conv2d, sigmoid, upsample2x, Grid};

/// Binary union of ground-truth polygons at some map resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMask {
    pub mask: Grid,
    pub polygons: Vec<TextPolygon>,
}

/// Pixel is 1 iff its centre lies inside any polygon (even-odd per polygon).
pub fn build_position_mask(polygons: &[TextPolygon], h: usize, w: usize) -> Result<PositionMask> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument(format!(
            "mask frame {h}x{w} is empty"
        )));
    }
    let mut mask = Grid::zeros(&[h, w]);
    for p in polygons {
        rasterize_into(&mut mask, p)?;
    }
    Ok(PositionMask {
        mask,
        polygons: polygons.to_vec(),
    })
}

/// Normalised `(row, col)` coordinates tiled over `channels`: even channels
/// carry `(i + 0.5) / h`, odd channels `(j + 0.5) / w`.
pub fn positional_embedding(channels: usize, h: usize, w: usize) -> Grid {
    let mut data = Vec::with_capacity(channels * h * w);
    for c in 0..channels {
        for i in 0..h {
            for j in 0..w {
                data.push(if c % 2 == 0 {
                    (i as f64 + 0.5) / h as f64
                } else {
                    (j as f64 + 0.5) / w as f64
                });
            }
        }
    }
    Grid::new(vec![channels, h, w], data).expect("volume matches")
}

/// Adds a `[C, H, W]` embedding to every batch element of `[B, C, H, W]`.
pub fn merge_positional(features: &Grid, embedding: &Grid) -> Result<Grid> {
    const OP: &str = "merge_positional";
    let (_, c, h, w) = features.dims4(OP)?;
    let (ec, eh, ew) = embedding.dims3(OP)?;
    if (c, h, w) != (ec, eh, ew) {
        return Err(Error::shape(
            OP,
            format!(
                "features {:?} vs embedding {:?}",
                features.shape(),
                embedding.shape()
            ),
        ));
    }
    let mut out = features.clone();
    let e = embedding.data();
    for chunk in out.data_mut().chunks_mut(e.len()) {
        chunk.iter_mut().zip(e).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// Two 3x3 convolutions, `C -> C/2 -> 1`, ReLU between, logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmDecoder {
    pub hidden: Grid,
    pub hidden_bias: Vec<f64>,
    pub out: Grid,
    pub out_bias: Vec<f64>,
}

impl ScmDecoder {
    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mid = (channels / 2).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            Grid::new(
                shape.to_vec(),
                (0..n).map(|_| rng.gen_range(-0.05..=0.05)).collect(),
            )
            .expect("volume matches")
        };
        Self {
            hidden: fill(&[mid, channels, 3, 3]),
            hidden_bias: vec![0.0; mid],
            out: fill(&[1, mid, 3, 3]),
            out_bias: vec![0.0],
        }
    }

    pub fn forward(&self, merged: &Grid) -> Result<Grid> {
        let hid = conv2d(merged, &self.hidden, &self.hidden_bias, 1, 1)?.map(|v| v.max(0.0));
        Ok(conv2d(&hid, &self.out, &self.out_bias, 1, 1)?.map(sigmoid))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScmOutput {
    /// Upsampled lateral features plus positional embedding; the auxiliary
    /// semantic feature aligned against the main branch.
    pub merged: Grid,
    /// `[B, 1, 2h, 2w]` reconstructed position mask.
    pub reconstruction: Grid,
}

/// Upsample `C_0`, merge the positional embedding, decode.
pub fn scm_forward(c0: &Grid, decoder: &ScmDecoder) -> Result<ScmOutput> {
    let up = upsample2x(c0)?;
    let (_, c, h, w) = up.dims4("scm_forward")?;
    let merged = merge_positional(&up, &positional_embedding(c, h, w))?;
    let reconstruction = decoder.forward(&merged)?;
    Ok(ScmOutput {
        merged,
        reconstruction,
    })
}

/// Mean absolute error against the binary mask and its (sub)gradient; the
/// subgradient at zero error is 0.
pub fn loss_sr(reconstruction: &Grid, mask: &Grid) -> Result<(f64, Grid)> {
    reconstruction.expect_same_shape(mask, "loss_sr")?;
    let n = reconstruction.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = reconstruction.zip_map(mask, "loss_sr", |r, m| {
        let e = r - m;
        if e > 0.0 {
            1.0 / n
        } else if e < 0.0 {
            -1.0 / n
        } else {
            0.0
        }
    })?;
    for (r, m) in reconstruction.data().iter().zip(mask.data()) {
        loss += (r - m).abs();
    }
    Ok((loss / n, grad))
}

/// Mean squared error between auxiliary and main features, with gradients
/// for both.
pub fn loss_ss(aux: &Grid, main: &Grid) -> Result<(f64, Grid, Grid)> {
    aux.expect_same_shape(main, "loss_ss")?;
    let n = aux.len().max(1) as f64;
    let loss = aux
        .data()
        .iter()
        .zip(main.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let grad_aux = aux.zip_map(main, "loss_ss", |a, b| 2.0 * (a - b) / n)?;
    let grad_main = grad_aux.map(|g| -g);
    Ok((loss, grad_aux, grad_main))
}

/// Both constraint losses for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialLossPair {
    pub l_sr: f64,
    pub l_ss: f64,
    pub grad_reconstruction: Grid,
    pub grad_aux: Grid,
    pub grad_main: Grid,
}

pub fn spatial_losses(
    reconstruction: &Grid,
    mask: &PositionMask,
    aux: &Grid,
    main: &Grid,
) -> Result<SpatialLossPair> {
    let (l_sr, grad_reconstruction) = loss_sr(reconstruction, &mask.mask)?;
    let (l_ss, grad_aux, grad_main) = loss_ss(aux, main)?;
    Ok(SpatialLossPair {
        l_sr,
        l_ss,
        grad_reconstruction,
        grad_aux,
        grad_main,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use proptest::prelude::*;
    use rand::Rng;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> TextPolygon {
        TextPolygon::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, shape: &[usize]) -> Grid {
        let n = shape.iter().product();
        Grid::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    // Brute force: test every pixel centre against every polygon.
    fn mask_oracle(polys: &[TextPolygon], h: usize, w: usize) -> Grid {
        Grid::from_fn2(h, w, |i, j| {
            let c = Point::new(j as f64 + 0.5, i as f64 + 0.5);
            let inside = polys.iter().any(|p| {
                let vs = p.vertices();
                let mut odd = false;
                for k in 0..vs.len() {
                    let (a, b) = (vs[k], vs[(k + 1) % vs.len()]);
                    if (a.y > c.y) != (b.y > c.y)
                        && c.x < a.x + (c.y - a.y) * (b.x - a.x) / (b.y - a.y)
                    {
                        odd = !odd;
                    }
                }
                odd
            });
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn rectangle_mask_count() {
        // pixels (2,2)..=(5,4) inclusive
        let m = build_position_mask(&[rect(2.0, 2.0, 6.0, 5.0)], 8, 8).unwrap();
        assert_eq!(m.mask.data().iter().sum::<f64>(), 12.0);
        let empty = build_position_mask(&[], 8, 8).unwrap();
        assert!(empty.mask.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_rectangles_union() {
        let polys = [rect(1.0, 1.0, 6.0, 4.0), rect(3.5, 2.0, 7.5, 7.0)];
        let m = build_position_mask(&polys, 9, 9).unwrap();
        assert_eq!(m.mask, mask_oracle(&polys, 9, 9));
    }

    #[test]
    fn too_few_vertices_is_an_error() {
        assert!(TextPolygon::from_coords(&[(0.0, 0.0), (3.0, 3.0)]).is_err());
    }

    #[test]
    fn merge_is_addition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_grid(&mut rng, &[2, 3, 4, 5]);
        let e = random_grid(&mut rng, &[3, 4, 5]);
        assert_eq!(merge_positional(&f, &Grid::zeros(&[3, 4, 5])).unwrap(), f);
        let z = merge_positional(&Grid::zeros(&[2, 3, 4, 5]), &e).unwrap();
        assert_eq!(&z.data()[..60], e.data());
        assert_eq!(&z.data()[60..], e.data());
        let m = merge_positional(&f, &e).unwrap();
        for (k, v) in m.data().iter().enumerate() {
            assert_eq!(*v, f.data()[k] + e.data()[k % 60]);
        }
        assert!(merge_positional(&f, &Grid::zeros(&[3, 4, 4])).is_err());
    }

    #[test]
    fn embedding_channels() {
        let e = positional_embedding(3, 2, 4);
        assert_eq!(e.data()[0], 0.25);
        assert_eq!(e.data()[8 + 1], 3.0 / 8.0);
        assert_eq!(e.data()[16 + 4], 0.75);
    }

    #[test]
    fn scm_forward_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c0 = random_grid(&mut rng, &[1, 4, 5, 6]);
        let out = scm_forward(&c0, &ScmDecoder::seeded(4, 1)).unwrap();
        assert_eq!(out.merged.shape(), &[1, 4, 10, 12]);
        assert_eq!(out.reconstruction.shape(), &[1, 1, 10, 12]);
        assert!(out
            .reconstruction
            .data()
            .iter()
            .all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn loss_sr_closed_forms() {
        let mask = Grid::from_fn2(4, 4, |i, j| ((i + j) % 2) as f64);
        let (l, g) = loss_sr(&mask, &mask).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let (l, g) = loss_sr(&mask.map(|v| v + 0.5), &mask).unwrap();
        assert_eq!(l, 0.5);
        assert!(g.data().iter().all(|&v| v == 1.0 / 16.0));
    }

    #[test]
    fn loss_ss_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_grid(&mut rng, &[1, 2, 3, 3]);
        let (l, ga, gm) = loss_ss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(ga.data().iter().chain(gm.data()).all(|&v| v == 0.0));
        let (l, _, _) = loss_ss(&a.map(|v| v + 0.25), &a).unwrap();
        assert!((l - 0.0625).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn l1_symmetric_in_error_sign(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Grid::from_fn2(6, 6, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
            let e = random_grid(&mut rng, &[6, 6]);
            let plus = m.zip_map(&e, "t", |a, b| a + b).unwrap();
            let minus = m.zip_map(&e, "t", |a, b| a - b).unwrap();
            let (lp, _) = loss_sr(&plus, &m).unwrap();
            let (lm, _) = loss_sr(&minus, &m).unwrap();
            prop_assert!((lp - lm).abs() < 1e-12);
        }

        #[test]
        fn mask_invariant_under_vertex_rotation(seed in any::<u64>(), shift in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // star-shaped hexagon around the frame centre
            let vs: Vec<Point> = (0..6).map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 6.0;
                let r = rng.gen_range(2.0..7.0);
                Point::new(8.0 + r * a.cos(), 8.0 + r * a.sin())
            }).collect();
            let mut rotated = vs.clone();
            rotated.rotate_left(shift);
            let a = build_position_mask(&[TextPolygon::new(vs).unwrap()], 16, 16).unwrap();
            let b = build_position_mask(&[TextPolygon::new(rotated).unwrap()], 16, 16).unwrap();
            prop_assert_eq!(a.mask, b.mask);
        }
    }
}

//! Training loss heads and their gradients with respect to predicted maps.
//!
//! `total = l_seg + l_h + l_theta + l_ss + l_sr`, each term optionally
//! weighted (all weights default to 1, which leaves the plain sum).

use crate::error::Result;
use crate::grid::Grid;
use crate::maps::GeometryMaps;
use crate::scm::{spatial_losses, PositionMask};

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` before the log.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient. The gradient is zero where
/// the clamp is active.
pub fn bce_mean(pred: &Grid, gt: &Grid) -> Result<(f64, Grid)> {
    pred.expect_same_shape(gt, "bce")?;
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    for (&p, &y) in pred.data().iter().zip(gt.data()) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    let grad = pred.zip_map(gt, "bce", |p, y| {
        if p <= BCE_EPS || p >= 1.0 - BCE_EPS {
            0.0
        } else {
            (-y / p + (1.0 - y) / (1.0 - p)) / n
        }
    })?;
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegLoss {
    pub loss: f64,
    pub grad_text: Grid,
    pub grad_center: Grid,
}

/// Cross-entropy on the text map plus cross-entropy on the centre map.
pub fn loss_seg(
    pred_text: &Grid,
    pred_center: &Grid,
    gt_text: &Grid,
    gt_center: &Grid,
) -> Result<SegLoss> {
    let (lt, grad_text) = bce_mean(pred_text, gt_text)?;
    let (lc, grad_center) = bce_mean(pred_center, gt_center)?;
    Ok(SegLoss {
        loss: lt + lc,
        grad_text,
        grad_center,
    })
}

/// Smooth L1 averaged over the pixels where `region > 0.5`.
///
/// An empty region yields zero loss and zero gradient.
pub fn smooth_l1(pred: &Grid, gt: &Grid, beta: f64, region: &Grid) -> Result<(f64, Grid)> {
    pred.expect_same_shape(gt, "smooth_l1")?;
    pred.expect_same_shape(region, "smooth_l1 region")?;
    let count = region.data().iter().filter(|&&r| r > 0.5).count();
    let mut grad = Grid::zeros(pred.shape());
    if count == 0 {
        return Ok((0.0, grad));
    }
    let n = count as f64;
    let mut loss = 0.0;
    for (k, ((&p, &y), &r)) in pred
        .data()
        .iter()
        .zip(gt.data())
        .zip(region.data())
        .enumerate()
    {
        if r <= 0.5 {
            continue;
        }
        let e = p - y;
        let (l, g) = if e.abs() < beta {
            (0.5 * e * e / beta, e / beta)
        } else {
            (e.abs() - 0.5 * beta, e.signum())
        };
        loss += l;
        grad.data_mut()[k] = g / n;
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub seg: f64,
    pub h: f64,
    pub theta: f64,
    pub ss: f64,
    pub sr: f64,
    /// Transition point of the smooth L1 terms.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            seg: 1.0,
            h: 1.0,
            theta: 1.0,
            ss: 1.0,
            sr: 1.0,
            beta: 1.0,
        }
    }
}

/// Everything the loss heads look at on the prediction side.
#[derive(Debug, Clone, Copy)]
pub struct Predictions<'a> {
    pub maps: &'a GeometryMaps,
    /// `[H', W']` reconstructed position mask.
    pub reconstruction: &'a Grid,
    pub aux_feature: &'a Grid,
    pub main_feature: &'a Grid,
}

#[derive(Debug, Clone, Copy)]
pub struct Targets<'a> {
    pub text: &'a Grid,
    pub center: &'a Grid,
    pub h: &'a Grid,
    pub theta: &'a Grid,
    pub position: &'a PositionMask,
}

/// Unweighted component values and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBundle {
    pub l_seg: f64,
    pub l_h: f64,
    pub l_theta: f64,
    pub l_ss: f64,
    pub l_sr: f64,
    pub total: f64,
}

/// Gradients of `total` with respect to each prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub text: Grid,
    pub center: Grid,
    pub h: Grid,
    pub theta: Grid,
    pub reconstruction: Grid,
    pub aux_feature: Grid,
    pub main_feature: Grid,
}

pub fn total_loss(
    pred: &Predictions,
    gt: &Targets,
    weights: &LossWeights,
) -> Result<(LossBundle, LossGradients)> {
    let maps = pred.maps;
    let seg = loss_seg(&maps.text, &maps.center, gt.text, gt.center)?;
    // regression is supervised on text pixels only
    let (l_h, g_h) = smooth_l1(&maps.h, gt.h, weights.beta, gt.text)?;
    let (l_theta, g_theta) = smooth_l1(&maps.theta, gt.theta, weights.beta, gt.text)?;
    let spatial = spatial_losses(
        pred.reconstruction,
        gt.position,
        pred.aux_feature,
        pred.main_feature,
    )?;

    let bundle = LossBundle {
        l_seg: seg.loss,
        l_h,
        l_theta,
        l_ss: spatial.l_ss,
        l_sr: spatial.l_sr,
        total: weights.seg * seg.loss
            + weights.h * l_h
            + weights.theta * l_theta
            + weights.ss * spatial.l_ss
            + weights.sr * spatial.l_sr,
    };
    let scale = |g: Grid, w: f64| if w == 1.0 { g } else { g.map(|v| v * w) };
    let grads = LossGradients {
        text: scale(seg.grad_text, weights.seg),
        center: scale(seg.grad_center, weights.seg),
        h: scale(g_h, weights.h),
        theta: scale(g_theta, weights.theta),
        reconstruction: scale(spatial.grad_reconstruction, weights.sr),
        aux_feature: scale(spatial.grad_aux, weights.ss),
        main_feature: scale(spatial.grad_main, weights.ss),
    };
    Ok((bundle, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::loss_sr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Grid {
        Grid::from_fn2(8, 8, |_, _| rng.gen_range(lo..hi))
    }

    fn binary(rng: &mut ChaCha8Rng) -> Grid {
        Grid::from_fn2(8, 8, |_, _| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
    }

    /// Central differences of `f` at `x`, step 1e-5.
    fn fd(x: &Grid, f: impl Fn(&Grid) -> f64) -> Grid {
        let h = 1e-5;
        let mut g = Grid::zeros(x.shape());
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[k] += h;
            let mut xm = x.clone();
            xm.data_mut()[k] -= h;
            g.data_mut()[k] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn max_rel_err(a: &Grid, b: &Grid) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| {
                let d = (x - y).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / x.abs().max(y.abs())
                }
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn seg_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = binary(&mut rng);
        let half = Grid::filled(&[8, 8], 0.5);
        let s = loss_seg(&half, &half, &gt, &gt).unwrap();
        assert!((s.loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        let perfect = loss_seg(&gt, &gt, &gt, &gt).unwrap();
        assert!(perfect.loss < 1e-6);
    }

    #[test]
    fn smooth_l1_piecewise() {
        let mut region = Grid::zeros(&[2, 2]);
        region.data_mut()[3] = 1.0;
        let pred = Grid::filled(&[2, 2], 2.0);
        let (l, g) = smooth_l1(&pred, &Grid::zeros(&[2, 2]), 1.0, &region).unwrap();
        assert_eq!(l, 1.5);
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
        let (l, g) = smooth_l1(&pred, &pred, 1.0, &region).unwrap();
        assert_eq!((l, g.data().iter().sum::<f64>()), (0.0, 0.0));
        let (l, g) = smooth_l1(&pred, &Grid::zeros(&[2, 2]), 1.0, &Grid::zeros(&[2, 2])).unwrap();
        assert_eq!((l, g.data().iter().sum::<f64>()), (0.0, 0.0));
    }

    #[test]
    fn smooth_l1_is_c1_at_beta() {
        let region = Grid::filled(&[1], 1.0);
        let zero = Grid::zeros(&[1]);
        let at = |e: f64| smooth_l1(&Grid::filled(&[1], e), &zero, 1.0, &region).unwrap();
        let (lo, glo) = at(1.0 - 1e-8);
        let (hi, ghi) = at(1.0 + 1e-8);
        assert!((lo - hi).abs() < 1e-7);
        assert!((glo.data()[0] - ghi.data()[0]).abs() < 1e-7);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let gt = binary(&mut rng);
            let p = grid(&mut rng, 0.05, 0.95);
            let (_, g) = bce_mean(&p, &gt).unwrap();
            assert!(max_rel_err(&g, &fd(&p, |x| bce_mean(x, &gt).unwrap().0)) < 1e-5);

            let y = grid(&mut rng, -2.0, 2.0);
            let q = grid(&mut rng, -2.0, 2.0);
            let (_, g) = smooth_l1(&q, &y, 1.0, &gt).unwrap();
            assert!(max_rel_err(&g, &fd(&q, |x| smooth_l1(x, &y, 1.0, &gt).unwrap().0)) < 1e-6);

            let r = grid(&mut rng, 0.0, 1.0);
            let (_, g) = loss_sr(&r, &gt).unwrap();
            assert!(max_rel_err(&g, &fd(&r, |x| loss_sr(x, &gt).unwrap().0)) < 1e-6);
        }
    }

    #[test]
    fn weighted_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = binary(&mut rng);
        let mut maps = GeometryMaps::zeros(8, 8);
        maps.text = grid(&mut rng, 0.1, 0.9);
        maps.center = grid(&mut rng, 0.1, 0.9);
        maps.h = grid(&mut rng, 0.0, 9.0);
        maps.theta = grid(&mut rng, -1.0, 1.0);
        let recon = grid(&mut rng, 0.0, 1.0);
        let aux = grid(&mut rng, -1.0, 1.0);
        let main = grid(&mut rng, -1.0, 1.0);
        let pos = PositionMask {
            mask: gt.clone(),
            polygons: vec![],
        };
        let h = grid(&mut rng, 0.0, 9.0);
        let th = grid(&mut rng, -1.0, 1.0);
        let pred = Predictions {
            maps: &maps,
            reconstruction: &recon,
            aux_feature: &aux,
            main_feature: &main,
        };
        let tgt = Targets {
            text: &gt,
            center: &gt,
            h: &h,
            theta: &th,
            position: &pos,
        };
        let (plain, _) = total_loss(&pred, &tgt, &LossWeights::default()).unwrap();
        let w = LossWeights {
            ss: 3.0,
            ..LossWeights::default()
        };
        let (weighted, grads) = total_loss(&pred, &tgt, &w).unwrap();
        assert_eq!(plain.l_ss, weighted.l_ss);
        assert!((weighted.total - plain.total - 2.0 * plain.l_ss).abs() < 1e-12);
        let (_, base) = total_loss(&pred, &tgt, &LossWeights::default()).unwrap();
        assert_eq!(grads.aux_feature, base.aux_feature.map(|v| v * 3.0));
    }
}

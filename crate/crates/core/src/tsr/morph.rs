//! Connected components and binary morphology on `[H, W]` masks.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// 8-connected components of `mask >= thresh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub height: usize,
    pub width: usize,
    /// `0` is background, component `k` is labelled `k + 1`.
    pub labels: Vec<u32>,
    /// Pixels `(row, col)` of each component, in raster order. Components
    /// are ordered by their first pixel in raster order.
    pub components: Vec<Vec<(usize, usize)>>,
}

impl Labeling {
    pub fn label_at(&self, i: usize, j: usize) -> u32 {
        self.labels[i * self.width + j]
    }
}

pub fn label_components(mask: &Grid, thresh: f64) -> Result<Labeling> {
    let (h, w) = mask.dims2("label_components")?;
    let on = |k: usize| mask.data()[k] >= thresh;
    let mut labels = vec![0u32; h * w];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if labels[start] != 0 || !on(start) {
            continue;
        }
        let id = components.len() as u32 + 1;
        let mut pixels = Vec::new();
        labels[start] = id;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = (k / w, k % w);
            pixels.push((i, j));
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= h as i64 || nj >= w as i64 {
                        continue;
                    }
                    let nk = ni as usize * w + nj as usize;
                    if labels[nk] == 0 && on(nk) {
                        labels[nk] = id;
                        stack.push(nk);
                    }
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }
    Ok(Labeling {
        height: h,
        width: w,
        labels,
        components,
    })
}

fn check_kernel(k: usize) -> Result<usize> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "structuring element size {k} must be odd"
        )));
    }
    Ok(k / 2)
}

/// Running max (dilate) or min (erode) over a `(2r+1)` window along rows
/// then columns. Out-of-frame samples read as 0.
fn square_filter(mask: &Grid, r: usize, dilate: bool) -> Result<Grid> {
    let (h, w) = mask.dims2("morphology")?;
    let pick = |a: f64, b: f64| if dilate { a.max(b) } else { a.min(b) };
    let window = |n: usize, at: usize, get: &dyn Fn(usize) -> f64| {
        let v = (at.saturating_sub(r)..=(at + r).min(n - 1)).map(get).fold(
            if dilate {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            pick,
        );
        // a window reaching outside the frame also sees background
        if at < r || at + r >= n {
            pick(v, 0.0)
        } else {
            v
        }
    };
    let mut rows = Grid::zeros(&[h, w]);
    for i in 0..h {
        for j in 0..w {
            rows.set2(i, j, window(w, j, &|c| mask.at2(i, c)));
        }
    }
    let mut out = Grid::zeros(&[h, w]);
    for i in 0..h {
        for j in 0..w {
            out.set2(i, j, window(h, i, &|rr| rows.at2(rr, j)));
        }
    }
    Ok(out)
}

/// Dilation by a `k x k` square.
pub fn dilate(mask: &Grid, k: usize) -> Result<Grid> {
    let r = check_kernel(k)?;
    square_filter(mask, r, true)
}

/// Erosion by a `k x k` square; pixels outside the frame are background.
pub fn erode(mask: &Grid, k: usize) -> Result<Grid> {
    let r = check_kernel(k)?;
    square_filter(mask, r, false)
}

/// Dilation then erosion, evaluated as if the frame sat in an unbounded
/// empty plane: extensive (`closing >= mask`), idempotent, and shapes near
/// the border are neither eaten nor stretched to it.
pub fn close(mask: &Grid, k: usize) -> Result<Grid> {
    let r = check_kernel(k)?;
    let (h, w) = mask.dims2("close")?;
    let padded = Grid::from_fn2(h + 2 * r, w + 2 * r, |i, j| {
        if i < r || j < r || i >= h + r || j >= w + r {
            0.0
        } else {
            mask.at2(i - r, j - r)
        }
    });
    let closed = erode(&dilate(&padded, k)?, k)?;
    Ok(Grid::from_fn2(h, w, |i, j| closed.at2(i + r, j + r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_rows(rows: &[&str]) -> Grid {
        Grid::from_fn2(rows.len(), rows[0].len(), |i, j| {
            (rows[i].as_bytes()[j] == b'#') as u8 as f64
        })
    }

    /// Flood fill without the stack-based labeller.
    fn flood_count(mask: &Grid) -> Vec<usize> {
        let (h, w) = mask.dims2("t").unwrap();
        let mut seen = vec![false; h * w];
        let mut sizes = Vec::new();
        for s in 0..h * w {
            if seen[s] || mask.data()[s] < 0.5 {
                continue;
            }
            let mut frontier = vec![s];
            seen[s] = true;
            let mut n = 0;
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for k in frontier {
                    n += 1;
                    for nk in 0..h * w {
                        let (a, b) = (
                            (k / w) as i64 - (nk / w) as i64,
                            (k % w) as i64 - (nk % w) as i64,
                        );
                        if !seen[nk] && a.abs() <= 1 && b.abs() <= 1 && mask.data()[nk] >= 0.5 {
                            seen[nk] = true;
                            next.push(nk);
                        }
                    }
                }
                frontier = next;
            }
            sizes.push(n);
        }
        sizes
    }

    #[test]
    fn labels_blobs() {
        assert!(label_components(&Grid::zeros(&[5, 5]), 0.5)
            .unwrap()
            .components
            .is_empty());
        let m = from_rows(&["##....", "##..#.", "....##", "#....."]);
        let l = label_components(&m, 0.5).unwrap();
        let sizes: Vec<usize> = l.components.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 1]);
        assert_eq!(sizes, flood_count(&m));
        assert_eq!(l.label_at(2, 5), 2);
        let one = from_rows(&["...", ".#.", "..."]);
        assert_eq!(
            label_components(&one, 0.5).unwrap().components,
            vec![vec![(1, 1)]]
        );
    }

    #[test]
    fn closing_bridges_gap() {
        let mut m = Grid::zeros(&[16, 16]);
        for i in 5..10 {
            for j in 2..7 {
                m.set2(i, j, 1.0);
            }
            for j in 8..13 {
                m.set2(i, j, 1.0);
            }
        }
        assert_eq!(label_components(&m, 0.5).unwrap().components.len(), 2);
        let c = close(&m, 3).unwrap();
        assert_eq!(label_components(&c, 0.5).unwrap().components.len(), 1);
        assert_eq!(c.at2(7, 7), 1.0);
        // a solid rectangle is already closed
        let solid = from_rows(&["......", ".####.", ".####.", "......"]);
        assert_eq!(close(&solid, 3).unwrap(), solid);
        assert!(close(&m, 4).is_err());
    }

    #[test]
    fn border_shapes_keep_their_extent() {
        let m = from_rows(&["###.", "###.", "...."]);
        assert_eq!(close(&m, 5).unwrap(), m);
        assert_eq!(erode(&m, 3).unwrap(), Grid::zeros(&[3, 4]));
        let block = from_rows(&[".....", ".###.", ".###.", ".###.", "....."]);
        assert_eq!(erode(&block, 3).unwrap().data().iter().sum::<f64>(), 1.0);
        assert_eq!(
            dilate(&from_rows(&["...", ".#.", "..."]), 3).unwrap(),
            Grid::filled(&[3, 3], 1.0)
        );
    }

    proptest! {
        #[test]
        fn closing_is_extensive_and_idempotent(bits in prop::collection::vec(any::<bool>(), 80), k in prop::sample::select(vec![1usize, 3, 5])) {
            let m = Grid::from_fn2(8, 10, |i, j| bits[i * 10 + j] as u8 as f64);
            let c = close(&m, k).unwrap();
            prop_assert!(m.data().iter().zip(c.data()).all(|(a, b)| b >= a));
            prop_assert_eq!(close(&c, k).unwrap(), c);
        }

        #[test]
        fn labelling_matches_flood_fill(bits in prop::collection::vec(any::<bool>(), 64)) {
            let m = Grid::from_fn2(8, 8, |i, j| bits[i * 8 + j] as u8 as f64);
            let l = label_components(&m, 0.5).unwrap();
            let sizes: Vec<usize> = l.components.iter().map(Vec::len).collect();
            prop_assert_eq!(sizes, flood_count(&m));
        }
    }
}

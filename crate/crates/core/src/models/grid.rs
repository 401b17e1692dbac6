//! Tensor-product grids on boxes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::semigroup::StateSpace;

/// One coordinate axis of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    /// Lower edge of the first cell (cell grids) or the left boundary (node grids).
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
    pub points: Vec<f64>,
}

impl Axis {
    /// `n` cells of equal width on `[lo, hi]`, represented by their centers.
    pub fn cells(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cell axis needs n >= 2 and finite lo < hi (got n = {n}, [{lo}, {hi}])"
            )));
        }
        let h = (hi - lo) / n as f64;
        let points = (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect();
        Ok(Self { lo, hi, h, points })
    }

    /// Interior nodes `k h`, `k = 1..n-1`, of `(0, l)` with `h = l / n`.
    pub fn interior(l: f64, n: usize) -> Result<Self> {
        if n < 2 || !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "node axis needs n >= 2 and l > 0 (got n = {n}, l = {l})"
            )));
        }
        let h = l / n as f64;
        let points = (1..n).map(|k| k as f64 * h).collect();
        Ok(Self {
            lo: 0.0,
            hi: l,
            h,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor grid; states are ordered with the first coordinate varying slowest.
#[derive(Debug, Clone)]
pub struct Grid {
    pub axes: Vec<Axis>,
    pub space: Arc<StateSpace>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>, tag: &str) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "grids of dimension 1 or 2 are supported, got {}",
                axes.len()
            )));
        }
        let dims: Vec<usize> = axes.iter().map(Axis::len).collect();
        let total: usize = dims.iter().product();
        let w: f64 = axes.iter().map(|a| a.h).product();
        let points = (0..total)
            .map(|i| {
                multi_index(i, &dims)
                    .iter()
                    .zip(&axes)
                    .map(|(&k, a)| a.points[k])
                    .collect()
            })
            .collect();
        let space = StateSpace::new(points, vec![w; total], tag)?;
        Ok(Self { axes, space })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        flat_index(multi, &self.dims())
    }
}

/// Per-axis indices of flat index `i` (first axis slowest).
pub fn multi_index(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = i % d;
        i /= d;
    }
    out
}

pub fn flat_index(multi: &[usize], dims: &[usize]) -> usize {
    multi.iter().zip(dims).fold(0, |acc, (&k, &d)| acc * d + k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        let a = Axis::cells(-1.0, 1.0, 4).unwrap();
        assert_eq!(a.points, vec![-0.75, -0.25, 0.25, 0.75]);
        let b = Axis::interior(1.0, 4).unwrap();
        assert_eq!(b.points, vec![0.25, 0.5, 0.75]);
        assert_eq!(b.h, 0.25);
        assert!(Axis::cells(0.0, 0.0, 4).is_err());
    }

    #[test]
    fn tensor_order() {
        let g = Grid::new(
            vec![
                Axis::interior(1.0, 3).unwrap(),
                Axis::interior(2.0, 4).unwrap(),
            ],
            "box",
        )
        .unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.space.point(1), &[1.0 / 3.0, 1.0]);
        assert_eq!(g.space.ref_weights()[0], 1.0 / 3.0 * 0.5);
        for i in 0..6 {
            assert_eq!(flat_index(&multi_index(i, &g.dims()), &g.dims()), i);
        }
    }
}

//! Uniform rectangular grids.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest supported chart dimension.
pub const MAX_DIM: usize = 4;

/// Rectangular coordinate domain with a uniform grid, row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Chart<T> {
    dim: usize,
    lower: [T; MAX_DIM],
    upper: [T; MAX_DIM],
    res: [usize; MAX_DIM],
    periodic: [bool; MAX_DIM],
    spacing: [T; MAX_DIM],
    strides: [usize; MAX_DIM],
    len: usize,
}

impl<T: Real> Chart<T> {
    pub fn new(lower: &[T], upper: &[T], resolution: &[usize], periodic: &[bool]) -> Result<Self> {
        let dim = lower.len();
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("chart dimension {dim} outside 2..=4")));
        }
        if upper.len() != dim || resolution.len() != dim || periodic.len() != dim {
            return Err(Error::Config("chart bound/resolution/periodic lengths differ".into()));
        }
        let mut c = Chart {
            dim,
            lower: [T::zero(); MAX_DIM],
            upper: [T::zero(); MAX_DIM],
            res: [1; MAX_DIM],
            periodic: [false; MAX_DIM],
            spacing: [T::one(); MAX_DIM],
            strides: [0; MAX_DIM],
            len: 1,
        };
        for i in 0..dim {
            if !(upper[i] > lower[i]) || !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::Config(format!("axis {}: upper bound must exceed lower bound", i + 1)));
            }
            if resolution[i] < 5 {
                return Err(Error::Config(format!("axis {}: resolution {} < 5", i + 1, resolution[i])));
            }
            c.lower[i] = lower[i];
            c.upper[i] = upper[i];
            c.res[i] = resolution[i];
            c.periodic[i] = periodic[i];
            let cells = if periodic[i] { resolution[i] } else { resolution[i] - 1 };
            c.spacing[i] = (upper[i] - lower[i]) / T::from_usize_lossy(cells);
        }
        let mut s = 1;
        for i in (0..dim).rev() {
            c.strides[i] = s;
            s *= c.res[i];
        }
        c.len = s;
        Ok(c)
    }

    /// Non-periodic cube `[lo, hi]^n` with `res` points per axis.
    pub fn cube(dim: usize, lo: T, hi: T, res: usize) -> Result<Self> {
        Self::new(&vec![lo; dim], &vec![hi; dim], &vec![res; dim], &vec![false; dim])
    }

    /// Fully periodic cube `[lo, hi)^n` with `res` points per axis.
    pub fn periodic_cube(dim: usize, lo: T, hi: T, res: usize) -> Result<Self> {
        Self::new(&vec![lo; dim], &vec![hi; dim], &vec![res; dim], &vec![true; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn lower(&self) -> &[T] {
        &self.lower[..self.dim]
    }
    pub fn upper(&self) -> &[T] {
        &self.upper[..self.dim]
    }
    pub fn resolution(&self) -> &[usize] {
        &self.res[..self.dim]
    }
    pub fn periodic(&self) -> &[bool] {
        &self.periodic[..self.dim]
    }
    pub fn spacing(&self) -> &[T] {
        &self.spacing[..self.dim]
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides[..self.dim]
    }
    pub fn is_fully_periodic(&self) -> bool {
        self.periodic().iter().all(|&p| p)
    }

    /// Volume of one grid cell, `h_1 ... h_n`.
    pub fn cell_volume(&self) -> T {
        self.spacing().iter().fold(T::one(), |a, &h| a * h)
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.lower[axis] + T::from_usize_lossy(i) * self.spacing[axis]
    }

    #[inline]
    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for a in 0..self.dim {
            k += idx[a] * self.strides[a];
        }
        k
    }

    #[inline]
    pub fn multi_index(&self, node: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut r = node;
        for a in 0..self.dim {
            out[a] = r / self.strides[a];
            r %= self.strides[a];
        }
        out
    }

    #[inline]
    pub fn node_coords(&self, node: usize, out: &mut [T]) {
        let idx = self.multi_index(node);
        for a in 0..self.dim {
            out[a] = self.coord(a, idx[a]);
        }
    }

    pub fn coords_of(&self, node: usize) -> Vec<T> {
        let mut x = vec![T::zero(); self.dim];
        self.node_coords(node, &mut x);
        x
    }

    /// Node shifted by `offset` along `axis`; wraps on periodic axes.
    #[inline]
    pub fn shifted(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = (node / self.strides[axis]) % self.res[axis];
        let n = self.res[axis] as isize;
        let mut j = i as isize + offset;
        if self.periodic[axis] {
            j = j.rem_euclid(n);
        } else if j < 0 || j >= n {
            return None;
        }
        Some((node as isize + (j - i as isize) * self.strides[axis] as isize) as usize)
    }

    /// True when every non-periodic index is at least `margin` away from the boundary.
    #[inline]
    pub fn in_core(&self, idx: &[usize], margin: usize) -> bool {
        (0..self.dim).all(|a| self.periodic[a] || (idx[a] >= margin && idx[a] + margin < self.res[a]))
    }

    /// Nodes of the interior core.
    pub fn core_nodes(&self, margin: usize) -> Vec<usize> {
        (0..self.len).filter(|&k| self.in_core(&self.multi_index(k), margin)).collect()
    }

    /// Whether a point lies in the closed chart box (periodic axes always contain it).
    pub fn contains(&self, x: &[T]) -> bool {
        (0..self.dim).all(|a| self.periodic[a] || (x[a] >= self.lower[a] && x[a] <= self.upper[a]))
    }

    /// Sub-grid starting at node multi-index `offset` with `res` points per axis.
    pub fn sub_box(&self, offset: &[usize], res: &[usize]) -> Result<Self> {
        let mut lo = vec![T::zero(); self.dim];
        let mut hi = vec![T::zero(); self.dim];
        for a in 0..self.dim {
            if offset[a] + res[a] > self.res[a] {
                return Err(Error::Domain(format!("sub-box exceeds chart along axis {}", a + 1)));
            }
            lo[a] = self.coord(a, offset[a]);
            hi[a] = self.coord(a, offset[a] + res[a] - 1);
        }
        Self::new(&lo, &hi, res, &vec![false; self.dim])
    }

    /// Same box with a different resolution per axis.
    pub fn with_resolution(&self, res: &[usize]) -> Result<Self> {
        Self::new(self.lower(), self.upper(), res, self.periodic())
    }

    /// Chart with every non-periodic cell count doubled (periodic: point count doubled).
    pub fn refined(&self) -> Result<Self> {
        let res: Vec<usize> = (0..self.dim)
            .map(|a| if self.periodic[a] { 2 * self.res[a] } else { 2 * self.res[a] - 1 })
            .collect();
        self.with_resolution(&res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_indices() {
        let c = Chart::<f64>::new(&[0.0, -1.0], &[1.0, 1.0], &[5, 9], &[false, true]).unwrap();
        assert_eq!(c.spacing(), &[0.25, 2.0 / 9.0]);
        assert_eq!(c.len(), 45);
        let k = c.node_index(&[3, 7]);
        assert_eq!(c.multi_index(k)[..2], [3, 7]);
        assert_eq!(c.shifted(k, 1, 3), Some(c.node_index(&[3, 1])));
        assert_eq!(c.shifted(k, 0, 2), None);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(Chart::<f64>::new(&[1.0, 0.0], &[0.0, 1.0], &[5, 5], &[false, false]).is_err());
        assert!(Chart::<f64>::cube(2, 0.0, 1.0, 4).is_err());
        assert!(Chart::<f64>::cube(5, 0.0, 1.0, 5).is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let c = Chart::<f64>::cube(3, -0.4, 0.4, 33).unwrap();
        let f = c.refined().unwrap();
        assert!((f.spacing()[0] * 2.0 - c.spacing()[0]).abs() < 1e-15);
        assert_eq!(f.coord(0, 2 * 7), c.coord(0, 7));
    }

    #[test]
    fn core_excludes_margin() {
        let c = Chart::<f64>::cube(2, 0.0, 1.0, 9).unwrap();
        assert_eq!(c.core_nodes(2).len(), 25);
    }
}

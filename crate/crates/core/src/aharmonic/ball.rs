//! Dirichlet problems on discrete balls.

use std::sync::Arc;

use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boundary data as a function of coordinates.
pub type BoundaryFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// A ball `|x − x₀| < r` realized as a node mask on a sub-box of a parent chart.
#[derive(Clone)]
pub struct BallProblem<T> {
    /// Sub-box chart holding the ball plus its boundary layer.
    pub chart: Chart<T>,
    /// Multi-index of the sub-box origin in the parent chart.
    pub offset: [usize; MAX_DIM],
    parent: Chart<T>,
    pub center: Vec<T>,
    pub radius: T,
    pub mask: Vec<bool>,
    pub boundary_nodes: Vec<usize>,
    /// Mask nodes in sub-box order; position = unknown index.
    pub unknowns: Vec<usize>,
    pub cells: Vec<usize>,
    pub boundary_data: BoundaryFn<T>,
}

impl<T: Real> std::fmt::Debug for BallProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BallProblem")
            .field("center", &self.center)
            .field("radius", &self.radius)
            .field("unknowns", &self.unknowns.len())
            .field("boundary", &self.boundary_nodes.len())
            .finish()
    }
}

impl<T: Real> BallProblem<T> {
    /// Builds the mask, its discrete boundary and the energy cells.
    ///
    /// The ball must fit the (non-periodic) chart with two nodes to spare on every side.
    pub fn new(parent: &Chart<T>, center: &[T], radius: T, data: BoundaryFn<T>) -> Result<Self> {
        let n = parent.dim();
        if center.len() != n {
            return Err(Error::Config("center dimension mismatch".into()));
        }
        if !(radius > T::zero()) {
            return Err(Error::Config("radius must be positive".into()));
        }
        let margin = 2usize;
        let mut offset = [0usize; MAX_DIM];
        let mut res = vec![0usize; n];
        for a in 0..n {
            let h = parent.spacing()[a];
            let lo = ((center[a] - radius - parent.lower()[a]) / h).floor();
            let hi = ((center[a] + radius - parent.lower()[a]) / h).ceil();
            let lo_i = lo.to_isize().unwrap_or(-1) - margin as isize;
            let hi_i = hi.to_isize().unwrap_or(isize::MAX) + margin as isize;
            if lo_i < 0 || hi_i >= parent.resolution()[a] as isize || parent.periodic()[a] {
                return Err(Error::Domain(format!(
                    "ball of radius {} around {:?} does not fit the chart with a two-node margin on axis {}",
                    radius.as_f64(),
                    center.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                    a + 1
                )));
            }
            offset[a] = lo_i as usize;
            res[a] = (hi_i - lo_i + 1) as usize;
        }
        let chart = parent.sub_box(&offset[..n], &res)?;
        let r2 = radius * radius;
        let mut x = [T::zero(); MAX_DIM];
        let mask: Vec<bool> = (0..chart.len())
            .map(|k| {
                chart.node_coords(k, &mut x);
                (0..n).map(|a| (x[a] - center[a]).powi(2)).sum::<T>() < r2
            })
            .collect();
        let unknowns: Vec<usize> = (0..chart.len()).filter(|&k| mask[k]).collect();
        if unknowns.is_empty() {
            return Err(Error::Config("ball contains no grid nodes".into()));
        }
        // boundary: non-mask nodes within Chebyshev distance 1 of a mask node
        let mut is_b = vec![false; chart.len()];
        let mut cells_flag = vec![false; chart.len()];
        let n3 = 3usize.pow(n as u32);
        for &k in &unknowns {
            let idx = chart.multi_index(k);
            for t in 0..n3 {
                let mut j = [0usize; MAX_DIM];
                let mut tt = t;
                for a in 0..n {
                    let d = (tt % 3) as isize - 1;
                    tt /= 3;
                    j[a] = (idx[a] as isize + d) as usize;
                }
                let nb = chart.node_index(&j);
                if !mask[nb] {
                    is_b[nb] = true;
                }
            }
            // cells having k as a corner: min corners k − b for b ∈ {0,1}^n
            for b in 0..(1usize << n) {
                let mut j = idx;
                for a in 0..n {
                    if b >> a & 1 == 1 {
                        j[a] -= 1;
                    }
                }
                cells_flag[chart.node_index(&j)] = true;
            }
        }
        let boundary_nodes: Vec<usize> = (0..chart.len()).filter(|&k| is_b[k]).collect();
        let cells = (0..chart.len()).filter(|&k| cells_flag[k]).collect();
        Ok(Self {
            chart,
            offset,
            parent: parent.clone(),
            center: center.to_vec(),
            radius,
            mask,
            boundary_nodes,
            unknowns,
            cells,
            boundary_data: data,
        })
    }

    /// Affine boundary data `(S (x − x₀))^row`.
    pub fn affine(parent: &Chart<T>, center: &[T], radius: T, s_row: &[T]) -> Result<Self> {
        let c = center.to_vec();
        let row = s_row.to_vec();
        let data: BoundaryFn<T> = Arc::new(move |x: &[T]| (0..x.len()).map(|a| row[a] * (x[a] - c[a])).sum());
        Self::new(parent, center, radius, data)
    }

    pub fn parent(&self) -> &Chart<T> {
        &self.parent
    }

    /// Parent-chart node of a sub-box node.
    pub fn parent_node(&self, k: usize) -> usize {
        let idx = self.chart.multi_index(k);
        let mut j = [0usize; MAX_DIM];
        for a in 0..self.chart.dim() {
            j[a] = idx[a] + self.offset[a];
        }
        self.parent.node_index(&j)
    }

    /// Mask nodes all of whose axis neighbours are mask nodes.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let n = self.chart.dim();
        self.unknowns
            .iter()
            .copied()
            .filter(|&k| {
                (0..n).all(|a| {
                    [-1isize, 1].iter().all(|&o| self.chart.shifted(k, a, o).map(|j| self.mask[j]).unwrap_or(false))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_and_boundary() {
        let c = Chart::<f64>::cube(2, -1.0, 1.0, 21).unwrap();
        let p = BallProblem::affine(&c, &[0.0, 0.0], 0.55, &[1.0, 0.0]).unwrap();
        // nodes with |x| < 0.55 at spacing 0.1
        let count = (-5i32..=5).flat_map(|i| (-5i32..=5).map(move |j| (i, j))).filter(|(i, j)| 4 * (i * i + j * j) < 121).count();
        assert_eq!(p.unknowns.len(), count);
        assert!(!p.boundary_nodes.is_empty());
        for &b in &p.boundary_nodes {
            let x = p.chart.coords_of(b);
            assert!(x[0] * x[0] + x[1] * x[1] >= 0.3025 - 1e-12);
        }
        assert!(BallProblem::affine(&c, &[0.8, 0.0], 0.5, &[1.0, 0.0]).is_err());
        let k = p.unknowns[7];
        for (a, b) in p.chart.coords_of(k).iter().zip(c.coords_of(p.parent_node(k))) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}

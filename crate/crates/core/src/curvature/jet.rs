//! Pointwise derivative jets of grid fields.

use crate::chart::{Chart, MAX_DIM};
use crate::field::Field;
use crate::scalar::Real;
use crate::stencil::{Stencil1, StencilTable, MAX_POINTS};

/// Maximum number of components handled by a jet (a 4 × 4 matrix).
pub const MAX_COMP: usize = 16;

/// Value, first and second partial derivatives of a field at a node.
///
/// `d1[a * nc + c]` is `∂_a f_c`; `d2[(a * n + b) * nc + c]` is `∂_a ∂_b f_c`.
#[derive(Clone, Copy, Debug)]
pub struct Jet<T> {
    pub n: usize,
    pub nc: usize,
    pub v: [T; MAX_COMP],
    pub d1: [T; MAX_DIM * MAX_COMP],
    pub d2: [T; MAX_DIM * MAX_DIM * MAX_COMP],
}

impl<T: Real> Jet<T> {
    pub fn zero(n: usize, nc: usize) -> Self {
        Self { n, nc, v: [T::zero(); MAX_COMP], d1: [T::zero(); MAX_DIM * MAX_COMP], d2: [T::zero(); MAX_DIM * MAX_DIM * MAX_COMP] }
    }

    #[inline]
    pub fn d1(&self, a: usize, c: usize) -> T {
        self.d1[a * self.nc + c]
    }
    #[inline]
    pub fn d2(&self, a: usize, b: usize, c: usize) -> T {
        self.d2[(a * self.n + b) * self.nc + c]
    }
}

fn weight_at<T: Real>(s: &Stencil1<T>, off: isize) -> T {
    s.iter().find(|&(o, _)| o == off).map(|(_, w)| w).unwrap_or(T::zero())
}

/// Finite-difference jet of `f` at `node` using the stencil table of its chart.
pub fn jet_at<T: Real>(f: &Field<T>, table: &StencilTable<T>, node: usize) -> Jet<T> {
    let chart: &Chart<T> = f.chart();
    let n = chart.dim();
    let nc = f.ncomp();
    assert!(nc <= MAX_COMP);
    let idx = chart.multi_index(node);
    let mut jet = Jet::zero(n, nc);
    f.value_at(node, &mut jet.v);
    let mut line = [[T::zero(); MAX_COMP]; MAX_POINTS];
    for a in 0..n {
        let s2 = table.d2(a, idx[a]);
        let s1 = table.d1(a, idx[a]);
        for (k, (o, w2)) in s2.iter().enumerate() {
            if o == 0 {
                line[k][..nc].copy_from_slice(&jet.v[..nc]);
            } else {
                let nb = chart.shifted(node, a, o).expect("stencil inside grid");
                f.value_at(nb, &mut line[k]);
            }
            let w1 = weight_at(s1, o);
            for c in 0..nc {
                jet.d1[a * nc + c] += w1 * line[k][c];
                jet.d2[(a * n + a) * nc + c] += w2 * line[k][c];
            }
        }
    }
    let mut buf = [T::zero(); MAX_COMP];
    for a in 0..n {
        for b in a + 1..n {
            let sa = table.d1(a, idx[a]);
            let sb = table.d1(b, idx[b]);
            for (oa, wa) in sa.iter() {
                if wa == T::zero() {
                    continue;
                }
                let na = if oa == 0 { node } else { chart.shifted(node, a, oa).unwrap() };
                for (ob, wb) in sb.iter() {
                    if wb == T::zero() {
                        continue;
                    }
                    let nb = if ob == 0 { na } else { chart.shifted(na, b, ob).unwrap() };
                    f.value_at(nb, &mut buf);
                    let w = wa * wb;
                    for c in 0..nc {
                        jet.d2[(a * n + b) * nc + c] += w * buf[c];
                    }
                }
            }
            for c in 0..nc {
                jet.d2[(b * n + a) * nc + c] = jet.d2[(a * n + b) * nc + c];
            }
        }
    }
    jet
}

/// Jet assembled from precomputed dense derivative fields (spectral path).
pub fn jet_from_fields<T: Real>(f: &Field<T>, d1: &[Field<T>], d2: &[Field<T>], node: usize) -> Jet<T> {
    let n = f.chart().dim();
    let nc = f.ncomp();
    let mut jet = Jet::zero(n, nc);
    f.value_at(node, &mut jet.v);
    let mut buf = [T::zero(); MAX_COMP];
    for a in 0..n {
        d1[a].value_at(node, &mut buf);
        jet.d1[a * nc..(a + 1) * nc].copy_from_slice(&buf[..nc]);
        for b in 0..n {
            d2[a * n + b].value_at(node, &mut buf);
            jet.d2[(a * n + b) * nc..(a * n + b + 1) * nc].copy_from_slice(&buf[..nc]);
        }
    }
    jet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::DerivativeScheme;

    #[test]
    fn quadratic_jet_exact() {
        let c = Chart::<f64>::cube(3, -1.0, 1.0, 9).unwrap();
        let f = Field::scalar(&c, |x| 1.0 + 2.0 * x[0] + x[0] * x[1] - 3.0 * x[2] * x[2]).unwrap();
        let t = StencilTable::new(&c, DerivativeScheme::order2()).unwrap();
        for node in [0, 100, c.len() - 1] {
            let x = c.coords_of(node);
            let j = jet_at(&f, &t, node);
            assert!((j.d1(0, 0) - (2.0 + x[1])).abs() < 1e-12);
            assert!((j.d1(2, 0) + 6.0 * x[2]).abs() < 1e-12);
            assert!((j.d2(0, 1, 0) - 1.0).abs() < 1e-11);
            assert!((j.d2(1, 0, 0) - 1.0).abs() < 1e-11);
            assert!((j.d2(2, 2, 0) + 6.0).abs() < 1e-10);
            assert!(j.d2(0, 0, 0).abs() < 1e-10);
        }
    }
}

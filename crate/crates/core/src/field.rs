//! Grid fields: dense or lazily evaluated component arrays over a chart.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stencil::{DerivativeScheme, StencilTable};

/// Declared symmetry between two component indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

/// Evaluator for lazy fields: `(node, coordinates, out)`.
pub type NodeFn<T> = Arc<dyn Fn(usize, &[T], &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub enum Samples<T> {
    Dense(Vec<T>),
    Lazy(NodeFn<T>),
}

/// Tensor-valued field on a chart. Components are stored row-major over `shape`.
#[derive(Clone)]
pub struct Field<T> {
    chart: Chart<T>,
    shape: Vec<usize>,
    ncomp: usize,
    symmetries: Vec<Symmetry>,
    samples: Samples<T>,
    name: Option<String>,
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("name", &self.name)
            .field("shape", &self.shape)
            .field("dense", &self.is_dense())
            .field("nodes", &self.chart.len())
            .finish()
    }
}

fn check_finite<T: Real>(v: &[T]) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("non-finite field value at flat index {i}")));
    }
    Ok(())
}

fn symmetrize_block<T: Real>(shape: &[usize], syms: &[Symmetry], block: &mut [T]) {
    if syms.is_empty() {
        return;
    }
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    let half = T::lit(0.5);
    for s in syms {
        let (i, j, sign) = match *s {
            Symmetry::Symmetric(i, j) => (i, j, T::one()),
            Symmetry::Antisymmetric(i, j) => (i, j, -T::one()),
        };
        for k in 0..block.len() {
            let ii = (k / strides[i]) % shape[i];
            let jj = (k / strides[j]) % shape[j];
            if ii > jj {
                continue;
            }
            let partner = k + jj * strides[i] + ii * strides[j] - ii * strides[i] - jj * strides[j];
            if partner == k {
                if sign < T::zero() {
                    block[k] = T::zero();
                }
                continue;
            }
            let m = half * (block[k] + sign * block[partner]);
            block[k] = m;
            block[partner] = sign * m;
        }
    }
}

impl<T: Real> Field<T> {
    fn check_shape(chart: &Chart<T>, shape: &[usize], syms: &[Symmetry]) -> Result<usize> {
        for s in syms {
            let (i, j) = match *s {
                Symmetry::Symmetric(i, j) | Symmetry::Antisymmetric(i, j) => (i, j),
            };
            if i >= shape.len() || j >= shape.len() || shape[i] != shape[j] || i == j {
                return Err(Error::Config(format!("symmetry {s:?} incompatible with shape {shape:?}")));
            }
        }
        let _ = chart;
        Ok(shape.iter().product::<usize>().max(1))
    }

    /// Dense field from stored values (`nodes × components`); symmetries are enforced.
    pub fn from_values(chart: Chart<T>, shape: &[usize], symmetries: &[Symmetry], mut values: Vec<T>) -> Result<Self> {
        let ncomp = Self::check_shape(&chart, shape, symmetries)?;
        if values.len() != chart.len() * ncomp {
            return Err(Error::Config(format!(
                "expected {} values, got {}",
                chart.len() * ncomp,
                values.len()
            )));
        }
        check_finite(&values)?;
        if !symmetries.is_empty() {
            for block in values.chunks_mut(ncomp) {
                symmetrize_block(shape, symmetries, block);
            }
        }
        Ok(Field { chart, shape: shape.to_vec(), ncomp, symmetries: symmetries.to_vec(), samples: Samples::Dense(values), name: None })
    }

    /// Dense field sampled from a coordinate function.
    pub fn from_fn(chart: &Chart<T>, shape: &[usize], f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        Self::from_fn_sym(chart, shape, &[], f)
    }

    pub fn from_fn_sym(chart: &Chart<T>, shape: &[usize], syms: &[Symmetry], f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let ncomp = Self::check_shape(chart, shape, syms)?;
        let mut values = vec![T::zero(); chart.len() * ncomp];
        let mut x = [T::zero(); MAX_DIM];
        for (node, out) in values.chunks_mut(ncomp).enumerate() {
            chart.node_coords(node, &mut x);
            f(&x[..chart.dim()], out);
        }
        Self::from_values(chart.clone(), shape, syms, values)
    }

    /// Scalar field from a coordinate function.
    pub fn scalar(chart: &Chart<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        Self::from_fn(chart, &[], |x, o| o[0] = f(x))
    }

    /// Constant field.
    pub fn constant(chart: &Chart<T>, shape: &[usize], value: &[T]) -> Result<Self> {
        Self::from_fn(chart, shape, |_, o| o.copy_from_slice(value))
    }

    /// Lazily evaluated field; values are computed on access and never stored.
    pub fn lazy(chart: &Chart<T>, shape: &[usize], syms: &[Symmetry], f: NodeFn<T>) -> Result<Self> {
        let ncomp = Self::check_shape(chart, shape, syms)?;
        let samples = if syms.is_empty() {
            Samples::Lazy(f)
        } else {
            let shape_v = shape.to_vec();
            let syms_v = syms.to_vec();
            Samples::Lazy(Arc::new(move |k, x, out: &mut [T]| {
                f(k, x, out);
                symmetrize_block(&shape_v, &syms_v, &mut out[..ncomp]);
            }))
        };
        Ok(Field { chart: chart.clone(), shape: shape.to_vec(), ncomp, symmetries: syms.to_vec(), samples, name: None })
    }

    /// Lazy field from a pure coordinate function.
    pub fn analytic(
        chart: &Chart<T>,
        shape: &[usize],
        syms: &[Symmetry],
        f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::lazy(chart, shape, syms, Arc::new(move |_, x, o| f(x, o)))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }
    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    pub fn chart(&self) -> &Chart<T> {
        &self.chart
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn rank(&self) -> usize {
        self.shape.len()
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn symmetries(&self) -> &[Symmetry] {
        &self.symmetries
    }
    pub fn is_dense(&self) -> bool {
        matches!(self.samples, Samples::Dense(_))
    }
    /// Stored values when dense.
    pub fn values(&self) -> Option<&[T]> {
        match &self.samples {
            Samples::Dense(v) => Some(v),
            Samples::Lazy(_) => None,
        }
    }

    /// Writes all components at `node` into `out`.
    #[inline]
    pub fn value_at(&self, node: usize, out: &mut [T]) {
        match &self.samples {
            Samples::Dense(v) => out[..self.ncomp].copy_from_slice(&v[node * self.ncomp..(node + 1) * self.ncomp]),
            Samples::Lazy(f) => {
                let mut x = [T::zero(); MAX_DIM];
                self.chart.node_coords(node, &mut x);
                f(node, &x[..self.chart.dim()], out);
            }
        }
    }

    /// Single component at a node (evaluates all components for lazy fields).
    pub fn get(&self, node: usize, comp: usize) -> T {
        match &self.samples {
            Samples::Dense(v) => v[node * self.ncomp + comp],
            Samples::Lazy(_) => {
                let mut buf = vec![T::zero(); self.ncomp];
                self.value_at(node, &mut buf);
                buf[comp]
            }
        }
    }

    /// Dense copy; fails if any value is non-finite.
    pub fn materialize(&self) -> Result<Self> {
        match &self.samples {
            Samples::Dense(_) => Ok(self.clone()),
            Samples::Lazy(_) => {
                let mut values = vec![T::zero(); self.chart.len() * self.ncomp];
                for (node, out) in values.chunks_mut(self.ncomp).enumerate() {
                    self.value_at(node, out);
                }
                check_finite(&values)?;
                Ok(Field {
                    chart: self.chart.clone(),
                    shape: self.shape.clone(),
                    ncomp: self.ncomp,
                    symmetries: self.symmetries.clone(),
                    samples: Samples::Dense(values),
                    name: self.name.clone(),
                })
            }
        }
    }

    /// Visits every node with its component values.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[T])) {
        match &self.samples {
            Samples::Dense(v) => {
                for (k, c) in v.chunks(self.ncomp).enumerate() {
                    f(k, c);
                }
            }
            Samples::Lazy(_) => {
                let mut buf = vec![T::zero(); self.ncomp];
                for k in 0..self.chart.len() {
                    self.value_at(k, &mut buf);
                    f(k, &buf);
                }
            }
        }
    }

    /// Pointwise map into a dense field of a new shape.
    pub fn map(&self, shape: &[usize], f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let nc = shape.iter().product::<usize>().max(1);
        let mut values = vec![T::zero(); self.chart.len() * nc];
        self.for_each(|k, v| f(v, &mut values[k * nc..(k + 1) * nc]));
        Self::from_values(self.chart.clone(), shape, &[], values)
    }

    /// Pointwise combination of two fields on the same chart.
    pub fn zip(&self, other: &Self, shape: &[usize], f: impl Fn(&[T], &[T], &mut [T])) -> Result<Self> {
        if self.chart != other.chart {
            return Err(Error::Config("fields live on different charts".into()));
        }
        let nc = shape.iter().product::<usize>().max(1);
        let mut values = vec![T::zero(); self.chart.len() * nc];
        let mut ob = vec![T::zero(); other.ncomp];
        self.for_each(|k, v| {
            other.value_at(k, &mut ob);
            f(v, &ob, &mut values[k * nc..(k + 1) * nc]);
        });
        Self::from_values(self.chart.clone(), shape, &[], values)
    }

    /// Difference `self - other` (same shape).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Config("shape mismatch".into()));
        }
        self.zip(other, &self.shape.clone(), |a, b, o| {
            for i in 0..o.len() {
                o[i] = a[i] - b[i];
            }
        })
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        self.map(&self.shape.clone(), |v, o| {
            for i in 0..o.len() {
                o[i] = s * v[i];
            }
        })
    }

    /// Largest absolute component value.
    pub fn sup_norm(&self) -> T {
        let mut m = T::zero();
        self.for_each(|_, v| {
            for &x in v {
                m = m.max(x.abs());
            }
        });
        m
    }

    /// `sqrt(cell_volume * sum of squares)` over all nodes and components.
    pub fn l2_norm(&self) -> T {
        let mut s = T::zero();
        self.for_each(|_, v| {
            for &x in v {
                s += x * x;
            }
        });
        (s * self.chart.cell_volume()).sqrt()
    }

    /// Largest absolute component value over the interior core.
    pub fn sup_norm_core(&self, margin: usize) -> T {
        let mut m = T::zero();
        let mut buf = vec![T::zero(); self.ncomp];
        for k in 0..self.chart.len() {
            if self.chart.in_core(&self.chart.multi_index(k), margin) {
                self.value_at(k, &mut buf);
                for &x in &buf {
                    m = m.max(x.abs());
                }
            }
        }
        m
    }

    /// Component-wise grid derivative along `axis`.
    pub fn partial(&self, axis: usize, scheme: DerivativeScheme) -> Result<Self> {
        if axis >= self.chart.dim() {
            return Err(Error::Config(format!("axis {axis} out of range")));
        }
        if scheme.spectral {
            return crate::spectral::spectral_partial(self, axis);
        }
        let table = StencilTable::new(&self.chart, scheme)?;
        let dense = self.materialize()?;
        let v = dense.values().unwrap();
        let nc = self.ncomp;
        let mut out = vec![T::zero(); v.len()];
        for k in 0..self.chart.len() {
            let i = self.chart.multi_index(k)[axis];
            let st = table.d1(axis, i);
            for (o, w) in st.iter() {
                let kk = self.chart.shifted(k, axis, o).expect("stencil stays on grid");
                for c in 0..nc {
                    out[k * nc + c] += w * v[kk * nc + c];
                }
            }
        }
        Field::from_values(self.chart.clone(), &self.shape, &[], out)
    }

    /// Multilinear interpolation at an arbitrary point; exact at nodes and for affine fields.
    pub fn interpolate(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.ncomp];
        self.interpolate_into(x, &mut out)?;
        Ok(out)
    }

    pub fn interpolate_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let c = &self.chart;
        let n = c.dim();
        let snap = T::lit(1e-10);
        let mut base = [0usize; MAX_DIM];
        let mut frac = [T::zero(); MAX_DIM];
        let mut upper = [0usize; MAX_DIM];
        for a in 0..n {
            let res = c.resolution()[a];
            let mut t = (x[a] - c.lower()[a]) / c.spacing()[a];
            if c.periodic()[a] {
                let r = T::from_usize_lossy(res);
                t = t - (t / r).floor() * r;
            } else {
                let last = T::from_usize_lossy(res - 1);
                if !(t >= -snap && t <= last + snap) {
                    return Err(Error::Domain(format!(
                        "point {:?} outside chart",
                        x.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
                    )));
                }
                t = t.max(T::zero()).min(last);
            }
            let r = t.round();
            if (t - r).abs() < snap {
                t = r;
            }
            let mut i = t.floor().to_usize().unwrap_or(0);
            if !c.periodic()[a] && i >= res - 1 {
                i = res - 2;
            }
            if c.periodic()[a] && i >= res {
                i = 0;
            }
            base[a] = i;
            frac[a] = t - T::from_usize_lossy(i);
            upper[a] = if c.periodic()[a] { (i + 1) % res } else { i + 1 };
        }
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let mut buf = vec![T::zero(); self.ncomp];
        let mut idx = [0usize; MAX_DIM];
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx[a] = upper[a];
                } else {
                    w *= T::one() - frac[a];
                    idx[a] = base[a];
                }
            }
            if w == T::zero() {
                continue;
            }
            self.value_at(c.node_index(&idx), &mut buf);
            for i in 0..self.ncomp {
                out[i] += w * buf[i];
            }
        }
        Ok(())
    }

    /// Writes the field as CSV: `x1..xn` then one column per component.
    pub fn write_csv(&self, w: &mut impl Write, labels: Option<&[String]>) -> Result<()> {
        let n = self.chart.dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        match labels {
            Some(l) => {
                if l.len() != self.ncomp {
                    return Err(Error::Config("label count differs from component count".into()));
                }
                header.extend(l.iter().cloned());
            }
            None => header.extend(default_labels(&self.shape)),
        }
        writeln!(w, "{}", header.join(","))?;
        let mut x = vec![T::zero(); n];
        let mut buf = vec![T::zero(); self.ncomp];
        let mut line = String::new();
        for k in 0..self.chart.len() {
            self.chart.node_coords(k, &mut x);
            self.value_at(k, &mut buf);
            line.clear();
            for (i, v) in x.iter().chain(buf.iter()).enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:.16e}", v.as_f64()));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Component labels `c` (scalar) or `c_<1-based indices>`.
pub fn default_labels(shape: &[usize]) -> Vec<String> {
    index_labels("c", shape)
}

/// Labels such as `W_1213` for a rank-4 tensor named `W`.
pub fn index_labels(prefix: &str, shape: &[usize]) -> Vec<String> {
    if shape.is_empty() {
        return vec![prefix.to_string()];
    }
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut k| {
            let mut idx = vec![0; shape.len()];
            for d in (0..shape.len()).rev() {
                idx[d] = k % shape[d] + 1;
                k /= shape[d];
            }
            let s: String = idx.iter().map(|i| i.to_string()).collect();
            format!("{prefix}_{s}")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2() -> Chart<f64> {
        Chart::cube(2, -1.0, 1.0, 11).unwrap()
    }

    #[test]
    fn quadratic_derivative_exact_in_interior() {
        let c = chart2();
        let f = Field::scalar(&c, |x| x[0] * x[0]).unwrap();
        let d = f.partial(0, DerivativeScheme::order2()).unwrap();
        for k in 0..c.len() {
            let x = c.coords_of(k);
            assert!((d.get(k, 0) - 2.0 * x[0]).abs() < 1e-12);
        }
        let z = Field::scalar(&c, |_| 3.5).unwrap().partial(1, DerivativeScheme::order4()).unwrap();
        assert!(z.sup_norm() < 1e-12);
    }

    #[test]
    fn symmetrization_enforced() {
        let c = chart2();
        let f = Field::from_fn_sym(&c, &[2, 2], &[Symmetry::Symmetric(0, 1)], |x, o| {
            o.copy_from_slice(&[1.0, x[0], 0.0, 2.0]);
        })
        .unwrap();
        assert_eq!(f.get(3, 1), f.get(3, 2));
        let a = Field::from_fn_sym(&c, &[2, 2], &[Symmetry::Antisymmetric(0, 1)], |_, o| {
            o.copy_from_slice(&[1.0, 3.0, 1.0, 2.0]);
        })
        .unwrap();
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(0, 2), -1.0);
    }

    #[test]
    fn rejects_non_finite() {
        let c = chart2();
        assert!(Field::scalar(&c, |x| 1.0 / x[0]).is_err());
    }

    #[test]
    fn interpolation() {
        let c = chart2();
        let f = Field::scalar(&c, |x| 3.0 * x[0] - x[1]).unwrap();
        let v = f.interpolate(&[0.123, -0.77]).unwrap()[0];
        assert!((v - (3.0 * 0.123 + 0.77)).abs() < 1e-14);
        let g = Field::scalar(&c, |x| x[0] * x[1]).unwrap();
        for k in [0, 17, 60, 120] {
            let x = c.coords_of(k);
            assert_eq!(g.interpolate(&x).unwrap()[0], g.get(k, 0));
        }
        // bilinear on the cell [0,0.2]x[0.2,0.4]: value at center is the mean of corner products
        let m = g.interpolate(&[0.1, 0.3]).unwrap()[0];
        let expect = (0.0 * 0.2 + 0.0 * 0.4 + 0.2 * 0.2 + 0.2 * 0.4) / 4.0;
        assert!((m - expect).abs() < 1e-15);
        assert!(f.interpolate(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn norms() {
        let c = Chart::<f64>::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5], &[false, false]).unwrap();
        assert_eq!(Field::scalar(&c, |_| 0.0).unwrap().sup_norm(), 0.0);
        assert_eq!(Field::scalar(&c, |_| -2.5).unwrap().sup_norm(), 2.5);
        assert_eq!(Field::scalar(&c, |x| x[0]).unwrap().sup_norm(), 1.0);
        let l2 = Field::scalar(&c, |_| 1.0).unwrap().l2_norm();
        assert!((l2 - (25.0f64 / 16.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lazy_matches_dense() {
        let c = chart2();
        let d = Field::scalar(&c, |x| (x[0] + 2.0 * x[1]).sin()).unwrap();
        let l = Field::analytic(&c, &[], &[], |x, o| o[0] = (x[0] + 2.0 * x[1]).sin()).unwrap();
        assert_eq!(d.sub(&l).unwrap().sup_norm(), 0.0);
        assert_eq!(l.materialize().unwrap().values().unwrap(), d.values().unwrap());
    }

    #[test]
    fn csv_header_and_rows() {
        let c = Chart::<f64>::cube(2, 0.0, 1.0, 5).unwrap();
        let f = Field::scalar(&c, |x| x[0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf, None).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("x1,x2,c"));
        assert_eq!(s.lines().count(), 26);
        assert_eq!(index_labels("W", &[2, 2, 2, 2])[1], "W_1112");
    }
}

//! FFT utilities on fully periodic charts. Transforms run in `f64` regardless of `T`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;

/// Angular wavenumber of FFT bin `i` on an axis with `n` points and period `len`.
pub fn wavenumber(i: usize, n: usize, len: f64) -> f64 {
    let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
    2.0 * std::f64::consts::PI * k / len
}

/// Per-axis FFT plans for a periodic chart.
pub struct FftGrid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    periods: Vec<f64>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    len: usize,
}

impl FftGrid {
    pub fn new<T: Real>(chart: &Chart<T>) -> Result<Self> {
        if !chart.is_fully_periodic() {
            return Err(Error::Unsupported("spectral operations need a fully periodic chart".into()));
        }
        let mut planner = FftPlanner::<f64>::new();
        let dims = chart.resolution().to_vec();
        let fwd = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let periods = (0..chart.dim()).map(|a| (chart.upper()[a] - chart.lower()[a]).as_f64()).collect();
        Ok(Self { dims, strides: chart.strides().to_vec(), periods, fwd, inv, len: chart.len() })
    }

    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn dim(&self) -> usize {
        self.dims.len()
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Angular wavevector of flat bin `k`.
    pub fn wavevector(&self, k: usize, out: &mut [f64]) {
        for a in 0..self.dims.len() {
            let i = (k / self.strides[a]) % self.dims[a];
            out[a] = wavenumber(i, self.dims[a], self.periods[a]);
        }
    }

    /// Index of flat bin `k` along `axis`.
    pub fn axis_index(&self, k: usize, axis: usize) -> usize {
        (k / self.strides[axis]) % self.dims[axis]
    }

    /// Spectral derivative of real samples along `axis`, Nyquist mode dropped.
    pub fn partial_real(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        let m = self.dims[axis];
        let mut kv = vec![0.0; self.dims.len()];
        for (k, v) in buf.iter_mut().enumerate() {
            if m % 2 == 0 && self.axis_index(k, axis) == m / 2 {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            self.wavevector(k, &mut kv);
            *v *= Complex64::new(0.0, kv[axis]);
        }
        self.inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// True if bin `k` sits on a Nyquist plane of any even-length axis.
    pub fn is_nyquist(&self, k: usize) -> bool {
        (0..self.dims.len()).any(|a| {
            let n = self.dims[a];
            n % 2 == 0 && (k / self.strides[a]) % n == n / 2
        })
    }

    fn along_axis(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let n = self.dims[axis];
        let s = self.strides[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for start in 0..self.len {
            if (start / s) % n != 0 {
                continue;
            }
            for i in 0..n {
                line[i] = data[start + i * s];
            }
            plan.process(&mut line);
            for i in 0..n {
                data[start + i * s] = line[i];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        for a in 0..self.dims.len() {
            self.along_axis(data, a, &self.fwd[a]);
        }
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for a in 0..self.dims.len() {
            self.along_axis(data, a, &self.inv[a]);
        }
        let s = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// One component of a field as a complex buffer.
    pub fn load<T: Real>(&self, f: &Field<T>, comp: usize) -> Vec<Complex64> {
        let mut buf = vec![T::zero(); f.ncomp()];
        (0..self.len)
            .map(|k| {
                f.value_at(k, &mut buf);
                Complex64::new(buf[comp].as_f64(), 0.0)
            })
            .collect()
    }
}

/// Spectral derivative along `axis`; the Nyquist mode is dropped.
pub fn spectral_partial<T: Real>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    let grid = FftGrid::new(f.chart())?;
    let nc = f.ncomp();
    let n = grid.len();
    let mut out = vec![T::zero(); n * nc];
    let mut kv = vec![0.0; grid.dim()];
    for c in 0..nc {
        let mut data = grid.load(f, c);
        grid.forward(&mut data);
        for (k, v) in data.iter_mut().enumerate() {
            let m = grid.dims[axis];
            let i = (k / grid.strides[axis]) % m;
            if m % 2 == 0 && i == m / 2 {
                *v = Complex64::new(0.0, 0.0);
                continue;
            }
            grid.wavevector(k, &mut kv);
            *v *= Complex64::new(0.0, kv[axis]);
        }
        grid.inverse(&mut data);
        for k in 0..n {
            out[k * nc + c] = T::lit(data[k].re);
        }
    }
    Field::from_values(f.chart().clone(), f.shape(), &[], out)
}

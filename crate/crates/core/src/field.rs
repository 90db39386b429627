//! Grid unknowns with an optional cached spectrum.

use std::sync::{Arc, OnceLock};

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real tensor of nodal values. The spectrum, once requested, is kept until
/// the data is borrowed mutably.
#[derive(Debug, Clone)]
pub struct Field {
    data: ArrayD<f64>,
    spectrum: OnceLock<Arc<Vec<Complex64>>>,
}

impl Field {
    pub fn new(data: ArrayD<f64>) -> Self {
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Self {
            data,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(ArrayD::zeros(IxDyn(shape)))
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: vec![values.len()],
            });
        }
        let data = ArrayD::from_shape_vec(IxDyn(shape), values).expect("length checked");
        Ok(Self::new(data))
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &ArrayD<f64> {
        &self.data
    }

    pub fn into_data(self) -> ArrayD<f64> {
        self.data
    }

    /// Mutable access; drops the cached spectrum.
    pub fn data_mut(&mut self) -> &mut ArrayD<f64> {
        self.spectrum.take();
        &mut self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.spectrum.take();
        self.data.as_slice_mut().expect("standard layout")
    }

    /// Cached transform, computed with `transform` on first use.
    pub fn spectrum_with<F>(&self, transform: F) -> Arc<Vec<Complex64>>
    where
        F: FnOnce(&[f64]) -> Vec<Complex64>,
    {
        self.spectrum
            .get_or_init(|| Arc::new(transform(self.as_slice())))
            .clone()
    }

    pub fn has_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    pub fn ensure_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: self.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Infinity norm; any NaN makes it infinite.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for &v in self.as_slice() {
            if v.is_nan() {
                return f64::INFINITY;
            }
            m = m.max(v.abs());
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Field) {
        debug_assert_eq!(self.shape(), x.shape());
        for (a, b) in self.as_slice_mut().iter_mut().zip(x.as_slice()) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.as_slice_mut() {
            *a *= alpha;
        }
    }

    /// `Σ c_i x_i` over a non-empty list of equally shaped fields.
    pub fn lincomb(terms: &[(f64, &Field)]) -> Field {
        let (c0, x0) = terms[0];
        let mut out: Vec<f64> = x0.as_slice().iter().map(|v| c0 * v).collect();
        for &(c, x) in &terms[1..] {
            debug_assert_eq!(x.shape(), x0.shape());
            for (o, v) in out.iter_mut().zip(x.as_slice()) {
                *o += c * v;
            }
        }
        Field::from_vec(x0.shape(), out).expect("shape preserved")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.data.mapv(f))
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

//! Multi-dimensional real-to-complex transforms on row-major buffers.
//!
//! The last axis is transformed real-to-complex (keeping `n/2 + 1` modes),
//! the remaining axes complex-to-complex. The inverse is normalized.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

pub struct RealFftNd {
    shape: Vec<usize>,
    spec_shape: Vec<usize>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward_axes: Vec<Arc<dyn Fft<f64>>>,
    inverse_axes: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for RealFftNd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealFftNd")
            .field("shape", &self.shape)
            .finish()
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl RealFftNd {
    /// # Panics
    /// If `shape` is empty or has a zero extent.
    pub fn new(shape: &[usize]) -> Self {
        assert!(!shape.is_empty() && shape.iter().all(|&n| n > 0));
        let d = shape.len();
        let last = shape[d - 1];
        let mut spec_shape = shape.to_vec();
        spec_shape[d - 1] = last / 2 + 1;
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let forward_axes = shape[..d - 1]
            .iter()
            .map(|&n| cp.plan_fft_forward(n))
            .collect();
        let inverse_axes = shape[..d - 1]
            .iter()
            .map(|&n| cp.plan_fft_inverse(n))
            .collect();
        Self {
            shape: shape.to_vec(),
            spec_shape,
            r2c: rp.plan_fft_forward(last),
            c2r: rp.plan_fft_inverse(last),
            forward_axes,
            inverse_axes,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Shape of the half spectrum.
    pub fn spectrum_shape(&self) -> &[usize] {
        &self.spec_shape
    }

    pub fn real_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spectrum_len(&self) -> usize {
        self.spec_shape.iter().product()
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.real_len());
        let last = *self.shape.last().unwrap();
        let half = last / 2 + 1;
        let rows = x.len() / last;
        let mut out = vec![Complex64::new(0.0, 0.0); rows * half];
        let mut input = self.r2c.make_input_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for (row, spec) in x.chunks_exact(last).zip(out.chunks_exact_mut(half)) {
            input.copy_from_slice(row);
            self.r2c
                .process_with_scratch(&mut input, spec, &mut scratch)
                .expect("buffer sizes fixed at planning");
        }
        self.complex_axes(&mut out, &self.forward_axes);
        out
    }

    /// Normalized inverse transform; consumes the spectrum as scratch.
    pub fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(spec.len(), self.spectrum_len());
        self.complex_axes(&mut spec, &self.inverse_axes);
        let last = *self.shape.last().unwrap();
        let half = last / 2 + 1;
        let scale = 1.0 / self.real_len() as f64;
        let mut out = vec![0.0; self.real_len()];
        let mut scratch = self.c2r.make_scratch_vec();
        for (row, s) in out.chunks_exact_mut(last).zip(spec.chunks_exact_mut(half)) {
            // the real transform ignores these parts; drop them explicitly
            s[0].im = 0.0;
            if last.is_multiple_of(2) {
                s[half - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(s, row, &mut scratch)
                .expect("imaginary parts cleared above");
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        out
    }

    fn complex_axes(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let st = strides(&self.spec_shape);
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.spec_shape[axis];
            if n == 1 {
                continue;
            }
            let stride = st[axis];
            let block = stride * n;
            let mut lane = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, l) in lane.iter_mut().enumerate() {
                        *l = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut lane, &mut scratch);
                    for (j, l) in lane.iter().enumerate() {
                        data[start + j * stride] = *l;
                    }
                }
            }
        }
    }
}

/// Signed integer mode of index `j` on an axis of length `n`.
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

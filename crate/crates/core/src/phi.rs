//! Exponential and φ-function kernels.
//!
//! `φ_0 = exp` and `φ_{k+1}(z) = (φ_k(z) - 1/k!) / z`, with the removable
//! singularity at the origin handled by a truncated Taylor series. The dense
//! versions use scaling and squaring with a degree-13 diagonal Padé
//! approximant; `φ_k` of a matrix comes from the exponential of an augmented
//! block matrix.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ensure_square, identity, norm1, solve, Scalar};

/// Highest order accepted by [`phi_scalar`].
pub const MAX_PHI_ORDER: usize = 4;

/// Below this modulus the Taylor series is used.
const TAYLOR_RADIUS: f64 = 1.0;
const TAYLOR_TERMS: usize = 20;

const INV_FACTORIAL: [f64; 5] = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];

/// `φ_k(z)` for `k <= 4`.
///
/// # Panics
/// If `k > MAX_PHI_ORDER`.
pub fn phi_scalar(k: usize, z: Complex64) -> Complex64 {
    assert!(k <= MAX_PHI_ORDER, "phi order {k} exceeds {MAX_PHI_ORDER}");
    if k == 0 {
        return z.exp();
    }
    if z.norm() < TAYLOR_RADIUS {
        // sum_j z^j / (j + k)!, Horner from the tail
        let mut acc = Complex64::new(0.0, 0.0);
        for j in (0..TAYLOR_TERMS).rev() {
            acc = acc * z / (j + k + 1) as f64 + 1.0;
        }
        // acc = sum_j z^j k!/(j+k)!
        return acc * INV_FACTORIAL[k];
    }
    let mut phi = z.exp();
    for j in 1..=k {
        phi = (phi - INV_FACTORIAL[j - 1]) / z;
    }
    phi
}

/// Real-argument convenience wrapper around [`phi_scalar`].
pub fn phi_real(k: usize, x: f64) -> f64 {
    if k == 0 {
        return x.exp();
    }
    phi_scalar(k, Complex64::new(x, 0.0)).re
}

// Padé(13) numerator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Scaling target for the Padé(13) approximant.
const THETA13: f64 = 5.37;

/// Matrix exponential by scaling and squaring.
pub fn expm_dense<T: Scalar>(m: &ArrayView2<T>) -> Result<Array2<T>> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if n == 1 {
        return Ok(Array2::from_elem((1, 1), m[[0, 0]].exp()));
    }
    let norm = norm1(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = T::from_real(2f64.powi(-squarings));
    let a = m.mapv(|x| x * scale);

    let c = |i: usize| T::from_real(PADE13[i]);
    let eye: Array2<T> = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let inner_u = a6.mapv(|x| x * c(13)) + a4.mapv(|x| x * c(11)) + a2.mapv(|x| x * c(9));
    let w = a6.dot(&inner_u)
        + a6.mapv(|x| x * c(7))
        + a4.mapv(|x| x * c(5))
        + a2.mapv(|x| x * c(3))
        + eye.mapv(|x| x * c(1));
    let u = a.dot(&w);
    let inner_v = a6.mapv(|x| x * c(12)) + a4.mapv(|x| x * c(10)) + a2.mapv(|x| x * c(8));
    let v = a6.dot(&inner_v)
        + a6.mapv(|x| x * c(6))
        + a4.mapv(|x| x * c(4))
        + a2.mapv(|x| x * c(2))
        + eye.mapv(|x| x * c(0));

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = solve(denom, &numer.view())?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// `φ_k(M)` for `k ∈ {1, 2}` from the exponential of the block matrix
/// `[[M, I, 0], [0, 0, I], [0, 0, 0]]` (truncated to `k + 1` block rows).
pub fn phim_dense<T: Scalar>(k: usize, m: &ArrayView2<T>) -> Result<Array2<T>> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "dense phi functions are provided for k = 1, 2 (got {k})"
        )));
    }
    let n = ensure_square(m)?;
    let size = (k + 1) * n;
    let mut block = Array2::<T>::zeros((size, size));
    block.slice_mut(s![0..n, 0..n]).assign(m);
    for b in 0..k {
        for i in 0..n {
            block[[b * n + i, (b + 1) * n + i]] = T::one();
        }
    }
    let e = expm_dense(&block.view())?;
    Ok(e.slice(s![0..n, k * n..(k + 1) * n]).to_owned())
}

/// Reusable front end for repeated dense `exp`/`φ_k` evaluations of one size.
#[derive(Debug, Clone)]
pub struct DensePhiWorkspace {
    dimension: usize,
}

impl DensePhiWorkspace {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "workspace dimension must be positive".into(),
            ));
        }
        Ok(Self { dimension })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn check(&self, m: &ArrayView2<f64>) -> Result<()> {
        let n = ensure_square(m)?;
        if n != self.dimension {
            return Err(Error::ShapeMismatch {
                expected: vec![self.dimension, self.dimension],
                got: vec![n, n],
            });
        }
        Ok(())
    }

    /// `φ_k(M)` with `k = 0` meaning the exponential.
    pub fn phi(&self, k: usize, m: &ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(m)?;
        let out = if k == 0 {
            expm_dense(m)?
        } else {
            phim_dense(k, m)?
        };
        debug_assert!(out.iter().all(|x| x.is_finite()) || !m.iter().all(|x| x.is_finite()));
        Ok(out)
    }
}

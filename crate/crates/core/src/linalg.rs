//! Small dense kernels shared by the matrix-function code: a scalar trait
//! covering real and complex entries, LU solves, and norms.

use std::fmt::Debug;
use std::ops::{AddAssign, Neg, SubAssign};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, LinalgScalar};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entry type of the dense matrices handled here.
pub trait Scalar:
    LinalgScalar + PartialEq + Debug + Send + Sync + Neg<Output = Self> + AddAssign + SubAssign
{
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn is_finite(self) -> bool;
    fn exp(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
}

pub fn ensure_square<T>(m: &ArrayView2<T>) -> Result<usize> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(m: &ArrayView2<T>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn identity<T: Scalar>(n: usize) -> Array2<T> {
    Array2::from_diag_elem(n, T::one())
}

/// LU factorisation with partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(mut a: Array2<T>) -> Result<Self> {
        let n = ensure_square(&a.view())?;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[[col, col]].modulus();
            for row in col + 1..n {
                let v = a[[row, col]].modulus();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular);
            }
            if piv != col {
                for j in 0..n {
                    a.swap([col, j], [piv, j]);
                }
                perm.swap(col, piv);
            }
            let p = a[[col, col]];
            for row in col + 1..n {
                let f = a[[row, col]] / p;
                a[[row, col]] = f;
                for j in col + 1..n {
                    let v = a[[col, j]];
                    a[[row, j]] -= f * v;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_vec(&self, b: &ArrayView1<T>) -> Array1<T> {
        let n = self.dim();
        let mut x: Array1<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s / self.lu[[i, i]];
        }
        x
    }

    pub fn solve_mat(&self, b: &ArrayView2<T>) -> Array2<T> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(&col));
        }
        out
    }
}

/// Solve `a x = b` for a matrix right-hand side.
pub fn solve<T: Scalar>(a: Array2<T>, b: &ArrayView2<T>) -> Result<Array2<T>> {
    Ok(Lu::factor(a)?.solve_mat(b))
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Scalar>(a: &ArrayView2<T>, b: &ArrayView2<T>) -> Array2<T> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == T::zero() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lu_solves_small_system() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let x = Lu::factor(a).unwrap().solve_vec(&b.view());
        for (u, v) in x.iter().zip(x_true.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_pivots_on_zero_leading_entry() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let b = array![2.0, 3.0];
        let x = Lu::factor(a).unwrap().solve_vec(&b.view());
        assert_eq!(x, array![3.0, 2.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(Lu::factor(a), Err(Error::Singular)));
    }

    #[test]
    fn kron_of_identities() {
        let i2: Array2<f64> = identity(2);
        let i3: Array2<f64> = identity(3);
        assert_eq!(kron(&i2.view(), &i3.view()), identity::<f64>(6));
    }
}

//! Kronecker sums of one-dimensional matrices and μ-mode products.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{Boundary, GridSpec};
use crate::linalg::{identity, kron};

/// `A_1 ⊕ … ⊕ A_d`, factor `μ` acting along tensor axis `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerSum {
    factors: Vec<Array2<f64>>,
    /// Nonzeros of each factor, row by row.
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl KroneckerSum {
    pub fn new(factors: Vec<Array2<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "Kronecker sum needs at least one factor".into(),
            ));
        }
        for f in &factors {
            crate::linalg::ensure_square(&f.view())?;
        }
        let rows = factors
            .iter()
            .map(|f| {
                f.outer_iter()
                    .map(|r| {
                        r.iter()
                            .enumerate()
                            .filter(|(_, &v)| v != 0.0)
                            .map(|(k, &v)| (k, v))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { factors, rows })
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn matvec(&self, u: &Field) -> Result<Field> {
        u.ensure_shape(&self.shape())?;
        let shape = self.shape();
        let src = u.as_slice();
        let mut acc = vec![0.0; u.len()];
        for (mu, rows) in self.rows.iter().enumerate() {
            let n = shape[mu];
            let post: usize = shape[mu + 1..].iter().product();
            let block = n * post;
            for (dst, blk) in acc.chunks_exact_mut(block).zip(src.chunks_exact(block)) {
                for (j, row) in rows.iter().enumerate() {
                    let out = &mut dst[j * post..(j + 1) * post];
                    for &(k, v) in row {
                        for (o, x) in out.iter_mut().zip(&blk[k * post..(k + 1) * post]) {
                            *o += v * x;
                        }
                    }
                }
            }
        }
        Field::from_vec(&shape, acc)
    }

    /// Dense row-major assembly, for small sizes only.
    pub fn assemble(&self) -> Array2<f64> {
        let sizes = self.shape();
        let total: usize = sizes.iter().product();
        let mut out = Array2::zeros((total, total));
        for (mu, f) in self.factors.iter().enumerate() {
            let before: usize = sizes[..mu].iter().product();
            let after: usize = sizes[mu + 1..].iter().product();
            let left = kron(&identity::<f64>(before).view(), &f.view());
            out += &kron(&left.view(), &identity::<f64>(after).view());
        }
        out
    }
}

/// Contracts axis `axis` of the row-major tensor `data` with `m`:
/// `out[.., i, ..] = Σ_j m[i, j] data[.., j, ..]`.
pub fn mode_product(data: &[f64], shape: &[usize], axis: usize, m: &ArrayView2<f64>) -> Vec<f64> {
    let n = shape[axis];
    assert_eq!(m.dim(), (n, n));
    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; data.len()];
    if post == 1 {
        let v = ArrayView2::from_shape((pre, n), data).unwrap();
        let mut w = ArrayViewMut2::from_shape((pre, n), &mut out).unwrap();
        general_mat_mul(1.0, &v, &m.t(), 0.0, &mut w);
        return out;
    }
    let block = n * post;
    for p in 0..pre {
        let v = ArrayView2::from_shape((n, post), &data[p * block..(p + 1) * block]).unwrap();
        let mut w =
            ArrayViewMut2::from_shape((n, post), &mut out[p * block..(p + 1) * block]).unwrap();
        general_mat_mul(1.0, m, &v, 0.0, &mut w);
    }
    out
}

/// Second-difference matrix with the grid's closure, scaled by `1/h²`.
pub fn second_difference(n: usize, h: f64, bc: Boundary) -> Array2<f64> {
    let mut d = Array2::zeros((n, n));
    let c = 1.0 / (h * h);
    for j in 0..n {
        d[[j, j]] = -2.0 * c;
        match bc {
            Boundary::Periodic => {
                d[[j, (j + n - 1) % n]] += c;
                d[[j, (j + 1) % n]] += c;
            }
            Boundary::DirichletNeumannMix3D => {
                if j > 0 {
                    d[[j, j - 1]] += c;
                }
                if j + 1 < n {
                    d[[j, j + 1]] += c;
                } else {
                    // ghost reflection u_{N+1} = u_{N-1}
                    d[[j, j - 1]] += c;
                }
            }
        }
    }
    d
}

/// Centered first-difference matrix with the grid's closure.
pub fn first_difference(n: usize, h: f64, bc: Boundary) -> Array2<f64> {
    let mut d = Array2::zeros((n, n));
    let c = 0.5 / h;
    for j in 0..n {
        match bc {
            Boundary::Periodic => {
                d[[j, (j + 1) % n]] += c;
                d[[j, (j + n - 1) % n]] -= c;
            }
            Boundary::DirichletNeumannMix3D => {
                if j + 1 < n {
                    d[[j, j + 1]] += c;
                    if j > 0 {
                        d[[j, j - 1]] -= c;
                    }
                }
                // last row: ghost minus reflected neighbour vanishes
            }
        }
    }
    d
}

/// Factors `A_μ = λ a^max_μ D2 + b_μ D1` on a finite-difference grid.
pub fn build_fd_kron(
    grid: &GridSpec,
    lambda: f64,
    a_max: &[f64],
    b_const: &[f64],
) -> Result<KroneckerSum> {
    let d = grid.dim();
    if a_max.len() != d || b_const.len() != d {
        return Err(Error::InvalidArgument(
            "one a_max and one drift per direction expected".into(),
        ));
    }
    let factors = (0..d)
        .map(|mu| {
            let n = grid.shape()[mu];
            let h = grid.spacing(mu);
            let d2 = second_difference(n, h, grid.boundary());
            let d1 = first_difference(n, h, grid.boundary());
            d2 * (lambda * a_max[mu]) + d1 * b_const[mu]
        })
        .collect();
    KroneckerSum::new(factors)
}

//! Dense matrix functions written independently of the library, used as
//! oracles by several test targets.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use expint::field::Field;
use expint::grid::Boundary;
use expint::ops::{Discretization, SplitSystem};
use expint::problem::ProblemDef;
use expint::scheme::{SchemeId, SchemeSpec};
use expint::system::SemilinearSystem;
use ndarray::{s, Array1, Array2};

/// Taylor series with scaling and squaring.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let norm = a
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.25 {
        squarings += 1;
    }
    let b = a / 2f64.powi(squarings);
    let mut term = Array2::<f64>::eye(n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = term.dot(&b) / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

/// `φ_k(A)` from the top-right block of an augmented exponential.
pub fn phim(k: usize, a: &Array2<f64>) -> Array2<f64> {
    if k == 0 {
        return expm(a);
    }
    let n = a.nrows();
    let size = n * (k + 1);
    let mut big = Array2::<f64>::zeros((size, size));
    big.slice_mut(s![0..n, 0..n]).assign(a);
    for j in 0..k {
        for i in 0..n {
            big[[j * n + i, (j + 1) * n + i]] = 1.0;
        }
    }
    expm(&big).slice(s![0..n, k * n..(k + 1) * n]).to_owned()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.clone();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs()))
            .unwrap();
        for j in 0..n {
            m.swap([c, j], [p, j]);
        }
        x.swap(c, p);
        for r in c + 1..n {
            let f = m[[r, c]] / m[[c, c]];
            for j in c..n {
                m[[r, j]] -= f * m[[c, j]];
            }
            x[r] -= f * x[c];
        }
    }
    for c in (0..n).rev() {
        let tail: f64 = (c + 1..n).map(|j| m[[c, j]] * x[j]).sum();
        x[c] = (x[c] - tail) / m[[c, c]];
    }
    x
}

pub fn matrix_of(shape: &[usize], map: impl Fn(&Field) -> Field) -> Array2<f64> {
    let n: usize = shape.iter().product();
    let mut a = Array2::zeros((n, n));
    let mut e = Field::zeros(shape);
    for j in 0..n {
        e.as_slice_mut()[j] = 1.0;
        let col = map(&e);
        for i in 0..n {
            a[[i, j]] = col.as_slice()[i];
        }
        e.as_slice_mut()[j] = 0.0;
    }
    a
}

pub fn vec_of(u: &Field) -> Array1<f64> {
    Array1::from(u.as_slice().to_vec())
}

pub fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

pub struct Dense {
    pub a: Array2<f64>,
    pub sys: Arc<SplitSystem>,
}

impl Dense {
    fn g(&self, t: f64, u: &Array1<f64>) -> Array1<f64> {
        let f = Field::from_vec(self.sys.shape(), u.to_vec()).unwrap();
        vec_of(&self.sys.nonlinear(t, &f).unwrap())
    }

    fn f(&self, t: f64, u: &Array1<f64>) -> Array1<f64> {
        self.a.dot(u) + self.g(t, u)
    }

    fn e(&self, k: usize, tau: f64) -> Array2<f64> {
        phim(k, &(&self.a * tau))
    }

    fn shifted_solve(&self, theta: f64, tau: f64, rhs: &Array1<f64>) -> Array1<f64> {
        solve(
            &(Array2::eye(self.a.nrows()) - &self.a * (theta * tau)),
            rhs,
        )
    }

    /// One step of each scheme, written out from its defining formula.
    pub fn step(&self, scheme: &SchemeSpec, u: &Array1<f64>, t: f64, tau: f64) -> Array1<f64> {
        let (c2, alpha) = (scheme.c2(), scheme.alpha());
        match scheme.id {
            SchemeId::Ee => u + &(self.e(1, tau).dot(&self.f(t, u)) * tau),
            SchemeId::Le => self.e(0, tau).dot(&(u + &(self.g(t, u) * tau))),
            SchemeId::Sle => u + &(self.e(0, tau).dot(&self.f(t, u)) * tau),
            SchemeId::L2a => {
                let big_u = self
                    .e(0, tau / 2.0)
                    .dot(&(u + &(self.g(t, u) * (tau / 2.0))));
                self.e(0, tau).dot(u)
                    + self.e(0, tau / 2.0).dot(&self.g(t + tau / 2.0, &big_u)) * tau
            }
            SchemeId::L2b => {
                let g0 = self.g(t, u);
                let big_u = self.e(0, tau).dot(&(u + &(&g0 * tau)));
                self.e(0, tau).dot(&(u + &(&g0 * (tau / 2.0))))
                    + self.g(t + tau, &big_u) * (tau / 2.0)
            }
            SchemeId::Sl2 => {
                let f0 = self.f(t, u);
                let big_u = u + &(self.e(0, alpha * tau).dot(&f0) * (alpha * tau));
                let dg = self.g(t + alpha * tau, &big_u) - self.g(t, u);
                u + &(self.e(0, tau / 2.0).dot(&f0) * tau)
                    + self.e(0, tau).dot(&dg) * (tau / (2.0 * alpha))
            }
            SchemeId::Erk2p2 | SchemeId::Erk2p1 => {
                let f0 = self.f(t, u);
                let big_u = u + &(self.e(1, c2 * tau).dot(&f0) * (c2 * tau));
                let dg = self.g(t + c2 * tau, &big_u) - self.g(t, u);
                let tail = if scheme.id == SchemeId::Erk2p2 {
                    self.e(2, tau).dot(&dg) * (tau / c2)
                } else {
                    self.e(1, tau).dot(&dg) * (tau / (2.0 * c2))
                };
                u + &(self.e(1, tau).dot(&f0) * tau) + tail
            }
            SchemeId::Erbe => {
                let uf = Field::from_vec(self.sys.shape(), u.to_vec()).unwrap();
                let j = matrix_of(self.sys.shape(), |v| {
                    self.sys.jacobian_matvec(t, &uf, v).unwrap()
                });
                u + &(phim(1, &(j * tau)).dot(&self.f(t, u)) * tau)
            }
            SchemeId::Bfe => self.shifted_solve(1.0, tau, &(u + &(self.g(t, u) * tau))),
            SchemeId::Imex2 => {
                let big_u = self.shifted_solve(0.5, tau, &(u + &(self.g(t, u) * (tau / 2.0))));
                let rhs = u + &(self.a.dot(u) * (tau / 2.0)) + self.g(t + tau / 2.0, &big_u) * tau;
                self.shifted_solve(0.5, tau, &rhs)
            }
        }
    }
}

pub fn dense_setup(p: &ProblemDef, n: usize, lambda: f64) -> Dense {
    let disc = Arc::new(Discretization::new(p, &p.grid(n).unwrap()).unwrap());
    let sys = Arc::new(SplitSystem::accelerated(disc, lambda).unwrap());
    let a = matrix_of(sys.shape(), |x| sys.apply_linear(x).unwrap());
    Dense { a, sys }
}

/// Constant-coefficient advection-diffusion; g vanishes at λ = 1.
pub fn heat() -> ProblemDef {
    let mut p = ProblemDef::constant_diffusion(
        &[0.8],
        &[(-PI, PI)],
        Boundary::Periodic,
        Arc::new(|x: &[f64]| x[0].sin() + 0.5 * (3.0 * x[0]).cos()),
    );
    p.velocity = vec![Some(Arc::new(|_: &[f64]| 0.4))];
    p
}

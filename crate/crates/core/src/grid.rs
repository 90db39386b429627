//! Structured tensor-product grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Nodes `lo + j h`, `j = 0..N`, `h = (hi - lo) / N`.
    Periodic,
    /// Homogeneous Dirichlet at `lo`, homogeneous Neumann at `hi` in every
    /// direction. Nodes `lo + j h`, `j = 1..=N`.
    DirichletNeumannMix3D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    bc: Boundary,
}

impl GridSpec {
    pub fn new(n: &[usize], bounds: &[(f64, f64)], bc: Boundary) -> Result<Self> {
        if n.is_empty() || n.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "grids have 1 to 3 directions, got {}",
                n.len()
            )));
        }
        if bounds.len() != n.len() {
            return Err(Error::InvalidArgument(
                "one interval per direction expected".into(),
            ));
        }
        if let Some(&bad) = n.iter().find(|&&k| k < 4) {
            return Err(Error::InvalidArgument(format!(
                "at least 4 points per direction, got {bad}"
            )));
        }
        if bounds
            .iter()
            .any(|&(a, b)| !(b > a) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidArgument(
                "empty or non-finite interval".into(),
            ));
        }
        Ok(Self {
            n: n.to_vec(),
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            bc,
        })
    }

    /// Same point count and interval in every direction.
    pub fn cube(dim: usize, n: usize, bounds: (f64, f64), bc: Boundary) -> Result<Self> {
        Self::new(&vec![n; dim], &vec![bounds; dim], bc)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == Boundary::Periodic
    }

    pub fn bounds(&self, mu: usize) -> (f64, f64) {
        (self.lo[mu], self.hi[mu])
    }

    pub fn length(&self, mu: usize) -> f64 {
        self.hi[mu] - self.lo[mu]
    }

    pub fn spacing(&self, mu: usize) -> f64 {
        self.length(mu) / self.n[mu] as f64
    }

    /// Coordinate of (possibly ghost) index `j` along `mu`; `j` runs over
    /// `0..N` for stored nodes.
    pub fn coordinate(&self, mu: usize, j: i64) -> f64 {
        let offset = match self.bc {
            Boundary::Periodic => 0,
            Boundary::DirichletNeumannMix3D => 1,
        };
        self.lo[mu] + (j + offset) as f64 * self.spacing(mu)
    }

    /// Row-major strides of the node tensor.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for i in (0..d - 1).rev() {
            s[i] = s[i + 1] * self.n[i + 1];
        }
        s
    }

    /// Multi-index of flat position `idx`.
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for mu in (0..self.dim()).rev() {
            out[mu] = idx % self.n[mu];
            idx /= self.n[mu];
        }
        out
    }

    /// Coordinates of every node, flattened as `len × dim`.
    pub fn node_coordinates(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len() * d);
        for idx in 0..self.len() {
            let m = self.unravel(idx);
            for (mu, &k) in m.iter().enumerate().take(d) {
                out.push(self.coordinate(mu, k as i64));
            }
        }
        out
    }

    /// Equal-weight average on periodic grids, trapezoidal otherwise.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let d = self.dim();
        let per_axis: Vec<Vec<f64>> = (0..d)
            .map(|mu| {
                let n = self.n[mu];
                let mut w = vec![1.0; n];
                if !self.is_periodic() {
                    w[0] = 0.5;
                    w[n - 1] = 0.5;
                }
                let total: f64 = w.iter().sum();
                w.iter().map(|x| x / total).collect()
            })
            .collect();
        (0..self.len())
            .map(|idx| {
                let m = self.unravel(idx);
                (0..d).map(|mu| per_axis[mu][m[mu]]).product()
            })
            .collect()
    }
}

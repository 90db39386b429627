//! Discrete operators: the full right-hand side, the constant-coefficient
//! part `A = λ Σ a^max_μ ∂²_μ + β·∇` and the remainder `g = F − A u`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{signed_mode, RealFftNd};
use crate::field::Field;
use crate::grid::GridSpec;
use crate::kron::{build_fd_kron, KroneckerSum};
use crate::problem::{OperatorForm, ProblemDef};
use crate::system::SemilinearSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub lambda: f64,
    pub a_max: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SplitConfig {
    pub fn new(lambda: f64, a_max: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda {lambda} outside [0, 1]"
            )));
        }
        if a_max.len() != beta.len() {
            return Err(Error::InvalidArgument(
                "a_max and beta differ in length".into(),
            ));
        }
        Ok(Self {
            lambda,
            a_max,
            beta,
        })
    }
}

/// Which operator goes into the linear part.
#[derive(Debug, Clone, PartialEq)]
pub enum Splitting {
    /// Constant-coefficient `A`; the rest lands in `g`.
    Accelerated(SplitConfig),
    /// All diffusion and advection in `A`, `g = r`.
    Original,
}

/// Wavenumbers laid out over the half spectrum.
#[derive(Debug)]
struct Spectral {
    fft: RealFftNd,
    /// First-derivative wavenumbers, Nyquist zeroed.
    k1: Vec<Vec<f64>>,
    /// Squared wavenumbers, Nyquist kept.
    k2: Vec<Vec<f64>>,
}

impl Spectral {
    fn new(grid: &GridSpec) -> Self {
        let fft = RealFftNd::new(grid.shape());
        let spec_shape = fft.spectrum_shape().to_vec();
        let d = grid.dim();
        let len = fft.spectrum_len();
        let mut k1 = vec![vec![0.0; len]; d];
        let mut k2 = vec![vec![0.0; len]; d];
        let mut idx = [0usize; 3];
        for flat in 0..len {
            let mut rem = flat;
            for mu in (0..d).rev() {
                idx[mu] = rem % spec_shape[mu];
                rem /= spec_shape[mu];
            }
            for mu in 0..d {
                let n = grid.shape()[mu];
                let mode = if mu == d - 1 {
                    idx[mu] as i64
                } else {
                    signed_mode(idx[mu], n)
                };
                let kappa = mode as f64 * 2.0 * PI / grid.length(mu);
                let nyquist = n.is_multiple_of(2) && mode.unsigned_abs() as usize == n / 2;
                k1[mu][flat] = if nyquist { 0.0 } else { kappa };
                k2[mu][flat] = kappa * kappa;
            }
        }
        Self { fft, k1, k2 }
    }

    /// `IFFT(i κ_μ û)`
    fn d1(&self, mu: usize, uhat: &[Complex64]) -> Vec<f64> {
        let spec = uhat
            .iter()
            .zip(&self.k1[mu])
            .map(|(c, &k)| Complex64::new(-c.im * k, c.re * k))
            .collect();
        self.fft.inverse(spec)
    }

    /// `IFFT(−κ_μ² û)`
    fn d2(&self, mu: usize, uhat: &[Complex64]) -> Vec<f64> {
        let spec = uhat
            .iter()
            .zip(&self.k2[mu])
            .map(|(c, &k)| c * -k)
            .collect();
        self.fft.inverse(spec)
    }
}

/// Neighbour bookkeeping for centered differences.
#[derive(Debug)]
struct FiniteDiff {
    shape: Vec<usize>,
    strides: Vec<usize>,
    h: Vec<f64>,
    periodic: bool,
}

impl FiniteDiff {
    fn new(grid: &GridSpec) -> Self {
        Self {
            shape: grid.shape().to_vec(),
            strides: grid.strides(),
            h: (0..grid.dim()).map(|mu| grid.spacing(mu)).collect(),
            periodic: grid.is_periodic(),
        }
    }

    /// Flat indices of the neighbours of `idx` along `mu`; `None` is a
    /// homogeneous Dirichlet value. The Neumann ghost reflects onto `N − 2`.
    #[inline]
    fn neighbours(&self, idx: usize, mu: usize) -> (Option<usize>, usize) {
        let n = self.shape[mu];
        let s = self.strides[mu];
        let j = (idx / s) % n;
        let plus = if j + 1 < n {
            idx + s
        } else if self.periodic {
            idx - (n - 1) * s
        } else {
            idx - s
        };
        let minus = if j > 0 {
            Some(idx - s)
        } else if self.periodic {
            Some(idx + (n - 1) * s)
        } else {
            None
        };
        (minus, plus)
    }
}

#[derive(Debug)]
enum Differ {
    Spectral(Spectral),
    FiniteDiff(FiniteDiff),
}

/// A problem sampled on a grid together with its differentiation backend.
pub struct Discretization {
    problem: ProblemDef,
    grid: GridSpec,
    coords: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Option<Vec<f64>>>,
    differ: Differ,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("problem", &self.problem.name)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl Discretization {
    pub fn new(problem: &ProblemDef, grid: &GridSpec) -> Result<Self> {
        if problem.dim() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![problem.dim()],
                got: vec![grid.dim()],
            });
        }
        let d = grid.dim();
        let coords = grid.node_coordinates();
        let sample = |f: &crate::problem::Coefficient| -> Vec<f64> {
            coords.chunks_exact(d).map(|x| f(x)).collect()
        };
        let a = problem.diffusion.iter().map(sample).collect();
        let b = problem
            .velocity
            .iter()
            .map(|v| {
                v.as_ref()
                    .map(sample)
                    .filter(|s| s.iter().any(|&x| x != 0.0))
            })
            .collect();
        let differ = if grid.is_periodic() && problem.boundary == crate::grid::Boundary::Periodic {
            Differ::Spectral(Spectral::new(grid))
        } else {
            Differ::FiniteDiff(FiniteDiff::new(grid))
        };
        Ok(Self {
            problem: problem.clone(),
            grid: grid.clone(),
            coords,
            a,
            b,
            differ,
        })
    }

    pub fn problem(&self) -> &ProblemDef {
        &self.problem
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.differ, Differ::Spectral(_))
    }

    pub fn transform(&self) -> Option<&RealFftNd> {
        match &self.differ {
            Differ::Spectral(s) => Some(&s.fft),
            Differ::FiniteDiff(_) => None,
        }
    }

    pub fn initial_field(&self) -> Field {
        let d = self.grid.dim();
        let v = self
            .coords
            .chunks_exact(d)
            .map(|x| (self.problem.initial)(x))
            .collect();
        Field::from_vec(self.grid.shape(), v).expect("grid-shaped")
    }

    /// Maximum of each `a_μμ` over the nodes.
    pub fn compute_amax(&self) -> Result<Vec<f64>> {
        self.a
            .iter()
            .enumerate()
            .map(|(mu, a)| {
                let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(Error::NonPositiveDiffusion {
                        direction: mu,
                        value: min,
                    });
                }
                Ok(a.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect()
    }

    /// Domain average of `b_μ + ∂_μ a_μμ` (divergence form) or of `b_μ`.
    pub fn compute_beta(&self) -> Vec<f64> {
        let w = self.grid.quadrature_weights();
        let d = self.grid.dim();
        (0..d)
            .map(|mu| {
                let mut integrand: Vec<f64> = match &self.b[mu] {
                    Some(b) => b.clone(),
                    None => vec![0.0; self.grid.len()],
                };
                if self.problem.form == OperatorForm::Divergence {
                    let da = self.coefficient_derivative(mu);
                    for (i, v) in integrand.iter_mut().enumerate() {
                        *v += da[i];
                    }
                }
                integrand.iter().zip(&w).map(|(f, w)| f * w).sum()
            })
            .collect()
    }

    fn coefficient_derivative(&self, mu: usize) -> Vec<f64> {
        match &self.differ {
            Differ::Spectral(s) => {
                let ahat = s.fft.forward(&self.a[mu]);
                s.d1(mu, &ahat)
            }
            Differ::FiniteDiff(_) => {
                let d = self.grid.dim();
                let h = self.grid.spacing(mu);
                let f = &self.problem.diffusion[mu];
                self.coords
                    .chunks_exact(d)
                    .map(|x| {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[mu] += h;
                        xm[mu] -= h;
                        (f(&xp) - f(&xm)) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    pub fn split_config(&self, lambda: f64) -> Result<SplitConfig> {
        SplitConfig::new(lambda, self.compute_amax()?, self.compute_beta())
    }

    pub fn spectrum(&self, u: &Field) -> Result<Arc<Vec<Complex64>>> {
        match &self.differ {
            Differ::Spectral(s) => Ok(u.spectrum_with(|d| s.fft.forward(d))),
            Differ::FiniteDiff(_) => Err(Error::Unsupported {
                backend: "finite-difference grid",
                capability: "spectrum",
            }),
        }
    }

    fn reaction(&self, t: f64, u: &Field) -> Option<Vec<f64>> {
        let r = self.problem.reaction.as_ref()?;
        let d = self.grid.dim();
        Some(
            self.coords
                .chunks_exact(d)
                .zip(u.as_slice())
                .map(|(x, &v)| r(t, x, v))
                .collect(),
        )
    }

    /// Diffusion and advection terms of `F`, without the reaction.
    pub fn linear_part(&self, u: &Field) -> Result<Field> {
        u.ensure_shape(self.grid.shape())?;
        let out = match &self.differ {
            Differ::Spectral(s) => self.spectral_linear(s, u, None),
            Differ::FiniteDiff(fd) => self.fd_linear(fd, u),
        };
        Field::from_vec(self.grid.shape(), out)
    }

    /// Linear part minus the multiplier `symbol`, plus the reaction: `F − A u`.
    pub(crate) fn residual_with_symbol(
        &self,
        u: &Field,
        t: f64,
        symbol: &[Complex64],
    ) -> Result<Field> {
        u.ensure_shape(self.grid.shape())?;
        let Differ::Spectral(s) = &self.differ else {
            return Err(Error::Unsupported {
                backend: "fourier",
                capability: "non-periodic grid",
            });
        };
        let mut g = Field::from_vec(self.grid.shape(), self.spectral_linear(s, u, Some(symbol)))?;
        if let Some(r) = self.reaction(t, u) {
            for (o, r) in g.as_slice_mut().iter_mut().zip(r) {
                *o += r;
            }
        }
        Ok(g)
    }

    fn spectral_linear(&self, s: &Spectral, u: &Field, minus: Option<&[Complex64]>) -> Vec<f64> {
        let uhat = u.spectrum_with(|d| s.fft.forward(d));
        let d = self.grid.dim();
        match self.problem.form {
            OperatorForm::Divergence => {
                let mut acc: Vec<Complex64> = match minus {
                    Some(sym) => uhat.iter().zip(sym).map(|(c, s)| -c * s).collect(),
                    None => vec![Complex64::new(0.0, 0.0); uhat.len()],
                };
                for mu in 0..d {
                    let mut flux = s.d1(mu, &uhat);
                    for (f, a) in flux.iter_mut().zip(&self.a[mu]) {
                        *f *= a;
                    }
                    if let Some(b) = &self.b[mu] {
                        for ((f, b), v) in flux.iter_mut().zip(b).zip(u.as_slice()) {
                            *f += b * v;
                        }
                    }
                    let fhat = s.fft.forward(&flux);
                    for ((a, c), &k) in acc.iter_mut().zip(&fhat).zip(&s.k1[mu]) {
                        *a += Complex64::new(-c.im * k, c.re * k);
                    }
                }
                s.fft.inverse(acc)
            }
            OperatorForm::NonDivergence => {
                let mut out = vec![0.0; u.len()];
                for mu in 0..d {
                    let uxx = s.d2(mu, &uhat);
                    for ((o, a), v) in out.iter_mut().zip(&self.a[mu]).zip(&uxx) {
                        *o += a * v;
                    }
                    if let Some(b) = &self.b[mu] {
                        let ux = s.d1(mu, &uhat);
                        for ((o, b), v) in out.iter_mut().zip(b).zip(&ux) {
                            *o += b * v;
                        }
                    }
                }
                if let Some(sym) = minus {
                    let au = s
                        .fft
                        .inverse(uhat.iter().zip(sym).map(|(c, s)| c * s).collect());
                    for (o, a) in out.iter_mut().zip(au) {
                        *o -= a;
                    }
                }
                out
            }
        }
    }

    fn fd_linear(&self, fd: &FiniteDiff, u: &Field) -> Vec<f64> {
        let uu = u.as_slice();
        let d = self.grid.dim();
        let mut out = vec![0.0; uu.len()];
        let div = self.problem.form == OperatorForm::Divergence;
        for mu in 0..d {
            let h = fd.h[mu];
            let (ih2, i2h) = (1.0 / (h * h), 0.5 / h);
            let a = &self.a[mu];
            let b = self.b[mu].as_deref();
            for (idx, o) in out.iter_mut().enumerate() {
                let (m, p) = fd.neighbours(idx, mu);
                let um = m.map_or(0.0, |m| uu[m]);
                let up = uu[p];
                let uc = uu[idx];
                if div {
                    // face values averaged; the Dirichlet face takes the node value
                    let ap = 0.5 * (a[idx] + a[p]);
                    let am = m.map_or(a[idx], |m| 0.5 * (a[idx] + a[m]));
                    *o += (ap * (up - uc) - am * (uc - um)) * ih2;
                    if let Some(b) = b {
                        let bm = m.map_or(0.0, |m| b[m]);
                        *o += (b[p] * up - bm * um) * i2h;
                    }
                } else {
                    *o += a[idx] * (up - 2.0 * uc + um) * ih2;
                    if let Some(b) = b {
                        *o += b[idx] * (up - um) * i2h;
                    }
                }
            }
        }
        out
    }

    /// `F(t, u)`
    pub fn full_operator(&self, u: &Field, t: f64) -> Result<Field> {
        let mut f = self.linear_part(u)?;
        if let Some(r) = self.reaction(t, u) {
            for (o, r) in f.as_slice_mut().iter_mut().zip(r) {
                *o += r;
            }
        }
        Ok(f)
    }

    /// `∂F/∂u (u) v`
    pub fn jacobian_matvec(&self, u: &Field, v: &Field, t: f64) -> Result<Field> {
        u.ensure_shape(self.grid.shape())?;
        let mut out = self.linear_part(v)?;
        if self.problem.reaction.is_some() {
            let dr = self
                .problem
                .reaction_du
                .as_ref()
                .ok_or(Error::MissingDerivative)?;
            let d = self.grid.dim();
            let coords = self.coords.chunks_exact(d);
            for (((o, x), &uu), &vv) in out
                .as_slice_mut()
                .iter_mut()
                .zip(coords)
                .zip(u.as_slice())
                .zip(v.as_slice())
            {
                *o += dr(t, x, uu) * vv;
            }
        }
        Ok(out)
    }
}

/// Symbol `s_k = −λ Σ a^max_μ κ_μ² + i Σ β_μ κ_μ` over the half spectrum.
pub fn build_fourier_symbol(grid: &GridSpec, split: &SplitConfig) -> Result<Vec<Complex64>> {
    if !grid.is_periodic() {
        return Err(Error::Unsupported {
            backend: "fourier",
            capability: "non-periodic grid",
        });
    }
    if split.a_max.len() != grid.dim() {
        return Err(Error::InvalidArgument(
            "split and grid differ in dimension".into(),
        ));
    }
    Ok(symbol_from(&Spectral::new(grid), split))
}

fn symbol_from(s: &Spectral, split: &SplitConfig) -> Vec<Complex64> {
    let len = s.fft.spectrum_len();
    (0..len)
        .map(|i| {
            let mut re = 0.0;
            let mut im = 0.0;
            for mu in 0..split.a_max.len() {
                re -= split.lambda * split.a_max[mu] * s.k2[mu][i];
                im += split.beta[mu] * s.k1[mu][i];
            }
            Complex64::new(re, im)
        })
        .collect()
}

pub fn compute_amax(problem: &ProblemDef, grid: &GridSpec) -> Result<Vec<f64>> {
    Discretization::new(problem, grid)?.compute_amax()
}

pub fn compute_beta(problem: &ProblemDef, grid: &GridSpec) -> Result<Vec<f64>> {
    Ok(Discretization::new(problem, grid)?.compute_beta())
}

pub fn apply_full_operator(
    problem: &ProblemDef,
    grid: &GridSpec,
    u: &Field,
    t: f64,
) -> Result<Field> {
    Discretization::new(problem, grid)?.full_operator(u, t)
}

pub fn residual_g(
    problem: &ProblemDef,
    grid: &GridSpec,
    split: &SplitConfig,
    u: &Field,
    t: f64,
) -> Result<Field> {
    let disc = Arc::new(Discretization::new(problem, grid)?);
    SplitSystem::new(disc, Splitting::Accelerated(split.clone()))?.nonlinear(t, u)
}

pub fn jacobian_matvec(
    problem: &ProblemDef,
    grid: &GridSpec,
    split: &SplitConfig,
    u: &Field,
    v: &Field,
    t: f64,
) -> Result<Field> {
    let disc = Arc::new(Discretization::new(problem, grid)?);
    SplitSystem::new(disc, Splitting::Accelerated(split.clone()))?.jacobian_matvec(t, u, v)
}

#[derive(Debug, Clone)]
enum LinearRep {
    Symbol(Arc<Vec<Complex64>>),
    Kron(Arc<KroneckerSum>),
    Full,
}

/// A discretized problem with a chosen splitting.
#[derive(Debug, Clone)]
pub struct SplitSystem {
    disc: Arc<Discretization>,
    splitting: Splitting,
    linear: LinearRep,
}

impl SplitSystem {
    pub fn new(disc: Arc<Discretization>, splitting: Splitting) -> Result<Self> {
        let linear = match &splitting {
            Splitting::Original => LinearRep::Full,
            Splitting::Accelerated(split) => {
                if split.a_max.len() != disc.grid.dim() {
                    return Err(Error::InvalidArgument(
                        "split and grid differ in dimension".into(),
                    ));
                }
                if split.lambda == 0.0 {
                    log::warn!("lambda = 0: the linear part carries no diffusion");
                }
                match &disc.differ {
                    Differ::Spectral(s) => LinearRep::Symbol(Arc::new(symbol_from(s, split))),
                    Differ::FiniteDiff(_) => LinearRep::Kron(Arc::new(build_fd_kron(
                        &disc.grid,
                        split.lambda,
                        &split.a_max,
                        &split.beta,
                    )?)),
                }
            }
        };
        Ok(Self {
            disc,
            splitting,
            linear,
        })
    }

    /// Accelerated splitting at `lambda` with nodal `a^max` and `β`.
    pub fn accelerated(disc: Arc<Discretization>, lambda: f64) -> Result<Self> {
        let split = disc.split_config(lambda)?;
        Self::new(disc, Splitting::Accelerated(split))
    }

    pub fn original(disc: Arc<Discretization>) -> Self {
        Self {
            disc,
            splitting: Splitting::Original,
            linear: LinearRep::Full,
        }
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn splitting(&self) -> &Splitting {
        &self.splitting
    }

    pub fn symbol(&self) -> Option<Arc<Vec<Complex64>>> {
        match &self.linear {
            LinearRep::Symbol(s) => Some(s.clone()),
            _ => None,
        }
    }

    pub fn kronecker(&self) -> Option<Arc<KroneckerSum>> {
        match &self.linear {
            LinearRep::Kron(k) => Some(k.clone()),
            _ => None,
        }
    }

    fn reaction_field(&self, t: f64, u: &Field) -> Field {
        match self.disc.reaction(t, u) {
            Some(r) => Field::from_vec(u.shape(), r).expect("grid-shaped"),
            None => Field::zeros(u.shape()),
        }
    }
}

impl SemilinearSystem for SplitSystem {
    fn shape(&self) -> &[usize] {
        self.disc.grid.shape()
    }

    fn rhs(&self, t: f64, u: &Field) -> Result<Field> {
        self.disc.full_operator(u, t)
    }

    fn apply_linear(&self, u: &Field) -> Result<Field> {
        u.ensure_shape(self.shape())?;
        match &self.linear {
            LinearRep::Symbol(sym) => {
                let fft = self.disc.transform().expect("symbol implies spectral");
                let uhat = u.spectrum_with(|d| fft.forward(d));
                let spec = uhat.iter().zip(sym.iter()).map(|(c, s)| c * s).collect();
                Field::from_vec(self.shape(), fft.inverse(spec))
            }
            LinearRep::Kron(k) => k.matvec(u),
            LinearRep::Full => self.disc.linear_part(u),
        }
    }

    fn nonlinear(&self, t: f64, u: &Field) -> Result<Field> {
        match &self.linear {
            LinearRep::Symbol(sym) => self.disc.residual_with_symbol(u, t, sym),
            _ => Ok(self.rhs_and_nonlinear(t, u)?.1),
        }
    }

    fn rhs_and_nonlinear(&self, t: f64, u: &Field) -> Result<(Field, Field)> {
        let f = self.rhs(t, u)?;
        let g = match self.linear {
            LinearRep::Full => self.reaction_field(t, u),
            _ => {
                let au = self.apply_linear(u)?;
                Field::lincomb(&[(1.0, &f), (-1.0, &au)])
            }
        };
        Ok((f, g))
    }

    fn jacobian_matvec(&self, t: f64, u: &Field, v: &Field) -> Result<Field> {
        self.disc.jacobian_matvec(u, v, t)
    }

    fn is_autonomous(&self) -> bool {
        self.disc.problem.autonomous
    }
}

//! Engines applying `e^{τA}`, `φ_1(τA)`, `φ_2(τA)` and `(I − θτA)^{-1}`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kron::{mode_product, KroneckerSum};
use crate::linalg::{identity, Lu};
use crate::ops::{Discretization, SplitSystem};
use crate::phi::{expm_dense, phi_scalar, phim_dense};
use crate::system::SemilinearSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionKind {
    Exp,
    Phi1,
    Phi2,
    /// `(I − θτA)^{-1}`
    Solve(f64),
}

impl ActionKind {
    pub fn label(self) -> &'static str {
        match self {
            ActionKind::Exp => "exp",
            ActionKind::Phi1 => "phi1",
            ActionKind::Phi2 => "phi2",
            ActionKind::Solve(_) => "shifted_solve",
        }
    }

    fn cache_key(self, tau: f64) -> (u8, u64, u64) {
        match self {
            ActionKind::Exp => (0, tau.to_bits(), 0),
            ActionKind::Phi1 => (1, tau.to_bits(), 0),
            ActionKind::Phi2 => (2, tau.to_bits(), 0),
            ActionKind::Solve(theta) => (3, tau.to_bits(), theta.to_bits()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Fourier,
    Kron,
    Dense,
    Krylov,
}

impl BackendKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(Self::Fourier),
            "kron" => Ok(Self::Kron),
            "dense" => Ok(Self::Dense),
            "krylov" => Ok(Self::Krylov),
            _ => Err(Error::Parse(format!("unknown backend '{s}'"))),
        }
    }
}

pub trait LinearAction: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, kind: ActionKind) -> bool;
    fn apply(&self, kind: ActionKind, tau: f64, u: &Field) -> Result<Field>;
}

fn unsupported(backend: &'static str, kind: ActionKind) -> Error {
    Error::Unsupported {
        backend,
        capability: kind.label(),
    }
}

fn multiplier(kind: ActionKind, tau: f64, s: Complex64) -> Result<Complex64> {
    let z = s * tau;
    Ok(match kind {
        ActionKind::Exp => z.exp(),
        ActionKind::Phi1 => phi_scalar(1, z),
        ActionKind::Phi2 => phi_scalar(2, z),
        ActionKind::Solve(theta) => {
            let den = Complex64::new(1.0, 0.0) - z * theta;
            if den.norm() == 0.0 {
                return Err(Error::Singular);
            }
            den.inv()
        }
    })
}

/// Pointwise multiplication of the spectrum of `u` by `f(τ s_k)`.
pub fn fourier_apply(
    disc: &Discretization,
    kind: ActionKind,
    symbol: &[Complex64],
    tau: f64,
    u: &Field,
) -> Result<Field> {
    let fft = disc.transform().ok_or(unsupported("fourier", kind))?;
    let uhat = disc.spectrum(u)?;
    if symbol.len() != uhat.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![uhat.len()],
            got: vec![symbol.len()],
        });
    }
    let spec = uhat
        .iter()
        .zip(symbol)
        .map(|(c, &s)| Ok(c * multiplier(kind, tau, s)?))
        .collect::<Result<Vec<_>>>()?;
    Field::from_vec(u.shape(), fft.inverse(spec))
}

type MultiplierCache = HashMap<(u8, u64, u64), Arc<Vec<Complex64>>>;

/// Fourier-multiplier backend with per-`τ` multiplier caching.
pub struct FourierAction {
    disc: Arc<Discretization>,
    symbol: Arc<Vec<Complex64>>,
    cache: Mutex<MultiplierCache>,
}

impl fmt::Debug for FourierAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierAction")
            .field("modes", &self.symbol.len())
            .finish()
    }
}

impl FourierAction {
    pub fn new(disc: Arc<Discretization>, symbol: Arc<Vec<Complex64>>) -> Result<Self> {
        let fft = disc.transform().ok_or(Error::Unsupported {
            backend: "fourier",
            capability: "non-periodic grid",
        })?;
        if fft.spectrum_len() != symbol.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![fft.spectrum_len()],
                got: vec![symbol.len()],
            });
        }
        Ok(Self {
            disc,
            symbol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn multipliers(&self, kind: ActionKind, tau: f64) -> Result<Arc<Vec<Complex64>>> {
        let key = kind.cache_key(tau);
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let m: Vec<Complex64> = self
            .symbol
            .iter()
            .map(|&s| multiplier(kind, tau, s))
            .collect::<Result<_>>()?;
        let m = Arc::new(m);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 64 {
            cache.clear();
        }
        cache.insert(key, m.clone());
        Ok(m)
    }
}

impl LinearAction for FourierAction {
    fn name(&self) -> &'static str {
        "fourier"
    }

    fn supports(&self, _kind: ActionKind) -> bool {
        true
    }

    fn apply(&self, kind: ActionKind, tau: f64, u: &Field) -> Result<Field> {
        let m = self.multipliers(kind, tau)?;
        let uhat = self.disc.spectrum(u)?;
        let spec = uhat.iter().zip(m.iter()).map(|(c, m)| c * m).collect();
        let fft = self.disc.transform().expect("checked at construction");
        Field::from_vec(u.shape(), fft.inverse(spec))
    }
}

/// `E_μ = e^{τ A_μ}` for one step size.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    pub tau: f64,
    pub factors: Vec<Array2<f64>>,
}

impl TuckerFactors {
    pub fn new(kron: &KroneckerSum, tau: f64) -> Result<Self> {
        let factors = kron
            .factors()
            .iter()
            .map(|a| expm_dense(&a.mapv(|x| x * tau).view()))
            .collect::<Result<_>>()?;
        Ok(Self { tau, factors })
    }

    /// `V ×_1 E_1 ×_2 … ×_d E_d`
    pub fn apply(&self, u: &Field) -> Result<Field> {
        let shape: Vec<usize> = self.factors.iter().map(|f| f.nrows()).collect();
        u.ensure_shape(&shape)?;
        let mut data = u.as_slice().to_vec();
        for (mu, e) in self.factors.iter().enumerate() {
            data = mode_product(&data, &shape, mu, &e.view());
        }
        Field::from_vec(&shape, data)
    }
}

/// `e^{τ(A_1 ⊕ … ⊕ A_d)} u` through per-direction exponentials.
pub fn mu_mode_exp(kron: &KroneckerSum, tau: f64, u: &Field) -> Result<Field> {
    u.ensure_shape(&kron.shape())?;
    TuckerFactors::new(kron, tau)?.apply(u)
}

/// μ-mode backend; only the exponential is available.
#[derive(Debug)]
pub struct KronAction {
    kron: Arc<KroneckerSum>,
    cache: Mutex<HashMap<u64, Arc<TuckerFactors>>>,
}

impl KronAction {
    pub fn new(kron: Arc<KroneckerSum>) -> Self {
        Self {
            kron,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn factors(&self, tau: f64) -> Result<Arc<TuckerFactors>> {
        if let Some(f) = self.cache.lock().unwrap().get(&tau.to_bits()) {
            return Ok(f.clone());
        }
        let f = Arc::new(TuckerFactors::new(&self.kron, tau)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() > 16 {
            cache.clear();
        }
        cache.insert(tau.to_bits(), f.clone());
        Ok(f)
    }
}

impl LinearAction for KronAction {
    fn name(&self) -> &'static str {
        "kron"
    }

    fn supports(&self, kind: ActionKind) -> bool {
        kind == ActionKind::Exp
    }

    fn apply(&self, kind: ActionKind, tau: f64, u: &Field) -> Result<Field> {
        if kind != ActionKind::Exp {
            return Err(unsupported("kron", kind));
        }
        self.factors(tau)?.apply(u)
    }
}

/// Largest operator the dense backend assembles.
pub const DENSE_LIMIT: usize = 4096;

/// Matrix of a linear map on fields of `shape`, column by column.
pub fn assemble_operator<F>(shape: &[usize], map: F) -> Result<Array2<f64>>
where
    F: Fn(&Field) -> Result<Field>,
{
    let n: usize = shape.iter().product();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            unknowns: n,
            limit: DENSE_LIMIT,
        });
    }
    let mut a = Array2::zeros((n, n));
    let mut e = Field::zeros(shape);
    for j in 0..n {
        e.as_slice_mut()[j] = 1.0;
        let col = map(&e)?;
        a.column_mut(j)
            .assign(&Array1::from(col.as_slice().to_vec()));
        e.as_slice_mut()[j] = 0.0;
    }
    Ok(a)
}

fn dense_function(kind: ActionKind, a: &ArrayView2<f64>, tau: f64) -> Result<Array2<f64>> {
    let ta = a.mapv(|x| x * tau);
    match kind {
        ActionKind::Exp => expm_dense(&ta.view()),
        ActionKind::Phi1 => phim_dense(1, &ta.view()),
        ActionKind::Phi2 => phim_dense(2, &ta.view()),
        ActionKind::Solve(theta) => {
            let n = a.nrows();
            let m = identity::<f64>(n) - ta.mapv(|x| x * theta);
            Ok(Lu::factor(m)?.solve_mat(&identity::<f64>(n).view()))
        }
    }
}

/// Reference semantics: the matrix function is formed densely.
pub fn dense_apply(kind: ActionKind, a: &ArrayView2<f64>, tau: f64, u: &Field) -> Result<Field> {
    if a.nrows() > DENSE_LIMIT {
        return Err(Error::TooLarge {
            unknowns: a.nrows(),
            limit: DENSE_LIMIT,
        });
    }
    if a.nrows() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![a.nrows()],
            got: u.shape().to_vec(),
        });
    }
    let f = dense_function(kind, a, tau)?;
    let v = f.dot(&ArrayView2::from_shape((u.len(), 1), u.as_slice()).unwrap());
    Field::from_vec(u.shape(), v.into_raw_vec_and_offset().0)
}

type MatrixCache = Mutex<HashMap<(u8, u64, u64), Arc<Array2<f64>>>>;

/// Dense backend caching each matrix function it has formed.
#[derive(Debug)]
pub struct DenseAction {
    a: Array2<f64>,
    cache: MatrixCache,
}

impl DenseAction {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        crate::linalg::ensure_square(&a.view())?;
        if a.nrows() > DENSE_LIMIT {
            return Err(Error::TooLarge {
                unknowns: a.nrows(),
                limit: DENSE_LIMIT,
            });
        }
        Ok(Self {
            a,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }
}

impl LinearAction for DenseAction {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn supports(&self, _kind: ActionKind) -> bool {
        true
    }

    fn apply(&self, kind: ActionKind, tau: f64, u: &Field) -> Result<Field> {
        if self.a.nrows() != u.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.a.nrows()],
                got: u.shape().to_vec(),
            });
        }
        let key = kind.cache_key(tau);
        let cached = self.cache.lock().unwrap().get(&key).cloned();
        let f = match cached {
            Some(f) => f,
            None => {
                let f = Arc::new(dense_function(kind, &self.a.view(), tau)?);
                self.cache.lock().unwrap().insert(key, f.clone());
                f
            }
        };
        let v = f.dot(&ArrayView2::from_shape((u.len(), 1), u.as_slice()).unwrap());
        Field::from_vec(u.shape(), v.into_raw_vec_and_offset().0)
    }
}

/// Arnoldi dimension cap.
pub const KRYLOV_MAX_DIM: usize = 128;

/// Dimensions at which the a-posteriori estimate is evaluated.
fn check_point(m: usize) -> bool {
    m <= 8 || m.is_multiple_of(4) || m == KRYLOV_MAX_DIM
}

/// `φ_k(τA) v` for `k ∈ {0, 1, 2}` (`0` is the exponential) by Arnoldi.
///
/// Stops once `β τ h_{m+1,m} |e_mᵀ φ_{k+1}(τH_m) e_1| ≤ tol · β` or the
/// basis reaches [`KRYLOV_MAX_DIM`].
pub fn krylov_phi_action<F>(
    matvec: F,
    kind: ActionKind,
    tau: f64,
    v: &Field,
    tol: f64,
) -> Result<Field>
where
    F: Fn(&Field) -> Result<Field>,
{
    let k = match kind {
        ActionKind::Exp => 0,
        ActionKind::Phi1 => 1,
        ActionKind::Phi2 => 2,
        ActionKind::Solve(_) => return Err(unsupported("krylov", kind)),
    };
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(
            "Krylov tolerance must be positive".into(),
        ));
    }
    let beta = v.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    if beta == 0.0 {
        return Ok(Field::zeros(v.shape()));
    }
    let shape = v.shape().to_vec();
    let mut basis: Vec<Vec<f64>> = vec![v.as_slice().iter().map(|x| x / beta).collect()];
    let mut h = Array2::<f64>::zeros((KRYLOV_MAX_DIM + 1, KRYLOV_MAX_DIM));
    let mut estimate = f64::INFINITY;

    for j in 0..KRYLOV_MAX_DIM {
        let mut w = matvec(&Field::from_vec(&shape, basis[j].clone())?)?
            .as_slice()
            .to_vec();
        for (i, q) in basis.iter().enumerate() {
            let c: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            h[[i, j]] = c;
            for (a, b) in w.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
        let hn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        h[[j + 1, j]] = hn;
        let m = j + 1;
        let hnorm = h.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let breakdown = hn <= 1e-14 * hnorm.max(1e-300);
        if breakdown || check_point(m) {
            let coeffs = small_phi(&h.slice(ndarray::s![0..m, 0..m]), tau, k)?;
            estimate = if breakdown {
                0.0
            } else {
                tau * hn * coeffs[k + 1][m - 1].abs()
            };
            if breakdown || estimate <= tol {
                let c = &coeffs[k];
                let mut out = vec![0.0; v.len()];
                for (q, &ci) in basis.iter().zip(c.iter()) {
                    for (o, b) in out.iter_mut().zip(q) {
                        *o += beta * ci * b;
                    }
                }
                log::trace!("krylov converged at m = {m}, estimate {estimate:.3e}");
                return Field::from_vec(&shape, out);
            }
        }
        basis.push(w.iter().map(|x| x / hn).collect());
    }
    Err(Error::KrylovNoConvergence {
        iterations: KRYLOV_MAX_DIM,
        estimate,
    })
}

/// `φ_j(τH) e_1` for `j = 0..=k+1` from one augmented exponential.
fn small_phi(h: &ArrayView2<f64>, tau: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    let m = h.nrows();
    let p = k + 1;
    let mut aug = Array2::<f64>::zeros((m + p, m + p));
    aug.slice_mut(ndarray::s![0..m, 0..m])
        .assign(&h.mapv(|x| x * tau));
    aug[[0, m]] = 1.0;
    for i in 1..p {
        aug[[m + i - 1, m + i]] = 1.0;
    }
    let e = expm_dense(&aug.view())?;
    let mut out = Vec::with_capacity(p + 1);
    out.push(e.column(0).slice(ndarray::s![0..m]).to_vec());
    for j in 1..=p {
        out.push(e.column(m + j - 1).slice(ndarray::s![0..m]).to_vec());
    }
    Ok(out)
}

type Matvec = Arc<dyn Fn(&Field) -> Result<Field> + Send + Sync>;

/// Arnoldi backend around an arbitrary linear map.
pub struct KrylovAction {
    matvec: Matvec,
    tol: f64,
}

impl fmt::Debug for KrylovAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KrylovAction")
            .field("tol", &self.tol)
            .finish()
    }
}

impl KrylovAction {
    pub fn new(matvec: Matvec, tol: f64) -> Self {
        Self { matvec, tol }
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}

impl LinearAction for KrylovAction {
    fn name(&self) -> &'static str {
        "krylov"
    }

    fn supports(&self, kind: ActionKind) -> bool {
        !matches!(kind, ActionKind::Solve(_))
    }

    fn apply(&self, kind: ActionKind, tau: f64, u: &Field) -> Result<Field> {
        krylov_phi_action(|x| (self.matvec)(x), kind, tau, u, self.tol)
    }
}

/// Backend of the requested kind for the linear part of `system`.
pub fn build_action(
    system: &Arc<SplitSystem>,
    kind: BackendKind,
    krylov_tol: f64,
) -> Result<Box<dyn LinearAction>> {
    Ok(match kind {
        BackendKind::Fourier => {
            let symbol = system.symbol().ok_or(Error::Unsupported {
                backend: "fourier",
                capability: "operator without a Fourier symbol",
            })?;
            Box::new(FourierAction::new(system.discretization().clone(), symbol)?)
        }
        BackendKind::Kron => {
            let k = system.kronecker().ok_or(Error::Unsupported {
                backend: "kron",
                capability: "operator without Kronecker structure",
            })?;
            Box::new(KronAction::new(k))
        }
        BackendKind::Dense => {
            let a = assemble_operator(system.shape(), |x| system.apply_linear(x))?;
            Box::new(DenseAction::new(a)?)
        }
        BackendKind::Krylov => {
            let sys = system.clone();
            Box::new(KrylovAction::new(
                Arc::new(move |x: &Field| sys.apply_linear(x)),
                krylov_tol,
            ))
        }
    })
}

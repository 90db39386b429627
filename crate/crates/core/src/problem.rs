//! Continuous problem data and the named presets.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec};

/// Scalar coefficient of position.
pub type Coefficient = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `r(t, x, u)` or its `u`-derivative.
pub type Reaction = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    /// `∇·(a∇u) + ∇·(b u) + r`
    Divergence,
    /// `Σ a_μ ∂²_μ u + Σ b_μ ∂_μ u + r`
    NonDivergence,
}

#[derive(Clone)]
pub struct ProblemDef {
    pub name: String,
    pub form: OperatorForm,
    /// Diagonal diffusion entries `a_μμ`.
    pub diffusion: Vec<Coefficient>,
    /// Velocity components; `None` is identically zero.
    pub velocity: Vec<Option<Coefficient>>,
    pub reaction: Option<Reaction>,
    pub reaction_du: Option<Reaction>,
    /// The reaction does not depend on `t`.
    pub autonomous: bool,
    pub initial: Coefficient,
    pub final_time: f64,
    pub domain: Vec<(f64, f64)>,
    pub boundary: Boundary,
    pub default_n: usize,
}

impl fmt::Debug for ProblemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("form", &self.form)
            .field("dim", &self.dim())
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

fn coef(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

fn reaction(f: impl Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static) -> Reaction {
    Arc::new(f)
}

impl ProblemDef {
    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        GridSpec::new(&vec![n; self.dim()], &self.domain, self.boundary)
    }

    pub fn default_grid(&self) -> Result<GridSpec> {
        self.grid(self.default_n)
    }

    /// Pure diffusion with constant coefficients and nothing else; handy in tests.
    pub fn constant_diffusion(
        a: &[f64],
        domain: &[(f64, f64)],
        boundary: Boundary,
        initial: Coefficient,
    ) -> Self {
        Self {
            name: "constant-diffusion".into(),
            form: OperatorForm::Divergence,
            diffusion: a.iter().map(|&c| coef(move |_| c)).collect(),
            velocity: vec![None; a.len()],
            reaction: None,
            reaction_du: None,
            autonomous: true,
            initial,
            final_time: 1.0,
            domain: domain.to_vec(),
            boundary,
            default_n: 32,
        }
    }
}

fn a_1d(x: &[f64]) -> f64 {
    1.0 + 10.0 * x[0].sin().powi(2)
}

/// `u_t = a(x) u_xx` on `(−π, π)`, `a = 1 + 10 sin² x`, `u0 = sin x`.
pub fn lin1d() -> ProblemDef {
    ProblemDef {
        name: "lin1d".into(),
        form: OperatorForm::NonDivergence,
        diffusion: vec![coef(a_1d)],
        velocity: vec![None],
        reaction: None,
        reaction_du: None,
        autonomous: true,
        initial: coef(|x| x[0].sin()),
        final_time: 1.0 / 40.0,
        domain: vec![(-PI, PI)],
        boundary: Boundary::Periodic,
        default_n: 4096,
    }
}

/// `u_t = (a u_x)_x + u(1 − u)` with the coefficient and data of [`lin1d`].
pub fn nl1d() -> ProblemDef {
    ProblemDef {
        name: "nl1d".into(),
        form: OperatorForm::Divergence,
        diffusion: vec![coef(a_1d)],
        velocity: vec![None],
        reaction: Some(reaction(|_, _, u| u * (1.0 - u))),
        reaction_du: Some(reaction(|_, _, u| 1.0 - 2.0 * u)),
        autonomous: true,
        initial: coef(|x| x[0].sin()),
        final_time: 0.1,
        domain: vec![(-PI, PI)],
        boundary: Boundary::Periodic,
        default_n: 1024,
    }
}

/// Anisotropic periodic problem on `(−3π, 3π)²` in divergence form.
pub fn adr2d() -> ProblemDef {
    ProblemDef {
        name: "adr2d".into(),
        form: OperatorForm::Divergence,
        diffusion: vec![
            coef(|x| 0.5 + (x[0].sin() * x[1].sin()).powi(2) / 6.0),
            coef(|x| 0.5 + (x[0].cos() * x[1].cos()).powi(2) / 6.0),
        ],
        velocity: vec![
            Some(coef(|x| x[0].sin().powi(2) / 5.0)),
            Some(coef(|x| x[1].sin().powi(2) / 5.0)),
        ],
        reaction: Some(reaction(|_, _, u| 0.25 * u * (1.0 - u))),
        reaction_du: Some(reaction(|_, _, u| 0.25 * (1.0 - 2.0 * u))),
        autonomous: true,
        initial: coef(|x| (-(x[0] * x[0] + x[1] * x[1])).exp()),
        final_time: 4.0,
        domain: vec![(-3.0 * PI, 3.0 * PI); 2],
        boundary: Boundary::Periodic,
        default_n: 256,
    }
}

/// `u_t = a(x) Δu + b Σ ∂_μ u + u(1 + u²)` on the unit cube with Dirichlet
/// faces at 0 and Neumann faces at 1.
pub fn adr3d(b: f64) -> ProblemDef {
    let vel = move |_: &[f64]| b;
    ProblemDef {
        name: format!("adr3d(b={b})"),
        form: OperatorForm::NonDivergence,
        diffusion: (0..3)
            .map(|_| {
                coef(|x| 0.1 * (-(x.iter().map(|&c| (c - 0.5) * (c - 0.5)).sum::<f64>())).exp())
            })
            .collect(),
        velocity: (0..3).map(|_| Some(coef(vel))).collect(),
        reaction: Some(reaction(|_, _, u| u * (1.0 + u * u))),
        reaction_du: Some(reaction(|_, _, u| 1.0 + 3.0 * u * u)),
        autonomous: true,
        initial: coef(|x| {
            let c = 27.0 / 4.0;
            x.iter().map(|&t| c * t * (1.0 - t) * (1.0 - t)).product()
        }),
        final_time: 0.25,
        domain: vec![(0.0, 1.0); 3],
        boundary: Boundary::DirichletNeumannMix3D,
        default_n: 32,
    }
}

/// Looks up `lin1d`, `nl1d`, `adr2d` or `adr3d` (the latter needs `b`,
/// default −0.01).
pub fn preset(name: &str, b: Option<f64>) -> Result<ProblemDef> {
    match name {
        "lin1d" => Ok(lin1d()),
        "nl1d" => Ok(nl1d()),
        "adr2d" => Ok(adr2d()),
        "adr3d" => Ok(adr3d(b.unwrap_or(-0.01))),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

pub const PRESETS: [&str; 4] = ["lin1d", "nl1d", "adr2d", "adr3d"];

/// `1/(2e)`, the stabilized Euler threshold.
pub const ONE_OVER_TWO_E: f64 = 0.5 / E;

//! One-step integrators written against [`LinearAction`] and
//! [`SemilinearSystem`], and a constant-step driver.

use crate::backends::{krylov_phi_action, ActionKind, LinearAction};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scheme::{SchemeId, SchemeSpec};
use crate::system::SemilinearSystem;

/// Any entry beyond this magnitude counts as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e10;

/// Matrix functions a scheme needs from its backend.
pub fn required_capabilities(id: SchemeId) -> &'static [ActionKind] {
    match id {
        SchemeId::Ee | SchemeId::Erk2p1 => &[ActionKind::Phi1],
        SchemeId::Erk2p2 => &[ActionKind::Phi1, ActionKind::Phi2],
        SchemeId::Le | SchemeId::Sle | SchemeId::L2a | SchemeId::L2b | SchemeId::Sl2 => {
            &[ActionKind::Exp]
        }
        SchemeId::Bfe => &[ActionKind::Solve(1.0)],
        SchemeId::Imex2 => &[ActionKind::Solve(0.5)],
        SchemeId::Erbe => &[],
    }
}

pub fn check_capabilities(id: SchemeId, action: &dyn LinearAction) -> Result<()> {
    for &k in required_capabilities(id) {
        if !action.supports(k) {
            return Err(Error::CapabilityMismatch {
                scheme: id.name(),
                backend: action.name(),
                capability: k.label(),
            });
        }
    }
    Ok(())
}

/// Krylov tolerance used for the Rosenbrock scheme: `τ³/100`.
pub fn erbe_tolerance(tau: f64) -> f64 {
    tau.powi(3) / 100.0
}

type Sys<'a> = &'a dyn SemilinearSystem;
type Act<'a> = &'a dyn LinearAction;

pub fn step_ee(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let f = sys.rhs(t, u)?;
    let mut out = act.apply(ActionKind::Phi1, tau, &f)?;
    out.scale(tau);
    out.axpy(1.0, u);
    Ok(out)
}

pub fn step_le(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let g = sys.nonlinear(t, u)?;
    act.apply(
        ActionKind::Exp,
        tau,
        &Field::lincomb(&[(1.0, u), (tau, &g)]),
    )
}

pub fn step_sle(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let f = sys.rhs(t, u)?;
    let mut out = act.apply(ActionKind::Exp, tau, &f)?;
    out.scale(tau);
    out.axpy(1.0, u);
    Ok(out)
}

pub fn step_l2a(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let g0 = sys.nonlinear(t, u)?;
    let stage = act.apply(
        ActionKind::Exp,
        0.5 * tau,
        &Field::lincomb(&[(1.0, u), (0.5 * tau, &g0)]),
    )?;
    let g1 = sys.nonlinear(t + 0.5 * tau, &stage)?;
    let mut out = act.apply(ActionKind::Exp, tau, u)?;
    out.axpy(tau, &act.apply(ActionKind::Exp, 0.5 * tau, &g1)?);
    Ok(out)
}

pub fn step_l2b(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let g0 = sys.nonlinear(t, u)?;
    let stage = act.apply(
        ActionKind::Exp,
        tau,
        &Field::lincomb(&[(1.0, u), (tau, &g0)]),
    )?;
    let g1 = sys.nonlinear(t + tau, &stage)?;
    let mut out = act.apply(
        ActionKind::Exp,
        tau,
        &Field::lincomb(&[(1.0, u), (0.5 * tau, &g0)]),
    )?;
    out.axpy(0.5 * tau, &g1);
    Ok(out)
}

pub fn step_sl2(sys: Sys, act: Act, u: &Field, t: f64, tau: f64, alpha: f64) -> Result<Field> {
    let (f, g0) = sys.rhs_and_nonlinear(t, u)?;
    let mut stage = act.apply(ActionKind::Exp, alpha * tau, &f)?;
    stage.scale(alpha * tau);
    stage.axpy(1.0, u);
    let g1 = sys.nonlinear(t + alpha * tau, &stage)?;
    let mut out = u.clone();
    out.axpy(tau, &act.apply(ActionKind::Exp, 0.5 * tau, &f)?);
    let dg = Field::lincomb(&[(1.0, &g1), (-1.0, &g0)]);
    out.axpy(tau / (2.0 * alpha), &act.apply(ActionKind::Exp, tau, &dg)?);
    Ok(out)
}

fn erk2(sys: Sys, act: Act, u: &Field, t: f64, tau: f64, c2: f64, phi2: bool) -> Result<Field> {
    let (f, g0) = sys.rhs_and_nonlinear(t, u)?;
    let mut stage = act.apply(ActionKind::Phi1, c2 * tau, &f)?;
    stage.scale(c2 * tau);
    stage.axpy(1.0, u);
    let g1 = sys.nonlinear(t + c2 * tau, &stage)?;
    let dg = Field::lincomb(&[(1.0, &g1), (-1.0, &g0)]);
    let mut out = u.clone();
    out.axpy(tau, &act.apply(ActionKind::Phi1, tau, &f)?);
    if phi2 {
        out.axpy(tau / c2, &act.apply(ActionKind::Phi2, tau, &dg)?);
    } else {
        out.axpy(tau / (2.0 * c2), &act.apply(ActionKind::Phi1, tau, &dg)?);
    }
    Ok(out)
}

pub fn step_erk2p2(sys: Sys, act: Act, u: &Field, t: f64, tau: f64, c2: f64) -> Result<Field> {
    erk2(sys, act, u, t, tau, c2, true)
}

pub fn step_erk2p1(sys: Sys, act: Act, u: &Field, t: f64, tau: f64, c2: f64) -> Result<Field> {
    erk2(sys, act, u, t, tau, c2, false)
}

/// `u + τ φ_1(τ J) F(u)`, the Jacobian action going through Arnoldi.
pub fn step_erbe(sys: Sys, u: &Field, t: f64, tau: f64, tol: f64) -> Result<Field> {
    if !sys.is_autonomous() {
        return Err(Error::InvalidArgument(
            "erbe applies to autonomous problems only".into(),
        ));
    }
    let f = sys.rhs(t, u)?;
    let mut out = krylov_phi_action(
        |v| sys.jacobian_matvec(t, u, v),
        ActionKind::Phi1,
        tau,
        &f,
        tol,
    )?;
    out.scale(tau);
    out.axpy(1.0, u);
    Ok(out)
}

pub fn step_bfe(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let g = sys.nonlinear(t, u)?;
    act.apply(
        ActionKind::Solve(1.0),
        tau,
        &Field::lincomb(&[(1.0, u), (tau, &g)]),
    )
}

pub fn step_imex2(sys: Sys, act: Act, u: &Field, t: f64, tau: f64) -> Result<Field> {
    let g0 = sys.nonlinear(t, u)?;
    let stage = act.apply(
        ActionKind::Solve(0.5),
        tau,
        &Field::lincomb(&[(1.0, u), (0.5 * tau, &g0)]),
    )?;
    let g1 = sys.nonlinear(t + 0.5 * tau, &stage)?;
    let au = sys.apply_linear(u)?;
    let rhs = Field::lincomb(&[(1.0, u), (0.5 * tau, &au), (tau, &g1)]);
    act.apply(ActionKind::Solve(0.5), tau, &rhs)
}

/// A scheme bound to a system and a backend.
pub struct Stepper<'a> {
    scheme: SchemeSpec,
    system: Sys<'a>,
    action: Act<'a>,
    krylov_tol: Option<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(scheme: SchemeSpec, system: Sys<'a>, action: Act<'a>) -> Result<Self> {
        check_capabilities(scheme.id, action)?;
        if scheme.id == SchemeId::Erbe && !system.is_autonomous() {
            return Err(Error::InvalidArgument(
                "erbe applies to autonomous problems only".into(),
            ));
        }
        Ok(Self {
            scheme,
            system,
            action,
            krylov_tol: None,
        })
    }

    /// Overrides the Rosenbrock Krylov tolerance (default `τ³/100`).
    pub fn with_krylov_tolerance(mut self, tol: f64) -> Self {
        self.krylov_tol = Some(tol);
        self
    }

    pub fn scheme(&self) -> &SchemeSpec {
        &self.scheme
    }

    pub fn step(&self, u: &Field, t: f64, tau: f64) -> Result<Field> {
        let (s, a) = (self.system, self.action);
        match self.scheme.id {
            SchemeId::Ee => step_ee(s, a, u, t, tau),
            SchemeId::Le => step_le(s, a, u, t, tau),
            SchemeId::Sle => step_sle(s, a, u, t, tau),
            SchemeId::L2a => step_l2a(s, a, u, t, tau),
            SchemeId::L2b => step_l2b(s, a, u, t, tau),
            SchemeId::Sl2 => step_sl2(s, a, u, t, tau, self.scheme.alpha()),
            SchemeId::Erk2p2 => step_erk2p2(s, a, u, t, tau, self.scheme.c2()),
            SchemeId::Erk2p1 => step_erk2p1(s, a, u, t, tau, self.scheme.c2()),
            SchemeId::Erbe => step_erbe(
                s,
                u,
                t,
                tau,
                self.krylov_tol.unwrap_or_else(|| erbe_tolerance(tau)),
            ),
            SchemeId::Bfe => step_bfe(s, a, u, t, tau),
            SchemeId::Imex2 => step_imex2(s, a, u, t, tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationPlan {
    pub scheme: SchemeSpec,
    pub steps: usize,
    pub final_time: f64,
}

impl IntegrationPlan {
    pub fn new(scheme: SchemeSpec, steps: usize, final_time: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "at least one step is required".into(),
            ));
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "final time {final_time} must be positive"
            )));
        }
        Ok(Self {
            scheme,
            steps,
            final_time,
        })
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }
}

#[derive(Debug, Clone)]
pub struct Integration {
    /// `u(T)`, absent after a blow-up.
    pub solution: Option<Field>,
    /// Step index (1-based) at which the blow-up was detected.
    pub blowup_step: Option<usize>,
    /// Infinity norm after each completed step.
    pub max_norms: Vec<f64>,
}

impl Integration {
    pub fn blew_up(&self) -> bool {
        self.blowup_step.is_some()
    }
}

/// Runs `plan.steps` steps from `t = 0`, stopping at the first blow-up.
pub fn integrate(
    plan: &IntegrationPlan,
    system: &dyn SemilinearSystem,
    action: &dyn LinearAction,
    u0: &Field,
) -> Result<Integration> {
    integrate_with(plan, &Stepper::new(plan.scheme, system, action)?, u0)
}

pub fn integrate_with(
    plan: &IntegrationPlan,
    stepper: &Stepper,
    u0: &Field,
) -> Result<Integration> {
    u0.ensure_shape(stepper.system.shape())?;
    let tau = plan.tau();
    let mut u = u0.clone();
    let mut max_norms = Vec::with_capacity(plan.steps);
    for n in 0..plan.steps {
        let t = n as f64 * tau;
        u = stepper.step(&u, t, tau)?;
        let norm = u.max_abs();
        max_norms.push(norm);
        if !(norm <= BLOWUP_THRESHOLD) {
            log::debug!("{} blew up at step {}", plan.scheme.id, n + 1);
            return Ok(Integration {
                solution: None,
                blowup_step: Some(n + 1),
                max_norms,
            });
        }
    }
    Ok(Integration {
        solution: Some(u),
        blowup_step: None,
        max_norms,
    })
}

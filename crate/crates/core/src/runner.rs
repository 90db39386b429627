//! Single simulations: splitting, backend choice and timing.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{build_action, BackendKind, LinearAction};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::ops::{Discretization, SplitSystem};
use crate::scheme::{SchemeId, SchemeSpec};
use crate::steppers::{
    integrate_with, required_capabilities, Integration, IntegrationPlan, Stepper,
};

/// Splitting fraction of reference runs, just above the L2B threshold.
pub const REFERENCE_LAMBDA: f64 = 0.31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Accelerated,
    Original,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Accelerated => "accelerated",
            Formulation::Original => "original",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "accelerated" => Ok(Self::Accelerated),
            "original" => Ok(Self::Original),
            _ => Err(Error::Parse(format!("unknown formulation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub scheme: SchemeSpec,
    pub formulation: Formulation,
    /// Ignored by the original formulation.
    pub lambda: f64,
    /// `None` picks Fourier on periodic grids and μ-mode otherwise.
    pub backend: Option<BackendKind>,
    pub steps: usize,
    pub final_time: f64,
}

impl RunSpec {
    pub fn accelerated(
        scheme: impl Into<SchemeSpec>,
        lambda: f64,
        steps: usize,
        final_time: f64,
    ) -> Self {
        Self {
            scheme: scheme.into(),
            formulation: Formulation::Accelerated,
            lambda,
            backend: None,
            steps,
            final_time,
        }
    }

    pub fn original(scheme: impl Into<SchemeSpec>, steps: usize, final_time: f64) -> Self {
        Self {
            scheme: scheme.into(),
            formulation: Formulation::Original,
            lambda: 1.0,
            backend: Some(BackendKind::Krylov),
            steps,
            final_time,
        }
    }

    /// `τ^{p+1} / 100`
    pub fn krylov_tolerance(&self) -> f64 {
        let tau = self.final_time / self.steps as f64;
        tau.powi(self.scheme.order() as i32 + 1) / 100.0
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub integration: Integration,
    /// Wall time of the stepping loop.
    pub seconds: f64,
    pub backend: &'static str,
}

/// System and backend for one run.
pub fn prepare(
    disc: &Arc<Discretization>,
    spec: &RunSpec,
) -> Result<(Arc<SplitSystem>, Box<dyn LinearAction>)> {
    let tol = spec.krylov_tolerance();
    match spec.formulation {
        Formulation::Original => {
            if matches!(spec.scheme.id, SchemeId::Bfe | SchemeId::Imex2) {
                return Err(Error::CapabilityMismatch {
                    scheme: spec.scheme.id.name(),
                    backend: "krylov",
                    capability: "shifted_solve",
                });
            }
            if let Some(b) = spec.backend {
                if b != BackendKind::Krylov {
                    return Err(Error::InvalidArgument(
                        "the original formulation runs on the krylov backend".into(),
                    ));
                }
            }
            let sys = Arc::new(SplitSystem::original(disc.clone()));
            let act = build_action(&sys, BackendKind::Krylov, tol)?;
            Ok((sys, act))
        }
        Formulation::Accelerated => {
            let sys = Arc::new(SplitSystem::accelerated(disc.clone(), spec.lambda)?);
            let kind = spec.backend.unwrap_or(if disc.is_spectral() {
                BackendKind::Fourier
            } else {
                BackendKind::Kron
            });
            let act = build_action(&sys, kind, tol)?;
            let needs_phi = required_capabilities(spec.scheme.id)
                .iter()
                .any(|&k| !act.supports(k));
            if needs_phi && kind == BackendKind::Kron && spec.backend.is_none() {
                log::info!(
                    "{} needs more than the exponential; using krylov",
                    spec.scheme.id
                );
                return Ok((sys.clone(), build_action(&sys, BackendKind::Krylov, tol)?));
            }
            Ok((sys, act))
        }
    }
}

pub fn simulate(disc: &Arc<Discretization>, spec: &RunSpec, u0: &Field) -> Result<Simulation> {
    let (sys, act) = prepare(disc, spec)?;
    let plan = IntegrationPlan::new(spec.scheme, spec.steps, spec.final_time)?;
    let stepper = Stepper::new(spec.scheme, sys.as_ref(), act.as_ref())?;
    let start = Instant::now();
    let integration = integrate_with(&plan, &stepper, u0)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(Simulation {
        integration,
        seconds,
        backend: act.name(),
    })
}

/// L2B at `steps` and `steps / 2`, combined by Richardson extrapolation.
pub fn reference_solution(
    disc: &Arc<Discretization>,
    steps: usize,
    final_time: f64,
) -> Result<Field> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "reference needs an even step count, got {steps}"
        )));
    }
    let u0 = disc.initial_field();
    let run = |m| -> Result<Field> {
        simulate(
            disc,
            &RunSpec::accelerated(SchemeId::L2b, REFERENCE_LAMBDA, m, final_time),
            &u0,
        )?
        .integration
        .solution
        .ok_or(Error::ScanFailed("reference solution blew up"))
    };
    let coarse = run(steps / 2)?;
    let fine = run(steps)?;
    Ok(Field::lincomb(&[(4.0 / 3.0, &fine), (-1.0 / 3.0, &coarse)]))
}

/// `max|u − ref| / max|ref|`
pub fn error_inf_rel(u: &Field, reference: &Field) -> Result<f64> {
    u.ensure_shape(reference.shape())?;
    let den = reference.max_abs();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "reference field is identically zero".into(),
        ));
    }
    let num = u
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .fold(0.0f64, |m, (a, b)| {
            if (a - b).is_nan() {
                f64::INFINITY
            } else {
                m.max((a - b).abs())
            }
        });
    Ok(num / den)
}

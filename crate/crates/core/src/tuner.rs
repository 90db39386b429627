//! Coarse-grid scan for the splitting fraction λ.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ops::Discretization;
use crate::problem::ProblemDef;
use crate::runner::{error_inf_rel, reference_solution, simulate, RunSpec};
use crate::scheme::{SchemeId, SchemeSpec};
use crate::stability::lambda_threshold;

/// Reference steps per scan step.
pub const REFERENCE_FACTOR: usize = 8;
pub const ADMISSIBILITY_SLACK: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub scheme: SchemeSpec,
    pub lambdas: Vec<f64>,
    /// Infinite where the run blew up.
    pub errors: Vec<f64>,
    pub lambda_best: f64,
    pub grid_shape: Vec<usize>,
    pub steps: usize,
    pub reference_steps: usize,
    pub seconds: f64,
}

impl ScanReport {
    pub fn blowups(&self) -> impl Iterator<Item = bool> + '_ {
        self.errors.iter().map(|e| !e.is_finite())
    }

    pub fn best_error(&self) -> f64 {
        self.errors.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,error,blowup\n");
        for (l, e) in self.lambdas.iter().zip(&self.errors) {
            if e.is_finite() {
                s.push_str(&format!("{l:.16e},{e:.16e},0\n"));
            } else {
                s.push_str(&format!("{l:.16e},,1\n"));
            }
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: lambda_best = {:.4} error = {:.3e} ({} points, grid {:?}, m = {}, reference m = {}, {:.2} s)",
            self.scheme.id,
            self.lambda_best,
            self.best_error(),
            self.lambdas.len(),
            self.grid_shape,
            self.steps,
            self.reference_steps,
            self.seconds
        )
    }
}

/// `points` equispaced values from `max(λ*, floor)` to 1.
pub fn default_lambda_grid(scheme: &SchemeSpec, points: usize, floor: f64) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let lo = lambda_threshold(scheme)?.max(floor);
    if points == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..points)
        .map(|i| lo + (1.0 - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

fn check_grid(scheme: &SchemeSpec, lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if scheme.id == SchemeId::Erbe {
        return Err(Error::InvalidArgument(
            "erbe has no splitting parameter".into(),
        ));
    }
    let lo = lambda_threshold(scheme)? - ADMISSIBILITY_SLACK;
    if let Some(&bad) = lambdas.iter().find(|&&l| !(l >= lo && l <= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda {bad} outside [{lo:.4}, 1] for {}",
            scheme.id
        )));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "lambda grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

pub fn scan_lambda(
    scheme: SchemeSpec,
    problem: &ProblemDef,
    grid: &GridSpec,
    steps: usize,
    final_time: f64,
    lambdas: &[f64],
) -> Result<ScanReport> {
    check_grid(&scheme, lambdas)?;
    let start = Instant::now();
    let disc = Arc::new(Discretization::new(problem, grid)?);
    let u0 = disc.initial_field();

    let reference_steps = REFERENCE_FACTOR * steps;
    let reference = reference_solution(&disc, reference_steps, final_time)?;

    let errors = lambdas
        .par_iter()
        .map(|&lambda| {
            let run = simulate(
                &disc,
                &RunSpec::accelerated(scheme, lambda, steps, final_time),
                &u0,
            )?;
            Ok(match run.integration.solution {
                Some(u) => error_inf_rel(&u, &reference)?,
                None => f64::INFINITY,
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best: Option<usize> = None;
    for (i, e) in errors.iter().enumerate() {
        if e.is_finite() && best.is_none_or(|b| *e < errors[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::ScanFailed(
        "every lambda blew up; check the threshold and the coarse grid",
    ))?;
    for (l, e) in lambdas.iter().zip(&errors) {
        log::debug!("{} lambda {l:.4}: {e:.3e}", scheme.id);
    }
    Ok(ScanReport {
        scheme,
        lambdas: lambdas.to_vec(),
        errors,
        lambda_best: lambdas[best],
        grid_shape: grid.shape().to_vec(),
        steps,
        reference_steps,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_threshold_to_one() {
        let s = SchemeSpec::new(SchemeId::Ee);
        let g = default_lambda_grid(&s, 20, 0.0).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.5).abs() < 1e-3);
        assert_eq!(*g.last().unwrap(), 1.0);
        let g = default_lambda_grid(&s, 3, 0.9).unwrap();
        assert_eq!(g[0], 0.9);
    }

    #[test]
    fn inadmissible_grid_rejected() {
        let s = SchemeSpec::new(SchemeId::Ee);
        assert!(check_grid(&s, &[0.3, 0.6]).is_err());
        assert!(check_grid(&s, &[0.7, 0.6]).is_err());
        assert!(check_grid(&s, &[]).is_err());
        assert!(check_grid(&s, &[0.4995, 1.0]).is_ok());
    }
}

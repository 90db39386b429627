//! Experiment driver: run matrices, cached references, reports.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::BackendKind;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::ops::Discretization;
use crate::problem::{preset, ProblemDef, ONE_OVER_TWO_E};
use crate::runner::{error_inf_rel, reference_solution, simulate, Formulation, RunSpec};
use crate::scheme::{SchemeId, SchemeSpec};
use crate::stability::lambda_threshold;
use crate::tuner::{default_lambda_grid, scan_lambda};

/// Default reference steps per largest matrix step count.
pub const REFERENCE_FACTOR: usize = 4;
/// A run counts as stable while its error stays below this.
pub const STABLE_ERROR: f64 = 0.1;
/// The second-order errors on `nl1d` go below 1e-7.
pub const NL1D_REFERENCE_FACTOR: usize = 128;
pub const CACHE_MAGIC: &[u8; 8] = b"EXPIFLD1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaSource {
    /// The computed stability threshold.
    Table,
    /// A coarse scan per scheme.
    Tuned,
    #[serde(untagged)]
    Value(f64),
}

impl LambdaSource {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "tuned" => Ok(Self::Tuned),
            _ => s.parse::<f64>().map(Self::Value).map_err(|_| {
                Error::Parse(format!(
                    "lambda source '{s}' is not table, tuned or a number"
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSettings {
    pub coarse_n: usize,
    pub steps: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    /// Advection strength for `adr3d`.
    #[serde(default)]
    pub b: Option<f64>,
    pub schemes: Vec<SchemeId>,
    #[serde(default = "accelerated")]
    pub formulation: Formulation,
    #[serde(default)]
    pub backend: Option<BackendKind>,
    pub n: usize,
    pub steps: Vec<usize>,
    pub final_time: f64,
    pub lambda: LambdaSource,
    #[serde(default)]
    pub tune: Option<TuneSettings>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory for cached references.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Reference steps per largest entry of `steps`.
    #[serde(default = "reference_factor")]
    pub reference_factor: usize,
    #[serde(default = "one")]
    pub repeat: usize,
    /// Unused by the deterministic presets.
    #[serde(default)]
    pub seed: u64,
}

fn accelerated() -> Formulation {
    Formulation::Accelerated
}

fn one() -> usize {
    1
}

fn reference_factor() -> usize {
    REFERENCE_FACTOR
}

fn pow2(exps: impl Iterator<Item = u32>) -> Vec<usize> {
    exps.map(|e| 1usize << e).collect()
}

impl ExperimentConfig {
    pub fn for_preset(name: &str, b: Option<f64>) -> Result<Self> {
        let problem = preset(name, b)?;
        use SchemeId::*;
        let (schemes, steps, tune) = match name {
            "lin1d" => (
                vec![Sle, Le, Ee, Erk2p2, Sl2, Erk2p1, L2a, L2b],
                pow2((4..=14).step_by(2)),
                None,
            ),
            "nl1d" => (SchemeId::ALL.to_vec(), pow2(6..=10), None),
            "adr2d" => (
                vec![Bfe, Ee, Le, Sle, Erk2p1, Imex2, L2a, Sl2],
                pow2(9..=12),
                Some(TuneSettings {
                    coarse_n: 64,
                    steps: 256,
                    points: 20,
                }),
            ),
            _ => (
                vec![Le, Sle, L2a, Sl2],
                pow2(6..=9),
                Some(TuneSettings {
                    coarse_n: 16,
                    steps: 256,
                    points: 20,
                }),
            ),
        };
        Ok(Self {
            preset: name.to_string(),
            b: (name == "adr3d").then(|| b.unwrap_or(-0.01)),
            schemes,
            formulation: Formulation::Accelerated,
            backend: None,
            n: problem.default_n,
            steps,
            final_time: problem.final_time,
            lambda: match name {
                "lin1d" => LambdaSource::Value(1.0),
                "nl1d" => LambdaSource::Table,
                _ => LambdaSource::Tuned,
            },
            tune,
            output: None,
            cache_dir: None,
            reference_factor: if name == "nl1d" {
                NL1D_REFERENCE_FACTOR
            } else {
                REFERENCE_FACTOR
            },
            repeat: 1,
            seed: 0,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn problem(&self) -> Result<ProblemDef> {
        preset(&self.preset, self.b)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        if self.steps.contains(&0) {
            return Err(Error::InvalidArgument(
                "step counts must be positive".into(),
            ));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidArgument("final time must be positive".into()));
        }
        if self.reference_factor == 0 {
            return Err(Error::InvalidArgument(
                "reference factor must be at least 1".into(),
            ));
        }
        if self.repeat == 0 {
            return Err(Error::InvalidArgument("repeat must be at least 1".into()));
        }
        if let LambdaSource::Value(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidArgument(format!("lambda {l} outside [0, 1]")));
            }
        }
        if self.lambda == LambdaSource::Tuned && self.tune.is_none() {
            return Err(Error::InvalidArgument(
                "tuned lambda needs [tune] settings".into(),
            ));
        }
        if self.formulation == Formulation::Original {
            if let Some(b) = self.backend.filter(|&b| b != BackendKind::Krylov) {
                return Err(Error::InvalidArgument(format!(
                    "original formulation cannot run on {b:?}"
                )));
            }
            if let Some(s) = self
                .schemes
                .iter()
                .find(|s| matches!(s, SchemeId::Bfe | SchemeId::Imex2))
            {
                return Err(Error::CapabilityMismatch {
                    scheme: s.name(),
                    backend: "krylov",
                    capability: "shifted_solve",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: SchemeId,
    pub formulation: Formulation,
    pub n: usize,
    pub m: usize,
    pub lambda: Option<f64>,
    /// `None` iff the run blew up.
    pub error: Option<f64>,
    pub seconds: f64,
    pub blowup: bool,
}

pub fn write_field(path: &Path, u: &Field) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 8 * (u.shape().len() + u.len()));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(u.shape().len() as u64).to_le_bytes());
    for &d in u.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &x in u.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::Parse(format!("{} is not a field dump", path.display()));
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|b| b.try_into().unwrap())
            .ok_or_else(bad)
    };
    if &word(0)? != CACHE_MAGIC {
        return Err(bad());
    }
    let ndim = u64::from_le_bytes(word(1)?) as usize;
    if ndim == 0 || ndim > 3 {
        return Err(bad());
    }
    let shape = (0..ndim)
        .map(|i| word(2 + i).map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    let len: usize = shape.iter().product();
    if bytes.len() != 8 * (2 + ndim + len) {
        return Err(bad());
    }
    let values = (0..len)
        .map(|i| word(2 + ndim + i).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    Field::from_vec(&shape, values)
}

fn cache_path(dir: &Path, cfg: &ExperimentConfig, m_ref: usize) -> PathBuf {
    let b = cfg.b.map(|b| format!("_b{b}")).unwrap_or_default();
    dir.join(format!(
        "{}{}_n{}_t{}_m{}.ref",
        cfg.preset, b, cfg.n, cfg.final_time, m_ref
    ))
}

fn cached_reference(
    cfg: &ExperimentConfig,
    disc: &Arc<Discretization>,
    m_ref: usize,
) -> Result<Field> {
    let path = cfg.cache_dir.as_ref().map(|d| cache_path(d, cfg, m_ref));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        match read_field(p) {
            Ok(u) if u.shape() == disc.grid().shape() => {
                log::info!("reference loaded from {}", p.display());
                return Ok(u);
            }
            _ => log::warn!("ignoring unreadable reference {}", p.display()),
        }
    }
    log::info!("computing reference with {m_ref} steps");
    let u = reference_solution(disc, m_ref, cfg.final_time)?;
    if let Some(p) = path {
        write_field(&p, &u)?;
    }
    Ok(u)
}

/// `None` for the original formulation and the Rosenbrock scheme.
pub fn resolve_lambda(
    cfg: &ExperimentConfig,
    problem: &ProblemDef,
    id: SchemeId,
) -> Result<Option<f64>> {
    if cfg.formulation == Formulation::Original || id == SchemeId::Erbe {
        return Ok(None);
    }
    let spec = SchemeSpec::new(id);
    Ok(Some(match cfg.lambda {
        LambdaSource::Value(l) => l,
        LambdaSource::Table => lambda_threshold(&spec)?,
        LambdaSource::Tuned => {
            let t = cfg
                .tune
                .as_ref()
                .ok_or(Error::InvalidArgument("missing tune settings".into()))?;
            let grid = problem.grid(t.coarse_n)?;
            let lambdas = default_lambda_grid(&spec, t.points, 0.0)?;
            let report = scan_lambda(spec, problem, &grid, t.steps, cfg.final_time, &lambdas)?;
            log::info!("{}", report.summary());
            report.lambda_best
        }
    }))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    if cfg.schemes.is_empty() || cfg.steps.is_empty() {
        return Ok(Vec::new());
    }
    let setup = Setup::new(cfg)?;
    let mut records = Vec::new();
    for &id in &cfg.schemes {
        records.extend(setup.run_scheme(cfg, id)?);
    }
    Ok(records)
}

struct Setup {
    problem: ProblemDef,
    disc: Arc<Discretization>,
    reference: Field,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = cfg.problem()?;
        let grid = problem.grid(cfg.n)?;
        let disc = Arc::new(Discretization::new(&problem, &grid)?);
        let m_ref = cfg.reference_factor * cfg.steps.iter().max().copied().unwrap_or(1);
        let reference = cached_reference(cfg, &disc, m_ref)?;
        Ok(Self {
            problem,
            disc,
            reference,
        })
    }

    fn run_scheme(&self, cfg: &ExperimentConfig, id: SchemeId) -> Result<Vec<RunRecord>> {
        let lambda = resolve_lambda(cfg, &self.problem, id)?;
        let u0 = self.disc.initial_field();
        let mut records = Vec::new();
        for &m in &cfg.steps {
            let spec = RunSpec {
                scheme: SchemeSpec::new(id),
                formulation: cfg.formulation,
                lambda: lambda.unwrap_or(1.0),
                backend: cfg.backend,
                steps: m,
                final_time: cfg.final_time,
            };
            let mut times = Vec::with_capacity(cfg.repeat);
            let mut last = None;
            for _ in 0..cfg.repeat {
                let run = simulate(&self.disc, &spec, &u0)?;
                times.push(run.seconds);
                last = Some(run);
            }
            times.sort_by(f64::total_cmp);
            let seconds = times[times.len() / 2];
            let run = last.expect("repeat is at least one");
            let error = run
                .integration
                .solution
                .as_ref()
                .map(|u| error_inf_rel(u, &self.reference))
                .transpose()?;
            log::info!(
                "{id} m={m}: error {error:?} in {seconds:.3} s on {}",
                run.backend
            );
            records.push(RunRecord {
                scheme: id,
                formulation: cfg.formulation,
                n: cfg.n,
                m,
                lambda,
                blowup: error.is_none(),
                error,
                seconds,
            });
        }
        Ok(records)
    }
}

pub const VALIDATION_LAMBDAS: [f64; 8] = [
    1.0,
    0.5,
    1.0 / 3.0,
    0.301,
    0.218,
    ONE_OVER_TWO_E,
    0.183,
    0.17,
];
/// Bisection width of the computed thresholds.
pub const CLASSIFICATION_SLACK: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub scheme: SchemeId,
    pub lambda: f64,
    pub expected_stable: bool,
    pub observed_stable: bool,
    /// Errors up to the first unstable step count.
    pub errors: Vec<(usize, f64)>,
}

impl Classification {
    pub fn matches(&self) -> bool {
        self.expected_stable == self.observed_stable
    }
}

/// Stable iff every error over `steps` stays below 0.1; stops at the first failure.
pub fn classify(
    disc: &Arc<Discretization>,
    reference: &Field,
    scheme: SchemeId,
    lambda: f64,
    steps: &[usize],
) -> Result<(bool, Vec<(usize, f64)>)> {
    let u0 = disc.initial_field();
    let final_time = disc.problem().final_time;
    let mut errors = Vec::new();
    for &m in steps {
        let run = simulate(
            disc,
            &RunSpec::accelerated(scheme, lambda, m, final_time),
            &u0,
        )?;
        let e = match run.integration.solution {
            Some(u) => error_inf_rel(&u, reference)?,
            None => f64::INFINITY,
        };
        errors.push((m, e));
        if !(e < STABLE_ERROR) {
            return Ok((false, errors));
        }
    }
    Ok((true, errors))
}

/// Stability classification on `lin1d` over the validation λ set.
pub fn validate_thresholds(
    schemes: &[SchemeId],
    lambdas: &[f64],
    n: Option<usize>,
) -> Result<Vec<Classification>> {
    let problem = preset("lin1d", None)?;
    let grid = problem.grid(n.unwrap_or(problem.default_n))?;
    let disc = Arc::new(Discretization::new(&problem, &grid)?);
    let steps = pow2((4..=14).step_by(2));
    let reference = reference_solution(
        &disc,
        REFERENCE_FACTOR * steps.last().unwrap(),
        problem.final_time,
    )?;
    let mut out = Vec::new();
    for &scheme in schemes {
        let threshold = lambda_threshold(&SchemeSpec::new(scheme))?;
        for &lambda in lambdas {
            let (observed_stable, errors) = classify(&disc, &reference, scheme, lambda, &steps)?;
            let c = Classification {
                scheme,
                lambda,
                expected_stable: lambda >= threshold - CLASSIFICATION_SLACK,
                observed_stable,
                errors,
            };
            log::info!(
                "{scheme} lambda {lambda:.4}: stable {observed_stable} expected {}",
                c.expected_stable
            );
            out.push(c);
        }
    }
    Ok(out)
}

/// Least-squares slope of log error against log τ.
pub fn convergence_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(_, e)| !(e > 0.0 && e.is_finite())) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(m, _)| -(m as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub scheme: SchemeId,
    pub slope: Option<f64>,
    pub records: Vec<RunRecord>,
    /// Why the runs could not complete.
    pub failure: Option<String>,
}

impl OrderCheck {
    pub fn expected_band(&self) -> (f64, f64) {
        if self.scheme.order() == 1 {
            (0.9, 1.1)
        } else {
            (1.8, 2.2)
        }
    }

    pub fn passes(&self) -> bool {
        let (lo, hi) = self.expected_band();
        self.slope.is_some_and(|s| s >= lo && s <= hi)
    }
}

/// Convergence orders, one scheme at a time so a failing scheme does not hide the others.
pub fn validate_orders(cfg: &ExperimentConfig) -> Result<Vec<OrderCheck>> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        out.push(match setup.run_scheme(cfg, scheme) {
            Ok(records) => {
                let pts: Option<Vec<(usize, f64)>> =
                    records.iter().map(|r| r.error.map(|e| (r.m, e))).collect();
                OrderCheck {
                    scheme,
                    slope: pts.and_then(|p| convergence_slope(&p)),
                    records,
                    failure: None,
                }
            }
            Err(e) => OrderCheck {
                scheme,
                slope: None,
                records: Vec::new(),
                failure: Some(e.to_string()),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub scheme: SchemeId,
    pub threshold: f64,
    pub error_at_one: Option<f64>,
    pub error_at_threshold: Option<f64>,
}

impl TrendCheck {
    /// How much smaller the error gets when moving from λ = 1 to the threshold.
    pub fn factor(&self) -> Option<f64> {
        Some(self.error_at_one? / self.error_at_threshold?)
    }
}

/// Errors at λ = 1 and at each scheme's threshold on one shared reference.
pub fn lambda_trend(cfg: &ExperimentConfig) -> Result<Vec<TrendCheck>> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        let threshold = lambda_threshold(&SchemeSpec::new(scheme))?;
        let at = |lambda: f64| -> Result<Vec<Option<f64>>> {
            let c = ExperimentConfig {
                lambda: LambdaSource::Value(lambda),
                ..cfg.clone()
            };
            Ok(setup
                .run_scheme(&c, scheme)?
                .into_iter()
                .map(|r| r.error)
                .collect())
        };
        out.push(TrendCheck {
            scheme,
            threshold,
            error_at_one: at(1.0)?.into_iter().next().flatten(),
            error_at_threshold: at(threshold)?.into_iter().next().flatten(),
        });
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "scheme,formulation,N,m,lambda,error,seconds,blowup";

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| a.scheme.name().cmp(b.scheme.name()).then(a.m.cmp(&b.m)));
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut s = format!("{CSV_HEADER}\n");
    for r in &sorted {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.16e},{}",
            r.scheme,
            r.formulation.name(),
            r.n,
            r.m,
            fmt_opt(r.lambda),
            fmt_opt(r.error),
            r.seconds,
            u8::from(r.blowup)
        );
    }
    s
}

pub fn parse_report(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse("missing report header".into()));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad number '{s}'")))
        }
    };
    let int = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Parse(format!("bad integer '{s}'")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("expected 8 columns in '{line}'")));
            }
            Ok(RunRecord {
                scheme: f[0].parse()?,
                formulation: Formulation::parse(f[1])?,
                n: int(f[2])?,
                m: int(f[3])?,
                lambda: opt(f[4])?,
                error: opt(f[5])?,
                seconds: opt(f[6])?.ok_or(Error::Parse("missing seconds".into()))?,
                blowup: match f[7] {
                    "0" => false,
                    "1" => true,
                    other => return Err(Error::Parse(format!("bad blowup flag '{other}'"))),
                },
            })
        })
        .collect()
}

pub fn summarize(records: &[RunRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:<12} {:>6} {:>7} {:>8} {:>12} {:>10}",
        "scheme", "formulation", "N", "m", "lambda", "error", "seconds"
    );
    for r in &sorted {
        let lambda = r
            .lambda
            .map(|l| format!("{l:.4}"))
            .unwrap_or_else(|| "-".into());
        let error = r
            .error
            .map(|e| format!("{e:.3e}"))
            .unwrap_or_else(|| "blow-up".into());
        let _ = writeln!(
            s,
            "{:<8} {:<12} {:>6} {:>7} {:>8} {:>12} {:>10.4}",
            r.scheme,
            r.formulation.name(),
            r.n,
            r.m,
            lambda,
            error,
            r.seconds
        );
    }
    s
}

/// Summary path beside a report.
pub fn summary_path(path: &Path) -> PathBuf {
    path.with_extension("summary.txt")
}

/// Writes the table and its summary; returns both paths.
pub fn emit_report(records: &[RunRecord], path: &Path) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, records_to_csv(records))?;
    let summary = summary_path(path);
    fs::write(&summary, summarize(records))?;
    Ok((path.to_path_buf(), summary))
}

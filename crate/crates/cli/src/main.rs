use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use expint::backends::BackendKind;
use expint::bench::{
    emit_report, lambda_trend, parse_report, run_experiment, summarize, validate_orders,
    validate_thresholds, ExperimentConfig, LambdaSource, VALIDATION_LAMBDAS,
};
use expint::problem::preset;
use expint::runner::Formulation;
use expint::scheme::{SchemeId, SchemeSpec};
use expint::stability::{astability_region, optimize_alpha_sl2, threshold_table, Window};
use expint::tuner::{default_lambda_grid, scan_lambda};

pub const THREADS_ENV: &str = "EXPINT_THREADS";

/// Minimum error reduction from λ = 1 to the threshold on `nl1d`.
const TREND_FACTOR: f64 = 5.0;

#[derive(Parser)]
#[command(
    name = "expint",
    version,
    about = "Accelerated exponential and Lawson integrators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear stability analysis.
    #[command(subcommand)]
    Stability(StabilityCmd),
    /// Check stability thresholds (lin1d) or convergence orders (nl1d).
    Validate(ValidateArgs),
    /// Run an error/time matrix and write a report.
    Bench(BenchArgs),
    /// Coarse-grid scan for the best splitting fraction.
    TuneLambda(TuneArgs),
    /// Print the summary of an existing report.
    Report { input: PathBuf },
}

#[derive(Subcommand)]
enum StabilityCmd {
    /// Stability thresholds of all analyzed schemes.
    Thresholds {
        #[arg(long, default_value = "results/thresholds.csv")]
        out: PathBuf,
    },
    /// Raster of the stability region in the complex plane.
    Region {
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long)]
        lambda: f64,
        /// re_min,re_max,im_min,im_max
        #[arg(long, default_value = "-20,2,-10,10")]
        window: String,
        /// WIDTHxHEIGHT
        #[arg(long, default_value = "440x400")]
        res: String,
        #[arg(long, default_value = "region.pgm")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_parser = ["lin1d", "nl1d"])]
    preset: String,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeId>>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Advection strength of adr3d.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// TOML experiment file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<SchemeId>>,
    #[arg(long)]
    formulation: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    #[arg(long)]
    final_time: Option<f64>,
    /// table, tuned or a number.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    repeat: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    scheme: SchemeId,
    #[arg(long)]
    preset: String,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    coarse_n: Option<usize>,
    #[arg(long, default_value_t = 256)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long)]
    final_time: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Ok,
    Mismatch,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Stability(StabilityCmd::Thresholds { out }) => thresholds(&out),
        Command::Stability(StabilityCmd::Region {
            scheme,
            lambda,
            window,
            res,
            out,
        }) => region(scheme, lambda, &window, &res, &out),
        Command::Validate(args) => validate(args),
        Command::Bench(args) => bench(args),
        Command::TuneLambda(args) => tune(args),
        Command::Report { input } => {
            let records = parse_report(
                &fs::read_to_string(&input).with_context(|| input.display().to_string())?,
            )?;
            print!("{}", summarize(&records));
            Ok(Outcome::Ok)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn thresholds(out: &Path) -> Result<Outcome> {
    let rows = threshold_table()?;
    let (alpha, sl2) = optimize_alpha_sl2()?;
    let mut csv = String::from("scheme,lambda_star,tabulated,match\n");
    println!(
        "{:<8} {:>10} {:>10}  status",
        "scheme", "lambda*", "tabulated"
    );
    for r in &rows {
        let status = if r.matches() { "ok" } else { "MISMATCH" };
        println!(
            "{:<8} {:>10.5} {:>10.5}  {status}",
            r.scheme.name(),
            r.computed,
            r.tabulated
        );
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{}\n",
            r.scheme,
            r.computed,
            r.tabulated,
            u8::from(r.matches())
        ));
    }
    println!("sl2 optimal alpha {alpha:.5} with lambda* {sl2:.5}");
    write_file(out, csv)?;
    Ok(if rows.iter().all(|r| r.matches()) {
        Outcome::Ok
    } else {
        Outcome::Mismatch
    })
}

fn parse_list<const N: usize>(s: &str, what: &str, sep: char) -> Result<[f64; N]> {
    let vals: Vec<f64> = s
        .split(sep)
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad {what} '{s}'"))?;
    vals.try_into()
        .map_err(|_| anyhow::anyhow!("{what} needs {N} values"))
}

fn region(scheme: SchemeId, lambda: f64, window: &str, res: &str, out: &Path) -> Result<Outcome> {
    let [re_min, re_max, im_min, im_max] = parse_list::<4>(window, "window", ',')?;
    let [w, h] = parse_list::<2>(res, "resolution", 'x')?;
    if w < 1.0 || h < 1.0 || w.fract() != 0.0 || h.fract() != 0.0 {
        bail!("resolution must be two positive integers");
    }
    let raster = astability_region(
        &SchemeSpec::new(scheme),
        lambda,
        Window {
            re_min,
            re_max,
            im_min,
            im_max,
        },
        (w as usize, h as usize),
    )?;
    write_file(out, raster.to_pgm())?;
    println!("wrote {}", out.display());
    Ok(Outcome::Ok)
}

fn validate(args: ValidateArgs) -> Result<Outcome> {
    if args.preset == "lin1d" {
        let schemes = args.schemes.unwrap_or_else(|| SchemeId::ANALYZED.to_vec());
        let rows = validate_thresholds(&schemes, &VALIDATION_LAMBDAS, args.n)?;
        println!(
            "{:<8} {:>8} {:>9} {:>9}  status",
            "scheme", "lambda", "expected", "observed"
        );
        let word = |s: bool| if s { "stable" } else { "unstable" };
        for r in &rows {
            let status = if r.matches() { "ok" } else { "MISMATCH" };
            println!(
                "{:<8} {:>8.4} {:>9} {:>9}  {status}",
                r.scheme.name(),
                r.lambda,
                word(r.expected_stable),
                word(r.observed_stable)
            );
        }
        return Ok(if rows.iter().all(|r| r.matches()) {
            Outcome::Ok
        } else {
            Outcome::Mismatch
        });
    }

    let mut cfg = ExperimentConfig::for_preset("nl1d", None)?;
    if let Some(s) = args.schemes {
        cfg.schemes = s;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    let mut ok = true;
    println!("{:<8} {:>8} {:>12}  status", "scheme", "slope", "band");
    for c in validate_orders(&cfg)? {
        let (lo, hi) = c.expected_band();
        let slope = c
            .slope
            .map(|s| format!("{s:.3}"))
            .unwrap_or_else(|| "-".into());
        let status = match (&c.failure, c.passes()) {
            (Some(f), _) => format!("FAILED ({f})"),
            (None, true) => "ok".into(),
            (None, false) => "MISMATCH".into(),
        };
        ok &= c.passes();
        println!(
            "{:<8} {:>8} {:>12}  {status}",
            c.scheme.name(),
            slope,
            format!("[{lo}, {hi}]")
        );
    }

    let trend_cfg = ExperimentConfig {
        schemes: cfg
            .schemes
            .iter()
            .copied()
            .filter(|s| matches!(s, SchemeId::Sle | SchemeId::Sl2))
            .collect(),
        steps: vec![4096],
        reference_factor: 8,
        ..cfg
    };
    for t in lambda_trend(&trend_cfg)? {
        let factor = t.factor();
        let pass = factor.is_some_and(|f| f >= TREND_FACTOR);
        ok &= pass;
        println!(
            "{:<8} m=4096 error {:?} at lambda 1, {:?} at lambda {:.4}: factor {:.1} {}",
            t.scheme.name(),
            t.error_at_one,
            t.error_at_threshold,
            t.threshold,
            factor.unwrap_or(f64::NAN),
            if pass { "ok" } else { "MISMATCH" }
        );
    }
    Ok(if ok { Outcome::Ok } else { Outcome::Mismatch })
}

fn bench(args: BenchArgs) -> Result<Outcome> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::for_preset(name, args.b)?,
        (None, None) => bail!("either --preset or --config is required"),
    };
    if let Some(p) = args.preset {
        cfg.preset = p;
    }
    if args.b.is_some() {
        cfg.b = args.b;
    }
    if let Some(s) = args.schemes {
        cfg.schemes = s;
    }
    if let Some(f) = args.formulation {
        cfg.formulation = Formulation::parse(&f)?;
    }
    if let Some(b) = args.backend {
        cfg.backend = Some(BackendKind::parse(&b)?);
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(t) = args.final_time {
        cfg.final_time = t;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = LambdaSource::parse(&l)?;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    if args.cache_dir.is_some() {
        cfg.cache_dir = args.cache_dir;
    }
    if let Some(r) = args.repeat {
        cfg.repeat = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let records = run_experiment(&cfg)?;
    let out = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("results/{}.csv", cfg.preset)));
    let (table, summary) = emit_report(&records, &out)?;
    print!("{}", summarize(&records));
    println!("wrote {} and {}", table.display(), summary.display());
    Ok(Outcome::Ok)
}

fn tune(args: TuneArgs) -> Result<Outcome> {
    let problem = preset(&args.preset, args.b)?;
    let n = args.coarse_n.unwrap_or(match args.preset.as_str() {
        "adr3d" => 16,
        "adr2d" => 64,
        _ => problem.default_n,
    });
    let grid = problem.grid(n)?;
    let spec = SchemeSpec::new(args.scheme);
    let lambdas = default_lambda_grid(&spec, args.points, 0.0)?;
    let report = scan_lambda(
        spec,
        &problem,
        &grid,
        args.steps,
        args.final_time.unwrap_or(problem.final_time),
        &lambdas,
    )?;
    let csv = report.to_csv();
    print!("{csv}");
    println!("{}", report.summary());
    if let Some(out) = args.out {
        write_file(&out, csv)?;
    }
    Ok(Outcome::Ok)
}

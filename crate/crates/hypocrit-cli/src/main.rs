//! Command-line front end: spec ingestion, subcommand dispatch,
//! deterministic CSV/JSON emission, exit codes.
//!
//! Exit codes: 0 success, 2 input/domain/unsupported error, 3 numeric
//! non-convergence, 4 inconsistent routes. Every error prints one
//! `error: <category>: <reason>` line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hypocrit::criterion::{
    alpha_sweep, classify, lemma_n2_classify, tau1_inf, trace_class_threshold, ClassifyOptions,
};
use hypocrit::operator_lab::{
    build_operators, geometric_grid, nonlinear_eigs, schrodinger_eigen, semiclassical_fit,
    ExperimentConfig, FitOptions, Grid1D, NonlinearEigenpair,
};
use hypocrit::poly::Polynomial;
use hypocrit::symbol::ProblemSpec;
use hypocrit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hypocrit",
    version,
    about = "Trace-coefficient nonvanishing criteria and a discrete operator lab \
             for quadratic nonlinear eigenvalue problems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Print progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputOpts {
    /// Write output here (atomically) instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output encoding; csv applies to sweep and verify only
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a spec file and report ellipticity and τ₁² diagnostics
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Compute the leading trace coefficient by every applicable route
    Criterion {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Classify nonvanishing and report the verdict with discrepancy notes
    Classify {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also run the direct 2n-dimensional phase-space route (n ≤ 2)
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Run the trace experiment over an h-grid and extract eigenpairs
    Verify {
        /// Experiment configuration file; overrides the individual flags
        #[arg(long, conflicts_with_all = ["spec", "k"])]
        config: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long = "h-min", default_value_t = 0.05)]
        h_min: f64,
        #[arg(long = "h-max", default_value_t = 0.3)]
        h_max: f64,
        #[arg(long = "h-points", default_value_t = 8)]
        h_points: usize,
        #[arg(long = "R", default_value_t = 8.0)]
        r: f64,
        #[arg(long = "N", default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        jmax: u32,
        /// Residual acceptance threshold for eigenpairs
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Scale Q by α over a grid and track H₀, sign changes refined by bisection
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long = "alpha-min")]
        alpha_min: f64,
        #[arg(long = "alpha-max")]
        alpha_max: f64,
        #[arg(long = "alpha-points")]
        alpha_points: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write output here (atomically) instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output encoding
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Ground eigenvalue of −d²/dx² + W(x)², with W read from the file's W or P
    Schrodinger {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "R", default_value_t = 12.0)]
        r: f64,
        #[arg(long = "N", default_value_t = 16000)]
        n: usize,
        #[command(flatten)]
        output: OutputOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Input(_) | Error::Domain(_) | Error::Unsupported(_) => 2,
                Error::Numeric(_) | Error::Internal(_) => 3,
                Error::InconsistentRoutes(_) => 4,
            })
        }
    }
}

fn init_threads() {
    if let Ok(s) = std::env::var("HYPOCRIT_THREADS") {
        if let Ok(t) = s.parse::<usize>() {
            if t >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global();
                return;
            }
        }
        eprintln!("warning: ignoring HYPOCRIT_THREADS={s:?} (want a positive integer)");
    }
}

fn load_spec(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read spec {}: {e}", path.display())))?;
    ProblemSpec::from_json(&text)
}

/// A potential W is any 1-variable polynomial; no sign or degree normalization
/// applies, so it is read straight from the file's "W" or "P" field (or a bare
/// polynomial record) instead of through `ProblemSpec`.
fn load_potential(path: &Path) -> Result<Polynomial> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read potential {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("potential parse: {e}")))?;
    let node = value
        .get("W")
        .or_else(|| value.get("P"))
        .cloned()
        .unwrap_or(value);
    let w: Polynomial = serde_json::from_value(node).map_err(|e| {
        Error::Input(format!(
            "potential parse: expected a polynomial record under \"W\" or \"P\": {e}"
        ))
    })?;
    if w.dim() != 1 {
        return Err(Error::Input(format!(
            "potential must be a 1-variable polynomial (got dimension {})",
            w.dim()
        )));
    }
    Ok(w)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Input(format!("output path {} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let finish = |r: std::io::Result<()>, what: &str| {
        r.map_err(|e| Error::Input(format!("cannot {what} {}: {e}", path.display())))
    };
    finish(std::fs::write(&tmp, bytes), "write")?;
    let renamed = std::fs::rename(&tmp, path);
    if renamed.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    finish(renamed, "finalize")
}

fn emit(output: &OutputOpts, bytes: Vec<u8>) -> Result<()> {
    match &output.out {
        Some(path) => write_atomic(path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Error::Input(format!("cannot write stdout: {e}")))
        }
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Internal(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn json_only(output: &OutputOpts) -> Result<()> {
    if output.format == Format::Csv {
        return Err(Error::Input(
            "csv encoding is defined for sweep and verify outputs only".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct Cx {
    re: f64,
    im: f64,
}

impl From<hypocrit::Complex64> for Cx {
    fn from(z: hypocrit::Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct PairView {
    mu: Cx,
    lambda_prime: Cx,
    lambda: Cx,
    residual_u: f64,
    residual_v: f64,
    accepted: bool,
}

impl From<&NonlinearEigenpair> for PairView {
    fn from(p: &NonlinearEigenpair) -> Self {
        PairView {
            mu: p.mu.into(),
            lambda_prime: p.lambda_prime.into(),
            lambda: p.lambda.into(),
            residual_u: p.residual_u,
            residual_v: p.residual_v,
            accepted: p.accepted,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.cmd {
        Cmd::Check { spec, output } => {
            json_only(&output)?;
            let sp = load_spec(&spec)?;
            let mut report = json!({
                "n": sp.n(),
                "m": sp.m(),
                "kMin": trace_class_threshold(sp.n(), sp.m()),
                "flipped": sp.flipped(),
                "ellipticityOk": sp.ellipticity_ok(),
                "ellipticityMargin": sp.ellipticity_margin(),
                "ellipticityWitness": sp.ellipticity_witness(),
            });
            if sp.n() <= 3 {
                report["tau1SqInf"] = serde_json::to_value(tau1_inf(&sp, 20_000)?)
                    .map_err(|e| Error::Internal(e.to_string()))?;
            }
            if sp.n() == 2 {
                report["lemmaClass"] = serde_json::to_value(lemma_n2_classify(&sp, 20_000)?)
                    .map_err(|e| Error::Internal(e.to_string()))?;
            }
            emit(&output, to_json_bytes(&report)?)
        }

        Cmd::Criterion {
            spec,
            k,
            tol,
            output,
        } => {
            json_only(&output)?;
            let sp = load_spec(&spec)?;
            let opts = ClassifyOptions {
                tol,
                with_oracle: sp.n() <= 2,
                ..Default::default()
            };
            let report = classify(&sp, k, &opts)?;
            if verbose {
                for (route, v) in &report.routes {
                    eprintln!("route {route}: {:.16e} ± {:.3e}", v.value, v.err_estimate);
                }
            }
            emit(&output, to_json_bytes(&report)?)?;
            if !report.consistent {
                return Err(Error::InconsistentRoutes(format!(
                    "routes disagree beyond combined error bars (margin {:.3e})",
                    report.margin
                )));
            }
            Ok(())
        }

        Cmd::Classify {
            spec,
            k,
            tol,
            oracle,
            output,
        } => {
            json_only(&output)?;
            let sp = load_spec(&spec)?;
            let opts = ClassifyOptions {
                tol,
                with_oracle: oracle,
                ..Default::default()
            };
            let report = classify(&sp, k, &opts)?;
            if verbose {
                eprintln!("{}", report.verdict);
            }
            emit(&output, to_json_bytes(&report)?)?;
            if !report.consistent {
                return Err(Error::InconsistentRoutes(format!(
                    "routes disagree beyond combined error bars (margin {:.3e})",
                    report.margin
                )));
            }
            Ok(())
        }

        Cmd::Verify {
            config,
            spec,
            k,
            h_min,
            h_max,
            h_points,
            r,
            n,
            jmax,
            tol,
            output,
        } => {
            let (sp, k, hs, grid, jmax) = if let Some(cfg_path) = config {
                let text = std::fs::read_to_string(&cfg_path).map_err(|e| {
                    Error::Input(format!("cannot read config {}: {e}", cfg_path.display()))
                })?;
                let cfg: ExperimentConfig = serde_json::from_str(&text)
                    .map_err(|e| Error::Input(format!("bad experiment config: {e}")))?;
                let spec_path = {
                    let p = PathBuf::from(&cfg.spec);
                    if p.is_relative() {
                        cfg_path.parent().unwrap_or(Path::new(".")).join(p)
                    } else {
                        p
                    }
                };
                let hs = geometric_grid(cfg.h_grid.min, cfg.h_grid.max, cfg.h_grid.points)?;
                (load_spec(&spec_path)?, cfg.k, hs, cfg.grid, cfg.jmax)
            } else {
                let spec = spec.ok_or_else(|| {
                    Error::Input("either --config or --spec and --k are required".into())
                })?;
                let k = k.ok_or_else(|| {
                    Error::Input("either --config or --spec and --k are required".into())
                })?;
                let hs = geometric_grid(h_min, h_max, h_points)?;
                (load_spec(&spec)?, k, hs, Grid1D::new(r, n)?, jmax)
            };

            if verbose {
                eprintln!(
                    "fitting k={k}, jmax={jmax} over {} h-values on N={}, R={}",
                    hs.len(),
                    grid.n,
                    grid.r
                );
            }
            let experiment = semiclassical_fit(&sp, k, &hs, &grid, jmax, &FitOptions::default())?;

            let h_eig = *experiment
                .h_grid
                .last()
                .ok_or_else(|| Error::Internal("empty h-grid after fit".into()))?;
            let ops = build_operators(&sp, h_eig, &grid)?;
            let pairs = nonlinear_eigs(&sp, &ops, tol)?;
            let accepted = pairs.iter().filter(|p| p.accepted).count();
            let all_accepted_nonreal = pairs
                .iter()
                .filter(|p| p.accepted)
                .all(|p| p.lambda.im != 0.0);
            if verbose {
                eprintln!(
                    "eigenpairs at h={h_eig}: {} total, {accepted} accepted",
                    pairs.len()
                );
            }

            match output.format {
                Format::Csv => emit(&output, experiment.to_csv().into_bytes()),
                Format::Json => {
                    let views: Vec<PairView> = pairs.iter().take(32).map(PairView::from).collect();
                    let report = json!({
                        "experiment": experiment,
                        "eigenpairs": {
                            "h": h_eig,
                            "count": pairs.len(),
                            "acceptedCount": accepted,
                            "allAcceptedNonreal": all_accepted_nonreal,
                            "top": views,
                        },
                    });
                    emit(&output, to_json_bytes(&report)?)
                }
            }
        }

        Cmd::Sweep {
            spec,
            k,
            alpha_min,
            alpha_max,
            alpha_points,
            tol,
            out,
            format,
        } => {
            if alpha_points < 1 {
                return Err(Error::Input("alpha-points must be at least 1".into()));
            }
            if !(alpha_max >= alpha_min) {
                return Err(Error::Input(format!(
                    "alpha range is empty: [{alpha_min}, {alpha_max}]"
                )));
            }
            let sp = load_spec(&spec)?;
            let alphas: Vec<f64> = if alpha_points == 1 {
                vec![alpha_min]
            } else {
                (0..alpha_points)
                    .map(|i| {
                        alpha_min + (alpha_max - alpha_min) * i as f64 / (alpha_points as f64 - 1.0)
                    })
                    .collect()
            };
            let result = alpha_sweep(&sp, k, &alphas, tol)?;
            if verbose {
                eprintln!(
                    "{} rows, {} sign crossings",
                    result.rows.len(),
                    result.crossings.len()
                );
            }
            let output = OutputOpts { out, format };
            match format {
                Format::Csv => emit(&output, result.to_csv().into_bytes()),
                Format::Json => emit(&output, to_json_bytes(&result)?),
            }
        }

        Cmd::Schrodinger { spec, r, n, output } => {
            json_only(&output)?;
            let w = load_potential(&spec)?;
            let grid = Grid1D::new(r, n)?;
            let lambda0 = schrodinger_eigen(&w, &grid)?;
            if verbose {
                eprintln!("lambda0 = {lambda0:.16e}");
            }
            let report = json!({
                "lambda0": lambda0,
                "R": r,
                "N": n,
            });
            emit(&output, to_json_bytes(&report)?)
        }
    }
}

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use qfr_core::cases::{
    analyze_case, generate_phantom, load_case, load_cohort, params_for_case, run_pipeline,
    save_case, save_report, CaseError, FailureCause, PhantomError, PhantomSpec, PipelineError,
};
use qfr_core::stats::{
    calibrate_kappa, read_pairs_csv, validation_tables, CalibrationCase, StatsError,
    DEFAULT_KAPPA_RANGE,
};
use qfr_core::{Options, Pair, Params};

#[derive(Debug, Parser)]
#[command(name = "qfr", version, about = "Angiography-derived QFR analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline on one case directory.
    Analyze {
        case_dir: PathBuf,
        #[arg(long)]
        kappa: Option<f64>,
        /// Aortic pressure, mmHg (overrides the case manifest).
        #[arg(long)]
        pprox: Option<f64>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic case bundle from a JSON phantom spec.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the hyperaemic factor to the reference FFR of every case in a cohort directory.
    Calibrate {
        cohort_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_KAPPA_RANGE.0)]
        kappa_min: f64,
        #[arg(long, default_value_t = DEFAULT_KAPPA_RANGE.1)]
        kappa_max: f64,
    },
    /// Agreement, diagnostic and decision-curve tables from paired QFR/FFR values.
    Stats {
        pairs_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP interface.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Debug, Error)]
enum CliError {
    /// Bad input: unreadable or schema-invalid files, invalid parameters.
    #[error("{0}")]
    Validation(String),
    /// Valid input that could not be analysed.
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Analysis(_) => 3,
        }
    }
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e.cause {
            FailureCause::InvalidInput | FailureCause::MissingOrInvalidFfr => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serialises");
    fs::write(path, text + "\n").map_err(|e| CliError::Analysis(format!("{}: {e}", path.display())))
}

fn analyze(
    case_dir: &Path,
    kappa: Option<f64>,
    pprox: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let case = load_case(case_dir)?;
    let params: Params = params_for_case(&case, kappa, pprox);
    let report = run_pipeline(&case, &params, &Options::default())?;
    log::info!(
        "{}: QFR {:.3} in {:.1} ms",
        report.case_id,
        report.qfr.qfr,
        report.timings.total_ms
    );
    match out {
        Some(path) => save_report(&report, path).map_err(|e| CliError::Analysis(e.to_string())),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serialises")
            );
            Ok(())
        }
    }
}

fn phantom(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(spec_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", spec_path.display())))?;
    let spec: PhantomSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", spec_path.display())))?;
    let bundle = generate_phantom(&spec).map_err(|e| match e {
        PhantomError::InvalidSpec(_) | PhantomError::GeometryOverflow(_) => {
            CliError::Validation(e.to_string())
        }
    })?;
    save_case(&bundle, out).map_err(|e| CliError::Analysis(e.to_string()))
}

#[derive(Debug, Serialize)]
struct Exclusion {
    case: String,
    cause: String,
    message: String,
}

fn calibrate(cohort: &Path, out: &Path, range: (f64, f64)) -> Result<(), CliError> {
    let entries = load_cohort(cohort)?;
    if entries.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no case directories found",
            cohort.display()
        )));
    }
    let mut cases = Vec::new();
    let mut ids = Vec::new();
    let mut excluded = Vec::new();
    for (dir, loaded) in entries {
        let name = dir.display().to_string();
        let exclude = |cause: FailureCause, message: String| Exclusion {
            case: name.clone(),
            cause: cause.to_string(),
            message,
        };
        let case = match loaded {
            Ok(c) => c,
            Err(e) => {
                let cause = match &e {
                    CaseError::SchemaViolation { field, .. } if field == "reference_ffr" => {
                        FailureCause::MissingOrInvalidFfr
                    }
                    _ => FailureCause::InvalidInput,
                };
                excluded.push(exclude(cause, e.to_string()));
                continue;
            }
        };
        let Some(ffr) = case.reference_ffr else {
            excluded.push(exclude(
                FailureCause::MissingOrInvalidFfr,
                "no reference_ffr".into(),
            ));
            continue;
        };
        let params: Params = params_for_case(&case, None, None);
        match analyze_case(&case, &params, &Options::default()) {
            Ok(a) => {
                ids.push(case.id.clone());
                cases.push(CalibrationCase {
                    geometry: a.snapshot.geometry,
                    flow: a.snapshot.flow,
                    params,
                    ffr,
                });
            }
            Err(e) => excluded.push(exclude(e.cause, e.message)),
        }
    }
    for e in &excluded {
        log::warn!("excluded {}: {} ({})", e.case, e.cause, e.message);
    }
    let fit = calibrate_kappa(&cases, range).map_err(|e| match e {
        StatsError::InvalidRange(..) => CliError::Validation(e.to_string()),
        other => CliError::Analysis(other.to_string()),
    })?;
    write_json(
        &json!({
            "kappa": fit.kappa,
            "sse": fit.sse,
            "n_cases": fit.cases,
            "evaluations": fit.evaluations,
            "search_range": fit.search_range,
            "cases": ids,
            "excluded": excluded,
        }),
        out,
    )
}

fn stats(csv: &Path, out: &Path) -> Result<(), CliError> {
    let file =
        fs::File::open(csv).map_err(|e| CliError::Validation(format!("{}: {e}", csv.display())))?;
    let pairs: Vec<Pair> = read_pairs_csv(file).map_err(|e| CliError::Validation(e.to_string()))?;
    let tables = validation_tables(&pairs).map_err(|e| CliError::Analysis(e.to_string()))?;
    write_json(&tables, out)
}

fn serve(addr: SocketAddr) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Analysis(e.to_string()))?;
    runtime
        .block_on(qfr_service::serve(addr))
        .map_err(|e| CliError::Analysis(format!("{addr}: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            case_dir,
            kappa,
            pprox,
            out,
        } => analyze(&case_dir, kappa, pprox, out.as_deref()),
        Command::Phantom { spec, out } => phantom(&spec, &out),
        Command::Calibrate {
            cohort_dir,
            out,
            kappa_min,
            kappa_max,
        } => calibrate(&cohort_dir, &out, (kappa_min, kappa_max)),
        Command::Stats { pairs_csv, out } => stats(&pairs_csv, &out),
        Command::Serve { port, host } => serve(SocketAddr::new(host, port)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

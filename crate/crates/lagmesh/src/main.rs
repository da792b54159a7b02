use clap::Parser;
use lagmesh::cli::{self, CliConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Lagrange bases for Matern and surface-spline kernels on bounded domains:
/// point-set metrics, basis construction, and inequality studies.
#[derive(Parser, Debug)]
#[command(name = "lagmesh", version)]
struct Args {
    /// Path to the JSON config file.
    config: PathBuf,

    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the config output directory.
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();

    // LAGMESH_THREADS caps the process-wide work pool
    if let Ok(threads) = std::env::var("LAGMESH_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }

    let mut cfg: CliConfig = match cli::parse_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }

    init_logging(cfg.verbosity);

    match cli::run(&cfg) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => fail(&e),
    }
}

fn fail(e: &lagmesh::Error) -> ExitCode {
    // single-line machine-parseable error record
    eprintln!(
        "{}",
        serde_json::json!({ "error": format!("{e}") })
    );
    ExitCode::from(2)
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Error,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

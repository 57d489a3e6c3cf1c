use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nanonmr_cli::{emit, parse_config_for, run_command, Command, ErrorReport, Format, THREADS_ENV};

/// Field autocorrelation of nuclei diffusing in confined nanoscale NMR samples.
#[derive(Parser, Debug)]
#[command(name = "nanonmr", version)]
struct Cli {
    /// correlate, eigen, plateau-map, dominance-map, fisher, fit, mc or compare
    command: String,
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output path (standard output when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

fn fail(report: ErrorReport) -> ExitCode {
    eprintln!("{}", report.to_json());
    ExitCode::from(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command: Command = match cli.command.parse() {
        Ok(c) => c,
        Err(e) => return fail(ErrorReport::new(None, "usage", e)),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(ErrorReport::new(Some(command), "usage", "--threads must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(ErrorReport::new(Some(command), "usage", e.to_string()));
        }
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(ErrorReport::new(Some(command), "io", format!("reading {}: {e}", cli.config.display()))),
    };
    let mut cfg = match parse_config_for(&text, command) {
        Ok(c) => c,
        Err(e) => return fail(ErrorReport::from_config(Some(command), &e)),
    };
    if let Some(p) = cli.out {
        cfg.output.path = Some(p);
    }
    if let Some(f) = cli.format {
        cfg.output.format = f.parse::<Format>().expect("clap restricts the values");
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    eprintln!("nanonmr {command}: {}", cfg.normalization);
    let result = run_command(&cfg).and_then(|a| emit(&a, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(ErrorReport::from_run(command, &e)),
    }
}

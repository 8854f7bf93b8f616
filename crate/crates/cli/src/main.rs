use clap::{Parser, Subcommand};
use rgpt_cli::acceptance::run_all;
use rgpt_cli::commands;
use rgpt_cli::output::write_json;
use rgpt_cli::{CliError, Result, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Scale decomposition, flow coefficients and second-order coupling flow.
#[derive(Parser, Debug)]
#[command(name = "rgpt", version)]
struct Args {
    /// Configuration file (flat `key = value`).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration entry, e.g. `--set N=6`. Repeatable.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write slice kernels and a manifest for every mass.
    Decompose,
    /// Write the coefficient table for every mass.
    Coeffs,
    /// Iterate the coupling flow from the configured initial couplings.
    Flow,
    /// Derive the flow table symbolically.
    Derive,
    /// Run the acceptance suite.
    Verify,
    /// Convert a coefficient or trajectory CSV to long format.
    Export { input: PathBuf, output: PathBuf },
}

fn run(args: &Args, cfg: &RunConfig) -> Result<()> {
    let written = match &args.cmd {
        Cmd::Decompose => commands::decompose(cfg)?,
        Cmd::Coeffs => commands::coeffs(cfg)?,
        Cmd::Flow => commands::flow(cfg)?,
        Cmd::Derive => commands::derive(cfg)?,
        Cmd::Export { input, output } => {
            let kind = commands::export_plotdata(input, output)?;
            log::info!("exported {kind:?} data");
            vec![output.clone()]
        }
        Cmd::Verify => {
            println!("config_hash {}", cfg.hash());
            let report = run_all(cfg, |r| println!("{r}"));
            let passed = report.results.iter().filter(|r| r.pass).count();
            println!("{passed}/{} criteria pass", report.results.len());
            let path = cfg.out.join("verify.json");
            write_json(&path, &cfg.hash(), serde_json::to_value(&report)?)?;
            if !report.all_pass() {
                let failed: Vec<String> =
                    report.results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
                return Err(CliError::Verification(format!("criteria {}", failed.join(", "))));
            }
            vec![path]
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let cfg = match RunConfig::load(args.config.as_deref(), &args.set) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    match run(&args, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, Some(&cfg.hash())),
    }
}

fn fail(e: &CliError, hash: Option<&str>) -> ExitCode {
    eprintln!("{}", e.record(hash));
    ExitCode::from(e.exit_code() as u8)
}

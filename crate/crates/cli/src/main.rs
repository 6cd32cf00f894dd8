use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrnewton_cli::{commands, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "lrnewton", version, about = "Clustered low-rank Newton sweeps over parameter grids")]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "lrnewton.conf")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clustered Newton sweep over the parameter grid.
    Run,
    /// Sweeps for every K in `compare_clusters`.
    Compare,
    /// Functional errors against a refined-grid reference.
    QoiErrors,
    /// Chebyshev interval from a coarse instance.
    Estimate,
    /// Newton and fixed-point cluster steps from shared anchors.
    PicardCompare,
    /// Clustered θ-scheme trajectory.
    TimeRun,
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(&cli.config)?;
    let out = &cli.out;
    match cli.command {
        Command::Run => {
            let r = commands::run(&cfg, out)?;
            println!("max relative residual {:.3e}", r.report.max_residual());
        }
        Command::Compare => {
            for row in commands::compare(&cfg, out)? {
                println!("K = {}: max relative residual {:.3e}", row.clusters, row.max_residual);
            }
        }
        Command::QoiErrors => {
            for r in commands::qoi_errors(&cfg, out)? {
                println!("p = {} {}: err {:.3e}, errdisc {:.3e}", r.p, r.functional, r.err, r.errdisc);
            }
        }
        Command::Estimate => {
            let est = commands::estimate_cmd(&cfg, out)?;
            print!("{}", commands::format_chebyshev(&est.params));
        }
        Command::PicardCompare => {
            let cmp = commands::picard_compare(&cfg, out)?;
            println!(
                "max relative residual: newton {:.3e}, fixed point {:.3e} (ratio {:.2})",
                cmp.max_newton(),
                cmp.max_picard(),
                cmp.ratio()
            );
        }
        Command::TimeRun => {
            let t = commands::time_run(&cfg, out)?;
            println!("max relative residual over all steps {:.3e}", t.max_residual());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

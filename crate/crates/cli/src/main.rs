use anyhow::Result;
use bcos_cli::args::{Cli, Command};
use bcos_cli::{emit_timing, output, run_single, run_study};
use clap::Parser;

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(flags) => {
            let cfg = flags.resolve()?;
            let (scheme, n) = flags.single_cell(&cfg)?;
            let report = run_single(&cfg, scheme, n)?;
            print!("{}", output::describe(&report));
            if flags.out.is_some() {
                std::fs::create_dir_all(&cfg.out)?;
                std::fs::write(cfg.out.join("errors.csv"), output::errors_csv(&[report]))?;
            }
        }
        Command::Study(flags) => {
            let cfg = flags.resolve()?;
            let outcome = run_study(&cfg)?;
            println!("{} cells, {} failed; results in {}", outcome.reports.len(), outcome.failures.len(), cfg.out.display());
        }
        Command::Bench(flags) => {
            let cfg = flags.resolve()?;
            let rows = emit_timing(&cfg)?;
            output::write_timing(&cfg.out, &rows)?;
            print!("{}", output::timing_csv(&rows));
        }
    }
    Ok(())
}

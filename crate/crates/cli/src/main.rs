use std::io::Write;
use std::process::ExitCode;

use cbwk::estimators::harness::{KdeRateParams, WeissmanParams};
use cbwk_cli::args::{Cli, Command, Suite};
use cbwk_cli::{commands, config, CliError, EXIT_FAILURE, EXIT_USAGE};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// `Ok(false)` means the command ran but its check failed.
fn dispatch(command: Command) -> Result<bool, CliError> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Run(args) => {
            let (config, base) = args.into_config()?;
            let outcome = commands::run(&config, &base)?;
            commands::print_summary(&outcome, &mut stdout)?;
            writeln!(stdout, "wrote {}", config.out.display())?;
            Ok(outcome.passed())
        }
        Command::Config { run, to } => {
            let (config, _) = run.into_config()?;
            config::save_config(&to, &config)?;
            writeln!(stdout, "wrote {}", to.display())?;
            Ok(true)
        }
        Command::Instance { preset, out } => {
            let text = cbwk::instance_file::instance_to_string(&cbwk::presets::by_name(&preset)?)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => write!(stdout, "{text}")?,
            }
            Ok(true)
        }
        Command::Esttest { suite } => match suite {
            Suite::Weissman {
                mass,
                samples,
                epsilon,
                reps,
                max_rate,
                seed,
                out,
            } => {
                let params = WeissmanParams {
                    mass,
                    samples,
                    epsilon,
                    reps,
                    max_violation_rate: max_rate,
                    seed,
                };
                let report = commands::weissman(&params, out.as_deref())?;
                writeln!(
                    stdout,
                    "weissman: threshold {:.6}, violation rate {:.4} (max {})",
                    report.threshold, report.violation_rate, report.max_violation_rate
                )?;
                writeln!(stdout, "{}", if report.passed() { "PASS" } else { "FAIL" })?;
                Ok(report.passed())
            }
            Suite::KdeRate {
                sizes,
                reps,
                kernel,
                bandwidth_constant,
                grid,
                seed,
                out,
            } => {
                let params = KdeRateParams {
                    sample_sizes: sizes,
                    reps,
                    kernel: commands::kernel_by_name(&kernel)?,
                    bandwidth_constant,
                    grid_points: grid,
                    seed,
                    ..Default::default()
                };
                let report = commands::kde_rate(&params, out.as_deref())?;
                for (m, e) in &report.medians {
                    writeln!(stdout, "kde-rate: m = {m}, median sup error {e:.5}")?;
                }
                writeln!(stdout, "{}", if report.passed() { "PASS" } else { "FAIL" })?;
                Ok(report.passed())
            }
        },
    }
}

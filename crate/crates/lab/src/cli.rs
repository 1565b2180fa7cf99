//! Argument parsing, thread setup and exit-code policy.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_check_list, Check, Overrides};
use crate::error::{LabError, LabResult};
use crate::run::{run_file, RunOutput};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MLSI_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "mlsi",
    version,
    about = "Gibbs-state, dynamics and MLSI certification experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Comma-separated checks to run instead of the command's defaults.
    #[arg(long, global = true, value_name = "CHECK[,CHECK...]")]
    pub only: Option<String>,
    /// Largest Hilbert-space dimension handled by the dense engine.
    #[arg(long, global = true, value_name = "N")]
    pub dense_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Builds the Gibbs state, writes it, and checks its Markov structure.
    BuildGibbs,
    /// Property suites and quasi-factorization inequalities.
    Check,
    /// Global and conditional MLSI estimates with quasi-factorization constants.
    EstimateMlsi,
    /// Correlation norms across the configured family of geometries.
    MixingScan,
    /// Trajectory and mixing-time checks.
    Evolve,
    /// The full certification pipeline ending in an assembled lower bound.
    Certify,
    /// The checks listed in the configuration.
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BuildGibbs => "build-gibbs",
            Command::Check => "check",
            Command::EstimateMlsi => "estimate-mlsi",
            Command::MixingScan => "mixing-scan",
            Command::Evolve => "evolve",
            Command::Certify => "certify",
            Command::Run => "run",
        }
    }

    /// Checks run when neither `--only` nor the command is `run`.
    pub fn default_checks(self) -> Option<&'static [Check]> {
        use Check::*;
        match self {
            Command::BuildGibbs => Some(&[GibbsStructure]),
            Command::Check => Some(&[
                GibbsStructure,
                EntropyProperties,
                DynamicsProperties,
                Step1,
                Step2,
                LemmaCre,
            ]),
            Command::EstimateMlsi => Some(&[Mlsi, ConditionalMlsi, Qf]),
            Command::MixingScan => Some(&[Mixing]),
            Command::Evolve => Some(&[MixingTime]),
            Command::Certify => Some(&[Mixing, Step1, Step2, LemmaCre, ConditionalMlsi, Qf, Assemble]),
            Command::Run => None,
        }
    }
}

fn configure_threads() -> LabResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| LabError::config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments and runs the command.
pub fn execute(cli: &Cli) -> LabResult<RunOutput> {
    configure_threads()?;
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| LabError::config("--config is required"))?;
    let overrides = Overrides {
        seed: cli.common.seed,
        out: cli.common.out.clone(),
        only: cli.common.only.as_deref().map(parse_check_list).transpose()?,
        dense_cap: cli.common.dense_cap,
    };
    run_file(
        path,
        cli.command.name(),
        &overrides,
        cli.command.default_checks(),
        cli.command == Command::BuildGibbs,
    )
}

fn print_summary(out: &RunOutput) {
    for c in &out.report.checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
        if !c.pass {
            for line in &c.failing {
                eprintln!("  {}: {line}", c.name);
            }
        }
    }
    println!("report: {}", out.report_path.display());
}

/// Entry point returning the process exit code: 0 pass, 1 check failure, 2 configuration error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print_summary(&out);
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "mlsi",
            "check",
            "--config",
            "c.toml",
            "--seed",
            "4",
            "--only",
            "step1,step2",
            "--dense-cap",
            "64",
        ])
        .unwrap();
        assert_eq!(cli.command, Command::Check);
        assert_eq!(cli.common.seed, Some(4));
        assert_eq!(cli.common.dense_cap, Some(64));
        assert_eq!(
            parse_check_list(cli.common.only.as_deref().unwrap()).unwrap(),
            vec![Check::Step1, Check::Step2]
        );
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(main_with_args(["mlsi", "frobnicate"]), 2);
        assert_eq!(main_with_args(["mlsi", "check"]), 2);
        assert_eq!(main_with_args(["mlsi", "check", "--config", "/nonexistent/c.toml"]), 2);
    }

    #[test]
    fn every_command_has_a_name_and_default_set() {
        for c in [
            Command::BuildGibbs,
            Command::Check,
            Command::EstimateMlsi,
            Command::MixingScan,
            Command::Evolve,
            Command::Certify,
        ] {
            assert!(c.default_checks().is_some_and(|d| !d.is_empty()), "{}", c.name());
        }
        assert!(Command::Run.default_checks().is_none());
    }
}

//! Command-line front end. `execute` is what the binary calls; it never
//! exits the process itself so it can be driven from tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::chain::{builtin_chains, control_chains, resolve_chain, run_chain, PropagationTrace};
use crate::domain::{agency_bucket, AgencyBucket, AgencyLevel, DrivingMode, ThreatId};
use crate::harness::report::write_report;
use crate::harness::{
    compare, resolve_scenario, run, single_run, HarnessError, MisalignmentReport, ReportFormat, Side,
};
use crate::severity::{escalation_violations, records, validate_tables, what_if, Dimension, Rating};
use crate::threats::{injector, legal_surfaces};

pub const SEED_ENV: &str = "AGV_SIM_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "agv-sim",
    version,
    about = "Agentic-vehicle threat simulation and severity scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChainFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Listing {
    Threats,
    Chains,
    Scenarios,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenarios (files or builtin names) as paired baseline/attacked episodes.
    Run {
        #[arg(required = true, value_name = "SCENARIO")]
        scenarios: Vec<String>,
        #[arg(long, conflicts_with = "attacked_only")]
        baseline_only: bool,
        #[arg(long)]
        attacked_only: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Severity of a threat in a context, optionally with overridden ratings.
    Score {
        threat: String,
        mode: String,
        /// low/medium/high or an agency level 0-5.
        agency: String,
        #[arg(long = "set", value_name = "DIM=RATING")]
        set: Vec<String>,
    },
    /// Recompute every published cell and list inconsistencies.
    ValidateTables,
    /// Run an attack chain (file or builtin id) against its scenario.
    Chain {
        chain: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        format: ChainFormat,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    List {
        #[arg(value_enum)]
        what: Listing,
    },
}

/// Usage or configuration problem (exit 1) as opposed to I/O (exit 2).
struct Failure {
    code: i32,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn io_failure(what: &str, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{what}: {e}"),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// `env_seed` is the value of `AGV_SIM_SEED`, if set. Returns the exit code.
pub fn execute<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, env_seed, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Entry point for the binary: real argv, env and stdio.
pub fn main() -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    execute(
        std::env::args_os(),
        env_seed.as_deref(),
        &mut stdout.lock(),
        &mut stderr.lock(),
    )
}

fn seed_override(flag: Option<u64>, env_seed: Option<&str>) -> Result<Option<u64>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match env_seed.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
    }
}

fn dispatch(command: Command, env_seed: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run {
            scenarios,
            baseline_only,
            attacked_only,
            seed,
            out: path,
            format,
        } => {
            let seed = seed_override(seed, env_seed)?;
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            let configs = scenarios
                .iter()
                .map(|name| {
                    let mut config = resolve_scenario(name)?;
                    if let Some(seed) = seed {
                        config.seed = seed;
                    }
                    Ok(config)
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            // Scenarios are independent; rows keep the command-line order.
            let parts = configs
                .par_iter()
                .map(|config| {
                    Ok(if baseline_only {
                        single_run(&run(config, false)?, Side::Baseline)
                    } else if attacked_only {
                        single_run(&run(config, true)?, Side::Attacked)
                    } else {
                        compare(&run(config, false)?, &run(config, true)?)?
                    })
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let report = parts
                .into_iter()
                .fold(MisalignmentReport::default(), MisalignmentReport::merge);
            match path {
                Some(path) => crate::harness::emit_report(&report, format, &path)?,
                None => write_report(&report, format, &mut *out).map_err(|e| io_failure("stdout", e))?,
            }
            Ok(())
        }
        Command::Score {
            threat,
            mode,
            agency,
            set,
        } => {
            let threat: ThreatId = threat.parse().map_err(|e| usage(format!("{e}")))?;
            let mode: DrivingMode = mode.parse().map_err(|e| usage(format!("{e}")))?;
            let agency = parse_agency(&agency)?;
            let overrides = set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
            let (total, band) = what_if(threat, mode, agency, &overrides).map_err(|e| usage(e.to_string()))?;
            writeln!(out, "{total} {band}").map_err(|e| io_failure("stdout", e))
        }
        Command::ValidateTables => {
            let found = validate_tables();
            let mut text = String::new();
            for d in &found {
                text.push_str(&format!("{d}\n"));
            }
            text.push_str(&format!("{} of {} cells inconsistent\n", found.len(), records().len()));
            for v in escalation_violations() {
                text.push_str(&format!(
                    "note: {} at {} agency scores {} autonomous vs {} manual\n",
                    v.threat, v.agency, v.autonomous_total, v.manual_total
                ));
            }
            out.write_all(text.as_bytes()).map_err(|e| io_failure("stdout", e))
        }
        Command::Chain {
            chain,
            seed,
            format,
            out: path,
        } => {
            let spec = resolve_chain(&chain)?;
            let scenario = resolve_scenario(&spec.scenario)?;
            let seed = seed_override(seed, env_seed)?.unwrap_or(scenario.seed);
            let (trace, _) = run_chain(&spec, &scenario, seed)?;
            let text = match format {
                ChainFormat::Text => chain_text(&trace),
                ChainFormat::Json => {
                    let mut s = serde_json::to_string_pretty(&trace).expect("traces serialize");
                    s.push('\n');
                    s
                }
            };
            match path {
                Some(path) => std::fs::write(&path, text).map_err(|e| io_failure(&path.display().to_string(), e)),
                None => out.write_all(text.as_bytes()).map_err(|e| io_failure("stdout", e)),
            }
        }
        Command::List { what } => {
            let text = match what {
                Listing::Threats => ThreatId::ALL
                    .iter()
                    .map(|t| {
                        let surfaces: Vec<String> = legal_surfaces(*t).iter().map(|s| s.to_string()).collect();
                        format!("{:<17} {:<40} {}\n", t.id(), t.name(), surfaces.join(" "))
                            + &format!("{:<17} {}\n", "", injector(*t).effect)
                    })
                    .collect::<String>(),
                Listing::Chains => builtin_chains()
                    .into_iter()
                    .chain(control_chains())
                    .map(|c| format!("{:<22} {}\n", c.id, c.description))
                    .collect(),
                Listing::Scenarios => crate::harness::fixtures::builtin_scenario_names()
                    .map(|n| {
                        let c = crate::harness::builtin_scenario(n).expect("shipped scenarios are valid");
                        format!("{:<28} {}\n", n, c.description)
                    })
                    .collect(),
            };
            out.write_all(text.as_bytes()).map_err(|e| io_failure("stdout", e))
        }
    }
}

fn parse_agency(s: &str) -> Result<AgencyBucket, Failure> {
    if let Ok(level) = s.parse::<i64>() {
        return AgencyLevel::new(level)
            .map(agency_bucket)
            .map_err(|e| usage(e.to_string()));
    }
    s.parse().map_err(|e| usage(format!("{e}")))
}

fn parse_override(s: &str) -> Result<(Dimension, Rating), Failure> {
    let (dim, rating) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("--set expects DIM=RATING, got `{s}`")))?;
    let dim: Dimension = dim.trim().parse().map_err(|e| usage(format!("{e}")))?;
    let rating: Rating = rating.trim().parse().map_err(|e| usage(format!("{e}")))?;
    Ok((dim, rating))
}

fn fmt_at(at: Option<(u32, u32)>) -> String {
    at.map(|(e, s)| format!("e{e}/s{s}")).unwrap_or_else(|| "-".into())
}

fn chain_text(trace: &PropagationTrace) -> String {
    let mut s = format!(
        "chain {} on {} (seed {})\noutcome {}  stealth {}\n",
        trace.chain_id, trace.scenario_id, trace.seed, trace.outcome, trace.stealth
    );
    for st in &trace.stages {
        let what = match (&st.threat, &st.surface, &st.probe) {
            (Some(t), Some(sf), _) => format!("inject {t} on {sf}"),
            (_, _, Some(p)) => format!(
                "observe {}",
                serde_json::to_value(p).expect("probe").as_str().unwrap_or("?")
            ),
            _ => String::new(),
        };
        s.push_str(&format!(
            "  {:<40} {:<32} first effect {}\n",
            st.id,
            what,
            fmt_at(st.first_effect)
        ));
    }
    for d in &trace.deltas {
        s.push_str(&format!(
            "  e{}/s{} {}: {} -> {}  [{}]\n",
            d.episode,
            d.step,
            serde_json::to_value(d.field).expect("field").as_str().unwrap_or("?"),
            d.baseline,
            d.attacked,
            d.stage
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str], env: Option<&str>) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("agv-sim").chain(args.iter().copied());
        let code = execute(argv, env, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn score_t7_autonomous_high() {
        let (code, out, _) = call(&["score", "T7", "autonomous", "high"], None);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "16 Critical");
    }

    #[test]
    fn score_with_override_and_numeric_agency() {
        let (code, out, _) = call(&["score", "T1", "manual", "0", "--set", "SI=C"], None);
        assert_eq!(code, 0, "{out}");
        assert_eq!(out.trim(), "7 Low");
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, _, err) = call(&["frobnicate"], None);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(call(&["--help"], None).0, 0);
    }

    #[test]
    fn flag_seed_beats_env() {
        let (_, a, _) = call(&["chain", "chain-1", "--seed", "3"], Some("9"));
        assert!(a.contains("(seed 3)"), "{a}");
        let (_, b, _) = call(&["chain", "chain-1"], Some("9"));
        assert!(b.contains("(seed 9)"), "{b}");
        assert_eq!(call(&["chain", "chain-1"], Some("x")).0, 1);
    }
}

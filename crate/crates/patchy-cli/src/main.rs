use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use patchy::field::ValidationReport;
use patchy::integrate::{solve_forward, solve_perturbed, trajectory_csv};
use patchy::rates::{example_1_4_sweep, log_spaced, rate_sweep, Example14, Method, OracleScale};
use patchy::scenario::Scenario;
use patchy::shadow::{diagnostics_csv, shadow, ShadowContext};
use patchy::SolverOpts;

mod figure;

/// Exit status for unreadable or malformed input.
const EXIT_SCHEMA: u8 = 1;
/// Exit status when a field fails one of its validators.
const EXIT_VALIDATION: u8 = 2;
/// Exit status for a failure while running a stage.
const EXIT_RUNTIME: u8 = 3;

/// Violations printed per check; the rest are counted.
const SHOWN_VIOLATIONS: usize = 10;

#[derive(Parser)]
#[command(name = "patchy", version, about = "Polygonal patchy vector fields under impulsive perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Solver step, overriding the scenario.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Seed for random perturbations, overriding the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files. Without it tables go to stdout and
    /// summaries to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the inward, transversal and nonzero checks.
    Validate { scenario: PathBuf },
    /// Writes the perturbed (or unperturbed) trajectory.
    Simulate {
        scenario: PathBuf,
        /// Ignore the perturbation.
        #[arg(long)]
        unperturbed: bool,
    },
    /// Shadows the perturbed trajectory by an unperturbed one.
    Shadow { scenario: PathBuf },
    /// Sweeps the total variation and fits the distance rate.
    Rate {
        scenario: PathBuf,
        /// Log-spaced sweep `start:end:count`, in either order.
        #[arg(long)]
        tv: Option<Sweep>,
        /// `shadow` (constructive pipeline) or `oracle` (grid search), overriding the scenario.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
    },
    /// Sweeps the tangential curved-boundary example.
    Example14 {
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        /// Log-spaced `start:end:count` of the jump parameter.
        #[arg(long, default_value = "1e-2:1e-3:6")]
        eps: Sweep,
    },
    /// Emits plot data: 1 tangential example, 2 displaced curves,
    /// 3 polygonal patches with vertex trajectories.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Scenario for figure 3; the shipped two-rectangle demo by default.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

/// Log-spaced values given as `start:end:count`.
#[derive(Clone, Debug, PartialEq)]
struct Sweep(Vec<f64>);

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected start:end:count, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|e| format!("`{n}`: {e}"))?;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err("sweep bounds must be positive and finite".into());
        }
        if n < 2 {
            return Err("sweep needs at least 2 values".into());
        }
        Ok(Sweep(log_spaced(a, b, n)))
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Exit<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Exit<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_SCHEMA) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { scenario } => {
            let s = load(scenario)?;
            let reports = s.validate().exit(EXIT_SCHEMA)?;
            stdout(&validation_text(&reports))?;
            if reports.iter().all(ValidationReport::ok) {
                Ok(())
            } else {
                let failed: Vec<&str> = reports.iter().filter(|r| !r.ok()).map(|r| r.check.name()).collect();
                Err(anyhow!("{}: field fails the {} check", s.name, failed.join(", "))).exit(EXIT_VALIDATION)
            }
        }
        Command::Simulate { scenario, unperturbed } => {
            let s = load(scenario)?;
            let f = s.field().exit(EXIT_SCHEMA)?;
            let opts = solver(cli, &s);
            let r = &s.run;
            let y = if *unperturbed {
                solve_forward(&f, r.x0, r.t0, r.t1, &opts)
            } else {
                solve_perturbed(&f, &s.perturbation(seed(cli, &s)), r.x0, r.t0, r.t1, &opts)
            }
            .context("integrate")
            .exit(EXIT_RUNTIME)?;
            let kind = if *unperturbed { "unperturbed" } else { "perturbed" };
            emit(cli, &format!("{}_{kind}.csv", s.name), &trajectory_csv(&f, &y))?;
            summary(cli, &format!("{}_{kind}.txt", s.name), &format!("samples={} events={} jumps={}", y.sample_count(), y.stats.events, y.jump_marks.len()))
        }
        Command::Shadow { scenario } => {
            let s = load(scenario)?;
            let f = validated(&s)?;
            let opts = solver(cli, &s);
            let w = s.perturbation(seed(cli, &s));
            let r = &s.run;
            let y = solve_perturbed(&f, &w, r.x0, r.t0, r.t1, &opts).context("integrate").exit(EXIT_RUNTIME)?;
            let ctx = ShadowContext::fit(&f, &opts);
            let res = match shadow(&f, &ctx, &y, &w) {
                Ok(res) => res,
                Err(e) => {
                    if cli.out.is_some() {
                        emit(cli, &format!("{}_diagnostics.csv", s.name), &diagnostics_csv(&e.stagelog))?;
                    }
                    return Err(anyhow!("shadow: {}", e.error)).exit(EXIT_RUNTIME);
                }
            };
            if cli.out.is_some() {
                emit(cli, &format!("{}_y.csv", s.name), &trajectory_csv(&f, &y))?;
                emit(cli, &format!("{}_x.csv", s.name), &trajectory_csv(&f, &res.x))?;
            }
            emit(cli, &format!("{}_diagnostics.csv", s.name), &diagnostics_csv(&res.stagelog))?;
            let line = format!("sup_distance={:.16e} total_variation={:.16e} stages={}", res.sup_distance, w.total_variation(), res.stagelog.len());
            summary(cli, &format!("{}_shadow.txt", s.name), &line)
        }
        Command::Rate { scenario, tv, method } => {
            let s = load(scenario)?;
            let f = validated(&s)?;
            let opts = solver(cli, &s);
            let tvs = tv.as_ref().map_or_else(|| s.run.tv.clone(), |t| t.0.clone());
            let method = method.unwrap_or(s.run.method);
            let ctx = ShadowContext::fit(&f, &opts);
            let table = rate_sweep(&f, &ctx, &s.family(seed(cli, &s)), &tvs, method, OracleScale::default())
                .context("rate sweep")
                .exit(EXIT_RUNTIME)?;
            for fail in &table.failures {
                eprintln!("row tv={:.6e} failed: {}", fail.tv, fail.message);
            }
            let stem = format!("{}_rate_{}", s.name, method);
            emit(cli, &format!("{stem}.csv"), &table.to_csv())?;
            summary(cli, &format!("{stem}.txt"), &table.summary())
        }
        Command::Example14 { alpha, beta, eps } => {
            let s = Example14::new(*alpha, *beta).context("example14").exit(EXIT_SCHEMA)?;
            let table = example_1_4_sweep(&s, &eps.0).context("example14 sweep").exit(EXIT_RUNTIME)?;
            emit(cli, "example14.csv", &table.to_csv())?;
            summary(cli, "example14.txt", &table.summary())
        }
        Command::Figure { which, scenario } => {
            let data = match which {
                1 => figure::tangential(),
                2 => figure::displaced(),
                _ => {
                    let s = match scenario {
                        Some(p) => load(p)?,
                        None => Scenario::from_json(figure::DEMO).exit(EXIT_SCHEMA)?,
                    };
                    let f = s.field().exit(EXIT_SCHEMA)?;
                    figure::polygonal(&f, &s, &solver(cli, &s)).context("figure").exit(EXIT_RUNTIME)?
                }
            };
            emit(cli, &format!("figure{which}.csv"), &data)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).exit(EXIT_SCHEMA)?;
    Scenario::from_json(&text).with_context(|| format!("{}", path.display())).exit(EXIT_SCHEMA)
}

/// The scenario's field, refused unless every validator passes.
fn validated(s: &Scenario) -> Result<patchy::PatchyField, Failure> {
    let reports = s.validate().exit(EXIT_SCHEMA)?;
    if let Some(r) = reports.iter().find(|r| !r.ok()) {
        return Err(anyhow!("{}: field fails the {} check; run `validate` for details", s.name, r.check.name())).exit(EXIT_VALIDATION);
    }
    s.field().exit(EXIT_SCHEMA)
}

fn solver(cli: &Cli, s: &Scenario) -> SolverOpts {
    SolverOpts {
        h: cli.h.unwrap_or(s.run.solver.h),
        ..s.run.solver
    }
}

fn seed(cli: &Cli, s: &Scenario) -> u64 {
    cli.seed.unwrap_or(s.run.seed)
}

fn validation_text(reports: &[ValidationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "check={} ok={} margin={:.6e} samples={} violations={}",
            r.check.name(),
            r.ok(),
            r.margin,
            r.samples,
            r.violations.len()
        );
        for v in r.violations.iter().take(SHOWN_VIOLATIONS) {
            let other = v.other.map_or_else(|| "-".to_string(), |o| o.to_string());
            let _ = writeln!(
                out,
                "violation check={} patch={} other={} x={:.6e} y={:.6e} value={:.6e}",
                v.check.name(),
                v.patch,
                other,
                v.at.x,
                v.at.y,
                v.value
            );
        }
        if r.violations.len() > SHOWN_VIOLATIONS {
            let _ = writeln!(out, "violation check={} more={}", r.check.name(), r.violations.len() - SHOWN_VIOLATIONS);
        }
    }
    out
}

/// Writes a table into the output directory, or to stdout without one.
fn emit(cli: &Cli, file: &str, content: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).exit(EXIT_RUNTIME)?;
            let path = dir.join(file);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display())).exit(EXIT_RUNTIME)
        }
        None => stdout(content),
    }
}

/// Prints to stdout; a closed pipe downstream is not an error.
fn stdout(content: &str) -> Result<(), Failure> {
    match std::io::stdout().lock().write_all(content.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing to stdout").exit(EXIT_RUNTIME),
        _ => Ok(()),
    }
}

/// Writes a one-line summary next to the tables and echoes it to stdout,
/// or prints it to stderr when tables go to stdout.
fn summary(cli: &Cli, file: &str, line: &str) -> Result<(), Failure> {
    match &cli.out {
        Some(_) => {
            emit(cli, file, &format!("{line}\n"))?;
            stdout(&format!("{line}\n"))?;
        }
        None => eprintln!("{line}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_accepts_either_order() {
        let up: Sweep = "1e-4:1e-2:3".parse().unwrap();
        let down: Sweep = "1e-2:1e-4:3".parse().unwrap();
        assert_eq!(up.0.len(), 3);
        assert!((up.0[1] - 1e-3).abs() < 1e-15);
        assert_eq!(down.0[0], 1e-2);
        assert_eq!(down.0[2], 1e-4);
    }

    #[test]
    fn malformed_sweeps_are_refused() {
        for bad in ["1e-2:1e-4", "0:1:3", "1:2:1", "a:1:3", "1:2:x"] {
            assert!(bad.parse::<Sweep>().is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

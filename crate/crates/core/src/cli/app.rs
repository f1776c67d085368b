use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{parse_config, parse_config_unchecked};
use super::output::format_number;
use super::run::{check, gradcheck, run_many};
use super::{preset, RunSpec, PRESET_NAMES};

/// Exit codes returned by [`main_with_args`].
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Outputs were written but the optimum failed the time-domain check.
pub const EXIT_UNSTABLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ccd", version, about = "Co-design of plant and boundary feedback for a 1D reaction-diffusion PDE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize, simulate and write trace.csv, summary.json and optionally field.csv.
    Run {
        /// Built-in scenario (`case1-hom` … `case3-nonhom`, or `all`); repeatable.
        #[arg(long, num_args = 1.., required_unless_present = "config", conflicts_with = "config")]
        preset: Vec<String>,
        /// Configuration file with `key = value` lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parent directory for the per-run output directories.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the optimal closed-loop field.
        #[arg(long)]
        emit_field: bool,
        /// Also write the field at the initial point.
        #[arg(long)]
        emit_field_initial: bool,
        /// Number of runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the stability margins and closed-loop spectrum at the initial point.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the analytic gradient with central differences at the initial point.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))
}

fn load(path: &Path, checked: bool) -> Result<RunSpec, String> {
    let text = read_text(path)?;
    let parsed = if checked {
        parse_config(&text)
    } else {
        parse_config_unchecked(&text)
    };
    parsed.map_err(|e| format!("{}: {e}", path.display()))
}

fn expand_presets(names: &[String]) -> Result<Vec<RunSpec>, String> {
    let mut specs = Vec::new();
    for name in names {
        if name == "all" {
            specs.extend(PRESET_NAMES.iter().filter_map(|n| preset(n)));
        } else {
            specs.push(
                preset(name)
                    .ok_or_else(|| format!("unknown preset `{name}` (known: {}, all)", PRESET_NAMES.join(", ")))?,
            );
        }
    }
    Ok(specs)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match cli.command {
        Command::Run {
            preset,
            config,
            out: out_dir,
            emit_field,
            emit_field_initial,
            jobs,
        } => {
            let specs = match &config {
                Some(path) => load(path, true).map(|s| vec![s]),
                None => expand_presets(&preset),
            };
            let mut specs = match specs {
                Ok(s) => s,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    return EXIT_USAGE;
                }
            };
            for s in &mut specs {
                if let Some(dir) = &out_dir {
                    s.out_dir = dir.clone();
                }
                s.emit_field |= emit_field;
                s.emit_field_initial |= emit_field_initial;
            }
            let mut code = EXIT_OK;
            for (spec, result) in specs.iter().zip(run_many(&specs, jobs)) {
                match result {
                    Ok(report) => {
                        let s = &report.summary;
                        let _ = writeln!(
                            out,
                            "{}: N={} status={} iterations={} a*={} k1*={} k2*={} Jf*={} J*={} -> {}",
                            spec.name,
                            s.n,
                            s.status,
                            s.iterations,
                            format_number(s.optimal.a),
                            format_number(s.optimal.k1),
                            format_number(s.optimal.k2),
                            format_number(s.optimal.jf),
                            format_number(s.optimal.j),
                            report.dir.display()
                        );
                        if !report.decay.ok {
                            let why = report.decay.diagnostic.as_deref().unwrap_or("no diagnostic");
                            let _ = writeln!(err, "{}: optimum failed the stability check: {why}", spec.name);
                            code = code.max(EXIT_UNSTABLE);
                        }
                    }
                    Err(e) => {
                        let _ = writeln!(err, "{}: error: {e}", spec.name);
                        code = if code == EXIT_OK { EXIT_FAILURE } else { code };
                    }
                }
            }
            code
        }
        Command::Check { config } => {
            let spec = match load(&config, false) {
                Ok(s) => s,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    return EXIT_USAGE;
                }
            };
            match check(&spec) {
                Ok((grid, report, max_re)) => {
                    let _ = writeln!(out, "N = {}", grid.n);
                    let _ = writeln!(out, "kbar = {}", format_number(report.kbar));
                    for (name, m) in [("m1", report.m1), ("m2", report.m2), ("m3", report.m3)] {
                        let _ = writeln!(out, "{name} = {}", format_number(m));
                    }
                    let _ = writeln!(out, "max_re_eig = {}", format_number(max_re));
                    let _ = writeln!(out, "feasible = {}", report.in_d);
                    for v in report.violations() {
                        let _ = writeln!(out, "violated: {v}");
                    }
                    if report.in_d {
                        EXIT_OK
                    } else {
                        EXIT_FAILURE
                    }
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Command::Gradcheck { config } => {
            let spec = match load(&config, true) {
                Ok(s) => s,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    return EXIT_USAGE;
                }
            };
            match gradcheck(&spec) {
                Ok((grid, rows)) => {
                    let _ = writeln!(out, "N = {}", grid.n);
                    let _ = writeln!(out, "var,analytic,finite_difference,step,ok");
                    for r in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            r.var.name(),
                            format_number(r.analytic),
                            format_number(r.finite_diff),
                            format_number(r.step),
                            r.ok
                        );
                    }
                    if rows.iter().all(|r| r.ok) {
                        EXIT_OK
                    } else {
                        EXIT_FAILURE
                    }
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_FAILURE
                }
            }
        }
    }
}

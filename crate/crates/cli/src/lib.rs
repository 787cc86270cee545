//! Command line front end for the beltflow solvers.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use beltflow::driver::{self, bench, RunConfig};
use beltflow::scheme::SchemeKind;
use beltflow::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "beltflow", version, about = "Non-local conveyor belt flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scheme override: roe or lxf.
    #[arg(long)]
    scheme: Option<String>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation.
    Run(Common),
    /// Print the time steps of both schemes for both Heaviside models.
    Cfl(Common),
    /// Self-convergence study over nested grid spacings.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma separated spacings, coarse to fine.
        #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01,0.005")]
        levels: Vec<f64>,
    },
    /// Run both schemes on the same data.
    Compare(Common),
    /// Audit the invariants of a recorded run directory.
    Check {
        /// Run directory written by `run`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_file(&c.config)?;
    if let Some(s) = &c.scheme {
        cfg.scheme = SchemeKind::parse(s)?;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.display().to_string(), source: e })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, Error> {
    match cmd {
        Command::Run(c) => {
            let cfg = load(&c)?;
            let r = driver::advance(&cfg)?;
            if !c.quiet {
                let last = r.rows.last().expect("initial row is always recorded");
                let w = r.worst;
                let _ = writeln!(out, "scheme {}  dt {:.6e}  steps {}", r.scheme.as_str(), r.dt, r.steps);
                let _ = writeln!(out, "t_end {:.6}  mass {:.12e}  linf {:.6e}  u_rho {:.6}", last.t, last.mass, last.linf, last.u_rho);
                let _ = writeln!(
                    out,
                    "worst: mass drift {:.3e}  linf margin {:.3e}  tv margin {:.3e}  time margin {:.3e}",
                    w.mass_drift, w.linf_margin, w.tv_margin, w.time_continuity_margin
                );
                if let Some(d) = &cfg.out_dir {
                    let _ = writeln!(out, "outputs in {}", d.display());
                }
            }
            Ok(0)
        }
        Command::Cfl(c) => {
            let cfg = load(&c)?;
            let rows = bench::cfl_table(&cfg)?;
            let _ = writeln!(out, "{:<8}{:<8}{:>12}{:>14}", "scheme", "H", "L_f", "dt");
            for r in &rows {
                let _ = writeln!(out, "{:<8}{:<8}{:>12.4}{:>14.4e}", r.scheme.as_str(), r.heaviside, r.lipschitz, r.dt);
            }
            Ok(0)
        }
        Command::Converge { common, levels } => {
            let cfg = load(&common)?;
            let table = driver::convergence_study(&cfg, &levels)?;
            if let Some(d) = &cfg.out_dir {
                write_file(&d.join("convergence.csv"), &table.to_csv())?;
                write_file(&d.join("convergence_u_rho.csv"), &table.u_series_csv(&levels))?;
            }
            if !common.quiet {
                let _ = write!(out, "{}", table.to_csv());
            }
            Ok(0)
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            let cmp = driver::compare_schemes(&cfg)?;
            if !c.quiet {
                let _ = write!(out, "{}", cmp.to_csv());
            }
            Ok(0)
        }
        Command::Check { out: dir, quiet } => {
            let report = driver::audit_run(&dir)?;
            if report.passed() {
                if !quiet {
                    let _ = writeln!(out, "ok: {} rows, {} snapshots", report.rows, report.snapshots);
                }
                Ok(0)
            } else {
                for v in &report.violations {
                    let _ = writeln!(out, "violation: {v}");
                }
                Ok(2)
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command.
///
/// Returns 0 on success, 1 for usage or validation errors and 2 for runtime
/// failures, including violated invariants found by `check`.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

/// Worker count requested through `BELTFLOW_THREADS`, if any.
pub fn requested_threads(value: Option<&str>) -> Result<Option<usize>, String> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("BELTFLOW_THREADS must be a positive integer, got '{v}'")),
        },
    }
}

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use zk_core::spectral::{self, IndexBounds};
use zk_core::stabilization::{self, DecayGeometry};

use crate::artifacts::read_trace_csv;
use crate::config::load_config;
use crate::run::run_simulation;
use crate::sweep::{run_sweep, VarySpec};
use crate::verify::{run_suite, Suite};
use crate::HarnessError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zklab", version, about = "Zakharov-Kuznetsov laboratory: simulations, critical sizes and decay checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write trace, verdict, snapshots and manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Critical-size residuals of a rectangle for every index triple up to the bounds.
    Critical {
        #[arg(long = "L")]
        length: f64,
        #[arg(long = "B")]
        half_width: f64,
        #[arg(long)]
        kmax: u32,
        #[arg(long)]
        lmax: u32,
        #[arg(long)]
        nmax: u32,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        alpha: u8,
    },
    /// Length of the smallest critical rectangle of half-width B.
    MinimalRectangle {
        #[arg(long = "B")]
        half_width: f64,
    },
    /// Decay verdict for a trace.csv; without --B the geometry is the strip.
    DecayReport {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        alpha: u8,
        #[arg(long = "L")]
        length: f64,
        #[arg(long = "B")]
        half_width: Option<f64>,
    },
    /// Seeded property suites.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a configuration over evenly spaced values of one key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=lo:hi:steps
        #[arg(long)]
        vary: VarySpec,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return e.exit_code();
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, HarnessError> {
    let w = |r: std::io::Result<()>| r.map_err(|source| HarnessError::Io { path: PathBuf::from("<stdout>"), source });
    match command {
        Command::Simulate { config, out: dir } => {
            let cfg = load_config(&config)?;
            let manifest = run_simulation(&cfg, &dir)?;
            w(writeln!(out, "wrote {} files to {} (config {})", manifest.outputs.len(), dir.display(), manifest.config_hash))?;
            if let Some(a) = manifest.aborted {
                w(writeln!(out, "aborted: blowup at t = {} with max |u| = {:e}", a.t, a.max_abs))?;
                return Ok(EXIT_DOMAIN);
            }
            Ok(EXIT_OK)
        }
        Command::Critical { length, half_width, kmax, lmax, nmax, alpha } => {
            let rows =
                spectral::critical_table(length, half_width, IndexBounds { k_max: kmax, l_max: lmax, n_max: nmax }, alpha)?;
            w(writeln!(out, "k,l,n,xi,critical_length,residual,critical"))?;
            for r in &rows {
                let len = r.critical_length.map_or(String::from("none"), |v| format!("{v:.12}"));
                w(writeln!(out, "{},{},{},{:.12},{},{:.6e},{}", r.k, r.l, r.n, r.xi, len, r.residual, r.critical))?;
            }
            if alpha == 0 {
                w(writeln!(out, "# alpha = 0: no rectangle is critical"))?;
            }
            Ok(EXIT_OK)
        }
        Command::MinimalRectangle { half_width } => {
            let l = spectral::minimal_critical_rectangle(half_width)?;
            w(writeln!(out, "{l:.15}"))?;
            Ok(EXIT_OK)
        }
        Command::DecayReport { trace, alpha, length, half_width } => {
            let t = read_trace_csv(&trace)?;
            let geometry = match half_width {
                Some(b) => DecayGeometry::Rectangle { length, half_width: b },
                None => DecayGeometry::Strip { length },
            };
            let theory = stabilization::decay_theory(alpha, geometry)?;
            let v = stabilization::verdict(&t, &theory)?;
            w(writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("verdicts serialize")))?;
            Ok(EXIT_OK)
        }
        Command::Verify { suite, samples, seed } => {
            let r = run_suite(suite, samples, seed)?;
            w(writeln!(
                out,
                "{}: {} samples (seed {}), {} checks, {} failed, worst {:e}",
                r.suite, r.samples, r.seed, r.checks, r.failed, r.worst
            ))?;
            for f in &r.failures {
                w(writeln!(out, "  {f}"))?;
            }
            Ok(if r.passed() { EXIT_OK } else { EXIT_DOMAIN })
        }
        Command::Sweep { config, vary, out: dir } => {
            let cfg = load_config(&config)?;
            let entries = run_sweep(&cfg, &vary, &dir)?;
            for e in &entries {
                w(writeln!(
                    out,
                    "{} {}={} {}{}",
                    e.dir,
                    e.key,
                    e.value,
                    e.status,
                    e.error.as_deref().map_or(String::new(), |m| format!(": {m}"))
                ))?;
            }
            Ok(if entries.iter().all(|e| e.status == "ok") { EXIT_OK } else { EXIT_DOMAIN })
        }
    }
}

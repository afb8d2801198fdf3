//! The `rwre` command line: one subcommand per pipeline stage, a plain-text
//! config file, and tab-separated outputs written to an output directory
//! together with a manifest.

pub mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::bpire::{extract_u, u_z_distribution_check};
use crate::env::{FamilyKind, ParamPoint};
use crate::error::{Error, Result};
use crate::estimate::{consistency_experiment, mle, profile, ConsistencyOptions};
use crate::likelihood::{kernel_one_step_check, kernel_row_sum, loglik, CountsView};
use crate::numeric::fmt_sig;
use crate::seeding::{domain, substream};
use crate::spectral::{classify, invariant_dist, lyapunov, pi_constant, speed, Regime, Which};
use crate::walk::{read_counts, read_path, simulate_to, WalkOptions, WalkRecord};
use config::{RunConfig, Threads};

/// Lyapunov steps for the ballisticity check run before heavy commands.
const PRECHECK_STEPS: u64 = 100_000;

#[derive(Parser, Debug)]
#[command(name = "rwre", version, about = "Random walks in random environment: simulation and M-estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one walk to `n` and write its counts, path and U-process.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Convert a path file into a counts file.
    Counts {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path: PathBuf,
    },
    /// Evaluate l_n at family.theta from a counts file.
    Loglik {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        counts: PathBuf,
    },
    /// Maximize l_n over the box and export the normalized profile.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        counts: PathBuf,
    },
    /// Estimate the top Lyapunov exponent and classify the regime.
    Lyapunov {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Monte Carlo speed 1 / E π(ω).
    Speed {
        #[command(flatten)]
        common: Common,
        /// Number of environments.
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Compare the laws of the walk's U-process and the branching process.
    BpireCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Tabulate the limit law of the branching process.
    Invariant {
        #[command(flatten)]
        common: Common,
        /// Number of environments.
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Row sums of the annealed kernel and a one-step simulation check.
    KernelCheck {
        #[command(flatten)]
        common: Common,
        /// Number of simulated transitions.
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Estimation error over replicated walks for a list of n.
    Consistency {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list of targets.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
        #[arg(long)]
        reps: Option<u64>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Counts { common, .. }
            | Command::Loglik { common, .. }
            | Command::Estimate { common, .. }
            | Command::Lyapunov { common, .. }
            | Command::Speed { common, .. }
            | Command::BpireCheck { common, .. }
            | Command::Invariant { common, .. }
            | Command::KernelCheck { common, .. }
            | Command::Consistency { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Counts { .. } => "counts",
            Command::Loglik { .. } => "loglik",
            Command::Estimate { .. } => "estimate",
            Command::Lyapunov { .. } => "lyapunov",
            Command::Speed { .. } => "speed",
            Command::BpireCheck { .. } => "bpire-check",
            Command::Invariant { .. } => "invariant",
            Command::KernelCheck { .. } => "kernel-check",
            Command::Consistency { .. } => "consistency",
        }
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 for invalid input, 2 for numerical or budget failures.
pub fn main<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("rwre: error: {msg}");
            e.exit_code()
        }
    }
}

fn run(cmd: &Command) -> Result<()> {
    let common = cmd.common();
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    fs::create_dir_all(&common.out)?;
    let pool = match cfg.threads {
        Threads::Auto => rayon::ThreadPoolBuilder::new(),
        Threads::Count(n) => rayon::ThreadPoolBuilder::new().num_threads(n),
    }
    .build()
    .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| execute(cmd, &cfg, &common.out))?;
    write_manifest(&common.out, cmd.name(), &text, &cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))
}

fn write_manifest(dir: &Path, command: &str, config_text: &str, cfg: &RunConfig) -> Result<()> {
    let hash = hex::encode(Sha256::digest(config_text.as_bytes()));
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = create(dir, "manifest.tsv")?;
    writeln!(out, "key\tvalue")?;
    writeln!(out, "command\t{command}")?;
    writeln!(out, "config_sha256\t{hash}")?;
    writeln!(out, "seed\t{}", cfg.seed)?;
    writeln!(out, "version\t{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "timestamp_unix\t{stamp}")?;
    out.flush()?;
    Ok(())
}

fn require_right_transient(cfg: &RunConfig, theta: &ParamPoint) -> Result<()> {
    let mut rng = substream(cfg.seed, domain::LYAPUNOV, 1);
    let est = lyapunov(&cfg.family, theta, PRECHECK_STEPS, Which::A, &mut rng)?;
    if classify(&est) != Regime::TransientRight {
        return Err(Error::Config(format!(
            "family.theta = {:?} is not transient to the right: γ̂_A = {} ± {}",
            theta.coords(),
            est.gamma,
            est.stderr
        )));
    }
    Ok(())
}

fn coords_header(prefix: &str, d: usize) -> String {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect::<Vec<_>>().join("\t")
}

fn coords_row(p: &ParamPoint) -> String {
    p.coords().iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join("\t")
}

fn execute(cmd: &Command, cfg: &RunConfig, out: &Path) -> Result<()> {
    match cmd {
        Command::Simulate { n, .. } => {
            let theta = cfg.theta()?;
            let n = n.unwrap_or(cfg.walk_n);
            let cap = cfg.step_cap.unwrap_or(WalkOptions::for_target(n).step_cap);
            let mut rng = substream(cfg.seed, domain::WALK, 0);
            let rec = simulate_to(&cfg.family, theta, n, cap, &mut rng)?;
            write_walk(&rec, cfg.seed, out)
        }
        Command::Counts { path, .. } => {
            let steps = read_path(open(path)?)?;
            let target = *steps.last().ok_or_else(|| Error::Parse("empty path file".into()))?;
            if target <= 0 {
                return Err(Error::Parse(format!("path must end at a positive target, ends at {target}")));
            }
            let rec = WalkRecord::from_path(steps, target as u64)?;
            let mut f = create(out, "counts.tsv")?;
            rec.write_counts(cfg.seed, &mut f)?;
            f.flush()?;
            Ok(())
        }
        Command::Loglik { counts, .. } => {
            let theta = cfg.theta()?;
            let file = read_counts(open(counts)?)?;
            let view = CountsView::from_counts_file(&file)?;
            let value = loglik(&view, &cfg.family, theta)?;
            let mut f = create(out, "loglik.tsv")?;
            writeln!(f, "n\t{}\tloglik\tnormalized", coords_header("theta", theta.dim()))?;
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                view.n(),
                coords_row(theta),
                fmt_sig(value),
                fmt_sig(value / view.n() as f64)
            )?;
            f.flush()?;
            Ok(())
        }
        Command::Estimate { counts, .. } => {
            let file = read_counts(open(counts)?)?;
            let view = CountsView::from_counts_file(&file)?;
            let est = mle(&view, &cfg.family, &cfg.mle)?;
            let mut f = create(out, "estimate.tsv")?;
            est.write(&mut f)?;
            f.flush()?;
            let prof = profile(&view, &cfg.family, cfg.mle.grid_points)?;
            let mut f = create(out, "profile.tsv")?;
            prof.write(&mut f)?;
            f.flush()?;
            Ok(())
        }
        Command::Lyapunov { steps, .. } => {
            let theta = cfg.theta()?;
            let steps = steps.unwrap_or(cfg.lyapunov_steps);
            let mut rng = substream(cfg.seed, domain::LYAPUNOV, 0);
            let est = lyapunov(&cfg.family, theta, steps, cfg.lyapunov_which, &mut rng)?;
            let which = match cfg.lyapunov_which {
                Which::A => "A",
                Which::B => "B",
            };
            let line = format!(
                "{which}\t{}\t{}\t{}",
                fmt_sig(est.gamma),
                fmt_sig(est.stderr),
                classify(&est).name()
            );
            let mut f = create(out, "lyapunov.tsv")?;
            writeln!(f, "matrix\tgamma\tstderr\tregime")?;
            writeln!(f, "{line}")?;
            f.flush()?;
            println!("{line}");
            Ok(())
        }
        Command::Speed { reps, .. } => {
            let theta = cfg.theta()?;
            require_right_transient(cfg, theta)?;
            let samples = reps.unwrap_or(cfg.invariant.env_samples);
            let est = speed(&cfg.family, theta, samples, cfg.tail_tol(), cfg.k_cap(), cfg.seed)?;
            let mut f = create(out, "speed.tsv")?;
            writeln!(f, "method\tspeed\tstderr\tmean_pi\tpi_stderr")?;
            writeln!(
                f,
                "monte_carlo\t{}\t{}\t{}\t{}",
                fmt_sig(est.speed),
                fmt_sig(est.stderr),
                fmt_sig(est.mean_pi),
                fmt_sig(est.pi_stderr)
            )?;
            if matches!(cfg.family.kind(), FamilyKind::Point) {
                let site = cfg.family.sample_site(theta, &mut substream(cfg.seed, domain::ENVIRONMENT, 0))?;
                let pi = pi_constant(&site)?;
                writeln!(f, "closed_form\t{}\t0\t{}\t0", fmt_sig(1.0 / pi), fmt_sig(pi))?;
            }
            f.flush()?;
            Ok(())
        }
        Command::BpireCheck { n, reps, .. } => {
            let theta = cfg.theta()?;
            require_right_transient(cfg, theta)?;
            let n = n.unwrap_or(cfg.bpire_n);
            let reps = reps.unwrap_or(cfg.bpire_replicates);
            let report = u_z_distribution_check(&cfg.family, theta, n, reps, cfg.seed)?;
            let mut f = create(out, "bpire.tsv")?;
            report.write(&mut f)?;
            f.flush()?;
            Ok(())
        }
        Command::Invariant { reps, .. } => {
            let theta = cfg.theta()?;
            require_right_transient(cfg, theta)?;
            let mut opts = cfg.invariant;
            if let Some(r) = reps {
                opts.env_samples = *r;
            }
            let table = invariant_dist(&cfg.family, theta, opts, cfg.seed)?;
            if table.suspect() {
                eprintln!(
                    "rwre: warning: {} of {} environments hit the truncation cap",
                    table.cap_hits, table.env_samples
                );
            }
            let mut f = create(out, "invariant.tsv")?;
            table.write(&mut f)?;
            f.flush()?;
            Ok(())
        }
        Command::KernelCheck { reps, .. } => {
            let theta = cfg.theta()?;
            let x = cfg.kernel_x;
            let row = kernel_row_sum(&cfg.family, theta, x, cfg.kernel_max_total)?;
            let samples = reps.unwrap_or(cfg.kernel_samples);
            let tv = kernel_one_step_check(&cfg.family, theta, x, samples, cfg.seed)?;
            let mut f = create(out, "kernel.tsv")?;
            writeln!(f, "x1\tx2\tx3\trow_sum\tmax_total\tsamples\ttv")?;
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                x.z1,
                x.z2,
                x.z3,
                fmt_sig(row),
                cfg.kernel_max_total,
                samples,
                fmt_sig(tv.tv)
            )?;
            f.flush()?;
            Ok(())
        }
        Command::Consistency { n, reps, .. } => {
            let theta = cfg.theta()?;
            let opts = ConsistencyOptions {
                n_list: n.clone().unwrap_or_else(|| cfg.consistency.n_list.clone()),
                replicates: reps.unwrap_or(cfg.consistency.replicates),
                ..cfg.consistency.clone()
            };
            let table = consistency_experiment(&cfg.family, theta, &opts, cfg.seed)?;
            let mut f = create(out, "errors.tsv")?;
            table.write_errors(&mut f)?;
            f.flush()?;
            let mut f = create(out, "summary.tsv")?;
            table.write_summary(&mut f)?;
            f.flush()?;
            if !table.medians_non_increasing() {
                eprintln!("rwre: warning: median error increases along the n list");
            }
            Ok(())
        }
    }
}

fn write_walk(rec: &WalkRecord, seed: u64, out: &Path) -> Result<()> {
    let mut f = create(out, "counts.tsv")?;
    rec.write_counts(seed, &mut f)?;
    f.flush()?;
    if rec.path().is_some() {
        let mut f = create(out, "path.tsv")?;
        rec.write_path(&mut f)?;
        f.flush()?;
    }
    let mut f = create(out, "u.tsv")?;
    extract_u(rec).write_generations(&mut f)?;
    f.flush()?;
    Ok(())
}

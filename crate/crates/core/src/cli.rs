//! The `pdkit` command line: sampling, operators, trees and verification suites.
//!
//! Exit codes: 0 success, 1 statistical failure in `verify`, 2 usage or domain error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::operators::{coag, frag};
use crate::partition::{read_csv, write_csv, MassPartition, Params, SetPartition};
use crate::rectree::{grow, partitions_csv};
use crate::samplers::{branching_sample, crp_sample, pd_sample, subordinator_pd, Truncation};
use crate::suites::{run_suite, SuiteConfig};

/// Seed used when neither `--seed` nor `PD_DEFAULT_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "pdkit", version, about = "Poisson-Dirichlet partitions, fragmentation and coagulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw random partitions.
    Sample(SampleArgs),
    /// Apply Frag_alpha to every row of a partition CSV.
    Frag(FragArgs),
    /// Apply Coag_{alpha,theta} to every row of a partition CSV.
    Coag(CoagArgs),
    /// Grow one (alpha, theta)-recursive tree.
    Tree(TreeArgs),
    /// Run a verification suite and emit its JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Master seed; replica r uses stream r.
    #[arg(long, env = "PD_DEFAULT_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; output does not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args)]
struct TruncArgs {
    /// Stop drawing atoms once the undiscovered mass is below this.
    #[arg(long, default_value_t = Truncation::default().eps)]
    trunc_eps: f64,
    /// Hard cap on the number of drawn atoms.
    #[arg(long, default_value_t = Truncation::default().max_atoms)]
    max_atoms: usize,
}

impl TruncArgs {
    fn truncation(&self) -> Result<Truncation> {
        Truncation::new(self.trunc_eps, self.max_atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Stick,
    Crp,
    Subordinator,
    Branching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, value_enum, default_value_t = Method::Stick)]
    method: Method,
    /// Number of replicas.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Label count for crp and branching.
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    trunc: TruncArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a histogram with this many bins (largest atom, or block count).
    #[arg(long)]
    emit_hist: Option<usize>,
}

#[derive(Debug, Args)]
struct FragArgs {
    /// Partition CSV; `-` or absent reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[command(flatten)]
    trunc: TruncArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Write one JSON witness per row to `<out>.witness.jsonl`, or stderr.
    #[arg(long)]
    emit_witness: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoagArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    emit_witness: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Dot,
    Parents,
    Partitions,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    /// Number of non-root vertices.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, value_enum, default_value_t = Emit::Dot)]
    emit: Emit,
    /// Deepest stripping level for `--emit partitions`; must be below n.
    #[arg(long, default_value_t = 0)]
    strip_depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, allow_negative_numbers = true, requires = "theta")]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "alpha")]
    theta: Option<f64>,
    /// Second index of the Pitman operators.
    #[arg(long, default_value_t = 0.6)]
    beta: f64,
    /// Replica count replacing every experiment's default.
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    seed: SeedArgs,
    /// Per-test significance threshold.
    #[arg(long, default_value_t = crate::stattest::DEFAULT_LEVEL)]
    alpha_level: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pdkit: {e}");
            2
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Sample(a) => with_jobs(a.seed.jobs, || cmd_sample(&a)),
        Command::Frag(a) => with_jobs(a.seed.jobs, || cmd_frag(&a)),
        Command::Coag(a) => with_jobs(a.seed.jobs, || cmd_coag(&a)),
        Command::Tree(a) => cmd_tree(&a),
        Command::Verify(a) => with_jobs(a.seed.jobs, || cmd_verify(&a)),
    }
}

fn with_jobs<F: FnOnce() -> Result<i32> + Send>(jobs: Option<usize>, f: F) -> Result<i32> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::Usage("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(f),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Writes a sidecar artifact next to `out`, or to stderr when output goes to stdout.
fn write_sidecar(out: Option<&Path>, suffix: &str, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(suffix);
            fs::write(PathBuf::from(name), text)?;
        }
        None => io::stderr().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn replicas<T: Send>(seed: u64, n: usize, f: impl Fn(usize, &mut RngStream) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(|r| f(r, &mut RngStream::new(seed, r as u64))).collect()
}

fn mass_csv(rows: &[MassPartition]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
}

fn json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it)?);
        s.push('\n');
    }
    Ok(s)
}

fn json_document<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn histogram_unit(values: &[f64], bins: usize) -> String {
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let mut s = String::from("lo,hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!("{},{},{c}\n", i as f64 / bins as f64, (i + 1) as f64 / bins as f64));
    }
    s
}

fn histogram_blocks(parts: &[SetPartition], max_blocks: usize) -> String {
    let mut counts = vec![0u64; max_blocks + 1];
    for p in parts {
        counts[p.num_blocks()] += 1;
    }
    let mut s = String::from("blocks,count\n");
    for (k, c) in counts.iter().enumerate().skip(1) {
        s.push_str(&format!("{k},{c}\n"));
    }
    s
}

fn set_partition_csv(parts: &[SetPartition], n: usize) -> String {
    let mut s = (1..=n).map(|l| format!("l{l}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for p in parts {
        let row: Vec<String> = p.block_of().iter().map(|b| b.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn cmd_sample(a: &SampleArgs) -> Result<i32> {
    let params = Params::new(a.alpha, a.theta)?;
    let trunc = a.trunc.truncation()?;
    if a.emit_hist == Some(0) {
        return Err(Error::Usage("--emit-hist needs at least one bin".into()));
    }
    let seed = a.seed.seed;
    let out = a.out.as_deref();
    match a.method {
        Method::Stick | Method::Subordinator => {
            let rows = replicas(seed, a.samples, |_, rng| match a.method {
                Method::Stick => pd_sample(params, trunc, rng),
                _ => Ok(subordinator_pd(params, trunc, rng)?.0),
            })?;
            let text = match a.format {
                Format::Csv => mass_csv(&rows)?,
                Format::Json => json_document(&rows)?,
            };
            write_output(out, &text)?;
            if let Some(bins) = a.emit_hist {
                let largest: Vec<f64> = rows.iter().map(MassPartition::largest).collect();
                write_sidecar(out, ".hist.csv", &histogram_unit(&largest, bins))?;
            }
        }
        Method::Crp | Method::Branching => {
            let n = a.n.ok_or_else(|| Error::Usage("--n is required for crp and branching".into()))?;
            let parts = replicas(seed, a.samples, |_, rng| match a.method {
                Method::Crp => crp_sample(params, n, rng),
                _ => branching_sample(params, n, rng),
            })?;
            let text = match a.format {
                Format::Csv => set_partition_csv(&parts, n),
                Format::Json => json_document(&parts)?,
            };
            write_output(out, &text)?;
            if a.emit_hist.is_some() {
                write_sidecar(out, ".hist.csv", &histogram_blocks(&parts, n))?;
            }
        }
    }
    Ok(0)
}

fn read_input(path: Option<&Path>) -> Result<Vec<MassPartition>> {
    let text = match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p)?,
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    read_csv(&text)
}

#[derive(Serialize)]
struct RowWitness<W> {
    row: usize,
    witness: W,
}

fn cmd_frag(a: &FragArgs) -> Result<i32> {
    let trunc = a.trunc.truncation()?;
    if !(0.0..1.0).contains(&a.alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1), got {}", a.alpha)));
    }
    let rows = read_input(a.input.as_deref())?;
    let results = replicas(a.seed.seed, rows.len(), |r, rng| frag(a.alpha, &rows[r], trunc, rng))?;
    let (outs, witnesses): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_output(a.out.as_deref(), &mass_csv(&outs)?)?;
    if a.emit_witness {
        let w: Vec<_> = witnesses.into_iter().enumerate().map(|(row, witness)| RowWitness { row: row + 1, witness }).collect();
        write_sidecar(a.out.as_deref(), ".witness.jsonl", &json_lines(&w)?)?;
    }
    Ok(0)
}

fn cmd_coag(a: &CoagArgs) -> Result<i32> {
    let params = Params::new(a.alpha, a.theta)?;
    let rows = read_input(a.input.as_deref())?;
    let results = replicas(a.seed.seed, rows.len(), |r, rng| coag(params, &rows[r], rng))?;
    let (outs, witnesses): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_output(a.out.as_deref(), &mass_csv(&outs)?)?;
    if a.emit_witness {
        let w: Vec<_> = witnesses.into_iter().enumerate().map(|(row, witness)| RowWitness { row: row + 1, witness }).collect();
        write_sidecar(a.out.as_deref(), ".witness.jsonl", &json_lines(&w)?)?;
    }
    Ok(0)
}

fn cmd_tree(a: &TreeArgs) -> Result<i32> {
    let params = Params::new(a.alpha, a.theta)?;
    if a.n == 0 {
        return Err(Error::Domain("--n must be at least 1".into()));
    }
    if a.strip_depth >= a.n {
        return Err(Error::Domain(format!("strip depth {} must be below n = {}", a.strip_depth, a.n)));
    }
    let t = grow(params, a.n, &mut RngStream::new(a.seed.seed, 0))?;
    let text = match a.emit {
        Emit::Dot => t.to_dot(),
        Emit::Parents => t.to_parent_csv(),
        Emit::Partitions => partitions_csv(&t, a.strip_depth)?,
    };
    write_output(a.out.as_deref(), &text)?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let params = match (a.alpha, a.theta) {
        (Some(al), Some(th)) => Some(Params::new(al, th).map_err(|e| Error::Usage(e.to_string()))?),
        _ => None,
    };
    let cfg = SuiteConfig { seed: a.seed.seed, alpha_level: a.alpha_level, samples: a.samples, params, beta: a.beta };
    let report = run_suite(&a.suite, &cfg)?;
    for t in &report.tests {
        eprintln!("{} {} (p={:.4}, n={})", if t.pass { "PASS" } else { "FAIL" }, t.name, t.p_value, t.n_samples);
    }
    write_output(a.report.as_deref(), &json_document(&report)?)?;
    Ok(if report.pass { 0 } else { 1 })
}

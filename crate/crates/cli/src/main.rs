//! `censcope`: estimators, asymptotic constants and simulation tables for
//! interval-censored data from the command line.
//!
//! Exit status: 0 on success, 2 for invalid input or options, 3 when a
//! numerical procedure fails.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use censcope::asymptotics::{constants_row, CHERNOFF_VAR_2Z};
use censcope::birge::{birge_curve, build_partition, default_k, optimal_c};
use censcope::inteq::{GridModel, PhiSolver};
use censcope::npmle::{npmle_icm_with, IcmOptions};
use censcope::sim::{replicate_table, DEFAULT_MASTER_SEED};
use censcope::smle::{default_bandwidth, smle_curve, SmleConfig};
use censcope::{generate_dataset, io as csvio, Error, TargetDistribution};

use settings::*;

#[derive(Parser, Debug)]
#[command(name = "censcope", version, about = "Distribution function estimation from interval-censored (case 2) data")]
struct Cli {
    /// key=value file mirroring the flags (flags take precedence)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Distribution of X: uniform or pow<k> (F(x) = 1-(1-x)^k) [default: uniform]
    #[arg(long, value_name = "MODEL")]
    model: Option<String>,
    /// Observation scheme: nonsep or sep [default: nonsep]
    #[arg(long, value_name = "SCHEME")]
    scheme: Option<String>,
    /// Minimal gap U-T of the separated scheme, in (0, 1/2) [default: 0.1]
    #[arg(long, value_name = "EPS")]
    eps: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a simulated dataset as CSV (t,u,d1,d2,d3)
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        /// Sample size, >= 1 [default: 1000]
        #[arg(long)]
        n: Option<String>,
        /// Seed, unsigned 64-bit [default: $CENSCOPE_SEED, else 20100521]
        #[arg(long)]
        seed: Option<String>,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<String>,
    },
    /// Estimate F from a dataset CSV and write the curve as CSV
    Estimate {
        /// Dataset CSV with header t,u,d1,d2,d3 (required)
        #[arg(long)]
        input: Option<String>,
        /// mle (knot,value), birge (cell_left,cell_right,value) or smle (t,F_smle,f_smle) [default: mle]
        #[arg(long)]
        method: Option<String>,
        /// SMLE bandwidth, in (0, 1/2) [default: n^(-1/5)]
        #[arg(long)]
        bandwidth: Option<String>,
        /// Birgé reference point, in (0, 1) [default: 0.5]
        #[arg(long)]
        t0: Option<String>,
        /// Birgé number of bins, >= 2 [default: asymptotically optimal for --model/--scheme]
        #[arg(long)]
        k: Option<String>,
        /// SMLE grid points on [0,1], in [2, 1000000] [default: 201]
        #[arg(long)]
        points: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<String>,
    },
    /// Replicate a simulation table and write it as CSV
    Simulate {
        /// Table id, in [1, 13] (required)
        #[arg(long)]
        table: Option<String>,
        /// Replication scale relative to the full-size tables, in (0, 10] [default: 0.2]
        #[arg(long)]
        scale: Option<String>,
        /// Master seed, unsigned 64-bit [default: $CENSCOPE_SEED, else 20100521]
        #[arg(long)]
        seed: Option<String>,
        /// Worker threads, in [1, 1024]; results do not depend on it [default: all cores]
        #[arg(long)]
        threads: Option<String>,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<String>,
    },
    /// Write asymptotic constants as CSV, one row per t0
    Asymptotics {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated points, each in (0, 1) [default: 0.3,0.4,0.5,0.6]
        #[arg(long)]
        t0: Option<String>,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve the variance integral equation and write phi as CSV (u,phi)
    Phi {
        #[command(flatten)]
        model: ModelArgs,
        /// Evaluation point, in (0, 1) [default: 0.5]
        #[arg(long)]
        t: Option<String>,
        /// Bandwidth, in (0, 1/2) [default: n^(-1/5)]
        #[arg(long)]
        bandwidth: Option<String>,
        /// Sample size setting the default bandwidth, >= 1 [default: 1000]
        #[arg(long)]
        n: Option<String>,
        /// Grid size, in [100, 5000] [default: 1000]
        #[arg(long)]
        grid: Option<String>,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<String>,
    },
}

enum Failure {
    Invalid(String),
    Numeric(String),
}

impl From<Invalid> for Failure {
    fn from(e: Invalid) -> Self {
        Failure::Invalid(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn output(path: Option<&str>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Invalid(format!("cannot create `{p}`: {e}")))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn model_of(r: &Resolver, m: &ModelArgs) -> Result<(TargetDistribution, censcope::ObservationScheme), Failure> {
    Ok((r.or("model", &m.model, parse_model, TargetDistribution::Uniform01)?, r.scheme(&m.scheme, &m.eps)?))
}

fn size(k: &str, v: &str) -> Result<usize, Invalid> {
    parse_usize(k, v, 1, usize::MAX)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let r = Resolver { config: &config };
    match &cli.command {
        Command::Generate { model, n, seed, out } => {
            let (target, scheme) = model_of(&r, model)?;
            let n = r.or("n", n, size, 1000)?;
            let seed = r.seed(seed, DEFAULT_MASTER_SEED)?;
            let data = generate_dataset(target, scheme, n, seed)?;
            csvio::write_dataset(output(r.raw("out", out))?, &data.observations)?;
        }
        Command::Estimate { input, method, bandwidth, t0, k, points, model, out } => {
            let path = r.raw("input", input).ok_or_else(|| Failure::Invalid("`input` is required".into()))?;
            let file = File::open(path).map_err(|e| Failure::Invalid(format!("cannot open `{path}`: {e}")))?;
            let obs = csvio::read_dataset(io::BufReader::new(file))?;
            let out = output(r.raw("out", out))?;
            match r.or("method", method, parse_method, Method::Mle)? {
                Method::Mle => {
                    let mle = npmle_icm_with(&obs, IcmOptions::default())?;
                    csvio::write_step(out, &mle.estimate)?;
                }
                Method::Smle => {
                    let b = r.or("bandwidth", bandwidth, parse_bandwidth, default_bandwidth(obs.len()))?;
                    let config = SmleConfig::new(b)?;
                    let points = r.or("points", points, |k, v| parse_usize(k, v, 2, 1_000_000), 201)?;
                    let mle = npmle_icm_with(&obs, IcmOptions::default())?;
                    csvio::write_smle_curve(out, &smle_curve(&mle.estimate, &config, points))?;
                }
                Method::Birge => {
                    let t0 = r.or("t0", t0, parse_open_unit, 0.5)?;
                    let k = match r.get("k", k, |k, v| parse_usize(k, v, 2, usize::MAX))? {
                        Some(k) => k,
                        None => {
                            let (target, scheme) = model_of(&r, model)?;
                            default_k(obs.len(), optimal_c(t0, target, scheme)?, scheme)?
                        }
                    };
                    if obs.len() < k {
                        return Err(Failure::Invalid(format!("`k` = {k} exceeds the sample size {}", obs.len())));
                    }
                    let partition = build_partition(t0, k)?;
                    csvio::write_birge_curve(out, &birge_curve(&obs, &partition))?;
                }
            }
        }
        Command::Simulate { table, scale, seed, threads, out } => {
            let table = r
                .get("table", table, |k, v| parse_usize(k, v, 1, 13))?
                .ok_or_else(|| Failure::Invalid("`table` is required".into()))? as u32;
            let scale = r.or("scale", scale, parse_scale, 0.2)?;
            let seed = r.seed(seed, DEFAULT_MASTER_SEED)?;
            let rows = match r.get("threads", threads, |k, v| parse_usize(k, v, 1, 1024))? {
                Some(k) => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| Failure::Invalid(format!("cannot start {k} threads: {e}")))?
                    .install(|| replicate_table(table, scale, seed))?,
                None => replicate_table(table, scale, seed)?,
            };
            csvio::write_table(output(r.raw("out", out))?, &rows)?;
        }
        Command::Asymptotics { model, t0, out } => {
            let (target, scheme) = model_of(&r, model)?;
            let t0s = r.or("t0", t0, parse_t0_list, vec![0.3, 0.4, 0.5, 0.6])?;
            let rows = t0s.iter().map(|&t| constants_row(t, target, scheme)).collect::<censcope::Result<Vec<_>>>()?;
            csvio::write_constants(output(r.raw("out", out))?, &rows, CHERNOFF_VAR_2Z)?;
        }
        Command::Phi { model, t, bandwidth, n, grid, out } => {
            let (target, scheme) = model_of(&r, model)?;
            let t = r.or("t", t, parse_open_unit, 0.5)?;
            let n = r.or("n", n, size, 1000)?;
            let b = r.or("bandwidth", bandwidth, parse_bandwidth, default_bandwidth(n))?;
            let m = r.or("grid", grid, |k, v| parse_usize(k, v, 100, 5000), 1000)?;
            let model = GridModel::exact(target, scheme, m)?;
            let phi = PhiSolver::new(&model)?.solve(t, b)?;
            csvio::write_phi(output(r.raw("out", out))?, &phi)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

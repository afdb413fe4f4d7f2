use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hinform::givens::{canonicalize, OpCounter};
use hinform::hin::{
    angles_to_hin, classify, hin_to_angles, split_degenerate, AngleVector, HinOperator, HinPair,
    DEFAULT_ZERO_TOL,
};
use hinform::linalg::{trace_drift, trace_powers, Matrix};
use hinform::sysid::{run_trials, ExperimentConfig, SimConfig};
use hinform::system_file::{parse_square_matrix, SystemContent, SystemFile};
use hinform::transform::{to_standard_hin, PipelineError, PipelineOptions, Stage};
use hinform::Error;

/// Hessenberg input-normal realizations: reduce, synthesize, identify, benchmark.
#[derive(Parser)]
#[command(name = "hinform", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Input system file, or `-` for stdin.
    input: String,
    /// Write the result here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an (A, B) file to canonical HIN angles.
    Reduce {
        #[command(flatten)]
        io: Io,
        /// Stein doubling tolerance.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 60)]
        max_doublings: usize,
    },
    /// Materialize an angle file into (A, B).
    Synth {
        #[command(flatten)]
        io: Io,
    },
    /// Run the RLS conditioning experiment.
    Identify {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_std: f64,
        #[arg(long, default_value_t = 0.0)]
        obs_noise_std: f64,
        /// Comparison similarity: comma-separated diagonal or JSON nested rows.
        #[arg(long)]
        compare_transform: Option<String>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Time implicit versus dense state advances.
    Bench {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate HIN invariants and print classification flags.
    Check {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        zero_tol: f64,
    },
}

/// Failure with its process exit code.
enum Failure {
    Input(String),
    Unstable(String),
    Uncontrollable(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Unstable(_) => 2,
            Failure::Uncontrollable(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Unstable(m) | Failure::Uncontrollable(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match (e.stage, &e.source) {
            (Stage::Stein, Error::NotConverged { .. }) => Failure::Unstable(msg),
            (Stage::Balance, Error::NotPositiveDefinite { .. }) => Failure::Uncontrollable(msg),
            _ => Failure::Input(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_input(path: &str) -> CliResult<SystemFile> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Failure::Input(format!("stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
    }
    SystemFile::parse(&text).map_err(|e| Failure::Input(format!("{path}: {e}")))
}

fn write_output(io: &Io, text: &str) -> CliResult<()> {
    match &io.output {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Failure::Input(format!("stdout: {e}")))
        }
    }
}

/// Angles and (possibly transformed) `C` for any system file.
fn load_angles(
    file: &SystemFile,
    opts: PipelineOptions,
) -> CliResult<(AngleVector, Option<Matrix>)> {
    match &file.content {
        SystemContent::Angles(a) => Ok((a.clone(), file.c.clone())),
        SystemContent::Pair(pair) => {
            if let Ok(hin) = HinPair::from_input_pair(pair.clone()) {
                if classify(&hin, DEFAULT_ZERO_TOL).standard {
                    return Ok((hin_to_angles(&hin)?, file.c.clone()));
                }
            }
            let (hin, record) = to_standard_hin(pair, opts)?;
            let c = match &file.c {
                Some(c) => Some(c.matmul(&record.t_total)?),
                None => None,
            };
            Ok((hin_to_angles(&hin)?, c))
        }
    }
}

fn cmd_reduce(io: &Io, tol: f64, max_doublings: usize) -> CliResult<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Input(format!("--tol {tol} must be positive")));
    }
    let file = read_input(&io.input)?;
    let SystemContent::Pair(pair) = &file.content else {
        return Err(Failure::Input("reduce expects a file with A and B".into()));
    };
    let opts = PipelineOptions {
        stein_tol: tol,
        max_doublings,
    };
    let (hin, record) = to_standard_hin(pair, opts)?;
    let angles = hin_to_angles(&hin)?;
    let c = match &file.c {
        Some(c) => Some(c.matmul(&record.t_total)?),
        None => None,
    };
    let class = classify(&hin, DEFAULT_ZERO_TOL);
    let residual = |name: &str| record.residual(name).unwrap_or(f64::NAN);
    let diagnostics = json!({
        "input_normal_residual": residual("input_normal"),
        "stein_residual": residual("stein"),
        "hessenberg_orthogonality": residual("hessenberg"),
        "trace_drift": residual("trace_drift"),
        "class": class,
    });
    let out = SystemFile::from_angles(angles, c);
    write_output(io, &out.to_json_string(Some(diagnostics)))
}

fn cmd_synth(io: &Io) -> CliResult<()> {
    let file = read_input(&io.input)?;
    let SystemContent::Angles(angles) = &file.content else {
        return Err(Failure::Input("synth expects a file with thetas".into()));
    };
    let canonical = if angles.domain().contains(angles.thetas()) {
        angles.clone()
    } else {
        eprintln!("warning: thetas outside the canonical angle domain; canonicalized");
        let thetas = canonicalize(angles.thetas(), angles.n(), angles.d())?;
        AngleVector::new(angles.n(), angles.d(), thetas)?
    };
    let pair = angles_to_hin(&canonical).into_input_pair();
    let out = SystemFile::from_pair(pair, file.c.clone());
    write_output(io, &out.to_json_string(None))
}

#[allow(clippy::too_many_arguments)]
fn cmd_identify(
    io: &Io,
    seed: u64,
    steps: usize,
    noise_std: f64,
    obs_noise_std: f64,
    compare_transform: Option<&str>,
    trials: usize,
    ridge: f64,
) -> CliResult<()> {
    if steps == 0 {
        return Err(Failure::Input("--steps must be at least 1".into()));
    }
    if trials == 0 {
        return Err(Failure::Input("--trials must be at least 1".into()));
    }
    let file = read_input(&io.input)?;
    if file.c.is_none() {
        return Err(Failure::Input("identify needs C in the system file".into()));
    }
    let (angles, c) = load_angles(&file, PipelineOptions::default())?;
    let c = c.expect("checked above");
    let mut cfg = ExperimentConfig::new(SimConfig {
        steps,
        seed,
        noise_std,
        obs_noise_std,
    });
    cfg.ridge = ridge;
    cfg.comparison_transform = compare_transform
        .map(|text| parse_square_matrix(text, angles.n()))
        .transpose()?;
    let reports = run_trials(&angles, &c, &cfg, trials)?;

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    };
    let hin_conds: Vec<f64> = reports.iter().map(|r| r.hin.cond_estimate).collect();
    let cmp_conds: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.comparison.as_ref().map(|b| b.cond_estimate))
        .collect();
    let summary = json!({
        "trials": trials,
        "median_cond_hin": median(hin_conds.clone()),
        "median_cond_comparison": if cmp_conds.is_empty() { None } else { Some(median(cmp_conds.clone())) },
    });

    eprintln!(
        "{:>8} {:>14} {:>14} {:>14} {:>14}",
        "seed", "cond(HIN)", "C err(HIN)", "cond(cmp)", "C err(cmp)"
    );
    for r in &reports {
        let (cc, ce) = r
            .comparison
            .as_ref()
            .map_or(("-".to_string(), "-".to_string()), |b| {
                (
                    format!("{:.6e}", b.cond_estimate),
                    format!("{:.3e}", b.c_error),
                )
            });
        eprintln!(
            "{:>8} {:>14.6} {:>14.3e} {:>14} {:>14}",
            r.seed, r.hin.cond_estimate, r.hin.c_error, cc, ce
        );
    }
    let report = json!({ "summary": summary, "reports": reports });
    write_output(
        io,
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )
}

fn cmd_bench(io: &Io, reps: usize, seed: u64) -> CliResult<()> {
    if reps == 0 {
        return Err(Failure::Input("--reps must be at least 1".into()));
    }
    let file = read_input(&io.input)?;
    let (angles, _) = load_angles(&file, PipelineOptions::default())?;
    let (n, d) = (angles.n(), angles.d());
    let op = HinOperator::new(&angles);
    let pair = angles_to_hin(&angles).into_input_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..reps)
        .map(|_| {
            (
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();

    let mut implicit_ns = Vec::with_capacity(reps);
    let mut dense_ns = Vec::with_capacity(reps);
    let mut max_diff = 0.0f64;
    let expected = 4 * (n * d) as u64;
    for (z, e) in &inputs {
        let mut counter = OpCounter::new();
        let t0 = Instant::now();
        let fast = op.advance(z, e, &mut counter)?;
        implicit_ns.push(t0.elapsed().as_nanos() as f64);
        let t0 = Instant::now();
        let dense = pair.advance_dense(z, e)?;
        dense_ns.push(t0.elapsed().as_nanos() as f64);
        if counter.mults != expected {
            return Err(Failure::Input(format!(
                "implicit advance used {} multiplications, expected {expected}",
                counter.mults
            )));
        }
        for (a, b) in fast.iter().zip(&dense) {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.len() > 1).then(|| {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        });
        json!({ "mean_ns": mean, "std_ns": std })
    };
    let report = json!({
        "n": n,
        "d": d,
        "reps": reps,
        "implicit": { "mults_per_advance": expected, "timing": stats(&implicit_ns) },
        "dense": { "mults_per_advance": n * (n + d), "timing": stats(&dense_ns) },
        "max_abs_difference": max_diff,
    });
    write_output(
        io,
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )
}

fn cmd_check(io: &Io, zero_tol: f64) -> CliResult<()> {
    let file = read_input(&io.input)?;
    let pair = match &file.content {
        SystemContent::Angles(a) => angles_to_hin(a),
        SystemContent::Pair(p) => match HinPair::from_input_pair(p.clone()) {
            Ok(hin) => hin,
            Err(e) => {
                let report = json!({
                    "valid": false,
                    "error": e.to_string(),
                    "input_normal_residual": p.input_normal_residual(),
                });
                write_output(
                    io,
                    &serde_json::to_string_pretty(&report).expect("serializable"),
                )?;
                return Err(Failure::Input(format!("not a HIN pair: {e}")));
            }
        },
    };
    let class = classify(&pair, zero_tol);
    let (m, _) = split_degenerate(&pair, zero_tol);
    let tp = trace_powers(pair.a(), 1)?;
    let report = json!({
        "valid": true,
        "n": pair.n(),
        "d": pair.d(),
        "input_normal_residual": pair.input_normal_residual(),
        "class": class,
        "leading_identity_block": m,
        "trace": tp[0],
        "trace_drift_self": trace_drift(&tp, &tp),
    });
    write_output(
        io,
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Reduce {
            io,
            tol,
            max_doublings,
        } => cmd_reduce(&io, tol, max_doublings),
        Command::Synth { io } => cmd_synth(&io),
        Command::Identify {
            io,
            seed,
            steps,
            noise_std,
            obs_noise_std,
            compare_transform,
            trials,
            ridge,
        } => cmd_identify(
            &io,
            seed,
            steps,
            noise_std,
            obs_noise_std,
            compare_transform.as_deref(),
            trials,
            ridge,
        ),
        Command::Bench { io, reps, seed } => cmd_bench(&io, reps, seed),
        Command::Check { io, zero_tol } => cmd_check(&io, zero_tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

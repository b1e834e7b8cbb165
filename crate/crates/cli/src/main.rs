#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array1;

use logsketch::data::TurnstileReader;
use logsketch::experiment::{run_experiment, summary_path, ExperimentPlan};
use logsketch::objectives::ClipSpec;
use logsketch::sketch::{clip_from_fraction, validate_theory_params};
use logsketch::solver::{minimize_clipped, minimize_weighted, SolveOptions};
use logsketch::{datagen, io as lio, signed_design_matrix, SketchConfig, SketchState, SketchedDataset};

#[derive(Parser)]
#[command(name = "logsketch", version, about = "One-pass sketches for logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Libsvm,
    Csv,
    Turnstile,
}

#[derive(Subcommand)]
enum Command {
    /// Write the two-outlier synthetic dataset (LIBSVM, or CSV for a .csv path).
    GenSynthetic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a sketch from a dataset or a turnstile stream.
    Sketch {
        /// Input path, or `-` for stdin.
        #[arg(long = "in")]
        input: String,
        #[arg(long, value_enum)]
        format: InputFormat,
        /// Number of levels, including level 0.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 64)]
        buckets: usize,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        branch: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Append a constant 1 feature (dataset formats only).
        #[arg(long)]
        intercept: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on a sketch file.
    Solve {
        #[arg(long)]
        sketch: PathBuf,
        /// Buckets kept per level: a count `K`, or a fraction of `N` in (0, 1).
        #[arg(long)]
        clip: Option<String>,
        #[arg(long = "out-model")]
        out_model: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run an experiment plan and write per-cell results plus medians.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check sketch parameters against the inequalities behind its guarantees.
    ValidateParams {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 64)]
        buckets: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        branch: Option<f64>,
        /// Large-coordinate threshold; defaults to the bucket count.
        #[arg(long)]
        m: Option<f64>,
    },
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?))
}

fn open_input(input: &str) -> CliResult<Box<dyn BufRead>> {
    if input == "-" {
        return Ok(Box::new(BufReader::new(io::stdin().lock())));
    }
    let f = File::open(input).map_err(|e| format!("{input}: {e}"))?;
    Ok(Box::new(BufReader::new(f)))
}

fn levels_to_max(levels: usize) -> CliResult<usize> {
    levels.checked_sub(1).ok_or_else(|| "--levels must be at least 1".into())
}

/// `K` from a count or a fraction of the bucket count.
fn parse_clip(spec: &str, buckets: usize) -> CliResult<usize> {
    if let Ok(k) = spec.parse::<usize>() {
        return Ok(k);
    }
    let frac: f64 = spec.parse().map_err(|_| format!("--clip {spec:?} is neither a count nor a fraction"))?;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(format!("--clip fraction {frac} outside (0, 1]").into());
    }
    Ok(clip_from_fraction(buckets, frac))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sketch(
    input: &str,
    format: InputFormat,
    levels: usize,
    buckets: usize,
    sample: Option<usize>,
    branch: Option<f64>,
    seed: u64,
    intercept: bool,
    out: &Path,
) -> CliResult<()> {
    let reader = open_input(input)?;
    let name = if input == "-" { "<stdin>" } else { input };
    let configure = |n: usize, d: usize| -> CliResult<SketchConfig> {
        let mut b = SketchConfig::builder(n, d).buckets(buckets).max_level(levels_to_max(levels)?).seed(seed);
        if let Some(k) = sample {
            b = b.sample_size(k);
        }
        if let Some(br) = branch {
            b = b.branching(br);
        }
        Ok(b.build()?)
    };
    let state = match format {
        InputFormat::Turnstile => {
            if intercept {
                return Err("--intercept does not apply to turnstile input".into());
            }
            let stream = TurnstileReader::new(reader, name)?;
            let mut state = SketchState::new(configure(stream.n(), stream.d())?)?;
            for u in stream {
                state.apply_update(u?)?;
            }
            state
        }
        InputFormat::Libsvm | InputFormat::Csv => {
            let mut data = match format {
                InputFormat::Libsvm => lio::parse_libsvm(reader, name, None)?,
                _ => lio::parse_csv(reader, name)?,
            };
            if intercept {
                data = data.with_intercept();
            }
            let a = signed_design_matrix(&data);
            let mut state = SketchState::new(configure(a.n(), a.d())?)?;
            for (i, row) in a.rows().rows().into_iter().enumerate() {
                state.add_row(i, row)?;
            }
            state
        }
    };
    let sketch = state.finalize();
    let mut w = create(out)?;
    sketch.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("wrote {} rows ({}) to {}", sketch.len(), sketch.config(), out.display());
    Ok(())
}

fn cmd_solve(path: &Path, clip: Option<&str>, out_model: &Path, max_iters: Option<usize>) -> CliResult<()> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let sketch = SketchedDataset::read_csv(BufReader::new(f), &path.display().to_string())?;
    let x0 = Array1::zeros(sketch.config().d());
    let result = match clip {
        Some(spec) => {
            let keep = parse_clip(spec, sketch.config().buckets())?;
            let clip = ClipSpec::for_sketch(&sketch, keep)?;
            let mut opts = SolveOptions::subgradient();
            opts.max_iters = max_iters.unwrap_or(opts.max_iters);
            eprintln!("clipped objective, K = {keep}");
            minimize_clipped(&sketch, &clip, x0.view(), &opts)?
        }
        None => {
            let mut opts = SolveOptions::smooth();
            opts.max_iters = max_iters.unwrap_or(opts.max_iters);
            minimize_weighted(sketch.rows(), sketch.weights(), x0.view(), &opts)?
        }
    };
    let mut w = create(out_model)?;
    for v in &result.x {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    println!(
        "loss={} iters={} converged={}",
        result.loss, result.iters, result.converged
    );
    Ok(())
}

fn cmd_experiment(config: &Path, out: &Path) -> CliResult<()> {
    let plan = ExperimentPlan::from_file(config)?;
    let outcome = run_experiment(&plan)?;
    if !outcome.optimum_converged {
        eprintln!("warning: full-data optimum did not reach tolerance; ratios may be below 1");
    }
    for f in &outcome.failures {
        eprintln!("cell {} size={} rep={} failed: {}", f.method, f.size, f.rep, f.message);
    }
    lio::write_results_csv(out, &outcome.records)?;
    let summary = summary_path(out);
    lio::write_summary_csv(&summary, &outcome.summary)?;
    for s in &outcome.summary {
        println!("{:<15} size={:<6} median_ratio={:.6}", s.method, s.size, s.median_ratio);
    }
    eprintln!("wrote {} and {}", out.display(), summary.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    n: usize,
    d: usize,
    mu: f64,
    eps: f64,
    delta: f64,
    buckets: usize,
    levels: usize,
    branch: Option<f64>,
    m: Option<f64>,
) -> CliResult<()> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) || !(mu >= 1.0) {
        return Err("need eps > 0, delta in (0, 1) and mu >= 1".into());
    }
    let mut b = SketchConfig::builder(n, d).buckets(buckets).max_level(levels_to_max(levels)?).sample_size(0);
    if let Some(br) = branch {
        b = b.branching(br);
    }
    let config = b.build()?;
    let report = validate_theory_params(&config, mu, eps, delta, m.unwrap_or(buckets as f64));
    println!("{config}");
    println!("scaled eps = {:.6e}", report.scaled_eps);
    if report.ok() {
        println!("all assumptions hold");
    }
    for v in &report.violations {
        println!("violated: {v}");
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenSynthetic { n, out, seed } => {
            let data = datagen::gen_synthetic(n, seed)?;
            let mut w = create(&out)?;
            if out.extension().is_some_and(|e| e == "csv") {
                lio::write_csv(&mut w, &data)?;
            } else {
                lio::write_libsvm(&mut w, &data)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Sketch {
            input,
            format,
            levels,
            buckets,
            sample,
            branch,
            seed,
            intercept,
            out,
        } => cmd_sketch(&input, format, levels, buckets, sample, branch, seed, intercept, &out),
        Command::Solve {
            sketch,
            clip,
            out_model,
            max_iters,
        } => cmd_solve(&sketch, clip.as_deref(), &out_model, max_iters),
        Command::Experiment { config, out } => cmd_experiment(&config, &out),
        Command::ValidateParams {
            n,
            d,
            mu,
            eps,
            delta,
            buckets,
            levels,
            branch,
            m,
        } => cmd_validate(n, d, mu, eps, delta, buckets, levels, branch, m),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}


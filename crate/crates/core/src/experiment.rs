//! Experiment harness: sweeps summary sizes for each method, solves on the
//! summary, and scores the result on the full data.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::baselines::{l2s_from_probabilities, l2s_probabilities, sgd_one_pass, shuffled_order, uniform_coreset};
use crate::data::{signed_design_matrix, SignedMatrix};
use crate::datagen::{DataSource, DatasetSpec, NoiseSpec};
use crate::error::{Error, Result};
use crate::hash::hash_bytes;
use crate::io::{ResultRecord, SummaryRecord};
use crate::objectives::{logistic_loss, ClipSpec};
use crate::sketch::{clip_from_fraction, sketch_matrix, SketchConfig, DEFAULT_CLIP_FRACTION};
use crate::solver::{minimize_clipped, minimize_full, minimize_weighted, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sketch,
    SketchClipped,
    Uniform,
    Sgd,
    L2s,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Sketch, Method::SketchClipped, Method::Uniform, Method::Sgd, Method::L2s];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sketch => "sketch",
            Method::SketchClipped => "sketch-clipped",
            Method::Uniform => "uniform",
            Method::Sgd => "sgd",
            Method::L2s => "l2s",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

pub const DEFAULT_REPS: usize = 20;
pub const DEFAULT_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    /// Target summary sizes; `None` means [`DEFAULT_STEPS`] equal steps.
    pub sizes: Option<Vec<usize>>,
    pub reps: usize,
    pub seed_base: u64,
    /// Step constant `c` in `eta_t = c / sqrt(t)`.
    pub sgd_step: f64,
    pub clip_fraction: f64,
    pub parallel: bool,
}

impl ExperimentPlan {
    pub fn new(dataset: DatasetSpec) -> Self {
        Self {
            dataset,
            methods: Method::ALL.to_vec(),
            sizes: None,
            reps: DEFAULT_REPS,
            seed_base: 0,
            sgd_step: 1.0,
            clip_fraction: DEFAULT_CLIP_FRACTION,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if let Some(sizes) = &self.sizes {
            if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "sizes must be positive and strictly increasing, got {sizes:?}"
                )));
            }
        }
        if !(self.sgd_step > 0.0) || !(self.clip_fraction > 0.0 && self.clip_fraction <= 1.0) {
            return Err(Error::InvalidConfig("sgd_step must be positive and clip_fraction in (0, 1]".into()));
        }
        Ok(())
    }

    /// Parses a flat `key = value` plan. `#` starts a comment.
    ///
    /// ```text
    /// dataset = synthetic        # synthetic | clouds | libsvm | csv
    /// n = 100000
    /// methods = sketch, uniform, sgd
    /// sizes = 100, 200, 500
    /// reps = 20
    /// seed = 7
    /// ```
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut kind = None;
        let mut path: Option<PathBuf> = None;
        let (mut n, mut d, mut separation, mut data_seed) = (None, 2usize, 4.0f64, 0u64);
        let mut intercept = false;
        let (mut noise_fraction, mut noise_sigma, mut noise_seed) = (None, 10.0f64, 0u64);
        let mut plan = ExperimentPlan::new(DatasetSpec::new(DataSource::Synthetic { n: 1, seed: 0 }));

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(name, line, format!("expected key = value, got {content:?}")))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let bad = |what: &str| Error::parse(name, line, format!("{key}: {what} {value:?}"));
            let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad("expected an integer, got"));
            let real = |v: &str| v.trim().parse::<f64>().map_err(|_| bad("expected a number, got"));
            match key {
                "dataset" => kind = Some(value.to_string()),
                "path" => path = Some(PathBuf::from(value)),
                "n" => n = Some(num(value)?),
                "d" => d = num(value)?,
                "separation" => separation = real(value)?,
                "data_seed" => data_seed = value.parse().map_err(|_| bad("expected a u64, got"))?,
                "intercept" => intercept = value.parse().map_err(|_| bad("expected true or false, got"))?,
                "noise_fraction" => noise_fraction = Some(real(value)?),
                "noise_sigma" => noise_sigma = real(value)?,
                "noise_seed" => noise_seed = value.parse().map_err(|_| bad("expected a u64, got"))?,
                "methods" => {
                    plan.methods = value
                        .split(',')
                        .map(|m| m.trim().parse())
                        .collect::<Result<_>>()
                        .map_err(|e| Error::parse(name, line, e.to_string()))?;
                }
                "sizes" => plan.sizes = Some(value.split(',').map(num).collect::<Result<_>>()?),
                "reps" => plan.reps = num(value)?,
                "seed" | "seed_base" => plan.seed_base = value.parse().map_err(|_| bad("expected a u64, got"))?,
                "sgd_step" => plan.sgd_step = real(value)?,
                "clip_fraction" => plan.clip_fraction = real(value)?,
                "parallel" => plan.parallel = value.parse().map_err(|_| bad("expected true or false, got"))?,
                _ => return Err(Error::parse(name, line, format!("unknown key {key:?}"))),
            }
        }

        let need_n = || n.ok_or_else(|| Error::parse(name, 0, "dataset needs n"));
        let need_path = || path.clone().ok_or_else(|| Error::parse(name, 0, "dataset needs path"));
        let source = match kind.as_deref() {
            Some("synthetic") => DataSource::Synthetic { n: need_n()?, seed: data_seed },
            Some("clouds") => DataSource::Clouds {
                n: need_n()?,
                d,
                separation,
                seed: data_seed,
            },
            Some("libsvm") => DataSource::Libsvm(need_path()?),
            Some("csv") => DataSource::Csv(need_path()?),
            Some(other) => return Err(Error::parse(name, 0, format!("unknown dataset kind {other:?}"))),
            None => return Err(Error::parse(name, 0, "missing dataset")),
        };
        plan.dataset = DatasetSpec {
            source,
            add_intercept: intercept,
            noise: noise_fraction.map(|fraction| NoiseSpec {
                fraction,
                sigma: noise_sigma,
                seed: noise_seed,
            }),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// `DEFAULT_STEPS` equally spaced sizes, the largest at most `n`.
pub fn default_sizes(n: usize) -> Vec<usize> {
    let step = (n / 1000).max(20).min((n / DEFAULT_STEPS).max(1));
    let mut sizes: Vec<usize> = (1..=DEFAULT_STEPS).map(|i| (i * step).min(n)).collect();
    sizes.dedup();
    sizes
}

/// `f(A x_tilde) / f(A x_star)` on the full data.
pub fn approximation_ratio(a: &SignedMatrix, x_tilde: ArrayView1<'_, f64>, x_star: ArrayView1<'_, f64>) -> Result<f64> {
    let rows = a.rows();
    let denom = logistic_loss(rows.dot(&x_star).view());
    if !(denom > 0.0) {
        return Err(Error::Undefined(format!(
            "optimal loss {denom} is not positive; the data is separable"
        )));
    }
    Ok(logistic_loss(rows.dot(&x_tilde).view()) / denom)
}

/// Per-cell seed derived from the plan seed and the cell coordinates.
pub fn cell_seed(seed_base: u64, method: Method, size: usize, rep: usize) -> u64 {
    seed_base ^ hash_bytes(0, format!("{}/{size}/{rep}", method.name()).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub method: Method,
    pub size: usize,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<ResultRecord>,
    pub summary: Vec<SummaryRecord>,
    pub failures: Vec<CellFailure>,
    pub optimum: Array1<f64>,
    pub optimum_loss: f64,
    /// Whether the full-data solver met its tolerance.
    pub optimum_converged: bool,
}

struct Context<'a> {
    a: &'a SignedMatrix,
    x_star: ArrayView1<'a, f64>,
    plan: &'a ExperimentPlan,
    l2s: Option<(Array1<f64>, f64)>,
}

struct CellResult {
    ratio: f64,
    reduce_ms: f64,
    total_ms: f64,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn run_cell(ctx: &Context<'_>, method: Method, size: usize, rep: usize) -> Result<CellResult> {
    let a = ctx.a;
    let d = a.d();
    let zero = Array1::<f64>::zeros(d);
    let opts = SolveOptions::smooth();
    let start = Instant::now();
    let (x, reduce_ms) = match method {
        Method::Sketch | Method::SketchClipped => {
            let config = SketchConfig::for_budget(a.n(), d, size, cell_seed(ctx.plan.seed_base, method, size, rep))?;
            let sketch = sketch_matrix(a, &config)?.finalize();
            let reduce_ms = ms(start);
            let x = if method == Method::Sketch {
                minimize_weighted(sketch.rows(), sketch.weights(), zero.view(), &opts)?.x
            } else {
                let keep = clip_from_fraction(config.buckets(), ctx.plan.clip_fraction);
                let clip = ClipSpec::for_sketch(&sketch, keep)?;
                minimize_clipped(&sketch, &clip, zero.view(), &SolveOptions::subgradient())?.x
            };
            (x, reduce_ms)
        }
        Method::Uniform => {
            let sample = uniform_coreset(a, size.min(a.n()), cell_seed(ctx.plan.seed_base, method, size, rep))?;
            let reduce_ms = ms(start);
            (minimize_weighted(sample.data.rows(), sample.data.weights(), zero.view(), &opts)?.x, reduce_ms)
        }
        Method::L2s => {
            let (p, setup_ms) = ctx.l2s.as_ref().expect("probabilities computed when l2s is selected");
            let sample = l2s_from_probabilities(a, p, size, cell_seed(ctx.plan.seed_base, method, size, rep))?;
            let reduce_ms = setup_ms + ms(start);
            let x = minimize_weighted(sample.data.rows(), sample.data.weights(), zero.view(), &opts)?.x;
            (x, reduce_ms)
        }
        Method::Sgd => {
            let order = shuffled_order(a.n(), cell_seed(ctx.plan.seed_base, method, 0, rep));
            let rows = a.rows();
            let x = sgd_one_pass(order.iter().map(|&i| rows.row(i)), zero.view(), ctx.plan.sgd_step);
            (x, ms(start))
        }
    };
    let total_ms = if method == Method::L2s { ctx.l2s.as_ref().map_or(0.0, |l| l.1) + ms(start) } else { ms(start) };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Undefined("solution has non-finite entries".into()));
    }
    Ok(CellResult {
        ratio: approximation_ratio(a, x.view(), ctx.x_star)?,
        reduce_ms,
        total_ms,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Medians per (method, size), ignoring failed cells.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRecord> {
    let mut out: Vec<SummaryRecord> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let end = records[start..]
            .iter()
            .position(|r| r.method != head.method || r.size != head.size)
            .map_or(records.len(), |p| start + p);
        let group = &records[start..end];
        let ok: Vec<&ResultRecord> = group.iter().filter(|r| r.ratio.is_finite()).collect();
        out.push(SummaryRecord {
            dataset: head.dataset.clone(),
            method: head.method.clone(),
            size: head.size,
            reps: group.len(),
            failed: group.len() - ok.len(),
            median_ratio: median(ok.iter().map(|r| r.ratio).collect()),
            median_reduce_ms: median(ok.iter().map(|r| r.reduce_ms).collect()),
            median_total_ms: median(ok.iter().map(|r| r.total_ms).collect()),
        });
        start = end;
    }
    out
}

/// Runs every (method, size, rep) cell. Records come out ordered by method,
/// then size, then rep regardless of scheduling. SGD does not depend on the
/// size, so each rep is run once and repeated across sizes.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let data = plan.dataset.load()?;
    run_on_matrix(plan, &plan.dataset.name(), &signed_design_matrix(&data))
}

/// [`run_experiment`] on an already loaded signed matrix.
pub fn run_on_matrix(plan: &ExperimentPlan, dataset: &str, a: &SignedMatrix) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let sizes = plan.sizes.clone().unwrap_or_else(|| default_sizes(a.n()));
    let full = minimize_full(a, Array1::zeros(a.d()).view(), &SolveOptions::smooth())?;
    let l2s = if plan.methods.contains(&Method::L2s) {
        let start = Instant::now();
        let p = l2s_probabilities(a)?;
        Some((p, ms(start)))
    } else {
        None
    };
    let ctx = Context {
        a,
        x_star: full.x.view(),
        plan,
        l2s,
    };

    let mut cells: Vec<(Method, usize, usize)> = Vec::new();
    for &m in &plan.methods {
        let cell_sizes: &[usize] = if m == Method::Sgd { &sizes[..1] } else { &sizes };
        for &s in cell_sizes {
            for r in 0..plan.reps {
                cells.push((m, s, r));
            }
        }
    }
    let eval = |&(m, s, r): &(Method, usize, usize)| run_cell(&ctx, m, s, r);
    let results: Vec<Result<CellResult>> = if plan.parallel {
        cells.par_iter().map(eval).collect()
    } else {
        cells.iter().map(eval).collect()
    };
    let lookup = |m: Method, s: usize, r: usize| {
        let s = if m == Method::Sgd { sizes[0] } else { s };
        let idx = cells.iter().position(|c| *c == (m, s, r)).expect("cell was scheduled");
        &results[idx]
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &m in &plan.methods {
        for &s in &sizes {
            for r in 0..plan.reps {
                let (ratio, reduce_ms, total_ms) = match lookup(m, s, r) {
                    Ok(c) => (c.ratio, c.reduce_ms, c.total_ms),
                    Err(e) => {
                        failures.push(CellFailure {
                            method: m,
                            size: s,
                            rep: r,
                            message: e.to_string(),
                        });
                        (f64::NAN, f64::NAN, f64::NAN)
                    }
                };
                records.push(ResultRecord {
                    dataset: dataset.to_string(),
                    method: m.name().to_string(),
                    size: s,
                    rep: r,
                    ratio,
                    reduce_ms,
                    total_ms,
                });
            }
        }
    }
    Ok(ExperimentOutcome {
        summary: summarize(&records),
        records,
        failures,
        optimum_loss: full.loss,
        optimum: full.x,
        optimum_converged: full.converged,
    })
}

/// `results.csv` -> `results_summary.csv`.
pub fn summary_path(results: &Path) -> PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    results.with_file_name(format!("{stem}_summary.csv"))
}

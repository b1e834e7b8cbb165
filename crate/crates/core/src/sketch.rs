//! Oblivious turnstile sketch for logistic regression.
//!
//! Every row index `p` is assigned a level `h` with probability
//! `1 / (beta * b^h)` and, within that level, one of `N` buckets uniformly.
//! Rows sharing a bucket are summed with weight `beta * b^h`. On top of the
//! `(h_max + 1) * N` bucket rows the sketch keeps a uniform sample of `k` raw
//! rows. Both choices are seeded hash functions of the row index, so an
//! update `(row, col, value)` can be routed without any per-row state, in
//! constant time, and in any order.
//!
//! The resulting map is linear in the input matrix: sketches of disjoint
//! stream shards built with the same configuration can be merged by
//! entrywise addition.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{SignedMatrix, TurnstileUpdate, WeightedDataset};
use crate::error::{Error, Result};
use crate::hash::{self, TAG_BUCKET, TAG_LEVEL, TAG_SAMPLE};

/// Default number of levels above level 0.
pub const DEFAULT_MAX_LEVEL: usize = 2;
/// Default fraction of each level's buckets kept by the clipped objective.
pub const DEFAULT_CLIP_FRACTION: f64 = 0.25;
/// Smallest branching parameter used when the default rule would go below 2.
const MIN_BRANCHING: f64 = 2.0 + 1e-6;

/// `beta = (b - b^-h_max) / (b - 1)`, the normaliser that makes the level
/// probabilities `1 / (beta * b^h)` sum to one.
pub fn derive_beta(branching: f64, max_level: usize) -> Result<f64> {
    if !(branching > 2.0) || !branching.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "branching parameter must be a finite value > 2, got {branching}"
        )));
    }
    Ok((branching - branching.powi(-(max_level as i32))) / (branching - 1.0))
}

/// Default branching `b = (n / m)^(1 / h_max)` with `m = N`, clamped above 2.
pub fn default_branching(n: usize, buckets: usize, max_level: usize) -> f64 {
    if max_level == 0 {
        return 4.0;
    }
    let b = (n as f64 / buckets.max(1) as f64).powf(1.0 / max_level as f64);
    if b.is_finite() && b > MIN_BRANCHING {
        b
    } else {
        MIN_BRANCHING
    }
}

/// All sketch hyperparameters. Build one with [`SketchConfig::builder`].
#[derive(Debug, Clone, PartialEq)]
pub struct SketchConfig {
    n: usize,
    d: usize,
    buckets: usize,
    branching: f64,
    max_level: usize,
    sample_size: usize,
    clip: usize,
    seed: u64,
    beta: f64,
    // Derived tables.
    level_cdf: Vec<f64>,
    level_scale: Vec<f64>,
}

impl SketchConfig {
    pub fn builder(n: usize, d: usize) -> SketchConfigBuilder {
        SketchConfigBuilder {
            n,
            d,
            buckets: 64,
            max_level: DEFAULT_MAX_LEVEL,
            branching: None,
            sample_size: None,
            clip: None,
            seed: 0,
        }
    }

    /// Sizes a sketch so that `levels * N + k` is close to `budget` rows,
    /// with one uniform-sample block the size of a level.
    pub fn for_budget(n: usize, d: usize, budget: usize, seed: u64) -> Result<Self> {
        let blocks = DEFAULT_MAX_LEVEL + 2;
        let buckets = budget.div_ceil(blocks).max(1);
        Self::builder(n, d)
            .buckets(buckets)
            .sample_size(buckets.min(n))
            .seed(seed)
            .build()
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    /// Buckets per level, `N`.
    pub fn buckets(&self) -> usize {
        self.buckets
    }
    pub fn branching(&self) -> f64 {
        self.branching
    }
    /// Index of the top level, `h_max`. There are `h_max + 1` levels.
    pub fn max_level(&self) -> usize {
        self.max_level
    }
    pub fn levels(&self) -> usize {
        self.max_level + 1
    }
    /// Size `k` of the uniform row sample.
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }
    /// Entries kept per level by the clipped objective, `K`.
    pub fn clip(&self) -> usize {
        self.clip
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Rows of the finalized summary: `(h_max + 1) * N + k`.
    pub fn summary_rows(&self) -> usize {
        self.levels() * self.buckets + self.sample_size
    }

    /// Probability of each level, `1 / (beta * b^h)`.
    pub fn level_probabilities(&self) -> Vec<f64> {
        self.level_scale.iter().map(|s| 1.0 / s).collect()
    }

    /// Weight `beta * b^h` applied to rows routed to level `h`.
    pub fn level_scale(&self, level: usize) -> f64 {
        self.level_scale[level]
    }

    /// Scale `N * max(h_max, 1)` applied to the bucket block at finalization.
    pub fn finalize_scale(&self) -> f64 {
        (self.buckets * self.max_level.max(1)) as f64
    }

    pub fn with_clip(&self, clip: usize) -> Result<Self> {
        SketchConfigBuilder::from(self).clip(clip).build()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

impl fmt::Display for SketchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "N={} b={} hmax={} k={} seed={} n={} d={}",
            self.buckets, self.branching, self.max_level, self.sample_size, self.seed, self.n, self.d
        )
    }
}

#[derive(Debug, Clone)]
pub struct SketchConfigBuilder {
    n: usize,
    d: usize,
    buckets: usize,
    max_level: usize,
    branching: Option<f64>,
    sample_size: Option<usize>,
    clip: Option<usize>,
    seed: u64,
}

impl From<&SketchConfig> for SketchConfigBuilder {
    fn from(c: &SketchConfig) -> Self {
        Self {
            n: c.n,
            d: c.d,
            buckets: c.buckets,
            max_level: c.max_level,
            branching: Some(c.branching),
            sample_size: Some(c.sample_size),
            clip: Some(c.clip),
            seed: c.seed,
        }
    }
}

impl SketchConfigBuilder {
    pub fn buckets(mut self, buckets: usize) -> Self {
        self.buckets = buckets;
        self
    }
    pub fn max_level(mut self, max_level: usize) -> Self {
        self.max_level = max_level;
        self
    }
    /// Sets `h_max` from a level count (`levels = h_max + 1`).
    pub fn levels(mut self, levels: usize) -> Self {
        self.max_level = levels.saturating_sub(1);
        self
    }
    pub fn branching(mut self, b: f64) -> Self {
        self.branching = Some(b);
        self
    }
    pub fn sample_size(mut self, k: usize) -> Self {
        self.sample_size = Some(k);
        self
    }
    pub fn clip(mut self, k: usize) -> Self {
        self.clip = Some(k);
        self
    }
    pub fn clip_fraction(mut self, frac: f64) -> Self {
        self.clip = Some(clip_from_fraction(self.buckets, frac));
        self
    }
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn build(self) -> Result<SketchConfig> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig(format!(
                "stream dimensions must be positive, got n={} d={}",
                self.n, self.d
            )));
        }
        if self.buckets == 0 {
            return Err(Error::InvalidConfig("need at least one bucket per level".into()));
        }
        let branching = self
            .branching
            .unwrap_or_else(|| default_branching(self.n, self.buckets, self.max_level));
        let beta = derive_beta(branching, self.max_level)?;
        let sample_size = self.sample_size.unwrap_or(self.buckets.min(self.n));
        if sample_size > self.n {
            return Err(Error::InvalidConfig(format!(
                "sample size k={sample_size} exceeds n={}",
                self.n
            )));
        }
        let clip = self
            .clip
            .unwrap_or_else(|| clip_from_fraction(self.buckets, DEFAULT_CLIP_FRACTION));
        if clip == 0 || clip > self.buckets {
            return Err(Error::InvalidConfig(format!(
                "clip count K={clip} must lie in [1, N={}]",
                self.buckets
            )));
        }

        let level_scale: Vec<f64> = (0..=self.max_level)
            .map(|h| beta * branching.powi(h as i32))
            .collect();
        let mut acc = 0.0;
        let mut level_cdf: Vec<f64> = level_scale
            .iter()
            .map(|s| {
                acc += 1.0 / s;
                acc
            })
            .collect();
        *level_cdf.last_mut().expect("at least one level") = 1.0;

        Ok(SketchConfig {
            n: self.n,
            d: self.d,
            buckets: self.buckets,
            branching,
            max_level: self.max_level,
            sample_size,
            clip,
            seed: self.seed,
            beta,
            level_cdf,
            level_scale,
        })
    }
}

/// `K = ceil(frac * N)`, at least 1 and at most `N`.
pub fn clip_from_fraction(buckets: usize, frac: f64) -> usize {
    ((frac * buckets as f64).ceil() as usize).clamp(1, buckets.max(1))
}

/// Clip count from the sketch parameters: `ceil(beta m log2(m / eps) + beta m b log2(b / eps))`,
/// clamped to `[1, N]`. Both logarithms are base 2.
pub fn theory_clip_count(config: &SketchConfig, m: f64, eps: f64) -> Result<usize> {
    if !(m >= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!("need m >= 1 and eps in (0, 1), got m = {m}, eps = {eps}")));
    }
    let (beta, b) = (config.beta(), config.branching());
    let k = beta * m * (m / eps).log2() + beta * m * b * (b / eps).log2();
    Ok((k.ceil() as usize).clamp(1, config.buckets().max(1)))
}

/// Level of a row index, by inverting the level CDF at a hashed uniform.
pub fn level_of(row: usize, config: &SketchConfig) -> usize {
    let u = hash::unit_interval(hash::keyed(config.seed, TAG_LEVEL, row as u64));
    config
        .level_cdf
        .iter()
        .position(|&c| u < c)
        .unwrap_or(config.max_level)
}

/// Bucket of a row index within its level.
pub fn bucket_of(row: usize, level: usize, config: &SketchConfig) -> usize {
    let key = (row as u64) ^ ((level as u64) << 56);
    hash::bounded(hash::keyed(config.seed, TAG_BUCKET, key), config.buckets)
}

/// `k` distinct row indices drawn uniformly without replacement, as a pure
/// function of `(n, k, seed)`.
pub fn sample_row_indices(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::InvalidConfig(format!("cannot sample k={k} of n={n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hash::keyed(seed, TAG_SAMPLE, n as u64));
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Counters for the work done by [`SketchState::apply_update`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub updates: u64,
    pub hash_evals: u64,
    pub cell_writes: u64,
}

/// Live accumulator during ingestion. Single writer.
#[derive(Debug, Clone)]
pub struct SketchState {
    config: SketchConfig,
    /// Bucket `g` of level `h` lives at row `h * N + g`.
    buckets: Array2<f64>,
    sample_rows: Array2<f64>,
    sample_index: HashMap<usize, usize>,
    stats: UpdateStats,
}

impl SketchState {
    pub fn new(config: SketchConfig) -> Result<Self> {
        let picks = sample_row_indices(config.n, config.sample_size, config.seed)?;
        let sample_index = picks.into_iter().enumerate().map(|(slot, row)| (row, slot)).collect();
        Ok(Self {
            buckets: Array2::zeros((config.levels() * config.buckets, config.d)),
            sample_rows: Array2::zeros((config.sample_size, config.d)),
            sample_index,
            config,
            stats: UpdateStats::default(),
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn buckets(&self) -> ArrayView2<'_, f64> {
        self.buckets.view()
    }

    pub fn sample_rows(&self) -> ArrayView2<'_, f64> {
        self.sample_rows.view()
    }

    /// Row indices in the uniform sample, ordered by their slot.
    pub fn sampled_indices(&self) -> Vec<usize> {
        let mut v: Vec<_> = self.sample_index.iter().map(|(&row, &slot)| (slot, row)).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, row)| row).collect()
    }

    pub fn stats(&self) -> UpdateStats {
        self.stats
    }

    /// Where a row index is routed: `(summary row, weight)`.
    #[inline]
    pub fn route(&self, row: usize) -> (usize, f64) {
        let h = level_of(row, &self.config);
        let g = bucket_of(row, h, &self.config);
        (h * self.config.buckets + g, self.config.level_scale[h])
    }

    pub fn apply_update(&mut self, u: TurnstileUpdate) -> Result<()> {
        if u.row >= self.config.n || u.col >= self.config.d {
            return Err(Error::UpdateOutOfRange {
                update: u,
                n: self.config.n,
                d: self.config.d,
            });
        }
        let (target, scale) = self.route(u.row);
        self.buckets[[target, u.col]] += scale * u.value;
        self.stats.updates += 1;
        self.stats.hash_evals += 2;
        self.stats.cell_writes += 1;
        if let Some(&slot) = self.sample_index.get(&u.row) {
            self.sample_rows[[slot, u.col]] += u.value;
            self.stats.cell_writes += 1;
        }
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = TurnstileUpdate>>(&mut self, stream: I) -> Result<()> {
        stream.into_iter().try_for_each(|u| self.apply_update(u))
    }

    /// Adds a whole row, routing it once. Equivalent to one update per entry.
    pub fn add_row(&mut self, row: usize, values: ArrayView1<'_, f64>) -> Result<()> {
        if row >= self.config.n {
            return Err(Error::UpdateOutOfRange {
                update: TurnstileUpdate::new(row, 0, values.first().copied().unwrap_or(0.0)),
                n: self.config.n,
                d: self.config.d,
            });
        }
        if values.len() != self.config.d {
            return Err(Error::DimensionMismatch {
                context: "row length",
                expected: self.config.d,
                found: values.len(),
            });
        }
        let (target, scale) = self.route(row);
        self.buckets.row_mut(target).scaled_add(scale, &values);
        if let Some(&slot) = self.sample_index.get(&row) {
            self.sample_rows.row_mut(slot).scaled_add(1.0, &values);
        }
        Ok(())
    }

    /// Entrywise sum with a state built from another shard of the stream.
    pub fn merge(&mut self, other: &SketchState) -> Result<()> {
        if self.config != other.config {
            return Err(Error::InvalidConfig(
                "can only merge sketches built with the same configuration".into(),
            ));
        }
        self.buckets += &other.buckets;
        self.sample_rows += &other.sample_rows;
        self.stats.updates += other.stats.updates;
        self.stats.hash_evals += other.stats.hash_evals;
        self.stats.cell_writes += other.stats.cell_writes;
        Ok(())
    }

    pub fn finalize(&self) -> SketchedDataset {
        let c = &self.config;
        let scale = c.finalize_scale();
        let bucket_rows = self.buckets.nrows();
        let mut rows = Array2::zeros((c.summary_rows(), c.d));
        rows.slice_mut(ndarray::s![..bucket_rows, ..])
            .assign(&(&self.buckets * scale));
        rows.slice_mut(ndarray::s![bucket_rows.., ..])
            .assign(&self.sample_rows);
        let mut weights = Array1::from_elem(c.summary_rows(), 1.0 / scale);
        if c.sample_size > 0 {
            weights
                .slice_mut(ndarray::s![bucket_rows..])
                .fill(c.n as f64 / c.sample_size as f64);
        }
        SketchedDataset {
            config: c.clone(),
            rows,
            weights,
        }
    }
}

/// Batch construction; identical to streaming every entry of `a`.
pub fn sketch_matrix(a: &SignedMatrix, config: &SketchConfig) -> Result<SketchState> {
    if a.n() != config.n || a.d() != config.d {
        return Err(Error::DimensionMismatch {
            context: "matrix vs sketch config (rows)",
            expected: config.n * config.d,
            found: a.n() * a.d(),
        });
    }
    let mut state = SketchState::new(config.clone())?;
    for (i, row) in a.rows().axis_iter(Axis(0)).enumerate() {
        state.add_row(i, row)?;
    }
    Ok(state)
}

/// Finalized weighted summary `B` with weights `w`.
///
/// Rows `[0, (h_max+1) N)` hold the bucket block scaled by `N * max(h_max, 1)`
/// with weight `1 / (N * max(h_max, 1))`; the remaining `k` rows are the raw
/// sampled rows with weight `n / k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedDataset {
    config: SketchConfig,
    rows: Array2<f64>,
    weights: Array1<f64>,
}

impl SketchedDataset {
    /// Assembles a summary from explicit rows and weights laid out as
    /// `config` describes.
    pub fn from_parts(config: SketchConfig, rows: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if rows.nrows() != config.summary_rows() || weights.len() != rows.nrows() {
            return Err(Error::DimensionMismatch {
                context: "summary rows",
                expected: config.summary_rows(),
                found: rows.nrows(),
            });
        }
        if rows.ncols() != config.d {
            return Err(Error::DimensionMismatch {
                context: "summary columns",
                expected: config.d,
                found: rows.ncols(),
            });
        }
        WeightedDataset::new(rows.clone(), weights.clone())?;
        Ok(Self { config, rows, weights })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// Start row of each level block.
    pub fn level_offsets(&self) -> Vec<usize> {
        (0..self.config.levels()).map(|h| h * self.config.buckets).collect()
    }

    pub fn level_range(&self, level: usize) -> Range<usize> {
        let start = level * self.config.buckets;
        start..start + self.config.buckets
    }

    pub fn sample_offset(&self) -> usize {
        self.config.levels() * self.config.buckets
    }

    pub fn as_weighted(&self) -> WeightedDataset {
        WeightedDataset::new(self.rows.clone(), self.weights.clone())
            .expect("finalized weights are positive")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let c = &self.config;
        writeln!(
            w,
            "#sketch N={} b={} hmax={} k={} seed={} n={} d={}",
            c.buckets, c.branching, c.max_level, c.sample_size, c.seed, c.n, c.d
        )?;
        let mut line = String::new();
        for (row, weight) in self.rows.axis_iter(Axis(0)).zip(self.weights.iter()) {
            line.clear();
            line.push_str(&weight.to_string());
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(name, 1, "empty sketch file"))?
            .map_err(|e| Error::io(name, e))?;
        let fields = parse_sketch_header(&header)
            .ok_or_else(|| Error::parse(name, 1, format!("bad sketch header {header:?}")))?;
        let config = SketchConfig::builder(fields.n, fields.d)
            .buckets(fields.buckets)
            .max_level(fields.max_level)
            .branching(fields.branching)
            .sample_size(fields.sample_size)
            .seed(fields.seed)
            .build()?;

        let r = config.summary_rows();
        let mut rows = Array2::zeros((r, config.d));
        let mut weights = Array1::zeros(r);
        let mut count = 0;
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if count >= r {
                return Err(Error::parse(name, line_no, format!("more than {r} rows")));
            }
            let mut vals = line.split(',').map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(name, line_no, format!("{t:?}: {e}")))
            });
            weights[count] = vals
                .next()
                .ok_or_else(|| Error::parse(name, line_no, "missing weight"))??;
            let mut j = 0;
            for v in vals {
                if j >= config.d {
                    return Err(Error::parse(name, line_no, format!("more than d={} values", config.d)));
                }
                rows[[count, j]] = v?;
                j += 1;
            }
            if j != config.d {
                return Err(Error::parse(name, line_no, format!("expected {} values, got {j}", config.d)));
            }
            count += 1;
        }
        if count != r {
            return Err(Error::parse(name, count + 1, format!("expected {r} rows, got {count}")));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::parse(name, 0, "weights must be positive"));
        }
        Ok(Self { config, rows, weights })
    }
}

struct SketchHeader {
    buckets: usize,
    branching: f64,
    max_level: usize,
    sample_size: usize,
    seed: u64,
    n: usize,
    d: usize,
}

fn parse_sketch_header(line: &str) -> Option<SketchHeader> {
    let rest = line.trim().strip_prefix("#sketch")?;
    let mut kv = HashMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=')?;
        kv.insert(k, v);
    }
    Some(SketchHeader {
        buckets: kv.get("N")?.parse().ok()?,
        branching: kv.get("b")?.parse().ok()?,
        max_level: kv.get("hmax")?.parse().ok()?,
        sample_size: kv.get("k")?.parse().ok()?,
        seed: kv.get("seed")?.parse().ok()?,
        n: kv.get("n")?.parse().ok()?,
        d: kv.get("d")?.parse().ok()?,
    })
}

/// One inequality of the theory's parameter assumptions, with both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub clause: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (lhs {:.6e} < rhs {:.6e})", self.clause, self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    /// Per-coordinate error actually plugged into the inequalities, `eps / (mu + 1)`.
    pub scaled_eps: f64,
    pub violations: Vec<Violation>,
}

impl TheoryReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the parameter inequalities under which the sketch's guarantees are
/// proven. Advisory only: violations are reported, never enforced. The
/// unspecified constant in the lower bound on `N` is taken as 1.
pub fn validate_theory_params(config: &SketchConfig, mu: f64, eps: f64, delta: f64, m: f64) -> TheoryReport {
    let n = config.n as f64;
    let d = config.d as f64;
    let b = config.branching;
    let beta = config.beta;
    let eps_s = eps / (mu + 1.0);
    let m_eps2 = m * eps_s * eps_s;
    let finite_or_neg_inf = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };

    let checks: [(&'static str, f64, f64); 8] = [
        ("eps' < 1/3", 1.0 / 3.0, eps),
        ("m eps^2 >= -4 ln(delta)", m_eps2, -4.0 * delta.ln()),
        (
            "m eps^2 >= 3 ln(beta m log2(m/eps))",
            m_eps2,
            3.0 * (beta * m * (m / eps_s).log2()).ln(),
        ),
        (
            "m eps^2 >= 2 ln(log2(n/(m eps)) + 1)",
            m_eps2,
            2.0 * ((n / (m * eps_s)).log2() + 1.0).ln(),
        ),
        (
            "m eps^2 >= 2 d ln(1 + n/(m eps)) - ln(delta)",
            m_eps2,
            2.0 * d * (1.0 + n / (m * eps_s)).ln() - delta.ln(),
        ),
        ("b >= m", b, m),
        ("b >= 1/delta", b, 1.0 / delta),
        (
            "N >= b m^2 d^2 / (eps delta)",
            config.buckets as f64,
            b * m * m * d * d / (eps_s * delta),
        ),
    ];
    let violations = checks
        .into_iter()
        .filter_map(|(clause, lhs, rhs)| {
            let rhs = finite_or_neg_inf(rhs);
            let violated = if clause.starts_with("eps'") { !(rhs < lhs) } else { lhs < rhs };
            violated.then_some(Violation { clause, lhs, rhs })
        })
        .collect();
    TheoryReport {
        scaled_eps: eps_s,
        violations,
    }
}

//! Synthetic datasets, noise corruption, and dataset loading by spec.

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::io;

/// The two-outlier dataset: `n - 2` identical bulk points `(1, 1)` labelled
/// `+1`, plus outliers `(m, 0)` and `(0, m)` labelled `-1`, with `m = n - 2`.
///
/// The signed rows sum to zero, so every direction splits `Ax` into equal
/// positive and negative mass and `mu = 1`. The unique optimum is `x = 0`.
/// Each outlier has l1 leverage exactly 1/2 (attained along `(1, -1)`), every
/// bulk row has l1 leverage `1 / (2m)`. Without the outliers the bulk is
/// separable, so a summary that misses either of them drives the solution
/// away from the optimum.
pub fn gen_synthetic(n: usize, seed: u64) -> Result<LabeledDataset> {
    gen_synthetic_jittered(n, 0.0, seed)
}

/// [`gen_synthetic`] with i.i.d. `N(0, jitter^2)` added to the bulk points.
pub fn gen_synthetic_jittered(n: usize, jitter: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!("synthetic dataset needs n >= 4, got {n}")));
    }
    let bulk = n - 2;
    let m = bulk as f64;
    let mut x = Array2::ones((n, 2));
    if jitter > 0.0 {
        let noise = Normal::new(0.0, jitter).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in x.slice_mut(ndarray::s![..bulk, ..]).iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    x.row_mut(bulk).assign(&ndarray::arr1(&[m, 0.0]));
    x.row_mut(bulk + 1).assign(&ndarray::arr1(&[0.0, m]));
    let mut labels = Array1::ones(n);
    labels[bulk] = -1.0;
    labels[bulk + 1] = -1.0;
    LabeledDataset::new(x, labels)
}

/// Two Gaussian clouds with identity covariance and means `+-separation/2`
/// along the all-ones direction; labels are drawn fairly.
pub fn gaussian_clouds(n: usize, d: usize, separation: f64, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("clouds need n >= 1 and d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = 0.5 * separation / (d as f64).sqrt();
    let labels: Array1<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let x = Array2::from_shape_fn((n, d), |(i, _)| labels[i] * shift + rng.sample::<f64, _>(StandardNormal));
    LabeledDataset::new(x, labels)
}

/// Adds i.i.d. `N(0, sigma^2)` to every feature of `floor(fraction * n)`
/// uniformly chosen rows. Labels are left untouched.
pub fn add_noise(data: &LabeledDataset, fraction: f64, sigma: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let n = data.n();
    let count = (fraction * n as f64).floor() as usize;
    let (mut x, labels) = data.clone().into_parts();
    if count == 0 {
        return LabeledDataset::new(x, labels);
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(format!("noise sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, count).into_vec();
    rows.sort_unstable();
    for i in rows {
        for v in x.row_mut(i).iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    LabeledDataset::new(x, labels)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Libsvm(PathBuf),
    Csv(PathBuf),
    Synthetic { n: usize, seed: u64 },
    Clouds { n: usize, d: usize, separation: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    pub add_intercept: bool,
    pub noise: Option<NoiseSpec>,
}

impl DatasetSpec {
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            add_intercept: false,
            noise: None,
        }
    }

    /// Loads the data, corrupts it if requested, then appends the intercept.
    pub fn load(&self) -> Result<LabeledDataset> {
        if let Some(noise) = &self.noise {
            if !(0.0..=1.0).contains(&noise.fraction) || !(noise.sigma > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "noise needs fraction in [0, 1] and sigma > 0, got {noise:?}"
                )));
            }
        }
        let mut data = match &self.source {
            DataSource::Libsvm(p) => io::read_libsvm(p)?,
            DataSource::Csv(p) => io::read_csv(p)?,
            DataSource::Synthetic { n, seed } => gen_synthetic(*n, *seed)?,
            DataSource::Clouds { n, d, separation, seed } => gaussian_clouds(*n, *d, *separation, *seed)?,
        };
        if let Some(noise) = &self.noise {
            data = add_noise(&data, noise.fraction, noise.sigma, noise.seed)?;
        }
        if self.add_intercept {
            data = data.with_intercept();
        }
        Ok(data)
    }

    /// Short name used in result files.
    pub fn name(&self) -> String {
        let base = match &self.source {
            DataSource::Libsvm(p) | DataSource::Csv(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into()),
            DataSource::Synthetic { n, .. } => format!("synthetic_n_{n}"),
            DataSource::Clouds { n, d, .. } => format!("clouds_n_{n}_d_{d}"),
        };
        match self.noise {
            Some(_) => format!("{base}_noisy"),
            None => base,
        }
    }
}

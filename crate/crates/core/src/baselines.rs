//! Comparison methods: uniform sampling, one-pass SGD, and the
//! square-root-of-l2-leverage coreset.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{SignedMatrix, WeightedDataset};
use crate::error::{Error, Result};
use crate::objectives::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoresetKind {
    Uniform,
    L2s,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoresetSample {
    pub data: WeightedDataset,
    pub kind: CoresetKind,
    pub size: usize,
    pub seed: u64,
    /// Source row of each sampled row.
    pub indices: Vec<usize>,
}

fn gather(a: &SignedMatrix, indices: &[usize]) -> Array2<f64> {
    a.rows().select(Axis(0), indices)
}

/// `size` rows drawn i.i.d. uniformly with replacement, each weighted `n / size`.
pub fn uniform_coreset(a: &SignedMatrix, size: usize, seed: u64) -> Result<CoresetSample> {
    let n = a.n();
    if size == 0 || size > n {
        return Err(Error::InvalidConfig(format!("uniform sample size {size} outside [1, {n}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
    let weights = Array1::from_elem(size, n as f64 / size as f64);
    Ok(CoresetSample {
        data: WeightedDataset::new(gather(a, &indices), weights)?,
        kind: CoresetKind::Uniform,
        size,
        seed,
        indices,
    })
}

/// A visiting order for one SGD pass.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// One pass of `x <- x - (c / sqrt(t)) * sigma(a_t x) * a_t` over the rows,
/// in the order given. Returns the final iterate.
pub fn sgd_one_pass<'a, I>(rows: I, x0: ArrayView1<'_, f64>, step_constant: f64) -> Array1<f64>
where
    I: IntoIterator<Item = ArrayView1<'a, f64>>,
{
    let mut x = x0.to_owned();
    for (t, row) in rows.into_iter().enumerate() {
        let eta = step_constant / ((t + 1) as f64).sqrt();
        let s = sigmoid(row.dot(&x));
        x.scaled_add(-eta * s, &row);
    }
    x
}

/// Squared row norms of an orthonormal basis for the column space of `a`.
/// Rank-deficient inputs use only the numerically nonzero part of the
/// pivoted factorization.
pub fn leverage_scores_l2(a: &SignedMatrix) -> Array1<f64> {
    let (n, d) = (a.n(), a.d());
    let rows = a.rows();
    let m = DMatrix::from_fn(n, d, |i, j| rows[[i, j]]);
    let qr = m.col_piv_qr();
    let r = qr.r();
    let diag_max = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].abs())
        .fold(0.0, f64::max);
    let tol = diag_max * (n.max(d) as f64) * f64::EPSILON;
    let rank = (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].abs() > tol)
        .count();
    let q = qr.q();
    (0..n)
        .map(|i| (0..rank).map(|j| q[(i, j)] * q[(i, j)]).sum())
        .collect()
}

/// Sampling probabilities proportional to `sqrt(tau_i)`.
pub fn l2s_probabilities(a: &SignedMatrix) -> Result<Array1<f64>> {
    let roots = leverage_scores_l2(a).mapv(|t| t.max(0.0).sqrt());
    let total: f64 = roots.sum();
    if !(total > 0.0) {
        return Err(Error::Undefined("all leverage scores are zero".into()));
    }
    Ok(roots / total)
}

/// `size` i.i.d. draws with `p_i ~ sqrt(tau_i)`, weighted `1 / (size * p_i)`.
pub fn l2s_coreset(a: &SignedMatrix, size: usize, seed: u64) -> Result<CoresetSample> {
    if size == 0 {
        return Err(Error::InvalidConfig("l2s sample size must be at least 1".into()));
    }
    let p = l2s_probabilities(a)?;
    l2s_from_probabilities(a, &p, size, seed)
}

/// As [`l2s_coreset`], reusing precomputed probabilities.
pub fn l2s_from_probabilities(a: &SignedMatrix, p: &Array1<f64>, size: usize, seed: u64) -> Result<CoresetSample> {
    if size == 0 {
        return Err(Error::InvalidConfig("l2s sample size must be at least 1".into()));
    }
    let dist = WeightedIndex::new(p.iter().copied())
        .map_err(|e| Error::Undefined(format!("invalid sampling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..size).map(|_| dist.sample(&mut rng)).collect();
    let weights = indices.iter().map(|&i| 1.0 / (size as f64 * p[i])).collect();
    Ok(CoresetSample {
        data: WeightedDataset::new(gather(a, &indices), weights)?,
        kind: CoresetKind::L2s,
        size,
        seed,
        indices,
    })
}

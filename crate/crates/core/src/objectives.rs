//! Logistic loss, its positive-part surrogate `G+`, and the clipped
//! (top-K per level) objectives evaluated on a sketch.

use std::cmp::Ordering;
use std::ops::Range;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::SignedMatrix;
use crate::error::{Error, Result};
use crate::sketch::SketchedDataset;

/// Above this, `ln(1 + e^v)` is evaluated as `v + ln(1 + e^-v)`.
const OVERFLOW_THRESHOLD: f64 = 35.0;

/// `g(v) = ln(1 + e^v)`, overflow-safe.
#[inline]
pub fn stable_logistic(v: f64) -> f64 {
    if v > OVERFLOW_THRESHOLD {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + e^-v)`, the derivative of [`stable_logistic`].
#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn logistic_loss(z: ArrayView1<'_, f64>) -> f64 {
    z.iter().map(|&v| stable_logistic(v)).sum()
}

pub fn weighted_logistic_loss(z: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> f64 {
    z.iter().zip(w.iter()).map(|(&v, &wi)| wi * stable_logistic(v)).sum()
}

/// `sum_i w_i * sigma(m_i x) * m_i`; unit weights when `w` is `None`.
pub fn logistic_grad(m: ArrayView2<'_, f64>, w: Option<ArrayView1<'_, f64>>, x: ArrayView1<'_, f64>) -> Array1<f64> {
    loss_and_grad(m, w, x).1
}

/// Weighted logistic loss of `m x` together with its gradient, in one pass.
pub fn loss_and_grad(
    m: ArrayView2<'_, f64>,
    w: Option<ArrayView1<'_, f64>>,
    x: ArrayView1<'_, f64>,
) -> (f64, Array1<f64>) {
    let z = m.dot(&x);
    let mut coef = Array1::zeros(z.len());
    let mut loss = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        let wi = w.map_or(1.0, |w| w[i]);
        loss += wi * stable_logistic(zi);
        coef[i] = wi * sigmoid(zi);
    }
    (loss, m.t().dot(&coef))
}

/// `G+(z)`: sum of the nonnegative entries.
pub fn gplus(z: ArrayView1<'_, f64>) -> f64 {
    z.iter().filter(|v| **v >= 0.0).sum()
}

/// Lower and upper bounds `(f(z-) + G+(z)) / 2 <= f(z) <= f(z-) + G+(z)`,
/// where `z-` zeroes the positive entries of `z`.
pub fn split_bounds(z: ArrayView1<'_, f64>) -> (f64, f64) {
    let f_neg: f64 = z.iter().map(|&v| stable_logistic(v.min(0.0))).sum();
    let upper = f_neg + gplus(z);
    (0.5 * upper, upper)
}

/// Block layout of a sketch for the clipped objectives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipSpec {
    pub levels: Vec<Range<usize>>,
    pub sample: Range<usize>,
    pub keep: usize,
}

impl ClipSpec {
    pub fn new(levels: Vec<Range<usize>>, sample: Range<usize>, keep: usize) -> Result<Self> {
        let mut next = 0;
        for r in levels.iter().chain(std::iter::once(&sample)) {
            if r.start != next || r.end < r.start {
                return Err(Error::InvalidConfig(format!(
                    "blocks must partition the rows contiguously, block {r:?} does not start at {next}"
                )));
            }
            next = r.end;
        }
        if let Some(r) = levels.iter().find(|r| keep > r.len()) {
            return Err(Error::InvalidConfig(format!(
                "clip count K={keep} exceeds level block size {}",
                r.len()
            )));
        }
        Ok(Self { levels, sample, keep })
    }

    /// Layout of `sketch` keeping `keep` entries per level.
    pub fn for_sketch(sketch: &SketchedDataset, keep: usize) -> Result<Self> {
        let levels = (0..sketch.config().levels()).map(|h| sketch.level_range(h)).collect();
        Self::new(levels, sketch.sample_offset()..sketch.len(), keep)
    }

    pub fn rows(&self) -> usize {
        self.sample.end
    }
}

/// Indices of the `k` largest entries of `values[range]`, ties broken by
/// lower index.
fn top_k(values: ArrayView1<'_, f64>, range: Range<usize>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = range.collect();
    let cmp = |a: &usize, b: &usize| {
        values[*b]
            .partial_cmp(&values[*a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < idx.len() {
        if k > 0 {
            idx.select_nth_unstable_by(k - 1, cmp);
        }
        idx.truncate(k);
    }
    idx
}

/// Clipped `G+`: per level, `G+` of the `K` largest buckets, weighted by
/// `level_weights[h]`.
pub fn gplus_clipped(sz: ArrayView1<'_, f64>, clip: &ClipSpec, level_weights: &[f64]) -> Result<f64> {
    if level_weights.len() != clip.levels.len() {
        return Err(Error::DimensionMismatch {
            context: "level weights",
            expected: clip.levels.len(),
            found: level_weights.len(),
        });
    }
    if sz.len() < clip.sample.start {
        return Err(Error::DimensionMismatch {
            context: "sketched vector length",
            expected: clip.sample.start,
            found: sz.len(),
        });
    }
    let mut total = 0.0;
    for (range, &w) in clip.levels.iter().zip(level_weights) {
        if clip.keep > range.len() {
            return Err(Error::InvalidConfig(format!(
                "clip count K={} exceeds block size {}",
                clip.keep,
                range.len()
            )));
        }
        let s: f64 = top_k(sz, range.clone(), clip.keep)
            .into_iter()
            .map(|i| sz[i].max(0.0))
            .sum();
        total += w * s;
    }
    Ok(total)
}

/// Rows that contribute to the clipped objective at `z = Bx`.
fn active_rows(z: ArrayView1<'_, f64>, clip: &ClipSpec) -> Vec<usize> {
    let mut rows: Vec<usize> = clip
        .levels
        .iter()
        .flat_map(|r| top_k(z, r.clone(), clip.keep))
        .collect();
    rows.extend(clip.sample.clone());
    rows
}

fn check_clip(sketch: &SketchedDataset, clip: &ClipSpec) {
    assert_eq!(clip.rows(), sketch.len(), "clip spec does not match sketch layout");
}

/// Full weighted loss on the sample block plus, per level block, the weighted
/// loss of only the `K` largest entries of `Bx`.
pub fn clipped_weighted_loss(sketch: &SketchedDataset, x: ArrayView1<'_, f64>, clip: &ClipSpec) -> f64 {
    clipped_loss_and_subgrad(sketch, x, clip).0
}

/// A subgradient of [`clipped_weighted_loss`]: the gradient through the rows
/// selected at `x`.
pub fn clipped_weighted_subgrad(sketch: &SketchedDataset, x: ArrayView1<'_, f64>, clip: &ClipSpec) -> Array1<f64> {
    clipped_loss_and_subgrad(sketch, x, clip).1
}

pub fn clipped_loss_and_subgrad(
    sketch: &SketchedDataset,
    x: ArrayView1<'_, f64>,
    clip: &ClipSpec,
) -> (f64, Array1<f64>) {
    check_clip(sketch, clip);
    let rows = sketch.rows();
    let w = sketch.weights();
    let z = rows.dot(&x);
    let mut loss = 0.0;
    let mut grad = Array1::zeros(x.len());
    for i in active_rows(z.view(), clip) {
        loss += w[i] * stable_logistic(z[i]);
        grad.scaled_add(w[i] * sigmoid(z[i]), &rows.row(i));
    }
    (loss, grad)
}

/// Heuristic lower bound on `mu_A = sup_x ||(Ax)+||_1 / ||(Ax)-||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuEstimate {
    /// `f64::INFINITY` when some probe separates the rows.
    pub value: f64,
    pub witness: Array1<f64>,
}

impl MuEstimate {
    pub fn is_unbounded(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `max(pos/neg, neg/pos)` of `Ax`; `None` when `Ax = 0`.
fn mu_ratio(a: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>) -> Option<f64> {
    let z = a.dot(&x);
    let (mut pos, mut neg) = (0.0, 0.0);
    for v in z {
        if v > 0.0 {
            pos += v;
        } else {
            neg -= v;
        }
    }
    match (pos > 0.0, neg > 0.0) {
        (false, false) => None,
        (true, false) | (false, true) => Some(f64::INFINITY),
        (true, true) => Some((pos / neg).max(neg / pos)),
    }
}

/// Probes coordinate axes and random Gaussian directions, then refines the
/// best direction by random local search. Always a lower bound on `mu_A`.
pub fn mu_lower_bound(a: &SignedMatrix, probes: usize, seed: u64) -> Result<MuEstimate> {
    let m = a.rows();
    if m.iter().all(|v| *v == 0.0) {
        return Err(Error::Undefined("mu is undefined for the zero matrix".into()));
    }
    let d = m.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = MuEstimate {
        value: f64::NEG_INFINITY,
        witness: Array1::zeros(d),
    };
    let consider = |x: Array1<f64>, best: &mut MuEstimate| {
        if let Some(r) = mu_ratio(m, x.view()) {
            if r > best.value {
                best.value = r;
                best.witness = x;
            }
        }
    };

    for j in 0..d {
        let mut e = Array1::zeros(d);
        e[j] = 1.0;
        consider(e, &mut best);
    }
    for _ in 0..probes.max(1) {
        let x: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        consider(x, &mut best);
    }
    let mut radius = 0.5;
    for _ in 0..probes.max(1) {
        if best.value.is_infinite() {
            break;
        }
        let scale = best.witness.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let step: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let cand = &best.witness + &(step * (radius * scale));
        let before = best.value;
        consider(cand, &mut best);
        if best.value <= before {
            radius = (radius * 0.9).max(1e-6);
        }
    }
    if best.value == f64::NEG_INFINITY {
        return Err(Error::Undefined("every probe direction gave Ax = 0".into()));
    }
    best.value = best.value.max(1.0);
    Ok(best)
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;
    use crate::sketch::{sketch_matrix, SketchConfig};
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn numeric_grad(m: ArrayView2<'_, f64>, w: ArrayView1<'_, f64>, x: &Array1<f64>) -> Array1<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|j| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                (weighted_logistic_loss(m.dot(&xp).view(), w) - weighted_logistic_loss(m.dot(&xm).view(), w)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn stable_logistic_values() {
        assert_eq!(stable_logistic(0.0), LN2);
        assert_eq!(stable_logistic(1000.0), 1000.0);
        assert_eq!(stable_logistic(-1000.0), 0.0);
        assert!(stable_logistic(f64::NAN).is_nan());
        assert!((stable_logistic(35.5) - 35.5).abs() < 1e-14);
        assert!((stable_logistic(34.9) - (34.9f64.exp()).ln_1p()).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert!((logistic_loss(Array1::zeros(5).view()) - 5.0 * LN2).abs() < 1e-14);
        let z = array![1.0, -1.0];
        let expected = (1.0 + 1f64.exp()).ln() + (1.0 + (-1f64).exp()).ln();
        assert!((weighted_logistic_loss(z.view(), array![1.0, 1.0].view()) - expected).abs() < 1e-14);
        assert!((expected - 1.62652).abs() < 1e-5);
        let w3 = array![3.0, 3.0];
        assert!((weighted_logistic_loss(z.view(), w3.view()) - 3.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_zero_is_half_row_sum() {
        let m = array![[1.0, 2.0], [-3.0, 0.5], [0.0, 1.0]];
        let w = array![1.0, 2.0, 0.5];
        let g = logistic_grad(m.view(), Some(w.view()), Array1::zeros(2).view());
        let expected = 0.5 * m.t().dot(&w);
        assert!((&g - &expected).iter().all(|v| v.abs() < 1e-15));
        let zero = logistic_grad(Array2::zeros((3, 2)).view(), None, array![1.0, -4.0].view());
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(1..20);
            let d = rng.random_range(1..6);
            let m = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
            let w: Array1<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
            let x: Array1<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = logistic_grad(m.view(), Some(w.view()), x.view());
            let num = numeric_grad(m.view(), w.view(), &x);
            for (a, b) in g.iter().zip(num.iter()) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn gplus_examples() {
        assert_eq!(gplus(array![1.0, -2.0, 3.0].view()), 4.0);
        assert_eq!(gplus(array![-1.0, -2.0].view()), 0.0);
        let z = array![0.5, -2.0, 3.0];
        assert!((gplus((&z * 2.5).view()) - 2.5 * gplus(z.view())).abs() < 1e-15);
    }

    #[test]
    fn split_bounds_example() {
        let (lo, hi) = split_bounds(array![1.0, -1.0].view());
        assert!((hi - (LN2 + (-1f64).exp().ln_1p() + 1.0)).abs() < 1e-14);
        assert!((lo - 1.00320).abs() < 1e-5 && (hi - 2.00641).abs() < 1e-5);
        let (lo, hi) = split_bounds(Array1::zeros(4).view());
        assert!((hi - 4.0 * LN2).abs() < 1e-14 && (lo - 2.0 * LN2).abs() < 1e-14);
    }

    #[test]
    fn gplus_clipped_examples() {
        let clip = ClipSpec::new(vec![0..4], 4..4, 2).unwrap();
        let v = array![5.0, -1.0, 3.0, 2.0];
        assert_eq!(gplus_clipped(v.view(), &clip, &[1.5]).unwrap(), 1.5 * 8.0);
        let neg = array![-5.0, -1.0, -3.0, -2.0];
        assert_eq!(gplus_clipped(neg.view(), &clip, &[1.5]).unwrap(), 0.0);
        let full = ClipSpec::new(vec![0..2, 2..4], 4..4, 2).unwrap();
        assert_eq!(gplus_clipped(v.view(), &full, &[1.0, 2.0]).unwrap(), 5.0 + 2.0 * 5.0);
        let bad = ClipSpec { levels: vec![0..2], sample: 2..2, keep: 3 };
        assert!(gplus_clipped(v.view(), &bad, &[1.0]).is_err());
        assert!(ClipSpec::new(vec![0..2], 2..3, 3).is_err());
        assert!(ClipSpec::new(vec![1..2], 2..3, 1).is_err());
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        let v = array![1.0, 3.0, 3.0, 3.0, 0.0];
        let mut t = top_k(v.view(), 0..5, 2);
        t.sort();
        assert_eq!(t, vec![1, 2]);
        assert_eq!(top_k(v.view(), 1..3, 5), vec![1, 2]);
    }

    fn toy_sketch(keep_all: bool) -> (SketchedDataset, ClipSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = SignedMatrix::from_rows(Array2::from_shape_fn((200, 3), |_| rng.random_range(-2.0..2.0)));
        let c = SketchConfig::builder(200, 3).buckets(8).sample_size(10).seed(3).build().unwrap();
        let sk = sketch_matrix(&a, &c).unwrap().finalize();
        let keep = if keep_all { 8 } else { 2 };
        let clip = ClipSpec::for_sketch(&sk, keep).unwrap();
        (sk, clip)
    }

    #[test]
    fn clipping_disabled_equals_weighted_loss() {
        let (sk, clip) = toy_sketch(true);
        let x = array![0.2, -0.4, 1.0];
        let z = sk.rows().dot(&x);
        let full = weighted_logistic_loss(z.view(), sk.weights());
        assert!((clipped_weighted_loss(&sk, x.view(), &clip) - full).abs() < 1e-10 * full);
        let g = logistic_grad(sk.rows(), Some(sk.weights()), x.view());
        let sg = clipped_weighted_subgrad(&sk, x.view(), &clip);
        assert!((&g - &sg).iter().all(|v| v.abs() < 1e-9 * g.iter().map(|t| t.abs()).fold(1.0, f64::max)));
    }

    #[test]
    fn clipped_loss_is_convex_on_probes() {
        let (sk, clip) = toy_sketch(false);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let x1: Array1<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x2: Array1<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t: f64 = rng.random();
            let mid = &x1 * t + &x2 * (1.0 - t);
            let lhs = clipped_weighted_loss(&sk, mid.view(), &clip);
            let rhs = t * clipped_weighted_loss(&sk, x1.view(), &clip) + (1.0 - t) * clipped_weighted_loss(&sk, x2.view(), &clip);
            assert!(lhs <= rhs + 1e-9 * rhs.max(1.0));
        }
    }

    #[test]
    fn clipped_sandwich_against_gplus() {
        let (sk, clip) = toy_sketch(false);
        let c = sk.config().finalize_scale();
        let bucket_rows = sk.sample_offset();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for _ in 0..200 {
            let x: Array1<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let bx = sk.rows().dot(&x);
            // Bucket block of the unscaled sketch, already level-weighted.
            let sx = bx.slice(ndarray::s![..bucket_rows]).mapv(|v| v / c);
            let levels = vec![1.0; clip.levels.len()];
            let gc = gplus_clipped(sx.view(), &clip, &levels).unwrap();
            let bucket_only = ClipSpec::new(clip.levels.clone(), bucket_rows..bucket_rows, clip.keep).unwrap();
            let f: f64 = active_rows(bx.view(), &bucket_only)
                .into_iter()
                .map(|i| sk.weights()[i] * stable_logistic(bx[i]))
                .sum();
            let slack = (clip.levels.len() * clip.keep) as f64 * LN2 / c;
            assert!(gc <= f + 1e-9 && f <= gc + slack + 1e-9, "{gc} {f} {slack}");
            assert!(slack <= LN2);
        }
    }

    #[test]
    fn subgradient_inequality_holds() {
        let (sk, clip) = toy_sketch(false);
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..300 {
            let x: Array1<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Array1<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (fx, sg) = clipped_loss_and_subgrad(&sk, x.view(), &clip);
            let fy = clipped_weighted_loss(&sk, y.view(), &clip);
            assert!(fy >= fx + sg.dot(&(&y - &x)) - 1e-9 * fx.max(1.0));
        }
    }

    #[test]
    fn mu_one_dimensional_cases() {
        let sym = SignedMatrix::from_rows(array![[1.0], [-1.0]]);
        assert_eq!(mu_lower_bound(&sym, 10, 0).unwrap().value, 1.0);
        let skew = SignedMatrix::from_rows(array![[1.0], [1.0], [-1.0]]);
        assert_eq!(mu_lower_bound(&skew, 10, 0).unwrap().value, 2.0);
        let same = SignedMatrix::from_rows(array![[1.0, 2.0], [1.0, 2.0]]);
        assert!(mu_lower_bound(&same, 10, 0).unwrap().is_unbounded());
        assert!(mu_lower_bound(&SignedMatrix::from_rows(Array2::zeros((3, 2))), 10, 0).is_err());
    }

    #[test]
    fn mu_estimate_is_a_lower_bound() {
        // Rows (1,0) x a, (-1,0) x b, (0,1), (0,-1): exact mu = max(a,b)/min(a,b) along e1.
        let mut rows = vec![];
        rows.extend(std::iter::repeat_n([1.0, 0.0], 3));
        rows.extend(std::iter::repeat_n([-1.0, 0.0], 1));
        rows.push([0.0, 1.0]);
        rows.push([0.0, -1.0]);
        let m = Array2::from_shape_vec((rows.len(), 2), rows.concat()).unwrap();
        let est = mu_lower_bound(&SignedMatrix::from_rows(m), 200, 1).unwrap();
        assert!(est.value <= 3.0 + 1e-12);
        assert!(est.value >= 2.5);
    }

    proptest! {
        #[test]
        fn g_bounds(v in -800.0..800.0f64) {
            let g = stable_logistic(v);
            prop_assert!(g >= v.max(0.0) - 1e-12);
            prop_assert!(g <= LN2 + v.max(0.0) + 1e-12);
        }

        #[test]
        fn split_sandwich(z in proptest::collection::vec(-50.0..50.0f64, 1..100)) {
            let z = Array1::from(z);
            let (lo, hi) = split_bounds(z.view());
            let f = logistic_loss(z.view());
            prop_assert!(lo <= f && f <= hi);
        }

        #[test]
        fn top_k_sum_is_tie_invariant(vals in proptest::collection::vec(0i32..4, 1..20), k in 1usize..20, shift in 0usize..20) {
            let n = vals.len();
            let k = k.min(n);
            let v = Array1::from_iter(vals.iter().map(|&x| x as f64));
            let rotated = Array1::from_iter((0..n).map(|i| v[(i + shift) % n]));
            let s1: f64 = top_k(v.view(), 0..n, k).iter().map(|&i| v[i]).sum();
            let s2: f64 = top_k(rotated.view(), 0..n, k).iter().map(|&i| rotated[i]).sum();
            prop_assert_eq!(s1, s2);
        }
    }
}

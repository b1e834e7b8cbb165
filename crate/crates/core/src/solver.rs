//! Convex minimizers for the sketched and full logistic objectives.
//!
//! The smooth solver is L-BFGS with Armijo backtracking. The clipped
//! objective is a pointwise maximum of smooth convex functions, so it is
//! handled by the same quasi-Newton iteration driven by subgradients, with a
//! diminishing-step subgradient move whenever the line search cannot make
//! progress across a kink, and best-so-far tracking.

use std::collections::VecDeque;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::data::SignedMatrix;
use crate::error::{Error, Result};
use crate::objectives::{clipped_loss_and_subgrad, loss_and_grad, ClipSpec};
use crate::sketch::SketchedDataset;

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSchedule {
    Fixed,
    InverseSqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop once `||grad||_inf <= grad_tol * loss`.
    pub grad_tol: f64,
    pub step_schedule: StepSchedule,
    pub initial_step: f64,
    pub history_size: usize,
}

impl SolveOptions {
    pub fn smooth() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            step_schedule: StepSchedule::InverseSqrt,
            initial_step: 1.0,
            history_size: 10,
        }
    }

    pub fn subgradient() -> Self {
        Self {
            max_iters: 2000,
            ..Self::smooth()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.grad_tol > 0.0) || !(self.initial_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solver options need max_iters >= 1 and positive tolerances, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::smooth()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: Array1<f64>,
    pub loss: f64,
    pub iters: usize,
    pub converged: bool,
}

struct History {
    pairs: VecDeque<(Array1<f64>, Array1<f64>, f64)>,
    cap: usize,
}

impl History {
    fn new(cap: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(cap),
            cap,
        }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn push(&mut self, s: Array1<f64>, y: Array1<f64>) {
        let sy = s.dot(&y);
        if self.cap == 0 || !(sy > 1e-12 * s.dot(&s).sqrt() * y.dot(&y).sqrt()) {
            return;
        }
        if self.pairs.len() == self.cap {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: `-H grad`.
    fn direction(&self, grad: &Array1<f64>) -> Array1<f64> {
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * s.dot(&q);
            q.scaled_add(-a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            q *= s.dot(y) / y.dot(y);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * y.dot(&q);
            q.scaled_add(a - b, s);
        }
        -q
    }
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn non_finite(iter: usize, loss: f64, x: &Array1<f64>) -> Error {
    Error::NonFinite {
        iter,
        loss,
        x_norm: inf_norm(x),
    }
}

/// Backtracking search along `dir` from `x`; returns the accepted point.
fn armijo<F>(obj: &F, x: &Array1<f64>, f: f64, g: &Array1<f64>, dir: &Array1<f64>, t0: f64) -> Option<(Array1<f64>, f64, Array1<f64>)>
where
    F: Fn(ArrayView1<'_, f64>) -> (f64, Array1<f64>),
{
    let slope = g.dot(dir);
    if !(slope < 0.0) {
        return None;
    }
    let mut t = t0;
    for _ in 0..MAX_BACKTRACKS {
        let cand = x + &(dir * t);
        let (fc, gc) = obj(cand.view());
        if fc.is_finite() && fc <= f + ARMIJO_C1 * t * slope && fc < f {
            return Some((cand, fc, gc));
        }
        t *= BACKTRACK;
    }
    None
}

/// L-BFGS on a smooth convex objective. The loss sequence is non-increasing.
pub fn minimize_smooth<F>(obj: F, x0: ArrayView1<'_, f64>, opts: &SolveOptions) -> Result<SolveResult>
where
    F: Fn(ArrayView1<'_, f64>) -> (f64, Array1<f64>),
{
    opts.validate()?;
    let mut x = x0.to_owned();
    let (mut f, mut g) = obj(x.view());
    if !f.is_finite() {
        return Err(non_finite(0, f, &x));
    }
    let mut hist = History::new(opts.history_size);
    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol * f {
            converged = true;
            break;
        }
        iters += 1;
        let mut dir = hist.direction(&g);
        let first = hist.pairs.is_empty();
        let t0 = if first { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let mut step = armijo(&obj, &x, f, &g, &dir, t0);
        if step.is_none() && !first {
            hist.clear();
            dir = -&g;
            step = armijo(&obj, &x, f, &g, &dir, (1.0 / inf_norm(&g)).min(1.0));
        }
        let Some((xn, fn_, gn)) = step else {
            // No decrease representable at this precision.
            break;
        };
        hist.push(&xn - &x, &gn - &g);
        x = xn;
        f = fn_;
        g = gn;
    }
    Ok(SolveResult {
        x,
        loss: f,
        iters,
        converged,
    })
}

fn check_weighted(rows: ArrayView2<'_, f64>, weights: ArrayView1<'_, f64>, x0: ArrayView1<'_, f64>) -> Result<()> {
    if rows.nrows() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "weights vs rows",
            expected: rows.nrows(),
            found: weights.len(),
        });
    }
    if rows.ncols() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "x0 vs columns",
            expected: rows.ncols(),
            found: x0.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidConfig(format!("weights must be positive, found {w}")));
    }
    Ok(())
}

/// Minimizes `f_w(Mx) = sum_i w_i ln(1 + exp(m_i x))`.
pub fn minimize_weighted(
    rows: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    x0: ArrayView1<'_, f64>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    check_weighted(rows, weights, x0)?;
    minimize_smooth(|x| loss_and_grad(rows, Some(weights), x), x0, opts)
}

/// Minimizes the unweighted loss `f(Ax)` on the full data.
pub fn minimize_full(a: &SignedMatrix, x0: ArrayView1<'_, f64>, opts: &SolveOptions) -> Result<SolveResult> {
    if a.d() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "x0 vs columns",
            expected: a.d(),
            found: x0.len(),
        });
    }
    let rows = a.rows();
    minimize_smooth(|x| loss_and_grad(rows, None, x), x0, opts)
}

/// Minimizes the clipped sketch objective. Returns the best iterate seen.
pub fn minimize_clipped(
    sketch: &SketchedDataset,
    clip: &ClipSpec,
    x0: ArrayView1<'_, f64>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if clip.rows() != sketch.len() {
        return Err(Error::DimensionMismatch {
            context: "clip layout vs sketch rows",
            expected: sketch.len(),
            found: clip.rows(),
        });
    }
    if x0.len() != sketch.config().d() {
        return Err(Error::DimensionMismatch {
            context: "x0 vs columns",
            expected: sketch.config().d(),
            found: x0.len(),
        });
    }
    let obj = |x: ArrayView1<'_, f64>| clipped_loss_and_subgrad(sketch, x, clip);

    let mut x = x0.to_owned();
    let (mut f, mut g) = obj(x.view());
    if !f.is_finite() {
        return Err(non_finite(0, f, &x));
    }
    let mut best = (x.clone(), f);
    let mut hist = History::new(opts.history_size);
    let mut fallback_steps = 0usize;
    let mut iters = 0;
    let mut converged = false;

    while iters < opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol * f {
            converged = true;
            break;
        }
        iters += 1;
        let first = hist.pairs.is_empty();
        let t0 = if first { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let dir = hist.direction(&g);
        let mut step = armijo(&obj, &x, f, &g, &dir, t0);
        if step.is_none() && !first {
            hist.clear();
            step = armijo(&obj, &x, f, &g, &-&g, (1.0 / inf_norm(&g)).min(1.0));
        }
        match step {
            Some((xn, fn_, gn)) => {
                hist.push(&xn - &x, &gn - &g);
                x = xn;
                f = fn_;
                g = gn;
            }
            None => {
                // Kink: take a plain subgradient step from the best point.
                fallback_steps += 1;
                let eta = match opts.step_schedule {
                    StepSchedule::Fixed => opts.initial_step,
                    StepSchedule::InverseSqrt => opts.initial_step / (fallback_steps as f64).sqrt(),
                };
                let gnorm = g.dot(&g).sqrt();
                if gnorm == 0.0 {
                    converged = true;
                    break;
                }
                let scale = eta * best.0.dot(&best.0).sqrt().max(1.0) / gnorm;
                x = &best.0 - &(&g * scale);
                (f, g) = obj(x.view());
                if !f.is_finite() {
                    return Err(non_finite(iters, f, &x));
                }
                hist.clear();
            }
        }
        if f < best.1 {
            best = (x.clone(), f);
        }
    }
    Ok(SolveResult {
        x: best.0,
        loss: best.1,
        iters,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{logistic_loss, weighted_logistic_loss};
    use crate::sketch::{sketch_matrix, SketchConfig};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn balanced(n: usize) -> SignedMatrix {
        SignedMatrix::from_rows(Array2::from_shape_fn((n, 1), |(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 }))
    }

    #[test]
    fn balanced_data_has_zero_optimum() {
        let a = balanced(10);
        let r = minimize_weighted(a.rows(), Array1::ones(10).view(), array![0.7].view(), &SolveOptions::smooth()).unwrap();
        assert!(r.converged);
        assert!(r.x[0].abs() < 1e-6);
        assert!((r.loss - 10.0 * LN2).abs() < 1e-9);
        let full = minimize_full(&a, array![-3.0].view(), &SolveOptions::smooth()).unwrap();
        assert!((full.loss - 10.0 * LN2).abs() < 1e-9);
    }

    #[test]
    fn separable_data_does_not_converge() {
        let a = SignedMatrix::from_rows(Array2::from_elem((5, 1), -1.0));
        let opts = SolveOptions {
            max_iters: 50,
            ..SolveOptions::smooth()
        };
        let r = minimize_full(&a, array![0.0].view(), &opts).unwrap();
        assert!(!r.converged);
        assert!(r.loss < 1e-6);
        assert!(r.x[0] > 10.0);
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let m = Array2::from_shape_fn((30, 4), |_| rng.random_range(-3.0..3.0));
            let w: Array1<f64> = (0..30).map(|_| rng.random_range(0.5..2.0)).collect();
            let x0: Array1<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f0 = weighted_logistic_loss(m.dot(&x0).view(), w.view());
            for iters in [1, 2, 5, 50] {
                let opts = SolveOptions { max_iters: iters, ..SolveOptions::smooth() };
                let r = minimize_weighted(m.view(), w.view(), x0.view(), &opts).unwrap();
                assert!(r.loss <= f0);
                assert!((r.loss - weighted_logistic_loss(m.dot(&r.x).view(), w.view())).abs() < 1e-9 * r.loss);
            }
        }
    }

    #[test]
    fn grid_oracle_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let m = Array2::from_shape_fn((60, 2), |_| rng.random_range(-2.0..2.0));
            let r = minimize_weighted(m.view(), Array1::ones(60).view(), Array1::zeros(2).view(), &SolveOptions::smooth()).unwrap();
            let mut best = f64::INFINITY;
            let steps = 400;
            for i in 0..=steps {
                for j in 0..=steps {
                    let x = array![-4.0 + 8.0 * i as f64 / steps as f64, -4.0 + 8.0 * j as f64 / steps as f64];
                    best = best.min(logistic_loss(m.dot(&x).view()));
                }
            }
            assert!(r.loss <= best + 1e-9);
            assert!((best - r.loss) / r.loss < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = array![[1.0], [2.0]];
        assert!(minimize_weighted(m.view(), array![1.0, 0.0].view(), array![0.0].view(), &SolveOptions::smooth()).is_err());
        assert!(minimize_weighted(m.view(), array![1.0].view(), array![0.0].view(), &SolveOptions::smooth()).is_err());
        let bad = SolveOptions { max_iters: 0, ..SolveOptions::smooth() };
        assert!(minimize_weighted(m.view(), array![1.0, 1.0].view(), array![0.0].view(), &bad).is_err());
        assert!(minimize_full(&SignedMatrix::from_rows(m), array![0.0, 1.0].view(), &SolveOptions::smooth()).is_err());
    }

    fn sketch_of(a: &SignedMatrix, buckets: usize, seed: u64) -> SketchedDataset {
        let c = SketchConfig::builder(a.n(), a.d()).buckets(buckets).sample_size(buckets).seed(seed).build().unwrap();
        sketch_matrix(a, &c).unwrap().finalize()
    }

    #[test]
    fn clipped_without_clipping_matches_smooth() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = SignedMatrix::from_rows(Array2::from_shape_fn((500, 3), |_| rng.random_range(-1.0..1.0)));
        let sk = sketch_of(&a, 16, 4);
        let clip = ClipSpec::for_sketch(&sk, 16).unwrap();
        let smooth = minimize_weighted(sk.rows(), sk.weights(), Array1::zeros(3).view(), &SolveOptions::smooth()).unwrap();
        let clipped = minimize_clipped(&sk, &clip, Array1::zeros(3).view(), &SolveOptions::subgradient()).unwrap();
        assert!((clipped.loss - smooth.loss).abs() <= 1e-3 * smooth.loss);
    }

    #[test]
    fn clipped_best_so_far_never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = SignedMatrix::from_rows(Array2::from_shape_fn((300, 2), |_| rng.random_range(-1.0..1.0)));
        let sk = sketch_of(&a, 12, 5);
        let clip = ClipSpec::for_sketch(&sk, 3).unwrap();
        for start in [array![0.0, 0.0], array![5.0, -5.0], array![-0.3, 0.1]] {
            let f0 = crate::objectives::clipped_weighted_loss(&sk, start.view(), &clip);
            let r = minimize_clipped(&sk, &clip, start.view(), &SolveOptions::subgradient()).unwrap();
            assert!(r.loss <= f0);
            let again = minimize_clipped(&sk, &clip, start.view(), &SolveOptions::subgradient()).unwrap();
            assert_eq!(r, again);
        }
    }

    #[test]
    fn clipped_keeps_optimal_start() {
        let c = SketchConfig::builder(4, 1).buckets(2).max_level(0).sample_size(0).clip(1).build().unwrap();
        let sk = SketchedDataset::from_parts(c, array![[1.0], [-1.0]], array![1.0, 1.0]).unwrap();
        for keep in [1, 2] {
            let clip = ClipSpec::for_sketch(&sk, keep).unwrap();
            let x0 = array![0.0];
            let f0 = crate::objectives::clipped_weighted_loss(&sk, x0.view(), &clip);
            let r = minimize_clipped(&sk, &clip, x0.view(), &SolveOptions::subgradient()).unwrap();
            assert_eq!(r.loss, f0);
            assert_eq!(r.x, x0);
        }
    }
}

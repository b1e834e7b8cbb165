//! Datasets, signed design matrices and turnstile update streams.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One additive stream element `A[row][col] += value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnstileUpdate {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl TurnstileUpdate {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

/// Design matrix with labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Array2<f64>,
    labels: Array1<f64>,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels vs rows",
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidConfig(format!(
                "dataset must have n >= 1 and d >= 1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if let Some((row, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l != 1.0 && l != -1.0)
        {
            return Err(Error::InvalidLabel { row, label });
        }
        Ok(Self { x, labels })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, f64> {
        self.labels.view()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array1<f64>) {
        (self.x, self.labels)
    }

    /// Appends a constant-one feature column.
    pub fn with_intercept(&self) -> Self {
        let mut x = Array2::ones((self.n(), self.d() + 1));
        x.slice_mut(ndarray::s![.., ..self.d()]).assign(&self.x);
        Self {
            x,
            labels: self.labels.clone(),
        }
    }
}

/// Rows `a_i = -l_i * x_i`; the logistic loss of a dataset at `x` is `f(Ax)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMatrix(Array2<f64>);

impl SignedMatrix {
    /// Wraps an already-signed matrix (e.g. one reconstructed from a stream).
    pub fn from_rows(rows: Array2<f64>) -> Self {
        SignedMatrix(rows)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

/// Rows with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    rows: Array2<f64>,
    weights: Array1<f64>,
}

impl WeightedDataset {
    pub fn new(rows: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if rows.nrows() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "weights vs rows",
                expected: rows.nrows(),
                found: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weights must be positive and finite, found {w}"
            )));
        }
        Ok(Self { rows, weights })
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
}

pub fn signed_design_matrix(data: &LabeledDataset) -> SignedMatrix {
    // Labels were validated at construction.
    let mut a = data.x.clone();
    for (mut row, &l) in a.axis_iter_mut(Axis(0)).zip(data.labels.iter()) {
        row.mapv_inplace(|v| -l * v);
    }
    SignedMatrix(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOrder {
    RowMajor,
    ColumnMajor,
    Shuffled,
}

/// Emits every nonzero entry of `a` as `split_factor` updates summing to it.
pub fn to_update_stream(
    a: &SignedMatrix,
    order: StreamOrder,
    split_factor: usize,
    seed: u64,
) -> Vec<TurnstileUpdate> {
    let split_factor = split_factor.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = a.rows();
    let mut entries: Vec<(usize, usize)> = match order {
        StreamOrder::ColumnMajor => (0..m.ncols())
            .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
            .collect(),
        _ => (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .collect(),
    };
    entries.retain(|&(i, j)| m[[i, j]] != 0.0);

    let mut out = Vec::with_capacity(entries.len() * split_factor);
    for (i, j) in entries {
        let total = m[[i, j]];
        let mut emitted = 0.0;
        for _ in 1..split_factor {
            let part = total * rng.random_range(-1.0..1.0);
            emitted += part;
            out.push(TurnstileUpdate::new(i, j, part));
        }
        out.push(TurnstileUpdate::new(i, j, total - emitted));
    }
    if order == StreamOrder::Shuffled {
        out.shuffle(&mut rng);
    }
    out
}

/// Reference reconstruction of the matrix a stream defines.
pub fn accumulate_updates<'a, I>(stream: I, n: usize, d: usize) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = &'a TurnstileUpdate>,
{
    let mut out = Array2::zeros((n, d));
    for u in stream {
        if u.row >= n || u.col >= d {
            return Err(Error::UpdateOutOfRange { update: *u, n, d });
        }
        out[[u.row, u.col]] += u.value;
    }
    Ok(out)
}

/// Writes the text stream format: a `#turnstile n=<n> d=<d>` header, then
/// one `row,col,value` line per update.
pub fn write_turnstile<W: Write>(mut w: W, n: usize, d: usize, stream: &[TurnstileUpdate]) -> std::io::Result<()> {
    writeln!(w, "#turnstile n={n} d={d}")?;
    for u in stream {
        writeln!(w, "{},{},{}", u.row, u.col, u.value)?;
    }
    w.flush()
}

/// Streaming reader for the turnstile text format.
pub struct TurnstileReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    n: usize,
    d: usize,
    name: String,
}

impl<R: BufRead> TurnstileReader<R> {
    pub fn new(reader: R, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::io(&name, e))?,
            None => return Err(Error::parse(&name, 1, "empty stream, expected #turnstile header")),
        };
        let (n, d) = parse_turnstile_header(&header).ok_or_else(|| {
            Error::parse(&name, 1, format!("bad header {header:?}, expected `#turnstile n=<n> d=<d>`"))
        })?;
        Ok(Self {
            lines,
            line_no: 1,
            n,
            d,
            name,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn parse_line(&self, line: &str) -> Result<TurnstileUpdate> {
        let err = |msg: String| Error::parse(&self.name, self.line_no, msg);
        let mut parts = line.split(',').map(str::trim);
        let (Some(r), Some(c), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected `row,col,value`, got {line:?}")));
        };
        let row = r.parse().map_err(|e| err(format!("row {r:?}: {e}")))?;
        let col = c.parse().map_err(|e| err(format!("col {c:?}: {e}")))?;
        let value = v.parse().map_err(|e| err(format!("value {v:?}: {e}")))?;
        let u = TurnstileUpdate::new(row, col, value);
        if row >= self.n || col >= self.d {
            return Err(err(format!("update {u:?} outside {}x{}", self.n, self.d)));
        }
        Ok(u)
    }
}

impl<R: BufRead> Iterator for TurnstileReader<R> {
    type Item = Result<TurnstileUpdate>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::io(&self.name, e))),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(self.parse_line(trimmed));
        }
    }
}

fn parse_turnstile_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix("#turnstile")?;
    let mut n = None;
    let mut d = None;
    for tok in rest.split_whitespace() {
        let (k, v) = tok.split_once('=')?;
        match k {
            "n" => n = v.parse().ok(),
            "d" => d = v.parse().ok(),
            _ => {}
        }
    }
    Some((n?, d?))
}

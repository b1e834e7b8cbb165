//! Dataset readers and writers (LIBSVM, CSV) and experiment result files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Maps a raw label to `+-1`. Binary files use `{-1, +1}`, `{0, 1}` or
/// `{1, 2}`; the larger value becomes `+1`.
fn normalise_labels(raw: &[f64], name: &str) -> Result<Array1<f64>> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in raw {
        if !distinct.contains(&l) {
            distinct.push(l);
            if distinct.len() > 2 {
                return Err(Error::parse(name, 0, format!("more than two labels: {distinct:?}")));
            }
        }
    }
    let hi = distinct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if distinct.len() == 1 {
        // A single class keeps its sign when it is already +-1.
        let l = distinct[0];
        if l == 1.0 || l == -1.0 {
            return Ok(Array1::from_elem(raw.len(), l));
        }
        return Err(Error::parse(name, 0, format!("single label {l} is not +-1")));
    }
    Ok(raw.iter().map(|&l| if l == hi { 1.0 } else { -1.0 }).collect())
}

/// Parses LIBSVM text (`label idx:value ...`, 1-based indices). The feature
/// count is the largest index seen unless `d` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, d: Option<usize>) -> Result<LabeledDataset> {
    let mut labels = Vec::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_col = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::parse(name, lineno, e.to_string()))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label_tok = parts.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| Error::parse(name, lineno, format!("bad label {label_tok:?}")))?;
        let row = labels.len();
        labels.push(label);
        for tok in parts {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(name, lineno, format!("expected idx:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::parse(name, lineno, format!("bad feature index in {tok:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| Error::parse(name, lineno, format!("bad feature value in {tok:?}")))?;
            max_col = max_col.max(idx);
            entries.push((row, idx - 1, val));
        }
    }
    if labels.is_empty() {
        return Err(Error::parse(name, 0, "no data rows"));
    }
    let d = match d {
        Some(d) if d < max_col => {
            return Err(Error::parse(name, 0, format!("feature index {max_col} exceeds d = {d}")));
        }
        Some(d) => d,
        None => max_col.max(1),
    };
    let mut x = Array2::zeros((labels.len(), d));
    for (i, j, v) in entries {
        x[[i, j]] = v;
    }
    LabeledDataset::new(x, normalise_labels(&labels, name)?)
}

pub fn read_libsvm(path: &Path) -> Result<LabeledDataset> {
    parse_libsvm(open(path)?, &path.display().to_string(), None)
}

pub fn write_libsvm<W: Write>(mut w: W, data: &LabeledDataset) -> std::io::Result<()> {
    for (row, label) in data.features().rows().into_iter().zip(data.labels()) {
        write!(w, "{}", if *label > 0.0 { "+1" } else { "-1" })?;
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses a CSV dataset with a header row; the last column is the label.
pub fn parse_csv<R: Read>(reader: R, name: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::parse(name, 1, "need at least one feature column and a label column"));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(name, line, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::parse(name, line, format!("expected {width} fields, found {}", rec.len())));
        }
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(name, line, format!("column {}: bad number {field:?}", col + 1)))?;
            if col + 1 == width {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::parse(name, 0, "no data rows"));
    }
    let x = Array2::from_shape_vec((labels.len(), width - 1), values).expect("row widths checked");
    LabeledDataset::new(x, normalise_labels(&labels, name)?)
}

pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
    parse_csv(open(path)?, &path.display().to_string())
}

pub fn write_csv<W: Write>(w: W, data: &LabeledDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..data.d()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    wtr.write_record(&header)?;
    for (row, label) in data.features().rows().into_iter().zip(data.labels()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One (method, size, repetition) cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub method: String,
    pub size: usize,
    pub rep: usize,
    pub ratio: f64,
    pub reduce_ms: f64,
    pub total_ms: f64,
}

/// Medians over repetitions of one (method, size) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub dataset: String,
    pub method: String,
    pub size: usize,
    pub reps: usize,
    pub failed: usize,
    pub median_ratio: f64,
    pub median_reduce_ms: f64,
    pub median_total_ms: f64,
}

pub fn write_records<W: Write, T: Serialize>(w: W, records: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results<R: Read>(reader: R) -> Result<Vec<ResultRecord>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)
}

pub fn write_results_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    write_records(create(path)?, records)
}

pub fn write_summary_csv(path: &Path, records: &[SummaryRecord]) -> Result<()> {
    write_records(create(path)?, records)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRecord>> {
    read_results(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn libsvm_basic() {
        let text = "+1 1:0.5 3:2\n-1 2:1.5\n\n# comment\n+1\n";
        let d = parse_libsvm(text.as_bytes(), "t", None).unwrap();
        assert_eq!(d.features(), array![[0.5, 0.0, 2.0], [0.0, 1.5, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(d.labels(), array![1.0, -1.0, 1.0]);
        assert_eq!(parse_libsvm(text.as_bytes(), "t", Some(5)).unwrap().d(), 5);
        assert!(parse_libsvm(text.as_bytes(), "t", Some(2)).is_err());
    }

    #[test]
    fn libsvm_label_mappings() {
        let d = parse_libsvm("1 1:1\n2 1:2\n".as_bytes(), "t", None).unwrap();
        assert_eq!(d.labels(), array![-1.0, 1.0]);
        let d = parse_libsvm("0 1:1\n1 1:2\n".as_bytes(), "t", None).unwrap();
        assert_eq!(d.labels(), array![-1.0, 1.0]);
        assert!(parse_libsvm("0 1:1\n1 1:2\n2 1:3\n".as_bytes(), "t", None).is_err());
    }

    #[test]
    fn libsvm_errors_name_the_line() {
        let err = parse_libsvm("+1 1:1\n+1 0:1\n".as_bytes(), "f.svm", None).unwrap_err();
        assert!(err.to_string().contains("f.svm:2"), "{err}");
        let err = parse_libsvm("+1 1:x\n".as_bytes(), "f.svm", None).unwrap_err();
        assert!(err.to_string().contains("f.svm:1"), "{err}");
        assert!(parse_libsvm("".as_bytes(), "f", None).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let data = LabeledDataset::new(array![[1.0, -2.5], [0.0, 3.25]], array![1.0, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &data).unwrap();
        assert_eq!(parse_csv(buf.as_slice(), "t").unwrap(), data);
        let err = parse_csv("a,b,label\n1,2,1\n1,2\n".as_bytes(), "c.csv").unwrap_err();
        assert!(err.to_string().contains("c.csv:3"), "{err}");
        let err = parse_csv("a,label\n1,1\nzz,-1\n".as_bytes(), "c.csv").unwrap_err();
        assert!(err.to_string().contains("column 1"), "{err}");
    }

    #[test]
    fn results_round_trip() {
        let recs = vec![
            ResultRecord {
                dataset: "synthetic".into(),
                method: "sketch".into(),
                size: 500,
                rep: 3,
                ratio: 1.0125,
                reduce_ms: 12.5,
                total_ms: 40.0,
            },
            ResultRecord {
                dataset: "synthetic".into(),
                method: "sgd".into(),
                size: 500,
                rep: 0,
                ratio: f64::NAN,
                reduce_ms: 0.0,
                total_ms: 1.0,
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dataset,method,size,rep,ratio,reduce_ms,total_ms\n"));
        let back = read_results(buf.as_slice()).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(back[1].ratio.is_nan());
    }

    proptest! {
        #[test]
        fn libsvm_round_trip(
            vals in proptest::collection::vec(-1e6f64..1e6, 12),
            signs in proptest::collection::vec(any::<bool>(), 4),
        ) {
            prop_assume!(signs.iter().any(|s| *s) && signs.iter().any(|s| !*s));
            let x = Array2::from_shape_vec((4, 3), vals).unwrap();
            let y: Array1<f64> = signs.iter().map(|s| if *s { 1.0 } else { -1.0 }).collect();
            let data = LabeledDataset::new(x, y).unwrap();
            let mut buf = Vec::new();
            write_libsvm(&mut buf, &data).unwrap();
            let back = parse_libsvm(buf.as_slice(), "p", Some(3)).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}

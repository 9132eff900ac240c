//! Plain-text file formats.
//!
//! * dataset CSV: one sample per line, `label,f1,...,fm`, no header, labels `1..=C`;
//! * model file v1: header `ALPR-MODEL v1 m=<m> C=<C> n=<n> rho=<rho>`, then the m rows
//!   of `W`, the 0/1 feature mask, the C rows of the training embedding and the
//!   training labels, all whitespace-separated;
//! * trace CSV: `iter,objective`, one row per sweep;
//! * report CSV: `method,run,accuracy` rows followed by a `#`-prefixed summary block.
//!
//! Reals are written with 17 significant digits so they parse back bit-exactly.
//! Every write goes to a sibling temporary file that is then renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::classify::PrunedModel;
use crate::data::{Dataset, Projection};
use crate::error::{AlprError, Result};
use crate::harness::experiment::ExperimentReport;
use crate::solver::FitResult;

const MODEL_MAGIC: &str = "ALPR-MODEL";
const MODEL_VERSION: &str = "v1";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` to `path` via a temporary file and a rename.
pub(crate) fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

struct CsvRows {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    /// 1-based line number of every row.
    lines: Vec<usize>,
}

fn parse_csv(path: &Path) -> Result<CsvRows> {
    let text = fs::read_to_string(path)?;
    let mut out = CsvRows {
        rows: Vec::new(),
        labels: Vec::new(),
        lines: Vec::new(),
    };
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected || expected < 2 {
            return Err(AlprError::RaggedRow {
                path: path.to_path_buf(),
                line: line_no,
                expected: expected.max(2),
                found: fields.len(),
            });
        }
        let label: usize = match fields[0].parse::<usize>() {
            Ok(l) if l >= 1 => l,
            Ok(_) => {
                return Err(AlprError::LabelsNotContiguous {
                    path: path.to_path_buf(),
                    line: line_no,
                    detail: "label 0".into(),
                })
            }
            Err(_) => {
                return Err(AlprError::NonNumericField {
                    path: path.to_path_buf(),
                    line: line_no,
                    field: fields[0].to_string(),
                })
            }
        };
        let row = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| AlprError::NonNumericField {
                    path: path.to_path_buf(),
                    line: line_no,
                    field: f.to_string(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.rows.push(row);
        out.labels.push(label);
        out.lines.push(line_no);
    }
    if out.rows.is_empty() {
        return Err(AlprError::EmptyFile(path.to_path_buf()));
    }
    Ok(out)
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let m = rows[0].len();
    DMatrix::from_fn(m, rows.len(), |i, j| rows[j][i])
}

/// Loads a training dataset. `C` is the largest label, and every class in `1..=C`
/// must occur.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let parsed = parse_csv(path)?;
    let class_count = *parsed.labels.iter().max().expect("non-empty");
    let mut first_seen = vec![None; class_count];
    for (&l, &line) in parsed.labels.iter().zip(&parsed.lines) {
        first_seen[l - 1].get_or_insert(line);
    }
    if let Some(missing) = first_seen.iter().position(Option::is_none) {
        let line = first_seen[class_count - 1].expect("max label seen");
        return Err(AlprError::LabelsNotContiguous {
            path: path.to_path_buf(),
            line,
            detail: format!("label {class_count} present but label {} missing", missing + 1),
        });
    }
    Dataset::new(to_matrix(&parsed.rows), parsed.labels, class_count)
}

/// Loads held-out data for a model with `class_count` classes; classes may be
/// missing or have a single sample.
pub fn load_csv_for_evaluation(path: impl AsRef<Path>, class_count: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let parsed = parse_csv(path)?;
    if let Some(pos) = parsed.labels.iter().position(|&l| l > class_count) {
        return Err(AlprError::LabelsNotContiguous {
            path: path.to_path_buf(),
            line: parsed.lines[pos],
            detail: format!("label {} exceeds class count {class_count}", parsed.labels[pos]),
        });
    }
    Dataset::for_evaluation(to_matrix(&parsed.rows), parsed.labels, class_count)
}

pub fn save_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (j, label) in dataset.labels().iter().enumerate() {
        let _ = write!(out, "{label}");
        for v in dataset.sample(j).iter() {
            let _ = write!(out, ",{}", real(*v));
        }
        out.push('\n');
    }
    atomic_write(path.as_ref(), &out)
}

pub fn save_model(model: &PrunedModel, path: impl AsRef<Path>) -> Result<()> {
    let w = model.projection.matrix();
    let (m, c) = w.shape();
    let n = model.train_labels.len();
    let mut out = format!(
        "{MODEL_MAGIC} {MODEL_VERSION} m={m} C={c} n={n} rho={}\n",
        model.rho
    );
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
    for row in w.row_iter() {
        out += &join(&mut row.iter().map(|v| real(*v)));
        out.push('\n');
    }
    out += &join(&mut model.selected_mask.iter().map(|&s| u8::from(s).to_string()));
    out.push('\n');
    for row in model.train_embedding.row_iter() {
        out += &join(&mut row.iter().map(|v| real(*v)));
        out.push('\n');
    }
    out += &join(&mut model.train_labels.iter().map(usize::to_string));
    out.push('\n');
    atomic_write(path.as_ref(), &out)
}

struct ModelHeader {
    m: usize,
    c: usize,
    n: usize,
    rho: f64,
}

fn parse_header(line: &str) -> Result<ModelHeader> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(MODEL_MAGIC) || tokens.next() != Some(MODEL_VERSION) {
        return Err(AlprError::VersionMismatch(format!(
            "expected header starting with `{MODEL_MAGIC} {MODEL_VERSION}`, found {line:?}"
        )));
    }
    let (mut m, mut c, mut n, mut rho) = (None, None, None, None);
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| AlprError::MalformedModel(format!("bad header field {tok:?}")))?;
        let bad = || AlprError::MalformedModel(format!("bad header value {tok:?}"));
        match key {
            "m" => m = Some(value.parse().map_err(|_| bad())?),
            "C" => c = Some(value.parse().map_err(|_| bad())?),
            "n" => n = Some(value.parse().map_err(|_| bad())?),
            "rho" => rho = Some(value.parse().map_err(|_| bad())?),
            _ => return Err(AlprError::MalformedModel(format!("unknown header field {key:?}"))),
        }
    }
    match (m, c, n, rho) {
        (Some(m), Some(c), Some(n), Some(rho)) => Ok(ModelHeader { m, c, n, rho }),
        _ => Err(AlprError::MalformedModel("header is missing m, C, n or rho".into())),
    }
}

fn parse_line<T: std::str::FromStr>(
    lines: &mut dyn Iterator<Item = &str>,
    what: &str,
    expected: usize,
) -> Result<Vec<T>> {
    let line = lines
        .next()
        .ok_or_else(|| AlprError::TruncatedFile(format!("missing {what}")))?;
    let values = line
        .split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| AlprError::MalformedModel(format!("bad value {t:?} in {what}")))
        })
        .collect::<Result<Vec<T>>>()?;
    if values.len() != expected {
        return Err(AlprError::ShapeMismatch(format!(
            "{what}: expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PrunedModel> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut lines = text.lines();
    let header = parse_header(
        lines
            .next()
            .ok_or_else(|| AlprError::TruncatedFile("empty model file".into()))?,
    )?;
    let ModelHeader { m, c, n, rho } = header;

    let mut w = DMatrix::zeros(m, c);
    for i in 0..m {
        let row: Vec<f64> = parse_line(&mut lines, &format!("W row {}", i + 1), c)?;
        for (k, v) in row.into_iter().enumerate() {
            w[(i, k)] = v;
        }
    }
    let mask: Vec<u8> = parse_line(&mut lines, "feature mask", m)?;
    if mask.iter().any(|&b| b > 1) {
        return Err(AlprError::MalformedModel("feature mask must be 0/1".into()));
    }
    let mut embedding = DMatrix::zeros(c, n);
    for k in 0..c {
        let row: Vec<f64> = parse_line(&mut lines, &format!("embedding row {}", k + 1), n)?;
        for (j, v) in row.into_iter().enumerate() {
            embedding[(k, j)] = v;
        }
    }
    let labels: Vec<usize> = parse_line(&mut lines, "train labels", n)?;
    if labels.iter().any(|&l| l == 0 || l > c) {
        return Err(AlprError::MalformedModel(format!("train labels must be in 1..={c}")));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(AlprError::ShapeMismatch("trailing data after train labels".into()));
    }
    Ok(PrunedModel {
        projection: Projection::new(w),
        selected_mask: mask.into_iter().map(|b| b == 1).collect(),
        train_embedding: embedding,
        train_labels: labels,
        rho,
    })
}

pub fn export_trace(fit: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("iter,objective\n");
    for (i, v) in fit.objective_trace.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, real(*v));
    }
    atomic_write(path.as_ref(), &out)
}

/// Parses a trace file written by [`export_trace`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "iter,objective")) => {}
        _ => {
            return Err(AlprError::MalformedModel(format!(
                "{}: missing `iter,objective` header",
                path.display()
            )))
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            let bad = || AlprError::NonNumericField {
                path: PathBuf::from(path),
                line: idx + 1,
                field: l.to_string(),
            };
            let (_, v) = l.split_once(',').ok_or_else(bad)?;
            v.parse::<f64>().map_err(|_| bad())
        })
        .collect()
}

pub fn write_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &report.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn csv_transposes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "2,0.5,1.0\n1,0.0,3.0\n1,1,1\n2,2,2\n");
        let d = load_csv(&p).unwrap();
        assert_eq!((d.dim(), d.len(), d.class_count()), (2, 4, 2));
        assert_eq!(&d.labels()[..2], &[2, 1]);
        assert_eq!(d.features()[(1, 0)], 1.0);
        assert_eq!(d.features()[(1, 1)], 3.0);
    }

    #[test]
    fn csv_two_rows_for_evaluation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "d.csv", "2,0.5,1.0\n1,0.0,3.0");
        let d = load_csv_for_evaluation(&p, 2).unwrap();
        assert_eq!((d.dim(), d.len(), d.class_count()), (2, 2, 2));
        assert_eq!(d.labels(), &[2, 1]);
        // too small to train on
        assert!(matches!(load_csv(&p), Err(AlprError::SingletonClass { .. })));
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = write_tmp(&dir, "e.csv", "");
        assert!(matches!(load_csv(&empty), Err(AlprError::EmptyFile(_))));

        let ragged = write_tmp(&dir, "r.csv", "1,0,0\n1,0\n");
        assert!(matches!(load_csv(&ragged), Err(AlprError::RaggedRow { line: 2, .. })));

        let text = write_tmp(&dir, "t.csv", "1,0,0\n1,0,x\n");
        assert!(matches!(load_csv(&text), Err(AlprError::NonNumericField { line: 2, .. })));

        let gap = write_tmp(&dir, "g.csv", "1,0\n1,1\n3,2\n3,3\n");
        let err = load_csv(&gap).unwrap_err();
        assert!(matches!(err, AlprError::LabelsNotContiguous { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("g.csv:3"));

        let zero = write_tmp(&dir, "z.csv", "0,1\n1,1\n");
        assert!(matches!(load_csv(&zero), Err(AlprError::LabelsNotContiguous { line: 1, .. })));
    }

    #[test]
    fn model_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "m.model", "ALPR-MODEL v2 m=1 C=2 n=2 rho=0\n");
        assert!(matches!(load_model(&p), Err(AlprError::VersionMismatch(_))));
        let p = write_tmp(&dir, "m2.model", "ALPR-MODEL v1 m=1 C=2 n=2 rho=0\n1 2\n");
        assert!(matches!(load_model(&p), Err(AlprError::TruncatedFile(_))));
        let p = write_tmp(&dir, "m3.model", "ALPR-MODEL v1 m=1 C=2 n=2 rho=0\n1 2 3\n");
        assert!(matches!(load_model(&p), Err(AlprError::ShapeMismatch(_))));
    }

    #[test]
    fn fixture_model_parses() {
        let dir = tempfile::tempdir().unwrap();
        let body = "ALPR-MODEL v1 m=1 C=2 n=3 rho=0.0001\n\
                    0.5 -2\n\
                    1\n\
                    0.5 1 -0.25\n\
                    -2 -4 1\n\
                    1 2 1\n";
        let p = write_tmp(&dir, "fixture.model", body);
        let model = load_model(&p).unwrap();
        assert_eq!(model.projection.matrix(), &DMatrix::from_row_slice(1, 2, &[0.5, -2.0]));
        assert_eq!(model.selected_mask, vec![true]);
        assert_eq!(
            model.train_embedding,
            DMatrix::from_row_slice(2, 3, &[0.5, 1.0, -0.25, -2.0, -4.0, 1.0])
        );
        assert_eq!(model.train_labels, vec![1, 2, 1]);
        assert_eq!(model.rho, 1e-4);
    }
}

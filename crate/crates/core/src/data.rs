//! Feature/outcome/group dataset and its CSV representation.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A regression dataset: row-major feature matrix, outcome vector, and one
/// group label per row. The unit all fit/predict operations consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    outcomes: Vec<f64>,
    groups: Vec<String>,
    feature_names: Vec<String>,
    n_rows: usize,
    n_features: usize,
}

impl Dataset {
    /// Build a dataset from row-major features. Rejects NaN/non-finite
    /// values, ragged rows, and empty data.
    pub fn new(
        features: Vec<f64>,
        outcomes: Vec<f64>,
        groups: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = outcomes.len();
        let n_features = feature_names.len();
        if n_rows == 0 {
            return Err(Error::EmptyData);
        }
        if n_features == 0 {
            return Err(Error::InvalidData("at least one feature is required".into()));
        }
        if features.len() != n_rows * n_features {
            return Err(Error::InvalidData(format!(
                "feature matrix has {} values, expected {} rows x {} features",
                features.len(),
                n_rows,
                n_features
            )));
        }
        if groups.len() != n_rows {
            return Err(Error::InvalidData(format!(
                "{} group labels for {} rows",
                groups.len(),
                n_rows
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature value at row {}, column {}",
                pos / n_features.max(1) + 1,
                pos % n_features.max(1) + 1
            )));
        }
        if let Some(pos) = outcomes.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite outcome value at row {}",
                pos + 1
            )));
        }
        Ok(Self {
            features,
            outcomes,
            groups,
            feature_names,
            n_rows,
            n_features,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Replace the outcome vector (used for outcome standardization).
    pub fn with_outcomes(&self, outcomes: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            outcomes,
            self.groups.clone(),
            self.feature_names.clone(),
        )
    }

    /// The distinct group labels in canonical order: numeric when every
    /// label parses as an integer, lexicographic otherwise.
    pub fn group_labels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.groups.iter().collect();
        let mut labels: Vec<String> = set.into_iter().cloned().collect();
        sort_labels(&mut labels);
        labels
    }

    /// Row indices belonging to `label`.
    pub fn group_rows(&self, label: &str) -> Vec<usize> {
        (0..self.n_rows).filter(|&i| self.groups[i] == label).collect()
    }

    /// New dataset containing the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut outcomes = Vec::with_capacity(indices.len());
        let mut groups = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            outcomes.push(self.outcomes[i]);
            groups.push(self.groups[i].clone());
        }
        Dataset::new(features, outcomes, groups, self.feature_names.clone())
    }
}

/// Sort labels numerically when every label parses as an integer, otherwise
/// lexicographically. Keeps simulated group ids (`"0"`, `"1"`, …, `"10"`) in
/// natural order while real subtype names sort alphabetically.
pub fn sort_labels(labels: &mut [String]) {
    let all_numeric = labels.iter().all(|l| l.parse::<i64>().is_ok());
    if all_numeric {
        labels.sort_by_key(|l| l.parse::<i64>().unwrap());
    } else {
        labels.sort();
    }
}

/// Read a dataset from the CSV schema `group,y,<feature_1>,…,<feature_p>`.
///
/// When `require_outcome` is false a `y` column is optional (prediction
/// inputs); absent outcomes are filled with 0 and reported via the returned
/// flag.
pub fn read_csv<R: Read>(reader: R, path: &str, require_outcome: bool) -> Result<(Dataset, bool)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_string(),
            message: e.to_string(),
        })?
        .clone();
    let cols: Vec<String> = header.iter().map(|c| c.trim().to_string()).collect();
    if cols.is_empty() || cols[0] != "group" {
        return Err(Error::Csv {
            path: path.to_string(),
            message: "first column must be 'group'".to_string(),
        });
    }
    let has_outcome = cols.len() > 1 && cols[1] == "y";
    if require_outcome && !has_outcome {
        return Err(Error::Csv {
            path: path.to_string(),
            message: "second column must be 'y'".to_string(),
        });
    }
    let feature_start = if has_outcome { 2 } else { 1 };
    let feature_names: Vec<String> = cols[feature_start..].to_vec();
    if feature_names.is_empty() {
        return Err(Error::Csv {
            path: path.to_string(),
            message: "no feature columns found".to_string(),
        });
    }

    let mut features = Vec::new();
    let mut outcomes = Vec::new();
    let mut groups = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let row_no = row_idx + 1; // 1-based data row
        let record = record.map_err(|e| Error::Csv {
            path: path.to_string(),
            message: format!("row {row_no}: {e}"),
        })?;
        if record.len() != cols.len() {
            return Err(Error::Csv {
                path: path.to_string(),
                message: format!(
                    "row {row_no}: expected {} columns, got {}",
                    cols.len(),
                    record.len()
                ),
            });
        }
        groups.push(record[0].trim().to_string());
        if has_outcome {
            outcomes.push(parse_cell(&record[1], path, row_no, "y")?);
        } else {
            outcomes.push(0.0);
        }
        for (j, name) in feature_names.iter().enumerate() {
            features.push(parse_cell(&record[feature_start + j], path, row_no, name)?);
        }
    }
    let dataset = Dataset::new(features, outcomes, groups, feature_names)?;
    Ok((dataset, has_outcome))
}

fn parse_cell(cell: &str, path: &str, row_no: usize, column: &str) -> Result<f64> {
    let value: f64 = cell.trim().parse().map_err(|_| Error::Csv {
        path: path.to_string(),
        message: format!("row {row_no}, column '{column}': cannot parse '{cell}' as a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Csv {
            path: path.to_string(),
            message: format!("row {row_no}, column '{column}': value is not finite"),
        });
    }
    Ok(value)
}

pub fn read_csv_file(path: &Path, require_outcome: bool) -> Result<(Dataset, bool)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_csv(file, &path.display().to_string(), require_outcome)
}

/// Write a dataset in the `group,y,<features…>` schema.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["group".to_string(), "y".to_string()];
    header.extend(dataset.feature_names().iter().cloned());
    wtr.write_record(&header).map_err(csv_write_err)?;
    for i in 0..dataset.n_rows() {
        let mut record = vec![dataset.groups()[i].clone(), format_float(dataset.outcomes()[i])];
        record.extend(dataset.row(i).iter().map(|v| format_float(*v)));
        wtr.write_record(&record).map_err(csv_write_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::Csv {
        path: "<output>".to_string(),
        message: e.to_string(),
    }
}

pub fn write_csv_file(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(dataset, file)
}

/// Shortest decimal representation that round-trips the exact f64 value.
pub fn format_float(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json uses ryu internally; going through it keeps every emitted
    // float bit-exact on re-parse without an extra dependency.
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![1.0, 2.0, 3.0],
            vec!["a".into(), "b".into(), "a".into()],
            vec!["f1".into(), "f2".into()],
        )
        .unwrap()
    }

    #[test]
    fn rejects_nan() {
        let err = Dataset::new(
            vec![0.0, f64::NAN],
            vec![1.0, 2.0],
            vec!["a".into(), "b".into()],
            vec!["f1".into()],
        );
        assert!(matches!(err, Err(Error::InvalidData(_))));
    }

    #[test]
    fn rejects_empty() {
        assert!(matches!(
            Dataset::new(vec![], vec![], vec![], vec!["f1".into()]),
            Err(Error::EmptyData)
        ));
    }

    #[test]
    fn group_labels_sorted_numerically() {
        let d = Dataset::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 0.0],
            vec!["10".into(), "2".into(), "1".into()],
            vec!["f1".into()],
        )
        .unwrap();
        assert_eq!(d.group_labels(), vec!["1", "2", "10"]);
    }

    #[test]
    fn subset_selects_rows() {
        let d = toy();
        let s = d.subset(&[2, 0]).unwrap();
        assert_eq!(s.outcomes(), &[3.0, 1.0]);
        assert_eq!(s.row(0), &[4.0, 5.0]);
    }

    #[test]
    fn csv_roundtrip() {
        let d = toy();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let (back, has_y) = read_csv(&buf[..], "mem", true).unwrap();
        assert!(has_y);
        assert_eq!(back, d);
    }

    #[test]
    fn csv_error_names_row_and_column() {
        let text = "group,y,f1\na,1.0,2.0\nb,oops,3.0\n";
        let err = read_csv(text.as_bytes(), "test.csv", true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("'y'"), "{msg}");
    }

    #[test]
    fn csv_without_outcome_column() {
        let text = "group,f1,f2\na,1.0,2.0\n";
        let (d, has_y) = read_csv(text.as_bytes(), "mem", false).unwrap();
        assert!(!has_y);
        assert_eq!(d.feature_names(), &["f1".to_string(), "f2".to_string()]);
    }
}

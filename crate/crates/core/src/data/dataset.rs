use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BendError, Result};
use crate::nn::Tensor2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor2D,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(features: Tensor2D, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(BendError::shape(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(BendError::input("a dataset needs at least 2 classes"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(BendError::input(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            split,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

/// Isotropic Gaussian clusters around seeded random centers, split 80/20
/// per class.
///
/// Centers are drawn uniformly from `[-5, 5]^dim`; each point adds
/// `spread · N(0, I)`.
pub fn make_blobs(n: usize, dim: usize, classes: usize, spread: f64, seed: u64) -> Result<TrainTest> {
    if classes < 2 {
        return Err(BendError::input("make_blobs needs at least 2 classes"));
    }
    if dim == 0 {
        return Err(BendError::input("make_blobs needs dim ≥ 1"));
    }
    if n < classes * 5 {
        return Err(BendError::input(format!(
            "make_blobs needs n ≥ 5·classes ({}), got {n}",
            classes * 5
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(BendError::input("spread must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        let count = n / classes + usize::from(c < n % classes);
        let n_test = (count as f64 * 0.2).round() as usize;
        for i in 0..count {
            let point: Vec<f64> = center
                .iter()
                .map(|&m| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + spread * z
                })
                .collect();
            if i < n_test {
                test.push((point, c));
            } else {
                train.push((point, c));
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);

    let build = |rows: Vec<(Vec<f64>, usize)>, split| -> Result<Dataset> {
        let (feats, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let mut ds = Dataset::new(Tensor2D::from_rows(&feats)?, labels, classes, split)?;
        ds.seed = Some(seed);
        Ok(ds)
    };
    Ok(TrainTest {
        train: build(train, Split::Train)?,
        test: build(test, Split::Test)?,
    })
}

/// Reads a headed CSV whose columns are all numeric; `label_column` is a
/// header name or a zero-based column index.
pub fn load_csv_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let loc = |row: usize, col: &str| format!("{}:row {row}, column '{col}'", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| BendError::format(path.display().to_string(), e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| BendError::format(path.display().to_string(), e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .or_else(|| label_column.parse::<usize>().ok().filter(|&i| i < headers.len()))
        .ok_or_else(|| BendError::input(format!("label column '{label_column}' not found in {}", path.display())))?;

    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record =
            record.map_err(|e| BendError::format(format!("{}:row {row_no}", path.display()), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(BendError::format(
                format!("{}:row {row_no}", path.display()),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                let label = cell.parse::<usize>().map_err(|_| {
                    BendError::format(
                        loc(row_no, &headers[c]),
                        format!("label '{cell}' is not a non-negative integer"),
                    )
                })?;
                labels.push(label);
            } else {
                let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    BendError::format(loc(row_no, &headers[c]), format!("'{cell}' is not a finite number"))
                })?;
                row.push(v);
            }
        }
        feats.push(row);
    }
    if labels.is_empty() {
        return Err(BendError::format(path.display().to_string(), "no data rows"));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(Tensor2D::from_rows(&feats)?, labels, num_classes, Split::Train)
}

/// Writes `f0..f{D-1},label` with shortest round-trip decimal text.
pub fn save_csv_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| BendError::format(path.display().to_string(), e.to_string()))?;
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    let io_err = |e: csv::Error| BendError::format(path.display().to_string(), e.to_string());
    w.write_record(&header).map_err(io_err)?;
    for (r, &label) in ds.labels.iter().enumerate() {
        let mut rec: Vec<String> = ds.features.row(r).iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| BendError::io(path, e))?;
    Ok(())
}

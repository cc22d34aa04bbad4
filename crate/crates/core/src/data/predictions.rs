//! Prediction matrices as CSV: header `classifier_id,s_0,…,s_{n−1}`, one
//! row per classifier, and an optional ground-truth row with id `target`.

use std::fs::File;
use std::path::Path;

use crate::ensemble::PredictionMatrix;
use crate::error::{BendError, Result};

pub const TARGET_ID: &str = "target";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedPredictions {
    pub matrix: PredictionMatrix,
    pub classifier_ids: Vec<String>,
    pub target: Option<Vec<usize>>,
}

pub fn save_predictions(path: &Path, preds: &PredictionMatrix, target: Option<&[usize]>) -> Result<()> {
    if let Some(t) = target {
        if t.len() != preds.n() {
            return Err(BendError::input(format!(
                "target has {} entries for {} samples",
                t.len(),
                preds.n()
            )));
        }
    }
    let csv_err = |e: csv::Error| BendError::format(path.display().to_string(), e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["classifier_id".to_string()];
    header.extend((0..preds.n()).map(|k| format!("s_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    let record = |id: String, row: &[usize]| {
        std::iter::once(id)
            .chain(row.iter().map(usize::to_string))
            .collect::<Vec<_>>()
    };
    for (i, row) in preds.rows().enumerate() {
        w.write_record(record(i.to_string(), row)).map_err(csv_err)?;
    }
    if let Some(t) = target {
        w.write_record(record(TARGET_ID.into(), t)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BendError::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<LoadedPredictions> {
    let at = |row: usize| format!("{}:row {row}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path).map_err(|e| BendError::io(path, e))?);
    let header = reader
        .headers()
        .map_err(|e| BendError::format(at(0), e.to_string()))?
        .clone();
    if header.get(0) != Some("classifier_id") {
        return Err(BendError::format(at(0), "first header field must be 'classifier_id'"));
    }
    for (k, h) in header.iter().skip(1).enumerate() {
        if h != format!("s_{k}") {
            return Err(BendError::format(
                at(0),
                format!("header field '{h}' should be 's_{k}'"),
            ));
        }
    }
    let n = header.len() - 1;
    if n == 0 {
        return Err(BendError::format(at(0), "no sample columns"));
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut target = None;
    for (r, rec) in reader.records().enumerate() {
        let row_no = r + 1;
        let rec = rec.map_err(|e| BendError::format(at(row_no), e.to_string()))?;
        if rec.len() != n + 1 {
            return Err(BendError::format(
                at(row_no),
                format!("expected {} fields, found {}", n + 1, rec.len()),
            ));
        }
        let values = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(k, cell)| {
                cell.parse::<usize>().map_err(|_| {
                    BendError::format(
                        format!("{}, column 's_{k}'", at(row_no)),
                        format!("'{cell}' is not a non-negative integer label"),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let id = rec[0].to_string();
        if id == TARGET_ID {
            if target.is_some() {
                return Err(BendError::format(at(row_no), "duplicate target row"));
            }
            target = Some(values);
        } else {
            ids.push(id);
            data.extend(values);
        }
    }
    if ids.is_empty() {
        return Err(BendError::format(path.display().to_string(), "no classifier rows"));
    }
    Ok(LoadedPredictions {
        matrix: PredictionMatrix::new(ids.len(), n, data)?,
        classifier_ids: ids,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn round_trip_with_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 2], vec![2, 1, 0]]).unwrap();
        save_predictions(&path, &p, Some(&[0, 1, 1])).unwrap();
        let back = load_predictions(&path).unwrap();
        assert_eq!(back.matrix, p);
        assert_eq!(back.target, Some(vec![0, 1, 1]));
        assert_eq!(back.classifier_ids, ["0", "1"]);
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "classifier_id,s_0,s_1,s_2\n0,0,1,2\n1,2,1,0\ntarget,0,1,1\n"
        );
    }

    #[test]
    fn missing_target_is_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 2], vec![2, 1, 0]]).unwrap();
        save_predictions(&path, &p, None).unwrap();
        let back = load_predictions(&path).unwrap();
        assert_eq!(back.matrix, p);
        assert_eq!(back.target, None);
    }

    #[test]
    fn ragged_row_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "classifier_id,s_0,s_1\n0,1,1\n1,0\n").unwrap();
        match load_predictions(&path) {
            Err(BendError::Format { location, .. }) => assert!(location.ends_with("row 2"), "{location}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_integer_cell_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "classifier_id,s_0,s_1\n0,1,1.5\n").unwrap();
        match load_predictions(&path) {
            Err(BendError::Format { location, message }) => {
                assert!(location.contains("s_1"));
                assert!(message.contains("1.5"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "id,s_0\n0,1\n").unwrap();
        assert!(matches!(load_predictions(&path), Err(BendError::Format { .. })));
        fs::write(&path, "classifier_id,s_1\n0,1\n").unwrap();
        assert!(matches!(load_predictions(&path), Err(BendError::Format { .. })));
    }
}

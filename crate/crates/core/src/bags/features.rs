//! Precomputed feature bags on disk.
//!
//! A manifest CSV with header `bag_id,path,label` lists one bag per row;
//! each `path` (relative to the manifest's directory) is a headerless CSV of
//! decimal floats, one instance per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bags::Bag;
use crate::error::{MilError, Result};
use crate::tensor::Tensor;

const MANIFEST_HEADER: [&str; 3] = ["bag_id", "path", "label"];

/// Writes `bags` under `dir/<name>/` and the manifest `dir/<name>.csv`.
pub fn write_feature_bags(dir: &Path, name: &str, bags: &[Bag]) -> Result<PathBuf> {
    let bag_dir = dir.join(name);
    fs::create_dir_all(&bag_dir).map_err(|e| MilError::io(&bag_dir, e))?;
    let manifest_path = dir.join(format!("{name}.csv"));
    let mut manifest = csv::Writer::from_path(&manifest_path).map_err(|e| MilError::csv(&manifest_path, e))?;
    manifest
        .write_record(MANIFEST_HEADER)
        .map_err(|e| MilError::csv(&manifest_path, e))?;
    for bag in bags {
        let relative = format!("{name}/{}.csv", bag.bag_id);
        let path = dir.join(&relative);
        let mut body = String::new();
        for r in 0..bag.features.rows() {
            let row: Vec<String> = bag.features.row(r).iter().map(|v| v.to_string()).collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        fs::write(&path, body).map_err(|e| MilError::io(&path, e))?;
        manifest
            .write_record([bag.bag_id.as_str(), relative.as_str(), &bag.label.to_string()])
            .map_err(|e| MilError::csv(&manifest_path, e))?;
    }
    manifest.flush().map_err(|e| MilError::io(&manifest_path, e))?;
    Ok(manifest_path)
}

pub fn load_feature_bags(manifest_path: &Path) -> Result<Vec<Bag>> {
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest_path)
        .map_err(|e| MilError::csv(manifest_path, e))?;
    let header = reader.headers().map_err(|e| MilError::csv(manifest_path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(MilError::Parse {
            path: manifest_path.to_path_buf(),
            line: 1,
            message: format!("expected header `bag_id,path,label`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut bags = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| MilError::csv(manifest_path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| MilError::Parse {
            path: manifest_path.to_path_buf(),
            line,
            message,
        };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
        }
        let bag_id = record[0].to_string();
        let label: usize = record[2]
            .parse()
            .map_err(|_| parse_err(format!("label `{}` is not a class index", &record[2])))?;
        let path = base.join(&record[1]);
        let features = read_bag_file(&path)?;
        match width {
            Some(w) if w != features.cols() => {
                return Err(MilError::RaggedWidth {
                    path,
                    line: 1,
                    expected: w,
                    found: features.cols(),
                });
            }
            None => width = Some(features.cols()),
            _ => {}
        }
        let instance_ids = (0..features.rows()).map(|r| format!("{bag_id}:{r}")).collect();
        bags.push(Bag {
            bag_id,
            features,
            label,
            instance_ids,
        });
    }
    Ok(bags)
}

fn read_bag_file(path: &Path) -> Result<Tensor> {
    let text = fs::read_to_string(path).map_err(|e| MilError::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        if raw.trim().is_empty() {
            continue;
        }
        let row = raw
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| MilError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("non-numeric cell `{}`", cell.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(MilError::RaggedWidth {
                    path: path.to_path_buf(),
                    line,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MilError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "bag file has no instances".into(),
        });
    }
    Tensor::from_rows(&rows)
}

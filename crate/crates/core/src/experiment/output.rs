use std::fs;
use std::path::Path;

use crate::bags::soft::parse_instance_id;
use crate::bags::Mnist;
use crate::error::{MilError, Result};

/// Rows buffered in memory and written once.
#[derive(Clone, Debug)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<const N: usize>(&mut self, cells: [String; N]) {
        debug_assert_eq!(N, self.header.len());
        self.rows.push(cells.into());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| MilError::csv(path, e))?;
        w.write_record(&self.header).map_err(|e| MilError::csv(path, e))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| MilError::csv(path, e))?;
        }
        w.flush().map_err(|e| MilError::io(path, e))
    }
}

/// Binary (P5) 8-bit graymap.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes).map_err(|e| MilError::io(path, e))
}

/// Bag images side by side, each scaled by its weight over the largest weight.
pub(crate) fn write_attention_montage(path: &Path, mnist: &Mnist, instance_ids: &[String], weights: &[f64]) -> Result<()> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    let (height, width) = (mnist.train.height, mnist.train.width);
    let total = width * instance_ids.len();
    let mut canvas = vec![0u8; total * height];
    for (slot, (id, &w)) in instance_ids.iter().zip(weights).enumerate() {
        let (split, index) = parse_instance_id(id)
            .ok_or_else(|| MilError::Config(format!("instance `{id}` is not an MNIST image id")))?;
        let source = match split {
            "train" => &mnist.train,
            "test" => &mnist.test,
            other => return Err(MilError::Config(format!("unknown MNIST split `{other}` in `{id}`"))),
        };
        let scale = if max > 0.0 { w / max } else { 0.0 };
        let image = source.image(index);
        for r in 0..height {
            for c in 0..width {
                let v = (image[r * width + c] as f64 * scale).round().clamp(0.0, 255.0);
                canvas[r * total + slot * width + c] = v as u8;
            }
        }
    }
    write_pgm(path, total, height, &canvas)
}

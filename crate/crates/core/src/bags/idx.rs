//! The big-endian IDX container used by the MNIST distribution.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{MilError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxFile {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

/// Decodes an unsigned-byte IDX stream.
///
/// The magic is `00 00 08 nd`, where `nd` is the number of dimensions; one
/// big-endian `u32` size per dimension follows, then the raw payload.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile> {
    if bytes.len() < 4 {
        return Err(MilError::IdxFormat(format!("{} bytes is shorter than the magic number", bytes.len())));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 || bytes[3] == 0 {
        return Err(MilError::IdxFormat(format!("bad magic 0x{magic:08x}")));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(MilError::IdxLength {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let expected = dims.iter().product::<usize>();
    let found = bytes.len() - header;
    if found != expected {
        return Err(MilError::IdxLength { expected, found });
    }
    Ok(IdxFile {
        magic,
        dims,
        payload: bytes[header..].to_vec(),
    })
}

pub fn encode_idx(dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + payload.len());
    out.extend_from_slice(&[0, 0, 0x08, dims.len() as u8]);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

pub fn read_idx(path: &Path) -> Result<IdxFile> {
    let bytes = fs::read(path).map_err(|e| MilError::io(path, e))?;
    parse_idx(&bytes).map_err(|e| match e {
        MilError::IdxFormat(msg) => MilError::IdxFormat(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// One MNIST split: `count` images of `height x width` bytes and their labels.
#[derive(Clone, Debug)]
pub struct MnistSplit {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistSplit {
    pub fn from_idx(images: IdxFile, labels: IdxFile) -> Result<Self> {
        if images.magic != IMAGE_MAGIC || images.dims.len() != 3 {
            return Err(MilError::IdxFormat(format!(
                "expected an image file (magic 0x{IMAGE_MAGIC:08x}), got 0x{:08x}",
                images.magic
            )));
        }
        if labels.magic != LABEL_MAGIC || labels.dims.len() != 1 {
            return Err(MilError::IdxFormat(format!(
                "expected a label file (magic 0x{LABEL_MAGIC:08x}), got 0x{:08x}",
                labels.magic
            )));
        }
        if images.dims[0] != labels.dims[0] {
            return Err(MilError::IdxFormat(format!(
                "{} images but {} labels",
                images.dims[0], labels.dims[0]
            )));
        }
        Ok(MnistSplit {
            height: images.dims[1],
            width: images.dims[2],
            pixels: images.payload,
            labels: labels.payload,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.height * self.width
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.image_size();
        &self.pixels[index * size..(index + 1) * size]
    }
}

#[derive(Clone, Debug)]
pub struct Mnist {
    pub train: MnistSplit,
    pub test: MnistSplit,
}

impl Mnist {
    /// Loads the four standard uncompressed IDX files from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let load = |images: &str, labels: &str| -> Result<MnistSplit> {
            MnistSplit::from_idx(read_idx(&dir.join(images))?, read_idx(&dir.join(labels))?)
        };
        Ok(Mnist {
            train: load(TRAIN_IMAGES, TRAIN_LABELS)?,
            test: load(TEST_IMAGES, TEST_LABELS)?,
        })
    }

    /// `$MADMIL_DATA_DIR`, falling back to `data/mnist` under the current directory.
    pub fn default_dir() -> PathBuf {
        std::env::var_os("MADMIL_DATA_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }
}

use std::io::Read;
use std::path::Path;

use super::{remove_ambiguous, LabeledDataset, LabeledSample};
use crate::error::{invalid, QnnError, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const POOL: usize = 7;

/// Default pooled-intensity threshold, as a fraction of full brightness.
///
/// Half intensity leaves only a few dozen distinct strings for most digit
/// pairs because the pooled cells are rarely that bright; a sixteenth keeps
/// a stroke-sized footprint per cell and yields hundreds of distinct strings.
pub const DEFAULT_THRESHOLD: f64 = 1.0 / 16.0;

/// Row-major greyscale images from an IDX file.
#[derive(Clone, Debug)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn image(&self, k: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[k * size..(k + 1) * size]
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| QnnError::Idx("truncated header".into()))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(QnnError::Idx(format!(
            "image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != count * rows * cols {
        return Err(QnnError::Idx(format!(
            "expected {} pixel bytes, found {}",
            count * rows * cols,
            body.len()
        )));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(QnnError::Idx(format!(
            "label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(QnnError::Idx(format!("expected {count} labels, found {}", body.len())));
    }
    Ok(body.to_vec())
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_all(path.as_ref())?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_all(path.as_ref())?)
}

/// 7×7 average pooling then thresholding at `threshold · 255`; the cells are
/// read row-major, and a cell strictly brighter than that becomes `z = −1`.
pub fn downsample_image(pixels: &[u8], rows: usize, cols: usize, threshold: f64) -> Result<Vec<i8>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(invalid(format!("threshold {threshold} outside [0, 1)")));
    }
    let cut = threshold * 255.0;
    if !rows.is_multiple_of(POOL) || !cols.is_multiple_of(POOL) || pixels.len() != rows * cols {
        return Err(invalid(format!(
            "cannot pool a {rows}x{cols} image in {POOL}x{POOL} blocks"
        )));
    }
    let mut bits = Vec::with_capacity(rows * cols / (POOL * POOL));
    for br in 0..rows / POOL {
        for bc in 0..cols / POOL {
            let mut sum = 0u32;
            for r in 0..POOL {
                let row = &pixels[(br * POOL + r) * cols + bc * POOL..][..POOL];
                sum += row.iter().map(|&p| p as u32).sum::<u32>();
            }
            let mean = sum as f64 / (POOL * POOL) as f64;
            bits.push(if mean > cut { -1 } else { 1 });
        }
    }
    Ok(bits)
}

/// Counts reported after ingesting a digit pair.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct IngestCounts {
    pub images_kept: u64,
    pub distinct_plus: usize,
    pub distinct_minus: usize,
    pub distinct_strings: usize,
    pub ambiguous_strings: usize,
    pub retained_samples: u64,
    pub retained_distinct: usize,
}

impl IngestCounts {
    pub fn of(raw: &LabeledDataset) -> Self {
        let clean = remove_ambiguous(raw);
        let mut all: Vec<&[i8]> = raw.samples().iter().map(|s| s.bits.as_slice()).collect();
        all.sort_unstable();
        all.dedup();
        Self {
            images_kept: raw.total_multiplicity(),
            distinct_plus: raw.count_with_label(1),
            distinct_minus: raw.count_with_label(-1),
            distinct_strings: all.len(),
            ambiguous_strings: raw.ambiguous_strings().len(),
            retained_samples: clean.total_multiplicity(),
            retained_distinct: clean.len(),
        }
    }
}

/// Keeps `digit_a` (label `+1`) and `digit_b` (label `−1`) images as 16-bit
/// strings with multiplicities. Ambiguous strings are kept.
pub fn ingest_mnist(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    digit_a: u8,
    digit_b: u8,
    threshold: f64,
) -> Result<LabeledDataset> {
    if digit_a == digit_b {
        return Err(invalid("the two digits must differ"));
    }
    let images = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if images.len() != labels.len() {
        return Err(QnnError::Idx(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let n = images.rows * images.cols / (POOL * POOL);
    let mut samples = Vec::new();
    for (k, &digit) in labels.iter().enumerate() {
        let label = if digit == digit_a {
            1
        } else if digit == digit_b {
            -1
        } else {
            continue;
        };
        let bits = downsample_image(images.image(k), images.rows, images.cols, threshold)?;
        samples.push(LabeledSample::new(bits, label, 1)?);
    }
    LabeledDataset::from_samples(n, samples)
}

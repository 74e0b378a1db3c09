//! Labeled bitstring datasets and the quantum inputs derived from them.

mod graph;
mod mnist;
mod states;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{invalid, QnnError, Result};
use crate::sim::index_to_bits;

pub use graph::{random_regular_graph, RegularGraph};
pub use mnist::{
    downsample_image, ingest_mnist, parse_idx_images, parse_idx_labels, read_idx_images, read_idx_labels, IdxImages,
    IngestCounts, DEFAULT_THRESHOLD,
};
pub use states::{
    build_superposition, random_product_state, LabeledStates, ProductState, SuperpositionSpec, Weighting,
};

/// Largest `n` accepted by [`exhaustive_dataset`].
pub const MAX_EXHAUSTIVE_BITS: usize = 20;

/// A ±1 string with its label and how many times it occurs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledSample {
    pub bits: Vec<i8>,
    pub label: i8,
    pub multiplicity: u32,
}

impl LabeledSample {
    pub fn new(bits: Vec<i8>, label: i8, multiplicity: u32) -> Result<Self> {
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(invalid("bits must be ±1"));
        }
        if label != 1 && label != -1 {
            return Err(invalid(format!("label {label} is not ±1")));
        }
        if multiplicity == 0 {
            return Err(invalid("multiplicity must be at least 1"));
        }
        Ok(Self {
            bits,
            label,
            multiplicity,
        })
    }
}

/// Samples over `n`-bit strings; each `(bits, label)` pair appears once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    n: usize,
    samples: Vec<LabeledSample>,
}

impl LabeledDataset {
    pub fn new(n: usize) -> Self {
        Self { n, samples: Vec::new() }
    }

    /// Merges repeated `(bits, label)` pairs, keeping first-seen order.
    pub fn from_samples(n: usize, samples: impl IntoIterator<Item = LabeledSample>) -> Result<Self> {
        let mut ds = Self::new(n);
        let mut index: HashMap<(Vec<i8>, i8), usize> = HashMap::new();
        for s in samples {
            if s.bits.len() != n {
                return Err(QnnError::DimensionMismatch {
                    expected: n,
                    found: s.bits.len(),
                });
            }
            match index.get(&(s.bits.clone(), s.label)) {
                Some(&i) => ds.samples[i].multiplicity += s.multiplicity,
                None => {
                    index.insert((s.bits.clone(), s.label), ds.samples.len());
                    ds.samples.push(s);
                }
            }
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.samples.iter().map(|s| s.multiplicity as u64).sum()
    }

    /// Distinct strings carrying `label`.
    pub fn count_with_label(&self, label: i8) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Strings that occur with both labels.
    pub fn ambiguous_strings(&self) -> Vec<Vec<i8>> {
        let mut seen: HashMap<&[i8], i8> = HashMap::new();
        let mut out = Vec::new();
        for s in &self.samples {
            match seen.get(s.bits.as_slice()) {
                Some(&l) if l != s.label && l != 0 => {
                    out.push(s.bits.clone());
                    seen.insert(&s.bits, 0);
                }
                Some(_) => {}
                None => {
                    seen.insert(&s.bits, s.label);
                }
            }
        }
        out
    }

    /// One text line per sample: `bits<TAB>label<TAB>multiplicity`, with
    /// `'0'` for `+1` and `'1'` for `−1`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let bits: String = s.bits.iter().map(|&b| if b == 1 { '0' } else { '1' }).collect();
            let label = if s.label == 1 { "+1" } else { "-1" };
            writeln!(out, "{bits}\t{label}\t{}", s.multiplicity).unwrap();
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Blank lines are skipped; the
    /// width is taken from the first line.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| QnnError::Parse { line: lineno + 1, msg };
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let [bits, label, mult] = fields.as_slice() else {
                return Err(err("expected three tab-separated fields".into()));
            };
            let bits = bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(1),
                    '1' => Ok(-1),
                    _ => Err(err(format!("bad bit character `{c}`"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            if bits.is_empty() {
                return Err(err("empty bitstring".into()));
            }
            let width = *n.get_or_insert(bits.len());
            if bits.len() != width {
                return Err(err(format!("expected {width} bits, found {}", bits.len())));
            }
            let label = match *label {
                "+1" | "1" => 1,
                "-1" => -1,
                other => return Err(err(format!("bad label `{other}`"))),
            };
            let mult: u32 = mult
                .trim()
                .parse()
                .ok()
                .filter(|&m| m > 0)
                .ok_or_else(|| err(format!("bad multiplicity `{mult}`")))?;
            samples.push(LabeledSample::new(bits, label, mult)?);
        }
        let n = n.ok_or(QnnError::EmptyDataset)?;
        Self::from_samples(n, samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Drops every string that occurs with both labels.
pub fn remove_ambiguous(ds: &LabeledDataset) -> LabeledDataset {
    let ambiguous: std::collections::HashSet<Vec<i8>> = ds.ambiguous_strings().into_iter().collect();
    LabeledDataset {
        n: ds.n,
        samples: ds
            .samples
            .iter()
            .filter(|s| !ambiguous.contains(&s.bits))
            .cloned()
            .collect(),
    }
}

/// All `2^n` strings in index order, each with multiplicity 1.
pub fn exhaustive_dataset(n: usize, label_fn: impl Fn(&[i8]) -> Result<i8>) -> Result<LabeledDataset> {
    if n == 0 || n > MAX_EXHAUSTIVE_BITS {
        return Err(invalid(format!(
            "exhaustive datasets need 1 <= n <= {MAX_EXHAUSTIVE_BITS}"
        )));
    }
    let mut samples = Vec::with_capacity(1 << n);
    for x in 0..1usize << n {
        let bits = index_to_bits(x, n);
        let label = label_fn(&bits)?;
        samples.push(LabeledSample::new(bits, label, 1)?);
    }
    Ok(LabeledDataset { n, samples })
}

/// `count` uniform draws with replacement, merged into multiplicities.
pub fn sampled_dataset<R: Rng + ?Sized>(
    n: usize,
    label_fn: impl Fn(&[i8]) -> Result<i8>,
    count: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if n == 0 || n > 63 {
        return Err(invalid("sampled datasets need 1 <= n <= 63"));
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let bits: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { -1 } else { 1 }).collect();
        let label = label_fn(&bits)?;
        samples.push(LabeledSample::new(bits, label, 1)?);
    }
    LabeledDataset::from_samples(n, samples)
}

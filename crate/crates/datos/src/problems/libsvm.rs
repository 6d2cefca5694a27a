//! LIBSVM-format datasets: parsing, serialization, row-wise partitioning.
//!
//! Line grammar: `<label> <index>:<value> <index>:<value> ...` with 1-based,
//! strictly ascending feature indices. Whitespace-only lines are skipped.
//! All parse errors carry the 1-based line number.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub label: f64,
    /// (0-based feature index, value), ascending.
    pub features: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    /// Feature-space dimension: the largest referenced index + 1, or the
    /// parent dimension for partition shards.
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut dim = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let mut toks = l.split_whitespace();
        let label_tok = toks.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid label '{label_tok}'"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line,
                msg: format!("non-finite label '{label_tok}'"),
            });
        }
        let mut features = Vec::new();
        let mut last_index = 0usize; // 1-based sentinel: indices must exceed it
        for tok in toks {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                msg: format!("feature '{tok}' is not in index:value form"),
            })?;
            let index: usize = idx_s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid feature index '{idx_s}'"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "feature indices are 1-based; found index 0".into(),
                });
            }
            if index == last_index {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate feature index {index}"),
                });
            }
            if index < last_index {
                return Err(Error::Parse {
                    line,
                    msg: format!("feature index {index} out of ascending order"),
                });
            }
            let value: f64 = val_s.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid feature value '{val_s}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite feature value '{val_s}'"),
                });
            }
            last_index = index;
            features.push((index - 1, value));
            dim = dim.max(index);
        }
        samples.push(Sample { label, features });
    }
    Ok(Dataset { samples, dim })
}

/// Inverse of [`parse_libsvm`] up to whitespace normalization: floats are
/// printed in shortest round-trip form, indices 1-based ascending.
pub fn serialize_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for s in &ds.samples {
        out.push_str(&format!("{}", s.label));
        for &(idx, v) in &s.features {
            out.push_str(&format!(" {}:{}", idx + 1, v));
        }
        out.push('\n');
    }
    out
}

pub fn read_libsvm_file(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text)
}

pub struct Partition {
    pub shards: Vec<Dataset>,
    /// Trailing rows dropped to make shards equal-sized; callers surface
    /// this as a warning when nonzero.
    pub dropped: usize,
}

/// Splits rows into `m` equal consecutive shards of size `floor(n/m)`.
pub fn partition_dataset(ds: &Dataset, m: usize) -> Result<Partition> {
    if m == 0 {
        return Err(Error::Config("partition needs m >= 1".into()));
    }
    let n = ds.samples.len();
    if m > n {
        return Err(Error::Config(format!(
            "cannot split {n} rows across {m} agents: fewer rows than agents"
        )));
    }
    let shard_size = n / m;
    let used = shard_size * m;
    let shards = (0..m)
        .map(|i| Dataset {
            samples: ds.samples[i * shard_size..(i + 1) * shard_size].to_vec(),
            dim: ds.dim,
        })
        .collect();
    Ok(Partition {
        shards,
        dropped: n - used,
    })
}

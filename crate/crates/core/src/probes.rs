//! Probe-set enumeration and checkpointing.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dsl::OutputSlot;

/// k-subsets of `0..n` in colexicographic order.
pub fn combinations(n: usize, k: usize) -> Combinations {
    Combinations {
        n,
        current: if k <= n { Some((0..k).collect()) } else { None },
    }
}

pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.take()?;
        let k = cur.len();
        let mut next = cur.clone();
        let mut advanced = false;
        for i in 0..k {
            let limit = if i + 1 < k { next[i + 1] } else { self.n };
            if next[i] + 1 < limit {
                next[i] += 1;
                for (j, slot) in next.iter_mut().enumerate().take(i) {
                    *slot = j;
                }
                advanced = true;
                break;
            }
        }
        if advanced {
            self.current = Some(next);
        }
        Some(cur)
    }
}

/// A set of probed output positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeSet {
    pub positions: Vec<usize>,
    pub names: Vec<String>,
    /// How many probes fall on exposed internals.
    pub internal: usize,
}

/// Every probe set of size at most `t`: by increasing size, colex within a size.
pub fn enumerate_probes(outputs: &[OutputSlot], t: usize) -> Vec<ProbeSet> {
    probe_sets(outputs, t).collect()
}

/// Lazy form of [`enumerate_probes`].
pub fn probe_sets(outputs: &[OutputSlot], t: usize) -> impl Iterator<Item = ProbeSet> + '_ {
    (0..=t.min(outputs.len())).flat_map(move |size| combinations(outputs.len(), size).map(move |c| probe_set(outputs, c)))
}

/// Number of probe sets of size at most `t` over `n` outputs.
pub fn probe_count(n: usize, t: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 0..=t.min(n) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((n - k) as u128) / (k as u128 + 1);
    }
    total
}

pub fn probe_set(outputs: &[OutputSlot], positions: Vec<usize>) -> ProbeSet {
    ProbeSet {
        names: positions.iter().map(|&p| outputs[p].name.clone()).collect(),
        internal: positions.iter().filter(|&&p| outputs[p].internal).count(),
        positions,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("checkpoint {path} line {line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("checkpoint {path} was written for a different run ({found}, expected {expected})")]
    Mismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
}

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: String,
}

/// Append-only JSON-lines file: a header with the run fingerprint, then one
/// completed record per line.
pub struct Checkpoint {
    path: PathBuf,
    file: File,
}

impl Checkpoint {
    /// Opens `path`, returning the records already stored. A missing or
    /// empty file starts a fresh checkpoint.
    pub fn open<T: DeserializeOwned>(
        path: &Path,
        fingerprint: &str,
    ) -> Result<(Self, Vec<T>), CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut records = Vec::new();
        let mut has_header = false;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let fmt = |msg: String| CheckpointError::Format {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg,
                };
                if !has_header {
                    let h: Header = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
                    if h.fingerprint != fingerprint {
                        return Err(CheckpointError::Mismatch {
                            path: path.to_path_buf(),
                            found: h.fingerprint,
                            expected: fingerprint.to_string(),
                        });
                    }
                    has_header = true;
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(r) => records.push(r),
                    // a line cut short by an interrupted run is dropped
                    Err(e) if e.is_eof() => break,
                    Err(e) => return Err(fmt(e.to_string())),
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if !has_header {
            file.set_len(0).map_err(io)?;
            let h = serde_json::to_string(&Header {
                fingerprint: fingerprint.to_string(),
            })
            .expect("header serializes");
            writeln!(file, "{h}").map_err(io)?;
        }
        Ok((
            Checkpoint {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<(), CheckpointError> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|source| CheckpointError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Indexes stored records by their probe names.
pub fn index_by_probes<T, F>(records: Vec<T>, key: F) -> BTreeMap<Vec<String>, T>
where
    F: Fn(&T) -> Vec<String>,
{
    records.into_iter().map(|r| (key(&r), r)).collect()
}

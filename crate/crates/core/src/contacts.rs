//! Timestamped contact streams and their sliding-window graphs.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub t: f64,
    pub i: usize,
    pub j: usize,
}

/// Contacts sorted by time, with node ids mapped to 0..n in ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactStream {
    pub records: Vec<Contact>,
    /// node_ids[k] is the original id of node k.
    pub node_ids: Vec<u64>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ContactStream {
    /// Reads whitespace-separated "t i j" lines. Blank lines and lines
    /// starting with '#' are skipped; extra columns and self-contacts are
    /// dropped with a warning.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut raw: Vec<(f64, u64, u64)> = Vec::new();
        let mut warnings = Vec::new();
        let mut extra_lines = 0usize;
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = text.split_whitespace().collect();
            if cols.len() < 3 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 't i j', got {text:?}"),
                });
            }
            if cols.len() > 3 {
                extra_lines += 1;
            }
            let t: f64 = cols[0].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad time {:?}", cols[0]),
            })?;
            if !t.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "non-finite time".into(),
                });
            }
            let id = |s: &str| {
                s.parse::<u64>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad node id {s:?}"),
                })
            };
            let (i, j) = (id(cols[1])?, id(cols[2])?);
            if i == j {
                warnings.push(format!("line {lineno}: self-contact of node {i} skipped"));
                continue;
            }
            raw.push((t, i, j));
        }
        if extra_lines > 0 {
            warnings.push(format!("{extra_lines} line(s) had extra columns; ignored"));
        }
        Self::from_records(raw, warnings)
    }

    pub fn from_records(raw: Vec<(f64, u64, u64)>, warnings: Vec<String>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("contact stream has no records".into()));
        }
        let mut ids: BTreeMap<u64, usize> = BTreeMap::new();
        for &(_, i, j) in &raw {
            ids.insert(i, 0);
            ids.insert(j, 0);
        }
        for (k, v) in ids.values_mut().enumerate() {
            *v = k;
        }
        let mut records: Vec<Contact> = raw
            .iter()
            .map(|&(t, i, j)| Contact {
                t,
                i: ids[&i],
                j: ids[&j],
            })
            .collect();
        records.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(ContactStream {
            records,
            node_ids: ids.into_keys().collect(),
            warnings,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn t_max(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

/// Window parameters: window k (1-based) covers
/// [origin + step (k-1), origin + step (k-1) + window).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window: f64,
    pub step: f64,
    pub origin: f64,
}

impl WindowSpec {
    pub fn new(window: f64, step: f64) -> Self {
        WindowSpec {
            window,
            step,
            origin: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.window > 0.0
            && self.step > 0.0
            && self.window.is_finite()
            && self.step.is_finite())
        {
            return Err(Error::InvalidArgument(
                "window and step must be positive".into(),
            ));
        }
        if !self.origin.is_finite() {
            return Err(Error::InvalidArgument(
                "window origin must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Number of windows that fit inside [origin, t_max]:
    /// max(0, floor((t_max - origin - window) / step) + 1).
    pub fn count(&self, t_max: f64) -> usize {
        let k = ((t_max - self.origin - self.window) / self.step).floor() + 1.0;
        if k > 0.0 {
            k as usize
        } else {
            0
        }
    }

    /// 1-based indices of the windows containing time t, ignoring the count
    /// limit. Empty when t precedes the origin.
    pub fn membership(&self, t: f64) -> RangeInclusive<usize> {
        let rel = t - self.origin;
        if rel < 0.0 {
            return RangeInclusive::new(1, 0);
        }
        let last = (rel / self.step).floor() as i64 + 1;
        let first = (((rel - self.window) / self.step).floor() as i64 + 2).max(1);
        first as usize..=last as usize
    }
}

/// One simple graph per window over the stream's full node set.
pub fn window_contacts(stream: &ContactStream, spec: WindowSpec) -> Result<Vec<Graph>> {
    spec.validate()?;
    if stream.records.is_empty() {
        return Err(Error::Empty("contact stream has no records".into()));
    }
    let n = stream.node_count();
    let count = spec.count(stream.t_max());
    let times: Vec<f64> = stream.records.iter().map(|r| r.t).collect();
    (0..count)
        .map(|k| {
            let start = spec.origin + spec.step * k as f64;
            let end = start + spec.window;
            let lo = times.partition_point(|&t| t < start);
            let hi = times.partition_point(|&t| t < end);
            Graph::from_edges(n, stream.records[lo..hi].iter().map(|r| (r.i, r.j)))
        })
        .collect()
}

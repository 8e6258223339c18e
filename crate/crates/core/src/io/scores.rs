//! Consecutive-image distance scores: CSV with header `pair_id,method,k,score`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::Method;
use crate::error::{Error, Result};
use crate::stats::ScoreSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub pair_id: String,
    pub method: Method,
    pub k: usize,
    pub score: f64,
}

/// Reads a scores file into one series per `(pair_id, method)`, ordered by
/// that key. Within a series `k` must run `0, 1, ..` without gaps, in any
/// row order.
pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreSeries>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["pair_id", "method", "k", "score"] {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("expected header pair_id,method,k,score, found {headers:?}"),
        });
    }
    let mut grouped: BTreeMap<(String, Method), BTreeMap<usize, f64>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: ScoreRow = row?;
        let series = grouped
            .entry((row.pair_id.clone(), row.method))
            .or_default();
        if series.insert(row.k, row.score).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate k = {} for {}/{}",
                row.k, row.pair_id, row.method
            )));
        }
    }
    grouped
        .into_iter()
        .map(|((pair_id, method), ks)| {
            if let Some((pos, k)) = ks.keys().enumerate().find(|(pos, k)| *pos != **k) {
                return Err(Error::Invalid(format!(
                    "{pair_id}/{method}: k values not contiguous from 0 (found {k} at position {pos})"
                )));
            }
            ScoreSeries::new(pair_id, method, ks.into_values().collect())
        })
        .collect()
}

pub fn write_scores(path: impl AsRef<Path>, series: &[ScoreSeries]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path.as_ref())?;
    w.write_record(["pair_id", "method", "k", "score"])?;
    for s in series {
        for (k, v) in s.scores().iter().enumerate() {
            w.write_record([
                s.pair_id.as_str(),
                s.method.as_str(),
                &k.to_string(),
                &super::fmt_f64(*v),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

//! Per-group aggregation of path reports: quartiles of PPL and coupling
//! cost per method, and paired Wilcoxon tests of OT against the other
//! couplings.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::coupling::Method;
use crate::error::{Error, Result};
use crate::stats::{quantile, skewness, wilcoxon_signed_rank, WilcoxonResult};

/// Results for one pair under one coupling method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub pair_id: String,
    pub method: Method,
    pub group: f64,
    pub coupling_cost: f64,
    /// Consecutive image distances, in trajectory order.
    pub scores: Vec<f64>,
    pub ppl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            q1: quantile(xs, 0.25)?,
            median: quantile(xs, 0.5)?,
            q3: quantile(xs, 0.75)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodStats {
    pub method: Method,
    pub n: usize,
    pub ppl: Quartiles,
    pub cost: Quartiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ppl,
    Cost,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ppl => "ppl",
            Metric::Cost => "cost",
        }
    }
}

/// Paired test of OT against another method on one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTest {
    pub other: Method,
    pub metric: Metric,
    pub result: WilcoxonResult,
    /// Skewness of the paired differences (OT minus other); the test
    /// assumes these are roughly symmetric.
    pub difference_skewness: Option<f64>,
}

impl ComparisonTest {
    pub fn label(&self) -> String {
        format!("OT-vs-{}", self.other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub group: f64,
    pub pairs: usize,
    pub methods: Vec<MethodStats>,
    pub tests: Vec<ComparisonTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub groups: Vec<GroupStats>,
    /// Methods every included pair was required to have.
    pub methods: Vec<Method>,
    /// Pairs dropped because a required method was missing.
    pub excluded_pairs: Vec<String>,
}

impl GroupSummary {
    pub fn warning_count(&self) -> usize {
        self.excluded_pairs.len()
    }
}

fn group_key(group: f64) -> i64 {
    (group * 2.0).round() as i64
}

/// Aggregates reports by similarity group.
///
/// The methods required of each pair are those appearing anywhere in the
/// input; a pair lacking any of them is excluded and counted. Groups and
/// pairs are processed in sorted order, so the result does not depend on
/// input order.
pub fn group_report(reports: &[PathReport]) -> Result<GroupSummary> {
    let methods: BTreeSet<Method> = reports.iter().map(|r| r.method).collect();
    let mut by_pair: BTreeMap<&str, BTreeMap<Method, &PathReport>> = BTreeMap::new();
    for r in reports {
        if by_pair
            .entry(&r.pair_id)
            .or_default()
            .insert(r.method, r)
            .is_some()
        {
            return Err(Error::Invalid(format!(
                "duplicate report for {}/{}",
                r.pair_id, r.method
            )));
        }
    }

    let mut excluded = Vec::new();
    let mut groups: BTreeMap<i64, Vec<&BTreeMap<Method, &PathReport>>> = BTreeMap::new();
    for (pair_id, per_method) in &by_pair {
        if methods.iter().any(|m| !per_method.contains_key(m)) {
            excluded.push(pair_id.to_string());
            continue;
        }
        let group = per_method.values().next().expect("non-empty").group;
        if per_method
            .values()
            .any(|r| group_key(r.group) != group_key(group))
        {
            return Err(Error::Invalid(format!(
                "pair {pair_id} has inconsistent groups"
            )));
        }
        groups.entry(group_key(group)).or_default().push(per_method);
    }
    if !excluded.is_empty() {
        log::warn!("{} pairs excluded for missing methods", excluded.len());
    }

    let mut out = Vec::with_capacity(groups.len());
    for (key, pairs) in groups {
        let column = |m: Method, metric: Metric| -> Vec<f64> {
            pairs
                .iter()
                .map(|p| match metric {
                    Metric::Ppl => p[&m].ppl,
                    Metric::Cost => p[&m].coupling_cost,
                })
                .collect()
        };
        let method_stats = methods
            .iter()
            .map(|&m| MethodStats {
                method: m,
                n: pairs.len(),
                ppl: Quartiles::of(&column(m, Metric::Ppl)).expect("group is non-empty"),
                cost: Quartiles::of(&column(m, Metric::Cost)).expect("group is non-empty"),
            })
            .collect();
        let mut tests = Vec::new();
        if methods.contains(&Method::Ot) {
            for &other in methods.iter().filter(|m| **m != Method::Ot) {
                for metric in [Metric::Ppl, Metric::Cost] {
                    let a = column(Method::Ot, metric);
                    let b = column(other, metric);
                    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                    tests.push(ComparisonTest {
                        other,
                        metric,
                        result: wilcoxon_signed_rank(&a, &b)?,
                        difference_skewness: skewness(&diffs),
                    });
                }
            }
        }
        out.push(GroupStats {
            group: key as f64 / 2.0,
            pairs: pairs.len(),
            methods: method_stats,
            tests,
        });
    }

    Ok(GroupSummary {
        groups: out,
        methods: methods.into_iter().collect(),
        excluded_pairs: excluded,
    })
}

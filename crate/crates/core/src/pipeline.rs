//! Batch orchestration: interpolate every manifest pair under each coupling
//! and write the trajectories, then join externally computed image scores
//! back onto the couplings for the group analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::matrix_to_cloud;
use crate::coupling::{couple, pair_seed, Method};
use crate::error::{Error, Result};
use crate::geometry::{sample_path, GeodesicPath, DEFAULT_GRID};
use crate::io::{
    decode_embedding, fmt_f64, fmt_sigma, load_scores, save_embedding, ManifestEntry, PairManifest,
};
use crate::report::{group_report, GroupSummary, PathReport};
use crate::stats::ppl;

pub const COUPLINGS_CSV: &str = "couplings.csv";
pub const RUN_JSON: &str = "run.json";
pub const PPL_CSV: &str = "ppl.csv";
pub const GROUP_SUMMARY_CSV: &str = "group_summary.csv";
pub const WILCOXON_CSV: &str = "wilcoxon.csv";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const EXCLUSIONS_CSV: &str = "exclusions.csv";

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub methods: Vec<Method>,
    /// Number of grid intervals `K`; each path writes `K + 1` files.
    pub grid: usize,
    pub seed: u64,
    /// Process pairs whose two embedding files are byte-identical.
    pub allow_identical: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            grid: DEFAULT_GRID,
            seed: 0,
            allow_identical: false,
            threads: None,
        }
    }
}

/// One row of `couplings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub pair_id: String,
    pub method: Method,
    /// Comma-joined target indices.
    pub sigma: String,
    pub squared_cost: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub error: String,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub grid: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub processed: Vec<String>,
    /// Seed of the random coupling drawn for each processed pair.
    pub random_seeds: BTreeMap<String, u64>,
    pub skipped_identical: Vec<String>,
    pub failures: Vec<PairFailure>,
    #[serde(skip)]
    pub couplings: Vec<CouplingRecord>,
}

impl BatchSummary {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

enum PairOutcome {
    Done(Vec<CouplingRecord>),
    SkippedIdentical,
}

/// Interpolation file for grid index `index` of one path.
pub fn interpolant_path(out_dir: &Path, pair_id: &str, method: Method, index: usize) -> PathBuf {
    out_dir
        .join(pair_id)
        .join(method.as_str())
        .join(format!("t{index}.epc"))
}

fn process_pair(entry: &ManifestEntry, opts: &BatchOptions, out_dir: &Path) -> Result<PairOutcome> {
    let a_bytes = fs::read(&entry.embedding_a).map_err(|e| Error::io(&entry.embedding_a, e))?;
    let b_bytes = fs::read(&entry.embedding_b).map_err(|e| Error::io(&entry.embedding_b, e))?;
    if a_bytes == b_bytes && !opts.allow_identical {
        return Ok(PairOutcome::SkippedIdentical);
    }
    let mu = matrix_to_cloud(&decode_embedding(&a_bytes, &entry.embedding_a)?);
    let nu = matrix_to_cloud(&decode_embedding(&b_bytes, &entry.embedding_b)?);
    let seed = pair_seed(&entry.pair_id, opts.seed);
    let mut records = Vec::with_capacity(opts.methods.len());
    for &method in &opts.methods {
        let coupling = couple(method, &mu, &nu, seed)?;
        let record = CouplingRecord {
            pair_id: entry.pair_id.clone(),
            method,
            sigma: fmt_sigma(coupling.sigma.as_slice()),
            squared_cost: coupling.squared_cost,
            cost: coupling.cost(),
        };
        let path = GeodesicPath::with_grid(mu.clone(), nu.clone(), coupling, opts.grid)?;
        let dir = out_dir.join(&entry.pair_id).join(method.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (index, cloud) in sample_path(&path).iter().enumerate() {
            save_embedding(
                interpolant_path(out_dir, &entry.pair_id, method, index),
                cloud.as_matrix(),
            )?;
        }
        records.push(record);
    }
    Ok(PairOutcome::Done(records))
}

fn with_pool<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Interpolates every pair and writes `{pair_id}/{METHOD}/t{k}.epc`,
/// `couplings.csv` and `run.json` under `out_dir`.
///
/// Interpolants keep the source row order: row `i` at time `t` is
/// `(1 - t) x_i + t y_sigma(i)`. Pairs run in parallel; a failing pair is
/// recorded and the rest continue. Output does not depend on the worker
/// count.
pub fn run_interpolation_batch(
    manifest: &PairManifest,
    opts: &BatchOptions,
    out_dir: &Path,
) -> Result<BatchSummary> {
    if opts.methods.is_empty() {
        return Err(Error::Invalid("no coupling methods selected".into()));
    }
    if opts.grid == 0 {
        return Err(Error::InvalidGrid(
            "grid needs at least one interval".into(),
        ));
    }
    let methods: Vec<Method> = opts
        .methods
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let opts = BatchOptions {
        methods,
        ..opts.clone()
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut entries: Vec<&ManifestEntry> = manifest.entries().iter().collect();
    entries.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let outcomes: Vec<(String, Result<PairOutcome>)> = with_pool(opts.threads, || {
        entries
            .par_iter()
            .map(|e| (e.pair_id.clone(), process_pair(e, &opts, out_dir)))
            .collect()
    })?;

    let mut summary = BatchSummary {
        grid: opts.grid,
        seed: opts.seed,
        methods: opts.methods.clone(),
        processed: Vec::new(),
        random_seeds: BTreeMap::new(),
        skipped_identical: Vec::new(),
        failures: Vec::new(),
        couplings: Vec::new(),
    };
    for (pair_id, outcome) in outcomes {
        match outcome {
            Ok(PairOutcome::Done(records)) => {
                if opts.methods.contains(&Method::Random) {
                    summary
                        .random_seeds
                        .insert(pair_id.clone(), pair_seed(&pair_id, opts.seed));
                }
                summary.processed.push(pair_id);
                summary.couplings.extend(records);
            }
            Ok(PairOutcome::SkippedIdentical) => {
                log::info!("skipping {pair_id}: embedding files are identical");
                summary.skipped_identical.push(pair_id);
            }
            Err(e) => summary.failures.push(PairFailure {
                pair_id,
                error: e.to_string(),
            }),
        }
    }
    for f in &summary.failures {
        log::warn!("pair {} failed: {}", f.pair_id, f.error);
    }
    summary
        .couplings
        .sort_by(|a, b| (&a.pair_id, a.method).cmp(&(&b.pair_id, b.method)));

    write_couplings(&out_dir.join(COUPLINGS_CSV), &summary.couplings)?;
    let run_path = out_dir.join(RUN_JSON);
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    fs::write(&run_path, json).map_err(|e| Error::io(&run_path, e))?;
    Ok(summary)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn write_couplings(path: &Path, records: &[CouplingRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["pair_id", "method", "sigma", "squared_cost", "cost"])?;
    for r in records {
        w.write_record([
            r.pair_id.as_str(),
            r.method.as_str(),
            r.sigma.as_str(),
            &fmt_f64(r.squared_cost),
            &fmt_f64(r.cost),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_couplings(path: &Path) -> Result<Vec<CouplingRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Why a `(pair, method)` was left out of the analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub pair_id: String,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub reports: Vec<PathReport>,
    pub groups: GroupSummary,
    pub exclusions: Vec<Exclusion>,
}

/// Joins scores with couplings and the manifest's groups, then writes
/// `ppl.csv`, `group_summary.csv`, `wilcoxon.csv`, `diagnostics.csv` and
/// `exclusions.csv` under `out_dir`.
///
/// Score series with no coupling row, and couplings with no scores, are
/// listed as exclusions. If nothing survives the join the call fails
/// before writing any file.
pub fn run_analysis(
    manifest: &PairManifest,
    scores_file: &Path,
    couplings_file: &Path,
    out_dir: &Path,
) -> Result<AnalysisSummary> {
    let couplings = read_couplings(couplings_file)?;
    let scores = load_scores(scores_file)?;

    let mut cost_of: BTreeMap<(String, Method), f64> = BTreeMap::new();
    for c in &couplings {
        if cost_of
            .insert((c.pair_id.clone(), c.method), c.cost)
            .is_some()
        {
            return Err(Error::Invalid(format!(
                "duplicate coupling row for {}/{}",
                c.pair_id, c.method
            )));
        }
    }

    let mut reports = Vec::new();
    let mut exclusions = Vec::new();
    let mut scored = BTreeSet::new();
    for s in &scores {
        let key = (s.pair_id.clone(), s.method);
        scored.insert(key.clone());
        let Some(&cost) = cost_of.get(&key) else {
            log::warn!("orphan scores for {}/{}", s.pair_id, s.method);
            exclusions.push(Exclusion {
                pair_id: s.pair_id.clone(),
                method: s.method,
                reason: "scores without a coupling".into(),
            });
            continue;
        };
        let Some(entry) = manifest.get(&s.pair_id) else {
            exclusions.push(Exclusion {
                pair_id: s.pair_id.clone(),
                method: s.method,
                reason: "pair not in manifest".into(),
            });
            continue;
        };
        reports.push(PathReport {
            pair_id: s.pair_id.clone(),
            method: s.method,
            group: entry.group(),
            coupling_cost: cost,
            scores: s.scores().to_vec(),
            ppl: ppl(s),
        });
    }
    for key in cost_of.keys() {
        if !scored.contains(key) {
            exclusions.push(Exclusion {
                pair_id: key.0.clone(),
                method: key.1,
                reason: "coupling without scores".into(),
            });
        }
    }
    if reports.is_empty() {
        return Err(Error::Invalid(
            "no (pair, method) has both scores and a coupling".into(),
        ));
    }
    let groups = group_report(&reports)?;
    for pair_id in &groups.excluded_pairs {
        for r in reports.iter().filter(|r| &r.pair_id == pair_id) {
            exclusions.push(Exclusion {
                pair_id: pair_id.clone(),
                method: r.method,
                reason: "pair lacks a required method".into(),
            });
        }
    }
    exclusions.sort_by(|a, b| (&a.pair_id, a.method).cmp(&(&b.pair_id, b.method)));

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_reports(out_dir, &reports, &groups, &exclusions)?;
    Ok(AnalysisSummary {
        reports,
        groups,
        exclusions,
    })
}

fn write_reports(
    out_dir: &Path,
    reports: &[PathReport],
    groups: &GroupSummary,
    exclusions: &[Exclusion],
) -> Result<()> {
    let path = out_dir.join(PPL_CSV);
    let mut w = csv_writer(&path)?;
    w.write_record(["pair_id", "method", "group", "ppl"])?;
    for r in reports {
        w.write_record([
            r.pair_id.as_str(),
            r.method.as_str(),
            &fmt_f64(r.group),
            &fmt_f64(r.ppl),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out_dir.join(GROUP_SUMMARY_CSV);
    let mut w = csv_writer(&path)?;
    w.write_record([
        "group",
        "method",
        "ppl_median",
        "ppl_q1",
        "ppl_q3",
        "cost_median",
        "cost_q1",
        "cost_q3",
    ])?;
    for g in &groups.groups {
        for m in &g.methods {
            w.write_record([
                fmt_f64(g.group),
                m.method.to_string(),
                fmt_f64(m.ppl.median),
                fmt_f64(m.ppl.q1),
                fmt_f64(m.ppl.q3),
                fmt_f64(m.cost.median),
                fmt_f64(m.cost.q1),
                fmt_f64(m.cost.q3),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out_dir.join(WILCOXON_CSV);
    let mut w = csv_writer(&path)?;
    w.write_record([
        "group",
        "comparison",
        "metric",
        "statistic",
        "p_value",
        "stars",
    ])?;
    for g in &groups.groups {
        for t in &g.tests {
            w.write_record([
                fmt_f64(g.group),
                t.label(),
                t.metric.as_str().to_string(),
                fmt_f64(t.result.statistic),
                fmt_f64(t.result.p_value),
                t.result.significance_stars.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out_dir.join(DIAGNOSTICS_CSV);
    let mut w = csv_writer(&path)?;
    w.write_record([
        "group",
        "comparison",
        "metric",
        "n_effective",
        "p_method",
        "difference_skewness",
    ])?;
    for g in &groups.groups {
        for t in &g.tests {
            let method = serde_json::to_value(t.result.method)?;
            w.write_record([
                fmt_f64(g.group),
                t.label(),
                t.metric.as_str().to_string(),
                t.result.n_effective.to_string(),
                method.as_str().unwrap_or_default().to_string(),
                t.difference_skewness.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out_dir.join(EXCLUSIONS_CSV);
    let mut w = csv_writer(&path)?;
    w.write_record(["pair_id", "method", "reason"])?;
    for e in exclusions {
        w.write_record([e.pair_id.as_str(), e.method.as_str(), e.reason.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

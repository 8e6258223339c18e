mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use embedot::attention::{run_invariance_harness, HarnessConfig};
use embedot::geometry::DEFAULT_GRID;
use embedot::io::{fmt_sigma, load_embedding, load_scores, save_embedding, PairManifest};
use embedot::pipeline::{run_analysis, run_interpolation_batch, BatchOptions, COUPLINGS_CSV};
use embedot::pixel::trajectory_distances;
use embedot::stats::{wilcoxon_exact, wilcoxon_normal};
use embedot::{
    build_cost_matrix, couple, matrix_to_cloud, ppl, sample_path, solve_assignment_bruteforce,
    solve_assignment_exact, wasserstein_distance, Coupling64, GeodesicPath, Method, PointCloud64,
    ScoreSeries, WilcoxonResult,
};

use output::{int, num, text, Format, Table};

#[derive(Parser)]
#[command(
    name = "embedot",
    version,
    about = "Wasserstein interpolation of embedding point clouds"
)]
struct Cli {
    /// Global seed for random couplings and harnesses.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of grid intervals for interpolation paths.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Output file, or output directory for commands that write many files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W2 distance between two embedding files.
    Distance(PairArgs),
    /// Coupling and its cost under one method.
    Couple {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value = "OT")]
        method: Method,
    },
    /// Write the K+1 interpolants of one pair to the --out directory.
    Interpolate {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value = "OT")]
        method: Method,
    },
    /// Interpolate every manifest pair under each method.
    Batch {
        manifest: PathBuf,
        /// Comma-separated subset of OT, CLIP, RANDOM.
        #[arg(long, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
        methods: Vec<Method>,
        /// Also process pairs whose embedding files are byte-identical.
        #[arg(long)]
        allow_identical: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Perceptual path length from a scores file or from image frames.
    Ppl(PplArgs),
    /// Paired signed-rank test on a CSV with columns a,b.
    Wilcoxon {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = PMethod::Auto)]
        p_method: PMethod,
    },
    /// Join scores with couplings and write the group reports to --out.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Defaults to couplings.csv next to the manifest.
        #[arg(long)]
        couplings: Option<PathBuf>,
    },
    /// Random cross-attention permutation checks.
    InvarianceCheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Maximum number of query rows.
        #[arg(long, default_value_t = 8)]
        nx: usize,
        /// Number of key/value rows.
        #[arg(long, default_value_t = 77)]
        nxp: usize,
        /// Maximum feature width.
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Quick built-in consistency checks.
    Selftest,
}

#[derive(Args)]
struct PairArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PplArgs {
    /// Scores file with header pair_id,method,k,score.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Directories of PNG frames, one trajectory each, read in file-name
    /// order. Uses a non-perceptual pixel distance.
    #[arg(long, num_args = 1..)]
    images: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PMethod {
    Auto,
    Exact,
    Normal,
}

/// Outcome of a command that ran to completion.
enum Status {
    Ok,
    Partial,
}

fn load_pair(p: &PairArgs) -> Result<(PointCloud64, PointCloud64)> {
    Ok((
        matrix_to_cloud(&load_embedding(&p.a)?),
        matrix_to_cloud(&load_embedding(&p.b)?),
    ))
}

fn coupling_row(table: &mut Table, c: &Coupling64) {
    table.push(vec![
        text(c.method.method().as_str()),
        text(fmt_sigma(c.sigma.as_slice())),
        num(c.squared_cost),
        num(c.cost()),
    ]);
}

fn require_out(out: Option<&Path>, command: &str) -> Result<PathBuf> {
    match out {
        Some(p) => Ok(p.to_path_buf()),
        None => bail!("{command} needs --out DIR"),
    }
}

fn run(cli: &Cli) -> Result<Status> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Distance(pair) => {
            let (mu, nu) = load_pair(pair)?;
            let (w2, c) = wasserstein_distance(&mu, &nu)?;
            let mut t = Table::new(&["w2", "squared_cost", "sigma"]);
            t.push(vec![
                num(w2),
                num(c.squared_cost),
                text(fmt_sigma(c.sigma.as_slice())),
            ]);
            t.emit(cli.format, out)?;
        }
        Command::Couple { pair, method } => {
            let (mu, nu) = load_pair(pair)?;
            let c = couple(*method, &mu, &nu, cli.seed)?;
            let mut t = Table::new(&["method", "sigma", "squared_cost", "cost"]);
            coupling_row(&mut t, &c);
            t.emit(cli.format, out)?;
        }
        Command::Interpolate { pair, method } => {
            let dir = require_out(out, "interpolate")?;
            let (mu, nu) = load_pair(pair)?;
            let c = couple(*method, &mu, &nu, cli.seed)?;
            let mut t = Table::new(&["method", "sigma", "squared_cost", "cost"]);
            coupling_row(&mut t, &c);
            let path = GeodesicPath::with_grid(mu, nu, c, cli.grid)?;
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (k, cloud) in sample_path(&path).iter().enumerate() {
                save_embedding(dir.join(format!("t{k}.epc")), cloud.as_matrix())?;
            }
            t.emit(cli.format, None)?;
        }
        Command::Batch {
            manifest,
            methods,
            allow_identical,
            threads,
        } => {
            let dir = require_out(out, "batch")?;
            let manifest = PairManifest::load(manifest)?;
            let opts = BatchOptions {
                methods: methods.clone(),
                grid: cli.grid,
                seed: cli.seed,
                allow_identical: *allow_identical,
                threads: *threads,
            };
            let summary = run_interpolation_batch(&manifest, &opts, &dir)?;
            eprintln!(
                "processed {} pairs, skipped {} identical, {} failed",
                summary.processed.len(),
                summary.skipped_identical.len(),
                summary.failures.len()
            );
            for f in &summary.failures {
                eprintln!("failed {}: {}", f.pair_id, f.error);
            }
            if summary.is_partial() {
                return Ok(Status::Partial);
            }
        }
        Command::Ppl(args) => ppl_command(args, cli.format, out)?,
        Command::Wilcoxon { input, p_method } => {
            let (a, b) = read_paired(input)?;
            let r: WilcoxonResult = match p_method {
                PMethod::Auto => embedot::wilcoxon_signed_rank(&a, &b)?,
                PMethod::Exact => wilcoxon_exact(&a, &b)?,
                PMethod::Normal => wilcoxon_normal(&a, &b)?,
            };
            let method = serde_json::to_value(r.method)?;
            let mut t = Table::new(&[
                "n_effective",
                "statistic",
                "w_plus",
                "p_value",
                "stars",
                "p_method",
            ]);
            t.push(vec![
                int(r.n_effective),
                num(r.statistic),
                num(r.w_plus),
                num(r.p_value),
                text(r.significance_stars.as_str()),
                method,
            ]);
            t.emit(cli.format, out)?;
        }
        Command::Analyze {
            manifest,
            scores,
            couplings,
        } => {
            let dir = require_out(out, "analyze")?;
            let couplings = match couplings {
                Some(c) => c.clone(),
                None => manifest
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join(COUPLINGS_CSV),
            };
            let manifest = PairManifest::load(manifest)?;
            let summary = run_analysis(&manifest, scores, &couplings, &dir)?;
            eprintln!(
                "{} path reports in {} groups, {} exclusions",
                summary.reports.len(),
                summary.groups.groups.len(),
                summary.exclusions.len()
            );
        }
        Command::InvarianceCheck {
            instances,
            nx,
            nxp,
            dim,
            tol,
        } => {
            let config = HarnessConfig {
                instances: *instances,
                max_queries: *nx,
                context_rows: *nxp,
                max_dim: *dim,
                seed: cli.seed,
                tolerance: *tol,
                ..HarnessConfig::default()
            };
            let r = run_invariance_harness(&config)?;
            let mut t = Table::new(&[
                "instances",
                "invariant",
                "max_deviation",
                "query_sensitive",
                "specificity",
            ]);
            t.push(vec![
                int(r.instances),
                int(r.invariant),
                num(r.max_deviation),
                int(r.query_sensitive),
                num(r.specificity()),
            ]);
            t.emit(cli.format, out)?;
            ensure!(
                r.all_invariant(),
                "{} of {} instances exceeded tolerance {tol}",
                r.instances - r.invariant,
                r.instances
            );
        }
        Command::Selftest => selftest(cli.format, out)?,
    }
    Ok(Status::Ok)
}

fn ppl_command(args: &PplArgs, format: Format, out: Option<&Path>) -> Result<()> {
    if let Some(scores) = &args.scores {
        let mut t = Table::new(&["pair_id", "method", "ppl", "k"]);
        for s in load_scores(scores)? {
            t.push(vec![
                text(&s.pair_id),
                text(s.method.as_str()),
                num(ppl(&s)),
                int(s.len()),
            ]);
        }
        return t.emit(format, out);
    }
    let dirs = args.images.as_deref().unwrap_or_default();
    log::warn!("image fallback uses mean absolute pixel difference, not a perceptual metric");
    let mut t = Table::new(&["trajectory", "ppl", "k", "metric"]);
    for dir in dirs {
        let mut frames: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        frames.retain(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")));
        frames.sort();
        ensure!(
            frames.len() >= 2,
            "{} has fewer than two PNG frames",
            dir.display()
        );
        let scores = trajectory_distances(&frames)?;
        let series = ScoreSeries::new(dir.display().to_string(), Method::Ot, scores)?;
        t.push(vec![
            text(dir.display().to_string()),
            num(ppl(&series)),
            int(series.len()),
            text("mean-abs-pixel (non-perceptual)"),
        ]);
    }
    t.emit(format, out)
}

fn read_paired(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{} has no column {name:?}", path.display()))
    };
    let (ia, ib) = (col("a")?, col("b")?);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse()
                .with_context(|| format!("row {}: cannot parse {field:?} as a number", line + 1))
        };
        a.push(parse(ia)?);
        b.push(parse(ib)?);
    }
    Ok((a, b))
}

fn selftest(format: Format, out: Option<&Path>) -> Result<()> {
    let mut t = Table::new(&["check", "status", "detail"]);
    let mut failures = 0;
    let mut record = |name: &str, outcome: Result<String>| {
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(e) => {
                failures += 1;
                ("FAIL", format!("{e:#}"))
            }
        };
        t.push(vec![text(name), text(status), text(detail)]);
    };

    record(
        "worked-example",
        (|| {
            let mu = PointCloud64::from_rows(&[[0.0, 0.0], [1.0, 0.0]])?;
            let nu = PointCloud64::from_rows(&[[2.0, 0.0], [0.0, 1.0]])?;
            let (w2, c) = wasserstein_distance(&mu, &nu)?;
            let clip = couple(Method::Clip, &mu, &nu, 0)?.cost();
            ensure!(w2 == 2f64.sqrt() && clip == 6f64.sqrt() && c.sigma.as_slice() == [1, 0]);
            Ok(format!("W2 {w2}, CLIP cost {clip}"))
        })(),
    );

    record(
        "solver-vs-enumeration",
        (|| {
            let mut state = 0x5eed_u64;
            let mut next = || {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            for n in 1..=7 {
                let rows: Vec<Vec<f64>> =
                    (0..2 * n).map(|_| vec![next(), next(), next()]).collect();
                let mu = PointCloud64::from_rows(&rows[..n])?;
                let nu = PointCloud64::from_rows(&rows[n..])?;
                let c = build_cost_matrix(&mu, &nu)?;
                let fast = solve_assignment_exact(&c).squared_cost;
                let slow = solve_assignment_bruteforce(&c)?.squared_cost;
                ensure!(
                    (fast - slow).abs() <= 1e-9 * slow.max(1.0),
                    "n={n}: {fast} vs {slow}"
                );
            }
            Ok("n = 1..7 agree".into())
        })(),
    );

    record(
        "attention-invariance",
        (|| {
            let r = run_invariance_harness(&HarnessConfig {
                instances: 50,
                ..HarnessConfig::default()
            })?;
            ensure!(r.all_invariant() && r.specificity() >= 0.95);
            Ok(format!("max deviation {:e}", r.max_deviation))
        })(),
    );

    record(
        "wilcoxon-exact",
        (|| {
            let p = wilcoxon_exact(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6])?.p_value;
            ensure!(p == 0.03125, "p = {p}");
            Ok("all-positive n=6 gives p = 0.03125".into())
        })(),
    );

    t.emit(format, out)?;
    ensure!(failures == 0, "{failures} self-test checks failed");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

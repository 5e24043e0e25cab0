//! Command-line interface.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O or dataset parse
//! error, 3 distance-cache mismatch, 4 a weight-preset-dependent bound was
//! violated, 5 an unconditional check failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::cache::{self, CacheKey};
use crate::error::{Error, Result};
use crate::gnn::{
    finite_erm_check, gin_forward, random_gin, stability_report, GinModel, Subsample,
};
use crate::graph::{Dataset, Graph};
use crate::io::{load_jsonl, load_tu};
use crate::medoids::{feature_distance_matrix, kmedoids, random_selection, wl_pseudometric_matrix};
use crate::nodes::{subsample_dataset, Heuristics, NodeSubsample};
use crate::synthetic::{feature_scaled_pair, random_dataset};
use crate::tmd::{pairwise_matrix, tmd, DistanceMatrix, FeatureNorm, TmdConfig, WeightFn};
use crate::treenorm::tree_norm_batch;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CACHE: i32 = 3;
pub const EXIT_PRESET: i32 = 4;
pub const EXIT_ASSERTION: i32 = 5;

/// Sweep multipliers applied to `eta` by `verify --sweep`.
pub const SWEEP: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Tu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphMethod {
    Tmd,
    Wl,
    Feature,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Stability,
    ErmGraphs,
    ErmNodes,
    WlCounterexample,
}

#[derive(Debug, Parser)]
#[command(
    name = "tmd-coreset",
    version,
    about = "Tree Mover's Distance coresets for graph datasets"
)]
pub struct Cli {
    /// Dataset path: a JSONL file, or a directory for --format tu.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "jsonl")]
    pub format: Format,
    /// TU dataset name (file prefix); defaults to the directory name.
    #[arg(long, global = true)]
    pub name: Option<String>,
    /// Computation-tree depth L.
    #[arg(long, global = true, default_value_t = 3)]
    pub depth: usize,
    /// Weight preset: const:<lambda> or table:w1,...,w(L-1).
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Feature norm: l1 or l2.
    #[arg(long, global = true, default_value = "l2")]
    pub norm: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Distance-matrix cache file.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise TMD matrix, written in the binary cache format.
    Dist,
    /// Tree norm of every graph.
    Treenorm,
    /// Select k representative graphs.
    SubsampleGraphs {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "tmd")]
        method: GraphMethod,
    },
    /// Keep a fraction of the nodes of every graph.
    SubsampleNodes {
        #[arg(long)]
        frac: f64,
        #[arg(long, default_value = "bfs,rw,kcore")]
        heuristics: String,
    },
    /// Empirical checks of the stability and coreset bounds.
    Verify {
        #[arg(long, value_enum)]
        mode: VerifyMode,
        /// Use a seeded synthetic dataset with this many graphs.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        hypotheses: usize,
        /// GIN aggregation weight; the default preset is w = eta.
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Scale the base preset by lambda in {0.5, 1, 2, 4}.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        /// Node fraction for erm-nodes.
        #[arg(long, default_value_t = 0.5)]
        frac: f64,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
    },
}

/// Counters exposed for tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Distance matrices computed rather than read from the cache.
    pub recomputes: usize,
}

struct Ctx<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    stats: RunStats,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Input(_)
        | Error::SizeLimit(_)
        | Error::DimensionMismatch { .. }
        | Error::Validation(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::MissingFile(_) | Error::Io(_) => EXIT_IO,
        Error::Cache(_) => EXIT_CACHE,
        Error::Overflow(_) | Error::Consistency(_) => EXIT_ASSERTION,
    }
}

/// Run with process stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(args, &mut stdout.lock(), &mut stderr.lock()).0
}

/// Run with explicit output streams; also returns run counters.
pub fn run_with_io<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> (i32, RunStats)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return (code, RunStats::default());
        }
    };
    let mut ctx = Ctx {
        cli: &cli,
        out,
        err,
        stats: RunStats::default(),
    };
    let code = match dispatch(&mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            exit_code(&e)
        }
    };
    (code, ctx.stats)
}

fn dispatch(ctx: &mut Ctx) -> Result<i32> {
    match &ctx.cli.command {
        Command::Dist => cmd_dist(ctx),
        Command::Treenorm => cmd_treenorm(ctx),
        Command::SubsampleGraphs { k, method } => cmd_subsample_graphs(ctx, *k, *method),
        Command::SubsampleNodes { frac, heuristics } => cmd_subsample_nodes(ctx, *frac, heuristics),
        Command::Verify { .. } => cmd_verify(ctx),
    }
}

fn norm(cli: &Cli) -> Result<FeatureNorm> {
    cli.norm.parse()
}

fn config_with(cli: &Cli, weights: WeightFn) -> Result<TmdConfig> {
    TmdConfig::new(cli.depth, weights, norm(cli)?)
}

fn config(cli: &Cli) -> Result<TmdConfig> {
    let w = cli.weights.as_deref().unwrap_or("const:1").parse()?;
    config_with(cli, w)
}

fn load_dataset(cli: &Cli) -> Result<Dataset> {
    let path = cli
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("--dataset is required".into()))?;
    match cli.format {
        Format::Jsonl => load_jsonl(path),
        Format::Tu => {
            let name = match &cli.name {
                Some(n) => n.clone(),
                None => path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .ok_or_else(|| Error::Config("--name is required for --format tu".into()))?,
            };
            if !path.is_dir() {
                return Err(Error::MissingFile(path.clone()));
            }
            load_tu(path, &name)
        }
    }
}

fn emit(ctx: &mut Ctx, text: &str) -> Result<()> {
    match &ctx.cli.out {
        Some(p) => fs::write(p, text)?,
        None => ctx.out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Distance matrix for `metric`, through the cache when one is configured.
fn matrix(
    ctx: &mut Ctx,
    ds: &Dataset,
    key: CacheKey,
    compute: impl FnOnce() -> Result<DistanceMatrix>,
) -> Result<DistanceMatrix> {
    match &ctx.cli.cache {
        Some(path) => {
            let (m, fresh) = cache::load_or_compute(path, &key, ds.len(), compute)?;
            ctx.stats.recomputes += usize::from(fresh);
            Ok(m)
        }
        None => {
            ctx.stats.recomputes += 1;
            compute()
        }
    }
}

fn tmd_key(ds: &Dataset, cfg: &TmdConfig) -> CacheKey {
    CacheKey {
        metric: cfg.metric_tag(),
        depth: cfg.depth() as u32,
        preset: cfg.weights().to_string(),
        norm: cfg.norm().as_str().into(),
        dataset_sha256: cache::dataset_hash(ds),
    }
}

fn tmd_matrix(ctx: &mut Ctx, ds: &Dataset, cfg: &TmdConfig) -> Result<DistanceMatrix> {
    let key = tmd_key(ds, cfg);
    matrix(ctx, ds, key, || pairwise_matrix(ds, cfg))
}

fn cmd_dist(ctx: &mut Ctx) -> Result<i32> {
    let cfg = config(ctx.cli)?;
    let ds = load_dataset(ctx.cli)?;
    if ctx.cli.out.is_none() && ctx.cli.cache.is_none() {
        return Err(Error::Config("dist needs --out or --cache".into()));
    }
    let m = tmd_matrix(ctx, &ds, &cfg)?;
    let bytes = cache::encode(&m);
    if let Some(p) = &ctx.cli.out {
        fs::write(p, &bytes)?;
    }
    let sum = cache::checksum(&bytes);
    if ctx.cli.json {
        let v = json!({"n": m.size(), "values": m.values().len(), "sha256": sum});
        writeln!(ctx.out, "{v}")?;
    } else {
        writeln!(
            ctx.out,
            "n={} values={} sha256={}",
            m.size(),
            m.values().len(),
            sum
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_treenorm(ctx: &mut Ctx) -> Result<i32> {
    let cfg = config(ctx.cli)?;
    let ds = load_dataset(ctx.cli)?;
    let values = tree_norm_batch(&ds, &cfg)?;
    let text = if ctx.cli.json {
        serde_json::to_string(&values).expect("finite floats") + "\n"
    } else {
        values.iter().map(|v| format!("{v}\n")).collect()
    };
    emit(ctx, &text)?;
    Ok(EXIT_OK)
}

fn cmd_subsample_graphs(ctx: &mut Ctx, k: usize, method: GraphMethod) -> Result<i32> {
    let cfg = config(ctx.cli)?;
    let ds = load_dataset(ctx.cli)?;
    if k == 0 || k > ds.len() {
        return Err(Error::Config(format!("--k {k} outside 1..={}", ds.len())));
    }
    let seed = ctx.cli.seed;
    let hash = cache::dataset_hash(&ds);
    let selection = match method {
        GraphMethod::Tmd => {
            let m = tmd_matrix(ctx, &ds, &cfg)?;
            let mut s = kmedoids(&m, k, seed, 100)?;
            s.method = "tmd".into();
            s
        }
        GraphMethod::Wl => {
            let key = CacheKey {
                metric: "wl".into(),
                depth: cfg.depth() as u32,
                preset: "none".into(),
                norm: "none".into(),
                dataset_sha256: hash,
            };
            let m = matrix(ctx, &ds, key, || wl_pseudometric_matrix(&ds, cfg.depth()))?;
            let mut s = kmedoids(&m, k, seed, 100)?;
            s.method = "wl".into();
            s
        }
        GraphMethod::Feature => {
            let key = CacheKey {
                metric: "feature".into(),
                depth: 0,
                preset: "none".into(),
                norm: "l2".into(),
                dataset_sha256: hash,
            };
            let m = matrix(ctx, &ds, key, || feature_distance_matrix(&ds))?;
            let mut s = kmedoids(&m, k, seed, 100)?;
            s.method = "feature".into();
            s
        }
        GraphMethod::Random => {
            let m = match ctx.cli.cache {
                Some(_) => Some(tmd_matrix(ctx, &ds, &cfg)?),
                None => None,
            };
            random_selection(ds.len(), k, seed, m.as_ref())?
        }
    };
    emit(ctx, &to_json(&selection))?;
    Ok(EXIT_OK)
}

fn cmd_subsample_nodes(ctx: &mut Ctx, frac: f64, heuristics: &str) -> Result<i32> {
    let cfg = config(ctx.cli)?;
    let h: Heuristics = heuristics.parse()?;
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::Config(format!("--frac {frac} outside (0, 1]")));
    }
    let ds = load_dataset(ctx.cli)?;
    let subs = subsample_dataset(&ds, frac, &cfg, h, ctx.cli.seed)?;
    let text: String = subs
        .iter()
        .map(|s| serde_json::to_string(s).expect("serializable") + "\n")
        .collect();
    emit(ctx, &text)?;
    let mean = if subs.is_empty() {
        0.0
    } else {
        subs.iter().map(|s| s.tmd_to_full).sum::<f64>() / subs.len() as f64
    };
    writeln!(ctx.err, "graphs={} mean_epsilon={mean}", subs.len())?;
    Ok(EXIT_OK)
}

struct VerifyArgs {
    mode: VerifyMode,
    synthetic: Option<usize>,
    k: usize,
    hypotheses: usize,
    eta: f64,
    sweep: bool,
    pairs: usize,
    frac: f64,
    hidden: usize,
}

fn verify_args(cli: &Cli) -> VerifyArgs {
    match &cli.command {
        Command::Verify {
            mode,
            synthetic,
            k,
            hypotheses,
            eta,
            sweep,
            pairs,
            frac,
            hidden,
        } => VerifyArgs {
            mode: *mode,
            synthetic: *synthetic,
            k: *k,
            hypotheses: *hypotheses,
            eta: *eta,
            sweep: *sweep,
            pairs: *pairs,
            frac: *frac,
            hidden: *hidden,
        },
        _ => unreachable!("verify arguments requested for another command"),
    }
}

/// Weight presets under test: the base preset (--weights, or w = eta),
/// scaled by every sweep multiplier when --sweep is set.
fn presets(cli: &Cli, a: &VerifyArgs) -> Result<Vec<TmdConfig>> {
    let base = match &cli.weights {
        Some(w) => w.parse()?,
        None => WeightFn::Const(a.eta),
    };
    let lambdas: &[f64] = if a.sweep { &SWEEP } else { &[1.0] };
    lambdas
        .iter()
        .map(|&l| {
            let w = match &base {
                WeightFn::Const(c) => WeightFn::Const(l * c),
                WeightFn::Table(t) => WeightFn::Table(t.iter().map(|x| l * x).collect()),
            };
            config_with(cli, w)
        })
        .collect()
}

fn verify_dataset(cli: &Cli, a: &VerifyArgs) -> Result<Dataset> {
    match a.synthetic {
        Some(n) => random_dataset(cli.seed, n, 3, 8, 0.4, 2),
        None => load_dataset(cli),
    }
}

fn hypotheses(cli: &Cli, a: &VerifyArgs, dim: usize) -> Result<Vec<GinModel>> {
    if a.hypotheses == 0 {
        return Err(Error::Config("--hypotheses must be >= 1".into()));
    }
    (0..a.hypotheses as u64)
        .map(|i| random_gin(cli.seed.wrapping_add(i), dim, a.hidden, 1, cli.depth, a.eta))
        .collect()
}

fn labels(ds: &Dataset) -> Vec<f64> {
    ds.labels()
        .into_iter()
        .map(|l| l.map_or(0.0, |x| x as f64))
        .collect()
}

const PRESET_CAVEAT: &str = "the bound depends on the weight function; \
no tested preset satisfied it on this input";

fn cmd_verify(ctx: &mut Ctx) -> Result<i32> {
    let a = verify_args(ctx.cli);
    if !(a.eta.is_finite() && a.eta > 0.0) {
        return Err(Error::Config(format!("--eta {} must be positive", a.eta)));
    }
    norm(ctx.cli)?;
    match a.mode {
        VerifyMode::WlCounterexample => verify_wl(ctx, &a),
        VerifyMode::Stability => verify_stability(ctx, &a),
        VerifyMode::ErmGraphs | VerifyMode::ErmNodes => verify_erm(ctx, &a),
    }
}

fn verify_wl(ctx: &mut Ctx, a: &VerifyArgs) -> Result<i32> {
    let (g, h) = feature_scaled_pair(4);
    let ds = Dataset::new("pair", vec![g.clone(), h.clone()])?;
    let wl = wl_pseudometric_matrix(&ds, ctx.cli.depth)?.get(0, 1);
    let model = GinModel::identity(1, ctx.cli.depth, a.eta)?;
    let gap = l2(&gin_forward(&model, &g)?, &gin_forward(&model, &h)?);
    let cfg = config(ctx.cli)?;
    let dist = tmd(&g, &h, &cfg)?;
    let holds = wl == 0.0 && gap > 1e-6;
    let report = json!({
        "wl_distance": wl,
        "gin_gap": gap,
        "tmd": dist,
        "holds": holds,
    });
    emit(ctx, &to_json(&report))?;
    if !holds {
        writeln!(ctx.err, "counterexample check failed: wl={wl} gap={gap}")?;
        return Ok(EXIT_ASSERTION);
    }
    Ok(EXIT_OK)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn random_pairs(ds: &Dataset, count: usize, seed: u64) -> Result<Vec<(Graph, Graph)>> {
    if ds.len() < 2 {
        return Err(Error::Config("stability needs at least two graphs".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let i = rng.random_range(0..ds.len());
            let mut j = rng.random_range(0..ds.len() - 1);
            if j >= i {
                j += 1;
            }
            (ds.graphs()[i].clone(), ds.graphs()[j].clone())
        })
        .collect())
}

fn verify_stability(ctx: &mut Ctx, a: &VerifyArgs) -> Result<i32> {
    let ds = verify_dataset(ctx.cli, a)?;
    let pairs = random_pairs(&ds, a.pairs, ctx.cli.seed)?;
    let model = random_gin(
        ctx.cli.seed,
        ds.feature_dim(),
        a.hidden,
        a.hidden,
        ctx.cli.depth,
        a.eta,
    )?;
    let mut reports = Vec::new();
    for cfg in presets(ctx.cli, a)? {
        reports.push(stability_report(&model, &pairs, &cfg)?);
    }
    let passing: Vec<&str> = reports
        .iter()
        .filter(|r| r.violations == 0)
        .map(|r| r.preset.as_str())
        .collect();
    let summary: Vec<_> = reports
        .iter()
        .map(|r| {
            json!({
                "max_ratio": r.max_ratio,
                "violations": r.violations,
                "pairs": r.pairs,
                "preset": r.preset,
                "infinite": r.infinite,
            })
        })
        .collect();
    let ok = !passing.is_empty();
    let report = json!({"mode": "stability", "reports": summary, "passing_presets": passing});
    emit(ctx, &to_json(&report))?;
    if !ok {
        writeln!(ctx.err, "stability: {PRESET_CAVEAT}")?;
        return Ok(EXIT_PRESET);
    }
    Ok(EXIT_OK)
}

fn verify_erm(ctx: &mut Ctx, a: &VerifyArgs) -> Result<i32> {
    let ds = verify_dataset(ctx.cli, a)?;
    let y = labels(&ds);
    let hs = hypotheses(ctx.cli, a, ds.feature_dim())?;
    let mut reports = Vec::new();
    for cfg in presets(ctx.cli, a)? {
        let r = match a.mode {
            VerifyMode::ErmGraphs => {
                if a.k == 0 || a.k > ds.len() {
                    return Err(Error::Config(format!(
                        "--k {} outside 1..={}",
                        a.k,
                        ds.len()
                    )));
                }
                let m = tmd_matrix(ctx, &ds, &cfg)?;
                let sel = kmedoids(&m, a.k, ctx.cli.seed, 100)?;
                finite_erm_check(
                    &ds,
                    &y,
                    &hs,
                    Subsample::Graphs {
                        selection: &sel,
                        distances: &m,
                    },
                )?
            }
            _ => {
                let subs: Vec<NodeSubsample> =
                    subsample_dataset(&ds, a.frac, &cfg, Heuristics::ALL, ctx.cli.seed)?;
                finite_erm_check(&ds, &y, &hs, Subsample::Nodes(&subs))?
            }
        };
        reports.push((cfg.weights().to_string(), r));
    }
    let chain_ok = reports.iter().all(|(_, r)| r.chain_holds);
    let passing: Vec<&str> = reports
        .iter()
        .filter(|(_, r)| r.satisfied && r.tmd_chain_holds)
        .map(|(p, _)| p.as_str())
        .collect();
    let ok = !passing.is_empty();
    let body: Vec<_> = reports
        .iter()
        .map(|(p, r)| {
            let mut v = serde_json::to_value(r).expect("serializable");
            v["preset"] = json!(p);
            v
        })
        .collect();
    let mode = match a.mode {
        VerifyMode::ErmGraphs => "erm-graphs",
        _ => "erm-nodes",
    };
    let report = json!({"mode": mode, "reports": body, "passing_presets": passing});
    emit(ctx, &to_json(&report))?;
    if !chain_ok {
        writeln!(ctx.err, "{mode}: the Lipschitz loss chain failed")?;
        return Ok(EXIT_ASSERTION);
    }
    if !ok {
        writeln!(ctx.err, "{mode}: {PRESET_CAVEAT}")?;
        return Ok(EXIT_PRESET);
    }
    Ok(EXIT_OK)
}

/// Convenience for reading a cache written by `dist`.
pub fn read_matrix(path: &Path) -> Result<DistanceMatrix> {
    cache::decode(&fs::read(path)?)
}

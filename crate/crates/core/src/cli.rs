//! Command-line front end. The `edgeann` binary is a thin wrapper over [`run`].
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 gate failure under `--strict`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, Gates, Variant};
use crate::bundle::{load_bundle, save_bundle, AnyIndex, SearchParams};
use crate::error::Error;
use crate::flat::FlatIndex;
use crate::io::{
    compute_ground_truth, generate_synthetic, read_fvecs, read_ivecs, read_profile, simulate_at_score,
    simulate_likelihoods, write_fvecs, write_ivecs, write_profile, write_traffic, BetaSimConfig,
    SyntheticConfig, TrafficSample,
};
use crate::lsh::{LshConfig, LshIndex};
use crate::rptree::{ProbeBudget, QlbTree, TreeConfig};
use crate::seed::sub_seed;
use crate::twolevel::{
    build_two_level, recommend_config, BottomKind, PartitionFeature, PartitionFeatures, Recommendation,
    TopKind, TwoLevelConfig,
};
use crate::types::{Catalog, Vector};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_GATE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "edgeann", version, about = "Approximate nearest-neighbor indexes for small devices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic catalog, a likelihood profile, queries and ground truth.
    Generate(GenerateArgs),
    /// Build an index bundle from an fvecs catalog.
    Build(BuildArgs),
    /// Search a bundle and print results as CSV.
    Search(SearchArgs),
    /// Sweep knobs over one or more bundles and write a report.
    Bench(BenchArgs),
    /// Recommend an index layout for a catalog.
    Recommend(RecommendArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: u64,
    #[arg(long, default_value_t = 0.05)]
    pub spread: f32,
    /// Beta alpha of the likelihood simulation; requires --beta-beta.
    #[arg(long, requires = "beta_beta", conflicts_with = "score")]
    pub beta_alpha: Option<f64>,
    #[arg(long, requires = "beta_alpha")]
    pub beta_beta: Option<f64>,
    /// Calibrate the likelihood profile to this unbalance score instead.
    #[arg(long)]
    pub score: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    /// Gaussian noise added to sampled query embeddings.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f32,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    Flat,
    /// Balanced random projection tree.
    Tree,
    /// Likelihood-boosted tree; needs --likelihoods.
    Qlbt,
    Lsh,
    TwoLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopArg {
    Brute,
    Kdtree,
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BottomArg {
    Brute,
    Tree,
    Qlbt,
    Lsh,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Catalog embeddings (fvecs); entity ids are row numbers.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub index: IndexArg,
    /// One likelihood per line, aligned with the catalog.
    #[arg(long)]
    pub likelihoods: Option<PathBuf>,
    /// Partition features (fvecs) for two-level indexes; defaults to the embeddings.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TopArg::Brute)]
    pub top: TopArg,
    #[arg(long, value_enum, default_value_t = BottomArg::Brute)]
    pub bottom: BottomArg,
    #[arg(long)]
    pub subsets: Option<usize>,
    #[arg(long)]
    pub n_probe: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub boost_depth: Option<usize>,
    #[arg(long)]
    pub leaf_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Bundle directory.
    #[arg(long)]
    pub index: PathBuf,
    /// Query vectors (fvecs).
    #[arg(long, conflicts_with = "query", required_unless_present = "query")]
    pub queries: Option<PathBuf>,
    /// One query as comma-separated floats.
    #[arg(long, allow_hyphen_values = true)]
    pub query: Option<String>,
    /// Query partition features (fvecs) for indexes built with --features.
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Leaves a tree search may scan: a count or `all`.
    #[arg(long, default_value = "all", value_parser = parse_budget)]
    pub budget: ProbeBudget,
    #[arg(long)]
    pub n_probe: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub radius: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GatePreset {
    /// 80 ms P90 search time and recall@10 above 0.80.
    OnDevice,
    None,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Catalog the bundles were built from (fvecs); used for ground truth.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Precomputed ground truth (ivecs); computed exactly when absent.
    #[arg(long)]
    pub groundtruth: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Bundle directories; repeat for several variants. `name=dir` sets the label.
    #[arg(long = "variant", required = true)]
    pub variants: Vec<String>,
    /// Knob values (leaf budget, radius or n_probe), comma-separated.
    #[arg(long, default_value = "1,2,4,8,16", value_delimiter = ',')]
    pub knobs: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = GatePreset::OnDevice)]
    pub gates: GatePreset,
    /// Exit with status 4 when no curve point passes the gates.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub size: u64,
    /// Query traffic statistics are available.
    #[arg(long)]
    pub traffic: bool,
    /// Dimension of the partitioning feature; the embedding is assumed when absent.
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub subset_size: Option<usize>,
}

fn parse_budget(s: &str) -> Result<ProbeBudget, String> {
    if s == "all" {
        return Ok(ProbeBudget::unlimited());
    }
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(ProbeBudget::Leaves(n)),
        _ => Err(format!("`{s}` is not a positive leaf count or `all`")),
    }
}

/// A failed command with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

/// Parses `args` (including the program name), runs the command and returns the exit
/// status. Results go to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Build(a) => build(a, out),
        Command::Search(a) => search(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Recommend(a) => recommend(a, out),
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> CliResult {
    let n = a.n as usize;
    let synth = SyntheticConfig::new(n, a.dim as usize, a.clusters as usize, sub_seed(a.seed, "dataset"))
        .with_spread(a.spread);
    let (catalog, _, _) = generate_synthetic(&synth)?;
    let lik_seed = sub_seed(a.seed, "likelihoods");
    let sim = match (a.beta_alpha, a.beta_beta, a.score) {
        (Some(alpha), Some(beta), _) => simulate_likelihoods(&BetaSimConfig {
            alpha,
            beta,
            num_entities: n,
            num_queries: a.queries,
            seed: lik_seed,
        })?,
        (_, _, Some(score)) => simulate_at_score(score, 0.02, n, a.queries, lik_seed)?.1,
        _ => simulate_likelihoods(&BetaSimConfig {
            alpha: 1.0,
            beta: 1.0,
            num_entities: n,
            num_queries: a.queries,
            seed: lik_seed,
        })?,
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let entities = a.out.join("entities.fvecs");
    write_fvecs(&catalog, &entities)?;
    write_profile(&sim.profile, a.out.join("likelihoods.txt"))?;
    write_traffic(&sim.query_indices, a.out.join("traffic.txt"))?;
    if !sim.query_indices.is_empty() {
        let traffic = TrafficSample::from_indices(&catalog, &sim.query_indices, a.noise, sub_seed(a.seed, "queries"))?
            .with_ground_truth(&catalog, a.k.min(n).max(1))?;
        let rows: Vec<Vec<f32>> = traffic.query_vectors.iter().map(|v| v.as_slice().to_vec()).collect();
        write_fvecs(&Catalog::from_rows(rows)?, a.out.join("queries.fvecs"))?;
        write_ivecs(traffic.ground_truth_ids.as_deref().unwrap_or(&[]), a.out.join("groundtruth.ivecs"))?;
    }
    writeln!(out, "entities: {n} x {}", a.dim)?;
    writeln!(out, "queries: {}", sim.query_indices.len())?;
    writeln!(out, "unbalance_score: {:.6}", sim.profile.unbalance_score()?)?;
    writeln!(out, "written: {}", a.out.display())?;
    Ok(())
}

fn tree_config(a: &BuildArgs, boosted: bool, seed: u64) -> TreeConfig {
    let mut cfg = if boosted {
        TreeConfig::boosted(seed)
    } else {
        TreeConfig::balanced(seed)
    };
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(d) = a.boost_depth {
        cfg.boost_depth = d;
    }
    if let Some(s) = a.leaf_size {
        cfg.max_leaf_size = s;
    }
    cfg
}

fn load_catalog(data: &Path, likelihoods: Option<&Path>) -> std::result::Result<Catalog, CliError> {
    let catalog = read_fvecs(data)?;
    if catalog.is_empty() {
        return Err(CliError {
            code: EXIT_DATA,
            message: format!("{} holds no vectors", data.display()),
        });
    }
    match likelihoods {
        Some(p) => Ok(catalog.with_likelihoods(read_profile(p)?.probabilities())?),
        None => Ok(catalog),
    }
}

fn read_features(path: &Path) -> std::result::Result<Vec<Vector>, CliError> {
    Ok(read_fvecs(path)?.records().iter().map(|r| r.embedding.clone()).collect())
}

fn build(a: BuildArgs, out: &mut dyn Write) -> CliResult {
    let needs_likelihoods = a.index == IndexArg::Qlbt || (a.index == IndexArg::TwoLevel && a.bottom == BottomArg::Qlbt);
    if needs_likelihoods && a.likelihoods.is_none() {
        return Err(CliError::usage(
            "a likelihood-boosted tree needs --likelihoods FILE (one probability per entity, as written by `generate`)",
        ));
    }
    let catalog = load_catalog(&a.data, a.likelihoods.as_deref())?;
    let profile = match &a.likelihoods {
        Some(p) => Some(read_profile(p)?),
        None => None,
    };
    let index = match a.index {
        IndexArg::Flat => AnyIndex::Flat(FlatIndex::build(&catalog)?),
        IndexArg::Tree | IndexArg::Qlbt => {
            let boosted = a.index == IndexArg::Qlbt;
            let cfg = tree_config(&a, boosted, sub_seed(a.seed, "tree"));
            AnyIndex::Tree(QlbTree::build(&catalog, profile.as_ref().filter(|_| boosted), &cfg)?)
        }
        IndexArg::Lsh => AnyIndex::Lsh(LshIndex::build(&catalog, &LshConfig::with_seed(sub_seed(a.seed, "lsh")))?),
        IndexArg::TwoLevel => {
            let subsets = a
                .subsets
                .unwrap_or_else(|| ((catalog.len() as f64 / 100.0).round() as usize).clamp(1, catalog.len()));
            let mut cfg = TwoLevelConfig::new(subsets, a.seed);
            cfg.top = match a.top {
                TopArg::Brute => TopKind::Brute,
                TopArg::Kdtree => TopKind::KdTree,
                TopArg::Pq => TopKind::Pq,
            };
            cfg.bottom = match a.bottom {
                BottomArg::Brute => BottomKind::Brute,
                BottomArg::Tree | BottomArg::Qlbt => BottomKind::Tree,
                BottomArg::Lsh => BottomKind::Lsh,
            };
            cfg.tree = tree_config(&a, a.bottom == BottomArg::Qlbt, cfg.tree.seed);
            if let Some(n) = a.n_probe {
                cfg.n_probe = n;
            }
            let features = match &a.features {
                Some(p) => {
                    cfg.partition_feature = PartitionFeature::External;
                    Some(PartitionFeatures::new(read_features(p)?)?)
                }
                None => None,
            };
            let idx = build_two_level(&catalog, features.as_ref(), profile.as_ref(), &cfg)?;
            for w in &idx.build_report().warnings {
                eprintln!("warning: {w}");
            }
            AnyIndex::TwoLevel(idx)
        }
    };
    let manifest = save_bundle(&a.out, &index)?;
    writeln!(out, "kind: {:?}", manifest.kind)?;
    writeln!(out, "entities: {}", manifest.entities)?;
    for c in &manifest.components {
        writeln!(out, "component {}: {} bytes crc32 {:08x}", c.name, c.bytes, c.crc32)?;
    }
    writeln!(out, "config: {}", manifest.config)?;
    Ok(())
}

/// Header of the `search` output.
pub const SEARCH_HEADER: &str =
    "query,rank,id,distance,distance_computations,nodes_visited,leaves_probed,projections";

/// One row of `search` output.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchRow {
    pub query: usize,
    pub rank: usize,
    pub id: u32,
    pub distance: f64,
    pub distance_computations: u64,
    pub nodes_visited: u64,
    pub leaves_probed: u64,
    pub projections: u64,
}

/// Parses the CSV printed by `search`.
pub fn parse_search_output(text: &str) -> crate::Result<Vec<SearchRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SEARCH_HEADER) {
        return Err(Error::Format("missing search header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || Error::Format(format!("malformed search row: {line}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad());
            Ok(SearchRow {
                query: int(f[0])? as usize,
                rank: int(f[1])? as usize,
                id: int(f[2])? as u32,
                distance: f[3].parse().map_err(|_| bad())?,
                distance_computations: int(f[4])?,
                nodes_visited: int(f[5])?,
                leaves_probed: int(f[6])?,
                projections: int(f[7])?,
            })
        })
        .collect()
}

fn search(a: SearchArgs, out: &mut dyn Write) -> CliResult {
    let index = load_bundle(&a.index)?;
    let queries: Vec<Vector> = match (&a.queries, &a.query) {
        (Some(p), _) => read_features(p)?,
        (None, Some(q)) => {
            let values = q
                .split(',')
                .map(|s| s.trim().parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| CliError::usage(format!("--query: {e}")))?;
            vec![Vector::new(values)?]
        }
        (None, None) => return Err(CliError::usage("give --queries or --query")),
    };
    let features = match &a.features {
        Some(p) => {
            let f = read_features(p)?;
            if f.len() != queries.len() {
                return Err(CliError {
                    code: EXIT_DATA,
                    message: format!("{} features for {} queries", f.len(), queries.len()),
                });
            }
            Some(f)
        }
        None => None,
    };
    let params = SearchParams {
        k: a.k,
        budget: a.budget,
        radius: a.radius,
        n_probe: a.n_probe,
    };
    writeln!(out, "{SEARCH_HEADER}")?;
    for (qi, q) in queries.iter().enumerate() {
        let f = features.as_ref().map(|f| f[qi].as_slice());
        let (res, s) = index.search(q, f, &params)?;
        for (rank, n) in res.neighbors().iter().enumerate() {
            writeln!(
                out,
                "{qi},{rank},{},{:.9},{},{},{},{}",
                n.id, n.distance, s.distance_computations, s.nodes_visited, s.leaves_probed, s.projections
            )?;
        }
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> CliResult {
    let catalog = load_catalog(&a.data, None)?;
    let queries = read_features(&a.queries)?;
    let truth = match &a.groundtruth {
        Some(p) => read_ivecs(p)?,
        None => compute_ground_truth(&catalog, &queries, a.k)?,
    };
    if truth.len() != queries.len() {
        return Err(CliError {
            code: EXIT_DATA,
            message: format!("{} ground-truth rows for {} queries", truth.len(), queries.len()),
        });
    }
    let features = match &a.features {
        Some(p) => Some(read_features(p)?),
        None => None,
    };
    let mut loaded = Vec::new();
    for spec in &a.variants {
        let (name, dir) = match spec.split_once('=') {
            Some((n, d)) => (n.to_string(), PathBuf::from(d)),
            None => (spec.clone(), PathBuf::from(spec)),
        };
        loaded.push((name, load_bundle(&dir)?));
    }
    let variants: Vec<Variant<'_>> = loaded
        .iter()
        .map(|(name, idx)| {
            let knobs = if matches!(idx, AnyIndex::Flat(_)) { vec![1] } else { a.knobs.clone() };
            Variant::new(name.clone(), idx as &dyn bench::KnobSearch, knobs)
        })
        .collect();
    let points = bench::run_sweep(&variants, &queries, features.as_deref(), &truth, a.k, a.seed)?;
    let gates = match a.gates {
        GatePreset::OnDevice => Gates::on_device(),
        GatePreset::None => Gates {
            max_p90_wall_ms: f64::INFINITY,
            min_recall: f64::NEG_INFINITY,
        },
    };
    let summary = bench::write_report(&a.out, &points, gates)?;
    out.write_all(bench::report_csv(&points).as_bytes())?;
    writeln!(out, "gates passed by any point: {}", summary.any_pass)?;
    if a.strict && !summary.any_pass {
        return Err(CliError {
            code: EXIT_GATE,
            message: "no curve point meets the gates".into(),
        });
    }
    Ok(())
}

fn recommend(a: RecommendArgs, out: &mut dyn Write) -> CliResult {
    let r = recommend_config(a.size as usize, a.traffic, a.feature_dim, a.subset_size);
    match &r {
        Recommendation::OneLevel { mode } => {
            writeln!(out, "one-level tree ({mode:?})")?;
        }
        Recommendation::TwoLevel(cfg) => {
            writeln!(
                out,
                "two-level: top {:?}, bottom {:?}, {} subsets",
                cfg.top, cfg.bottom, cfg.num_subsets
            )?;
        }
    }
    let json = serde_json::to_string(&r).map_err(|e| CliError::usage(e.to_string()))?;
    writeln!(out, "{json}")?;
    Ok(())
}

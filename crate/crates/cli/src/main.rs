//! Command-line front end binding the model-fitting library into
//! reproducible workflows.
//!
//! Subcommands: `fit` (chain run plus agreement/consensus/position
//! summaries), `select-k` (criteria sweep over candidate latent
//! dimensions), `summarize` (re-derive summaries from stored chains),
//! `ppc` (posterior predictive checks), `simulate` (synthetic CSS data),
//! `geweke` (joint-distribution sampler test), and `consensus-threshold`
//! (δ₀-thresholded consensus network).
//!
//! Every run writes a `manifest.json` into the output directory before any
//! other artifact and finalizes it afterwards; the manifest records the
//! subcommand, the fully resolved configuration, SHA-256 digests of every
//! input file, the master seed, the software version, and wall-clock
//! timing.  Reruns with an equal manifest produce byte-identical outputs:
//! all randomness descends from `--seed` and per-artifact timing is kept
//! out of the data files.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures; in
//! both failure cases a machine-readable JSON object
//! `{"error":{"kind":...,"message":...}}` is the last line on stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cognet::css_data::{
    build_dyadic_covariates, load_attributes, load_css, threshold_consensus, AttributeColumn,
    CovariateTerm, CssFormat, CssTensor, DyadCovariates,
};
use cognet::model::elicit_hyperparameters;
use cognet::model_selection::k_sweep;
use cognet::postprocess::{
    agreement_probabilities, align_chains, consensus_probabilities, position_summaries,
    write_agreement_csv, write_consensus_csv, write_positions_csv,
};
use cognet::ppc::ppc_run;
use cognet::sampler::{
    chain_rng, run_chain_checkpointed, run_chains, ChainConfig, ChainOutput, CheckpointSpec,
    InitMode,
};
use cognet::synth::{geweke_harness, simulate_css, true_consensus, SynthScenario};
use serde::Serialize;

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn emit(&self) {
        let (kind, message) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Runtime(m) => ("runtime", m),
        };
        let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
        eprintln!("{body}");
    }
}

impl From<cognet::Error> for CliError {
    fn from(e: cognet::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            CliError::Usage(e.to_string()).emit();
            std::process::exit(2);
        }
    };
    if let Err(e) = dispatch(cli) {
        e.emit();
        std::process::exit(e.exit_code());
    }
}

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "cognet", version, about = "Cognitive social structure model fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write chains plus posterior summaries.
    Fit(FitArgs),
    /// Fit a sweep of latent dimensions and write criteria.csv.
    SelectK(SelectKArgs),
    /// Re-derive agreement/consensus/position summaries from stored chains.
    Summarize(SummarizeArgs),
    /// Posterior predictive checks against stored chains.
    Ppc(PpcArgs),
    /// Simulate a synthetic CSS tensor from a named scenario.
    Simulate(SimulateArgs),
    /// Joint-distribution test of the sampler; writes geweke.csv.
    Geweke(GewekeArgs),
    /// Threshold the perceiver-averaged network at δ₀.
    ConsensusThreshold(ThresholdArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum FormatArg {
    /// Infer from the file extension (.csv, .json, else matrix stack).
    Auto,
    LongCsv,
    MatrixStack,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum InitArg {
    DataInformed,
    PriorDraw,
}

impl From<InitArg> for InitMode {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::DataInformed => InitMode::DataInformed,
            InitArg::PriorDraw => InitMode::PriorDraw,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// CSS tensor file.
    #[arg(long)]
    data: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
    /// Actor attribute CSV (`actor,<field>...`) for dyadic covariates.
    #[arg(long)]
    covariates: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    /// Number of parallel chains.
    #[arg(long, default_value_t = 2)]
    chains: usize,
    /// Total sweeps per chain.
    #[arg(long, default_value_t = 4000)]
    iters: usize,
    /// Burn-in sweeps discarded from the front.
    #[arg(long, default_value_t = 1500)]
    burnin: usize,
    /// Keep every thin-th sweep after burn-in.
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Master seed; fully determines all stochastic outputs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Latent dimension K.
    #[arg(long, default_value = "2")]
    k: String,
    #[command(flatten)]
    chain: ChainArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// TOML file whose keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SelectKArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Candidate dimensions: a single K or an inclusive range `a..b`.
    #[arg(long, default_value = "1..4")]
    k: String,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory containing chain*.jsonl from a previous fit.
    #[arg(long)]
    chains_dir: PathBuf,
    /// Attribute CSV; when given, the consensus network is evaluated at the
    /// baseline covariate profile of the fitted recipe.
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PpcArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Directory containing chain*.jsonl from a previous fit.
    #[arg(long)]
    chains_dir: PathBuf,
    /// Number of posterior predictive replicates.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum ScenarioArg {
    PriorDraw,
    ZeroSignal,
    StrongSignal,
}

#[derive(Args)]
struct SimulateArgs {
    /// Named scenario.
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Number of actors I.
    #[arg(long, default_value_t = 20)]
    actors: usize,
    /// Latent dimension (prior-draw scenario only; the others fix it).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Comma-separated spike-roster actors, 0-based (strong-signal only).
    #[arg(long, default_value = "")]
    spike: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Format for the written tensor.
    #[arg(long, value_enum, default_value = "matrix-stack")]
    format: FormatArg,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GewekeArgs {
    #[arg(long, default_value_t = 5)]
    actors: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Outer iterations per side of the joint-distribution test.
    #[arg(long, default_value_t = 20000)]
    outer: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Consensus threshold δ₀ in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    delta0: f64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Config file and flag resolution
// ---------------------------------------------------------------------------

/// Keys accepted in the optional TOML config; any present key overrides the
/// corresponding flag.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<String>,
    chains: Option<usize>,
    iters: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    init: Option<String>,
    /// Write chain checkpoints every this many sweeps.
    checkpoint_every: Option<usize>,
    /// Dyadic covariate recipe; default is one term per attribute field
    /// (same-category for categorical fields, abs-difference for numeric).
    covariate: Option<Vec<CovariateSpec>>,
}

#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CovariateSpec {
    kind: String,
    field: String,
}

fn read_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

/// Fully resolved chain settings: defaults < flags < config file.
#[derive(Debug, Clone, Serialize)]
struct ResolvedRun {
    k: Vec<usize>,
    chains: usize,
    iters: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    init: String,
    checkpoint_every: Option<usize>,
}

fn resolve_run(k_flag: &str, chain: &ChainArgs, file: &FileConfig) -> CliResult<ResolvedRun> {
    let k_text = file.k.as_deref().unwrap_or(k_flag);
    let init = match file.init.as_deref() {
        None | Some("data-informed") => "data-informed",
        Some("prior-draw") => "prior-draw",
        Some(other) => {
            return Err(CliError::Usage(format!(
                "init must be data-informed or prior-draw, got {other}"
            )))
        }
    };
    let run = ResolvedRun {
        k: parse_k_range(k_text)?,
        chains: file.chains.unwrap_or(chain.chains),
        iters: file.iters.unwrap_or(chain.iters),
        burnin: file.burnin.unwrap_or(chain.burnin),
        thin: file.thin.unwrap_or(chain.thin),
        seed: file.seed.unwrap_or(chain.seed),
        init: init.to_string(),
        checkpoint_every: file.checkpoint_every,
    };
    Ok(run)
}

impl ResolvedRun {
    fn chain_config(&self, k: usize) -> ChainConfig {
        ChainConfig {
            n_iterations: self.iters,
            burn_in: self.burnin,
            thin: self.thin,
            n_chains: self.chains,
            rng_seed: self.seed,
            k,
            init: if self.init == "prior-draw" {
                InitMode::PriorDraw
            } else {
                InitMode::DataInformed
            },
        }
    }
}

/// `a..b` (inclusive) or a single integer.
fn parse_k_range(text: &str) -> CliResult<Vec<usize>> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("invalid K value: {s:?}")))
    };
    let ks = match text.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse_one(a)?, parse_one(b)?);
            if a > b {
                return Err(CliError::Usage(format!("empty K range: {a}..{b}")));
            }
            (a..=b).collect()
        }
        None => vec![parse_one(text)?],
    };
    if ks[0] == 0 {
        return Err(CliError::Usage("K must be ≥ 1".into()));
    }
    Ok(ks)
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

fn pick_format(arg: FormatArg, path: &Path) -> CssFormat {
    match arg {
        FormatArg::LongCsv => CssFormat::LongCsv,
        FormatArg::MatrixStack => CssFormat::MatrixStack,
        FormatArg::Json => CssFormat::Json,
        FormatArg::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => CssFormat::LongCsv,
            Some("json") => CssFormat::Json,
            _ => CssFormat::MatrixStack,
        },
    }
}

fn format_extension(format: CssFormat) -> &'static str {
    match format {
        CssFormat::LongCsv => "csv",
        CssFormat::MatrixStack => "txt",
        CssFormat::Json => "json",
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_tensor(args: &DataArgs) -> CliResult<CssTensor> {
    let format = pick_format(args.format, &args.data);
    Ok(load_css(open(&args.data)?, format)?)
}

/// Covariates from the attribute table: the configured recipe, or one term
/// per field (same-category for categorical, abs-difference for numeric).
fn load_covariates(
    path: Option<&Path>,
    spec: Option<&[CovariateSpec]>,
    n_actors: usize,
) -> CliResult<DyadCovariates> {
    let Some(path) = path else {
        return Ok(DyadCovariates::intercept_only(n_actors)?);
    };
    let attrs = load_attributes(open(path)?)?;
    let recipe: Vec<CovariateTerm> = match spec {
        Some(spec) => spec
            .iter()
            .map(|s| match s.kind.as_str() {
                "same-category" => Ok(CovariateTerm::SameCategory(s.field.clone())),
                "abs-difference" => Ok(CovariateTerm::AbsDifference(s.field.clone())),
                other => Err(CliError::Usage(format!(
                    "covariate kind must be same-category or abs-difference, got {other}"
                ))),
            })
            .collect::<CliResult<_>>()?,
        None => attrs
            .field_names()
            .iter()
            .map(|name| {
                Ok(match attrs.column(name)? {
                    AttributeColumn::Categorical(_) => CovariateTerm::SameCategory(name.clone()),
                    AttributeColumn::Numeric(_) => CovariateTerm::AbsDifference(name.clone()),
                })
            })
            .collect::<Result<_, cognet::Error>>()?,
    };
    Ok(build_dyadic_covariates(&attrs, &recipe)?)
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    status: &'static str,
    config: serde_json::Value,
    input_digests: BTreeMap<String, String>,
    seed: u64,
    software_version: &'static str,
    timing: Option<Timing>,
}

#[derive(Serialize)]
struct Timing {
    seconds: f64,
}

fn sha256_hex(path: &Path) -> CliResult<String> {
    use sha2::Digest;
    let mut hasher = sha2::Sha256::new();
    let mut file = File::open(path).map_err(|e| {
        CliError::Runtime(format!("{}: {e}", path.display()))
    })?;
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

struct ManifestWriter {
    path: PathBuf,
    manifest: RunManifest,
    start: std::time::Instant,
}

impl ManifestWriter {
    /// Writes the `running` manifest before any other artifact.
    fn begin(
        out_dir: &Path,
        subcommand: &'static str,
        config: serde_json::Value,
        inputs: &[&Path],
        seed: u64,
    ) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir)?;
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            input_digests.insert(path.display().to_string(), sha256_hex(path)?);
        }
        let w = ManifestWriter {
            path: out_dir.join("manifest.json"),
            manifest: RunManifest {
                subcommand,
                status: "running",
                config,
                input_digests,
                seed,
                software_version: env!("CARGO_PKG_VERSION"),
                timing: None,
            },
            start: std::time::Instant::now(),
        };
        w.write()?;
        Ok(w)
    }

    fn write(&self) -> CliResult<()> {
        let mut file = BufWriter::new(File::create(&self.path)?);
        serde_json::to_writer_pretty(&mut file, &self.manifest)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        file.write_all(b"\n")?;
        Ok(())
    }

    fn finalize(mut self) -> CliResult<()> {
        self.manifest.status = "complete";
        self.manifest.timing = Some(Timing { seconds: self.start.elapsed().as_secs_f64() });
        self.write()
    }
}

fn create_out(out_dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out_dir.join(name))?))
}

// ---------------------------------------------------------------------------
// Chain persistence
// ---------------------------------------------------------------------------

/// Chains are stored with zeroed wall-clock so reruns with an equal manifest
/// are byte-identical; timing lives in the manifest.
fn write_chain_files(out_dir: &Path, chains: &[ChainOutput]) -> CliResult<()> {
    for chain in chains {
        let mut stored = chain.clone();
        stored.seconds = 0.0;
        let mut file = create_out(out_dir, &format!("chain{}.jsonl", chain.chain_index))?;
        stored.write_jsonl(&mut file)?;
    }
    Ok(())
}

fn read_chain_files(dir: &Path) -> CliResult<Vec<ChainOutput>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("chain") && n.ends_with(".jsonl"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Runtime(format!(
            "no chain*.jsonl files in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| Ok(ChainOutput::read_jsonl(open(p)?)?))
        .collect()
}

fn write_summaries(
    out_dir: &Path,
    chains: &[ChainOutput],
    x_baseline: Option<&[f64]>,
) -> CliResult<()> {
    let agreement = agreement_probabilities(chains)?;
    write_agreement_csv(&agreement, &mut create_out(out_dir, "agreement.csv")?)?;
    let n_actors = chains[0].samples[0].n_actors;
    let consensus = consensus_probabilities(chains, x_baseline)?;
    write_consensus_csv(&consensus, n_actors, &mut create_out(out_dir, "consensus.csv")?)?;
    let aligned = align_chains(chains)?;
    let positions = position_summaries(&aligned);
    write_positions_csv(&positions, &mut create_out(out_dir, "positions.csv")?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::SelectK(args) => cmd_select_k(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Ppc(args) => cmd_ppc(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Geweke(args) => cmd_geweke(args),
        Command::ConsensusThreshold(args) => cmd_threshold(args),
    }
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let file = read_config(args.config.as_deref())?;
    let run = resolve_run(&args.k, &args.chain, &file)?;
    if run.k.len() != 1 {
        return Err(CliError::Usage(
            "fit takes a single K; use select-k for a range".into(),
        ));
    }
    let y = load_tensor(&args.data)?;
    let x = load_covariates(args.data.covariates.as_deref(), file.covariate.as_deref(), y.n_actors())?;

    let mut inputs = vec![args.data.data.as_path()];
    inputs.extend(args.data.covariates.as_deref());
    inputs.extend(args.config.as_deref());
    let manifest = ManifestWriter::begin(
        &args.out_dir,
        "fit",
        serde_json::to_value(&run).map_err(|e| CliError::Runtime(e.to_string()))?,
        &inputs,
        run.seed,
    )?;

    let hyper = elicit_hyperparameters(run.k[0], x.p())?;
    let config = run.chain_config(run.k[0]);
    let chains = match run.checkpoint_every {
        Some(every) => {
            let spec = CheckpointSpec { dir: args.out_dir.join("checkpoints"), every };
            std::fs::create_dir_all(&spec.dir)?;
            let mut out = Vec::with_capacity(config.n_chains);
            for index in 0..config.n_chains {
                out.push(run_chain_checkpointed(&y, &x, &hyper, &config, index, Some(&spec))?);
            }
            out
        }
        None => run_chains(&y, &x, &hyper, &config)?,
    };

    write_chain_files(&args.out_dir, &chains)?;
    let baseline = x.baseline();
    let x_baseline = args.data.covariates.is_some().then_some(baseline.as_slice());
    write_summaries(&args.out_dir, &chains, x_baseline)?;
    manifest.finalize()
}

fn cmd_select_k(args: SelectKArgs) -> CliResult<()> {
    let file = read_config(args.config.as_deref())?;
    let run = resolve_run(&args.k, &args.chain, &file)?;
    let y = load_tensor(&args.data)?;
    let x = load_covariates(args.data.covariates.as_deref(), file.covariate.as_deref(), y.n_actors())?;

    let mut inputs = vec![args.data.data.as_path()];
    inputs.extend(args.data.covariates.as_deref());
    inputs.extend(args.config.as_deref());
    let manifest = ManifestWriter::begin(
        &args.out_dir,
        "select-k",
        serde_json::to_value(&run).map_err(|e| CliError::Runtime(e.to_string()))?,
        &inputs,
        run.seed,
    )?;

    let base = run.chain_config(run.k[0]);
    let report = k_sweep(&y, &x, &run.k, &base)?;
    report.write_csv(&mut create_out(&args.out_dir, "criteria.csv")?)?;
    manifest.finalize()
}

fn cmd_summarize(args: SummarizeArgs) -> CliResult<()> {
    let chains = read_chain_files(&args.chains_dir)?;
    let config = serde_json::json!({
        "chains_dir": args.chains_dir.display().to_string(),
        "n_chains": chains.len(),
        "k": chains[0].config.k,
    });
    let inputs: Vec<&Path> = args.covariates.as_deref().into_iter().collect();
    let manifest = ManifestWriter::begin(
        &args.out_dir,
        "summarize",
        config,
        &inputs,
        chains[0].config.rng_seed,
    )?;
    let n_actors = chains[0].samples[0].n_actors;
    let baseline = match args.covariates.as_deref() {
        Some(path) => Some(load_covariates(Some(path), None, n_actors)?.baseline()),
        None => None,
    };
    write_summaries(&args.out_dir, &chains, baseline.as_deref())?;
    manifest.finalize()
}

fn cmd_ppc(args: PpcArgs) -> CliResult<()> {
    let y = load_tensor(&args.data)?;
    let chains = read_chain_files(&args.chains_dir)?;
    let x = load_covariates(args.data.covariates.as_deref(), None, y.n_actors())?;

    let mut inputs = vec![args.data.data.as_path()];
    inputs.extend(args.data.covariates.as_deref());
    let config = serde_json::json!({
        "chains_dir": args.chains_dir.display().to_string(),
        "reps": args.reps,
        "seed": args.seed,
    });
    let manifest = ManifestWriter::begin(&args.out_dir, "ppc", config, &inputs, args.seed)?;

    // Pool the stored chains into one evenly-indexed sample list.
    let mut pooled = chains[0].clone();
    for chain in &chains[1..] {
        pooled.samples.extend(chain.samples.iter().cloned());
        pooled.loglik_trace.extend(chain.loglik_trace.iter().cloned());
        pooled.logjoint_trace.extend(chain.logjoint_trace.iter().cloned());
    }
    let report = ppc_run(&pooled, &y, &x, args.reps, &mut chain_rng(args.seed, 0))?;
    report.write_replicates_csv(&mut create_out(&args.out_dir, "ppc.csv")?)?;
    report.write_observed_csv(&mut create_out(&args.out_dir, "ppc_observed.csv")?)?;
    report.write_pvalues_csv(&mut create_out(&args.out_dir, "ppc_pvalues.csv")?)?;
    manifest.finalize()
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let spike = parse_spike_list(&args.spike)?;
    let scenario = match args.scenario {
        ScenarioArg::PriorDraw => SynthScenario::prior_draw(args.actors, args.k, 1),
        ScenarioArg::ZeroSignal => SynthScenario::zero_signal(args.actors),
        ScenarioArg::StrongSignal => SynthScenario::strong_signal(args.actors, &spike),
    };
    if args.scenario != ScenarioArg::StrongSignal && !spike.is_empty() {
        return Err(CliError::Usage(
            "--spike only applies to the strong-signal scenario".into(),
        ));
    }
    let config = serde_json::json!({
        "scenario": format!("{:?}", args.scenario),
        "actors": args.actors,
        "k": scenario.k,
        "spike": spike,
        "seed": args.seed,
    });
    let manifest = ManifestWriter::begin(&args.out_dir, "simulate", config, &[], args.seed)?;

    let hyper = elicit_hyperparameters(scenario.k, scenario.p)?;
    let (y, truth) = simulate_css(&scenario, &hyper, &mut chain_rng(args.seed, 0))?;
    let format = match args.format {
        FormatArg::Auto => CssFormat::MatrixStack,
        other => pick_format(other, Path::new("")),
    };
    y.write(format, &mut create_out(&args.out_dir, &format!("css.{}", format_extension(format)))?)?;
    truth.write_text(&mut create_out(&args.out_dir, "truth.state")?)?;
    write_consensus_csv(
        &true_consensus(&truth),
        args.actors,
        &mut create_out(&args.out_dir, "truth_consensus.csv")?,
    )?;
    manifest.finalize()
}

fn parse_spike_list(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("invalid spike actor: {s:?}")))
        })
        .collect()
}

fn cmd_geweke(args: GewekeArgs) -> CliResult<()> {
    let config = serde_json::json!({
        "actors": args.actors,
        "k": args.k,
        "outer": args.outer,
        "seed": args.seed,
    });
    let manifest = ManifestWriter::begin(&args.out_dir, "geweke", config, &[], args.seed)?;
    let hyper = elicit_hyperparameters(args.k, 1)?;
    let report = geweke_harness(args.actors, args.k, &hyper, args.outer, &mut chain_rng(args.seed, 0))?;
    report.write_csv(&mut create_out(&args.out_dir, "geweke.csv")?)?;
    manifest.finalize()
}

fn cmd_threshold(args: ThresholdArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.delta0) {
        return Err(CliError::Usage(format!(
            "delta0 must lie in [0, 1], got {}",
            args.delta0
        )));
    }
    let y = load_tensor(&args.data)?;
    let config = serde_json::json!({ "delta0": args.delta0 });
    let manifest = ManifestWriter::begin(
        &args.out_dir,
        "consensus-threshold",
        config,
        &[args.data.data.as_path()],
        0,
    )?;
    let network = threshold_consensus(&y, args.delta0)?;
    network.write_matrix(&mut create_out(&args.out_dir, "consensus_network.txt")?)?;
    manifest.finalize()
}

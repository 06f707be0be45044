use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shapley_select::bench::bench_csv;
use shapley_select::{
    ads_enhanced, brute_force_shapley, extrapolate_values, generate_scenario, knn_shapley_exact, load_dataset,
    run_bench, run_comparison, save_dataset, tmc_shapley, write_atomic, AggregatedValues, Aggregation, BenchConfig,
    Error, Metric, PreselectSpec, ProbeConfig, RegressionConfig, Result, ScenarioKind, ScenarioSpec, Selector,
    SplitSizes, TmcConfig, UtilitySpec, ValuationResult,
};

mod run_config;

use run_config::RunConfig;

#[derive(Parser)]
#[command(name = "shapley-select", version, about = "Shapley-value filtered batch active learning")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "SHAPLEY_SELECT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Shapley values of the labeled split against the validation split.
    Value(ValueArgs),
    /// Pick one batch from the unlabeled split.
    Select(SelectArgs),
    /// Run active-learning experiments described by a TOML file.
    Loop(LoopArgs),
    /// Time bare and value-filtered selection on synthetic pools.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum DatasetCommand {
    Gen(GenArgs),
    Validate { manifest: PathBuf },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// labeled,unlabeled,validation,test
    #[arg(long)]
    sizes: SplitSizes,
    /// TOML file with scenario parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    num_classes: Option<u32>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "dataset")]
    name: String,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ValueMethod {
    KnnExact,
    Tmc,
    BruteForce,
}

#[derive(Args)]
struct ValueArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "knn-exact")]
    method: ValueMethod,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    #[arg(long, default_value_t = 0.0)]
    empty_value: f64,
    #[arg(long, default_value_t = 1000)]
    permutations: usize,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also regress the values onto the unlabeled split and write those
    /// instead.
    #[arg(long)]
    extrapolate: bool,
    #[arg(long, default_value = "max")]
    aggregation: Aggregation,
    #[arg(long, default_value_t = 10)]
    regress_k: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum SelectMethod {
    Coreset,
    KMedians,
    Badge,
    Entropy,
    Random,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Values of the unlabeled points, as written by `value --extrapolate`.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: SelectMethod,
    #[arg(long)]
    batch: usize,
    /// Pre-select the top-valued share of the pool first.
    #[arg(long)]
    ads: bool,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long)]
    floor: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report every stage time as zero so the output is reproducible.
    #[arg(long)]
    no_timings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LoopArgs {
    config: PathBuf,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated pool sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [10_000usize, 100_000])]
    pool_sizes: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    dims: usize,
    #[arg(long, default_value_t = 1000)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SelectMethod::Coreset])]
    selectors: Vec<SelectMethod>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_) | Error::Precondition(_) | Error::Io { .. } => 2,
        Error::Format(_) => 3,
        Error::Capacity(_) => 4,
        Error::Numeric(_) => 5,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn selector(method: SelectMethod, seed: u64) -> Selector {
    match method {
        SelectMethod::Coreset => Selector::Coreset,
        SelectMethod::KMedians => Selector::KMedians { iters: 10, seed },
        SelectMethod::Badge => Selector::Badge { probe: ProbeConfig { seed, ..Default::default() } },
        SelectMethod::Entropy => Selector::Entropy { k: 5 },
        SelectMethod::Random => Selector::Random { seed },
    }
}

fn dataset_gen(args: GenArgs) -> Result<()> {
    let mut spec = ScenarioSpec::new(args.scenario, args.seed);
    if let Some(path) = &args.params {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        spec.params = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    if let Some(d) = args.dims {
        spec.params.dims = d;
    }
    if args.num_classes.is_some() {
        spec.params.num_classes = args.num_classes;
    }
    let g = generate_scenario(&spec, args.sizes)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Error::Validation(format!("{}: {e}", args.out_dir.display())))?;
    let manifest = save_dataset(&g.dataset, &g.splits, &args.out_dir, &args.name)?;
    println!("{}", manifest.display());
    Ok(())
}

fn dataset_validate(manifest: &Path) -> Result<()> {
    let (ds, splits) = load_dataset(manifest)?;
    println!(
        "{} points, {} dims, {} classes; labeled {}, unlabeled {}, validation {}, test {}",
        ds.len(),
        ds.dims(),
        ds.num_classes(),
        splits.labeled.len(),
        splits.unlabeled.len(),
        splits.validation.len(),
        splits.test.len()
    );
    Ok(())
}

fn value(args: ValueArgs) -> Result<()> {
    let (ds, splits) = load_dataset(&args.dataset)?;
    let labeled = ds.labeled(&splits.labeled)?;
    let validation = ds.labeled(&splits.validation)?;
    let spec = UtilitySpec { k: args.k, metric: args.metric, empty_set_value: args.empty_value };
    let mut values = match args.method {
        ValueMethod::KnnExact => knn_shapley_exact(&labeled, &validation, &spec)?,
        ValueMethod::BruteForce => brute_force_shapley(&labeled, &validation, &spec)?,
        ValueMethod::Tmc => {
            let mc = TmcConfig { num_permutations: args.permutations, truncation_tol: args.tol, seed: args.seed };
            tmc_shapley(&labeled, &validation, &spec, &mc)?
        }
    };
    if args.extrapolate {
        let pool = ds.points(&splits.unlabeled)?;
        let reg = RegressionConfig {
            k_neighbors: args.regress_k,
            metric: args.metric,
            aggregation: args.aggregation,
            ..Default::default()
        };
        values = extrapolate_values(&pool, &labeled, &values, args.k, &reg)?.to_valuation_result();
    }
    emit(args.out.as_deref(), &values.to_csv_string())
}

fn select(args: SelectArgs) -> Result<()> {
    let (ds, splits) = load_dataset(&args.dataset)?;
    let labeled = ds.labeled(&splits.labeled)?;
    let pool = ds.points(&splits.unlabeled)?;
    let sel = selector(args.method, args.seed);
    let spec = PreselectSpec { fraction: args.fraction, floor: args.floor };
    spec.validate()?;
    let mut batch = if args.ads {
        let path = args.values.as_deref().ok_or_else(|| Error::Validation("--ads needs --values".into()))?;
        let values = AggregatedValues::from_valuation_result(&ValuationResult::read_csv(path)?)?;
        ads_enhanced(&sel, &values, &spec, &pool, &labeled, args.batch)?
    } else {
        sel.select(&pool, &labeled, args.batch)?
    };
    if args.no_timings {
        batch.stage_timings = Default::default();
    }
    emit(args.out.as_deref(), &format!("{}\n", batch.to_json()))
}

fn run_loop(args: LoopArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(r) = args.rounds {
        cfg.run.num_rounds = r;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(b) = args.batch {
        cfg.run.batch_size = b;
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(p) = args.out_json {
        cfg.output.json = p;
    }
    if let Some(p) = args.out_csv {
        cfg.output.csv = p;
    }
    cfg.validate()?;
    let (ds, splits) = cfg.data()?;
    let report = run_comparison(&ds, &splits, &cfg.loop_configs(), cfg.repeats)?;
    write_atomic(&cfg.output.json, format!("{}\n", report.to_json()).as_bytes())?;
    write_atomic(&cfg.output.csv, report.to_csv().as_bytes())?;
    for m in &report.methods {
        if let Some(last) = m.final_round() {
            println!(
                "{:<16} round {} accuracy {:.4} ± {:.4}",
                m.method, last.round, last.accuracy_mean, last.accuracy_std
            );
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        pool_sizes: args.pool_sizes,
        dims: args.dims,
        batch_size: args.batch,
        preselect: PreselectSpec::new(args.fraction),
        selectors: args.selectors.iter().map(|&m| selector(m, args.seed)).collect(),
        repeats: args.repeats,
        seed: args.seed,
        ..Default::default()
    };
    emit(args.out.as_deref(), &bench_csv(&run_bench(&cfg)?))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Dataset(DatasetCommand::Gen(args)) => dataset_gen(args),
        Command::Dataset(DatasetCommand::Validate { manifest }) => dataset_validate(&manifest),
        Command::Value(args) => value(args),
        Command::Select(args) => select(args),
        Command::Loop(args) => run_loop(args),
        Command::Bench(args) => bench(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("shapley-select: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

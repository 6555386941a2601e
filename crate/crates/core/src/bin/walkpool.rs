//! Command-line driver: edge splitting, heuristic baselines, model
//! training and evaluation, feature ablations, and multi-seed sweeps,
//! reporting results as CSV rows.
//!
//! Every command is deterministic given its flags. Exit codes: 0 on
//! success, 1 for runtime failures, 2 for usage or config errors.
//!
//! Report rows use the fixed schema
//! `dataset,method,seed,auc,ap,prec_at_half,wall_time_s`; they go to
//! stdout, and with `--csv` are also appended to a file (the header is
//! written only when the file is new or empty).

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use walkpool::dataset::{
    load_edge_list, load_embeddings, load_split, save_split, split_edges, EdgeSplit, NodeFeatures,
};
use walkpool::heuristics::{katz_diverges, score_pairs, HeuristicParams, Method};
use walkpool::metrics::{evaluate, EvalResult};
use walkpool::trainer::{
    excluded_groups, load_model, predict, save_model, train_observed, EpochStat, TrainConfig,
    TrainedModel,
};
use walkpool::walkpool::FeatureMask;

#[derive(Parser)]
#[command(
    name = "walkpool",
    about = "Link prediction with random-walk profile pooling",
    version
)]
struct Cli {
    /// Verbosity of progress output on stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, PartialOrd, ValueEnum)]
enum LogLevel {
    Quiet,
    Warn,
    Info,
    Debug,
}

#[derive(Clone, Copy)]
struct Logger {
    level: LogLevel,
}

impl Logger {
    fn warn(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Warn {
            eprintln!("[warn] {}", msg.as_ref());
        }
    }

    fn info(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Info {
            eprintln!("[info] {}", msg.as_ref());
        }
    }

    fn debug(&self, msg: impl AsRef<str>) {
        if self.level >= LogLevel::Debug {
            eprintln!("[debug] {}", msg.as_ref());
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Partition a graph's edges into train/val/test tiers with sampled
    /// negatives and write the split directory.
    Split(SplitArgs),
    /// Score a split's test pairs with a classical heuristic.
    Heuristic(HeuristicArgs),
    /// Train a model on a split and write a checkpoint plus a training
    /// log CSV next to it.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a split's test pairs.
    Eval(EvalArgs),
    /// Train and evaluate with feature groups removed, one run per
    /// --exclude occurrence.
    Ablate(AblateArgs),
    /// Run several methods over several fresh splits and aggregate.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Edge-list file (one `u v` pair per line).
    #[arg(long)]
    graph: PathBuf,
    /// Fraction of edges held out for testing.
    #[arg(long, default_value_t = 0.1)]
    test_ratio: f64,
    /// Fraction of the remaining edges held out for validation.
    #[arg(long, default_value_t = 0.0)]
    val_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeuristicArgs {
    /// Split directory produced by `split`.
    #[arg(long)]
    split: PathBuf,
    /// One of cn, aa, katz, pr.
    #[arg(long)]
    method: String,
    /// Katz attenuation factor.
    #[arg(long)]
    beta: Option<f64>,
    /// Longest walk length in the truncated Katz sum.
    #[arg(long)]
    lmax: Option<usize>,
    /// PageRank continuation (damping) factor.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Split directory produced by `split`.
    #[arg(long)]
    split: PathBuf,
    /// Checkpoint path to write; the training log goes to
    /// `<out>.log.csv`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

/// Flags shared by every command that builds a model config. Precedence:
/// defaults, then --config, then --set pairs in order, then --init.
#[derive(Args)]
struct ModelArgs {
    /// Config file of `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set epochs=5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Initial node states: ones, dl, or file.
    #[arg(long)]
    init: Option<String>,
    /// Embedding table for --init file (whitespace-separated rows of
    /// `node values...`).
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// Split directory produced by `split`.
    #[arg(long)]
    split: PathBuf,
    /// Embedding table when the checkpoint was trained with file init.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct AblateArgs {
    /// Split directory produced by `split`.
    #[arg(long)]
    split: PathBuf,
    /// Feature groups to drop, comma-separated from
    /// {omega,node,link,graph}; each occurrence is trained and
    /// evaluated separately.
    #[arg(long)]
    exclude: Vec<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Edge-list file; each seed gets its own split of it.
    #[arg(long)]
    graph: PathBuf,
    /// Number of seeds (0, 1, .., N-1).
    #[arg(long)]
    seeds: u64,
    /// Comma-separated list from {cn,aa,katz,pr,wp}.
    #[arg(long)]
    methods: String,
    #[arg(long, default_value_t = 0.1)]
    test_ratio: f64,
    #[arg(long, default_value_t = 0.05)]
    val_ratio: f64,
    /// Katz attenuation factor.
    #[arg(long)]
    beta: Option<f64>,
    /// Longest walk length in the truncated Katz sum.
    #[arg(long)]
    lmax: Option<usize>,
    /// PageRank continuation (damping) factor.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    report: ReportArgs,
}

/// Flags shared by every command that emits report rows.
#[derive(Args)]
struct ReportArgs {
    /// Dataset name for the CSV; defaults to the graph or split
    /// basename.
    #[arg(long)]
    dataset: Option<String>,
    /// Also append data rows to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum CliError {
    /// Bad flags, unreadable or malformed inputs, invalid config.
    Usage(String),
    /// Failures after inputs validated: training, writing outputs.
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> CliError {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> CliError {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Logger {
        level: cli.log_level,
    };
    match run(cli.command, log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, log: Logger) -> Result<(), CliError> {
    match command {
        Command::Split(args) => cmd_split(args, log),
        Command::Heuristic(args) => cmd_heuristic(args, log),
        Command::Train(args) => cmd_train(args, log),
        Command::Eval(args) => cmd_eval(args, log),
        Command::Ablate(args) => cmd_ablate(args, log),
        Command::Sweep(args) => cmd_sweep(args, log),
    }
}

const CSV_HEADER: &str = "dataset,method,seed,auc,ap,prec_at_half,wall_time_s";

struct Row {
    dataset: String,
    method: String,
    seed: String,
    auc: String,
    ap: String,
    prec: String,
    wall: String,
}

impl Row {
    fn metric(
        dataset: &str,
        method: &str,
        seed: u64,
        result: &EvalResult,
        wall_seconds: f64,
    ) -> Row {
        Row {
            dataset: dataset.to_string(),
            method: method.to_string(),
            seed: seed.to_string(),
            auc: format!("{:.6}", result.auc),
            ap: format!("{:.6}", result.ap),
            prec: format!("{:.6}", result.precision_at_half),
            wall: format!("{:.3}", wall_seconds),
        }
    }

    fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.dataset, self.method, self.seed, self.auc, self.ap, self.prec, self.wall
        )
    }
}

fn emit_rows(rows: &[Row], csv: Option<&Path>) -> Result<(), CliError> {
    println!("{CSV_HEADER}");
    for row in rows {
        println!("{}", row.line());
    }
    if let Some(path) = csv {
        let bad = |e: std::io::Error| CliError::runtime(format!("writing {}: {e}", path.display()));
        let fresh = match std::fs::metadata(path) {
            Ok(meta) => meta.len() == 0,
            Err(_) => true,
        };
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(bad)?;
        use std::io::Write as _;
        if fresh {
            writeln!(file, "{CSV_HEADER}").map_err(bad)?;
        }
        for row in rows {
            writeln!(file, "{}", row.line()).map_err(bad)?;
        }
    }
    Ok(())
}

/// File stem of a path, for default dataset names.
fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_split(args: SplitArgs, log: Logger) -> Result<(), CliError> {
    let loaded = load_edge_list(&args.graph).map_err(CliError::usage)?;
    log.info(format!(
        "loaded {}: {} nodes, {} edges",
        args.graph.display(),
        loaded.graph.num_nodes(),
        loaded.graph.edge_count()
    ));
    if !loaded.ids.is_identity() {
        log.warn("node ids were not contiguous; the split uses remapped ids");
    }
    let split = split_edges(&loaded.graph, args.test_ratio, args.val_ratio, args.seed)
        .map_err(CliError::usage)?;
    save_split(&split, &args.out).map_err(CliError::runtime)?;
    log.info(format!(
        "wrote {} (train {}, val {}, test {} positives)",
        args.out.display(),
        split.train_pos.len(),
        split.val_pos.len(),
        split.test_pos.len()
    ));
    Ok(())
}

fn load_split_logged(dir: &Path, log: Logger) -> Result<EdgeSplit, CliError> {
    let (split, warnings) = load_split(dir).map_err(CliError::usage)?;
    for w in warnings {
        log.warn(w);
    }
    Ok(split)
}

fn heuristic_params(
    beta: Option<f64>,
    lmax: Option<usize>,
    alpha: Option<f64>,
) -> HeuristicParams {
    let mut params = HeuristicParams::default();
    if let Some(b) = beta {
        params.beta = b;
    }
    if let Some(l) = lmax {
        params.l_max = l;
    }
    if let Some(a) = alpha {
        params.alpha = a;
    }
    params
}

fn heuristic_eval(
    split: &EdgeSplit,
    method: Method,
    params: &HeuristicParams,
    log: Logger,
) -> Result<(EvalResult, f64), CliError> {
    if method == Method::Katz && katz_diverges(&split.observed_graph, params.beta) {
        log.warn(format!(
            "katz beta {} is at or beyond the convergence radius; the truncated sum is dominated by the longest walks",
            params.beta
        ));
    }
    let started = Instant::now();
    let pos = score_pairs(&split.observed_graph, method, &split.test_pos, params)
        .map_err(CliError::runtime)?;
    let neg = score_pairs(&split.observed_graph, method, &split.test_neg, params)
        .map_err(CliError::runtime)?;
    let wall = started.elapsed().as_secs_f64();
    let pos: Vec<f64> = pos.into_iter().map(|s| s.value).collect();
    let neg: Vec<f64> = neg.into_iter().map(|s| s.value).collect();
    let result = evaluate(&pos, &neg).map_err(CliError::runtime)?;
    Ok((result, wall))
}

fn method_label(method: Method) -> &'static str {
    match method {
        Method::CommonNeighbors => "cn",
        Method::AdamicAdar => "aa",
        Method::Katz => "katz",
        Method::RootedPageRank => "pr",
    }
}

fn cmd_heuristic(args: HeuristicArgs, log: Logger) -> Result<(), CliError> {
    let method: Method = args.method.parse().map_err(CliError::usage)?;
    let split = load_split_logged(&args.split, log)?;
    let params = heuristic_params(args.beta, args.lmax, args.alpha);
    let (result, wall) = heuristic_eval(&split, method, &params, log)?;
    let dataset = args
        .report
        .dataset
        .clone()
        .unwrap_or_else(|| stem_of(&args.split));
    let row = Row::metric(&dataset, method_label(method), split.seed, &result, wall);
    emit_rows(&[row], args.report.csv.as_deref())
}

/// Builds the config in precedence order and loads embeddings when the
/// final init mode needs them.
fn resolve_model(
    model: &ModelArgs,
    split: &EdgeSplit,
    log: Logger,
) -> Result<(TrainConfig, Option<NodeFeatures>), CliError> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &model.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    for pair in &model.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--set {pair}: expected KEY=VALUE"))
        })?;
        cfg.apply_key(key.trim(), value.trim())
            .map_err(CliError::usage)?;
    }
    if let Some(init) = &model.init {
        cfg.init_mode = init.parse().map_err(CliError::usage)?;
    }
    cfg.validate().map_err(CliError::usage)?;

    use walkpool::trainer::InitMode;
    let external = match (&cfg.init_mode, &model.embeddings) {
        (InitMode::File, Some(path)) => {
            let ids = walkpool::dataset::IdMap::identity(split.observed_graph.num_nodes());
            Some(load_embeddings(path, &ids).map_err(CliError::usage)?)
        }
        (InitMode::File, None) => {
            return Err(CliError::Usage(
                "init mode 'file' requires --embeddings".to_string(),
            ));
        }
        (_, Some(_)) => {
            log.warn("--embeddings is ignored unless init mode is 'file'");
            None
        }
        (_, None) => None,
    };
    Ok((cfg, external))
}

fn write_training_log(path: &Path, stats: &[EpochStat]) -> Result<(), CliError> {
    let mut text = String::from("epoch,train_loss,val_auc\n");
    for s in stats {
        let val = s.val_auc.map(|v| v.to_string()).unwrap_or_default();
        writeln!(text, "{},{},{}", s.epoch, s.train_loss, val).expect("string write");
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))
}

fn train_on_split(
    split: &EdgeSplit,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
    log: Logger,
) -> Result<(TrainedModel, Vec<EpochStat>, f64), CliError> {
    let started = Instant::now();
    let (model, stats) = train_observed(split, cfg, external, &mut |s: &EpochStat| {
        match s.val_auc {
            Some(v) => log.info(format!(
                "epoch {}: train loss {:.5}, val auc {:.4}",
                s.epoch, s.train_loss, v
            )),
            None => log.info(format!("epoch {}: train loss {:.5}", s.epoch, s.train_loss)),
        }
    })
    .map_err(CliError::runtime)?;
    Ok((model, stats, started.elapsed().as_secs_f64()))
}

fn eval_on_split(
    model: &TrainedModel,
    split: &EdgeSplit,
    external: Option<&NodeFeatures>,
) -> Result<(EvalResult, f64), CliError> {
    let started = Instant::now();
    let pos = predict(model, &split.observed_graph, &split.test_pos, external)
        .map_err(CliError::runtime)?;
    let neg = predict(model, &split.observed_graph, &split.test_neg, external)
        .map_err(CliError::runtime)?;
    let wall = started.elapsed().as_secs_f64();
    let result = evaluate(&pos, &neg).map_err(CliError::runtime)?;
    Ok((result, wall))
}

/// Method label for model rows: `wp`, or `wp-<group>` per dropped group.
fn model_label(mask: FeatureMask) -> String {
    let dropped = excluded_groups(mask);
    if dropped.is_empty() {
        "wp".to_string()
    } else {
        format!("wp-{}", dropped.replace(',', "-"))
    }
}

fn cmd_train(args: TrainArgs, log: Logger) -> Result<(), CliError> {
    let split = load_split_logged(&args.split, log)?;
    let (cfg, external) = resolve_model(&args.model, &split, log)?;
    log.debug(format!("config:\n{}", cfg.to_text()));
    let (model, stats, wall) = train_on_split(&split, &cfg, external.as_ref(), log)?;
    save_model(&args.out, &model).map_err(CliError::runtime)?;
    let log_path = PathBuf::from(format!("{}.log.csv", args.out.display()));
    write_training_log(&log_path, &stats)?;
    if model.selection_metric.is_nan() {
        log.warn("split has no validation tier; checkpoint holds final-epoch parameters");
    } else {
        log.info(format!("selection val auc {:.4}", model.selection_metric));
    }
    log.info(format!(
        "wrote {} and {} in {:.1}s",
        args.out.display(),
        log_path.display(),
        wall
    ));
    Ok(())
}

fn cmd_eval(args: EvalArgs, log: Logger) -> Result<(), CliError> {
    let model = load_model(&args.ckpt).map_err(CliError::usage)?;
    let split = load_split_logged(&args.split, log)?;
    use walkpool::trainer::InitMode;
    let external = match (&model.config.init_mode, &args.embeddings) {
        (InitMode::File, Some(path)) => {
            let ids = walkpool::dataset::IdMap::identity(split.observed_graph.num_nodes());
            Some(load_embeddings(path, &ids).map_err(CliError::usage)?)
        }
        (InitMode::File, None) => {
            return Err(CliError::Usage(
                "checkpoint was trained with file init; pass --embeddings".to_string(),
            ));
        }
        (_, Some(_)) => {
            log.warn("--embeddings is ignored unless the checkpoint used file init");
            None
        }
        (_, None) => None,
    };
    let (result, wall) = eval_on_split(&model, &split, external.as_ref())?;
    let dataset = args
        .report
        .dataset
        .clone()
        .unwrap_or_else(|| stem_of(&args.split));
    let row = Row::metric(
        &dataset,
        &model_label(model.config.mask),
        split.seed,
        &result,
        wall,
    );
    emit_rows(&[row], args.report.csv.as_deref())
}

fn cmd_ablate(args: AblateArgs, log: Logger) -> Result<(), CliError> {
    let split = load_split_logged(&args.split, log)?;
    let (base_cfg, external) = resolve_model(&args.model, &split, log)?;
    let masks: Vec<FeatureMask> = if args.exclude.is_empty() {
        vec![base_cfg.mask]
    } else {
        args.exclude
            .iter()
            .map(|list| {
                let names: Vec<String> = list
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                FeatureMask::drop_groups(&names).map_err(CliError::usage)
            })
            .collect::<Result<_, _>>()?
    };
    let dataset = args
        .report
        .dataset
        .clone()
        .unwrap_or_else(|| stem_of(&args.split));
    let mut rows = Vec::with_capacity(masks.len());
    for mask in masks {
        let mut cfg = base_cfg.clone();
        cfg.mask = mask;
        cfg.validate().map_err(CliError::usage)?;
        log.info(format!("training {}", model_label(mask)));
        let (model, _stats, train_wall) = train_on_split(&split, &cfg, external.as_ref(), log)?;
        let (result, eval_wall) = eval_on_split(&model, &split, external.as_ref())?;
        rows.push(Row::metric(
            &dataset,
            &model_label(mask),
            split.seed,
            &result,
            train_wall + eval_wall,
        ));
    }
    emit_rows(&rows, args.report.csv.as_deref())
}

enum SweepMethod {
    Heuristic(Method),
    Model,
}

fn parse_methods(list: &str) -> Result<Vec<(String, SweepMethod)>, CliError> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let method = if name == "wp" {
            SweepMethod::Model
        } else {
            SweepMethod::Heuristic(name.parse().map_err(CliError::usage)?)
        };
        out.push((name.to_string(), method));
    }
    if out.is_empty() {
        return Err(CliError::Usage("--methods list is empty".to_string()));
    }
    Ok(out)
}

/// Mean and sample standard deviation; the deviation needs two values.
fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

fn cmd_sweep(args: SweepArgs, log: Logger) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".to_string()));
    }
    let methods = parse_methods(&args.methods)?;
    let loaded = load_edge_list(&args.graph).map_err(CliError::usage)?;
    let dataset = args
        .report
        .dataset
        .clone()
        .unwrap_or_else(|| stem_of(&args.graph));
    let heuristic = heuristic_params(args.beta, args.lmax, args.alpha);
    let wants_model = methods.iter().any(|(_, m)| matches!(m, SweepMethod::Model));

    let mut rows = Vec::new();
    let mut per_method: Vec<Vec<EvalResult>> = vec![Vec::new(); methods.len()];
    for seed in 0..args.seeds {
        log.info(format!("seed {seed}: splitting"));
        let split = split_edges(&loaded.graph, args.test_ratio, args.val_ratio, seed)
            .map_err(CliError::usage)?;
        let model_inputs = if wants_model {
            let (mut cfg, external) = resolve_model(&args.model, &split, log)?;
            cfg.seed = seed;
            Some((cfg, external))
        } else {
            None
        };
        for (idx, (name, method)) in methods.iter().enumerate() {
            let (result, wall) = match method {
                SweepMethod::Heuristic(m) => heuristic_eval(&split, *m, &heuristic, log)?,
                SweepMethod::Model => {
                    let (cfg, external) = model_inputs.as_ref().expect("prepared above");
                    let (model, _stats, train_wall) =
                        train_on_split(&split, cfg, external.as_ref(), log)?;
                    let (result, eval_wall) = eval_on_split(&model, &split, external.as_ref())?;
                    (result, train_wall + eval_wall)
                }
            };
            log.info(format!("seed {seed} {name}: auc {:.4}", result.auc));
            rows.push(Row::metric(&dataset, name, seed, &result, wall));
            per_method[idx].push(result);
        }
    }

    for (idx, (name, _)) in methods.iter().enumerate() {
        let results = &per_method[idx];
        let agg = |pick: fn(&EvalResult) -> f64| {
            let values: Vec<f64> = results.iter().map(pick).collect();
            mean_std(&values)
        };
        let (auc, auc_std) = agg(|r| r.auc);
        let (ap, ap_std) = agg(|r| r.ap);
        let (prec, prec_std) = agg(|r| r.precision_at_half);
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        rows.push(Row {
            dataset: dataset.clone(),
            method: name.clone(),
            seed: "mean".to_string(),
            auc: format!("{auc:.6}"),
            ap: format!("{ap:.6}"),
            prec: format!("{prec:.6}"),
            wall: String::new(),
        });
        rows.push(Row {
            dataset: dataset.clone(),
            method: name.clone(),
            seed: "std".to_string(),
            auc: fmt(auc_std),
            ap: fmt(ap_std),
            prec: fmt(prec_std),
            wall: String::new(),
        });
    }
    emit_rows(&rows, args.report.csv.as_deref())
}

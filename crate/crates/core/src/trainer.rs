//! Supervised training of the link predictor: enclosing subgraphs are
//! extracted once per split, node states come from two GCN layers over
//! each subgraph's candidate-free adjacency, walk-profile features feed
//! the classifier, and Adam minimizes the MSE between predicted
//! probabilities and {0, 1} labels.
//!
//! Everything is driven by a single seed: parameter init, per-epoch
//! shuffles, and subsampling inside extraction all use derived streams,
//! so two single-worker runs with the same config produce bit-identical
//! models and logs.

use crate::autodiff::{
    adam_step, gcn_layer_pre, load_tensors, normalized_adjacency, save_tensors, AdamState,
    ModelParams, Tape, TapedParams, Tensor,
};
use crate::dataset::{EdgeSplit, NodeFeatures};
use crate::graph::{DenseMatrix, Graph};
use crate::metrics;
use crate::rng;
use crate::subgraph::{
    distance_labels, extract_enclosing, make_variants, Label, SubgraphError, SubgraphVariant,
};
use crate::walkpool::{classify, feature_len, wp_features, FeatureMask};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot train: {tier} tier is empty")]
    EmptyTier { tier: &'static str },
    #[error("init mode 'file' requires node embeddings")]
    MissingExternalFeatures,
    #[error("embeddings cover {got} nodes but the graph has {want}")]
    FeatureSize { got: usize, want: usize },
    #[error(transparent)]
    Subgraph(#[from] SubgraphError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source of the per-node input states Z0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// All-ones rows of width `init_dim`.
    Ones,
    /// One-hot distance labels of width `init_dim`.
    DistanceLabels,
    /// Rows taken from an embedding file.
    File,
}

impl FromStr for InitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<InitMode, String> {
        match s {
            "ones" => Ok(InitMode::Ones),
            "dl" => Ok(InitMode::DistanceLabels),
            "file" => Ok(InitMode::File),
            other => Err(format!("unknown init mode '{other}' (ones|dl|file)")),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Ones => "ones",
            InitMode::DistanceLabels => "dl",
            InitMode::File => "file",
        })
    }
}

/// Which epoch's parameters the returned model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Highest validation AUC (falls back to the final epoch when the
    /// split has no validation tier).
    BestVal,
    Final,
}

impl FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> Result<Selection, String> {
        match s {
            "best_val" => Ok(Selection::BestVal),
            "final" => Ok(Selection::Final),
            other => Err(format!("unknown selection '{other}' (best_val|final)")),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::BestVal => "best_val",
            Selection::Final => "final",
        })
    }
}

/// Full training configuration. `Default` carries the reference
/// hyperparameters; the config file and CLI flags override fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k_hops: usize,
    pub max_per_hop: usize,
    pub tau_c: usize,
    pub heads: usize,
    pub init_mode: InitMode,
    pub init_dim: usize,
    pub gcn_hidden: usize,
    pub gcn_out: usize,
    pub attention_mlp_hidden: usize,
    pub attention_mlp_out: usize,
    /// Layer widths of the classifier as multiples of the feature
    /// length; the leading entry must be 1 (the input itself), and a
    /// final scalar output is appended.
    pub classifier_ratios: Vec<usize>,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub mask: FeatureMask,
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            k_hops: 2,
            max_per_hop: 100,
            tau_c: 7,
            heads: 2,
            init_mode: InitMode::Ones,
            init_dim: 32,
            gcn_hidden: 32,
            gcn_out: 32,
            attention_mlp_hidden: 32,
            attention_mlp_out: 32,
            classifier_ratios: vec![1, 20, 20, 10, 1],
            lr: 5e-5,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 50,
            seed: 1,
            mask: FeatureMask::all(),
            selection: Selection::BestVal,
        }
    }
}

/// Comma-joined names of the groups `mask` drops, in layout order;
/// empty for the full feature set. Inverse of
/// [`FeatureMask::drop_groups`].
pub fn excluded_groups(mask: FeatureMask) -> String {
    let mut out: Vec<&str> = Vec::new();
    if !mask.omega {
        out.push("omega");
    }
    if !mask.node {
        out.push("node");
    }
    if !mask.link {
        out.push("link");
    }
    if !mask.graph {
        out.push("graph");
    }
    out.join(",")
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("k_hops", self.k_hops),
            ("max_per_hop", self.max_per_hop),
            ("heads", self.heads),
            ("init_dim", self.init_dim),
            ("gcn_hidden", self.gcn_hidden),
            ("gcn_out", self.gcn_out),
            ("attention_mlp_hidden", self.attention_mlp_hidden),
            ("attention_mlp_out", self.attention_mlp_out),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if self.tau_c < 2 {
            return Err(TrainError::Config("tau_c must be at least 2".into()));
        }
        if self.classifier_ratios.first() != Some(&1) {
            return Err(TrainError::Config(
                "classifier_ratios must start with 1 (the feature length itself)".into(),
            ));
        }
        if self.classifier_ratios.iter().any(|&r| r == 0) {
            return Err(TrainError::Config("classifier_ratios must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TrainError::Config("lr must be finite and non-negative".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config(
                "weight_decay must be finite and non-negative".into(),
            ));
        }
        if self.feature_len() == 0 {
            return Err(TrainError::Config(
                "feature mask excludes every group".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_len(&self) -> usize {
        feature_len(self.heads, self.tau_c, self.mask)
    }

    fn classifier_dims(&self) -> Vec<usize> {
        let l = self.feature_len();
        let mut dims: Vec<usize> = self.classifier_ratios.iter().map(|&r| r * l).collect();
        dims.push(1);
        dims
    }

    /// Width of Z0 rows; in file mode it comes from the embeddings.
    fn z0_dim(&self, features: Option<&NodeFeatures>) -> usize {
        match self.init_mode {
            InitMode::File => features.map(|f| f.dim).unwrap_or(self.init_dim),
            _ => self.init_dim,
        }
    }

    /// Ordered key=value listing; the single source of truth for config
    /// files and checkpoint metadata.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        kv("k_hops", self.k_hops.to_string());
        kv("max_per_hop", self.max_per_hop.to_string());
        kv("tau_c", self.tau_c.to_string());
        kv("heads", self.heads.to_string());
        kv("init_mode", self.init_mode.to_string());
        kv("init_dim", self.init_dim.to_string());
        kv("gcn_hidden", self.gcn_hidden.to_string());
        kv("gcn_out", self.gcn_out.to_string());
        kv("attention_mlp_hidden", self.attention_mlp_hidden.to_string());
        kv("attention_mlp_out", self.attention_mlp_out.to_string());
        kv(
            "classifier_ratios",
            self.classifier_ratios
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("lr", format!("{}", self.lr));
        kv("weight_decay", format!("{}", self.weight_decay));
        kv("batch_size", self.batch_size.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("exclude", excluded_groups(self.mask));
        kv("select", self.selection.to_string());
        s
    }

    /// Applies `key=value` lines to this config. Unknown keys and
    /// malformed values are errors naming the key; blank lines and
    /// `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), TrainError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                TrainError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            self.apply_key(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let bad = |key: &str, value: &str| {
            TrainError::Config(format!("invalid value '{value}' for key '{key}'"))
        };
        match key {
            "k_hops" => self.k_hops = value.parse().map_err(|_| bad(key, value))?,
            "max_per_hop" => self.max_per_hop = value.parse().map_err(|_| bad(key, value))?,
            "tau_c" => self.tau_c = value.parse().map_err(|_| bad(key, value))?,
            "heads" => self.heads = value.parse().map_err(|_| bad(key, value))?,
            "init_mode" => self.init_mode = value.parse().map_err(|e| TrainError::Config(e))?,
            "init_dim" => self.init_dim = value.parse().map_err(|_| bad(key, value))?,
            "gcn_hidden" => self.gcn_hidden = value.parse().map_err(|_| bad(key, value))?,
            "gcn_out" => self.gcn_out = value.parse().map_err(|_| bad(key, value))?,
            "attention_mlp_hidden" => {
                self.attention_mlp_hidden = value.parse().map_err(|_| bad(key, value))?
            }
            "attention_mlp_out" => {
                self.attention_mlp_out = value.parse().map_err(|_| bad(key, value))?
            }
            "classifier_ratios" => {
                let ratios: Result<Vec<usize>, _> =
                    value.split(',').map(|p| p.trim().parse()).collect();
                self.classifier_ratios = ratios.map_err(|_| bad(key, value))?;
            }
            "lr" => self.lr = value.parse().map_err(|_| bad(key, value))?,
            "weight_decay" => self.weight_decay = value.parse().map_err(|_| bad(key, value))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key, value))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key, value))?,
            "exclude" => {
                let names: Vec<String> = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
                self.mask = FeatureMask::drop_groups(&names).map_err(TrainError::Config)?;
            }
            "select" => self.selection = value.parse().map_err(|e| TrainError::Config(e))?,
            other => {
                return Err(TrainError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }
}

/// Trained parameters plus the config they were trained under.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub config: TrainConfig,
    /// Validation AUC of the selected epoch; NaN when the split had no
    /// validation tier.
    pub selection_metric: f64,
}

/// Per-epoch log row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStat {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

/// A prepared training or evaluation example.
struct Example {
    variant: SubgraphVariant,
    z0: DenseMatrix,
    target: f64,
}

/// Z0 for one subgraph under the configured init mode.
fn initial_features(
    variant: &SubgraphVariant,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
) -> Result<DenseMatrix, TrainError> {
    let n = variant.adjacency_minus.num_nodes();
    match cfg.init_mode {
        InitMode::Ones => Ok(DenseMatrix::from_vec(
            n,
            cfg.init_dim,
            vec![1.0; n * cfg.init_dim],
        )),
        InitMode::DistanceLabels => {
            let labels = distance_labels(&variant.base, cfg.init_dim);
            let mut z0 = DenseMatrix::zeros(n, cfg.init_dim);
            for v in 0..n {
                z0.row_mut(v).copy_from_slice(labels.row(v));
            }
            Ok(z0)
        }
        InitMode::File => {
            let feats = external.ok_or(TrainError::MissingExternalFeatures)?;
            let mut z0 = DenseMatrix::zeros(n, feats.dim);
            for (local, &global) in variant.base.node_map.iter().enumerate() {
                z0.row_mut(local).copy_from_slice(feats.row(global));
            }
            Ok(z0)
        }
    }
}

/// Node states for one subgraph: Z = [Z0 | Z1 | Z2] with Z1, Z2 two GCN
/// layers over the candidate-free adjacency.
pub fn node_features_for(
    tape: &Tape,
    variant: &SubgraphVariant,
    z0: &DenseMatrix,
    taped: &TapedParams,
) -> Tensor {
    let z0_t = tape.constant(z0.clone());
    let a_hat = tape.constant(normalized_adjacency(&variant.adjacency_minus));
    let mut zs = vec![z0_t];
    let mut cur = z0_t;
    for &w in &taped.gcn {
        cur = gcn_layer_pre(tape, a_hat, cur, w);
        zs.push(cur);
    }
    tape.concat_cols(&zs)
}

fn build_examples(
    observed: &Graph,
    pairs: &[(usize, usize)],
    label: Label,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
) -> Result<Vec<Example>, TrainError> {
    let target = match label {
        Label::Positive => 1.0,
        Label::Negative => 0.0,
    };
    if let (InitMode::File, Some(f)) = (cfg.init_mode, external) {
        if f.num_nodes != observed.num_nodes() {
            return Err(TrainError::FeatureSize {
                got: f.num_nodes,
                want: observed.num_nodes(),
            });
        }
    }
    pairs
        .iter()
        .map(|&pair| {
            let sub = extract_enclosing(observed, pair, cfg.k_hops, cfg.max_per_hop, cfg.seed, label)?;
            let variant = make_variants(sub);
            let z0 = initial_features(&variant, cfg, external)?;
            Ok(Example { variant, z0, target })
        })
        .collect()
}

/// Predicted probabilities for a slice of examples under `params`.
fn batch_scores(params: &ModelParams, examples: &[&Example], cfg: &TrainConfig) -> Vec<f64> {
    let tape = Tape::new();
    let taped = TapedParams::mount(params, &tape);
    let probs = batch_probabilities(&tape, &taped, examples, cfg);
    (0..examples.len())
        .map(|i| tape.get(probs, i, 0))
        .collect()
}

/// Forward pass shared by training and scoring: feature rows for each
/// example, stacked and classified.
fn batch_probabilities(
    tape: &Tape,
    taped: &TapedParams,
    examples: &[&Example],
    cfg: &TrainConfig,
) -> Tensor {
    let rows: Vec<Tensor> = examples
        .iter()
        .map(|ex| {
            let z = node_features_for(tape, &ex.variant, &ex.z0, taped);
            wp_features(tape, &ex.variant, z, taped, cfg.tau_c, cfg.mask)
        })
        .collect();
    let feats = tape.concat_rows(&rows);
    classify(tape, feats, &taped.classifier)
}

fn scores_in_batches(params: &ModelParams, examples: &[Example], cfg: &TrainConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(cfg.batch_size.max(1)) {
        let refs: Vec<&Example> = chunk.iter().collect();
        out.extend(batch_scores(params, &refs, cfg));
    }
    out
}

fn val_auc(params: &ModelParams, val: &[Example], cfg: &TrainConfig) -> f64 {
    let scores = scores_in_batches(params, val, cfg);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (ex, s) in val.iter().zip(scores) {
        if ex.target == 1.0 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    metrics::auc(&pos, &neg).expect("validation tiers are nonempty")
}

/// Trains from freshly initialized parameters.
pub fn train(
    split: &EdgeSplit,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
) -> Result<(TrainedModel, Vec<EpochStat>), TrainError> {
    train_observed(split, cfg, external, &mut |_| {})
}

/// [`train`] with a per-epoch callback (see [`train_from_observed`]).
pub fn train_observed(
    split: &EdgeSplit,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
    observe: &mut dyn FnMut(&EpochStat),
) -> Result<(TrainedModel, Vec<EpochStat>), TrainError> {
    cfg.validate()?;
    let z0_dim = cfg.z0_dim(external);
    let mut init_stream = rng::stream(rng::derive_seed(cfg.seed, 0x01, 0));
    let params = ModelParams::init(
        &[z0_dim, cfg.gcn_hidden, cfg.gcn_out],
        &[
            z0_dim + cfg.gcn_hidden + cfg.gcn_out,
            cfg.attention_mlp_hidden,
            cfg.attention_mlp_out,
        ],
        cfg.heads,
        &cfg.classifier_dims(),
        &mut init_stream,
    );
    train_from_observed(params, split, cfg, external, observe)
}

/// Trains from explicit starting parameters (shapes must match `cfg`).
pub fn train_from(
    params: ModelParams,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
) -> Result<(TrainedModel, Vec<EpochStat>), TrainError> {
    train_from_observed(params, split, cfg, external, &mut |_| {})
}

/// [`train_from`] with a per-epoch callback, invoked after each epoch's
/// statistics are final (for progress reporting).
pub fn train_from_observed(
    mut params: ModelParams,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    external: Option<&NodeFeatures>,
    observe: &mut dyn FnMut(&EpochStat),
) -> Result<(TrainedModel, Vec<EpochStat>), TrainError> {
    cfg.validate()?;
    if split.train_pos.is_empty() {
        return Err(TrainError::EmptyTier { tier: "train_pos" });
    }
    if split.train_neg.is_empty() {
        return Err(TrainError::EmptyTier { tier: "train_neg" });
    }
    let observed = &split.observed_graph;
    let mut examples = build_examples(observed, &split.train_pos, Label::Positive, cfg, external)?;
    examples.extend(build_examples(
        observed,
        &split.train_neg,
        Label::Negative,
        cfg,
        external,
    )?);
    let mut val = build_examples(observed, &split.val_pos, Label::Positive, cfg, external)?;
    val.extend(build_examples(
        observed,
        &split.val_neg,
        Label::Negative,
        cfg,
        external,
    )?);
    let has_val = !split.val_pos.is_empty() && !split.val_neg.is_empty();

    let mut shuffle_stream = rng::stream(rng::derive_seed(cfg.seed, 0x02, 0));
    let mut adam = AdamState::new(&params.tensors_cloned());
    let mut stats: Vec<EpochStat> = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ModelParams)> = None;
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..cfg.epochs {
        rng::shuffle(&mut shuffle_stream, &mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&Example> = batch.iter().map(|&i| &examples[i]).collect();
            let targets: Vec<f64> = refs.iter().map(|ex| ex.target).collect();
            let tape = Tape::new();
            let taped = TapedParams::mount(&params, &tape);
            let probs = batch_probabilities(&tape, &taped, &refs, cfg);
            let loss = tape.mse_loss(probs, &targets);
            loss_sum += tape.get(loss, 0, 0) * batch.len() as f64;
            let grads = tape.backward(loss);
            let leaves = taped.leaves();
            let grad_mats: Vec<DenseMatrix> =
                leaves.iter().map(|&t| grads.of(t).clone()).collect();
            let mut slots = params.tensors_mut();
            let mut flat: Vec<DenseMatrix> =
                slots.iter().map(|m| (**m).clone()).collect();
            adam_step(
                &mut flat,
                &grad_mats,
                &mut adam,
                cfg.lr,
                ADAM_BETAS,
                ADAM_EPS,
                cfg.weight_decay,
            );
            for (slot, new) in slots.iter_mut().zip(flat) {
                **slot = new;
            }
        }
        let train_loss = loss_sum / examples.len() as f64;
        let auc = if has_val {
            Some(val_auc(&params, &val, cfg))
        } else {
            None
        };
        if let Some(a) = auc {
            let better = match &best {
                Some((b, _)) => a > *b,
                None => true,
            };
            if better {
                best = Some((a, params.clone()));
            }
        }
        stats.push(EpochStat {
            epoch,
            train_loss,
            val_auc: auc,
        });
        observe(stats.last().expect("just pushed"));
    }

    let (selected, metric) = match (cfg.selection, best) {
        (Selection::BestVal, Some((auc, p))) => (p, auc),
        (Selection::Final, Some((auc, _))) => {
            // final params, but the last epoch's AUC is the honest metric
            let last = stats.last().and_then(|s| s.val_auc).unwrap_or(auc);
            (params, last)
        }
        (_, None) => (params, f64::NAN),
    };
    Ok((
        TrainedModel {
            params: selected,
            config: cfg.clone(),
            selection_metric: metric,
        },
        stats,
    ))
}

/// Probability that each pair is a link, judged against `observed`.
/// Pairs use the same node ids as `observed`; extraction, features, and
/// the classifier run exactly as in training.
pub fn predict(
    model: &TrainedModel,
    observed: &Graph,
    pairs: &[(usize, usize)],
    external: Option<&NodeFeatures>,
) -> Result<Vec<f64>, TrainError> {
    // label only tags the example; scores do not depend on it
    let examples = build_examples(observed, pairs, Label::Positive, &model.config, external)?;
    Ok(scores_in_batches(&model.params, &examples, &model.config))
}

const MODEL_META_VERSION: &str = "1";

/// Serializes a trained model; the tensor container plus config and the
/// selection metric in the metadata block.
pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<(), TrainError> {
    let mut meta = String::new();
    meta.push_str("format=walkpool-model\n");
    meta.push_str(&format!("version={MODEL_META_VERSION}\n"));
    meta.push_str(&format!("selection_metric={}\n", model.selection_metric));
    meta.push_str(&model.config.to_text());
    let named: Vec<(String, &DenseMatrix)> = model
        .params
        .named()
        .into_iter()
        .map(|(n, t)| (n, t))
        .collect();
    save_tensors(path, &named, &meta)?;
    Ok(())
}

/// Loads a model saved by [`save_model`], validating names and shapes
/// against the embedded config.
pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel, TrainError> {
    let (entries, meta) = load_tensors(path)?;
    let mut cfg = TrainConfig::default();
    let mut selection_metric = f64::NAN;
    let mut format_ok = false;
    for raw in meta.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| TrainError::Checkpoint(format!("malformed metadata line '{line}'")))?;
        match key {
            "format" => {
                if value != "walkpool-model" {
                    return Err(TrainError::Checkpoint(format!(
                        "unexpected format '{value}'"
                    )));
                }
                format_ok = true;
            }
            "version" => {
                if value != MODEL_META_VERSION {
                    return Err(TrainError::Checkpoint(format!(
                        "unsupported version '{value}'"
                    )));
                }
            }
            "selection_metric" => {
                selection_metric = value
                    .parse()
                    .map_err(|_| TrainError::Checkpoint("bad selection_metric".into()))?;
            }
            _ => cfg.apply_key(key, value)?,
        }
    }
    if !format_ok {
        return Err(TrainError::Checkpoint("missing format marker".into()));
    }
    // z0 width is recoverable from the stored GCN input (file mode may
    // differ from init_dim)
    let gcn0 = entries
        .iter()
        .find(|(n, _)| n == "gcn.0")
        .ok_or_else(|| TrainError::Checkpoint("missing tensor gcn.0".into()))?;
    let z0_dim = gcn0.1.rows();
    let mut params = ModelParams::init(
        &[z0_dim, cfg.gcn_hidden, cfg.gcn_out],
        &[
            z0_dim + cfg.gcn_hidden + cfg.gcn_out,
            cfg.attention_mlp_hidden,
            cfg.attention_mlp_out,
        ],
        cfg.heads,
        &cfg.classifier_dims(),
        &mut rng::stream(0),
    );
    let expected = params.named().len();
    if entries.len() != expected {
        return Err(TrainError::Checkpoint(format!(
            "expected {expected} tensors, found {}",
            entries.len()
        )));
    }
    let mut by_name: std::collections::BTreeMap<&str, &DenseMatrix> =
        entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
    if by_name.len() != entries.len() {
        return Err(TrainError::Checkpoint("duplicate tensor names".into()));
    }
    // overwrite in canonical order, consuming each stored tensor once
    let canonical: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in canonical.iter().zip(params.tensors_mut()) {
        let stored = by_name
            .remove(name.as_str())
            .ok_or_else(|| TrainError::Checkpoint(format!("missing tensor '{name}'")))?;
        if (stored.rows(), stored.cols()) != (slot.rows(), slot.cols()) {
            return Err(TrainError::Checkpoint(format!(
                "tensor '{name}' has shape {}x{}, expected {}x{}",
                stored.rows(),
                stored.cols(),
                slot.rows(),
                slot.cols()
            )));
        }
        *slot = stored.clone();
    }
    Ok(TrainedModel {
        params,
        config: cfg,
        selection_metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split_edges;

    /// Small deterministic test graph with clustered structure.
    fn toy_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut stream = rng::stream(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng::unit_f64(&mut stream) < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::build(n, &edges).unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            k_hops: 2,
            max_per_hop: 20,
            tau_c: 4,
            heads: 1,
            init_dim: 4,
            gcn_hidden: 4,
            gcn_out: 4,
            attention_mlp_hidden: 4,
            attention_mlp_out: 4,
            classifier_ratios: vec![1, 4, 1],
            lr: 1e-3,
            batch_size: 8,
            epochs: 2,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_text_roundtrip() {
        let mut cfg = tiny_config();
        cfg.mask = FeatureMask::drop_groups(&["graph".into()]).unwrap();
        cfg.selection = Selection::Final;
        let text = cfg.to_text();
        let mut parsed = TrainConfig::default();
        parsed.apply_text(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn config_rejects_unknown_key_and_bad_value() {
        let mut cfg = TrainConfig::default();
        let err = cfg.apply_text("learning_rate=0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
        let err = cfg.apply_text("epochs=ten\n").unwrap_err();
        assert!(err.to_string().contains("epochs"));
        cfg.apply_text("# comment\n\nlr=0.25\n").unwrap();
        assert_eq!(cfg.lr, 0.25);
    }

    #[test]
    fn initial_features_modes() {
        let g = toy_graph(8, 0.5, 3);
        let split = split_edges(&g, 0.2, 0.0, 1).unwrap();
        let mut cfg = tiny_config();
        let pair = split.train_pos[0];
        let sub = extract_enclosing(&split.observed_graph, pair, 2, 20, 7, Label::Positive).unwrap();
        let variant = make_variants(sub);
        let n = variant.adjacency_minus.num_nodes();

        let ones = initial_features(&variant, &cfg, None).unwrap();
        assert_eq!((ones.rows(), ones.cols()), (n, 4));
        assert!(ones.data().iter().all(|&v| v == 1.0));

        cfg.init_mode = InitMode::DistanceLabels;
        let dl = initial_features(&variant, &cfg, None).unwrap();
        for v in 0..n {
            let s: f64 = dl.row(v).iter().sum();
            assert_eq!(s, 1.0, "row {v} must be one-hot");
        }

        cfg.init_mode = InitMode::File;
        assert!(matches!(
            initial_features(&variant, &cfg, None),
            Err(TrainError::MissingExternalFeatures)
        ));
        let mut feats = NodeFeatures::zeros(g.num_nodes(), 3);
        for v in 0..g.num_nodes() {
            feats.row_mut(v)[0] = v as f64;
        }
        let z0 = initial_features(&variant, &cfg, Some(&feats)).unwrap();
        assert_eq!(z0.cols(), 3);
        for (local, &global) in variant.base.node_map.iter().enumerate() {
            assert_eq!(z0.get(local, 0), global as f64);
        }
    }

    #[test]
    fn first_batch_loss_is_exact_quarter() {
        let g = toy_graph(14, 0.4, 5);
        let split = split_edges(&g, 0.2, 0.1, 2).unwrap();
        let mut cfg = tiny_config();
        cfg.lr = 0.0;
        cfg.epochs = 1;
        let mut stream = rng::stream(rng::derive_seed(cfg.seed, 0x01, 0));
        let mut params = ModelParams::init(
            &[4, 4, 4],
            &[12, 4, 4],
            1,
            &cfg.classifier_dims(),
            &mut stream,
        );
        let last = params.classifier.layers.last_mut().unwrap();
        last.0 = DenseMatrix::zeros(last.0.rows(), last.0.cols());
        last.1 = DenseMatrix::zeros(1, last.1.cols());
        let (_, stats) = train_from(params, &split, &cfg, None).unwrap();
        assert_eq!(stats[0].train_loss, 0.25);
    }

    #[test]
    fn one_small_step_decreases_batch_loss() {
        let g = toy_graph(16, 0.25, 11);
        let split = split_edges(&g, 0.2, 0.0, 3).unwrap();
        let mut cfg = tiny_config();
        cfg.lr = 1e-6;
        cfg.epochs = 1;
        // one batch spanning the whole training set: the logged loss is
        // the pre-step loss of exactly the batch the step was taken on
        cfg.batch_size = split.train_pos.len() + split.train_neg.len();

        let (model, stats) = train(&split, &cfg, None).unwrap();
        let mut examples =
            build_examples(&split.observed_graph, &split.train_pos, Label::Positive, &cfg, None)
                .unwrap();
        examples.extend(
            build_examples(&split.observed_graph, &split.train_neg, Label::Negative, &cfg, None)
                .unwrap(),
        );
        let scores = scores_in_batches(&model.params, &examples, &cfg);
        let after: f64 = examples
            .iter()
            .zip(&scores)
            .map(|(ex, s)| (s - ex.target).powi(2))
            .sum::<f64>()
            / examples.len() as f64;
        assert!(
            after < stats[0].train_loss,
            "loss did not decrease: {} -> {after}",
            stats[0].train_loss
        );
    }

    #[test]
    fn training_is_deterministic() {
        let g = toy_graph(16, 0.25, 13);
        let split = split_edges(&g, 0.2, 0.1, 4).unwrap();
        let cfg = tiny_config();
        let (m1, s1) = train(&split, &cfg, None).unwrap();
        let (m2, s2) = train(&split, &cfg, None).unwrap();
        assert_eq!(s1, s2);
        for ((n1, t1), (n2, t2)) in m1.params.named().iter().zip(m2.params.named().iter()) {
            assert_eq!(n1, n2);
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empty_tiers_are_rejected() {
        let g = toy_graph(16, 0.25, 17);
        let mut split = split_edges(&g, 0.2, 0.0, 5).unwrap();
        split.train_neg.clear();
        let err = train(&split, &tiny_config(), None).unwrap_err();
        assert!(err.to_string().contains("train_neg"));
    }

    #[test]
    fn predict_is_orientation_free_and_batch_transparent() {
        let g = toy_graph(14, 0.4, 19);
        let split = split_edges(&g, 0.2, 0.1, 6).unwrap();
        let mut cfg = tiny_config();
        cfg.epochs = 1;
        let (model, _) = train(&split, &cfg, None).unwrap();
        let pairs: Vec<(usize, usize)> = split.test_pos.iter().chain(&split.test_neg).copied().collect();
        let flipped: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let fwd = predict(&model, &split.observed_graph, &pairs, None).unwrap();
        let rev = predict(&model, &split.observed_graph, &flipped, None).unwrap();
        for (a, b) in fwd.iter().zip(&rev) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // one-at-a-time must match the batched pass bit for bit
        for (i, &pair) in pairs.iter().enumerate() {
            let single = predict(&model, &split.observed_graph, &[pair], None).unwrap();
            assert_eq!(single[0].to_bits(), fwd[i].to_bits());
        }
    }

    #[test]
    fn fit_separates_train_labels() {
        let g = toy_graph(16, 0.45, 23);
        let split = split_edges(&g, 0.15, 0.0, 7).unwrap();
        let mut cfg = tiny_config();
        cfg.epochs = 12;
        cfg.lr = 2e-3;
        let (model, _) = train(&split, &cfg, None).unwrap();
        let pos = predict(&model, &split.observed_graph, &split.train_pos, None).unwrap();
        let neg = predict(&model, &split.observed_graph, &split.train_neg, None).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&pos) > mean(&neg),
            "train positives did not outscore negatives: {} vs {}",
            mean(&pos),
            mean(&neg)
        );
    }

    #[test]
    fn planted_closures_are_learned() {
        // 20-node graph; links close triangles (share >= 2 neighbors),
        // non-links share none. the model must rank closure pairs higher.
        let g = toy_graph(20, 0.3, 31);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for u in 0..20 {
            for v in (u + 1)..20 {
                if g.has_edge(u, v) {
                    continue;
                }
                let common = g
                    .neighbors(u)
                    .iter()
                    .filter(|&&w| g.has_edge(v, w))
                    .count();
                if common >= 2 {
                    pos.push((u, v));
                } else if common == 0 {
                    neg.push((u, v));
                }
            }
        }
        pos.truncate(12);
        neg.truncate(12);
        assert!(pos.len() >= 8 && neg.len() >= 8, "toy graph too sparse");
        let val_n = 4;
        let split = EdgeSplit {
            observed_graph: g.clone(),
            train_pos: pos[val_n..].to_vec(),
            train_neg: neg[val_n..].to_vec(),
            val_pos: pos[..val_n].to_vec(),
            val_neg: neg[..val_n].to_vec(),
            test_pos: Vec::new(),
            test_neg: Vec::new(),
            seed: 31,
            test_ratio: 0.0,
            val_ratio: 0.25,
        };
        let mut cfg = tiny_config();
        cfg.epochs = 50;
        cfg.lr = 2e-3;
        cfg.batch_size = 8;
        let (model, stats) = train(&split, &cfg, None).unwrap();
        assert!(
            model.selection_metric > 0.9,
            "validation AUC {}",
            model.selection_metric
        );
        let best_seen = stats
            .iter()
            .filter_map(|s| s.val_auc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(model.selection_metric, best_seen);
        assert!(model.selection_metric >= stats[0].val_auc.unwrap());
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let g = toy_graph(12, 0.5, 37);
        let split = split_edges(&g, 0.2, 0.1, 8).unwrap();
        let mut cfg = tiny_config();
        cfg.epochs = 1;
        let (model, _) = train(&split, &cfg, None).unwrap();
        let dir = std::env::temp_dir().join("wp_trainer_ckpt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        save_model(&path, &model).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        assert_eq!(
            loaded.selection_metric.to_bits(),
            model.selection_metric.to_bits()
        );
        for ((n1, t1), (n2, t2)) in model.params.named().iter().zip(loaded.params.named().iter()) {
            assert_eq!(n1, n2);
            assert_eq!((t1.rows(), t1.cols()), (t2.rows(), t2.cols()));
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // predictions from the loaded model match the live one
        let live = predict(&model, &split.observed_graph, &split.test_pos, None).unwrap();
        let reloaded = predict(&loaded, &split.observed_graph, &split.test_pos, None).unwrap();
        for (a, b) in live.iter().zip(&reloaded) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

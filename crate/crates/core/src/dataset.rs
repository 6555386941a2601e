//! Edge-list and embedding ingestion plus reproducible train/val/test
//! splits with negative sampling.
//!
//! File formats:
//! - edge list: one `u v` pair per line, whitespace separated, `#` starts a
//!   comment, blank lines ignored
//! - split directory: `train_pos.txt`, `train_neg.txt`, `val_pos.txt`,
//!   `val_neg.txt`, `test_pos.txt`, `test_neg.txt` (edge lists in the
//!   internal id space) and `meta.txt` (`key=value` lines: `seed`,
//!   `test_ratio`, `val_ratio`, `num_nodes`)
//! - embeddings: one `node_id f1 .. fD` line per node, original id space
//!
//! Split determinism: edges are shuffled with the crate's pinned
//! Fisher-Yates over a ChaCha8 stream seeded by the split seed; negatives
//! are then rejection-sampled from the same stream in train, val, test
//! order. Identical (graph, ratios, seed) inputs give identical splits on
//! every platform.

use crate::graph::{Graph, GraphError};
use crate::rng;
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("test_ratio + val_ratio must be below 1, got {test_ratio} + {val_ratio}")]
    BadRatios { test_ratio: f64, val_ratio: f64 },
    #[error("could not sample {needed} negative edges after {rejections} rejections; graph too dense")]
    NegativeSamplingExhausted { needed: usize, rejections: usize },
    #[error("split invariant violated: {0}")]
    InvalidSplit(String),
    #[error("embedding file {path} missing node {node}")]
    MissingNode { path: String, node: usize },
    #[error("embedding file {path} has unknown node {node}")]
    UnknownNode { path: String, node: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Mapping between original file ids and the contiguous internal id space.
#[derive(Debug, Clone)]
pub struct IdMap {
    to_internal: BTreeMap<usize, usize>,
    to_original: Vec<usize>,
}

impl IdMap {
    /// Identity map over `n` nodes.
    pub fn identity(n: usize) -> IdMap {
        IdMap {
            to_internal: (0..n).map(|i| (i, i)).collect(),
            to_original: (0..n).collect(),
        }
    }

    pub fn internal(&self, original: usize) -> Option<usize> {
        self.to_internal.get(&original).copied()
    }

    pub fn original(&self, internal: usize) -> usize {
        self.to_original[internal]
    }

    pub fn len(&self) -> usize {
        self.to_original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_original.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.to_original.iter().enumerate().all(|(i, &o)| i == o)
    }
}

/// Graph plus the id map retained from ingestion.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub ids: IdMap,
}

/// Per-node feature rows aligned to internal node ids, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub num_nodes: usize,
    pub dim: usize,
    pub rows: Vec<f64>,
}

impl NodeFeatures {
    pub fn zeros(num_nodes: usize, dim: usize) -> NodeFeatures {
        NodeFeatures {
            num_nodes,
            dim,
            rows: vec![0.0; num_nodes * dim],
        }
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.rows[v * self.dim..(v + 1) * self.dim]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.rows[v * self.dim..(v + 1) * self.dim]
    }
}

/// Train/val/test partition of the edge set plus sampled negatives.
///
/// `observed_graph` contains exactly the training positives: validation
/// edges are held-out supervision for model selection and never appear in
/// the graph the model sees.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub observed_graph: Graph,
    pub train_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
    pub test_ratio: f64,
    pub val_ratio: f64,
}

/// Parses an edge-list file and remaps node ids to a contiguous 0-based
/// space (ids already contiguous map to themselves). For inputs whose
/// maximum id exceeds the number of distinct endpoint ids, interior ids
/// without edges are preserved so that `num_nodes = max_id + 1`.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let pairs = parse_edge_lines(&text, path)?;
    let max_id = pairs.iter().map(|&(u, v)| u.max(v)).max();
    let num_original = match max_id {
        Some(m) => m + 1,
        None => 0,
    };
    // Dense inputs keep their id space; the map is identity. (Which map we
    // pick only matters for sparse original ids, which we compact.)
    let distinct: HashSet<usize> = pairs.iter().flat_map(|&(u, v)| [u, v]).collect();
    let compact = num_original > 0 && distinct.len() * 2 < num_original;
    let (graph, ids) = if compact {
        let mut originals: Vec<usize> = distinct.into_iter().collect();
        originals.sort_unstable();
        let to_internal: BTreeMap<usize, usize> = originals
            .iter()
            .enumerate()
            .map(|(i, &o)| (o, i))
            .collect();
        let remapped: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(u, v)| (to_internal[&u], to_internal[&v]))
            .collect();
        let g = Graph::build(originals.len(), &remapped)?;
        (
            g,
            IdMap {
                to_internal,
                to_original: originals,
            },
        )
    } else {
        let g = Graph::build(num_original, &pairs)?;
        (g, IdMap::identity(num_original))
    };
    Ok(LoadedGraph { graph, ids })
}

fn parse_edge_lines(text: &str, path: &Path) -> Result<Vec<(usize, usize)>, DatasetError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize, DatasetError> {
            tok.ok_or(())
                .and_then(|t| t.parse::<usize>().map_err(|_| ()))
                .map_err(|_| DatasetError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected two non-negative integers, got {raw:?}"),
                })
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(DatasetError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("expected two fields, got {raw:?}"),
            });
        }
        if u == v {
            return Err(DatasetError::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("self-loop {u} {v}"),
            });
        }
        pairs.push((u, v));
    }
    Ok(pairs)
}

fn canon(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Splits the edge set into test/val/train positives and samples an equal
/// number of negatives per tier from the non-edges of the original graph.
///
/// Tier sizes: `|test| = floor(test_ratio * |E|)`, then
/// `|val| = floor(val_ratio * (|E| - |test|))`; the rest train. Negative
/// sampling rejects existing edges and already-drawn negatives, failing
/// after 100x the needed count of rejections.
pub fn split_edges(
    g: &Graph,
    test_ratio: f64,
    val_ratio: f64,
    seed: u64,
) -> Result<EdgeSplit, DatasetError> {
    if !(0.0..1.0).contains(&test_ratio)
        || !(0.0..1.0).contains(&val_ratio)
        || test_ratio + val_ratio >= 1.0
    {
        return Err(DatasetError::BadRatios {
            test_ratio,
            val_ratio,
        });
    }
    let mut edges = g.edges();
    let total = edges.len();
    let mut stream = rng::stream(seed);
    rng::shuffle(&mut stream, &mut edges);

    let n_test = (test_ratio * total as f64).floor() as usize;
    let n_val = (val_ratio * (total - n_test) as f64).floor() as usize;
    let test_pos: Vec<_> = edges[..n_test].to_vec();
    let val_pos: Vec<_> = edges[n_test..n_test + n_val].to_vec();
    let train_pos: Vec<_> = edges[n_test + n_val..].to_vec();

    let mut forbidden: HashSet<(usize, usize)> = g.edges().into_iter().collect();
    let needed = total;
    let mut rejections = 0usize;
    let budget = 100 * needed.max(1);
    let mut draw_tier = |count: usize,
                         stream: &mut rand_chacha::ChaCha8Rng,
                         forbidden: &mut HashSet<(usize, usize)>|
     -> Result<Vec<(usize, usize)>, DatasetError> {
        let mut tier = Vec::with_capacity(count);
        while tier.len() < count {
            let u = rng::uniform_u64(stream, g.num_nodes() as u64) as usize;
            let v = rng::uniform_u64(stream, g.num_nodes() as u64) as usize;
            if u == v {
                rejections += 1;
            } else {
                let pair = canon(u, v);
                if forbidden.contains(&pair) {
                    rejections += 1;
                } else {
                    forbidden.insert(pair);
                    tier.push(pair);
                    continue;
                }
            }
            if rejections >= budget {
                return Err(DatasetError::NegativeSamplingExhausted {
                    needed,
                    rejections,
                });
            }
        }
        Ok(tier)
    };
    let train_neg = draw_tier(train_pos.len(), &mut stream, &mut forbidden)?;
    let val_neg = draw_tier(val_pos.len(), &mut stream, &mut forbidden)?;
    let test_neg = draw_tier(test_pos.len(), &mut stream, &mut forbidden)?;

    let observed_graph = Graph::build(g.num_nodes(), &train_pos)?;
    Ok(EdgeSplit {
        observed_graph,
        train_pos,
        train_neg,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
        seed,
        test_ratio,
        val_ratio,
    })
}

const TIER_FILES: [(&str, fn(&EdgeSplit) -> &Vec<(usize, usize)>); 6] = [
    ("train_pos.txt", |s| &s.train_pos),
    ("train_neg.txt", |s| &s.train_neg),
    ("val_pos.txt", |s| &s.val_pos),
    ("val_neg.txt", |s| &s.val_neg),
    ("test_pos.txt", |s| &s.test_pos),
    ("test_neg.txt", |s| &s.test_neg),
];

/// Writes the six tier files plus `meta.txt` into `dir` (created if absent).
pub fn save_split(split: &EdgeSplit, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, tier) in TIER_FILES {
        let mut text = String::new();
        for &(u, v) in tier(split) {
            writeln!(text, "{u} {v}").unwrap();
        }
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    let meta = format!(
        "seed={}\ntest_ratio={}\nval_ratio={}\nnum_nodes={}\n",
        split.seed,
        split.test_ratio,
        split.val_ratio,
        split.observed_graph.num_nodes()
    );
    let path = dir.join("meta.txt");
    fs::write(&path, meta).map_err(|e| io_err(&path, e))?;
    Ok(())
}

/// Reads a split directory back, rebuilding the observed graph from the
/// training positives and validating tier disjointness. Returns the split
/// plus non-fatal warnings (for example a seed that contradicts a
/// `seed<N>` directory-name convention).
pub fn load_split(dir: impl AsRef<Path>) -> Result<(EdgeSplit, Vec<String>), DatasetError> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let mut seed = 0u64;
    let mut test_ratio = 0.0f64;
    let mut val_ratio = 0.0f64;
    let mut num_nodes = 0usize;
    for (lineno, line) in meta_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| DatasetError::Parse {
            path: meta_path.display().to_string(),
            line: lineno + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let bad = |msg: String| DatasetError::Parse {
            path: meta_path.display().to_string(),
            line: lineno + 1,
            message: msg,
        };
        match key.trim() {
            "seed" => seed = value.trim().parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
            "test_ratio" => {
                test_ratio = value.trim().parse().map_err(|_| bad(format!("bad test_ratio {value:?}")))?
            }
            "val_ratio" => {
                val_ratio = value.trim().parse().map_err(|_| bad(format!("bad val_ratio {value:?}")))?
            }
            "num_nodes" => {
                num_nodes = value.trim().parse().map_err(|_| bad(format!("bad num_nodes {value:?}")))?
            }
            other => return Err(bad(format!("unknown meta key {other:?}"))),
        }
    }

    let mut tiers: Vec<Vec<(usize, usize)>> = Vec::with_capacity(6);
    for (name, _) in TIER_FILES {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        tiers.push(parse_edge_lines(&text, &path)?);
    }
    let [train_pos, train_neg, val_pos, val_neg, test_pos, test_neg]: [Vec<(usize, usize)>; 6] =
        tiers.try_into().unwrap();

    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let positives: HashSet<(usize, usize)> = train_pos
        .iter()
        .chain(&val_pos)
        .chain(&test_pos)
        .map(|&(u, v)| canon(u, v))
        .collect();
    if positives.len() != train_pos.len() + val_pos.len() + test_pos.len() {
        return Err(DatasetError::InvalidSplit(
            "positive tiers overlap".to_string(),
        ));
    }
    for &(u, v) in train_neg.iter().chain(&val_neg).chain(&test_neg) {
        let pair = canon(u, v);
        if positives.contains(&pair) {
            return Err(DatasetError::InvalidSplit(format!(
                "negative edge ({u}, {v}) appears in a positive tier"
            )));
        }
        if !seen.insert(pair) {
            return Err(DatasetError::InvalidSplit(format!(
                "duplicate negative edge ({u}, {v})"
            )));
        }
    }

    let observed_graph = Graph::build(num_nodes, &train_pos)?;
    let mut warnings = Vec::new();
    if let Some(name) = dir.file_name().and_then(|n| n.to_str()) {
        if let Some(idx) = name.find("seed") {
            let digits: String = name[idx + 4..]
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            if let Ok(dir_seed) = digits.parse::<u64>() {
                if dir_seed != seed {
                    warnings.push(format!(
                        "directory name suggests seed {dir_seed} but meta.txt has seed {seed}"
                    ));
                }
            }
        }
    }
    Ok((
        EdgeSplit {
            observed_graph,
            train_pos,
            train_neg,
            val_pos,
            val_neg,
            test_pos,
            test_neg,
            seed,
            test_ratio,
            val_ratio,
        },
        warnings,
    ))
}

/// Loads per-node embeddings keyed by original node id, aligning rows to
/// internal ids. Every graph node must be present; rows must agree on the
/// dimension.
pub fn load_embeddings(path: impl AsRef<Path>, ids: &IdMap) -> Result<NodeFeatures, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let n = ids.len();
    let mut dim = None;
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| DatasetError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: msg,
        };
        let mut it = line.split_whitespace();
        let node: usize = it
            .next()
            .unwrap()
            .parse()
            .map_err(|_| bad(format!("bad node id in {raw:?}")))?;
        let values: Result<Vec<f64>, _> = it.map(|t| t.parse::<f64>()).collect();
        let values = values.map_err(|_| bad(format!("bad float in {raw:?}")))?;
        if values.is_empty() {
            return Err(bad("row has no feature values".to_string()));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(bad(format!(
                    "ragged row: expected {d} values, got {}",
                    values.len()
                )))
            }
            _ => {}
        }
        let internal = ids.internal(node).ok_or(DatasetError::UnknownNode {
            path: path.display().to_string(),
            node,
        })?;
        rows[internal] = Some(values);
    }
    let dim = dim.unwrap_or(0);
    let mut features = NodeFeatures::zeros(n, dim);
    for v in 0..n {
        match &rows[v] {
            Some(row) => features.row_mut(v).copy_from_slice(row),
            None => {
                return Err(DatasetError::MissingNode {
                    path: path.display().to_string(),
                    node: ids.original(v),
                })
            }
        }
    }
    Ok(features)
}

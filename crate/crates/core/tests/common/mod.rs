//! Invariance checks shared by the property suite and the acceptance
//! gate. Each check runs the real feature pipeline (GCN states,
//! attention scores, walk profiles) on a small subgraph and reports the
//! first violated equality.
#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use walkpool::autodiff::{glorot, ModelParams, Tape, TapedParams};
use walkpool::graph::{DenseMatrix, Graph};
use walkpool::metrics;
use walkpool::rng;
use walkpool::subgraph::{make_variants, EnclosingSubgraph, Label, SubgraphVariant};
use walkpool::trainer::node_features_for;
use walkpool::walkpool::{attention_transition, feature_len, wp_features, FeatureMask};

/// Wraps an edge list as a subgraph with the candidate pair at local
/// ids (0, 1).
pub fn variant_from_edges(n: usize, edges: &[(usize, usize)]) -> SubgraphVariant {
    let g = Graph::build(n, edges).expect("test edges are valid");
    make_variants(EnclosingSubgraph {
        local_graph: g,
        focal: (0, 1),
        node_map: (0..n).collect(),
        label: Label::Positive,
        hop_of: vec![0; n],
        k_hops: 1,
    })
}

/// Random edge set over `n` nodes, excluding the candidate pair itself.
pub fn random_edges(n: usize, density: f64, stream: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if (u, v) != (0, 1) && rng::unit_f64(stream) < density {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn small_params(z0_dim: usize, tau_c: usize, stream: &mut ChaCha8Rng) -> ModelParams {
    let z_cols = z0_dim + 4 + 4;
    let f = feature_len(2, tau_c, FeatureMask::all());
    ModelParams::init(
        &[z0_dim, 4, 4],
        &[z_cols, 5, 4],
        2,
        &[f, 4, 1],
        stream,
    )
}

fn full_features(
    var: &SubgraphVariant,
    z0: &DenseMatrix,
    params: &ModelParams,
    tau_c: usize,
) -> Vec<f64> {
    let tape = Tape::new();
    let taped = TapedParams::mount(params, &tape);
    let z = node_features_for(&tape, var, z0, &taped);
    tape.value(wp_features(&tape, var, z, &taped, tau_c, FeatureMask::all()))
        .data()
        .to_vec()
}

/// Relabeling the candidate endpoints (0 <-> 1) must leave every
/// feature bit-identical, GCN stack included.
pub fn check_focal_swap(
    n: usize,
    edges: &[(usize, usize)],
    tau_c: usize,
    seed: u64,
) -> Result<(), String> {
    let mut stream = rng::stream(seed);
    let z0_dim = 3;
    let params = small_params(z0_dim, tau_c, &mut stream);
    let z0 = glorot(n, z0_dim, &mut stream);

    let swap = |v: usize| match v {
        0 => 1,
        1 => 0,
        other => other,
    };
    let swapped: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (swap(u), swap(v))).collect();
    let mut z0_swapped = z0.clone();
    for c in 0..z0_dim {
        let tmp = z0_swapped.get(0, c);
        z0_swapped.set(0, c, z0_swapped.get(1, c));
        z0_swapped.set(1, c, tmp);
    }

    let a = full_features(&variant_from_edges(n, edges), &z0, &params, tau_c);
    let b = full_features(&variant_from_edges(n, &swapped), &z0_swapped, &params, tau_c);
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if x.to_bits() != y.to_bits() {
            return Err(format!(
                "feature {i} differs after focal swap: {x:?} vs {y:?}"
            ));
        }
    }
    Ok(())
}

/// Renaming non-focal nodes must leave the feature vector unchanged up
/// to accumulation-order noise.
pub fn check_nonfocal_permutation(
    n: usize,
    edges: &[(usize, usize)],
    tau_c: usize,
    seed: u64,
    perm_seed: u64,
) -> Result<(), String> {
    let mut stream = rng::stream(seed);
    let z0_dim = 3;
    let params = small_params(z0_dim, tau_c, &mut stream);
    let z0 = glorot(n, z0_dim, &mut stream);

    let mut perm: Vec<usize> = (0..n).collect();
    let mut pstream = rng::stream(perm_seed);
    rng::shuffle(&mut pstream, &mut perm[2..]);

    let renamed: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let mut z0_renamed = DenseMatrix::zeros(n, z0_dim);
    for v in 0..n {
        z0_renamed.row_mut(perm[v]).copy_from_slice(z0.row(v));
    }

    let a = full_features(&variant_from_edges(n, edges), &z0, &params, tau_c);
    let b = full_features(&variant_from_edges(n, &renamed), &z0_renamed, &params, tau_c);
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(format!(
                "feature {i} moved under a non-focal renaming: {x} vs {y}"
            ));
        }
    }
    Ok(())
}

/// Both transition matrices must be row-stochastic on their neighbor
/// support and zero elsewhere; isolated rows are all zero.
pub fn check_row_stochastic(n: usize, edges: &[(usize, usize)], seed: u64) -> Result<(), String> {
    let mut stream = rng::stream(seed);
    let var = variant_from_edges(n, edges);
    let tape = Tape::new();
    let omega = tape.leaf(glorot(n, n, &mut stream));
    let (p_plus, p_minus) = attention_transition(&tape, omega, &var);
    for (name, t, adj) in [
        ("plus", p_plus, &var.adjacency_plus),
        ("minus", p_minus, &var.adjacency_minus),
    ] {
        let p = tape.value(t);
        for v in 0..n {
            let nbrs = adj.neighbors(v);
            let mut sum = 0.0;
            for u in 0..n {
                let x = p.get(v, u);
                if nbrs.contains(&u) {
                    if !(x > 0.0 && x <= 1.0) {
                        return Err(format!("P{name}[{v},{u}] = {x} outside (0, 1]"));
                    }
                    sum += x;
                } else if x != 0.0 {
                    return Err(format!("P{name}[{v},{u}] = {x} off the neighbor support"));
                }
            }
            if nbrs.is_empty() {
                if sum != 0.0 {
                    return Err(format!("isolated row {v} of P{name} sums to {sum}"));
                }
            } else if (sum - 1.0).abs() > 1e-12 {
                return Err(format!("row {v} of P{name} sums to {sum}"));
            }
        }
    }
    Ok(())
}

/// AUC must be invariant under strictly increasing score transforms.
/// Scores arrive as integer grid points so the affine map is exact and
/// ties survive the transform unchanged.
pub fn check_auc_monotone(
    pos_grid: &[i32],
    neg_grid: &[i32],
    scale_pow: i32,
    offset_grid: i32,
    nonlinear: bool,
) -> Result<(), String> {
    let to_score = |k: i32| k as f64 * 1e-6;
    let map = |x: f64| -> f64 {
        let y = x * (scale_pow as f64).exp2() + offset_grid as f64 / 1024.0;
        if nonlinear {
            y.atan()
        } else {
            y
        }
    };
    let pos: Vec<f64> = pos_grid.iter().map(|&k| to_score(k)).collect();
    let neg: Vec<f64> = neg_grid.iter().map(|&k| to_score(k)).collect();
    let mapped_pos: Vec<f64> = pos.iter().map(|&x| map(x)).collect();
    let mapped_neg: Vec<f64> = neg.iter().map(|&x| map(x)).collect();
    let base = metrics::auc(&pos, &neg).map_err(|e| e.to_string())?;
    let moved = metrics::auc(&mapped_pos, &mapped_neg).map_err(|e| e.to_string())?;
    if base.to_bits() != moved.to_bits() {
        return Err(format!("auc moved from {base} to {moved}"));
    }
    Ok(())
}

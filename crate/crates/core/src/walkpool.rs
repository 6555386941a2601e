//! Walk-profile pooling: attention-derived random-walk transition
//! matrices over the two variants of an enclosing subgraph, summarized
//! into a fixed-length feature vector for the link classifier.
//!
//! For each attention head, node states z are projected by a Q and a K
//! MLP and scored as omega[x, y] = (Q z_x) . (K z_y) / sqrt(F), F being
//! the projection width. Masking omega to each variant's edges and
//! softmax-normalizing per row yields transition matrices P+ and P-.
//! The profile at walk length tau collects, per variant, the return
//! probabilities of the two focal nodes ([P^tau]00 + [P^tau]11), the
//! cross probabilities ([P^tau]01 + [P^tau]10), and the trace gap
//! tr((P+)^tau) - tr((P-)^tau).
//!
//! The per-head feature layout is: the symmetrized raw focal score
//! omega[0,1] + omega[1,0], then for each tau = 2..=tau_c the block
//! [node+, node-, link+, link-, trace gap]. Heads are concatenated in
//! order. `FeatureMask` drops whole groups from the layout for
//! ablations.
//!
//! Only rows 0 and 1 of the powers enter the node and link entries, so
//! they are computed as 2 x n row chains rather than full powers. The
//! trace gap never needs tr(P^tau) itself: P+ and P- differ only in
//! rows 0 and 1, so (P+)^tau - (P-)^tau expands over placements of the
//! rank-2 difference, and each placement's trace reduces to a product
//! of 2 x 2 matrices M_k = U (P-)^k E^T where U holds the two changed
//! rows' difference and E selects rows 0 and 1. `wp_features` follows
//! that route on the tape; `walk_profile_features` keeps the direct
//! full-power form as the reference the fast path is checked against.

use crate::autodiff::{mlp_forward, Tape, TapedParams, Tensor};
use crate::graph::{matrix_power, DenseMatrix};
use crate::subgraph::SubgraphVariant;
use std::collections::BTreeMap;

/// Which feature groups enter the vector. Group order in the layout is
/// fixed; masking removes a group without reordering the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMask {
    pub omega: bool,
    pub node: bool,
    pub link: bool,
    pub graph: bool,
}

impl FeatureMask {
    pub fn all() -> FeatureMask {
        FeatureMask {
            omega: true,
            node: true,
            link: true,
            graph: true,
        }
    }

    /// Mask with the named groups dropped; unknown names are rejected.
    pub fn drop_groups(names: &[String]) -> Result<FeatureMask, String> {
        let mut mask = FeatureMask::all();
        for name in names {
            match name.as_str() {
                "omega" => mask.omega = false,
                "node" => mask.node = false,
                "link" => mask.link = false,
                "graph" => mask.graph = false,
                other => return Err(format!("unknown feature group '{other}'")),
            }
        }
        Ok(mask)
    }

    /// Entries contributed per head per tau step (both variants).
    fn per_tau(&self) -> usize {
        let mut n = 0;
        if self.node {
            n += 2;
        }
        if self.link {
            n += 2;
        }
        if self.graph {
            n += 1;
        }
        n
    }
}

impl Default for FeatureMask {
    fn default() -> FeatureMask {
        FeatureMask::all()
    }
}

/// Length of the pooled feature vector.
pub fn feature_len(heads: usize, tau_c: usize, mask: FeatureMask) -> usize {
    assert!(tau_c >= 2, "tau_c must be at least 2, got {tau_c}");
    let omega = if mask.omega { 1 } else { 0 };
    heads * (omega + (tau_c - 1) * mask.per_tau())
}

/// Dense attention scores for one head: omega = Q(z) K(z)^T / sqrt(F)
/// over all ordered node pairs, F being the projection width.
pub fn edge_scores(
    tape: &Tape,
    z: Tensor,
    q_mlp: &[(Tensor, Tensor)],
    k_mlp: &[(Tensor, Tensor)],
) -> Tensor {
    let q = mlp_forward(tape, q_mlp, z);
    let k = mlp_forward(tape, k_mlp, z);
    assert_eq!(
        q.cols, k.cols,
        "Q and K projection widths differ: {} vs {}",
        q.cols, k.cols
    );
    let raw = tape.matmul(q, tape.transpose(k));
    tape.scalar_mul(raw, 1.0 / (q.cols as f64).sqrt())
}

/// Transition matrices for both variants: the same scores, row-softmaxed
/// over each variant's neighbor sets.
pub fn attention_transition(
    tape: &Tape,
    omega: Tensor,
    variant: &SubgraphVariant,
) -> (Tensor, Tensor) {
    let p_plus = tape.row_masked_softmax(omega, &variant.adjacency_plus);
    let p_minus = tape.row_masked_softmax(omega, &variant.adjacency_minus);
    (p_plus, p_minus)
}

/// Walk-profile summary of one transition matrix, for tau = 2..=tau_c.
/// Index i holds the value at tau = i + 2.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkProfile {
    pub tau_c: usize,
    /// [P^tau]00 + [P^tau]11
    pub node: Vec<f64>,
    /// [P^tau]01 + [P^tau]10
    pub link: Vec<f64>,
    /// tr(P^tau)
    pub graph: Vec<f64>,
}

/// Direct full-power reference: raises `p` to each power and reads the
/// focal entries and trace.
pub fn walk_profile_features(p: &DenseMatrix, tau_c: usize) -> WalkProfile {
    assert!(tau_c >= 2, "tau_c must be at least 2, got {tau_c}");
    assert!(p.is_square(), "transition matrix must be square");
    assert!(p.rows() >= 2, "need both focal nodes present");
    let mut node = Vec::with_capacity(tau_c - 1);
    let mut link = Vec::with_capacity(tau_c - 1);
    let mut graph = Vec::with_capacity(tau_c - 1);
    for tau in 2..=tau_c {
        let pt = matrix_power(p, tau).expect("square power");
        node.push(pt.get(0, 0) + pt.get(1, 1));
        link.push(pt.get(0, 1) + pt.get(1, 0));
        graph.push(pt.trace());
    }
    WalkProfile {
        tau_c,
        node,
        link,
        graph,
    }
}

/// Focal diagonal and cross entries of powers 2..=tau_c, via a 2 x n
/// row chain: R_1 = rows {0,1} of P, R_tau = R_{tau-1} P.
struct RowChainEntries {
    /// (node, link) per tau, index tau - 2.
    per_tau: Vec<(Tensor, Tensor)>,
    /// rows {0,1} of P (the tau = 1 chain head).
    head: Tensor,
}

fn row_chain_entries(tape: &Tape, p: Tensor, tau_c: usize) -> RowChainEntries {
    let head = tape.select_rows(p, &[0, 1]);
    let mut per_tau = Vec::with_capacity(tau_c - 1);
    let mut r = head;
    for _ in 2..=tau_c {
        r = tape.matmul(r, p);
        let node = tape.add(tape.entry(r, 0, 0), tape.entry(r, 1, 1));
        let link = tape.add(tape.entry(r, 0, 1), tape.entry(r, 1, 0));
        per_tau.push((node, link));
    }
    RowChainEntries { per_tau, head }
}

/// Trace gaps tr((P+)^tau) - tr((P-)^tau) for tau = 2..=tau_c without
/// forming any matrix power. P+ = P- + E^T U with U the 2 x n row
/// difference, so the gap expands over the nonempty subsets of factor
/// positions replaced by E^T U; the trace of each placement collapses to
/// tr(M_{g1} ... M_{gm}) over the 2 x 2 matrices M_k = U (P-)^k E^T,
/// with g the cyclic gaps between chosen positions. Subsets are
/// enumerated in ascending bitmask order.
fn trace_gaps(
    tape: &Tape,
    plus_head: Tensor,
    minus_head: Tensor,
    p_minus: Tensor,
    tau_c: usize,
) -> Vec<Tensor> {
    let u = tape.sub(plus_head, minus_head);
    let mut m = Vec::with_capacity(tau_c);
    let mut chain = u;
    m.push(tape.select_cols(chain, &[0, 1]));
    for _ in 1..tau_c {
        chain = tape.matmul(chain, p_minus);
        m.push(tape.select_cols(chain, &[0, 1]));
    }
    let mut gaps = Vec::with_capacity(tau_c - 1);
    for t in 2..=tau_c {
        // Rotating the replaced positions cyclically rotates the factor
        // product, which leaves the trace unchanged, so only one subset
        // per rotation class is materialized, weighted by the class size.
        let mut classes: BTreeMap<u32, u32> = BTreeMap::new();
        for mask in 1u32..(1u32 << t) {
            let canon = (0..t as u32)
                .map(|s| (mask >> s | mask << (t as u32 - s)) & ((1 << t) - 1))
                .min()
                .expect("t >= 2");
            *classes.entry(canon).or_insert(0) += 1;
        }
        let mut total: Option<Tensor> = None;
        for (mask, weight) in classes {
            let positions: Vec<usize> = (0..t).filter(|q| mask >> q & 1 == 1).collect();
            let count = positions.len();
            let gap_after = |i: usize| {
                if i + 1 < count {
                    positions[i + 1] - positions[i] - 1
                } else {
                    t - 1 - positions[count - 1] + positions[0]
                }
            };
            let mut prod = m[gap_after(0)];
            for i in 1..count {
                prod = tape.matmul(prod, m[gap_after(i)]);
            }
            // the product above starts after the first replaced factor,
            // so its trailing gap wraps around to close the cycle
            let mut term = tape.trace(prod);
            if weight > 1 {
                term = tape.scalar_mul(term, weight as f64);
            }
            total = Some(match total {
                Some(acc) => tape.add(acc, term),
                None => term,
            });
        }
        gaps.push(total.expect("at least one subset"));
    }
    gaps
}

/// Pooled feature vector (1 x feature_len) for one subgraph, given node
/// states `z` shared by all heads.
pub fn wp_features(
    tape: &Tape,
    variant: &SubgraphVariant,
    z: Tensor,
    taped: &TapedParams,
    tau_c: usize,
    mask: FeatureMask,
) -> Tensor {
    assert!(tau_c >= 2, "tau_c must be at least 2, got {tau_c}");
    assert_eq!(
        taped.q_mlps.len(),
        taped.k_mlps.len(),
        "Q and K head counts differ"
    );
    let mut parts: Vec<Tensor> = Vec::new();
    for (q_mlp, k_mlp) in taped.q_mlps.iter().zip(&taped.k_mlps) {
        let omega = edge_scores(tape, z, q_mlp, k_mlp);
        if mask.omega {
            parts.push(tape.add(tape.entry(omega, 0, 1), tape.entry(omega, 1, 0)));
        }
        let (p_plus, p_minus) = attention_transition(tape, omega, variant);
        let plus = row_chain_entries(tape, p_plus, tau_c);
        let minus = row_chain_entries(tape, p_minus, tau_c);
        let gaps = if mask.graph {
            trace_gaps(tape, plus.head, minus.head, p_minus, tau_c)
        } else {
            Vec::new()
        };
        for i in 0..tau_c - 1 {
            let (node_p, link_p) = plus.per_tau[i];
            let (node_m, link_m) = minus.per_tau[i];
            if mask.node {
                parts.push(node_p);
                parts.push(node_m);
            }
            if mask.link {
                parts.push(link_p);
                parts.push(link_m);
            }
            if mask.graph {
                parts.push(gaps[i]);
            }
        }
    }
    assert!(!parts.is_empty(), "feature mask drops every group");
    let features = tape.concat_cols(&parts);
    debug_assert_eq!(
        features.cols,
        feature_len(taped.q_mlps.len(), tau_c, mask)
    );
    let check = tape.value(features);
    for &v in check.data() {
        assert!(v.is_finite(), "non-finite walk feature {v}");
    }
    features
}

/// Classifier head: MLP over pooled features, squashed to (0, 1).
/// Accepts a batch, one feature row per example.
pub fn classify(tape: &Tape, features: Tensor, classifier: &[(Tensor, Tensor)]) -> Tensor {
    let logits = mlp_forward(tape, classifier, features);
    assert_eq!(logits.cols, 1, "classifier must end in a single output");
    tape.sigmoid(logits)
}

//! Classical walk-based link scores: common neighbors, Adamic-Adar,
//! truncated Katz, and rooted PageRank.
//!
//! Every score is exactly symmetric in the pair: computations run on the
//! canonical (smaller, larger) orientation, so `score(i, j)` and
//! `score(j, i)` are the same floats.

use crate::graph::Graph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("pair endpoints must differ, got ({0}, {0})")]
    EqualEndpoints(usize),
    #[error("node id {node} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("rooted pagerank did not converge within {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("unknown heuristic method {0:?}")]
    UnknownMethod(String),
}

/// Scored node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicScore {
    pub pair: (usize, usize),
    pub value: f64,
}

/// Method selector for [`score_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    CommonNeighbors,
    AdamicAdar,
    Katz,
    RootedPageRank,
}

impl std::str::FromStr for Method {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Method, HeuristicError> {
        match s {
            "cn" => Ok(Method::CommonNeighbors),
            "aa" => Ok(Method::AdamicAdar),
            "katz" => Ok(Method::Katz),
            "pr" => Ok(Method::RootedPageRank),
            other => Err(HeuristicError::UnknownMethod(other.to_string())),
        }
    }
}

/// Tunables for Katz and rooted PageRank; defaults are beta 0.001 with 32
/// walk lengths, restart 0.85 with power iteration to 1e-8.
#[derive(Debug, Clone)]
pub struct HeuristicParams {
    pub beta: f64,
    pub l_max: usize,
    pub alpha: f64,
    pub iters: usize,
    pub tol: f64,
}

impl Default for HeuristicParams {
    fn default() -> HeuristicParams {
        HeuristicParams {
            beta: 0.001,
            l_max: 32,
            alpha: 0.85,
            iters: 1000,
            tol: 1e-8,
        }
    }
}

fn check_pair(g: &Graph, i: usize, j: usize) -> Result<(usize, usize), HeuristicError> {
    for node in [i, j] {
        if node >= g.num_nodes() {
            return Err(HeuristicError::NodeOutOfRange {
                node,
                num_nodes: g.num_nodes(),
            });
        }
    }
    if i == j {
        return Err(HeuristicError::EqualEndpoints(i));
    }
    Ok(if i < j { (i, j) } else { (j, i) })
}

fn common_iter<'a>(g: &'a Graph, i: usize, j: usize) -> impl Iterator<Item = usize> + 'a {
    let (mut a, mut b) = (g.neighbors(i).iter().peekable(), g.neighbors(j).iter().peekable());
    std::iter::from_fn(move || loop {
        let (&&x, &&y) = (a.peek()?, b.peek()?);
        match x.cmp(&y) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                a.next();
                b.next();
                return Some(x);
            }
        }
    })
}

/// Size of the shared neighborhood of `i` and `j`.
pub fn common_neighbors(g: &Graph, i: usize, j: usize) -> Result<f64, HeuristicError> {
    let (i, j) = check_pair(g, i, j)?;
    Ok(common_iter(g, i, j).count() as f64)
}

/// Sum over shared neighbors z of 1 / ln(degree(z)). A shared neighbor of
/// two distinct nodes has degree at least 2, so every term is finite.
pub fn adamic_adar(g: &Graph, i: usize, j: usize) -> Result<f64, HeuristicError> {
    let (i, j) = check_pair(g, i, j)?;
    let mut total = 0.0;
    for z in common_iter(g, i, j) {
        total += 1.0 / (g.degree(z) as f64).ln();
    }
    Ok(total)
}

/// Truncated Katz index: sum over l = 1..l_max of beta^l times the number
/// of length-l walks from i to j. The series is evaluated by sparse
/// vector-matrix chains from the smaller endpoint.
pub fn katz(
    g: &Graph,
    i: usize,
    j: usize,
    beta: f64,
    l_max: usize,
) -> Result<f64, HeuristicError> {
    let (i, j) = check_pair(g, i, j)?;
    let counts = walk_count_row(g, i, l_max);
    let mut total = 0.0;
    let mut scale = 1.0;
    for row in counts.iter() {
        scale *= beta;
        total += scale * row[j];
    }
    Ok(total)
}

/// True when the truncated Katz series is at risk of divergence for this
/// graph (beta times the max-degree bound on the spectral radius reaches 1).
pub fn katz_diverges(g: &Graph, beta: f64) -> bool {
    beta * g.max_degree() as f64 >= 1.0
}

/// Walk-count rows [A^l]_{source, .} for l = 1..=l_max.
fn walk_count_row(g: &Graph, source: usize, l_max: usize) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let mut rows = Vec::with_capacity(l_max);
    let mut current = vec![0.0; n];
    current[source] = 1.0;
    for _ in 0..l_max {
        let mut next = vec![0.0; n];
        for v in 0..n {
            let mut acc = 0.0;
            for &u in g.neighbors(v) {
                acc += current[u];
            }
            next[v] = acc;
        }
        rows.push(next.clone());
        current = next;
    }
    rows
}

/// Symmetrized rooted PageRank: pi_i(j) + pi_j(i), each stationary vector
/// solved by power iteration on pi = alpha P^T pi + (1 - alpha) e_root with
/// P the uniform transition matrix. Rows of isolated nodes leak mass, the
/// same convention the dense-solve formulation uses.
pub fn rooted_pagerank(
    g: &Graph,
    i: usize,
    j: usize,
    alpha: f64,
    iters: usize,
    tol: f64,
) -> Result<f64, HeuristicError> {
    let (i, j) = check_pair(g, i, j)?;
    let pi_i = pagerank_vector(g, i, alpha, iters, tol)?;
    let pi_j = pagerank_vector(g, j, alpha, iters, tol)?;
    Ok(pi_i[j] + pi_j[i])
}

fn pagerank_vector(
    g: &Graph,
    root: usize,
    alpha: f64,
    iters: usize,
    tol: f64,
) -> Result<Vec<f64>, HeuristicError> {
    let n = g.num_nodes();
    let inv_deg: Vec<f64> = (0..n)
        .map(|v| {
            let d = g.degree(v);
            if d == 0 {
                0.0
            } else {
                1.0 / d as f64
            }
        })
        .collect();
    let mut pi = vec![0.0; n];
    pi[root] = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for v in 0..n {
            let mut acc = 0.0;
            for &u in g.neighbors(v) {
                acc += pi[u] * inv_deg[u];
            }
            next[v] = alpha * acc;
        }
        next[root] += 1.0 - alpha;
        residual = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, |acc, d| acc + d);
        pi = next;
        if residual < tol {
            return Ok(pi);
        }
    }
    Err(HeuristicError::NoConvergence { iters, residual })
}

/// Scores a pair list with one method; output order matches input order.
/// Katz and PageRank reuse per-root solves across pairs sharing an
/// endpoint.
pub fn score_pairs(
    g: &Graph,
    method: Method,
    pairs: &[(usize, usize)],
    params: &HeuristicParams,
) -> Result<Vec<HeuristicScore>, HeuristicError> {
    let mut out = Vec::with_capacity(pairs.len());
    match method {
        Method::CommonNeighbors => {
            for &(i, j) in pairs {
                out.push(HeuristicScore {
                    pair: (i, j),
                    value: common_neighbors(g, i, j)?,
                });
            }
        }
        Method::AdamicAdar => {
            for &(i, j) in pairs {
                out.push(HeuristicScore {
                    pair: (i, j),
                    value: adamic_adar(g, i, j)?,
                });
            }
        }
        Method::Katz => {
            let mut cache: std::collections::BTreeMap<usize, Vec<Vec<f64>>> =
                std::collections::BTreeMap::new();
            for &(i, j) in pairs {
                let (a, b) = check_pair(g, i, j)?;
                let rows = cache
                    .entry(a)
                    .or_insert_with(|| walk_count_row(g, a, params.l_max));
                let mut total = 0.0;
                let mut scale = 1.0;
                for row in rows.iter() {
                    scale *= params.beta;
                    total += scale * row[b];
                }
                out.push(HeuristicScore {
                    pair: (i, j),
                    value: total,
                });
            }
        }
        Method::RootedPageRank => {
            let mut cache: std::collections::BTreeMap<usize, Vec<f64>> =
                std::collections::BTreeMap::new();
            for &(i, j) in pairs {
                let (a, b) = check_pair(g, i, j)?;
                if !cache.contains_key(&a) {
                    let v = pagerank_vector(g, a, params.alpha, params.iters, params.tol)?;
                    cache.insert(a, v);
                }
                if !cache.contains_key(&b) {
                    let v = pagerank_vector(g, b, params.alpha, params.iters, params.tol)?;
                    cache.insert(b, v);
                }
                out.push(HeuristicScore {
                    pair: (i, j),
                    value: cache[&a][b] + cache[&b][a],
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn triangle() -> Graph {
        Graph::build(3, &[(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn cn_cases() {
        assert_eq!(common_neighbors(&triangle(), 0, 1).unwrap(), 1.0);
        let path = Graph::build(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(common_neighbors(&path, 0, 2).unwrap(), 1.0);
        let disjoint = Graph::build(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(common_neighbors(&disjoint, 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn aa_cases() {
        let path = Graph::build(3, &[(0, 1), (1, 2)]).unwrap();
        let got = adamic_adar(&path, 0, 2).unwrap();
        assert!((got - 1.0 / 2.0f64.ln()).abs() < 1e-12);
        let disjoint = Graph::build(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(adamic_adar(&disjoint, 0, 2).unwrap(), 0.0);
        let mut k4 = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                k4.push((u, v));
            }
        }
        let k4 = Graph::build(4, &k4).unwrap();
        let got = adamic_adar(&k4, 0, 1).unwrap();
        assert!((got - 2.0 / 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn katz_triangle_closed_form() {
        let got = katz(&triangle(), 0, 1, 0.1, 3).unwrap();
        assert!((got - 0.113).abs() < 1e-12);
        assert_eq!(katz(&triangle(), 0, 1, 0.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn katz_divergence_flag() {
        assert!(katz_diverges(&triangle(), 0.5));
        assert!(!katz_diverges(&triangle(), 0.1));
    }

    #[test]
    fn pagerank_symmetry_on_k3() {
        let g = triangle();
        let p = HeuristicParams::default();
        let s01 = rooted_pagerank(&g, 0, 1, p.alpha, p.iters, p.tol).unwrap();
        let s02 = rooted_pagerank(&g, 0, 2, p.alpha, p.iters, p.tol).unwrap();
        let s12 = rooted_pagerank(&g, 1, 2, p.alpha, p.iters, p.tol).unwrap();
        assert!((s01 - s02).abs() < 1e-9);
        assert!((s01 - s12).abs() < 1e-9);
    }

    #[test]
    fn pagerank_disconnected_pair_zero() {
        let g = Graph::build(4, &[(0, 1), (2, 3)]).unwrap();
        let p = HeuristicParams::default();
        let got = rooted_pagerank(&g, 0, 2, p.alpha, p.iters, p.tol).unwrap();
        assert_eq!(got, 0.0);
    }

    #[test]
    fn scores_exactly_symmetric() {
        let g = Graph::build(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 4), (2, 5)]).unwrap();
        let p = HeuristicParams::default();
        for (i, j) in [(0, 2), (1, 3), (0, 5)] {
            assert_eq!(
                common_neighbors(&g, i, j).unwrap(),
                common_neighbors(&g, j, i).unwrap()
            );
            assert_eq!(adamic_adar(&g, i, j).unwrap(), adamic_adar(&g, j, i).unwrap());
            assert_eq!(
                katz(&g, i, j, 0.05, 16).unwrap(),
                katz(&g, j, i, 0.05, 16).unwrap()
            );
            let a = rooted_pagerank(&g, i, j, p.alpha, p.iters, p.tol).unwrap();
            let b = rooted_pagerank(&g, j, i, p.alpha, p.iters, p.tol).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn score_pairs_matches_singles() {
        let g = triangle();
        let p = HeuristicParams::default();
        let pairs = [(0, 1), (1, 2)];
        for method in [
            Method::CommonNeighbors,
            Method::AdamicAdar,
            Method::Katz,
            Method::RootedPageRank,
        ] {
            let batch = score_pairs(&g, method, &pairs, &p).unwrap();
            assert_eq!(batch.len(), 2);
            assert_eq!(batch[0].pair, (0, 1));
        }
        let batch = score_pairs(&g, Method::Katz, &pairs, &p).unwrap();
        assert_eq!(
            batch[0].value,
            katz(&g, 0, 1, p.beta, p.l_max).unwrap()
        );
    }

    #[test]
    fn rejects_equal_endpoints() {
        assert!(matches!(
            common_neighbors(&triangle(), 1, 1),
            Err(HeuristicError::EqualEndpoints(1))
        ));
    }
}

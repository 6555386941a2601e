//! Ranking metrics for link prediction: AUC, ranking average precision, and
//! thresholded precision at 0.5.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{side} score list is empty")]
    EmptySide { side: &'static str },
    #[error("non-finite score {value}")]
    NonFinite { value: f64 },
}

/// Bundle of all three metrics over one (positives, negatives) scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub auc: f64,
    pub ap: f64,
    pub precision_at_half: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check(pos: &[f64], neg: &[f64]) -> Result<(), MetricsError> {
    if pos.is_empty() {
        return Err(MetricsError::EmptySide { side: "positive" });
    }
    if neg.is_empty() {
        return Err(MetricsError::EmptySide { side: "negative" });
    }
    for &s in pos.iter().chain(neg.iter()) {
        if !s.is_finite() {
            return Err(MetricsError::NonFinite { value: s });
        }
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties at
/// half credit. Computed by rank summation in O(n log n); equal to the
/// brute-force pairwise count exactly (all intermediates are multiples of
/// one half below 2^53).
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, MetricsError> {
    check(pos, neg)?;
    let mut scored: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Sum of average ranks (1-based) over positives, tie groups share rank.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0 == scored[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &scored[i..j] {
            if item.1 {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

/// Ranking average precision: mean over positives of precision at that
/// positive's rank under descending score order. Ties are broken with
/// negatives first, so the value is a lower bound under ties.
pub fn average_precision(pos: &[f64], neg: &[f64]) -> Result<f64, MetricsError> {
    check(pos, neg)?;
    let mut scored: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    // Descending score; at equal score negatives come first.
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| a.1.cmp(&b.1))
    });
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank0, &(_, is_pos)) in scored.iter().enumerate() {
        if is_pos {
            hits += 1;
            total += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(total / pos.len() as f64)
}

/// Precision of the "score exceeds 0.5" decision rule: TP / (TP + FP),
/// zero when nothing clears the threshold.
pub fn precision_at_half(pos: &[f64], neg: &[f64]) -> Result<f64, MetricsError> {
    check(pos, neg)?;
    let tp = pos.iter().filter(|&&s| s > 0.5).count();
    let fp = neg.iter().filter(|&&s| s > 0.5).count();
    if tp + fp == 0 {
        return Ok(0.0);
    }
    Ok(tp as f64 / (tp + fp) as f64)
}

/// Computes all metrics at once.
pub fn evaluate(pos: &[f64], neg: &[f64]) -> Result<EvalResult, MetricsError> {
    Ok(EvalResult {
        auc: auc(pos, neg)?,
        ap: average_precision(pos, neg)?,
        precision_at_half: precision_at_half(pos, neg)?,
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

//! Deterministic top-k selection: descending score, ties to the lower id.

use std::cmp::Ordering;

use crate::Real;

fn by_score_then_id(a: &(u32, Real), b: &(u32, Real)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best `(id, score)` pairs in ranked order.
pub fn top_k_pairs(mut pairs: Vec<(u32, Real)>, k: usize) -> Vec<(u32, Real)> {
    if k == 0 {
        return Vec::new();
    }
    if k < pairs.len() {
        pairs.select_nth_unstable_by(k - 1, by_score_then_id);
        pairs.truncate(k);
    }
    pairs.sort_unstable_by(by_score_then_id);
    pairs
}

/// The `k` best entries of a dense score vector, ids being positions.
pub fn top_k(values: &[Real], k: usize) -> Vec<(u32, Real)> {
    top_k_pairs(values.iter().enumerate().map(|(i, &v)| (i as u32, v)).collect(), k)
}

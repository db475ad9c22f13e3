//! Property (A): every `Q` rows of `Q_K` are linearly independent.

use itertools::Itertools;
use serde::Serialize;

use crate::channel::{ChannelConfig, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::pilot::required_k_cardinality;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest `L` for which [`find_k`] enumerates every candidate set.
pub const EXHAUSTIVE_MAX_L: usize = 12;

const SEARCH_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyAReport {
    pub holds: bool,
    /// 1-based index set tested.
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    /// Lexicographically first failing `Q`-subset, 1-based.
    pub violating_subset: Option<Vec<usize>>,
    /// Smallest `σ_min` over all tested `Q × Q` minors.
    pub min_singular_value: f64,
    /// Smallest `σ_min / σ_max(Q_K)`.
    pub min_ratio: f64,
    pub minors_tested: usize,
}

fn check_index_set(qmat: &CorrelationMatrix, k: &[usize]) -> Result<()> {
    let l = qmat.l();
    if let Some(&bad) = k.iter().find(|&&i| i == 0 || i > l) {
        return Err(Error::IndexOutOfRange { index: bad, bound: l });
    }
    if k.len() < qmat.q() {
        return Err(Error::IndexSetTooSmall {
            size: k.len(),
            q: qmat.q(),
        });
    }
    Ok(())
}

/// Tests all `C(|K|, Q)` row subsets of `Q_K` (K is 1-based). A subset fails
/// when its smallest singular value is at most `tol · σ_max(Q_K)`.
pub fn verify_property_a(qmat: &CorrelationMatrix, k: &[usize], tol: f64) -> Result<PropertyAReport> {
    check_index_set(qmat, k)?;
    let zero_based: Vec<usize> = k.iter().map(|i| i - 1).collect();
    let sigma_top = linalg::singular_values(&qmat.rows(&zero_based))
        .first()
        .copied()
        .unwrap_or(0.0);
    let mut min_sv = f64::INFINITY;
    let mut violating = None;
    let mut tested = 0;
    for subset in zero_based.iter().copied().combinations(qmat.q()) {
        tested += 1;
        let sv = linalg::singular_values(&qmat.rows(&subset));
        let smallest = sv.last().copied().unwrap_or(0.0);
        min_sv = min_sv.min(smallest);
        if violating.is_none() && smallest <= tol * sigma_top {
            violating = Some(subset.iter().map(|i| i + 1).collect());
        }
    }
    let min_ratio = if sigma_top > 0.0 { min_sv / sigma_top } else { 0.0 };
    Ok(PropertyAReport {
        holds: violating.is_none(),
        k: k.to_vec(),
        violating_subset: violating,
        min_singular_value: min_sv,
        min_ratio,
        minors_tested: tested,
    })
}

fn holds(qmat: &CorrelationMatrix, k: &[usize]) -> bool {
    verify_property_a(qmat, k, DEFAULT_TOL).map(|r| r.holds).unwrap_or(false)
}

/// Searches for a 1-based `K` of the required cardinality satisfying
/// Property (A). The prefix `[1:|K|]` is tried first, then every subset in
/// lexicographic order when `L ≤ 12`, else a depth-first search with pruning.
pub fn find_k(qmat: &CorrelationMatrix, cfg: &ChannelConfig) -> Result<Option<Vec<usize>>> {
    let cfg = cfg.checked()?;
    qmat.matches(&cfg)?;
    let size = required_k_cardinality(&cfg)?;
    let prefix: Vec<usize> = (1..=size).collect();
    if holds(qmat, &prefix) {
        return Ok(Some(prefix));
    }
    if cfg.l <= EXHAUSTIVE_MAX_L {
        return Ok((1..=cfg.l)
            .combinations(size)
            .find(|cand| holds(qmat, cand)));
    }
    let mut chosen = Vec::with_capacity(size);
    let mut budget = SEARCH_NODE_BUDGET;
    Ok(extend_k(qmat, size, 1, &mut chosen, &mut budget).then_some(chosen))
}

fn extend_k(
    qmat: &CorrelationMatrix,
    size: usize,
    next: usize,
    chosen: &mut Vec<usize>,
    budget: &mut usize,
) -> bool {
    if chosen.len() == size {
        return true;
    }
    let l = qmat.l();
    let q = qmat.q();
    for cand in next..=l {
        if l - cand + 1 < size - chosen.len() || *budget == 0 {
            return false;
        }
        *budget -= 1;
        // only subsets containing the new row can fail
        let ok = chosen.len() + 1 < q
            || chosen.iter().copied().combinations(q - 1).all(|mut sub| {
                sub.push(cand);
                let zero: Vec<usize> = sub.iter().map(|i| i - 1).collect();
                linalg::rank(&qmat.rows(&zero), DEFAULT_TOL) == q
            });
        if ok {
            chosen.push(cand);
            if extend_k(qmat, size, cand + 1, chosen, budget) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

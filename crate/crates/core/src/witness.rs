//! Explicit point where `det J4` is provably nonzero.
//!
//! Write `J4 = [diag(Q_{I_1}, …, Q_{I_{R−1}}, Q_{I_{R−1}}) | A]`, where the
//! column of `A` for data position `j` has entries `q_jᵀ s_m` at row `j` of
//! each antenna block. Pick per-antenna sets `K_m` with `|K_m| = Q − α` and
//! fading blocks `s_m` orthogonal to the rows in `K_m` but not to any other
//! row of `Q_K`. When the complements `C_m` (the surviving nonzeros of `A_m`)
//! partition the data columns, every column of `A` has one nonzero, and
//! repeated cofactor expansion leaves `Π_m det Q_{K_m ∪ P}`, nonzero by
//! Property (A).
//!
//! The single-pilot case with `l ≠ 0` is the one covered by the classical
//! argument; the other cases run through the same search and are flagged
//! `extrapolated`.

use std::collections::BTreeMap;

use itertools::Itertools;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelConfig, CorrelationMatrix, FadingDraw};
use crate::error::{Error, Result};
use crate::jacobian::extract_j4;
use crate::linalg::{self, CMat, CVec, ZERO};
use crate::pilot::PilotPlan;

/// Condition (a) threshold on `|q_jᵀ s_m| / ‖q_j‖` with unit-norm `s_m`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Condition (b) lower bound on `|q_jᵀ s_m| / ‖q_j‖`.
pub const NONVANISHING_TOL: f64 = 1e-8;
pub const PRODUCT_FORMULA_TOL: f64 = 1e-8;
/// Entries at most this fraction of `maxabs(M)` count as zero in the reduction.
pub const REDUCTION_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessPlan {
    /// `K_m`, 1-based.
    #[serde(rename = "K_sets")]
    pub k_sets: Vec<Vec<usize>>,
    /// `C_m`: data columns whose `A_m` entry stays nonzero.
    pub complements: Vec<Vec<usize>>,
    pub nonzero_counts: Vec<usize>,
    /// Data column (1-based) → antenna (1-based) holding its nonzero.
    pub column_owner: BTreeMap<usize, usize>,
    /// Pilot positions `[1:α]`.
    pub pilots: Vec<usize>,
    pub extrapolated: bool,
}

/// Row set (1-based) of antenna block `m` (0-based) in `J4`.
fn j4_block_rows(plan: &PilotPlan, m: usize) -> &[usize] {
    let r = plan.antennas();
    if m == r - 1 {
        &plan.sets[r - 2]
    } else {
        &plan.sets[m]
    }
}

/// Finds `K_m` whose complements partition `[α+1 : |I_{R−1}|]`, taking the
/// lexicographically first complement for each antenna in turn.
pub fn choose_witness_sets(cfg: &ChannelConfig, plan: &PilotPlan) -> Result<WitnessPlan> {
    let cfg = cfg.checked()?;
    if cfg.r < 2 {
        return Err(Error::SingleAntenna);
    }
    let alpha = plan.alpha;
    let last = plan.penultimate_len().ok_or(Error::SingleAntenna)?;
    if alpha > cfg.q {
        return Err(Error::NoPartition);
    }
    let mut eligible = Vec::with_capacity(cfg.r);
    let mut counts = Vec::with_capacity(cfg.r);
    for m in 0..cfg.r {
        let rows = j4_block_rows(plan, m);
        if rows.len() < cfg.q {
            return Err(Error::NoPartition);
        }
        eligible.push(rows.iter().copied().filter(|&j| j > alpha).collect::<Vec<_>>());
        counts.push(rows.len() - cfg.q);
    }
    let columns: Vec<usize> = (alpha + 1..=last).collect();
    if counts.iter().sum::<usize>() != columns.len() {
        return Err(Error::NoPartition);
    }
    let mut complements = Vec::with_capacity(cfg.r);
    let mut used = vec![false; last + 1];
    if !assign(&eligible, &counts, 0, &mut used, &mut complements) {
        return Err(Error::NoPartition);
    }
    let k_sets = eligible
        .iter()
        .zip(&complements)
        .map(|(e, c)| e.iter().copied().filter(|j| !c.contains(j)).collect())
        .collect();
    let column_owner = complements
        .iter()
        .enumerate()
        .flat_map(|(m, c)| c.iter().map(move |&j| (j, m + 1)))
        .collect();
    Ok(WitnessPlan {
        k_sets,
        complements,
        nonzero_counts: counts,
        column_owner,
        pilots: plan.pilot_set.clone(),
        extrapolated: !(alpha == 1 && plan.l.is_some_and(|l| l != 0)),
    })
}

fn assign(
    eligible: &[Vec<usize>],
    counts: &[usize],
    m: usize,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) -> bool {
    if m == eligible.len() {
        // counts sum to the column total and choices are disjoint
        return true;
    }
    let free: Vec<usize> = eligible[m].iter().copied().filter(|&j| !used[j]).collect();
    for choice in free.into_iter().combinations(counts[m]) {
        for &j in &choice {
            used[j] = true;
        }
        out.push(choice.clone());
        if assign(eligible, counts, m + 1, used, out) {
            return true;
        }
        out.pop();
        for &j in &choice {
            used[j] = false;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessVectors {
    pub s: Vec<Vec<Complex64>>,
}

impl WitnessVectors {
    pub fn stacked(&self) -> Result<FadingDraw> {
        let q = self.s.first().map_or(0, Vec::len);
        FadingDraw::with_block_len(q, self.s.len(), self.s.concat())
    }
}

fn normalize(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let phase = v
        .iter()
        .find(|z| z.norm() > 1e-12 * norm)
        .map_or(Complex64::new(1.0, 0.0), |z| z.conj() / z.norm());
    for z in &mut v {
        *z = *z * phase / norm;
    }
    v
}

/// Solves for `s_m` with `q_jᵀ s_m = 0` on `K_m` and `≠ 0` on `K ∖ K_m`.
///
/// With one pilot the constraint leaves a one-dimensional nullspace, taken
/// from the SVD. With `α > 1` the nullspace has dimension `α`; the vector
/// solving `Q_{K_m ∪ P} s = (1 on P, 0 on K_m)` is used instead.
pub fn solve_witness_vectors(
    qmat: &CorrelationMatrix,
    wplan: &WitnessPlan,
    k: &[usize],
) -> Result<WitnessVectors> {
    let q = qmat.q();
    let alpha = wplan.pilots.len();
    let mut out = Vec::with_capacity(wplan.k_sets.len());
    for (m, km) in wplan.k_sets.iter().enumerate() {
        let rows: Vec<usize> = km.iter().map(|j| j - 1).collect();
        let null = linalg::nullspace(&qmat.rows(&rows), 1e-10);
        let expected = q - km.len();
        if null.ncols() != expected {
            return Err(Error::NullspaceDimension {
                block: m + 1,
                dim: null.ncols(),
                expected,
            });
        }
        let s = if alpha <= 1 {
            null.column(0).iter().copied().collect()
        } else {
            let mut support: Vec<usize> = wplan.pilots.iter().chain(km).map(|j| j - 1).collect();
            support.sort_unstable();
            let system = qmat.rows(&support);
            let rhs = CVec::from_iterator(
                support.len(),
                support.iter().map(|&i| {
                    if i < alpha {
                        Complex64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                }),
            );
            let sol = system.lu().solve(&rhs).ok_or(Error::NullspaceDimension {
                block: m + 1,
                dim: null.ncols(),
                expected,
            })?;
            sol.iter().copied().collect()
        };
        let s = normalize(s);
        for &j in km {
            let v = qmat.row_dot(j - 1, &s).norm() / qmat.row_norm(j - 1);
            if v > ORTHOGONALITY_TOL {
                return Err(Error::NullspaceDimension {
                    block: m + 1,
                    dim: 0,
                    expected,
                });
            }
        }
        for &j in k.iter().filter(|j| !km.contains(j)) {
            let v = qmat.row_dot(j - 1, &s).norm() / qmat.row_norm(j - 1);
            if v < NONVANISHING_TOL {
                return Err(Error::ConditionB { block: m + 1, row: j });
            }
        }
        out.push(s);
    }
    Ok(WitnessVectors { s: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Elimination {
    /// 0-based row and column of the original matrix.
    pub row: usize,
    pub col: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct LaplaceReduction {
    /// Product of eliminated entry magnitudes.
    pub scalar_product: f64,
    pub residual: CMat,
    /// Original indices of the residual's rows and columns.
    pub residual_rows: Vec<usize>,
    pub residual_cols: Vec<usize>,
    pub trace: Vec<Elimination>,
}

/// Cofactor-expands along single-nonzero columns until none is left, so
/// `|det M| = scalar_product · |det residual|`.
pub fn iterative_laplace_reduce(m: &CMat) -> LaplaceReduction {
    let all: Vec<bool> = vec![true; m.ncols()];
    reduce_columns(m, &all)
}

/// As [`iterative_laplace_reduce`], restricted to columns flagged `eligible`.
pub fn reduce_columns(m: &CMat, eligible: &[bool]) -> LaplaceReduction {
    assert!(m.is_square(), "Laplace reduction needs a square matrix");
    assert_eq!(eligible.len(), m.ncols());
    let tol = REDUCTION_ZERO_TOL * linalg::max_abs(m);
    let mut rows: Vec<usize> = (0..m.nrows()).collect();
    let mut cols: Vec<usize> = (0..m.ncols()).collect();
    let mut trace = Vec::new();
    let mut product = 1.0;
    loop {
        let hit = cols.iter().enumerate().find_map(|(ci, &c)| {
            if !eligible[c] {
                return None;
            }
            let mut nz = rows.iter().enumerate().filter(|(_, &r)| m[(r, c)].norm() > tol);
            match (nz.next(), nz.next()) {
                (Some((ri, &r)), None) => Some((ri, ci, r, c)),
                _ => None,
            }
        });
        let Some((ri, ci, r, c)) = hit else { break };
        let magnitude = m[(r, c)].norm();
        product *= magnitude;
        trace.push(Elimination { row: r, col: c, magnitude });
        rows.remove(ri);
        cols.remove(ci);
    }
    let residual = CMat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    LaplaceReduction {
        scalar_product: product,
        residual,
        residual_rows: rows,
        residual_cols: cols,
        trace,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    #[serde(rename = "K_sets")]
    pub k_sets: Vec<Vec<usize>>,
    pub s_vectors: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "detJ4")]
    pub det_j4: f64,
    pub product_formula_value: f64,
    /// Accumulated magnitude of the eliminated `A` entries.
    pub constant_c: f64,
    /// `|det Q_{K_m ∪ P}|` per antenna.
    pub block_determinants: Vec<f64>,
    pub rel_diff: f64,
    /// Largest entry deviation between residual blocks and `Q_{K_m ∪ P}`,
    /// including off-block entries.
    pub residuals: f64,
    pub owners_consistent: bool,
    pub extrapolated: bool,
}

/// Builds `J4` at the witness point, reduces along the `A` columns and
/// checks the result against `c · Π_m |det Q_{K_m ∪ P}|`.
pub fn verify_witness(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    wplan: &WitnessPlan,
    wvecs: &WitnessVectors,
) -> Result<WitnessReport> {
    let cfg = plan.config;
    let s = wvecs.stacked()?;
    verify_at(plan, qmat, wplan, &s).map(|(mut report, _)| {
        report.s_vectors = wvecs
            .s
            .iter()
            .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        debug_assert_eq!(report.k_sets.len(), cfg.r);
        report
    })
}

/// Same checks at an arbitrary fading point; returns the reduction as well.
pub fn verify_at(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    wplan: &WitnessPlan,
    s: &FadingDraw,
) -> Result<(WitnessReport, LaplaceReduction)> {
    let cfg = plan.config;
    let qr = cfg.q * cfg.r;
    let j4 = extract_j4(plan, qmat, s)?;
    let n = j4.ncols();
    let eligible: Vec<bool> = (0..n).map(|c| c >= qr).collect();
    let red = reduce_columns(&j4, &eligible);
    let remaining = red.residual_cols.iter().filter(|&&c| c >= qr).count();
    if remaining > 0 {
        return Err(Error::ReductionStalled { remaining });
    }

    // J4 row -> (block, 1-based position)
    let mut row_map = Vec::with_capacity(n);
    for m in 0..cfg.r {
        row_map.extend(j4_block_rows(plan, m).iter().map(|&p| (m, p)));
    }
    let owners_consistent = red.trace.iter().all(|e| {
        let column = plan.alpha + 1 + (e.col - qr);
        let (block, pos) = row_map[e.row];
        pos == column && wplan.column_owner.get(&column) == Some(&(block + 1))
    });

    let mut block_dets = Vec::with_capacity(cfg.r);
    let mut max_dev = 0.0_f64;
    for m in 0..cfg.r {
        let mut support: Vec<usize> = wplan.pilots.iter().chain(&wplan.k_sets[m]).copied().collect();
        support.sort_unstable();
        let zero_based: Vec<usize> = support.iter().map(|j| j - 1).collect();
        let expected = qmat.rows(&zero_based);
        block_dets.push(linalg::log2_abs_det(&expected));
        let mine: Vec<usize> = red
            .residual_rows
            .iter()
            .enumerate()
            .filter(|(_, &r)| row_map[r].0 == m)
            .map(|(i, _)| i)
            .collect();
        if mine.len() != cfg.q {
            max_dev = f64::INFINITY;
            continue;
        }
        for (bi, &ri) in mine.iter().enumerate() {
            if row_map[red.residual_rows[ri]].1 != support[bi] {
                max_dev = f64::INFINITY;
            }
            for (cj, &c) in red.residual_cols.iter().enumerate() {
                let want = if c / cfg.q == m {
                    expected[(bi, c % cfg.q)]
                } else {
                    ZERO
                };
                max_dev = max_dev.max((red.residual[(ri, cj)] - want).norm());
            }
        }
    }

    let log_direct = linalg::log2_abs_det(&j4);
    let log_formula = red.scalar_product.log2() + block_dets.iter().sum::<f64>();
    let rel_diff = ((log_direct - log_formula).exp2() - 1.0).abs();
    if !(log_direct.is_finite() && rel_diff <= PRODUCT_FORMULA_TOL) {
        return Err(Error::DeterminantMismatch {
            direct: log_direct.exp2(),
            formula: log_formula.exp2(),
        });
    }
    let report = WitnessReport {
        k_sets: wplan.k_sets.clone(),
        s_vectors: Vec::new(),
        det_j4: log_direct.exp2(),
        product_formula_value: log_formula.exp2(),
        constant_c: red.scalar_product,
        block_determinants: block_dets.iter().map(|d| d.exp2()).collect(),
        rel_diff,
        residuals: max_dev,
        owners_consistent,
        extrapolated: wplan.extrapolated,
    };
    Ok((report, red))
}

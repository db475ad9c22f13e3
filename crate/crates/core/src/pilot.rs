//! Pilot/data split and the antenna index sets that make the map
//! `(s, x_D) ↦ P ybar` square.
//!
//! Case (b) applies when `R ≥ 2` and `(QR − 1)/(R − 1) ≤ L`: a single pilot,
//! with `k = ⌊(Q−R)/(R−1)⌋`, `l = Q − R − k(R−1)`,
//!
//! ```text
//! I_m = [1 : Q+k+1]   m ∈ [1 : R−l−1]
//! I_m = [1 : Q+k+2]   m ∈ [R−l : R−1]
//! I_R = [1 : L]
//! ```
//!
//! Otherwise (case (a), including SISO) `α = QR − (R−1)L` pilots and every
//! antenna keeps the full block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlanCase {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
}

impl PlanCase {
    pub fn tag(self) -> &'static str {
        match self {
            PlanCase::A => "a",
            PlanCase::B => "b",
        }
    }
}

/// Output of [`plan_pilots`]. Index sets are stored 1-based and ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PilotPlan {
    #[serde(skip)]
    pub config: ChannelConfig,
    pub alpha: usize,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub case: PlanCase,
    pub sets: Vec<Vec<usize>>,
    pub pilot_set: Vec<usize>,
    pub data_set: Vec<usize>,
    #[serde(rename = "K_size")]
    pub k_size: Option<usize>,
}

impl PilotPlan {
    pub fn antennas(&self) -> usize {
        self.sets.len()
    }

    /// `|I_m|` for 0-based antenna `m`.
    pub fn set_len(&self, m: usize) -> usize {
        self.sets[m].len()
    }

    /// 0-based row indices of `I_m`.
    pub fn rows(&self, m: usize) -> Vec<usize> {
        self.sets[m].iter().map(|i| i - 1).collect()
    }

    /// `Σ |I_m|`, the side length of the Jacobian.
    pub fn total_rows(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// `|I_{R−1}|`, or `None` for a single antenna.
    pub fn penultimate_len(&self) -> Option<usize> {
        let r = self.antennas();
        (r >= 2).then(|| self.set_len(r - 2))
    }

    /// Data positions `I_R ∖ I_{R−1}` (1-based) split off by the Laplace step.
    pub fn laplace_tail(&self) -> Result<Vec<usize>> {
        let p = self.penultimate_len().ok_or(Error::SingleAntenna)?;
        Ok((p + 1..=self.config.l).collect())
    }
}

fn is_case_b(cfg: &ChannelConfig) -> bool {
    cfg.r >= 2 && cfg.q * cfg.r - 1 <= (cfg.r - 1) * cfg.l
}

fn prefix(n: usize) -> Vec<usize> {
    (1..=n).collect()
}

pub fn plan_pilots(cfg: &ChannelConfig) -> Result<PilotPlan> {
    let cfg = cfg.checked()?;
    let (l_len, q, r) = (cfg.l, cfg.q, cfg.r);
    let k_size = required_k_cardinality(&cfg).ok();
    let plan = if is_case_b(&cfg) {
        let k = (q - r) / (r - 1);
        let l = q - r - k * (r - 1);
        let mut sets = Vec::with_capacity(r);
        for m in 1..r {
            let len = if m < r - l { q + k + 1 } else { q + k + 2 };
            sets.push(prefix(len));
        }
        sets.push(prefix(l_len));
        PilotPlan {
            config: cfg,
            alpha: 1,
            k: Some(k),
            l: Some(l),
            case: PlanCase::B,
            sets,
            pilot_set: prefix(1),
            data_set: (2..=l_len).collect(),
            k_size,
        }
    } else {
        let alpha = (q * r) as i64 - ((r - 1) * l_len) as i64;
        if alpha < 1 || alpha > l_len as i64 {
            return Err(Error::InvalidPilotCount { alpha });
        }
        let alpha = alpha as usize;
        PilotPlan {
            config: cfg,
            alpha,
            k: None,
            l: None,
            case: PlanCase::A,
            sets: vec![prefix(l_len); r],
            pilot_set: prefix(alpha),
            data_set: (alpha + 1..=l_len).collect(),
            k_size,
        }
    };
    debug_assert_eq!(plan.total_rows(), q * r + l_len - plan.alpha);
    Ok(plan)
}

/// `|K| = min(⌈(QR−1)/(R−1)⌉, L)`.
pub fn required_k_cardinality(cfg: &ChannelConfig) -> Result<usize> {
    if cfg.r < 2 {
        return Err(Error::SingleAntenna);
    }
    let num = cfg.q * cfg.r - 1;
    let den = cfg.r - 1;
    Ok(num.div_ceil(den).min(cfg.l))
}

/// Block-diagonal row selector `diag((I_L)_{I_1}, .., (I_L)_{I_R})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    block_len: usize,
    sets: Vec<Vec<usize>>,
    /// 0-based stacked column index selected by each row.
    targets: Vec<usize>,
}

impl Projection {
    fn from_sets(block_len: usize, sets: Vec<Vec<usize>>) -> Self {
        let targets = sets
            .iter()
            .enumerate()
            .flat_map(|(m, set)| set.iter().map(move |&i| m * block_len + i - 1))
            .collect();
        Self {
            block_len,
            sets,
            targets,
        }
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn nrows(&self) -> usize {
        self.targets.len()
    }

    pub fn ncols(&self) -> usize {
        self.block_len * self.sets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.ncols(), "projection input length");
        self.targets.iter().map(|&t| v[t]).collect()
    }

    /// Row selection of a matrix with `L·R` rows.
    pub fn apply_rows(&self, m: &CMat) -> CMat {
        assert_eq!(m.nrows(), self.ncols(), "projection input rows");
        CMat::from_fn(self.nrows(), m.ncols(), |i, j| m[(self.targets[i], j)])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.nrows(), self.ncols());
        for (row, &t) in self.targets.iter().enumerate() {
            p[(row, t)] = 1.0;
        }
        p
    }
}

pub fn build_projection(plan: &PilotPlan) -> Projection {
    Projection::from_sets(plan.config.l, plan.sets.clone())
}

/// `P_1`: as `P` but the last antenna is restricted to `I_{R−1}`.
pub fn build_p1(plan: &PilotPlan) -> Result<Projection> {
    let r = plan.antennas();
    if r < 2 {
        return Err(Error::SingleAntenna);
    }
    let mut sets = plan.sets.clone();
    sets[r - 1] = sets[r - 2].clone();
    Ok(Projection::from_sets(plan.config.l, sets))
}

/// Lower bound on the SIMO pre-log and the SISO pre-log, both exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrelogBound {
    pub simo: Ratio<u64>,
    pub siso: Ratio<u64>,
}

pub fn prelog_bound(cfg: &ChannelConfig) -> Result<PrelogBound> {
    let cfg = cfg.checked()?;
    let (l, q, r) = (cfg.l as u64, cfg.q as u64, cfg.r as u64);
    let siso = Ratio::new(l - q, l);
    let simo = if is_case_b(&cfg) {
        Ratio::new(l - 1, l)
    } else {
        Ratio::new(r * (l - q), l)
    };
    Ok(PrelogBound { simo, siso })
}

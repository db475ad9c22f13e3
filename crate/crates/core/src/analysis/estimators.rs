//! Expected log-determinants behind the entropy chain.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::mc::{mc_log_values, mc_paired, McEstimate, MonteCarlo, E_LOG2_ABS_CN};
use crate::channel::{sample_fading, CorrelationMatrix, InputDraw};
use crate::error::{Error, Result};
use crate::jacobian::{build_j2, extract_j4, homogeneity_degree, is_detj4_nonzero, DEFAULT_TRIALS};
use crate::linalg;
use crate::pilot::PilotPlan;
use crate::rng::{complex_normal, substream};

/// Substream reserved for the nonvanishing pre-check, far from MC chunks.
const PRECHECK_STREAM: u64 = u64::MAX;

fn require_nonzero(plan: &PilotPlan, qmat: &CorrelationMatrix, seed: u64) -> Result<()> {
    let mut rng = substream(seed, PRECHECK_STREAM);
    if is_detj4_nonzero(plan, qmat, &mut rng, DEFAULT_TRIALS)?.nonzero {
        Ok(())
    } else {
        Err(Error::SuspectedZero)
    }
}

/// `Ê[log2 |det J4(s)|]` with `s ~ CN(0, I_QR)`. Refuses when the randomized
/// identity test suggests `det J4 ≡ 0`.
pub fn estimate_logdet_j4(plan: &PilotPlan, qmat: &CorrelationMatrix, mc: &MonteCarlo) -> Result<McEstimate> {
    qmat.matches(&plan.config)?;
    require_nonzero(plan, qmat, mc.seed)?;
    let cfg = plan.config;
    mc_log_values(
        |rng| {
            let s = sample_fading(&cfg, rng);
            extract_j4(plan, qmat, &s).map_or(f64::NAN, |j4| linalg::log2_abs_det(&j4))
        },
        mc,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingComparison {
    pub degree: usize,
    pub lambda: [f64; 2],
    pub base: McEstimate,
    pub scaled: McEstimate,
    /// Per-draw differences under common random numbers.
    pub paired_shift: McEstimate,
    /// `D · log2 |λ|`.
    pub expected_shift: f64,
    /// `sqrt(se_base² + se_scaled²)`.
    pub combined_stderr: f64,
    pub ok: bool,
}

/// Estimates `Ê[log2 |det J4(s)|]` and `Ê[log2 |det J4(λs)|]` on the same draws.
pub fn compare_scaled_logdet_j4(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    lambda: Complex64,
    mc: &MonteCarlo,
) -> Result<ScalingComparison> {
    qmat.matches(&plan.config)?;
    require_nonzero(plan, qmat, mc.seed)?;
    let cfg = plan.config;
    let degree = homogeneity_degree(plan)?;
    let (base, scaled, paired_shift) = mc_paired(
        |rng| {
            let s = sample_fading(&cfg, rng);
            let a = extract_j4(plan, qmat, &s).map_or(f64::NAN, |m| linalg::log2_abs_det(&m));
            let b = extract_j4(plan, qmat, &s.scaled(lambda)).map_or(f64::NAN, |m| linalg::log2_abs_det(&m));
            (a, b)
        },
        mc,
    )?;
    let expected_shift = degree as f64 * lambda.norm().log2();
    let combined_stderr = base.stderr.hypot(scaled.stderr);
    let ok = (scaled.mean - base.mean - expected_shift).abs() <= 3.0 * combined_stderr + ROUNDING_SLACK;
    Ok(ScalingComparison {
        degree,
        lambda: [lambda.re, lambda.im],
        base,
        scaled,
        paired_shift,
        expected_shift,
        combined_stderr,
        ok,
    })
}

/// Absolute slack for identities that hold draw by draw, where the
/// statistical spread collapses to rounding noise.
pub const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceAdditivity {
    pub logdet_j2: McEstimate,
    pub logdet_j4: McEstimate,
    /// Per-draw `log2|det J2| − log2|det J4|`.
    pub paired_difference: McEstimate,
    /// `Σ_{i ∈ I_R ∖ I_{R−1}} (log2 ‖q_i‖ − γ/(2 ln 2))`.
    pub closed_form_tail: f64,
    pub tail_rows: Vec<usize>,
    pub ok: bool,
}

/// Checks `Ê[log|det J2|] = Ê[log|det J4|] + Σ_i E[log|q_iᵀ s_R|]` with the
/// tail in closed form, since `q_iᵀ s_R ~ CN(0, ‖q_i‖²)`.
pub fn laplace_additivity(plan: &PilotPlan, qmat: &CorrelationMatrix, mc: &MonteCarlo) -> Result<LaplaceAdditivity> {
    qmat.matches(&plan.config)?;
    require_nonzero(plan, qmat, mc.seed)?;
    let cfg = plan.config;
    let tail_rows = plan.laplace_tail()?;
    let closed_form_tail: f64 = tail_rows
        .iter()
        .map(|&i| qmat.row_norm(i - 1).log2() + E_LOG2_ABS_CN)
        .sum();
    let (logdet_j4, logdet_j2, paired_difference) = mc_paired(
        |rng| {
            let s = sample_fading(&cfg, rng);
            let a = extract_j4(plan, qmat, &s).map_or(f64::NAN, |m| linalg::log2_abs_det(&m));
            let b = build_j2(plan, qmat, &s).map_or(f64::NAN, |m| linalg::log2_abs_det(&m));
            (a, b)
        },
        mc,
    )?;
    let ok = (paired_difference.mean - closed_form_tail).abs()
        <= 3.0 * paired_difference.stderr + ROUNDING_SLACK;
    Ok(LaplaceAdditivity {
        logdet_j2,
        logdet_j4,
        paired_difference,
        closed_form_tail,
        tail_rows,
        ok,
    })
}

/// Distribution of the data symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataLaw {
    /// i.i.d. CN(0, 1).
    ComplexGaussian,
    /// Unit modulus with uniform phase.
    UnitModulus,
}

impl DataLaw {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Complex64 {
        match self {
            DataLaw::ComplexGaussian => complex_normal(rng),
            DataLaw::UnitModulus => {
                let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                Complex64::from_polar(1.0, phase)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PilotDataTerms {
    /// `R · Σ_{j ∈ P} log2 |x_j|`.
    pub pilot_bits: f64,
    /// `Σ_{m < R} Σ_{j ∈ I_m ∖ P} log2 |x_j|`.
    pub data: McEstimate,
    /// Number of `(m, j)` pairs in the data sum.
    pub data_terms: usize,
    pub per_symbol_mean: f64,
    pub combined: McEstimate,
}

/// Data positions (1-based) entering the `J1`/`J3` log term, with multiplicity.
pub fn data_log_positions(plan: &PilotPlan) -> Vec<usize> {
    let r = plan.antennas();
    plan.sets[..r - 1]
        .iter()
        .flat_map(|set| set.iter().copied().filter(|&j| j > plan.alpha))
        .collect()
}

/// `log2 |det J1| + log2 |det J3|` for a given input.
pub fn log_det_j1_j3(plan: &PilotPlan, x: &InputDraw) -> f64 {
    let x = x.as_slice();
    let j1: f64 = plan.sets.iter().flatten().map(|&j| x[j - 1].norm().log2()).sum();
    let j3: f64 = plan.data_set.iter().map(|&j| -x[j - 1].norm().log2()).sum();
    j1 + j3
}

/// Pilot term in closed form plus an MC estimate of the data term.
pub fn pilot_data_log_terms(
    plan: &PilotPlan,
    pilots: &[Complex64],
    law: DataLaw,
    mc: &MonteCarlo,
) -> Result<PilotDataTerms> {
    if pilots.len() != plan.alpha {
        return Err(Error::DimensionMismatch {
            context: "pilot symbols",
            expected: plan.alpha,
            actual: pilots.len(),
        });
    }
    if let Some(i) = pilots.iter().position(|p| p.norm() == 0.0) {
        return Err(Error::ZeroSymbol { index: i + 1 });
    }
    let r = plan.antennas() as f64;
    let pilot_bits = r * pilots.iter().map(|p| p.norm().log2()).sum::<f64>();
    let positions = data_log_positions(plan);
    let l = plan.config.l;
    let alpha = plan.alpha;
    let data = mc_log_values(
        |rng| {
            let x: Vec<Complex64> = (0..l - alpha).map(|_| law.sample(rng)).collect();
            positions.iter().map(|&j| x[j - alpha - 1].norm().log2()).sum()
        },
        mc,
    )?;
    let per_symbol_mean = if positions.is_empty() {
        0.0
    } else {
        data.mean / positions.len() as f64
    };
    let combined = data.shifted(pilot_bits);
    Ok(PilotDataTerms {
        pilot_bits,
        data,
        data_terms: positions.len(),
        per_symbol_mean,
        combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::pilot::plan_pilots;
    use proptest::prelude::*;

    fn setup(l: usize, q: usize, r: usize) -> (PilotPlan, CorrelationMatrix) {
        let cfg = ChannelConfig::new(l, q, r);
        (plan_pilots(&cfg).unwrap(), CorrelationMatrix::dft(l, q).unwrap())
    }

    #[test]
    fn logdet_j4_finite_for_a() {
        let (plan, q) = setup(5, 3, 2);
        let est = estimate_logdet_j4(&plan, &q, &MonteCarlo::new(5, 4000)).unwrap();
        assert!(est.mean.is_finite());
        assert_eq!(est.excluded, 0);
        assert!(est.empirically_finite());
    }

    #[test]
    fn rank_deficient_refused() {
        let (plan, _) = setup(5, 3, 2);
        let mut m = CorrelationMatrix::dft(5, 3).unwrap().matrix().clone();
        let c0 = m.column(0).into_owned();
        m.column_mut(2).copy_from(&c0);
        let q = CorrelationMatrix::new(m).unwrap();
        assert!(matches!(
            estimate_logdet_j4(&plan, &q, &MonteCarlo::new(5, 1000)),
            Err(Error::SuspectedZero)
        ));
    }

    #[test]
    fn scaling_by_two_adds_degree_bits() {
        let (plan, q) = setup(5, 3, 2);
        let cmp = compare_scaled_logdet_j4(&plan, &q, Complex64::new(2.0, 0.0), &MonteCarlo::new(8, 2000)).unwrap();
        assert_eq!(cmp.expected_shift, 4.0);
        assert!((cmp.paired_shift.mean - 4.0).abs() < 1e-9);
        assert!(cmp.ok);
    }

    #[test]
    fn laplace_additivity_trivial_without_tail() {
        let (plan, q) = setup(5, 3, 2);
        let add = laplace_additivity(&plan, &q, &MonteCarlo::new(2, 1000)).unwrap();
        assert!(add.tail_rows.is_empty());
        assert_eq!(add.closed_form_tail, 0.0);
        assert!(add.paired_difference.mean.abs() < 1e-9);
        assert!(add.ok);
    }

    #[test]
    fn unit_pilots_give_zero_pilot_term() {
        let (plan, _) = setup(5, 3, 2);
        let t = pilot_data_log_terms(&plan, &[Complex64::new(0.0, 1.0)], DataLaw::UnitModulus, &MonteCarlo::new(1, 200))
            .unwrap();
        assert_eq!(t.pilot_bits, 0.0);
        assert!(t.combined.mean.abs() < 1e-12);
    }

    #[test]
    fn pilot_of_two_gives_r_bits() {
        let (plan, _) = setup(5, 3, 2);
        let t = pilot_data_log_terms(&plan, &[Complex64::new(2.0, 0.0)], DataLaw::ComplexGaussian, &MonteCarlo::new(1, 200))
            .unwrap();
        assert_eq!(t.pilot_bits, 2.0);
        assert_eq!(t.data_terms, 4);
    }

    #[test]
    fn zero_pilot_rejected() {
        let (plan, _) = setup(5, 3, 2);
        assert!(matches!(
            pilot_data_log_terms(&plan, &[Complex64::new(0.0, 0.0)], DataLaw::ComplexGaussian, &MonteCarlo::new(1, 200)),
            Err(Error::ZeroSymbol { index: 1 })
        ));
    }

    #[test]
    fn data_positions_case_a_plan() {
        let (plan, _) = setup(4, 3, 2);
        // α = 2, I_1 = [1:4]
        assert_eq!(data_log_positions(&plan), vec![3, 4]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn j1_j3_route_matches_pilot_data_formula(
            (l, q, r) in (2usize..9).prop_flat_map(|l| (Just(l), 1..l)).prop_flat_map(|(l, q)| (Just(l), Just(q), 1..=q)),
            seed in any::<u64>(),
        ) {
            let cfg = ChannelConfig::new(l, q, r);
            let plan = plan_pilots(&cfg).unwrap();
            let mut rng = substream(seed, 0);
            let x = crate::channel::sample_input(&cfg, &mut rng);
            let xs = x.as_slice();
            let pilot: f64 = plan.pilot_set.iter().map(|&j| xs[j - 1].norm().log2()).sum();
            let data: f64 = data_log_positions(&plan).iter().map(|&j| xs[j - 1].norm().log2()).sum();
            let formula = r as f64 * pilot + data;
            let direct = log_det_j1_j3(&plan, &x);
            prop_assert!((formula - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }
}

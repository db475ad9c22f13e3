//! Jacobian of `(s, x_D) ↦ P ybar` and its structure.
//!
//! Columns are ordered with the `QR` fading coordinates first and the
//! `L − α` data symbols after. Derivatives are complex (the map is
//! holomorphic once the pilots are fixed).
//!
//! * `J = J1 · J2 · J3` with `J1 = P (I_R ⊗ X) Pᵀ`,
//!   `J2 = P [I_R ⊗ Q | a_{α+1} | … | a_L]`, `J3 = diag(I_QR, diag(x_D)⁻¹)`.
//! * Columns `a_i`, `i ∈ I_R ∖ I_{R−1}`, of `J2` carry a single nonzero
//!   `q_iᵀ s_R`; expanding along them leaves `J4`.
//! * `det J4(λ s) = λ^D det J4(s)` with `D = |I_{R−1}| − α`.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{sample_fading, ChannelConfig, CorrelationMatrix, FadingDraw, InputDraw};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::pilot::{build_p1, build_projection, PilotPlan, Projection};

pub const HOMOGENEITY_TOL: f64 = 1e-9;
pub const LAPLACE_TOL: f64 = 1e-9;
pub const NONZERO_REL_THRESHOLD: f64 = 1e-10;
pub const DEFAULT_TRIALS: usize = 8;

/// `a_i = (I_R ⊗ diag(e_i) Q) s` for 1-based `i`: `q_iᵀ s_m` at position `i`
/// of every antenna block, zero elsewhere.
pub fn a_vector(qmat: &CorrelationMatrix, s: &FadingDraw, i: usize) -> Result<Vec<Complex64>> {
    let l = qmat.l();
    if i == 0 || i > l {
        return Err(Error::IndexOutOfRange { index: i, bound: l });
    }
    check_fading(qmat, s)?;
    let r = s.antennas();
    let mut a = vec![ZERO; l * r];
    for m in 0..r {
        a[m * l + i - 1] = qmat.row_dot(i - 1, s.block(m));
    }
    Ok(a)
}

fn check_fading(qmat: &CorrelationMatrix, s: &FadingDraw) -> Result<()> {
    if s.block_len() != qmat.q() {
        return Err(Error::DimensionMismatch {
            context: "fading block length",
            expected: qmat.q(),
            actual: s.block_len(),
        });
    }
    Ok(())
}

fn check_plan_inputs(plan: &PilotPlan, qmat: &CorrelationMatrix, s: &FadingDraw) -> Result<()> {
    qmat.matches(&plan.config)?;
    check_fading(qmat, s)?;
    if s.antennas() != plan.config.r {
        return Err(Error::DimensionMismatch {
            context: "fading antennas",
            expected: plan.config.r,
            actual: s.antennas(),
        });
    }
    Ok(())
}

fn check_symbols(plan: &PilotPlan, x: &InputDraw) -> Result<()> {
    let x = x.as_slice();
    if x.len() != plan.config.l {
        return Err(Error::DimensionMismatch {
            context: "input vector",
            expected: plan.config.l,
            actual: x.len(),
        });
    }
    match x.iter().position(|z| *z == ZERO) {
        Some(i) => Err(Error::ZeroSymbol { index: i + 1 }),
        None => Ok(()),
    }
}

/// Unprojected `[I_R ⊗ (X) Q | a_{first} | … | a_{last}]` with `L·R` rows;
/// `x = None` gives `I_R ⊗ Q`.
fn stacked_columns(
    qmat: &CorrelationMatrix,
    r: usize,
    x: Option<&[Complex64]>,
    s: &FadingDraw,
    a_cols: std::ops::RangeInclusive<usize>,
) -> CMat {
    let l = qmat.l();
    let q = qmat.q();
    let a_indices: Vec<usize> = a_cols.collect();
    let mut m = CMat::zeros(l * r, q * r + a_indices.len());
    for block in 0..r {
        for i in 0..l {
            let scale = x.map_or(ONE, |x| x[i]);
            for c in 0..q {
                m[(block * l + i, block * q + c)] = scale * qmat.matrix()[(i, c)];
            }
        }
    }
    for (col, &i) in a_indices.iter().enumerate() {
        for block in 0..r {
            m[(block * l + i - 1, q * r + col)] = qmat.row_dot(i - 1, s.block(block));
        }
    }
    m
}

/// Three-factor decomposition `J = J1 · J2 · J3`.
pub fn build_factors(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    x: &InputDraw,
    s: &FadingDraw,
) -> Result<(CMat, CMat, CMat)> {
    check_plan_inputs(plan, qmat, s)?;
    check_symbols(plan, x)?;
    let cfg = plan.config;
    let x = x.as_slice();
    let proj = build_projection(plan);
    let j1 = CMat::from_diagonal(&linalg::CVec::from_iterator(
        proj.nrows(),
        proj.targets().iter().map(|&t| x[t % cfg.l]),
    ));
    let j2 = j2_matrix(plan, qmat, s, &proj);
    let qr = cfg.q * cfg.r;
    let n = proj.nrows();
    let mut j3 = CMat::identity(n, n);
    for (offset, &j) in plan.data_set.iter().enumerate() {
        j3[(qr + offset, qr + offset)] = ONE / x[j - 1];
    }
    Ok((j1, j2, j3))
}

fn j2_matrix(plan: &PilotPlan, qmat: &CorrelationMatrix, s: &FadingDraw, proj: &Projection) -> CMat {
    let cfg = plan.config;
    proj.apply_rows(&stacked_columns(qmat, cfg.r, None, s, plan.alpha + 1..=cfg.l))
}

/// `J2(s)` alone; it does not depend on the input symbols.
pub fn build_j2(plan: &PilotPlan, qmat: &CorrelationMatrix, s: &FadingDraw) -> Result<CMat> {
    check_plan_inputs(plan, qmat, s)?;
    Ok(j2_matrix(plan, qmat, s, &build_projection(plan)))
}

/// Direct Jacobian `[P (I_R ⊗ X Q) | P a_{α+1} | … | P a_L]`.
pub fn direct_jacobian(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    x: &InputDraw,
    s: &FadingDraw,
) -> Result<CMat> {
    check_plan_inputs(plan, qmat, s)?;
    let cfg = plan.config;
    let proj = build_projection(plan);
    Ok(proj.apply_rows(&stacked_columns(
        qmat,
        cfg.r,
        Some(x.as_slice()),
        s,
        plan.alpha + 1..=cfg.l,
    )))
}

#[derive(Debug, Clone)]
pub struct JacobianBundle {
    pub j: CMat,
    pub j1: CMat,
    pub j2: CMat,
    pub j3: CMat,
    /// `J1 · J2 · J3`.
    pub product: CMat,
    /// `None` for a single antenna.
    pub j4: Option<CMat>,
    pub degree: Option<usize>,
}

impl JacobianBundle {
    /// `maxabs(J − J1 J2 J3) / maxabs(J)`.
    pub fn factorization_residual(&self) -> f64 {
        let scale = linalg::max_abs(&self.j);
        let diff = linalg::max_abs_diff(&self.j, &self.product);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

pub fn build_j(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    x: &InputDraw,
    s: &FadingDraw,
) -> Result<JacobianBundle> {
    let (j1, j2, j3) = build_factors(plan, qmat, x, s)?;
    let j = direct_jacobian(plan, qmat, x, s)?;
    let product = &j1 * &j2 * &j3;
    let (j4, degree) = if plan.config.r >= 2 {
        (Some(extract_j4(plan, qmat, s)?), Some(homogeneity_degree(plan)?))
    } else {
        (None, None)
    };
    Ok(JacobianBundle {
        j,
        j1,
        j2,
        j3,
        product,
        j4,
        degree,
    })
}

/// `J4 = P1 [(I_R ⊗ Q) | a_{α+1} | … | a_{|I_{R−1}|}]`.
pub fn extract_j4(plan: &PilotPlan, qmat: &CorrelationMatrix, s: &FadingDraw) -> Result<CMat> {
    check_plan_inputs(plan, qmat, s)?;
    let p1 = build_p1(plan)?;
    let last = plan.penultimate_len().ok_or(Error::SingleAntenna)?;
    Ok(p1.apply_rows(&stacked_columns(
        qmat,
        plan.config.r,
        None,
        s,
        plan.alpha + 1..=last,
    )))
}

/// `D = |I_{R−1}| − α`.
pub fn homogeneity_degree(plan: &PilotPlan) -> Result<usize> {
    let last = plan.penultimate_len().ok_or(Error::SingleAntenna)?;
    Ok(last - plan.alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceSplit {
    /// `|det J2(s)|`
    pub lhs: f64,
    /// `|det J4(s)| · Π_{i ∈ I_R ∖ I_{R−1}} |q_iᵀ s_R|`
    pub rhs: f64,
    pub rel_diff: f64,
    pub ok: bool,
}

pub fn laplace_split_check(plan: &PilotPlan, qmat: &CorrelationMatrix, s: &FadingDraw) -> Result<LaplaceSplit> {
    let j2 = build_j2(plan, qmat, s)?;
    let j4 = extract_j4(plan, qmat, s)?;
    let last_block = s.block(plan.config.r - 1);
    let log_tail: f64 = plan
        .laplace_tail()?
        .iter()
        .map(|&i| qmat.row_dot(i - 1, last_block).norm().log2())
        .sum();
    let log_lhs = linalg::log2_abs_det(&j2);
    let log_rhs = linalg::log2_abs_det(&j4) + log_tail;
    let rel_diff = if log_lhs == log_rhs {
        0.0
    } else {
        ((log_rhs - log_lhs).exp2() - 1.0).abs()
    };
    Ok(LaplaceSplit {
        lhs: log_lhs.exp2(),
        rhs: log_rhs.exp2(),
        rel_diff,
        ok: rel_diff <= LAPLACE_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityCheck {
    pub degree: usize,
    /// `|det J4(λs) − λ^D det J4(s)| / |λ^D det J4(s)|`
    pub rel_residual: f64,
    pub ok: bool,
}

pub fn homogeneity_check(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    s: &FadingDraw,
    lambda: Complex64,
) -> Result<HomogeneityCheck> {
    let degree = homogeneity_degree(plan)?;
    let base = linalg::det(&extract_j4(plan, qmat, s)?);
    let scaled = linalg::det(&extract_j4(plan, qmat, &s.scaled(lambda))?);
    let expected = lambda.powu(degree as u32) * base;
    let diff = (scaled - expected).norm();
    let rel_residual = if expected.norm() > 0.0 {
        diff / expected.norm()
    } else {
        diff
    };
    Ok(HomogeneityCheck {
        degree,
        rel_residual,
        ok: diff <= HOMOGENEITY_TOL * expected.norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonzeroVerdict {
    pub nonzero: bool,
    pub trials: usize,
    /// Largest `log2 |det J4| − log2(threshold)` seen; positive means nonzero.
    pub best_margin_log2: f64,
    /// Fewer than 8 trials make a suspected-zero verdict weak.
    pub conclusive: bool,
    pub caveat: Option<String>,
}

/// Randomized identity test for `det J4 ≢ 0`: evaluates at `trials`
/// Gaussian draws and accepts as soon as `|det J4| > 1e-10 · maxabs(J4)^n`.
pub fn is_detj4_nonzero<R: Rng + ?Sized>(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    rng: &mut R,
    trials: usize,
) -> Result<NonzeroVerdict> {
    if plan.config.r < 2 {
        return Err(Error::SingleAntenna);
    }
    qmat.matches(&plan.config)?;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..trials {
        let s = sample_fading(&plan.config, rng);
        let j4 = extract_j4(plan, qmat, &s)?;
        let n = j4.nrows() as f64;
        let scale = linalg::max_abs(&j4);
        let margin = linalg::log2_abs_det(&j4) - (NONZERO_REL_THRESHOLD.log2() + n * scale.log2());
        // NaN (all-zero J4) is ignored by max
        best = best.max(margin);
        if margin > 0.0 {
            break;
        }
    }
    let nonzero = best > 0.0;
    Ok(NonzeroVerdict {
        nonzero,
        trials,
        best_margin_log2: best,
        conclusive: nonzero || trials >= DEFAULT_TRIALS,
        caveat: (!nonzero).then(|| {
            "randomized test: no draw exceeded the threshold; a nonzero polynomial vanishes at a Gaussian point with probability zero, so this is strong but not proof-grade evidence of det J4 ≡ 0".to_string()
        }),
    })
}

/// The map `(s, x_D) ↦ P ybar` with pilots `x_P` held fixed.
pub fn projected_output(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    pilots: &[Complex64],
    s: &[Complex64],
    x_data: &[Complex64],
) -> Result<Vec<Complex64>> {
    let cfg: ChannelConfig = plan.config;
    let x: Vec<Complex64> = pilots.iter().chain(x_data).copied().collect();
    let x = InputDraw::new(&cfg, x)?;
    let s = FadingDraw::new(&cfg, s.to_vec())?;
    let ybar = crate::channel::build_ybar(&cfg, qmat, &x, &s)?;
    Ok(build_projection(plan).apply(&ybar))
}

/// Central-difference complex Jacobian of [`projected_output`]. The map is
/// holomorphic, so a real step along each coordinate gives the complex
/// derivative.
pub fn finite_difference_jacobian(
    plan: &PilotPlan,
    qmat: &CorrelationMatrix,
    x: &InputDraw,
    s: &FadingDraw,
    step: f64,
) -> Result<CMat> {
    let cfg = plan.config;
    let alpha = plan.alpha;
    let pilots = &x.as_slice()[..alpha];
    let mut point: Vec<Complex64> = s.as_slice().iter().chain(&x.as_slice()[alpha..]).copied().collect();
    let qr = cfg.q * cfg.r;
    let n = point.len();
    let rows = plan.total_rows();
    let eval = |p: &[Complex64]| projected_output(plan, qmat, pilots, &p[..qr], &p[qr..]);
    let mut jac = CMat::zeros(rows, n);
    for col in 0..n {
        let orig = point[col];
        point[col] = orig + step;
        let plus = eval(&point)?;
        point[col] = orig - step;
        let minus = eval(&point)?;
        point[col] = orig;
        for row in 0..rows {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_input, ChannelConfig};
    use crate::pilot::plan_pilots;
    use crate::rng::substream;

    fn setup(l: usize, q: usize, r: usize) -> (PilotPlan, CorrelationMatrix) {
        let cfg = ChannelConfig::new(l, q, r);
        (plan_pilots(&cfg).unwrap(), CorrelationMatrix::dft(l, q).unwrap())
    }

    #[test]
    fn a_vector_support() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(3, 0));
        let a = a_vector(&q, &s, 3).unwrap();
        for (pos, z) in a.iter().enumerate() {
            match pos {
                2 => assert_eq!(*z, q.row_dot(2, s.block(0))),
                7 => assert_eq!(*z, q.row_dot(2, s.block(1))),
                _ => assert_eq!(*z, ZERO),
            }
        }
        let zero = FadingDraw::zeros(&plan.config);
        assert!(a_vector(&q, &zero, 1).unwrap().iter().all(|z| *z == ZERO));
        assert!(matches!(a_vector(&q, &s, 6), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(a_vector(&q, &s, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn a_vectors_reconstruct_ybar() {
        let (plan, q) = setup(5, 3, 2);
        let mut rng = substream(4, 0);
        let s = sample_fading(&plan.config, &mut rng);
        let x = sample_input(&plan.config, &mut rng);
        let ybar = crate::channel::build_ybar(&plan.config, &q, &x, &s).unwrap();
        let mut sum = [ZERO; 10];
        for i in 1..=5 {
            let a = a_vector(&q, &s, i).unwrap();
            for (acc, v) in sum.iter_mut().zip(a) {
                *acc += x.as_slice()[i - 1] * v;
            }
        }
        for (u, v) in sum.iter().zip(&ybar) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_input_gives_identity_factors() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(5, 0));
        let x = InputDraw::new(&plan.config, vec![ONE; 5]).unwrap();
        let (j1, j2, j3) = build_factors(&plan, &q, &x, &s).unwrap();
        assert_eq!(j1, CMat::identity(10, 10));
        assert_eq!(j3, CMat::identity(10, 10));
        assert_eq!(j2.shape(), (10, 10));
        // first six columns are P (I_2 ⊗ Q)
        for m in 0..2 {
            for i in 0..5 {
                for c in 0..3 {
                    assert_eq!(j2[(m * 5 + i, m * 3 + c)], q.matrix()[(i, c)]);
                    assert_eq!(j2[(m * 5 + i, (1 - m) * 3 + c)], ZERO);
                }
            }
        }
    }

    #[test]
    fn zero_symbol_rejected() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(5, 0));
        let mut xv = vec![ONE; 5];
        xv[0] = ZERO;
        let x = InputDraw::new(&plan.config, xv.clone()).unwrap();
        assert!(matches!(build_factors(&plan, &q, &x, &s), Err(Error::ZeroSymbol { index: 1 })));
        xv[0] = ONE;
        xv[3] = ZERO;
        let x = InputDraw::new(&plan.config, xv).unwrap();
        assert!(matches!(build_j(&plan, &q, &x, &s), Err(Error::ZeroSymbol { index: 4 })));
    }

    #[test]
    fn factorization_matches_direct() {
        for (l, qq, r) in [(5, 3, 2), (6, 4, 3), (4, 3, 2), (6, 3, 2), (5, 3, 1)] {
            let (plan, q) = setup(l, qq, r);
            let mut rng = substream(6, l as u64);
            for _ in 0..10 {
                let s = sample_fading(&plan.config, &mut rng);
                let x = sample_input(&plan.config, &mut rng);
                let b = build_j(&plan, &q, &x, &s).unwrap();
                assert!(b.j.is_square());
                assert_eq!(b.j.nrows(), qq * r + l - plan.alpha);
                assert!(b.factorization_residual() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_fading_kills_data_columns() {
        let (plan, q) = setup(5, 3, 2);
        let x = sample_input(&plan.config, &mut substream(7, 0));
        let j = direct_jacobian(&plan, &q, &x, &FadingDraw::zeros(&plan.config)).unwrap();
        for c in 6..10 {
            assert!(j.column(c).iter().all(|z| *z == ZERO));
        }
    }

    #[test]
    fn j4_shapes() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(8, 0));
        assert_eq!(extract_j4(&plan, &q, &s).unwrap(), build_j2(&plan, &q, &s).unwrap());

        let (plan, q) = setup(6, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(8, 1));
        assert_eq!(extract_j4(&plan, &q, &s).unwrap().shape(), (10, 10));
        assert_eq!(build_j2(&plan, &q, &s).unwrap().shape(), (11, 11));

        let zero = FadingDraw::zeros(&plan.config);
        let j4 = extract_j4(&plan, &q, &zero).unwrap();
        for c in 6..10 {
            assert!(j4.column(c).iter().all(|z| *z == ZERO));
        }
        assert_eq!(linalg::log2_abs_det(&j4), f64::NEG_INFINITY);

        let (plan, q) = setup(5, 3, 1);
        let s = sample_fading(&plan.config, &mut substream(8, 2));
        assert!(matches!(extract_j4(&plan, &q, &s), Err(Error::SingleAntenna)));
    }

    #[test]
    fn degrees() {
        assert_eq!(homogeneity_degree(&setup(5, 3, 2).0).unwrap(), 4);
        assert_eq!(homogeneity_degree(&setup(6, 4, 3).0).unwrap(), 5);
        assert_eq!(homogeneity_degree(&setup(4, 3, 2).0).unwrap(), 2);
        assert_eq!(homogeneity_degree(&setup(6, 3, 2).0).unwrap(), 4);
        assert!(homogeneity_degree(&setup(5, 3, 1).0).is_err());
    }

    #[test]
    fn homogeneity_special_lambdas() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(9, 0));
        let h = homogeneity_check(&plan, &q, &s, ONE).unwrap();
        assert!(h.ok && h.rel_residual == 0.0);
        let base = linalg::det(&extract_j4(&plan, &q, &s).unwrap());
        let doubled = linalg::det(&extract_j4(&plan, &q, &s.scaled(Complex64::new(2.0, 0.0))).unwrap());
        assert!((doubled / base - Complex64::new(16.0, 0.0)).norm() < 1e-9);
        let i = Complex64::new(0.0, 1.0);
        let rotated = linalg::det(&extract_j4(&plan, &q, &s.scaled(i)).unwrap());
        assert!((rotated.norm() - base.norm()).abs() <= 1e-12 * base.norm());
        assert!(homogeneity_check(&plan, &q, &s, i).unwrap().ok);
    }

    #[test]
    fn laplace_split_cases() {
        let (plan, q) = setup(5, 3, 2);
        let s = sample_fading(&plan.config, &mut substream(10, 0));
        let split = laplace_split_check(&plan, &q, &s).unwrap();
        assert_eq!(split.lhs, split.rhs);

        let (plan, q) = setup(6, 3, 2);
        let mut rng = substream(10, 1);
        for _ in 0..20 {
            let s = sample_fading(&plan.config, &mut rng);
            let split = laplace_split_check(&plan, &q, &s).unwrap();
            assert!(split.ok, "{split:?}");
            let direct = linalg::det(&extract_j4(&plan, &q, &s).unwrap()).norm() * q.row_dot(5, s.block(1)).norm();
            assert!((direct - split.rhs).abs() <= 1e-12 * direct);
        }

        let (plan, q) = setup(6, 4, 3);
        let s = sample_fading(&plan.config, &mut substream(10, 2));
        let split = laplace_split_check(&plan, &q, &s).unwrap();
        assert_eq!(split.lhs, split.rhs);
    }

    #[test]
    fn nonzero_verdicts() {
        let (plan, q) = setup(5, 3, 2);
        let v = is_detj4_nonzero(&plan, &q, &mut substream(11, 0), 8).unwrap();
        assert!(v.nonzero && v.caveat.is_none());

        // zero third column: rank-deficient I ⊗ Q columns
        let mut m = CMat::zeros(5, 3);
        m.view_mut((0, 0), (5, 2)).copy_from(CorrelationMatrix::dft(5, 2).unwrap().matrix());
        let bad = CorrelationMatrix::new(m).unwrap();
        let v = is_detj4_nonzero(&plan, &bad, &mut substream(11, 1), 8).unwrap();
        assert!(!v.nonzero && v.conclusive && v.caveat.is_some());

        let v = is_detj4_nonzero(&plan, &bad, &mut substream(11, 1), 2).unwrap();
        assert!(!v.conclusive);
    }

    #[test]
    fn finite_difference_agrees() {
        let (plan, q) = setup(6, 4, 3);
        let mut rng = substream(12, 0);
        let s = sample_fading(&plan.config, &mut rng);
        let x = sample_input(&plan.config, &mut rng);
        let fd = finite_difference_jacobian(&plan, &q, &x, &s, 1e-6).unwrap();
        let j = direct_jacobian(&plan, &q, &x, &s).unwrap();
        assert!(linalg::max_abs_diff(&fd, &j) <= 1e-5 * linalg::max_abs(&j));
    }
}

//! Composed checks for a configuration, one [`Check`] per identity.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::entropy::fit_entropy_slope;
use crate::analysis::estimators::{
    compare_scaled_logdet_j4, estimate_logdet_j4, laplace_additivity, pilot_data_log_terms, DataLaw,
};
use crate::analysis::mc::{mc_log_abs, MonteCarlo, E_LOG2_ABS_CN};
use crate::channel::{build_ybar, sample_fading, sample_input, ChannelConfig, CorrelationMatrix};
use crate::error::Result;
use crate::jacobian::{
    build_j, finite_difference_jacobian, homogeneity_check, is_detj4_nonzero, laplace_split_check,
    DEFAULT_TRIALS,
};
use crate::linalg;
use crate::pilot::{build_projection, plan_pilots, prelog_bound, PilotPlan, PlanCase};
use crate::property_a::{find_k, verify_property_a, DEFAULT_TOL};
use crate::rng::{complex_normal, substream};
use crate::witness::{choose_witness_sets, solve_witness_vectors, verify_witness};

pub const FACTORIZATION_TOL: f64 = 1e-10;
pub const FINITE_DIFFERENCE_TOL: f64 = 1e-5;
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-6;
pub const SLOPE_REL_TOL: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub detail: Value,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: Value) -> Self {
        Self { name, passed, skipped: false, detail }
    }

    fn skip(name: &'static str, why: &str) -> Self {
        Self {
            name,
            passed: true,
            skipped: true,
            detail: json!({ "reason": why }),
        }
    }

    fn from_result(name: &'static str, r: Result<Check>) -> Self {
        r.unwrap_or_else(|e| Check::new(name, false, json!({ "error": e.to_string() })))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Draws for the identity checks.
    pub trials: usize,
    pub mc: MonteCarlo,
    /// `(a, b, steps)` in `log2 ρ`.
    pub rho_grid: (f64, f64, usize),
}

impl VerifyOptions {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            seed,
            trials: 20,
            mc: MonteCarlo::new(seed, n),
            rho_grid: (10.0, 30.0, 5),
        }
    }
}

fn stream_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Plan-level identities: set sizes, projection shape and pre-log values.
pub fn plan_checks(cfg: &ChannelConfig) -> Result<Vec<Check>> {
    let plan = plan_pilots(cfg)?;
    let (l, q, r) = (cfg.l, cfg.q, cfg.r);
    let total: usize = plan.sets.iter().map(Vec::len).sum();
    let proj = build_projection(&plan);
    let bound = prelog_bound(cfg)?;
    let by_alpha = Ratio::new((l - plan.alpha) as u64, l as u64);
    let by_case = match plan.case {
        PlanCase::B => Ratio::new((l - 1) as u64, l as u64),
        PlanCase::A => Ratio::new((r * (l - q)) as u64, l as u64),
    };
    Ok(vec![
        Check::new(
            "dimension_identity",
            total == q * r + l - plan.alpha && proj.nrows() == total && proj.ncols() == l * r,
            json!({ "sum_sets": total, "expected": q * r + l - plan.alpha }),
        ),
        Check::new(
            "prelog",
            bound.simo == by_alpha && bound.simo == by_case && bound.siso == Ratio::new((l - q) as u64, l as u64),
            json!({ "simo": bound.simo.to_string(), "siso": bound.siso.to_string() }),
        ),
    ])
}

fn channel_check(cfg: &ChannelConfig, qmat: &CorrelationMatrix, seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 1);
    let x = sample_input(cfg, &mut rng);
    let s = sample_fading(cfg, &mut rng);
    let ybar = build_ybar(cfg, qmat, &x, &s)?;
    // Kronecker form built densely
    let xq = diag_times(qmat.matrix(), x.as_slice());
    let mut worst = 0.0_f64;
    for m in 0..cfg.r {
        let sm = linalg::CVec::from_column_slice(s.block(m));
        let block = &xq * sm;
        for i in 0..cfg.l {
            worst = worst.max((block[i] - ybar[m * cfg.l + i]).norm());
        }
    }
    let zeros = crate::channel::InputDraw::new(cfg, vec![Complex64::new(0.0, 0.0); cfg.l])?;
    let silent = build_ybar(cfg, qmat, &zeros, &s)?.iter().all(|v| v.norm() == 0.0);
    Ok(Check::new(
        "channel_model",
        worst <= 1e-12 && silent && ybar.len() == cfg.l * cfg.r,
        json!({ "max_deviation": worst, "zero_input_silent": silent }),
    ))
}

fn diag_times(q: &linalg::CMat, x: &[Complex64]) -> linalg::CMat {
    let mut m = q.clone();
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= x[i];
    }
    m
}

fn property_a_check(cfg: &ChannelConfig, qmat: &CorrelationMatrix) -> Result<Check> {
    if cfg.r < 2 {
        return Ok(Check::skip("property_a", "single antenna"));
    }
    Ok(match find_k(qmat, cfg)? {
        Some(k) => {
            let rep = verify_property_a(qmat, &k, DEFAULT_TOL)?;
            Check::new("property_a", rep.holds, serde_json::to_value(rep)?)
        }
        None => Check::new("property_a", false, json!({ "K": null })),
    })
}

/// Factorization, finite differences, homogeneity and the Laplace split on
/// `trials` random draws.
pub fn jacobian_checks(plan: &PilotPlan, qmat: &CorrelationMatrix, seed: u64, trials: usize) -> Vec<Check> {
    let cfg = plan.config;
    let mut rng = substream(seed, 2);
    let mut fact = 0.0_f64;
    let mut fd = 0.0_f64;
    let mut homog = 0.0_f64;
    let mut split = 0.0_f64;
    let mut failure: Option<String> = None;
    for _ in 0..trials {
        let x = sample_input(&cfg, &mut rng);
        let s = sample_fading(&cfg, &mut rng);
        let lambda = complex_normal(&mut rng);
        let mut step = || -> Result<()> {
            let b = build_j(plan, qmat, &x, &s)?;
            fact = fact.max(b.factorization_residual());
            let num = finite_difference_jacobian(plan, qmat, &x, &s, FINITE_DIFFERENCE_STEP)?;
            fd = fd.max(linalg::max_abs_diff(&b.j, &num) / linalg::max_abs(&b.j));
            if cfg.r >= 2 {
                homog = homog.max(homogeneity_check(plan, qmat, &s, lambda)?.rel_residual);
                split = split.max(laplace_split_check(plan, qmat, &s)?.rel_diff);
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e.to_string());
            break;
        }
    }
    let fail = |name| Check::new(name, false, json!({ "error": failure }));
    if failure.is_some() {
        return vec![fail("factorization"), fail("finite_difference")];
    }
    let mut out = vec![
        Check::new(
            "factorization",
            fact <= FACTORIZATION_TOL,
            json!({ "max_rel_residual": fact, "tol": FACTORIZATION_TOL, "trials": trials }),
        ),
        Check::new(
            "finite_difference",
            fd <= FINITE_DIFFERENCE_TOL,
            json!({ "max_rel_error": fd, "tol": FINITE_DIFFERENCE_TOL, "trials": trials }),
        ),
    ];
    if cfg.r >= 2 {
        out.push(Check::new(
            "homogeneity",
            homog <= crate::jacobian::HOMOGENEITY_TOL,
            json!({ "max_rel_residual": homog, "degree": plan.penultimate_len().map(|n| n - plan.alpha) }),
        ));
        out.push(Check::new(
            "laplace_split",
            split <= crate::jacobian::LAPLACE_TOL,
            json!({ "max_rel_diff": split, "tail": plan.laplace_tail().ok() }),
        ));
    } else {
        out.push(Check::skip("homogeneity", "single antenna"));
        out.push(Check::skip("laplace_split", "single antenna"));
    }
    out
}

fn nonzero_check(plan: &PilotPlan, qmat: &CorrelationMatrix, seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 3);
    let v = is_detj4_nonzero(plan, qmat, &mut rng, DEFAULT_TRIALS)?;
    Ok(Check::new("det_j4_nonzero", v.nonzero, serde_json::to_value(v)?))
}

fn witness_check(plan: &PilotPlan, qmat: &CorrelationMatrix) -> Result<Check> {
    let w = choose_witness_sets(&plan.config, plan)?;
    let last = plan.penultimate_len().unwrap_or(plan.config.l);
    let k: Vec<usize> = (1..=last).collect();
    let v = solve_witness_vectors(qmat, &w, &k)?;
    let rep = verify_witness(plan, qmat, &w, &v)?;
    let ok = rep.det_j4 > 1e-8 && rep.owners_consistent && rep.residuals <= 1e-12;
    Ok(Check::new("witness", ok, serde_json::to_value(rep)?))
}

fn mc_checks(cfg: &ChannelConfig, plan: &PilotPlan, qmat: &CorrelationMatrix, opts: &VerifyOptions) -> Vec<Check> {
    let mc = opts.mc;
    let mut out = Vec::new();
    out.push(Check::from_result("mc_reference_cn", (|| {
        let est = mc_log_abs(complex_normal, |z| *z, &mc.with_seed(stream_seed(opts.seed, 10)))?;
        let ok = (est.mean - E_LOG2_ABS_CN).abs() <= 3.0 * est.stderr;
        Ok(Check::new("mc_reference_cn", ok, json!({ "estimate": est, "closed_form": E_LOG2_ABS_CN })))
    })()));
    if cfg.r >= 2 {
        out.push(Check::from_result("logdet_j4_finite", (|| {
            let est = estimate_logdet_j4(plan, qmat, &mc.with_seed(stream_seed(opts.seed, 11)))?;
            Ok(Check::new("logdet_j4_finite", est.empirically_finite(), serde_json::to_value(est)?))
        })()));
        out.push(Check::from_result("logdet_j4_scaling", (|| {
            let cmp = compare_scaled_logdet_j4(
                plan,
                qmat,
                Complex64::new(2.0, 0.0),
                &mc.with_seed(stream_seed(opts.seed, 12)),
            )?;
            Ok(Check::new("logdet_j4_scaling", cmp.ok, serde_json::to_value(cmp)?))
        })()));
        out.push(Check::from_result("laplace_additivity", (|| {
            let add = laplace_additivity(plan, qmat, &mc.with_seed(stream_seed(opts.seed, 13)))?;
            Ok(Check::new("laplace_additivity", add.ok, serde_json::to_value(add)?))
        })()));
    }
    out.push(Check::from_result("pilot_data_terms", (|| {
        let pilots = vec![Complex64::new(1.0, 0.0); plan.alpha];
        let t = pilot_data_log_terms(plan, &pilots, DataLaw::ComplexGaussian, &mc.with_seed(stream_seed(opts.seed, 14)))?;
        let ok = t.combined.mean.is_finite() && t.pilot_bits == 0.0;
        Ok(Check::new("pilot_data_terms", ok, serde_json::to_value(t)?))
    })()));
    out.push(Check::from_result("entropy_slope", (|| {
        let (a, b, steps) = opts.rho_grid;
        let grid = crate::analysis::entropy::log2_grid(a, b, steps)?;
        let fit = fit_entropy_slope(cfg, qmat, &grid, &mc.with_seed(stream_seed(opts.seed, 15)))?;
        let target = (cfg.q * cfg.r) as f64;
        let ok = (fit.slope / target - 1.0).abs() <= SLOPE_REL_TOL;
        Ok(Check::new("entropy_slope", ok, json!({ "fit": fit, "target": target })))
    })()));
    out
}

/// Every check for one configuration.
pub fn verify_all(cfg: &ChannelConfig, qmat: &CorrelationMatrix, opts: &VerifyOptions) -> Result<Vec<Check>> {
    let cfg = cfg.checked()?;
    qmat.matches(&cfg)?;
    let plan = plan_pilots(&cfg)?;
    let mut out = plan_checks(&cfg)?;
    out.push(Check::from_result("channel_model", channel_check(&cfg, qmat, opts.seed)));
    out.push(Check::from_result("property_a", property_a_check(&cfg, qmat)));
    out.extend(jacobian_checks(&plan, qmat, opts.seed, opts.trials));
    if cfg.r >= 2 {
        out.push(Check::from_result("det_j4_nonzero", nonzero_check(&plan, qmat, opts.seed)));
        out.push(Check::from_result("witness", witness_check(&plan, qmat)));
    } else {
        out.push(Check::skip("det_j4_nonzero", "single antenna"));
        out.push(Check::skip("witness", "single antenna"));
    }
    out.extend(mc_checks(&cfg, &plan, qmat, opts));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_for_presets() {
        for name in ChannelConfig::PRESET_NAMES {
            let cfg = ChannelConfig::preset(name).unwrap();
            let q = CorrelationMatrix::dft(cfg.l, cfg.q).unwrap();
            let checks = verify_all(&cfg, &q, &VerifyOptions::new(42, 2000)).unwrap();
            for c in &checks {
                assert!(c.passed, "{name}: {} {}", c.name, c.detail);
            }
        }
    }

    #[test]
    fn siso_skips_antenna_checks() {
        let cfg = ChannelConfig::new(4, 2, 1);
        let q = CorrelationMatrix::dft(4, 2).unwrap();
        let checks = verify_all(&cfg, &q, &VerifyOptions::new(1, 500)).unwrap();
        assert!(checks.iter().all(|c| c.passed));
        assert!(checks.iter().any(|c| c.name == "witness" && c.skipped));
    }

    #[test]
    fn rank_deficient_q_fails_some_check() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let mut m = CorrelationMatrix::dft(5, 3).unwrap().matrix().clone();
        let c0 = m.column(0).into_owned();
        m.column_mut(2).copy_from(&c0);
        let q = CorrelationMatrix::new(m).unwrap();
        let checks = verify_all(&cfg, &q, &VerifyOptions::new(1, 500)).unwrap();
        assert!(checks.iter().any(|c| !c.passed));
        assert!(checks.iter().any(|c| c.name == "det_j4_nonzero" && !c.passed));
    }
}

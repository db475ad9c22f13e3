//! Pre-log bound report: exact slope plus the finiteness of every entropy term.

use serde::Serialize;

use super::entropy::LOG2_PI_E;
use super::estimators::{LaplaceAdditivity, PilotDataTerms};
use super::mc::McEstimate;
use crate::channel::{ChannelConfig, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::pilot::{prelog_bound, PilotPlan};

pub const CONSTANTS_NOTE: &str =
    "additive O(1) constants of the capacity bounds are not reproduced; only the slope and finiteness are checked";

/// Component estimates fed into [`assemble_prelog_report`].
#[derive(Debug, Clone)]
pub struct ReportInputs {
    pub logdet_j4: McEstimate,
    pub pilot_terms: PilotDataTerms,
    pub laplace: Option<LaplaceAdditivity>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyTerm {
    pub name: &'static str,
    pub bits: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrelogReport {
    pub simo_prelog: String,
    pub siso_prelog: String,
    pub case: &'static str,
    pub alpha: usize,
    pub components: Vec<EntropyTerm>,
    /// `Ê[log2 |det J|]` assembled from the three Jacobian factors.
    pub logdet_j_bits: f64,
    pub logdet_j_stderr: f64,
    /// `ĥ(Pȳ | x_P) = (QR + L − α) log2(πe) + 2 Ê[log2 |det J|]`.
    pub output_entropy_bits: f64,
    pub logdet_j4_tail_delta: f64,
    pub all_finite: bool,
    pub laplace_additivity_ok: Option<bool>,
    pub note: &'static str,
}

/// Combines the component estimates. The `J2` contribution uses the Laplace
/// split: `Ê[log|det J4|]` plus the closed-form tail.
pub fn assemble_prelog_report(
    cfg: &ChannelConfig,
    qmat: &CorrelationMatrix,
    plan: &PilotPlan,
    inputs: &ReportInputs,
) -> Result<PrelogReport> {
    let cfg = cfg.checked()?;
    qmat.matches(&cfg)?;
    let bound = prelog_bound(&cfg)?;
    let tail: f64 = plan
        .laplace_tail()?
        .iter()
        .map(|&i| qmat.row_norm(i - 1).log2() + super::mc::E_LOG2_ABS_CN)
        .sum();
    let j4 = &inputs.logdet_j4;
    let pt = &inputs.pilot_terms;
    let components = vec![
        EntropyTerm { name: "pilot", bits: pt.pilot_bits, stderr: 0.0 },
        EntropyTerm { name: "data", bits: pt.data.mean, stderr: pt.data.stderr },
        EntropyTerm { name: "laplace_tail", bits: tail, stderr: 0.0 },
        EntropyTerm { name: "logdet_j4", bits: j4.mean, stderr: j4.stderr },
    ];
    if let Some(bad) = components.iter().find(|c| !c.bits.is_finite()) {
        return Err(Error::NonFinite(bad.name.to_string()));
    }
    if !j4.empirically_finite() {
        return Err(Error::NonFinite("logdet_j4 truncation tail".to_string()));
    }
    let logdet_j_bits: f64 = components.iter().map(|c| c.bits).sum();
    let logdet_j_stderr = components.iter().map(|c| c.stderr.powi(2)).sum::<f64>().sqrt();
    let dims = (cfg.q * cfg.r + cfg.l - plan.alpha) as f64;
    Ok(PrelogReport {
        simo_prelog: bound.simo.to_string(),
        siso_prelog: bound.siso.to_string(),
        case: plan.case.tag(),
        alpha: plan.alpha,
        components,
        logdet_j_bits,
        logdet_j_stderr,
        output_entropy_bits: dims * LOG2_PI_E + 2.0 * logdet_j_bits,
        logdet_j4_tail_delta: j4.tail_delta(),
        all_finite: true,
        laplace_additivity_ok: inputs.laplace.as_ref().map(|l| l.ok),
        note: CONSTANTS_NOTE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::estimators::{estimate_logdet_j4, pilot_data_log_terms, DataLaw};
    use crate::analysis::mc::MonteCarlo;
    use crate::pilot::plan_pilots;
    use num_complex::Complex64;

    fn report_for(l: usize, q: usize, r: usize) -> PrelogReport {
        let cfg = ChannelConfig::new(l, q, r);
        let qm = CorrelationMatrix::dft(l, q).unwrap();
        let plan = plan_pilots(&cfg).unwrap();
        let mc = MonteCarlo::new(3, 2000);
        let pilots = vec![Complex64::new(1.0, 0.0); plan.alpha];
        let inputs = ReportInputs {
            logdet_j4: estimate_logdet_j4(&plan, &qm, &mc).unwrap(),
            pilot_terms: pilot_data_log_terms(&plan, &pilots, DataLaw::ComplexGaussian, &mc).unwrap(),
            laplace: None,
        };
        assemble_prelog_report(&cfg, &qm, &plan, &inputs).unwrap()
    }

    #[test]
    fn config_a_report() {
        let r = report_for(5, 3, 2);
        assert_eq!(r.simo_prelog, "4/5");
        assert_eq!(r.siso_prelog, "2/5");
        assert!(r.all_finite && r.output_entropy_bits.is_finite());
    }

    #[test]
    fn case_a_report() {
        let r = report_for(4, 3, 2);
        assert_eq!(r.simo_prelog, "1/2");
        assert_eq!(r.case, "a");
    }

    #[test]
    fn non_finite_component_rejected() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let qm = CorrelationMatrix::dft(5, 3).unwrap();
        let plan = plan_pilots(&cfg).unwrap();
        let mc = MonteCarlo::new(3, 200);
        let mut j4 = estimate_logdet_j4(&plan, &qm, &mc).unwrap();
        j4.mean = f64::NAN;
        let inputs = ReportInputs {
            logdet_j4: j4,
            pilot_terms: pilot_data_log_terms(&plan, &[Complex64::new(1.0, 0.0)], DataLaw::ComplexGaussian, &mc)
                .unwrap(),
            laplace: None,
        };
        assert!(matches!(
            assemble_prelog_report(&cfg, &qm, &plan, &inputs),
            Err(Error::NonFinite(_))
        ));
    }
}

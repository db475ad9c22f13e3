//! `prelog-lab`: command-line front end for the pre-log verification toolkit.

mod args;
mod output;

use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use prelog_core::analysis::estimators::{
    estimate_logdet_j4, laplace_additivity, pilot_data_log_terms, DataLaw,
};
use prelog_core::analysis::mc::{McEstimate, MonteCarlo};
use prelog_core::analysis::report::{assemble_prelog_report, ReportInputs};
use prelog_core::analysis::fit_entropy_slope;
use prelog_core::jacobian::is_detj4_nonzero;
use prelog_core::pilot::prelog_bound;
use prelog_core::property_a::{find_k, verify_property_a, DEFAULT_TOL};
use prelog_core::rng::substream;
use prelog_core::verify::{jacobian_checks, verify_all, Check, VerifyOptions};
use prelog_core::witness::{choose_witness_sets, solve_witness_vectors, verify_witness};
use prelog_core::{plan_pilots, ChannelConfig, Error};
use serde_json::{json, Value};

use args::{Common, ConfigError};
use output::{emit, Report, Table, VERSION};

#[derive(Debug, Parser)]
#[command(name = "prelog-lab", version = VERSION, about = "Pre-log bound verification for correlated block-fading SIMO channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Quantity {
    #[value(name = "logdetJ4")]
    LogdetJ4,
    Hyx,
    PilotTerms,
    Report,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the DFT correlation matrix in the correlation-file format.
    GenQ(Common),
    /// Pilot count and per-antenna index sets.
    Plan(Common),
    /// Test Property (A) on a row set (searched when --K is absent).
    CheckA {
        #[command(flatten)]
        common: Common,
        /// Comma-separated 1-based rows.
        #[arg(long = "K", value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Jacobian factorization, finite differences, homogeneity, Laplace split.
    JacobianVerify(Common),
    /// Randomized test that det J4 is not identically zero.
    NonzeroTest(Common),
    /// Explicit point with nonzero det J4 and its product formula.
    Witness(Common),
    /// Monte Carlo estimates.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Quantity::Report)]
        what: Quantity,
    },
    /// Exact SIMO and SISO pre-log values.
    PrelogTable(Common),
    /// Every check for one configuration.
    VerifyAll(Common),
}

struct Outcome {
    config: Option<ChannelConfig>,
    report: Report,
    passed: bool,
}

fn mc_for(common: &Common) -> MonteCarlo {
    let mc = MonteCarlo::new(common.seed, common.n);
    match common.workers {
        Some(w) => mc.with_workers(w),
        None => mc,
    }
}

fn checks_table(checks: &[Check]) -> Table {
    let mut t = Table::new(vec!["check", "passed", "skipped"]);
    for c in checks {
        t.push(vec![c.name.to_string(), c.passed.to_string(), c.skipped.to_string()]);
    }
    t
}

fn checks_outcome(cfg: ChannelConfig, command: &'static str, checks: Vec<Check>) -> anyhow::Result<Outcome> {
    let passed = checks.iter().all(|c| c.passed);
    let table = checks_table(&checks);
    Ok(Outcome {
        config: Some(cfg),
        report: Report {
            command,
            body: json!({ "passed": passed, "checks": checks }),
            table: Some(table),
        },
        passed,
    })
}

fn estimate_row(t: &mut Table, name: &str, e: &McEstimate, flags: String) {
    t.push(vec![
        name.to_string(),
        e.mean.to_string(),
        e.stderr.to_string(),
        e.n.to_string(),
        flags,
    ]);
}

fn finiteness_flags(e: &McEstimate) -> String {
    format!(
        "finite={};tail_delta={:e};excluded={}",
        e.empirically_finite(),
        e.tail_delta(),
        e.excluded
    )
}

fn estimate_header() -> Table {
    Table::new(vec!["quantity", "mean_bits", "stderr", "N", "diag_flags"])
}

fn estimate(common: &Common, what: Quantity) -> anyhow::Result<Outcome> {
    let cfg = common.require_channel()?;
    let q = common.correlation(&cfg)?;
    let plan = plan_pilots(&cfg)?;
    let mc = mc_for(common);
    let mut table = estimate_header();
    let unit_pilots = vec![Complex64::new(1.0, 0.0); plan.alpha];
    let (body, passed) = match what {
        Quantity::LogdetJ4 => {
            let est = estimate_logdet_j4(&plan, &q, &mc)?;
            estimate_row(&mut table, "logdetJ4", &est, finiteness_flags(&est));
            let ok = est.empirically_finite();
            (json!({ "quantity": "logdetJ4", "estimate": est, "empirically_finite": ok }), ok)
        }
        Quantity::Hyx => {
            let fit = fit_entropy_slope(&cfg, &q, &common.grid()?, &mc)?;
            for (i, lr) in fit.log2_rho.iter().enumerate() {
                table.push(vec![
                    format!("hyx@log2rho={lr}"),
                    fit.means[i].to_string(),
                    fit.stderrs[i].to_string(),
                    common.n.to_string(),
                    String::new(),
                ]);
            }
            let target = (cfg.q * cfg.r) as f64;
            let rel = fit.slope / target - 1.0;
            let ok = rel.abs() <= prelog_core::verify::SLOPE_REL_TOL;
            table.push(vec![
                "hyx_slope".into(),
                fit.slope.to_string(),
                String::new(),
                common.n.to_string(),
                format!("target={target};rel_err={rel:e};within_2pct={ok}"),
            ]);
            (json!({ "quantity": "hyx", "fit": fit, "target_slope": target, "within_tolerance": ok }), ok)
        }
        Quantity::PilotTerms => {
            let t = pilot_data_log_terms(&plan, &unit_pilots, DataLaw::ComplexGaussian, &mc)?;
            table.push(vec!["pilot_bits".into(), t.pilot_bits.to_string(), "0".into(), "0".into(), String::new()]);
            estimate_row(&mut table, "data_term", &t.data, format!("terms={}", t.data_terms));
            estimate_row(&mut table, "combined", &t.combined, finiteness_flags(&t.combined));
            let ok = t.combined.mean.is_finite();
            (json!({ "quantity": "pilot-terms", "terms": t }), ok)
        }
        Quantity::Report => {
            let logdet_j4 = estimate_logdet_j4(&plan, &q, &mc)?;
            // independent draws so the component stderrs combine in quadrature
            let pilot_mc = mc.with_seed(common.seed.wrapping_add(1));
            let pilot_terms = pilot_data_log_terms(&plan, &unit_pilots, DataLaw::ComplexGaussian, &pilot_mc)?;
            let laplace = laplace_additivity(&plan, &q, &mc)?;
            estimate_row(&mut table, "logdetJ4", &logdet_j4, finiteness_flags(&logdet_j4));
            estimate_row(&mut table, "logdetJ2", &laplace.logdet_j2, format!("additivity_ok={}", laplace.ok));
            estimate_row(&mut table, "data_term", &pilot_terms.data, format!("terms={}", pilot_terms.data_terms));
            let inputs = ReportInputs {
                logdet_j4,
                pilot_terms,
                laplace: Some(laplace),
            };
            let report = assemble_prelog_report(&cfg, &q, &plan, &inputs)?;
            table.push(vec![
                "logdetJ".into(),
                report.logdet_j_bits.to_string(),
                report.logdet_j_stderr.to_string(),
                common.n.to_string(),
                format!("simo={};siso={}", report.simo_prelog, report.siso_prelog),
            ]);
            let ok = report.all_finite && report.laplace_additivity_ok.unwrap_or(true);
            (json!({ "quantity": "report", "report": report, "laplace": inputs.laplace }), ok)
        }
    };
    let mut body = body;
    body["N"] = json!(common.n);
    Ok(Outcome {
        config: Some(cfg),
        report: Report {
            command: "estimate",
            body,
            table: Some(table),
        },
        passed,
    })
}

fn prelog_table(common: &Common) -> anyhow::Result<Outcome> {
    let configs: Vec<(String, ChannelConfig)> = match common.channel()? {
        Some(cfg) => vec![(common.preset.clone().map_or("custom".to_string(), |p| p.to_uppercase()), cfg)],
        None => ChannelConfig::PRESET_NAMES
            .iter()
            .map(|n| (n.to_string(), ChannelConfig::preset(n).expect("preset exists")))
            .collect(),
    };
    let mut rows = Vec::new();
    let mut table = Table::new(vec!["preset", "L", "Q", "R", "channel", "prelog"]);
    for (name, cfg) in &configs {
        let bound = prelog_bound(cfg)?;
        for (channel, value) in [("SIMO", bound.simo), ("SISO", bound.siso)] {
            rows.push(json!({
                "preset": name, "L": cfg.l, "Q": cfg.q, "R": cfg.r,
                "channel": channel, "prelog": value.to_string(),
            }));
            table.push(vec![
                name.clone(),
                cfg.l.to_string(),
                cfg.q.to_string(),
                cfg.r.to_string(),
                channel.to_string(),
                value.to_string(),
            ]);
        }
    }
    Ok(Outcome {
        config: (configs.len() == 1).then(|| configs[0].1),
        report: Report {
            command: "prelog-table",
            body: json!({ "rows": rows }),
            table: Some(table),
        },
        passed: true,
    })
}

fn run(command: &Command) -> anyhow::Result<(Outcome, &Common)> {
    let outcome = match command {
        Command::GenQ(c) => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let body: Value = serde_json::from_str(&q.to_json())?;
            let mut table = Table::new(vec!["row", "col", "re", "im"]);
            for i in 0..cfg.l {
                for j in 0..cfg.q {
                    let z = q.matrix()[(i, j)];
                    table.push(vec![(i + 1).to_string(), (j + 1).to_string(), z.re.to_string(), z.im.to_string()]);
                }
            }
            (Outcome { config: Some(cfg), report: Report { command: "gen-q", body, table: Some(table) }, passed: true }, c)
        }
        Command::Plan(c) => {
            let cfg = c.require_channel()?;
            let plan = plan_pilots(&cfg)?;
            let mut table = Table::new(vec!["antenna", "size", "rows"]);
            for (m, set) in plan.sets.iter().enumerate() {
                let rows: Vec<String> = set.iter().map(ToString::to_string).collect();
                table.push(vec![(m + 1).to_string(), set.len().to_string(), rows.join(" ")]);
            }
            let body = serde_json::to_value(&plan)?;
            (Outcome { config: Some(cfg), report: Report { command: "plan", body, table: Some(table) }, passed: true }, c)
        }
        Command::CheckA { common: c, k } => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let k = match k {
                Some(k) => Some(k.clone()),
                None => find_k(&q, &cfg)?,
            };
            let (body, passed) = match k {
                Some(k) => {
                    let rep = verify_property_a(&q, &k, DEFAULT_TOL)?;
                    let holds = rep.holds;
                    (serde_json::to_value(rep)?, holds)
                }
                None => (json!({ "holds": false, "K": null, "reason": "no row set of the required size satisfies Property (A)" }), false),
            };
            (Outcome { config: Some(cfg), report: Report { command: "check-a", body, table: None }, passed }, c)
        }
        Command::JacobianVerify(c) => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let plan = plan_pilots(&cfg)?;
            (checks_outcome(cfg, "jacobian-verify", jacobian_checks(&plan, &q, c.seed, c.trials))?, c)
        }
        Command::NonzeroTest(c) => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let plan = plan_pilots(&cfg)?;
            let mut rng = substream(c.seed, 0);
            let v = is_detj4_nonzero(&plan, &q, &mut rng, c.trials)?;
            let passed = v.nonzero;
            (Outcome { config: Some(cfg), report: Report { command: "nonzero-test", body: serde_json::to_value(v)?, table: None }, passed }, c)
        }
        Command::Witness(c) => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let plan = plan_pilots(&cfg)?;
            let wplan = choose_witness_sets(&cfg, &plan)?;
            let last = plan.penultimate_len().unwrap_or(cfg.l);
            let k: Vec<usize> = (1..=last).collect();
            let vectors = solve_witness_vectors(&q, &wplan, &k)?;
            let rep = verify_witness(&plan, &q, &wplan, &vectors)?;
            let passed = rep.det_j4 > 1e-8 && rep.owners_consistent;
            let mut body = serde_json::to_value(&rep)?;
            body["witness_plan"] = serde_json::to_value(&wplan)?;
            body["label"] = json!(if wplan.extrapolated { "extrapolated construction" } else { "single-pilot construction" });
            (Outcome { config: Some(cfg), report: Report { command: "witness", body, table: None }, passed }, c)
        }
        Command::Estimate { common: c, what } => (estimate(c, *what)?, c),
        Command::PrelogTable(c) => (prelog_table(c)?, c),
        Command::VerifyAll(c) => {
            let cfg = c.require_channel()?;
            let q = c.correlation(&cfg)?;
            let mut opts = VerifyOptions::new(c.seed, c.n);
            opts.trials = c.trials;
            opts.mc = mc_for(c);
            opts.rho_grid = c.grid_spec()?;
            (checks_outcome(cfg, "verify-all", verify_all(&cfg, &q, &opts)?)?, c)
        }
    };
    Ok(outcome)
}

fn is_config_problem(err: &anyhow::Error) -> bool {
    err.downcast_ref::<ConfigError>().is_some()
        || matches!(
            err.downcast_ref::<Error>(),
            Some(Error::InvalidConfig(_) | Error::SingleAntenna | Error::InvalidGrid | Error::InvalidSnr(_))
        )
}

fn diagnostic(err: &anyhow::Error) -> Value {
    let violations: Vec<String> = match (err.downcast_ref::<ConfigError>(), err.downcast_ref::<Error>()) {
        (Some(c), _) => c.violations.clone(),
        (_, Some(Error::InvalidConfig(v))) => v.iter().map(ToString::to_string).collect(),
        _ => Vec::new(),
    };
    json!({
        "schema": prelog_core::SCHEMA,
        "error": "invalid_config",
        "message": err.to_string(),
        "violations": violations,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli.command).and_then(|(outcome, common)| {
        let config = outcome.config.map(serde_json::to_value).transpose()?;
        emit(common, config, outcome.report).context("emitting report")?;
        Ok(outcome.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_config_problem(&e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

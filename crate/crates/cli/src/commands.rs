use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use cbwk::estimators::harness::{self, KdeRateParams, KdeRateReport, WeissmanParams, WeissmanReport};
use cbwk::estimators::KernelSpec;
use cbwk::simulator::{self, RegretReport, RoundRecord};
use cbwk::{Factor, FeedbackMode, ProblemInstance};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RegretReport,
    /// Global log-log slope, when at least three horizons have positive
    /// regret.
    pub slope: Option<f64>,
    /// Horizons whose regret lies below zero by more than the CI half-width.
    pub negative_regret: Vec<u64>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.negative_regret.is_empty()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs the experiment and writes the report, plus the optional trajectory
/// log and plot table. Nothing is written if the config or instance is
/// invalid.
pub fn run(config: &ExperimentConfig, base: &Path) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let instance = config.resolve_instance(base)?;
    let mode = FeedbackMode::from(config.mode);
    let kind = config.policy_kind();
    let params = config.params();

    let report = simulator::run_experiment(&instance, mode, &kind, &params)?;
    let slope = simulator::fit_loglog_slope(&report).ok().map(|f| f.slope);
    report.write_csv(create(&config.out)?, slope)?;
    if let Some(path) = &config.gnuplot {
        report.write_gnuplot(create(path)?)?;
    }
    if let Some(path) = &config.trajectories {
        write_trajectories(&instance, config, create(path)?)?;
    }
    Ok(RunOutcome {
        negative_regret: report.negative_regret_horizons(),
        report,
        slope,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Per-round log of trial 0 of batch 0 at every horizon, replaying the exact
/// seed used in the experiment.
pub fn write_trajectories<W: Write>(
    instance: &ProblemInstance,
    config: &ExperimentConfig,
    out: W,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "t", "theta", "gamma", "phi", "a", "reward", "budget", "rho", "lp_objective"])
        .map_err(cbwk::Error::from)?;
    let kind = config.policy_kind();
    for &horizon in &config.horizons {
        let inst = Arc::new(instance.with_horizon(horizon)?);
        let seed = simulator::trial_seed(config.seed, horizon, 0, 0);
        let mut failure = None;
        simulator::run_trial_observed(&inst, config.mode.into(), &kind, seed, |r: &RoundRecord<'_>| {
            if failure.is_some() {
                return;
            }
            let gamma = match r.factor {
                Factor::Label(g) => g.to_string(),
                Factor::Point(x) => join(x),
            };
            let row = [
                horizon.to_string(),
                r.round.to_string(),
                r.context.to_string(),
                gamma,
                r.decision.phi_at_context.to_string(),
                r.decision.action.as_u8().to_string(),
                r.outcome.reward.to_string(),
                join(r.remaining),
                join(&r.decision.rate),
                r.decision.lp_objective.to_string(),
            ];
            if let Err(e) = w.write_record(&row) {
                failure = Some(e);
            }
        })?;
        if let Some(e) = failure {
            return Err(cbwk::Error::from(e).into());
        }
    }
    w.flush()?;
    Ok(())
}

pub fn print_summary(outcome: &RunOutcome, mut out: impl Write) -> std::io::Result<()> {
    let r = &outcome.report;
    writeln!(
        out,
        "{} policy, {} feedback, {} x {} trials",
        r.policy,
        r.mode.as_str(),
        r.n_estimations,
        r.n_trials
    )?;
    writeln!(out, "{:>8} {:>12} {:>12} {:>10} {:>10}", "T", "fluid", "regret", "ci99", "stop")?;
    for h in &r.horizons {
        writeln!(
            out,
            "{:>8} {:>12.2} {:>12.3} {:>10.3} {:>10.1}",
            h.horizon, h.fluid_value, h.mean_regret, h.ci_half_width, h.mean_stop_time
        )?;
    }
    match outcome.slope {
        Some(s) => writeln!(out, "log-log slope {s:.3}")?,
        None => writeln!(out, "log-log slope unavailable (fewer than 3 positive regrets)")?,
    }
    if !outcome.passed() {
        writeln!(out, "FAIL: regret below -CI at T = {:?}", outcome.negative_regret)?;
    }
    Ok(())
}

pub fn weissman(params: &WeissmanParams, out: Option<&Path>) -> Result<WeissmanReport, CliError> {
    let report = harness::weissman_suite(params)?;
    if let Some(path) = out {
        report.write_csv(create(path)?)?;
    }
    Ok(report)
}

pub fn kde_rate(params: &KdeRateParams, out: Option<&Path>) -> Result<KdeRateReport, CliError> {
    let report = harness::kde_rate_suite(params)?;
    if let Some(path) = out {
        report.write_csv(create(path)?)?;
    }
    Ok(report)
}

pub fn kernel_by_name(name: &str) -> Result<KernelSpec, CliError> {
    KernelSpec::by_name(name).ok_or_else(|| CliError::Config(format!("unknown kernel `{name}`")))
}

use serde::Serialize;

use crate::coordinators::{Algorithm, RunResult};
use crate::divisions::{regularity_constants, RegularityConstants};
use crate::error::{Error, Result};
use crate::firm::FirmInstance;
use crate::harness::config::{ExperimentConfig, DEFAULT_DYNAMIC_ROUNDS, DEFAULT_STATIC_ROUNDS};
use crate::linalg::norm;
use crate::oracle::{self, OracleSolution};
use crate::scenario::DynamicRun;

/// Slack for comparisons against dual values.
pub const DUAL_SLACK: f64 = 1e-8;
/// Slack for comparisons that involve the oracle's primal value.
pub const PRIMAL_SLACK: f64 = 1e-6;
/// Slack for bounds on prices and excess supplies.
pub const ITERATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One inequality `lhs <= rhs`. For checks over a whole trace, `t` is the round
/// with the smallest margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub status: CheckStatus,
    pub t: Option<u64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub note: Option<String>,
}

impl BoundCheck {
    fn skipped(name: &str, note: &str) -> Self {
        Self { name: name.into(), status: CheckStatus::Skipped, t: None, lhs: None, rhs: None, note: Some(note.into()) }
    }

    fn single(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        let ok = lhs <= rhs + slack;
        Self {
            name: name.into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            t: None,
            lhs: Some(lhs),
            rhs: Some(rhs),
            note: None,
        }
    }

    /// Checks `lhs(t) <= rhs(t) + slack` over all `(t, lhs, rhs)`; reports the tightest round.
    fn over_trace(name: &str, rows: impl IntoIterator<Item = (u64, f64, f64)>, slack: f64) -> Self {
        let mut worst: Option<(u64, f64, f64)> = None;
        for (t, lhs, rhs) in rows {
            if worst.is_none_or(|(_, l, r)| lhs - rhs > l - r || (lhs - rhs).is_nan()) {
                worst = Some((t, lhs, rhs));
            }
        }
        match worst {
            None => Self::skipped(name, "empty trace"),
            Some((t, lhs, rhs)) => Self { t: Some(t), ..Self::single(name, lhs, rhs, slack) },
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigReport {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub rounds_completed: usize,
    pub converged: bool,
    #[serde(rename = "default_static_T")]
    pub default_static_rounds: usize,
    #[serde(rename = "default_dynamic_T")]
    pub default_dynamic_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub sigma: Option<f64>,
    #[serde(rename = "K")]
    pub lipschitz: Option<f64>,
    pub kappa: Option<f64>,
    /// Largest sales Lipschitz constant; the maximum over all rounds for dynamic runs.
    #[serde(rename = "Kprime")]
    pub max_sales_lipschitz: f64,
    pub b: f64,
    pub gradient_bound: f64,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub lambda_star: Vec<f64>,
    #[serde(rename = "F_star")]
    pub f_star: f64,
    #[serde(rename = "G_star")]
    pub g_star: f64,
    pub residual: f64,
    pub boundary: bool,
    pub iterations: usize,
}

impl From<&OracleSolution> for OracleReport {
    fn from(s: &OracleSolution) -> Self {
        Self {
            lambda_star: s.lambda_star.to_vec(),
            f_star: s.f_star,
            g_star: s.g_star,
            residual: s.residual,
            boundary: s.boundary,
            iterations: s.iterations,
        }
    }
}

/// A price together with what the firm does at it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub t: u64,
    pub lambda: Vec<f64>,
    /// Excess supply at `lambda`; absent for dynamic averages, which have no single firm.
    pub excess: Option<Vec<f64>>,
    pub residual: Option<f64>,
    #[serde(rename = "F")]
    pub primal: Option<f64>,
    #[serde(rename = "G")]
    pub dual: Option<f64>,
    /// `F* - F` at this price, or the mean per-round gap for dynamic runs.
    pub gap: Option<f64>,
    /// Mean of the excess supplies observed up to round `t`.
    pub mean_observed_excess: Vec<f64>,
    pub mean_observed_excess_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub config: ConfigReport,
    pub constants: ConstantsReport,
    pub oracle: Option<OracleReport>,
    pub bounds: Vec<BoundCheck>,
    #[serde(rename = "final")]
    pub last: PointReport,
    pub average: PointReport,
}

impl SummaryReport {
    /// True when no enabled check failed.
    pub fn all_passed(&self) -> bool {
        self.bounds.iter().all(BoundCheck::passed)
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

fn config_report(cfg: &ExperimentConfig, run: &RunResult) -> ConfigReport {
    ConfigReport {
        experiment: cfg.resolved(),
        rounds_completed: run.trace.len(),
        converged: run.converged,
        default_static_rounds: DEFAULT_STATIC_ROUNDS,
        default_dynamic_rounds: DEFAULT_DYNAMIC_ROUNDS,
    }
}

fn point_at(instance: &FirmInstance, t: u64, lambda: &[f64], mean: &[f64], f_star: Option<f64>) -> Result<PointReport> {
    let resp = instance.respond(lambda)?;
    Ok(PointReport {
        t,
        lambda: lambda.to_vec(),
        residual: Some(norm(&resp.excess)),
        excess: Some(resp.excess),
        primal: Some(resp.primal),
        dual: Some(resp.dual),
        gap: f_star.map(|f| f - resp.primal),
        mean_observed_excess: mean.to_vec(),
        mean_observed_excess_norm: norm(mean),
    })
}

fn gradient_bound_check(run: &RunResult, bound: f64) -> BoundCheck {
    BoundCheck::over_trace(
        "gradient_bound",
        run.trace.iter().map(|r| (r.t, norm(&r.excess), bound)),
        ITERATE_SLACK * bound.max(1.0),
    )
}

/// Componentwise `-1 <= lambda_{t,k} <= b`, reported as one margin per round.
fn price_box_check(run: &RunResult, b: f64) -> BoundCheck {
    BoundCheck::over_trace(
        "price_box",
        run.trace.iter().map(|r| {
            let over = r.lambda.iter().map(|l| (l - b).max(-1.0 - l)).fold(f64::NEG_INFINITY, f64::max);
            (r.t, over, 0.0)
        }),
        ITERATE_SLACK,
    )
}

/// Summary of a run on a fixed instance. Bound checks that need the optimum
/// are skipped without an oracle solution.
pub fn summarize(
    cfg: &ExperimentConfig,
    instance: &FirmInstance,
    run: &RunResult,
    oracle: Option<&OracleSolution>,
) -> Result<SummaryReport> {
    let last_rec = run.trace.last().ok_or_else(|| Error::InvalidConfig("empty trace".into()))?;
    let consts = regularity_constants(instance)?;
    let f_star = oracle.map(|o| o.f_star);
    let mut bounds = vec![gradient_bound_check(run, instance.gradient_bound())];

    match cfg.algo {
        Algorithm::Solo => {
            bounds.push(price_box_check(run, consts.b_bound));
            bounds.extend(solo_checks(instance, &consts, run, oracle)?);
        }
        Algorithm::Nesterov => bounds.extend(nesterov_checks(&consts, run, oracle)?),
        Algorithm::Gd => {}
    }

    Ok(SummaryReport {
        config: config_report(cfg, run),
        constants: ConstantsReport {
            sigma: Some(consts.sigma),
            lipschitz: Some(consts.lipschitz),
            kappa: Some(consts.kappa),
            max_sales_lipschitz: consts.max_sales_lipschitz,
            b: consts.b_bound,
            gradient_bound: instance.gradient_bound(),
            eta: run.eta,
        },
        oracle: oracle.map(OracleReport::from),
        bounds,
        last: point_at(instance, last_rec.t, &last_rec.lambda, &last_rec.running_avg_excess, f_star)?,
        average: point_at(instance, last_rec.t, &run.average_price, &last_rec.running_avg_excess, f_star)?,
    })
}

/// Regret against the oracle price and the average-price bounds.
pub fn solo_checks(
    instance: &FirmInstance,
    consts: &RegularityConstants,
    run: &RunResult,
    oracle: Option<&OracleSolution>,
) -> Result<Vec<BoundCheck>> {
    let names = ["solo_regret", "average_gap", "average_residual"];
    let Some(sol) = oracle else {
        return Ok(names.iter().map(|n| BoundCheck::skipped(n, "needs the oracle optimum")).collect());
    };
    let rounds = run.trace.len() as u64;
    let regret: f64 = run.trace.iter().map(|r| r.dual - sol.g_star).sum();
    let sq_sum: f64 = run.trace.iter().map(|r| norm(&r.excess).powi(2)).sum();
    let max_grad = run.trace.iter().map(|r| norm(&r.excess)).fold(0.0, f64::max);
    let lambda_norm = sol.lambda_star.norm();
    let rhs = oracle::solo_regret_rhs(lambda_norm, sq_sum, max_grad, rounds)?;
    let (gap_rhs, res_rhs) =
        oracle::average_price_bounds(consts, instance.m(), instance.n(), instance.c(), instance.d(), lambda_norm, rounds)?;
    let at_avg = instance.respond(&run.average_price)?;
    Ok(vec![
        BoundCheck::single("solo_regret", regret, rhs, DUAL_SLACK * rhs.max(1.0)),
        BoundCheck::single("average_gap", (sol.f_star - at_avg.primal).abs(), gap_rhs, PRIMAL_SLACK),
        BoundCheck::single("average_residual", norm(&at_avg.excess), res_rhs, ITERATE_SLACK),
    ])
}

/// The accelerated dual-gap rate and both primal bounds at every logged round.
pub fn nesterov_checks(
    consts: &RegularityConstants,
    run: &RunResult,
    oracle: Option<&OracleSolution>,
) -> Result<Vec<BoundCheck>> {
    let names = ["accelerated_dual_rate", "accelerated_gap", "accelerated_feasibility"];
    let Some(sol) = oracle else {
        return Ok(names.iter().map(|n| BoundCheck::skipped(n, "needs the oracle optimum")).collect());
    };
    let eta = run.eta.ok_or_else(|| Error::InvalidConfig("accelerated run without a step size".into()))?;
    let dist = run.initial_price.distance(&sol.lambda_star);
    if eta * consts.kappa > 1.0 + 1e-12 {
        return Ok(names.iter().map(|n| BoundCheck::skipped(n, "step size exceeds 1/kappa")).collect());
    }
    let mut rows = Vec::with_capacity(run.trace.len());
    for r in &run.trace {
        let (gap_rhs, feas_rhs) = oracle::accelerated_bounds(consts, eta, dist, r.t)?;
        rows.push((r, gap_rhs, feas_rhs));
    }
    let rate = |t: u64| 2.0 * dist * dist / (eta * ((t + 1) as f64).powi(2));
    Ok(vec![
        BoundCheck::over_trace(
            "accelerated_dual_rate",
            rows.iter().map(|(r, _, _)| (r.t, r.dual - sol.g_star, rate(r.t))),
            DUAL_SLACK,
        ),
        BoundCheck::over_trace(
            "accelerated_gap",
            rows.iter().map(|(r, g, _)| (r.t, (r.primal - sol.f_star).abs(), *g)),
            PRIMAL_SLACK,
        ),
        BoundCheck::over_trace(
            "accelerated_feasibility",
            rows.iter().map(|(r, _, f)| (r.t, norm(&r.excess), *f)),
            ITERATE_SLACK,
        ),
    ])
}

/// Summary of a dynamic run, checked against the constants realized over the run.
pub fn summarize_dynamic(cfg: &ExperimentConfig, dynamic: &DynamicRun) -> Result<SummaryReport> {
    let run = &dynamic.run;
    let last_rec = run.trace.last().ok_or_else(|| Error::InvalidConfig("empty trace".into()))?;
    let d = cfg.dimension();
    let gradient_bound = (cfg.m + cfg.n) as f64 * cfg.c * (d as f64).sqrt();
    let b = dynamic.realized_b();
    let norm_bound = b * (d as f64).sqrt();
    let bounds = vec![
        gradient_bound_check(run, gradient_bound),
        price_box_check(run, b),
        BoundCheck::over_trace(
            "price_norm",
            run.trace.iter().map(|r| (r.t, norm(&r.lambda), norm_bound)),
            ITERATE_SLACK,
        ),
    ];
    let gaps: Vec<f64> = run.trace.iter().filter_map(|r| r.oracle_gap).collect();
    let mean_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    let mean = &last_rec.running_avg_excess;
    let bare = |lambda: &[f64], gap: Option<f64>| PointReport {
        t: last_rec.t,
        lambda: lambda.to_vec(),
        excess: None,
        residual: None,
        primal: None,
        dual: None,
        gap,
        mean_observed_excess: mean.clone(),
        mean_observed_excess_norm: norm(mean),
    };
    Ok(SummaryReport {
        config: config_report(cfg, run),
        constants: ConstantsReport {
            sigma: None,
            lipschitz: None,
            kappa: None,
            max_sales_lipschitz: dynamic.realized_max_sales_lipschitz,
            b,
            gradient_bound,
            eta: None,
        },
        oracle: None,
        bounds,
        last: PointReport {
            excess: Some(last_rec.excess.clone()),
            residual: Some(norm(&last_rec.excess)),
            primal: Some(last_rec.primal),
            dual: Some(last_rec.dual),
            ..bare(&last_rec.lambda, last_rec.oracle_gap)
        },
        average: bare(&run.average_price, mean_gap),
    })
}

//! Monte Carlo driver: simulate replications, run the estimators and
//! aggregate mean, bias and standard deviation per sample size.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carma_model::{FamilyId, ParamFamily};
use crate::error::{Error, Result};
use crate::garcia_estimator::garcia_estimate;
use crate::optimize::NmOptions;
use crate::pathsim::{simulate, Scheme, SimConfig};
use crate::stable_levy::{RngStream, StableParams};
use crate::whittle_estimator::{whittle_fit, Objective};

/// Convention note written into every report.
pub const STD_CONVENTION: &str =
    "std uses divisor (successes - 1); reported as 0 with std_defined = false when successes = 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Whittle,
    Garcia,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Whittle => "whittle",
            EstimatorKind::Garcia => "garcia",
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}
fn default_n_list() -> Vec<usize> {
    vec![500, 2000, 5000]
}
fn default_replications() -> usize {
    500
}
fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Whittle, EstimatorKind::Garcia]
}
fn default_delta() -> f64 {
    1.0
}
fn default_step() -> f64 {
    0.01
}
fn default_scheme() -> Scheme {
    Scheme::Euler
}

/// One Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyId,
    /// Parameter box; required for GENERIC, optional override otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    pub theta0: Vec<f64>,
    pub alpha: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

impl ExperimentConfig {
    pub fn new(family: FamilyId, theta0: Vec<f64>, alpha: f64) -> Self {
        Self {
            family,
            bounds: None,
            theta0,
            alpha,
            sigma: default_sigma(),
            n_list: default_n_list(),
            replications: default_replications(),
            estimators: default_estimators(),
            seed: 0,
            threads: None,
            output: None,
            delta: default_delta(),
            step: default_step(),
            burn_in: 0.0,
            scheme: default_scheme(),
        }
    }

    pub fn param_family(&self) -> Result<ParamFamily> {
        match (self.family, &self.bounds) {
            (FamilyId::Generic, Some(b)) => {
                if !b.len().is_multiple_of(2) {
                    return Err(Error::InvalidConfig("GENERIC bounds must have 2p entries".into()));
                }
                ParamFamily::generic(b.len() / 2, b.clone())
            }
            (FamilyId::Generic, None) => Err(Error::InvalidConfig(
                "GENERIC family needs explicit bounds".into(),
            )),
            (id, Some(b)) => ParamFamily::from_id(id)?.with_bounds(b.clone()),
            (id, None) => ParamFamily::from_id(id),
        }
    }

    fn sim_config(&self, n: usize) -> SimConfig {
        SimConfig::new(n)
            .with_step(self.step)
            .with_delta(self.delta)
            .with_burn_in(self.burn_in)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must be nonempty with positive entries".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return bad(format!("alpha must lie in (0, 2], got {}", self.alpha));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        let family = self.param_family()?;
        if self.theta0.len() != family.dim() {
            return bad(format!(
                "theta0 has {} entries, family needs {}",
                self.theta0.len(),
                family.dim()
            ));
        }
        if !family.in_interior(&self.theta0) {
            return bad(format!(
                "theta0 {:?} is not interior to the parameter box",
                self.theta0
            ));
        }
        if self.family == FamilyId::Generic && self.estimators.contains(&EstimatorKind::Garcia) {
            return bad("the garcia estimator does not support GENERIC".into());
        }
        family.valid_spec(&self.theta0, self.delta)?;
        let n_max = *self.n_list.iter().max().expect("nonempty");
        self.sim_config(n_max).check()?;
        StableParams::symmetric(self.alpha, self.sigma)?;
        Ok(())
    }
}

/// Outcome of one estimator on one replication at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub theta_hat: Option<Vec<f64>>,
    pub converged: bool,
    pub failure_stage: Option<String>,
    pub message: Option<String>,
}

impl ReplicationRecord {
    pub fn failed(&self) -> bool {
        self.theta_hat.is_none()
    }
}

/// Aggregate for one (estimator, n, coordinate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub coordinate: usize,
    pub theta0: f64,
    pub succeeded: usize,
    pub failed: usize,
    /// `None` when no replication succeeded.
    pub mean: Option<f64>,
    pub bias: Option<f64>,
    pub std: Option<f64>,
    pub std_defined: bool,
}

impl SummaryRow {
    pub fn is_empty(&self) -> bool {
        self.succeeded == 0
    }

    pub fn failure_fraction(&self) -> f64 {
        self.failed as f64 / (self.failed + self.succeeded).max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub std_convention: String,
    pub summary: Vec<SummaryRow>,
    pub records: Vec<ReplicationRecord>,
    /// Not serialized so that identical seeds give identical files.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl ExperimentReport {
    pub fn row(&self, estimator: EstimatorKind, n: usize, coordinate: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.estimator == estimator && r.n == n && r.coordinate == coordinate)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Summary table as CSV; empty rows leave the statistics blank.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([
            "estimator",
            "n",
            "coordinate",
            "theta0",
            "succeeded",
            "failed",
            "mean",
            "bias",
            "std",
            "std_defined",
        ])
        .map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.summary {
            w.write_record([
                r.estimator.name().to_string(),
                r.n.to_string(),
                r.coordinate.to_string(),
                r.theta0.to_string(),
                r.succeeded.to_string(),
                r.failed.to_string(),
                opt(r.mean),
                opt(r.bias),
                opt(r.std),
                r.std_defined.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Mean, `|mean - theta0|` and sample std of one coordinate over the
/// successful records.
pub fn summarize(
    records: &[ReplicationRecord],
    estimator: EstimatorKind,
    n: usize,
    theta0: &[f64],
) -> Vec<SummaryRow> {
    let chosen: Vec<&ReplicationRecord> = records
        .iter()
        .filter(|r| r.estimator == estimator && r.n == n)
        .collect();
    let failed = chosen.iter().filter(|r| r.failed()).count();
    let ok: Vec<&Vec<f64>> = chosen.iter().filter_map(|r| r.theta_hat.as_ref()).collect();
    theta0
        .iter()
        .enumerate()
        .map(|(k, &t0)| {
            let xs: Vec<f64> = ok.iter().map(|t| t[k]).collect();
            let m = xs.len();
            let (mean, std, std_defined) = if m == 0 {
                (None, None, false)
            } else {
                let mean = xs.iter().sum::<f64>() / m as f64;
                if m == 1 {
                    (Some(mean), Some(0.0), false)
                } else {
                    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
                    (Some(mean), Some((ss / (m - 1) as f64).sqrt()), true)
                }
            };
            SummaryRow {
                estimator,
                n,
                coordinate: k,
                theta0: t0,
                succeeded: m,
                failed,
                mean,
                bias: mean.map(|v| (v - t0).abs()),
                std,
                std_defined,
            }
        })
        .collect()
}

fn finite_estimate(theta: Vec<f64>) -> Option<Vec<f64>> {
    theta.iter().all(|v| v.is_finite()).then_some(theta)
}

fn run_whittle(y: &[f64], family: &ParamFamily, cfg: &ExperimentConfig, r: usize) -> ReplicationRecord {
    let mut rec = ReplicationRecord {
        replication: r,
        n: y.len(),
        estimator: EstimatorKind::Whittle,
        theta_hat: None,
        converged: false,
        failure_stage: None,
        message: None,
    };
    let objective = Objective::Alpha { alpha: cfg.alpha };
    match whittle_fit(y, family, cfg.delta, objective, &NmOptions::default()) {
        Ok(res) => {
            rec.converged = res.converged;
            rec.message = res.failure.clone();
            // running out of iterations still yields an estimate
            let usable = res.objective_value.is_finite()
                && res
                    .failure
                    .as_deref()
                    .is_none_or(|m| m.starts_with("no convergence"));
            if usable {
                rec.theta_hat = finite_estimate(res.theta_hat);
            }
            if rec.theta_hat.is_none() {
                rec.failure_stage = Some("optimizer".into());
            }
        }
        Err(e) => {
            rec.failure_stage = Some("input".into());
            rec.message = Some(e.to_string());
        }
    }
    rec
}

fn run_garcia(y: &[f64], family: &ParamFamily, cfg: &ExperimentConfig, r: usize) -> ReplicationRecord {
    let mut rec = ReplicationRecord {
        replication: r,
        n: y.len(),
        estimator: EstimatorKind::Garcia,
        theta_hat: None,
        converged: false,
        failure_stage: None,
        message: None,
    };
    match garcia_estimate(y, family, cfg.delta) {
        Ok(res) => {
            rec.converged = !res.failed;
            rec.message = res.message;
            rec.failure_stage = res.failure_stage.map(|s| s.name().to_string());
            rec.theta_hat = res.theta_hat.and_then(finite_estimate);
            if rec.theta_hat.is_none() && rec.failure_stage.is_none() {
                rec.failure_stage = Some("non_finite".into());
            }
        }
        Err(e) => {
            rec.failure_stage = Some("input".into());
            rec.message = Some(e.to_string());
        }
    }
    rec
}

fn run_replication(
    cfg: &ExperimentConfig,
    family: &ParamFamily,
    n_max: usize,
    r: usize,
) -> Result<Vec<ReplicationRecord>> {
    let spec = family.spec(&cfg.theta0, cfg.delta)?;
    let noise = StableParams::symmetric(cfg.alpha, cfg.sigma)?;
    let mut rng = RngStream::new(cfg.seed, r as u64);
    let path = simulate(cfg.scheme, &spec, &noise, &cfg.sim_config(n_max), &mut rng)?;
    let mut out = Vec::with_capacity(cfg.n_list.len() * cfg.estimators.len());
    for &n in &cfg.n_list {
        let y = &path.values[..n];
        for est in &cfg.estimators {
            out.push(match est {
                EstimatorKind::Whittle => run_whittle(y, family, cfg, r),
                EstimatorKind::Garcia => run_garcia(y, family, cfg, r),
            });
        }
    }
    Ok(out)
}

/// Runs every replication. Replication `r` draws from stream `r` of the
/// seed and uses the prefixes of one path for the sample sizes in
/// `n_list`, so the report does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let family = cfg.param_family()?;
    let n_max = *cfg.n_list.iter().max().expect("validated");
    let work = || -> Result<Vec<Vec<ReplicationRecord>>> {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(cfg, &family, n_max, r))
            .collect()
    };
    let per_rep = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let records: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();

    let mut estimators = cfg.estimators.clone();
    estimators.sort();
    estimators.dedup();
    let mut n_list = cfg.n_list.clone();
    n_list.sort_unstable();
    n_list.dedup();
    let mut summary = Vec::new();
    for &est in &estimators {
        for &n in &n_list {
            summary.extend(summarize(&records, est, n, &cfg.theta0));
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        std_convention: STD_CONVENTION.into(),
        summary,
        records,
        wall_clock: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(theta: Option<f64>) -> ReplicationRecord {
        ReplicationRecord {
            replication: 0,
            n: 10,
            estimator: EstimatorKind::Whittle,
            theta_hat: theta.map(|t| vec![t]),
            converged: theta.is_some(),
            failure_stage: None,
            message: None,
        }
    }

    #[test]
    fn two_point_summary() {
        let rows = summarize(
            &[rec(Some(-1.0)), rec(Some(-1.1))],
            EstimatorKind::Whittle,
            10,
            &[-1.0],
        );
        let r = &rows[0];
        assert_abs_diff_eq!(r.mean.unwrap(), -1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(r.bias.unwrap(), 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(r.std.unwrap(), 0.1 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(r.std_defined);
    }

    #[test]
    fn single_and_empty() {
        let one = &summarize(&[rec(Some(-2.0)), rec(None)], EstimatorKind::Whittle, 10, &[-1.0])[0];
        assert_eq!(one.std, Some(0.0));
        assert!(!one.std_defined);
        assert_eq!((one.succeeded, one.failed), (1, 1));
        let none = &summarize(&[rec(None)], EstimatorKind::Whittle, 10, &[-1.0])[0];
        assert!(none.is_empty());
        assert_eq!(none.mean, None);
        assert_eq!(none.failure_fraction(), 1.0);
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::new(FamilyId::Ou, vec![-1.0], 1.5);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.n_list.clear();
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.theta0 = vec![-5.0];
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.alpha = 2.5;
        assert!(c.validate().is_err());
        let c = ExperimentConfig::new(FamilyId::Generic, vec![1.0, 1.0], 1.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_from_json() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"family":"OU","theta0":[-1.0],"alpha":1.5}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(FamilyId::Ou, vec![-1.0], 1.5));
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"family":"OU","theta0":[-1],"alpha":1.5,"x":1}"#
        )
        .is_err());
    }

    #[test]
    fn small_run_is_deterministic_across_thread_counts() {
        let mut cfg = ExperimentConfig::new(FamilyId::Ou, vec![-1.0], 1.5);
        cfg.n_list = vec![200, 100];
        cfg.replications = 6;
        cfg.step = 0.1;
        cfg.threads = Some(1);
        let a = run_experiment(&cfg).unwrap();
        cfg.threads = Some(3);
        let mut b = run_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        b.config.threads = Some(1);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.records.len(), 6 * 2 * 2);
        assert_eq!(a.summary.len(), 4);
        let row = a.row(EstimatorKind::Whittle, 200, 0).unwrap();
        assert_eq!(row.succeeded + row.failed, 6);
        let csv = a.summary_csv().unwrap();
        assert!(csv.starts_with("estimator,n,coordinate"));
        assert_eq!(csv.lines().count(), 5);
        assert!(!csv.contains('\r'));
    }
}

//! End-to-end queue study: solve the candidate policies, tabulate their metrics,
//! simulate every (policy, metric, initial) cell and compare each MDP policy with
//! the incumbent.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Policy;
use crate::metrics::{metric_table_csv, MetricFamily, MetricReport};
use crate::queue::{
    build_queue_mdp, default_horizon, extract_threshold, queue_metric_report, sample_performance,
    threshold_policy, Initial, Metric, QueueCriterion, QueueParams,
};
use crate::solvers::{policy_iteration_average, policy_iteration_discounted};
use crate::stats::{
    dagostino_k2, describe, difference_distribution, mann_whitney_u, pearson_correlation,
    shuffled_pair, t_test_one_sample, welch_t_test, Alternative, MannWhitney, SampleSet, Summary,
    TestResult, DEFAULT_ZETA,
};

fn default_betas() -> Vec<f64> {
    vec![2e-3, 4e-4]
}

fn default_incumbent() -> usize {
    17
}

fn default_m() -> usize {
    5000
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_zeta() -> f64 {
    DEFAULT_ZETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    /// One discounted MDP policy per rate; the last is the near-Blackwell one.
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_incumbent")]
    pub incumbent_threshold: usize,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    /// Horizon override for average-cost runs.
    #[serde(default)]
    pub t_average: Option<f64>,
    /// Horizon override for discounted runs.
    #[serde(default)]
    pub t_discounted: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            lambda: None,
            mu: None,
            c: None,
            r: None,
            n: None,
            betas: default_betas(),
            incumbent_threshold: default_incumbent(),
            m: default_m(),
            t_average: None,
            t_discounted: None,
            seed: default_seed(),
            zeta: default_zeta(),
            out: None,
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> QueueParams {
        let d = QueueParams::default();
        QueueParams {
            lambda: self.lambda.unwrap_or(d.lambda),
            mu: self.mu.unwrap_or(d.mu),
            c: self.c.unwrap_or(d.c),
            r: self.r.unwrap_or(d.r),
            n: self.n.unwrap_or(d.n),
            beta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.params();
        params.validate()?;
        for &b in &self.betas {
            params.with_beta(b).validate()?;
        }
        if self.m < 2 {
            return Err(Error::TooSmall {
                needed: 2,
                got: self.m,
            });
        }
        if self.incumbent_threshold > params.n {
            return Err(Error::Domain {
                name: "threshold",
                value: self.incumbent_threshold as f64,
                range: "[0, N]",
            });
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Domain {
                name: "zeta",
                value: self.zeta,
                range: "(0, 1)",
            });
        }
        for t in [self.t_average, self.t_discounted].into_iter().flatten() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Domain {
                    name: "T",
                    value: t,
                    range: "(0, inf)",
                });
            }
        }
        Ok(())
    }

    pub fn horizon(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Average => self.t_average,
            Metric::Discounted { .. } => self.t_discounted,
        }
        .unwrap_or_else(|| default_horizon(metric))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    Existing,
    Average,
    Discounted { beta: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPolicy {
    pub name: String,
    pub objective: Objective,
    pub policy: Policy,
    pub threshold: Option<usize>,
}

fn discounted_name(i: usize, count: usize) -> String {
    if count == 2 && i == 1 {
        "blackwell".into()
    } else if count == 1 || i == 0 {
        "discounted".into()
    } else {
        format!("discounted-{i}")
    }
}

/// Index 0 is the incumbent, 1 the average-cost policy, then one per β.
pub fn solve_policies(cfg: &StudyConfig) -> Result<Vec<StudyPolicy>> {
    cfg.validate()?;
    let params = cfg.params();
    let incumbent = threshold_policy(cfg.incumbent_threshold, params.n)?;
    let mut out = vec![StudyPolicy {
        name: "existing".into(),
        objective: Objective::Existing,
        threshold: Some(cfg.incumbent_threshold),
        policy: incumbent,
    }];

    let avg = build_queue_mdp(&params, QueueCriterion::Average)?;
    let solved = policy_iteration_average(&avg.model, 0)?.policy;
    out.push(StudyPolicy {
        name: "average".into(),
        objective: Objective::Average,
        threshold: extract_threshold(&solved),
        policy: solved,
    });

    for (i, &beta) in cfg.betas.iter().enumerate() {
        let disc = build_queue_mdp(&params.with_beta(beta), QueueCriterion::Discounted)?;
        let alpha = disc.alpha.expect("discounted model carries alpha");
        let solved = policy_iteration_discounted(&disc.model, alpha)?.policy;
        out.push(StudyPolicy {
            name: discounted_name(i, cfg.betas.len()),
            objective: Objective::Discounted { beta, alpha },
            threshold: extract_threshold(&solved),
            policy: solved,
        });
    }
    Ok(out)
}

/// Threshold-policy table.
pub fn policies_csv(policies: &[StudyPolicy]) -> String {
    let mut out = String::from("policy,objective,threshold,beta,alpha\n");
    for p in policies {
        let threshold = p.threshold.map(|t| t.to_string()).unwrap_or_else(|| "none".into());
        let (objective, beta, alpha) = match p.objective {
            Objective::Existing => ("none", "none".to_string(), "none".to_string()),
            Objective::Average => ("bias", "none".into(), "none".into()),
            Objective::Discounted { beta, alpha } => ("state-value", format!("{beta}"), format!("{alpha:.6}")),
        };
        let _ = writeln!(out, "{},{objective},{threshold},{beta},{alpha}", p.name);
    }
    out
}

pub fn metric_reports(cfg: &StudyConfig, policies: &[StudyPolicy]) -> Result<Vec<(String, MetricReport)>> {
    let params = cfg.params();
    policies
        .iter()
        .map(|p| Ok((p.name.clone(), queue_metric_report(&params, &p.policy, &cfg.betas)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Index into the output of [`solve_policies`].
    pub policy: usize,
    pub metric: Metric,
    pub initial: Initial,
}

impl Cell {
    pub fn stem(&self, policies: &[StudyPolicy]) -> String {
        let metric = match self.metric {
            Metric::Average => "average".to_string(),
            Metric::Discounted { beta } => format!("discounted-beta{beta}"),
        };
        format!("{}_{}_{}", policies[self.policy].name, metric, self.initial.tag())
    }
}

const INITIALS: [Initial; 2] = [Initial::Uniform, Initial::Stationary];

/// Every policy under the average metric, and each discounted metric for the
/// incumbent and the policy solved at that rate.
pub fn study_cells(cfg: &StudyConfig, policies: &[StudyPolicy]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for policy in 0..policies.len() {
        for initial in INITIALS {
            cells.push(Cell {
                policy,
                metric: Metric::Average,
                initial,
            });
        }
    }
    for (i, &beta) in cfg.betas.iter().enumerate() {
        for policy in [0, 2 + i] {
            for initial in INITIALS {
                cells.push(Cell {
                    policy,
                    metric: Metric::Discounted { beta },
                    initial,
                });
            }
        }
    }
    cells
}

/// MDP policy versus incumbent under one metric and initial distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub mdp: Cell,
    pub existing: Cell,
}

pub fn study_pairings(cfg: &StudyConfig) -> Vec<Pairing> {
    let mut metrics = vec![(1, Metric::Average)];
    metrics.extend(cfg.betas.iter().enumerate().map(|(i, &beta)| (2 + i, Metric::Discounted { beta })));
    let mut out = Vec::new();
    for initial in INITIALS {
        for &(policy, metric) in &metrics {
            out.push(Pairing {
                mdp: Cell { policy, metric, initial },
                existing: Cell {
                    policy: 0,
                    metric,
                    initial,
                },
            });
        }
    }
    out
}

/// Same master seed for every cell, so policies share variates trajectory by trajectory.
pub fn simulate_cell(cfg: &StudyConfig, policies: &[StudyPolicy], cell: &Cell) -> Result<SampleSet> {
    let mut set = sample_performance(
        &cfg.params(),
        &policies[cell.policy].policy,
        cell.metric,
        cell.initial,
        cfg.m,
        cfg.horizon(cell.metric),
        cfg.seed,
    )?;
    set.meta.label = cell.stem(policies);
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mdp: String,
    pub existing: String,
    pub metric: Metric,
    pub initial: Initial,
    pub shuffle_seed: u64,
    pub delta_mean: f64,
    pub normality: TestResult,
    pub correlation: f64,
    pub t_less: TestResult,
    pub t_greater: TestResult,
    pub u_less: MannWhitney,
    pub u_greater: MannWhitney,
    pub welch_less: TestResult,
    pub welch_greater: TestResult,
}

/// Δ = MDP − incumbent after independent shuffles; `less` favours the MDP policy.
pub fn compare(mdp: &SampleSet, existing: &SampleSet, shuffle_seed: u64, zeta: f64) -> Result<Comparison> {
    let delta = difference_distribution(mdp, existing, shuffle_seed)?;
    let (xs, ys) = shuffled_pair(&mdp.values, &existing.values, shuffle_seed);
    let (x, y) = (&mdp.values, &existing.values);
    Ok(Comparison {
        mdp: mdp.meta.label.clone(),
        existing: existing.meta.label.clone(),
        metric: mdp.meta.metric.unwrap_or(Metric::Average),
        initial: mdp.meta.initial.unwrap_or(Initial::Stationary),
        shuffle_seed,
        delta_mean: crate::stats::mean(&delta.values)?,
        normality: dagostino_k2(&delta.values, zeta)?,
        correlation: pearson_correlation(&xs, &ys)?,
        t_less: t_test_one_sample(&delta.values, 0.0, Alternative::Less, zeta)?,
        t_greater: t_test_one_sample(&delta.values, 0.0, Alternative::Greater, zeta)?,
        u_less: mann_whitney_u(x, y, Alternative::Less, zeta)?,
        u_greater: mann_whitney_u(x, y, Alternative::Greater, zeta)?,
        welch_less: welch_t_test(x, y, Alternative::Less, zeta)?,
        welch_greater: welch_t_test(x, y, Alternative::Greater, zeta)?,
    })
}

/// Shuffle seed of the k-th pairing.
pub fn shuffle_seed(master: u64, k: usize) -> u64 {
    master ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1))
}

fn find<'a>(cells: &[Cell], samples: &'a [SampleSet], target: &Cell) -> Result<&'a SampleSet> {
    cells
        .iter()
        .position(|c| c == target)
        .map(|i| &samples[i])
        .ok_or_else(|| Error::Config(format!("no samples for cell {target:?}")))
}

pub fn run_campaign(
    cfg: &StudyConfig,
    cells: &[Cell],
    samples: &[SampleSet],
) -> Result<Vec<Comparison>> {
    study_pairings(cfg)
        .iter()
        .enumerate()
        .map(|(k, pair)| {
            let a = find(cells, samples, &pair.mdp)?;
            let b = find(cells, samples, &pair.existing)?;
            compare(a, b, shuffle_seed(cfg.seed, k), cfg.zeta)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub label: String,
    pub horizon: f64,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub params: QueueParams,
    pub policies: Vec<StudyPolicy>,
    pub metrics: Vec<(String, MetricReport)>,
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
}

pub struct StudyRun {
    pub report: StudyReport,
    pub samples: Vec<SampleSet>,
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyRun> {
    let policies = solve_policies(cfg)?;
    let metrics = metric_reports(cfg, &policies)?;
    let cells = study_cells(cfg, &policies);
    let samples = cells
        .iter()
        .map(|c| simulate_cell(cfg, &policies, c))
        .collect::<Result<Vec<_>>>()?;
    let comparisons = run_campaign(cfg, &cells, &samples)?;
    let summaries = cells
        .iter()
        .zip(&samples)
        .map(|(cell, s)| {
            Ok(CellSummary {
                cell: *cell,
                label: s.meta.label.clone(),
                horizon: cfg.horizon(cell.metric),
                summary: describe(&s.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyRun {
        report: StudyReport {
            config: cfg.clone(),
            params: cfg.params(),
            policies,
            metrics,
            cells: summaries,
            comparisons,
        },
        samples,
    })
}

fn metric_name(metric: Metric, policies: &[StudyPolicy]) -> String {
    match metric {
        Metric::Average => "average".into(),
        Metric::Discounted { beta } => policies
            .iter()
            .find(|p| matches!(p.objective, Objective::Discounted { beta: b, .. } if b == beta))
            .map(|p| p.name.clone())
            .unwrap_or_else(|| format!("discounted(beta={beta})")),
    }
}

/// Empirical-distribution table for one initial distribution.
pub fn distribution_csv(report: &StudyReport, initial: Initial) -> String {
    let mut out = String::from("distribution,policy,mean,std,min,max,skewness,kurtosis\n");
    for c in report.cells.iter().filter(|c| c.cell.initial == initial) {
        let s = &c.summary;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            metric_name(c.cell.metric, &report.policies),
            report.policies[c.cell.policy].name,
            s.mean,
            s.std,
            s.min,
            s.max,
            s.skewness,
            s.kurtosis
        );
    }
    out
}

fn flag(r: &TestResult) -> &'static str {
    if r.reject {
        "True"
    } else {
        "False"
    }
}

/// Tests for the incumbent being outperformed.
pub fn less_csv(report: &StudyReport, initial: Initial) -> String {
    let mut out = String::from(
        "distribution,k2,p,reject_normal,t,p,reject_equal_means,U,p,reject_same_dist,corr\n",
    );
    for c in report.comparisons.iter().filter(|c| c.initial == initial) {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{:.6},{:.6},{},{},{:.6},{},{:.6}",
            metric_name(c.metric, &report.policies),
            c.normality.statistic,
            c.normality.p_value,
            flag(&c.normality),
            c.t_less.statistic,
            c.t_less.p_value,
            flag(&c.t_less),
            c.u_less.result.statistic,
            c.u_less.result.p_value,
            flag(&c.u_less.result),
            c.correlation
        );
    }
    out
}

/// Tests for the incumbent outperforming.
pub fn greater_csv(report: &StudyReport, initial: Initial) -> String {
    let mut out = String::from("distribution,t,p,reject_equal_means,U,p,reject_same_dist\n");
    for c in report.comparisons.iter().filter(|c| c.initial == initial) {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{},{:.6},{}",
            metric_name(c.metric, &report.policies),
            c.t_greater.statistic,
            c.t_greater.p_value,
            flag(&c.t_greater),
            c.u_greater.result.statistic,
            c.u_greater.result.p_value,
            flag(&c.u_greater.result)
        );
    }
    out
}

pub fn welch_csv(report: &StudyReport, initial: Initial) -> String {
    let mut out = String::from("distribution,t,p,reject_less,t,p,reject_greater\n");
    for c in report.comparisons.iter().filter(|c| c.initial == initial) {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{:.6},{:.6},{}",
            metric_name(c.metric, &report.policies),
            c.welch_less.statistic,
            c.welch_less.p_value,
            flag(&c.welch_less),
            c.welch_greater.statistic,
            c.welch_greater.p_value,
            flag(&c.welch_greater)
        );
    }
    out
}

/// Writes `report.json`, the table CSVs and every sample set; returns the files written.
pub fn write_study(run: &StudyRun, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let report = &run.report;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    put("report.json", serde_json::to_string_pretty(report)? + "\n")?;
    put("policies.csv", policies_csv(&report.policies))?;
    put("metrics_uniform.csv", metric_table_csv(&report.metrics, MetricFamily::Uniform))?;
    put("metrics_stationary.csv", metric_table_csv(&report.metrics, MetricFamily::Stationary))?;
    for initial in INITIALS {
        let tag = initial.tag();
        put(&format!("distributions_{tag}.csv"), distribution_csv(report, initial))?;
        put(&format!("tests_less_{tag}.csv"), less_csv(report, initial))?;
        put(&format!("tests_greater_{tag}.csv"), greater_csv(report, initial))?;
        put(&format!("welch_{tag}.csv"), welch_csv(report, initial))?;
    }
    let samples = dir.join("samples");
    for (summary, set) in report.cells.iter().zip(&run.samples) {
        files.push(set.write(&samples, &summary.label)?);
    }
    Ok(files)
}

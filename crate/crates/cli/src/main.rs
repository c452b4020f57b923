use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sysperf::chain::stationary_distribution;
use sysperf::mdp::{apply_policy, MdpModel, Policy};
use sysperf::metrics::{metric_report, metric_table_csv, MetricFamily, MetricReport};
use sysperf::queue::{build_queue_mdp, extract_threshold, threshold_policy, QueueCriterion, QueueParams};
use sysperf::random_mdp::{load_random5_fixture, sample_random_mdp, Concentration, RandomMdpSpec};
use sysperf::solvers::{
    evaluate_discounted, gain_optimal_membership, policy_iteration_average, policy_iteration_discounted,
    SolveReport,
};
use sysperf::stats::{
    dagostino_k2, difference_distribution, mann_whitney_u, pearson_correlation, shuffled_pair,
    t_test_one_sample, welch_t_test, Alternative, MannWhitney, SampleSet, TestResult,
};
use sysperf::study::{
    distribution_csv, metric_reports, run_study, simulate_cell, solve_policies, study_cells, write_study,
    StudyConfig,
};
use sysperf::{Error, Result};

const OUT_ENV: &str = "SYSPERF_OUT";

#[derive(Parser)]
#[command(name = "sysperf", version, about = "MDP solving, system-based metrics and queue policy studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an MDP file or the admission queue by policy iteration.
    Solve(SolveArgs),
    /// Stationary and uniform metric tables for one or more policies.
    Metrics(MetricsArgs),
    /// Simulate every study cell and write the sample sets.
    Simulate(StudyArgs),
    /// Compare two sample sets.
    Test(TestArgs),
    /// Sample a random MDP, or load the bundled five-state fixture.
    Randmdp(RandArgs),
    /// Solve, tabulate, simulate and test in one run.
    Study(StudyArgs),
}

#[derive(Args, Clone, Default)]
struct QueueArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
}

impl QueueArgs {
    fn params(&self) -> QueueParams {
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
}

#[derive(Args)]
struct SolveArgs {
    /// Model JSON file; omit with --queue.
    model: Option<PathBuf>,
    #[arg(long)]
    queue: bool,
    #[arg(long, conflicts_with = "disc")]
    avg: bool,
    #[arg(long)]
    disc: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    distinguished: usize,
    #[command(flatten)]
    queue_params: QueueArgs,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    model: Option<PathBuf>,
    #[arg(long)]
    queue: bool,
    /// Policy as "0,1,0"; repeatable.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Queue threshold policy; repeatable.
    #[arg(long = "threshold")]
    thresholds: Vec<usize>,
    #[arg(long = "alpha", num_args = 1..)]
    alphas: Vec<f64>,
    #[arg(long = "beta", num_args = 1..)]
    betas: Vec<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[command(flatten)]
    queue_params: QueueArgs,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// StudyConfig JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    queue_params: QueueArgs,
    #[arg(long = "beta", num_args = 1..)]
    betas: Vec<f64>,
    /// Incumbent threshold.
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    /// Horizon of average-cost runs.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Horizon of discounted runs.
    #[arg(long = "T-disc")]
    t_disc: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

impl StudyArgs {
    fn resolve(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::load(path)?,
            None => StudyConfig::default(),
        };
        let q = &self.queue_params;
        cfg.lambda = q.lambda.or(cfg.lambda);
        cfg.mu = q.mu.or(cfg.mu);
        cfg.c = q.c.or(cfg.c);
        cfg.r = q.r.or(cfg.r);
        cfg.n = q.n.or(cfg.n);
        if !self.betas.is_empty() {
            cfg.betas = self.betas.clone();
        }
        if let Some(t) = self.threshold {
            cfg.incumbent_threshold = t;
        }
        if let Some(m) = self.m {
            cfg.m = m;
        }
        cfg.t_average = self.t.or(cfg.t_average);
        cfg.t_discounted = self.t_disc.or(cfg.t_discounted);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(z) = self.zeta {
            cfg.zeta = z;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TestArgs {
    /// Sample CSV of the MDP policy.
    a: PathBuf,
    /// Sample CSV of the incumbent.
    b: PathBuf,
    /// Any of t, welch, u, normality, corr.
    #[arg(long, value_delimiter = ',', default_value = "t,welch,u,normality,corr")]
    tests: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    zeta: f64,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RandArgs {
    /// Use the bundled five-state fixture.
    #[arg(long, conflicts_with_all = ["states", "actions", "transient"])]
    fixture: bool,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    actions: Option<usize>,
    #[arg(long, default_value_t = 0)]
    transient: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 0.0)]
    cost_min: f64,
    #[arg(long, default_value_t = 10.0)]
    cost_max: f64,
    /// Print value tables for the gain-optimal, all-zero and all-last-action policies.
    #[arg(long)]
    report: bool,
    #[arg(long = "alpha", num_args = 1.., default_values_t = [0.2, 0.5, 0.75, 0.99])]
    alphas: Vec<f64>,
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Metrics(a) => metrics(a),
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::Randmdp(a) => randmdp(a),
        Command::Study(a) => study(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

fn config_error(msg: &str) -> Error {
    Error::Config(msg.to_string())
}

fn solve(a: SolveArgs) -> Result<()> {
    if a.avg == a.disc {
        return Err(config_error("choose exactly one of --avg and --disc"));
    }
    let report = if a.queue {
        let params = a.queue_params.params();
        if a.avg {
            let q = build_queue_mdp(&params, QueueCriterion::Average)?;
            let o = policy_iteration_average(&q.model, a.distinguished)?;
            SolveReport::average(&o).with_threshold(extract_threshold(&o.policy))
        } else {
            let beta = match (a.beta, a.alpha) {
                (Some(b), None) => b,
                (None, Some(alpha)) => params.gamma() * (1.0 - alpha) / alpha,
                _ => return Err(config_error("--disc with --queue needs exactly one of --beta and --alpha")),
            };
            let q = build_queue_mdp(&params.with_beta(beta), QueueCriterion::Discounted)?;
            let alpha = q.alpha.expect("discounted model carries alpha");
            let o = policy_iteration_discounted(&q.model, alpha)?;
            SolveReport::discounted(&o).with_threshold(extract_threshold(&o.policy))
        }
    } else {
        let path = a.model.as_ref().ok_or_else(|| config_error("give a model file or --queue"))?;
        let model = MdpModel::load(path)?;
        if a.avg {
            SolveReport::average(&policy_iteration_average(&model, a.distinguished)?)
        } else {
            let alpha = a.alpha.ok_or_else(|| config_error("--disc on a model file needs --alpha"))?;
            SolveReport::discounted(&policy_iteration_discounted(&model, alpha)?)
        }
    };
    let text = json(&report)?;
    if let Some(dir) = &a.out {
        write(dir, "solve.json", &text)?;
    }
    print!("{text}");
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let rows: Vec<(String, MetricReport)> = if a.queue {
        if !a.alphas.is_empty() {
            return Err(config_error("the queue takes --beta, not --alpha"));
        }
        let cfg = StudyConfig {
            lambda: a.queue_params.lambda,
            mu: a.queue_params.mu,
            c: a.queue_params.c,
            r: a.queue_params.r,
            n: a.queue_params.n,
            betas: if a.betas.is_empty() { StudyConfig::default().betas } else { a.betas.clone() },
            ..StudyConfig::default()
        };
        if a.thresholds.is_empty() {
            let policies = solve_policies(&cfg)?;
            metric_reports(&cfg, &policies)?
        } else {
            let params = cfg.params();
            a.thresholds
                .iter()
                .map(|&t| {
                    let p = threshold_policy(t, params.n)?;
                    Ok((format!("threshold-{t}"), sysperf::queue::queue_metric_report(&params, &p, &cfg.betas)?))
                })
                .collect::<Result<_>>()?
        }
    } else {
        let path = a.model.as_ref().ok_or_else(|| config_error("give a model file or --queue"))?;
        let model = MdpModel::load(path)?;
        let policies: Vec<Policy> = if a.policies.is_empty() {
            vec![policy_iteration_average(&model, 0)?.policy]
        } else {
            a.policies.iter().map(|p| Policy::parse(p)).collect::<Result<_>>()?
        };
        policies
            .iter()
            .map(|p| Ok((p.to_string().replace(',', " "), metric_report(&model, p, &a.alphas, a.theta)?)))
            .collect::<Result<_>>()?
    };
    let uniform = metric_table_csv(&rows, MetricFamily::Uniform);
    let stationary = metric_table_csv(&rows, MetricFamily::Stationary);
    if let Some(dir) = &a.out {
        write(dir, "metrics_uniform.csv", &uniform)?;
        write(dir, "metrics_stationary.csv", &stationary)?;
        write(dir, "metrics.json", &json(&rows)?)?;
    }
    print!("{uniform}\n{stationary}");
    Ok(())
}

fn out_dir(cfg: &StudyConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn simulate(a: StudyArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let policies = solve_policies(&cfg)?;
    let cells = study_cells(&cfg, &policies);
    let dir = out_dir(&cfg);
    let samples_dir = dir.join("samples");
    let mut summaries = Vec::with_capacity(cells.len());
    for cell in &cells {
        let set = simulate_cell(&cfg, &policies, cell)?;
        let path = set.write(&samples_dir, &cell.stem(&policies))?;
        summaries.push(sysperf::study::CellSummary {
            cell: *cell,
            label: set.meta.label.clone(),
            horizon: cfg.horizon(cell.metric),
            summary: sysperf::stats::describe(&set.values)?,
        });
        eprintln!("wrote {}", path.display());
    }
    let report = sysperf::study::StudyReport {
        params: cfg.params(),
        config: cfg,
        policies,
        metrics: Vec::new(),
        cells: summaries,
        comparisons: Vec::new(),
    };
    for initial in [sysperf::queue::Initial::Uniform, sysperf::queue::Initial::Stationary] {
        let table = distribution_csv(&report, initial);
        write(&dir, &format!("distributions_{}.csv", initial.tag()), &table)?;
        println!("{}\n{table}", initial.tag());
    }
    Ok(())
}

#[derive(Serialize)]
struct TestReport {
    a: String,
    b: String,
    zeta: f64,
    shuffle_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    normality: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    correlation: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    t: Vec<TestResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    welch: Vec<TestResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    u: Vec<MannWhitney>,
}

fn read_samples(path: &Path) -> Result<SampleSet> {
    SampleSet::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

const ALTERNATIVES: [Alternative; 3] = [Alternative::Less, Alternative::Greater, Alternative::TwoSided];

fn test(a: TestArgs) -> Result<()> {
    for name in &a.tests {
        if !["t", "welch", "u", "normality", "corr"].contains(&name.as_str()) {
            return Err(Error::Config(format!("unknown test {name:?}")));
        }
    }
    let x = read_samples(&a.a)?;
    let y = read_samples(&a.b)?;
    let wants = |name: &str| a.tests.iter().any(|t| t == name);
    let paired = wants("t") || wants("normality");
    let delta = if paired { Some(difference_distribution(&x, &y, a.shuffle_seed)?) } else { None };
    let mut report = TestReport {
        a: a.a.display().to_string(),
        b: a.b.display().to_string(),
        zeta: a.zeta,
        shuffle_seed: a.shuffle_seed,
        normality: None,
        correlation: None,
        t: Vec::new(),
        welch: Vec::new(),
        u: Vec::new(),
    };
    if let Some(d) = &delta {
        if wants("normality") {
            report.normality = Some(dagostino_k2(&d.values, a.zeta)?);
        }
        if wants("t") {
            for alt in ALTERNATIVES {
                report.t.push(t_test_one_sample(&d.values, 0.0, alt, a.zeta)?);
            }
        }
    }
    if wants("corr") {
        let (xs, ys) = shuffled_pair(&x.values, &y.values, a.shuffle_seed);
        report.correlation = Some(pearson_correlation(&xs, &ys)?);
    }
    for alt in ALTERNATIVES {
        if wants("welch") {
            report.welch.push(welch_t_test(&x.values, &y.values, alt, a.zeta)?);
        }
        if wants("u") {
            report.u.push(mann_whitney_u(&x.values, &y.values, alt, a.zeta)?);
        }
    }

    let mut csv = String::from("test,alternative,statistic,p,reject\n");
    let mut row = |name: &str, r: &TestResult| {
        csv.push_str(&format!(
            "{name},{},{:.6},{:.6},{}\n",
            r.alternative.tag(),
            r.statistic,
            r.p_value,
            if r.reject { "True" } else { "False" }
        ));
    };
    if let Some(r) = &report.normality {
        row("normality", r);
    }
    report.t.iter().for_each(|r| row("t", r));
    report.welch.iter().for_each(|r| row("welch", r));
    report.u.iter().for_each(|r| row("u", &r.result));
    if let Some(r) = report.correlation {
        csv.push_str(&format!("corr,,{r:.6},,\n"));
    }

    let text = json(&report)?;
    if let Some(dir) = &a.out {
        write(dir, "test.json", &text)?;
        write(dir, "test.csv", &csv)?;
    }
    print!("{text}");
    Ok(())
}

fn last_action_policy(model: &MdpModel) -> Policy {
    Policy::new(
        (0..model.n_states())
            .map(|x| *model.actions(x).last().expect("every state has an action"))
            .collect(),
    )
}

fn value_table(model: &MdpModel, policy: &Policy, alphas: &[f64]) -> Result<String> {
    let pm = apply_policy(model, policy)?;
    let phi = stationary_distribution(&pm.transition)?;
    let report = metric_report(model, policy, alphas, None)?;
    let n = model.n_states();
    let membership = gain_optimal_membership(model, policy, 0)?;
    let phi_text: Vec<String> = phi.as_slice().iter().map(|p| format!("{p:.4}")).collect();
    let mut out = format!(
        "# policy {policy}; gain-optimal {}; phi = [{}]\nalpha",
        membership.gain_optimal,
        phi_text.join(", ")
    );
    for x in 1..=n {
        out.push_str(&format!(",J({x})"));
    }
    out.push_str(",eta,eta_alpha\n");
    for (alpha, d) in alphas.iter().zip(&report.per_alpha) {
        let values = evaluate_discounted(&pm, *alpha)?.values;
        out.push_str(&format!("{alpha:.2}"));
        for v in values.iter() {
            out.push_str(&format!(",{v:.4}"));
        }
        out.push_str(&format!(",{:.4},{:.4}\n", report.eta_avg, d.eta_disc));
    }
    Ok(out)
}

fn randmdp(a: RandArgs) -> Result<()> {
    let model = if a.fixture {
        load_random5_fixture()?
    } else {
        let (Some(states), Some(actions)) = (a.states, a.actions) else {
            return Err(config_error("give --fixture or both --states and --actions"));
        };
        let spec = RandomMdpSpec {
            dirichlet_theta: Concentration::Scalar(a.theta),
            cost_range: (a.cost_min, a.cost_max),
            ..RandomMdpSpec::new(states, actions, a.transient, a.seed)
        };
        sample_random_mdp(&spec)?
    };
    let model_json = model.to_json()?;
    let mut report = String::new();
    if a.report {
        let policies: Vec<Policy> = if a.policies.is_empty() {
            let mut list = vec![policy_iteration_average(&model, 0)?.policy, model.first_policy()];
            let last = last_action_policy(&model);
            if !list.contains(&last) {
                list.push(last);
            }
            list.dedup();
            list
        } else {
            a.policies.iter().map(|p| Policy::parse(p)).collect::<Result<_>>()?
        };
        for p in &policies {
            report.push_str(&value_table(&model, p, &a.alphas)?);
            report.push('\n');
        }
    }
    if let Some(dir) = &a.out {
        write(dir, "model.json", &model_json)?;
        if a.report {
            write(dir, "report.csv", &report)?;
        }
    }
    if a.report {
        print!("{report}");
    } else {
        print!("{model_json}");
    }
    Ok(())
}

fn study(a: StudyArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let dir = out_dir(&cfg);
    let run = run_study(&cfg)?;
    let files = write_study(&run, &dir)?;
    for p in &run.report.policies {
        println!(
            "{}: threshold {}",
            p.name,
            p.threshold.map(|t| t.to_string()).unwrap_or_else(|| "none".into())
        );
    }
    for c in &run.report.comparisons {
        println!(
            "{} vs {}: t< p={:.4} t> p={:.4} U< p={:.4} U> p={:.4}",
            c.mdp, c.existing, c.t_less.p_value, c.t_greater.p_value, c.u_less.result.p_value, c.u_greater.result.p_value
        );
    }
    println!("wrote {} files under {}", files.len(), dir.display());
    Ok(())
}

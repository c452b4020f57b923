//! Ten acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysperf::chain::{fundamental_matrix_alpha, stationary_distribution};
use sysperf::mdp::{apply_policy, enumerate_policies, MdpModel, Policy};
use sysperf::metrics::{eta, metric_report};
use sysperf::queue::{
    build_queue_mdp, expected_sample_mean, queue_metric_report, threshold_policy, Initial, Metric, QueueCriterion,
    QueueParams,
};
use sysperf::random_mdp::{load_random5_fixture, sample_random_mdp, RandomMdpSpec};
use sysperf::solvers::{
    evaluate_average, evaluate_discounted, gain_optimal_membership, is_discounted_optimal,
    policy_iteration_average, policy_iteration_discounted,
};
use sysperf::stats::{
    chi2_cdf, dagostino_components, dagostino_k2, kurtosis, mann_whitney_u, mean, sample_std, t_cdf,
    u_statistics, Alternative, SampleSet,
};
use sysperf::study::{
    run_campaign, simulate_cell, solve_policies, study_cells, study_pairings, Cell, Comparison, StudyConfig,
    StudyPolicy,
};

const FIXTURE_TOL: f64 = 5e-4;
const QUEUE_TOL: f64 = 1e-3;
const LAURENT_RTOL: f64 = 1e-8;
const FUNDAMENTAL_TOL: f64 = 1e-9;
const DOMINANCE_TOL: f64 = 1e-8;
const SE_LIMIT: f64 = 3.0;
const CDF_TOL: f64 = 1e-10;
const K2_TOL: f64 = 1e-9;
const EXACT_U_TOL: f64 = 0.02;
const ZETA: f64 = 0.05;
const ALPHAS: [f64; 4] = [0.20, 0.50, 0.75, 0.99];
const BLACKWELL_GRID: [f64; 3] = [0.9, 0.99, 0.999];
const EXTRA_SEEDS: usize = 9;
const KEY_MIN_REJECTS: usize = 6;
const OTHER_MIN_RETAINS: usize = 8;
/// Index of the stationary, first-β pairing in `study_pairings`.
const KEY_PAIRING: usize = 4;

#[derive(Default)]
struct Report {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }

    fn runtime(&mut self, started: Instant, limit: Option<Duration>) {
        let took = started.elapsed();
        match limit {
            Some(l) => self.check(took < l, format!("runtime {took:.2?} (limit {l:?})")),
            None => self.note(format!("runtime {took:.2?}")),
        }
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn e4() -> Policy {
    Policy::new(vec![0, 0, 0, 1, 0])
}

// ---------------------------------------------------------------- 1

struct FixtureTable {
    policy: Policy,
    rows: [[f64; 5]; 4],
    gain: f64,
    eta_alpha: [f64; 4],
    phi: [f64; 5],
}

fn fixture_tables() -> [FixtureTable; 3] {
    let phi_opt = [0.0878, 0.9122, 0.0, 0.0, 0.0];
    [
        FixtureTable {
            policy: e4(),
            rows: [
                [5.9856, 1.9268, 8.4924, 5.5562, 6.1328],
                [7.3411, 3.2982, 10.6515, 8.1534, 8.3658],
                [10.9826, 6.9528, 15.1808, 13.2228, 12.9771],
                [186.3337, 182.3164, 191.6983, 190.4837, 189.5687],
            ],
            gain: 1.8267,
            eta_alpha: [2.2834, 3.6534, 7.3068, 182.6700],
            phi: phi_opt,
        },
        FixtureTable {
            policy: Policy::new(vec![0; 5]),
            rows: [
                [5.9856, 1.9268, 8.5018, 8.8303, 6.1584],
                [7.3411, 3.2982, 10.6757, 10.9570, 8.4247],
                [10.9826, 6.9528, 15.2149, 15.4400, 13.0522],
                [186.3337, 182.3164, 191.7318, 191.8645, 189.6358],
            ],
            gain: 1.8267,
            eta_alpha: [2.2834, 3.6534, 7.3068, 182.6700],
            phi: phi_opt,
        },
        FixtureTable {
            policy: Policy::new(vec![1; 5]),
            rows: [
                [10.9808, 2.9309, 9.3375, 6.0425, 11.4554],
                [14.8204, 6.8257, 13.7655, 10.4974, 15.8534],
                [25.1166, 17.1673, 24.8065, 21.5745, 26.8658],
                [520.5365, 512.6302, 521.5189, 518.2543, 523.4517],
            ],
            gain: 5.1609,
            eta_alpha: [6.4511, 10.3218, 20.6435, 516.0876],
            phi: [0.4373, 0.5627, 0.0, 0.0, 0.0],
        },
    ]
}

fn criterion_1(r: &mut Report) -> sysperf::Result<()> {
    let started = Instant::now();
    let m = load_random5_fixture()?;
    for t in fixture_tables() {
        let pm = apply_policy(&m, &t.policy)?;
        let report = metric_report(&m, &t.policy, &ALPHAS, None)?;
        let mut worst_j: f64 = 0.0;
        for (alpha, row) in ALPHAS.iter().zip(&t.rows) {
            let v = evaluate_discounted(&pm, *alpha)?.values;
            for (got, want) in v.iter().zip(row) {
                worst_j = worst_j.max((got - want).abs());
            }
        }
        r.check(worst_j < FIXTURE_TOL, format!("{}: worst |J - printed| = {worst_j:.2e}", t.policy));
        let dg = (report.eta_avg - t.gain).abs();
        r.check(dg < FIXTURE_TOL, format!("{}: eta {:.6} vs {} ({dg:.2e})", t.policy, report.eta_avg, t.gain));
        for (d, want) in report.per_alpha.iter().zip(t.eta_alpha) {
            let diff = (d.eta_disc - want).abs();
            r.check(
                diff < FIXTURE_TOL,
                format!("{}: eta^a at {} = {:.6} vs {want} ({diff:.2e})", t.policy, d.alpha, d.eta_disc),
            );
        }
        let phi = stationary_distribution(&pm.transition)?;
        let dphi = phi.as_slice().iter().zip(t.phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        r.check(dphi < FIXTURE_TOL, format!("{}: phi {:.4?} ({dphi:.2e})", t.policy, phi.as_slice()));
    }
    r.runtime(started, Some(Duration::from_secs(1)));
    Ok(())
}

// ---------------------------------------------------------------- 2

fn criterion_2(r: &mut Report) -> sysperf::Result<()> {
    let started = Instant::now();
    let m = load_random5_fixture()?;
    let policies: Vec<Policy> = enumerate_policies(&m)?.collect();
    r.check(policies.len() == 32, format!("{} enumerated policies", policies.len()));
    let mut members = Vec::new();
    let mut gains = Vec::new();
    for p in &policies {
        let rep = gain_optimal_membership(&m, p, 0)?;
        if rep.is_member {
            members.push(p.clone());
        }
        gains.push(rep.gain_candidate);
    }
    let best = gains.iter().copied().fold(f64::INFINITY, f64::min);
    let gain_set: Vec<String> = policies
        .iter()
        .zip(&gains)
        .filter(|(_, &g)| g <= best + 1e-9 * best.abs().max(1.0))
        .map(|(p, _)| p.to_string())
        .collect();
    let mut want = vec![Policy::new(vec![0; 5]), e4()];
    want.sort_by_key(|p| p.to_string());
    members.sort_by_key(|p| p.to_string());
    let shown: Vec<String> = members.iter().map(|p| p.to_string()).collect();
    r.check(members == want, format!("membership fixed points {shown:?}, expected [0,0,0,0,0] and e4"));
    r.note(format!("policies at the minimal gain {best:.6}: {gain_set:?}"));
    for alpha in BLACKWELL_GRID {
        let pi = policy_iteration_discounted(&m, alpha)?.policy;
        let mut optimal = Vec::new();
        for p in &policies {
            if is_discounted_optimal(&m, p, alpha)? {
                optimal.push(p.to_string());
            }
        }
        r.check(
            pi == e4() && optimal == [e4().to_string()],
            format!("alpha {alpha}: PI gives {pi}, discounted-optimal set {optimal:?}"),
        );
    }
    r.runtime(started, Some(Duration::from_secs(1)));
    Ok(())
}

// ---------------------------------------------------------------- 3

fn criterion_3(r: &mut Report) -> sysperf::Result<()> {
    let started = Instant::now();
    let policies = solve_policies(&StudyConfig::default())?;
    let got: Vec<Option<usize>> = policies[1..].iter().map(|p| p.threshold).collect();
    r.check(
        got == [Some(16), Some(19), Some(16)],
        format!("average / beta=2e-3 / beta=4e-4 thresholds {got:?}"),
    );
    r.runtime(started, Some(Duration::from_secs(1)));
    Ok(())
}

// ---------------------------------------------------------------- 4

/// (threshold, ν, ν^α, ν^ᾱ, η, η^α, η^ᾱ) for the incumbent, average, discounted and Blackwell rows.
const QUEUE_TABLE: [(usize, [f64; 6]); 4] = [
    (17, [26.451004, 14111.497973, 67035.19422, 26.451004, 13239.066531, 66141.074184]),
    (16, [26.401347, 14198.259172, 67024.011784, 26.401347, 13214.212448, 66016.905631]),
    (19, [26.764367, 14038.44897, 67584.439005, 26.764367, 13395.909004, 66924.643751]),
    (16, [26.401347, 14198.259172, 67024.011784, 26.401347, 13214.212448, 66016.905631]),
];

fn criterion_4(r: &mut Report) -> sysperf::Result<()> {
    let started = Instant::now();
    let cfg = StudyConfig::default();
    let params = cfg.params();
    for (x, want) in QUEUE_TABLE {
        let rep = queue_metric_report(&params, &threshold_policy(x, params.n)?, &cfg.betas)?;
        let got = [
            rep.nu_avg,
            rep.per_alpha[0].nu_disc,
            rep.per_alpha[1].nu_disc,
            rep.eta_avg,
            rep.per_alpha[0].eta_disc,
            rep.per_alpha[1].eta_disc,
        ];
        let worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
        r.check(worst < QUEUE_TOL, format!("threshold {x}: {got:.6?} worst diff {worst:.2e}"));
    }
    r.runtime(started, Some(Duration::from_secs(5)));
    Ok(())
}

// ---------------------------------------------------------------- 5, 6

/// One transition matrix, cost vector and discounted model per corpus entry.
struct CorpusEntry {
    name: String,
    model: MdpModel,
    policy: Policy,
    /// Discount factors paired with this entry for the Laurent check.
    laurent_alphas: Vec<f64>,
}

fn random_corpus() -> sysperf::Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for i in 0..100usize {
        let n = 1 + i % 8;
        let spec = RandomMdpSpec::new(n, 1 + i % 3, i % n, 500 + i as u64);
        let model = sample_random_mdp(&spec)?;
        let policy = Policy::new((0..n).map(|s| model.actions(s)[(i + s) % model.actions(s).len()]).collect());
        out.push(CorpusEntry {
            name: format!("random #{i}"),
            model,
            policy,
            laurent_alphas: ALPHAS.to_vec(),
        });
    }
    let cfg = StudyConfig::default();
    let params = cfg.params();
    for p in solve_policies(&cfg)? {
        for &beta in &cfg.betas {
            let q = build_queue_mdp(&params.with_beta(beta), QueueCriterion::Discounted)?;
            out.push(CorpusEntry {
                name: format!("queue {} beta={beta}", p.name),
                model: q.model,
                policy: p.policy.clone(),
                laurent_alphas: vec![q.alpha.expect("discounted queue carries alpha")],
            });
        }
    }
    Ok(out)
}

fn criterion_5(r: &mut Report, corpus: &[CorpusEntry]) -> sysperf::Result<()> {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for c in corpus {
        let pm = apply_policy(&c.model, &c.policy)?;
        let phi = stationary_distribution(&pm.transition)?;
        let gain = evaluate_average(&pm, 0)?.gain;
        for &alpha in &c.laurent_alphas {
            let values = evaluate_discounted(&pm, alpha)?.values;
            let lhs = eta(phi.as_slice(), values.as_slice())?;
            let rhs = gain / (1.0 - alpha);
            let rel = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel > LAURENT_RTOL {
                bad.push(format!("{} alpha {alpha}: {rel:.2e}", c.name));
            }
        }
    }
    r.check(bad.is_empty(), format!("{} models, worst relative gap {worst:.2e}; violations {bad:?}", corpus.len()));
    Ok(())
}

fn criterion_6(r: &mut Report, corpus: &[CorpusEntry]) -> sysperf::Result<()> {
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for c in corpus {
        let pm = apply_policy(&c.model, &c.policy)?;
        let phi = stationary_distribution(&pm.transition)?;
        for alpha in ALPHAS {
            let f = fundamental_matrix_alpha(&pm.transition, alpha)?;
            let gap = (f.transpose() * phi.vector() - phi.vector()).amax();
            worst = worst.max(gap);
            if gap > FUNDAMENTAL_TOL {
                bad.push(format!("{} alpha {alpha}: {gap:.2e}", c.name));
            }
        }
    }
    r.check(bad.is_empty(), format!("{} models, worst max-norm gap {worst:.2e}; violations {bad:?}", corpus.len()));
    Ok(())
}

// ---------------------------------------------------------------- 7

fn dominates_discounted(model: &MdpModel, alpha: f64) -> sysperf::Result<bool> {
    let best = policy_iteration_discounted(model, alpha)?.solution.values;
    for p in enumerate_policies(model)? {
        let v = evaluate_discounted(&apply_policy(model, &p)?, alpha)?.values;
        if best.iter().zip(v.iter()).any(|(b, x)| *b > x + DOMINANCE_TOL * x.abs().max(1.0)) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn minimal_gain(model: &MdpModel) -> sysperf::Result<bool> {
    let best = policy_iteration_average(model, 0)?.solution.gain;
    for p in enumerate_policies(model)? {
        let g = evaluate_average(&apply_policy(model, &p)?, 0)?.gain;
        if best > g + DOMINANCE_TOL * g.abs().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn criterion_7(r: &mut Report) -> sysperf::Result<()> {
    const SHAPES: [(usize, usize); 8] = [(5, 2), (3, 3), (2, 5), (4, 2), (1, 4), (3, 2), (2, 4), (2, 2)];
    let mut models: Vec<(String, MdpModel, Vec<f64>)> =
        vec![("fixture".into(), load_random5_fixture()?, ALPHAS.to_vec())];
    for i in 0..20usize {
        let (n, a) = SHAPES[i % SHAPES.len()];
        let spec = RandomMdpSpec::new(n, a, i % n, 1000 + i as u64);
        models.push((format!("random {n}x{a} #{i}"), sample_random_mdp(&spec)?, ALPHAS.to_vec()));
    }
    let small = QueueParams { n: 4, ..QueueParams::default() };
    models.push(("queue N=4".into(), build_queue_mdp(&small, QueueCriterion::Average)?.model, ALPHAS.to_vec()));
    for beta in StudyConfig::default().betas {
        let q = build_queue_mdp(&small.with_beta(beta), QueueCriterion::Discounted)?;
        let alpha = q.alpha.expect("discounted queue carries alpha");
        models.push((format!("queue N=4 beta={beta}"), q.model, vec![alpha]));
    }
    let mut bad = Vec::new();
    for (name, model, alphas) in &models {
        if model.policy_count() > 32 {
            bad.push(format!("{name}: {} policies", model.policy_count()));
            continue;
        }
        for &alpha in alphas {
            if !dominates_discounted(model, alpha)? {
                bad.push(format!("{name}: discounted alpha {alpha}"));
            }
        }
        if !minimal_gain(model)? {
            bad.push(format!("{name}: average"));
        }
    }
    r.check(bad.is_empty(), format!("{} models checked; violations {bad:?}", models.len()));
    Ok(())
}

// ---------------------------------------------------------------- 8

/// Printed (mean, std) of a cell: (policy index, metric index, uniform row, stationary row).
const EMPIRICAL: [(usize, usize, (f64, f64), (f64, f64)); 6] = [
    (1, 0, (26.48, 2.21), (26.39, 2.23)),
    (2, 1, (14086.51, 3995.38), (13431.81, 3733.54)),
    (3, 2, (65767.83, 8148.82), (64729.93, 7861.13)),
    (0, 0, (26.54, 2.30), (26.41, 2.30)),
    (0, 1, (14142.17, 3896.38), (13210.41, 3547.87)),
    (0, 2, (65860.12, 8215.20), (64893.20, 8232.88)),
];

fn metric_index(cfg: &StudyConfig, metric: Metric) -> usize {
    match metric {
        Metric::Average => 0,
        Metric::Discounted { beta } => 1 + cfg.betas.iter().position(|&b| b == beta).expect("study beta"),
    }
}

fn theory_value(cfg: &StudyConfig, policies: &[StudyPolicy], cell: &Cell) -> sysperf::Result<f64> {
    let rep = queue_metric_report(&cfg.params(), &policies[cell.policy].policy, &cfg.betas)?;
    Ok(match (metric_index(cfg, cell.metric), cell.initial) {
        (0, Initial::Uniform) => rep.nu_avg,
        (0, Initial::Stationary) => rep.eta_avg,
        (k, Initial::Uniform) => rep.per_alpha[k - 1].nu_disc,
        (k, Initial::Stationary) => rep.per_alpha[k - 1].eta_disc,
    })
}

fn criterion_8(
    r: &mut Report,
    cfg: &StudyConfig,
    policies: &[StudyPolicy],
    cells: &[Cell],
    samples: &[SampleSet],
) -> sysperf::Result<()> {
    let m = cfg.m as f64;
    for (cell, s) in cells.iter().zip(samples) {
        let (avg, sd) = (mean(&s.values)?, sample_std(&s.values)?);
        let se = sd / m.sqrt();
        let theory = theory_value(cfg, policies, cell)?;
        let exact = expected_sample_mean(&cfg.params(), &policies[cell.policy].policy, cell.metric, cell.initial)?;
        let z = (avg - theory) / se;
        r.check(
            z.abs() <= SE_LIMIT,
            format!(
                "{}: mean {avg:.4} vs theory {theory:.4} (z = {z:+.2}); exact trajectory expectation {exact:.4}",
                s.meta.label
            ),
        );
        let k = metric_index(cfg, cell.metric);
        let Some(&(_, _, uni, sta)) = EMPIRICAL.iter().find(|e| e.0 == cell.policy && e.1 == k) else {
            continue;
        };
        let (pm, ps) = if cell.initial == Initial::Uniform { uni } else { sta };
        let se_sd = sd * ((kurtosis(&s.values)? - 1.0) / (4.0 * m)).sqrt();
        let (zm, zs) = ((avg - pm) / se, (sd - ps) / se_sd);
        r.check(
            zm.abs() <= SE_LIMIT && zs.abs() <= SE_LIMIT,
            format!(
                "{}: mean {avg:.2} vs printed {pm} (z = {zm:+.2}), std {sd:.2} vs printed {ps} (z = {zs:+.2})",
                s.meta.label
            ),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- 9

/// (label, p-value, reject) for every directional test of one comparison.
fn test_cells(c: &Comparison) -> [(&'static str, f64, bool); 6] {
    [
        ("t less", c.t_less.p_value, c.t_less.reject),
        ("U less", c.u_less.result.p_value, c.u_less.result.reject),
        ("Welch less", c.welch_less.p_value, c.welch_less.reject),
        ("t greater", c.t_greater.p_value, c.t_greater.reject),
        ("U greater", c.u_greater.result.p_value, c.u_greater.result.reject),
        ("Welch greater", c.welch_greater.p_value, c.welch_greater.reject),
    ]
}

fn is_key(pairing: usize, label: &str) -> bool {
    pairing == KEY_PAIRING && (label == "t greater" || label == "U greater")
}

fn campaign_for_seed(cfg: &StudyConfig, policies: &[StudyPolicy]) -> sysperf::Result<Vec<Comparison>> {
    let mut cells = Vec::new();
    for p in study_pairings(cfg) {
        cells.push(p.mdp);
        cells.push(p.existing);
    }
    let samples = cells
        .iter()
        .map(|c| simulate_cell(cfg, policies, c))
        .collect::<sysperf::Result<Vec<_>>>()?;
    run_campaign(cfg, &cells, &samples)
}

fn criterion_9(
    r: &mut Report,
    cfg: &StudyConfig,
    policies: &[StudyPolicy],
    default_run: Vec<Comparison>,
) -> sysperf::Result<()> {
    for (k, c) in default_run.iter().enumerate() {
        for (label, p, reject) in test_cells(c) {
            if label.ends_with("less") {
                r.check(!reject, format!("default seed, {} {label}: p = {p:.3e}", c.mdp));
            } else if is_key(k, label) {
                r.check(reject && p < ZETA, format!("default seed, {} {label}: p = {p:.3e}", c.mdp));
            }
        }
    }

    let mut runs = vec![(cfg.seed, default_run)];
    for i in 1..=EXTRA_SEEDS {
        let seeded = StudyConfig { seed: cfg.seed + i as u64, ..cfg.clone() };
        let started = Instant::now();
        runs.push((seeded.seed, campaign_for_seed(&seeded, policies)?));
        r.note(format!("seed {} simulated in {:.1?}", seeded.seed, started.elapsed()));
    }

    let labels: Vec<String> = runs[0].1.iter().map(|c| c.mdp.clone()).collect();
    for (k, label) in labels.iter().enumerate() {
        for j in 0..6 {
            let test = test_cells(&runs[0].1[k])[j].0;
            let outcomes: Vec<(f64, bool)> = runs.iter().map(|(_, cs)| {
                let (_, p, reject) = test_cells(&cs[k])[j];
                (p, reject)
            }).collect();
            let rejects = outcomes.iter().filter(|o| o.1).count();
            let ps: Vec<String> = outcomes.iter().map(|o| format!("{:.2e}", o.0)).collect();
            let line = format!("{label} {test}: {rejects}/{} reject; p = [{}]", runs.len(), ps.join(", "));
            if is_key(k, test) {
                r.check(rejects >= KEY_MIN_REJECTS, line);
            } else if k == KEY_PAIRING && test == "Welch greater" {
                // Same comparison and direction as the key cell, expected to reject with it.
                r.note(format!("{line} (key comparison, informational)"));
            } else {
                r.check(runs.len() - rejects >= OTHER_MIN_RETAINS, line);
            }
        }
    }
    let seeds: Vec<u64> = runs.iter().map(|s| s.0).collect();
    r.note(format!("master seeds {seeds:?}"));
    Ok(())
}

// ---------------------------------------------------------------- 10

const T_POINTS: [(f64, f64, f64); 10] = [
    (-3.5, 2.0, 0.036413675027234667714),
    (3.4641016151377544, 2.0, 0.96291004988627572695),
    (0.5, 1.5, 0.65971644466502999571),
    (-1.2, 7.3, 0.13381533327582804215),
    (2.0, 30.0, 0.97268747751850844804),
    (-0.384, 4999.0, 0.35049738961610059971),
    (3.601227, 4999.0, 0.99984010310144332578),
    (1.7, 9998.2, 0.95541898583690518681),
    (-8.0, 3.0, 0.0020382887938927341222),
    (0.05, 0.7, 0.5147169370328058015),
];

const CHI2_POINTS: [(f64, f64, f64); 9] = [
    (0.492, 2.0, 0.21807777507452272695),
    (2.709, 2.0, 0.7419236996521620533),
    (0.1, 1.0, 0.24817036595415072417),
    (3.84, 1.0, 0.94995647875129489681),
    (7.5, 5.0, 0.81397016639713298115),
    (20.0, 10.0, 0.97074731192303892733),
    (0.001, 3.0, 8.4079190580461593228e-6),
    (50.0, 30.0, 0.98759793928109942005),
    (2.5, 0.5, 0.95275329885609064386),
];

fn lattice_sample() -> Vec<f64> {
    (0..200u64)
        .map(|i| ((i * 7919) % 1000) as f64 / 37.0 + (i * i) as f64 / 10_000.0)
        .collect()
}

fn lcg_sample() -> Vec<f64> {
    let mut s: u64 = 42;
    (0..300)
        .map(|_| {
            (0..12)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (s >> 40) as f64 / (1u64 << 24) as f64
                })
                .sum()
        })
        .collect()
}

fn literal_u(x: &[f64], y: &[f64]) -> f64 {
    let mut u = 0.0;
    for a in x {
        for b in y {
            if a > b {
                u += 1.0;
            } else if a == b {
                u += 0.5;
            }
        }
    }
    u
}

fn criterion_10(r: &mut Report) -> sysperf::Result<()> {
    let mut worst: f64 = 0.0;
    for (t, nu, want) in T_POINTS {
        worst = worst.max((t_cdf(t, nu)? - want).abs());
    }
    r.check(worst < CDF_TOL, format!("t_cdf worst error {worst:.2e}"));
    let mut worst: f64 = 0.0;
    for (x, k, want) in CHI2_POINTS {
        worst = worst.max((chi2_cdf(x, k)? - want).abs());
    }
    r.check(worst < CDF_TOL, format!("chi2_cdf worst error {worst:.2e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n1 = rng.random_range(1..12);
        let n2 = rng.random_range(1..12);
        let x: Vec<f64> = (0..n1).map(|_| rng.random_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n2).map(|_| rng.random_range(0..6) as f64).collect();
        let (uxy, uyx) = u_statistics(&x, &y)?;
        if uxy != literal_u(&x, &y) || uyx != literal_u(&y, &x) {
            mismatches += 1;
        }
    }
    r.check(mismatches == 0, format!("U vs double loop: {mismatches} mismatches in 1000 inputs"));

    let cases = [
        ("lattice", lattice_sample(), 0.0027800585760423523946, -7.9983065495385372052, 63.972915389116746938, 1.2836834073213484386e-14),
        ("lcg", lcg_sample(), -0.33397149949222351957, -0.90645578375273648652, 0.93319905037187202672, 0.62713119037627506291),
    ];
    for (name, xs, z1, z2, k2, p) in cases {
        let (g1, g2) = dagostino_components(&xs)?;
        let res = dagostino_k2(&xs, ZETA)?;
        let err = [g1 - z1, g2 - z2, res.statistic - k2, res.p_value - p]
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max);
        r.check(err < K2_TOL, format!("D'Agostino {name}: k2 {:.12} worst error {err:.2e}", res.statistic));
    }

    let splits: Vec<(Vec<f64>, Vec<f64>)> = (0u32..1 << 10)
        .filter(|m| m.count_ones() == 5)
        .map(|m| {
            let (x, y): (Vec<u32>, Vec<u32>) = (0..10).partition(|i| m & (1 << i) != 0);
            (x.into_iter().map(f64::from).collect(), y.into_iter().map(f64::from).collect())
        })
        .collect();
    let us: Vec<f64> = splits.iter().map(|(x, y)| literal_u(x, y)).collect();
    let total = us.len() as f64;
    let mut worst: f64 = 0.0;
    for ((x, y), &u) in splits.iter().zip(&us) {
        let less = us.iter().filter(|&&v| v <= u).count() as f64 / total;
        let greater = us.iter().filter(|&&v| v >= u).count() as f64 / total;
        let dev = (u - 12.5).abs();
        let two = us.iter().filter(|&&v| (v - 12.5).abs() >= dev).count() as f64 / total;
        for (alt, exact) in [(Alternative::Less, less), (Alternative::Greater, greater), (Alternative::TwoSided, two)] {
            worst = worst.max((mann_whitney_u(x, y, alt, ZETA)?.result.p_value - exact).abs());
        }
    }
    r.check(worst < EXACT_U_TOL, format!("U normal approximation vs exact at 5,5: worst {worst:.4}"));
    Ok(())
}

// ----------------------------------------------------------------

fn text(e: sysperf::Error) -> String {
    e.to_string()
}

fn finish(id: usize, title: &str, r: Report, outcome: Result<(), String>) -> bool {
    let mut r = r;
    if let Err(e) = outcome {
        r.failures.push(format!("error: {e}"));
    }
    let ok = r.passed();
    println!("criterion {id}: {} ({title})", if ok { "PASS" } else { "FAIL" });
    for f in &r.failures {
        println!("    FAIL {f}");
    }
    for n in &r.notes {
        println!("    ok   {n}");
    }
    ok
}

fn main() {
    let mut results: Vec<(usize, &str, bool)> = Vec::new();
    let mut run = |id: usize, title: &'static str, f: &mut dyn FnMut(&mut Report) -> Result<(), String>| {
        let mut r = Report::default();
        let outcome = f(&mut r);
        results.push((id, title, finish(id, title, r, outcome)));
    };

    run(1, "fixture tables", &mut |r| criterion_1(r).map_err(text));
    run(2, "gain-optimal set", &mut |r| criterion_2(r).map_err(text));
    run(3, "queue thresholds", &mut |r| criterion_3(r).map_err(text));
    run(4, "queue theory tables", &mut |r| criterion_4(r).map_err(text));

    let corpus = random_corpus().map_err(text);
    run(5, "Laurent identity", &mut |r| criterion_5(r, corpus.as_ref().map_err(Clone::clone)?).map_err(text));
    run(6, "fundamental-matrix identity", &mut |r| criterion_6(r, corpus.as_ref().map_err(Clone::clone)?).map_err(text));
    run(7, "oracle optimality", &mut |r| criterion_7(r).map_err(text));

    let cfg = StudyConfig::default();
    let setup = || -> sysperf::Result<_> {
        let policies = solve_policies(&cfg)?;
        let cells = study_cells(&cfg, &policies);
        let started = Instant::now();
        let samples = cells
            .iter()
            .map(|c| simulate_cell(&cfg, &policies, c))
            .collect::<sysperf::Result<Vec<_>>>()?;
        let took = started.elapsed();
        let comparisons = run_campaign(&cfg, &cells, &samples)?;
        Ok((policies, cells, samples, comparisons, took))
    };
    let study = setup().map_err(text);
    run(8, "simulation calibration", &mut |r| {
        let (policies, cells, samples, _, took) = study.as_ref().map_err(Clone::clone)?;
        r.note(format!("16 cells simulated in {took:.1?}"));
        criterion_8(r, &cfg, policies, cells, samples).map_err(text)
    });
    run(9, "hypothesis-test replication", &mut |r| {
        let (policies, _, _, comparisons, _) = study.as_ref().map_err(Clone::clone)?;
        criterion_9(r, &cfg, policies, comparisons.clone()).map_err(text)
    });
    run(10, "statistics correctness", &mut |r| criterion_10(r).map_err(text));

    println!();
    for (id, title, ok) in &results {
        println!("criterion {id}: {} ({title})", if *ok { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| !r.2).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

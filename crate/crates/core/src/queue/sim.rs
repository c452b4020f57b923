use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_beta, stationary_phi, QueueParams, ACCEPT, REJECT};
use crate::error::{Error, Result};
use crate::mdp::Policy;
use crate::random_mdp::PRNG_ALGORITHM;
use crate::stats::{SampleMeta, SampleSet};

/// Default horizon for average-cost trajectories, in time units.
pub const AVERAGE_HORIZON: f64 = 10_000.0;

/// Discounted trajectories run until e^{−βT} falls to this.
pub const TRUNCATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Service,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub state: usize,
    pub dt: f64,
    pub event: Event,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub total_time: f64,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,dt,event,rejected\n");
        for r in &self.records {
            let event = match r.event {
                Event::Service => 0,
                Event::Arrival => 1,
            };
            out.push_str(&format!("{},{:.6},{},{}\n", r.state, r.dt, event, u8::from(r.rejected)));
        }
        out
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
pub fn unit_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Lazy trajectory: yields records until the clock reaches the horizon.
pub struct Walk<'a, R: RngCore + ?Sized> {
    actions: &'a [usize],
    rng: &'a mut R,
    state: usize,
    clock: f64,
    horizon: f64,
    gamma: f64,
    p_service: f64,
}

impl<R: RngCore + ?Sized> Iterator for Walk<'_, R> {
    type Item = TrajectoryRecord;

    fn next(&mut self) -> Option<TrajectoryRecord> {
        if !(self.clock < self.horizon) {
            return None;
        }
        let x = self.state;
        let action = self.actions[x];
        let dt = -unit_open(self.rng).ln() / self.gamma;
        let event = if unit_open(self.rng) < self.p_service {
            Event::Service
        } else {
            Event::Arrival
        };
        let (next, rejected) = match event {
            Event::Service => (x.saturating_sub(1), false),
            Event::Arrival if action == ACCEPT => (x + 1, false),
            Event::Arrival => (x, true),
        };
        self.clock += dt;
        self.state = next;
        Some(TrajectoryRecord {
            state: x,
            dt,
            event,
            rejected,
        })
    }
}

/// Each step draws the waiting time first, then the event, both by inverse transform.
pub fn walk<'a, R: RngCore + ?Sized>(
    x0: usize,
    policy: &'a Policy,
    horizon: f64,
    rng: &'a mut R,
    lambda: f64,
    mu: f64,
) -> Result<Walk<'a, R>> {
    let actions = policy.as_slice();
    let n = actions.len().checked_sub(1).ok_or(Error::Empty)?;
    if x0 > n {
        return Err(Error::Domain {
            name: "x0",
            value: x0 as f64,
            range: "[0, N]",
        });
    }
    if let Some((state, &action)) = actions
        .iter()
        .enumerate()
        .find(|&(x, &a)| a > ACCEPT || (x == n && a != REJECT))
    {
        return Err(Error::InfeasibleAction { state, action });
    }
    if !(horizon >= 0.0) {
        return Err(Error::Domain {
            name: "T",
            value: horizon,
            range: "[0, inf)",
        });
    }
    let gamma = lambda + mu;
    Ok(Walk {
        actions,
        rng,
        state: x0,
        clock: 0.0,
        horizon,
        gamma,
        p_service: mu / gamma,
    })
}

pub fn simulate_trajectory<R: RngCore + ?Sized>(
    x0: usize,
    policy: &Policy,
    horizon: f64,
    rng: &mut R,
    lambda: f64,
    mu: f64,
) -> Result<Trajectory> {
    let records: Vec<TrajectoryRecord> = walk(x0, policy, horizon, rng, lambda, mu)?.collect();
    let total_time = records.iter().map(|r| r.dt).sum();
    Ok(Trajectory {
        records,
        total_time,
    })
}

/// [Σ c·x·dt + R·rejections] / total time.
pub fn average_cost<I>(records: I, c: f64, r: f64) -> Result<f64>
where
    I: IntoIterator<Item = TrajectoryRecord>,
{
    let (mut cost, mut time) = (0.0, 0.0);
    for rec in records {
        cost += c * rec.state as f64 * rec.dt;
        if rec.rejected {
            cost += r;
        }
        time += rec.dt;
    }
    if time > 0.0 {
        Ok(cost / time)
    } else {
        Err(Error::Empty)
    }
}

/// Holding cost discounted continuously, penalties discounted at the event instant.
pub fn discounted_cost<I>(records: I, c: f64, r: f64, beta: f64) -> Result<f64>
where
    I: IntoIterator<Item = TrajectoryRecord>,
{
    check_beta(beta)?;
    let mut cost = 0.0;
    let mut d0 = 1.0;
    for rec in records {
        let shrink = (-beta * rec.dt).exp_m1();
        let d1 = d0 * (1.0 + shrink);
        cost += c * rec.state as f64 * (-d0 * shrink) / beta;
        if rec.rejected {
            cost += r * d1;
        }
        d0 = d1;
    }
    Ok(cost)
}

pub fn trajectory_cost_average(traj: &Trajectory, c: f64, r: f64) -> Result<f64> {
    average_cost(traj.records.iter().copied(), c, r)
}

pub fn trajectory_cost_discounted(traj: &Trajectory, c: f64, r: f64, beta: f64) -> Result<f64> {
    discounted_cost(traj.records.iter().copied(), c, r, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Metric {
    Average,
    Discounted { beta: f64 },
}

impl Metric {
    pub fn tag(&self) -> String {
        match self {
            Metric::Average => "average".into(),
            Metric::Discounted { beta } => format!("discounted(beta={beta})"),
        }
    }
}

/// Initial-state distribution of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    /// x0 ~ φ_π.
    Stationary,
    /// x0 uniform over the states that may still admit, 0..N−1.
    Uniform,
}

impl Initial {
    pub fn tag(&self) -> &'static str {
        match self {
            Initial::Stationary => "stationary",
            Initial::Uniform => "uniform",
        }
    }
}

/// Average runs use [`AVERAGE_HORIZON`]; discounted runs stop at ln(1/ε)/β.
pub fn default_horizon(metric: Metric) -> f64 {
    match metric {
        Metric::Average => AVERAGE_HORIZON,
        Metric::Discounted { beta } => (1.0 / TRUNCATION_EPSILON).ln() / beta,
    }
}

fn pick_cumulative(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Trajectory `i` uses stream `i` of a generator seeded with `master_seed`, so two
/// calls with the same seed share variates index by index whatever the thread count.
pub fn sample_performance(
    params: &QueueParams,
    policy: &Policy,
    metric: Metric,
    initial: Initial,
    m: usize,
    horizon: f64,
    master_seed: u64,
) -> Result<SampleSet> {
    params.validate()?;
    if m == 0 {
        return Err(Error::TooSmall { needed: 1, got: 0 });
    }
    if let Metric::Discounted { beta } = metric {
        check_beta(beta)?;
    }
    let n = params.n;
    if policy.len() != n + 1 {
        return Err(Error::PolicyLength {
            expected: n + 1,
            got: policy.len(),
        });
    }
    let cumulative: Vec<f64> = match initial {
        Initial::Stationary => {
            let phi = stationary_phi(params, policy)?;
            phi.iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        }
        Initial::Uniform => (1..=n).map(|k| k as f64 / n as f64).collect(),
    };

    let one = |index: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(index as u64);
        let x0 = pick_cumulative(&cumulative, unit_open(&mut rng));
        let steps = walk(x0, policy, horizon, &mut rng, params.lambda, params.mu)?;
        match metric {
            Metric::Average => average_cost(steps, params.c, params.r),
            Metric::Discounted { beta } => discounted_cost(steps, params.c, params.r, beta),
        }
    };
    let values = (0..m).into_par_iter().map(one).collect::<Result<Vec<f64>>>()?;

    let meta = SampleMeta {
        label: format!("{}/{}/{}", policy_tag(policy), metric.tag(), initial.tag()),
        policy: Some(policy_tag(policy)),
        metric: Some(metric),
        initial: Some(initial),
        seed: Some(master_seed),
        m,
        horizon: Some(horizon),
        params: Some(*params),
        prng: Some(PRNG_ALGORITHM.to_string()),
        ..SampleMeta::default()
    };
    SampleSet::new(values, meta)
}

fn policy_tag(policy: &Policy) -> String {
    match super::extract_threshold(policy) {
        Some(x) => format!("threshold-{x}"),
        None => policy.to_string(),
    }
}

//! Uniformised M/M/1 admission control: model, threshold policies, simulation.

mod sim;
mod theory;

pub use sim::{
    average_cost, default_horizon, discounted_cost, sample_performance, simulate_trajectory,
    trajectory_cost_average, trajectory_cost_discounted, unit_open, walk, Event, Initial, Metric,
    Trajectory, TrajectoryRecord, Walk, AVERAGE_HORIZON, TRUNCATION_EPSILON,
};
pub use theory::{expected_sample_mean, queue_metric_report, stationary_phi};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mdp::{MdpModel, ModelDocument, Policy};
use crate::solvers::q_value;

/// Action 0 rejects an arrival, action 1 admits it.
pub const REJECT: usize = 0;
pub const ACCEPT: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    pub lambda: f64,
    pub mu: f64,
    /// Holding cost per customer per unit time.
    pub c: f64,
    /// Lump-sum penalty per rejected arrival.
    #[serde(rename = "R")]
    pub r: f64,
    /// Maximum queue length.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for QueueParams {
    /// λ = 1, μ = 0.95, c = 1, R = 200, N = 30.
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 0.95,
            c: 1.0,
            r: 200.0,
            n: 30,
            beta: None,
        }
    }
}

impl QueueParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("c", self.c),
            ("R", self.r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    range: "(0, inf)",
                });
            }
        }
        if self.n < 1 {
            return Err(Error::Domain {
                name: "N",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if let Some(b) = self.beta {
            check_beta(b)?;
        }
        Ok(())
    }

    /// Uniformisation rate λ + μ.
    pub fn gamma(&self) -> f64 {
        self.lambda + self.mu
    }

    /// γ/(γ + β).
    pub fn alpha(&self, beta: f64) -> f64 {
        self.gamma() / (self.gamma() + beta)
    }

    /// Traffic intensity as the μ/λ ratio; informational only.
    pub fn rho(&self) -> f64 {
        self.mu / self.lambda
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "beta",
            value: beta,
            range: "(0, inf)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueCriterion {
    Average,
    Discounted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueMdp {
    pub model: MdpModel,
    pub gamma: f64,
    /// Present for the discounted model.
    pub alpha: Option<f64>,
}

/// States 0..=N; the last state may only reject.
///
/// Average model: C⁰(x) = cx/γ + (λ/γ)R, C¹(x) = cx/γ.
/// Discounted model: every cost is scaled by α = γ/(γ+β), so C⁰(x) = cx/(β+γ) + α(λ/γ)R
/// and C¹(x) = cx/(β+γ): the penalty is charged at the end of the sojourn and only when
/// the event is an arrival.
pub fn build_queue_mdp(params: &QueueParams, criterion: QueueCriterion) -> Result<QueueMdp> {
    params.validate()?;
    let n = params.n;
    let gamma = params.gamma();
    let up = params.lambda / gamma;
    let down = params.mu / gamma;

    let mut reject = vec![vec![0.0; n + 1]; n + 1];
    let mut accept = vec![vec![0.0; n + 1]; n + 1];
    for x in 0..=n {
        let below = x.saturating_sub(1);
        reject[x][below] += down;
        reject[x][x] += up;
        accept[x][below] += down;
        accept[x][(x + 1).min(n)] += up;
    }

    let (holding_scale, penalty, alpha) = match criterion {
        QueueCriterion::Average => (1.0 / gamma, up * params.r, None),
        QueueCriterion::Discounted => {
            let beta = params.beta.ok_or_else(|| {
                Error::Config("the discounted queue model needs an interest rate beta".into())
            })?;
            let alpha = params.alpha(beta);
            (1.0 / (beta + gamma), alpha * up * params.r, Some(alpha))
        }
    };
    let hold: Vec<f64> = (0..=n).map(|x| params.c * x as f64 * holding_scale).collect();
    let c_reject: Vec<f64> = hold.iter().map(|h| h + penalty).collect();

    let mut actions = vec![vec![REJECT, ACCEPT]; n + 1];
    actions[n] = vec![REJECT];

    let model = MdpModel::from_document(ModelDocument {
        name: Some(format!("mm1-admission-N{n}")),
        n_states: n + 1,
        actions,
        transitions: vec![reject, accept],
        costs: vec![c_reject, hold],
        row_sum_tolerance: None,
    })?;
    Ok(QueueMdp {
        model,
        gamma,
        alpha,
    })
}

/// Admit below `x_star`, reject from `x_star` upwards.
pub fn threshold_policy(x_star: usize, n: usize) -> Result<Policy> {
    if x_star > n {
        return Err(Error::Domain {
            name: "x_star",
            value: x_star as f64,
            range: "[0, N]",
        });
    }
    Ok(Policy::new(
        (0..=n).map(|x| if x < x_star { ACCEPT } else { REJECT }).collect(),
    ))
}

/// The threshold of a policy made of admissions followed by rejections.
pub fn extract_threshold(policy: &Policy) -> Option<usize> {
    let p = policy.as_slice();
    let x_star = p.iter().position(|&a| a == REJECT).unwrap_or(p.len());
    let monotone = p[..x_star].iter().all(|&a| a == ACCEPT) && p[x_star..].iter().all(|&a| a == REJECT);
    monotone.then_some(x_star)
}

/// Q(x, reject) − Q(x, accept) for every state that may admit; positive means admit.
/// `values` is J^α for the discounted model or the bias for the average model.
pub fn admission_advantage(q: &QueueMdp, values: &Vector) -> Vec<f64> {
    let weight = q.alpha.unwrap_or(1.0);
    let n = q.model.n_states() - 1;
    (0..n)
        .map(|x| {
            q_value(&q.model, x, REJECT, values, weight) - q_value(&q.model, x, ACCEPT, values, weight)
        })
        .collect()
}

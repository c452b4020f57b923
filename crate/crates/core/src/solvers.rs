//! Policy evaluation and Policy Iteration under discounted and average cost.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_discount, Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{apply_policy, MdpModel, Policy, PolicyModel};

/// Bellman residual bound, relative to max(1, ‖solution‖∞).
pub const SOLVE_RESIDUAL: f64 = 1e-9;

/// Q-values this close to the minimum (relative to max(1, |min|)) count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Relative tolerance for calling two gains equal.
pub const GAIN_TOLERANCE: f64 = 1e-9;

/// Relative slack when comparing value vectors for discounted optimality.
pub const VALUE_TOLERANCE: f64 = 1e-8;

pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountedSolution {
    pub values: Vector,
    pub alpha: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageSolution {
    pub gain: f64,
    pub bias: Vector,
    pub distinguished_state: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationOutcome<S> {
    pub policy: Policy,
    pub solution: S,
    pub iterations: usize,
}

fn residual_bound(scale: f64) -> f64 {
    SOLVE_RESIDUAL * scale.max(1.0)
}

/// Solves (I − αP)J = C.
pub fn evaluate_discounted(pm: &PolicyModel, alpha: f64) -> Result<DiscountedSolution> {
    check_discount(alpha)?;
    let n = pm.n_states();
    let a = Matrix::identity(n, n) - &pm.transition * alpha;
    let values = linalg::solve(a, &pm.cost)?;
    let residual = linalg::inf_norm(&(&values - &pm.cost - (&pm.transition * &values) * alpha));
    let bound = residual_bound(linalg::inf_norm(&values));
    if residual > bound {
        return Err(Error::Residual {
            what: "discounted evaluation",
            residual,
            tolerance: bound,
        });
    }
    Ok(DiscountedSolution {
        values,
        alpha,
        residual,
    })
}

/// Solves the augmented system [[I − P, 1], [e_i#ᵀ, 0]]·[h; J] = [C; 0].
pub fn evaluate_average(pm: &PolicyModel, distinguished_state: usize) -> Result<AverageSolution> {
    let n = pm.n_states();
    if distinguished_state >= n {
        return Err(Error::Domain {
            name: "distinguished_state",
            value: distinguished_state as f64,
            range: "[0, n_states)",
        });
    }
    let mut a = Matrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n))
        .copy_from(&(Matrix::identity(n, n) - &pm.transition));
    a.view_mut((0, n), (n, 1)).fill(1.0);
    a[(n, distinguished_state)] = 1.0;
    let mut b = Vector::zeros(n + 1);
    b.rows_mut(0, n).copy_from(&pm.cost);
    let x = linalg::solve(a, &b).map_err(|e| match e {
        Error::Singular => Error::NotUnichain,
        other => other,
    })?;
    let gain = x[n];
    let mut bias = x.rows(0, n).into_owned();
    bias[distinguished_state] = 0.0;
    let residual = linalg::inf_norm(
        &(&bias + Vector::repeat(n, gain) - &pm.cost - &pm.transition * &bias),
    );
    let bound = residual_bound(linalg::inf_norm(&bias).max(gain.abs()));
    if residual > bound {
        return Err(Error::Residual {
            what: "average evaluation",
            residual,
            tolerance: bound,
        });
    }
    Ok(AverageSolution {
        gain,
        bias,
        distinguished_state,
        residual,
    })
}

/// C^a(x) + weight·Σ P^a(x, ·)·v.
pub fn q_value(model: &MdpModel, state: usize, action: usize, v: &Vector, weight: f64) -> f64 {
    let row = model.transition(action).row(state);
    model.cost(action)[state] + weight * row.dot(&v.transpose())
}

/// Greedy step: keeps the incumbent action when it is tied with the minimum,
/// otherwise takes the lowest tied action index.
fn improve(model: &MdpModel, v: &Vector, weight: f64, incumbent: &Policy) -> Policy {
    let actions = (0..model.n_states())
        .map(|x| {
            let qs: Vec<(usize, f64)> = model
                .actions(x)
                .iter()
                .map(|&a| (a, q_value(model, x, a, v, weight)))
                .collect();
            let best = qs.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
            let tol = TIE_TOLERANCE * best.abs().max(1.0);
            let tied = |q: f64| q <= best + tol;
            let current = incumbent.as_slice()[x];
            if qs.iter().any(|&(a, q)| a == current && tied(q)) {
                current
            } else {
                qs.iter().find(|&&(_, q)| tied(q)).map(|&(a, _)| a).unwrap_or(current)
            }
        })
        .collect();
    Policy::new(actions)
}

pub fn improve_discounted(model: &MdpModel, values: &Vector, alpha: f64, incumbent: &Policy) -> Policy {
    improve(model, values, alpha, incumbent)
}

pub fn improve_average(model: &MdpModel, bias: &Vector, incumbent: &Policy) -> Policy {
    improve(model, bias, 1.0, incumbent)
}

pub fn policy_iteration_discounted(
    model: &MdpModel,
    alpha: f64,
) -> Result<PolicyIterationOutcome<DiscountedSolution>> {
    policy_iteration_discounted_from(model, alpha, model.first_policy())
}

pub fn policy_iteration_discounted_from(
    model: &MdpModel,
    alpha: f64,
    initial: Policy,
) -> Result<PolicyIterationOutcome<DiscountedSolution>> {
    check_discount(alpha)?;
    let mut policy = initial;
    for iterations in 1..=MAX_ITERATIONS {
        let solution = evaluate_discounted(&apply_policy(model, &policy)?, alpha)?;
        let next = improve_discounted(model, &solution.values, alpha, &policy);
        if next == policy {
            return Ok(PolicyIterationOutcome {
                policy,
                solution,
                iterations,
            });
        }
        policy = next;
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

pub fn policy_iteration_average(
    model: &MdpModel,
    distinguished_state: usize,
) -> Result<PolicyIterationOutcome<AverageSolution>> {
    policy_iteration_average_from(model, distinguished_state, model.first_policy())
}

pub fn policy_iteration_average_from(
    model: &MdpModel,
    distinguished_state: usize,
    initial: Policy,
) -> Result<PolicyIterationOutcome<AverageSolution>> {
    let mut policy = initial;
    for iterations in 1..=MAX_ITERATIONS {
        let solution = evaluate_average(&apply_policy(model, &policy)?, distinguished_state)?;
        let next = improve_average(model, &solution.bias, &policy);
        if next == policy {
            return Ok(PolicyIterationOutcome {
                policy,
                solution,
                iterations,
            });
        }
        policy = next;
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// One improvement step returns the candidate unchanged.
    pub is_member: bool,
    pub improved: Policy,
    pub gain_candidate: f64,
    pub gain_improved: f64,
    /// The candidate's gain equals the gain Policy Iteration reaches from it.
    pub gain_optimal: bool,
    pub optimal_gain: f64,
}

pub fn gain_optimal_membership(
    model: &MdpModel,
    candidate: &Policy,
    distinguished_state: usize,
) -> Result<MembershipReport> {
    let own = evaluate_average(&apply_policy(model, candidate)?, distinguished_state)?;
    let improved = improve_average(model, &own.bias, candidate);
    if &improved == candidate {
        return Ok(MembershipReport {
            is_member: true,
            improved,
            gain_candidate: own.gain,
            gain_improved: own.gain,
            gain_optimal: true,
            optimal_gain: own.gain,
        });
    }
    let next = evaluate_average(&apply_policy(model, &improved)?, distinguished_state)?;
    let fixed = policy_iteration_average_from(model, distinguished_state, improved.clone())?;
    let optimal_gain = fixed.solution.gain;
    let tol = GAIN_TOLERANCE * own.gain.abs().max(1.0);
    Ok(MembershipReport {
        is_member: false,
        improved,
        gain_candidate: own.gain,
        gain_improved: next.gain,
        gain_optimal: own.gain <= optimal_gain + tol,
        optimal_gain,
    })
}

/// Finite-grid evidence for Blackwell optimality; never a proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackwellVerdict {
    pub is_gain_optimal: bool,
    /// Grid sorted ascending.
    pub grid: Vec<f64>,
    pub discounted_optimal_at: Vec<f64>,
    /// Smallest grid index from which the candidate is discounted-optimal at
    /// every larger grid point; `None` unless also gain-optimal.
    pub consistent_from: Option<usize>,
}

impl BlackwellVerdict {
    pub fn is_consistent(&self) -> bool {
        self.consistent_from.is_some()
    }
}

/// Candidate values no worse than the Policy Iteration optimum anywhere.
pub fn is_discounted_optimal(model: &MdpModel, candidate: &Policy, alpha: f64) -> Result<bool> {
    let own = evaluate_discounted(&apply_policy(model, candidate)?, alpha)?;
    let best = policy_iteration_discounted(model, alpha)?;
    Ok(own
        .values
        .iter()
        .zip(best.solution.values.iter())
        .all(|(&c, &b)| c <= b + VALUE_TOLERANCE * b.abs().max(1.0)))
}

pub fn blackwell_check(
    model: &MdpModel,
    candidate: &Policy,
    alpha_grid: &[f64],
    distinguished_state: usize,
) -> Result<BlackwellVerdict> {
    for &a in alpha_grid {
        check_discount(a)?;
    }
    let membership = gain_optimal_membership(model, candidate, distinguished_state)?;
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let flags: Vec<bool> = grid
        .par_iter()
        .map(|&a| is_discounted_optimal(model, candidate, a))
        .collect::<Result<_>>()?;
    let discounted_optimal_at = grid
        .iter()
        .zip(&flags)
        .filter(|(_, &f)| f)
        .map(|(&a, _)| a)
        .collect();
    let tail = flags.iter().rev().take_while(|&&f| f).count();
    let consistent_from = (membership.gain_optimal && tail > 0).then(|| grid.len() - tail);
    Ok(BlackwellVerdict {
        is_gain_optimal: membership.gain_optimal,
        grid,
        discounted_optimal_at,
        consistent_from,
    })
}

/// JSON shape of a solved policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SolveReport {
    Discounted {
        policy: Policy,
        alpha: f64,
        values: Vec<f64>,
        residual: f64,
        iterations: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<usize>,
    },
    Average {
        policy: Policy,
        gain: f64,
        bias: Vec<f64>,
        residual: f64,
        iterations: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<usize>,
    },
}

impl SolveReport {
    pub fn discounted(o: &PolicyIterationOutcome<DiscountedSolution>) -> Self {
        SolveReport::Discounted {
            policy: o.policy.clone(),
            alpha: o.solution.alpha,
            values: o.solution.values.iter().copied().collect(),
            residual: o.solution.residual,
            iterations: o.iterations,
            threshold: None,
        }
    }

    pub fn average(o: &PolicyIterationOutcome<AverageSolution>) -> Self {
        SolveReport::Average {
            policy: o.policy.clone(),
            gain: o.solution.gain,
            bias: o.solution.bias.iter().copied().collect(),
            residual: o.solution.residual,
            iterations: o.iterations,
            threshold: None,
        }
    }

    pub fn with_threshold(mut self, x_star: Option<usize>) -> Self {
        match &mut self {
            SolveReport::Discounted { threshold, .. } | SolveReport::Average { threshold, .. } => {
                *threshold = x_star
            }
        }
        self
    }
}

//! Finite MDP data model: validation, policies and policy application.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Row-sum tolerance applied when a model document does not declare its own.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Rows off by less than this (but more than the tolerance) are re-normalised on load.
pub const RENORMALIZE_LIMIT: f64 = 1e-9;

/// Default cap on the size of the policy space for enumeration.
pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// On-disk model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_states: usize,
    pub actions: Vec<Vec<usize>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub costs: Vec<Vec<f64>>,
    /// Overrides [`ROW_SUM_TOLERANCE`] for data printed at limited precision.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_sum_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    NoActions { state: usize },
    ActionOutOfRange { state: usize, action: usize },
    ActionListLength { got: usize },
    CostLength { action: usize, got: usize },
    MatrixShape { action: usize, rows: usize },
    RowLength { action: usize, row: usize, got: usize },
    NegativeEntry { action: usize, row: usize, col: usize, value: f64 },
    NonFiniteEntry { action: usize, row: usize, col: usize },
    RowSum { action: usize, row: usize, sum: f64 },
    NonFiniteCost { action: usize, state: usize },
    CostCount { transitions: usize, costs: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "model has no states"),
            Violation::NoActions { state } => write!(f, "state {state} has no feasible action"),
            Violation::ActionOutOfRange { state, action } => {
                write!(f, "state {state} lists action {action} with no matrix")
            }
            Violation::ActionListLength { got } => {
                write!(f, "actions has {got} lists, expected one per state")
            }
            Violation::CostLength { action, got } => {
                write!(f, "cost vector {action} has {got} entries")
            }
            Violation::MatrixShape { action, rows } => {
                write!(f, "matrix {action} has {rows} rows")
            }
            Violation::RowLength { action, row, got } => {
                write!(f, "matrix {action} row {row} has {got} entries")
            }
            Violation::NegativeEntry { action, row, col, value } => {
                write!(f, "matrix {action} entry ({row},{col}) = {value} < 0")
            }
            Violation::NonFiniteEntry { action, row, col } => {
                write!(f, "matrix {action} entry ({row},{col}) is not finite")
            }
            Violation::RowSum { action, row, sum } => {
                write!(f, "matrix {action} row {row}: row sum {sum} ≠ 1")
            }
            Violation::NonFiniteCost { action, state } => {
                write!(f, "cost {action} entry {state} is not finite")
            }
            Violation::CostCount { transitions, costs } => {
                write!(f, "{transitions} matrices but {costs} cost vectors")
            }
        }
    }
}

/// Every invariant violation of a model document, with coordinates.
pub fn validate_model(doc: &ModelDocument) -> Vec<Violation> {
    let tol = doc.row_sum_tolerance.unwrap_or(ROW_SUM_TOLERANCE);
    let n = doc.n_states;
    let mut out = Vec::new();
    if n == 0 {
        out.push(Violation::NoStates);
    }
    if doc.transitions.len() != doc.costs.len() {
        out.push(Violation::CostCount {
            transitions: doc.transitions.len(),
            costs: doc.costs.len(),
        });
    }
    if doc.actions.len() != n {
        out.push(Violation::ActionListLength {
            got: doc.actions.len(),
        });
    }
    for (state, acts) in doc.actions.iter().enumerate() {
        if acts.is_empty() {
            out.push(Violation::NoActions { state });
        }
        for &action in acts {
            if action >= doc.transitions.len() || action >= doc.costs.len() {
                out.push(Violation::ActionOutOfRange { state, action });
            }
        }
    }
    for (action, p) in doc.transitions.iter().enumerate() {
        if p.len() != n {
            out.push(Violation::MatrixShape {
                action,
                rows: p.len(),
            });
        }
        for (row, r) in p.iter().enumerate() {
            if r.len() != n {
                out.push(Violation::RowLength {
                    action,
                    row,
                    got: r.len(),
                });
                continue;
            }
            let mut finite = true;
            for (col, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    finite = false;
                    out.push(Violation::NonFiniteEntry { action, row, col });
                } else if v < 0.0 {
                    out.push(Violation::NegativeEntry {
                        action,
                        row,
                        col,
                        value: v,
                    });
                }
            }
            let sum: f64 = r.iter().sum();
            if finite && (sum - 1.0).abs() > tol {
                out.push(Violation::RowSum { action, row, sum });
            }
        }
    }
    for (action, c) in doc.costs.iter().enumerate() {
        if c.len() != n {
            out.push(Violation::CostLength {
                action,
                got: c.len(),
            });
        }
        for (state, v) in c.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFiniteCost { action, state });
            }
        }
    }
    out
}

/// A validated finite MDP: per-action transition matrices and cost vectors
/// plus per-state feasible action lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    n_states: usize,
    actions: Vec<Vec<usize>>,
    transitions: Vec<Matrix>,
    costs: Vec<Vector>,
    row_sum_tolerance: f64,
    name: Option<String>,
}

impl MdpModel {
    /// Builds a model from row-major nested vectors using the default tolerance.
    pub fn new(
        actions: Vec<Vec<usize>>,
        transitions: Vec<Vec<Vec<f64>>>,
        costs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_document(ModelDocument {
            name: None,
            n_states: actions.len(),
            actions,
            transitions,
            costs,
            row_sum_tolerance: None,
        })
    }

    /// Every state may use every action.
    pub fn with_all_actions(transitions: Vec<Vec<Vec<f64>>>, costs: Vec<Vec<f64>>) -> Result<Self> {
        let n = transitions.first().map_or(0, |p| p.len());
        let k = transitions.len();
        Self::new(vec![(0..k).collect(); n], transitions, costs)
    }

    pub fn from_document(mut doc: ModelDocument) -> Result<Self> {
        let tol = doc.row_sum_tolerance.unwrap_or(ROW_SUM_TOLERANCE);
        for p in doc.transitions.iter_mut() {
            for r in p.iter_mut() {
                let sum: f64 = r.iter().sum();
                let dev = (sum - 1.0).abs();
                if dev > tol && dev < RENORMALIZE_LIMIT && sum > 0.0 {
                    r.iter_mut().for_each(|v| *v /= sum);
                }
            }
        }
        let violations = validate_model(&doc);
        if !violations.is_empty() {
            return Err(Error::InvalidModel(violations));
        }
        let n = doc.n_states;
        let transitions = doc
            .transitions
            .iter()
            .map(|p| Matrix::from_fn(n, n, |i, j| p[i][j]))
            .collect();
        let costs = doc.costs.iter().map(|c| Vector::from_vec(c.clone())).collect();
        let mut actions = doc.actions;
        for a in actions.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self {
            n_states: n,
            actions,
            transitions,
            costs,
            row_sum_tolerance: tol,
            name: doc.name,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn to_document(&self) -> ModelDocument {
        let n = self.n_states;
        ModelDocument {
            name: self.name.clone(),
            n_states: n,
            actions: self.actions.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|p| (0..n).map(|i| p.row(i).iter().copied().collect()).collect())
                .collect(),
            costs: self.costs.iter().map(|c| c.iter().copied().collect()).collect(),
            row_sum_tolerance: (self.row_sum_tolerance != ROW_SUM_TOLERANCE)
                .then_some(self.row_sum_tolerance),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of distinct actions (matrices) in the model.
    pub fn n_actions(&self) -> usize {
        self.transitions.len()
    }

    /// Feasible actions of `state`, ascending.
    pub fn actions(&self, state: usize) -> &[usize] {
        &self.actions[state]
    }

    pub fn transition(&self, action: usize) -> &Matrix {
        &self.transitions[action]
    }

    pub fn cost(&self, action: usize) -> &Vector {
        &self.costs[action]
    }

    pub fn row_sum_tolerance(&self) -> f64 {
        self.row_sum_tolerance
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Policy choosing the lowest feasible action everywhere.
    pub fn first_policy(&self) -> Policy {
        Policy(self.actions.iter().map(|a| a[0]).collect())
    }

    /// Size of the policy space, saturating.
    pub fn policy_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }
}

/// Stationary deterministic Markov policy: `actions[x]` is the action taken in state `x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn new(actions: Vec<usize>) -> Self {
        Policy(actions)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_feasible(&self, model: &MdpModel) -> Result<()> {
        if self.0.len() != model.n_states() {
            return Err(Error::PolicyLength {
                expected: model.n_states(),
                got: self.0.len(),
            });
        }
        for (state, &action) in self.0.iter().enumerate() {
            if model.actions(state).binary_search(&action).is_err() {
                return Err(Error::InfeasibleAction { state, action });
            }
        }
        Ok(())
    }

    /// Parses `0,0,1` or `[0,0,1]`.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
        if trimmed.trim().is_empty() {
            return Ok(Policy(Vec::new()));
        }
        trimmed
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad policy entry {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Policy)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Transition matrix and cost vector induced by a fixed policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub transition: Matrix,
    pub cost: Vector,
}

impl PolicyModel {
    pub fn new(transition: Matrix, cost: Vector) -> Result<Self> {
        if !transition.is_square() {
            return Err(Error::LengthMismatch {
                left: transition.nrows(),
                right: transition.ncols(),
            });
        }
        if transition.nrows() != cost.len() {
            return Err(Error::LengthMismatch {
                left: transition.nrows(),
                right: cost.len(),
            });
        }
        Ok(Self { transition, cost })
    }

    pub fn n_states(&self) -> usize {
        self.cost.len()
    }
}

/// Row `i` of the result comes from the matrix of action `policy[i]`.
pub fn apply_policy(model: &MdpModel, policy: &Policy) -> Result<PolicyModel> {
    policy.check_feasible(model)?;
    let n = model.n_states();
    let p = policy.as_slice();
    let transition = Matrix::from_fn(n, n, |i, j| model.transition(p[i])[(i, j)]);
    let cost = Vector::from_fn(n, |i, _| model.cost(p[i])[i]);
    Ok(PolicyModel { transition, cost })
}

/// Odometer over the per-state feasible action lists; state 0 varies slowest.
#[derive(Debug, Clone)]
pub struct PolicyIter<'a> {
    model: &'a MdpModel,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for PolicyIter<'_> {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.done {
            return None;
        }
        let current = Policy(
            self.digits
                .iter()
                .enumerate()
                .map(|(x, &d)| self.model.actions(x)[d])
                .collect(),
        );
        let mut x = self.digits.len();
        loop {
            if x == 0 {
                self.done = true;
                break;
            }
            x -= 1;
            self.digits[x] += 1;
            if self.digits[x] < self.model.actions(x).len() {
                break;
            }
            self.digits[x] = 0;
        }
        Some(current)
    }
}

pub fn enumerate_policies(model: &MdpModel) -> Result<PolicyIter<'_>> {
    enumerate_policies_capped(model, DEFAULT_POLICY_CAP)
}

pub fn enumerate_policies_capped(model: &MdpModel, cap: u128) -> Result<PolicyIter<'_>> {
    let count = model.policy_count();
    if count > cap {
        return Err(Error::TooManyPolicies { count, cap });
    }
    Ok(PolicyIter {
        model,
        digits: vec![0; model.n_states()],
        done: false,
    })
}

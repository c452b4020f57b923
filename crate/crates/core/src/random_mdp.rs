//! Random MDPs with Dirichlet rows and an optional transient block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, ModelDocument};

/// Identifier of the generator behind every seeded stream in this crate.
pub const PRNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9)";

/// Added to every entry of a row inside its block before re-normalising.
pub const SAFEGUARD_EPSILON: f64 = 1e-9;

const FIXTURE_JSON: &str = include_str!("../../../fixtures/random5.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Concentration {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Concentration {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Concentration::Scalar(t) => vec![*t; n],
            Concentration::Vector(v) => v.clone(),
        }
    }
}

impl Default for Concentration {
    fn default() -> Self {
        Concentration::Scalar(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default)]
    pub n_transient: usize,
    #[serde(default)]
    pub dirichlet_theta: Concentration,
    #[serde(default = "default_cost_range")]
    pub cost_range: (f64, f64),
    pub seed: u64,
}

fn default_cost_range() -> (f64, f64) {
    (0.0, 10.0)
}

impl RandomMdpSpec {
    /// θ = 1 and costs on (0, 10).
    pub fn new(n_states: usize, n_actions: usize, n_transient: usize, seed: u64) -> Self {
        Self {
            n_states,
            n_actions,
            n_transient,
            dirichlet_theta: Concentration::default(),
            cost_range: default_cost_range(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_states == 0 || self.n_actions == 0 {
            return bad("n_states and n_actions must be positive".into());
        }
        if self.n_transient >= self.n_states {
            return bad(format!(
                "n_transient {} must be below n_states {}",
                self.n_transient, self.n_states
            ));
        }
        let theta = self.dirichlet_theta.expand(self.n_states);
        if theta.len() != self.n_states {
            return bad(format!("theta has {} entries, expected {}", theta.len(), self.n_states));
        }
        if theta.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("theta entries must be positive and finite".into());
        }
        let (a, b) = self.cost_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return bad(format!("cost range ({a}, {b}) is not a finite interval"));
        }
        Ok(())
    }

    pub fn n_recurrent(&self) -> usize {
        self.n_states - self.n_transient
    }
}

/// Normalised Gamma(θⱼ, 1) variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if theta.is_empty() {
        return Err(Error::Empty);
    }
    let mut y = Vec::with_capacity(theta.len());
    for &t in theta {
        let gamma = Gamma::new(t, 1.0).map_err(|_| Error::Domain {
            name: "theta",
            value: t,
            range: "(0, inf)",
        })?;
        y.push(gamma.sample(rng));
    }
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all gamma variates underflowed"));
    }
    y.iter_mut().for_each(|v| *v /= total);
    Ok(y)
}

fn normalise(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// Rows are drawn action by action, state by state, then costs in the same order.
/// The first `n_recurrent` states form the single closed class.
pub fn sample_random_mdp(spec: &RandomMdpSpec) -> Result<MdpModel> {
    spec.validate()?;
    let n = spec.n_states;
    let nr = spec.n_recurrent();
    let theta = spec.dirichlet_theta.expand(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut transitions = Vec::with_capacity(spec.n_actions);
    for _ in 0..spec.n_actions {
        let mut p = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = sample_dirichlet(&theta, &mut rng)?;
            let block = if i < nr { nr } else { n };
            row[block..].iter_mut().for_each(|v| *v = 0.0);
            row[..block].iter_mut().for_each(|v| *v += SAFEGUARD_EPSILON);
            normalise(&mut row);
            p.push(row);
        }
        transitions.push(p);
    }

    let (a, b) = spec.cost_range;
    let uniform = Uniform::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
    let costs = (0..spec.n_actions)
        .map(|_| (0..n).map(|_| uniform.sample(&mut rng)).collect())
        .collect();

    MdpModel::from_document(ModelDocument {
        name: Some(format!("random-{}x{}-t{}-seed{}", n, spec.n_actions, spec.n_transient, spec.seed)),
        n_states: n,
        actions: vec![(0..spec.n_actions).collect(); n],
        transitions,
        costs,
        row_sum_tolerance: None,
    })
}

/// The bundled five-state, two-action example with three transient states.
pub fn load_random5_fixture() -> Result<MdpModel> {
    MdpModel::from_json(FIXTURE_JSON)
}

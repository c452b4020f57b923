//! Structure and limiting behaviour of a fixed transition matrix.

use serde::{Deserialize, Serialize};

use crate::error::{check_discount, Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Entries at or below this are not graph edges.
pub const EDGE_THRESHOLD: f64 = 1e-15;

/// A class is closed when every member leaks less than this mass outside it.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;

const STATIONARY_RESIDUAL: f64 = 1e-9;
const INVERSE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStructure {
    /// Reverse-topological order of the condensation: closed classes come before
    /// anything that can reach them.
    pub sccs: Vec<Vec<usize>>,
    pub recurrent_classes: Vec<Vec<usize>>,
    pub transient_states: Vec<usize>,
    pub is_unichain: bool,
    pub is_recurrent: bool,
}

pub fn strongly_connected_components(p: &Matrix) -> Vec<Vec<usize>> {
    strongly_connected_components_with(p, EDGE_THRESHOLD)
}

/// Kosaraju's two-pass algorithm with an explicit stack.
pub fn strongly_connected_components_with(p: &Matrix, threshold: f64) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let forward: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| p[(i, j)] > threshold).collect())
        .collect();
    let mut backward = vec![Vec::new(); n];
    for (i, succ) in forward.iter().enumerate() {
        for &j in succ {
            backward[j].push(i);
        }
    }

    let mut visited = vec![false; n];
    let mut finish = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((v, next)) = stack.last_mut() {
            if let Some(&w) = forward[*v].get(*next) {
                *next += 1;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                finish.push(*v);
                stack.pop();
            }
        }
    }

    let mut assigned = vec![false; n];
    let mut comps = Vec::new();
    for &root in finish.iter().rev() {
        if assigned[root] {
            continue;
        }
        assigned[root] = true;
        let mut comp = vec![root];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &w in &backward[v] {
                if !assigned[w] {
                    assigned[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    // Second pass emits sources first.
    comps.reverse();
    comps
}

pub fn classify_chain(p: &Matrix) -> ChainStructure {
    let n = p.nrows();
    let sccs = strongly_connected_components(p);
    let mut recurrent_classes = Vec::new();
    let mut transient_states = Vec::new();
    for comp in &sccs {
        let mut member = vec![false; n];
        comp.iter().for_each(|&i| member[i] = true);
        let closed = comp.iter().all(|&i| {
            let leak: f64 = (0..n).filter(|&j| !member[j]).map(|j| p[(i, j)]).sum();
            leak < CLOSURE_TOLERANCE
        });
        if closed {
            recurrent_classes.push(comp.clone());
        } else {
            transient_states.extend_from_slice(comp);
        }
    }
    transient_states.sort_unstable();
    let is_unichain = recurrent_classes.len() == 1;
    ChainStructure {
        is_recurrent: is_unichain && transient_states.is_empty(),
        sccs,
        recurrent_classes,
        transient_states,
        is_unichain,
    }
}

/// Probability vector with φ = Pᵀφ.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    phi: Vector,
}

impl StationaryDistribution {
    pub fn vector(&self) -> &Vector {
        &self.phi
    }

    pub fn as_slice(&self) -> &[f64] {
        self.phi.as_slice()
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Direct solve of the balance equations with the last one swapped for 1ᵀφ = 1.
pub fn stationary_distribution(p: &Matrix) -> Result<StationaryDistribution> {
    let structure = classify_chain(p);
    if !structure.is_unichain {
        return Err(Error::StationaryNotUnique);
    }
    let phi = solve_balance(p)?;
    let mut phi = phi;
    for &t in &structure.transient_states {
        phi[t] = 0.0;
    }
    phi.iter_mut().for_each(|v| *v = v.max(0.0));
    let total = phi.sum();
    phi /= total;
    let residual = linalg::inf_norm(&(p.transpose() * &phi - &phi));
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::Residual {
            what: "stationary distribution",
            residual,
            tolerance: STATIONARY_RESIDUAL,
        });
    }
    Ok(StationaryDistribution { phi })
}

fn solve_balance(p: &Matrix) -> Result<Vector> {
    let n = p.nrows();
    let mut a = p.transpose() - Matrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = Vector::zeros(n);
    b[n - 1] = 1.0;
    linalg::solve(a, &b)
}

/// Rank-one Cesaro limit 1φᵀ of a unichain.
pub fn limiting_matrix(p: &Matrix) -> Result<Matrix> {
    let phi = stationary_distribution(p)?;
    Ok(outer_ones(phi.vector()))
}

fn outer_ones(phi: &Vector) -> Matrix {
    let n = phi.len();
    Matrix::from_fn(n, n, |_, j| phi[j])
}

/// Cesaro limit of any chain: each recurrent class contributes its own stationary
/// distribution, weighted by the absorption probabilities of the transient states.
pub fn cesaro_limit(p: &Matrix) -> Result<Matrix> {
    let n = p.nrows();
    let structure = classify_chain(p);
    if structure.is_unichain {
        return limiting_matrix(p);
    }
    let t = &structure.transient_states;
    let mut limit = Matrix::zeros(n, n);

    let mut class_phis = Vec::new();
    for class in &structure.recurrent_classes {
        let k = class.len();
        let sub = Matrix::from_fn(k, k, |a, b| p[(class[a], class[b])]);
        let local = solve_balance(&sub)?;
        let local = local.map(|v| v.max(0.0));
        let local = &local / local.sum();
        for &i in class {
            for (b, &j) in class.iter().enumerate() {
                limit[(i, j)] = local[b];
            }
        }
        class_phis.push(local);
    }

    if !t.is_empty() {
        let m = t.len();
        let q = Matrix::from_fn(m, m, |a, b| p[(t[a], t[b])]);
        let i_minus_q = Matrix::identity(m, m) - q;
        for (class, local) in structure.recurrent_classes.iter().zip(&class_phis) {
            let r = Vector::from_fn(m, |a, _| class.iter().map(|&j| p[(t[a], j)]).sum());
            let absorb = linalg::solve(i_minus_q.clone(), &r)?;
            for (a, &i) in t.iter().enumerate() {
                for (b, &j) in class.iter().enumerate() {
                    limit[(i, j)] += absorb[a] * local[b];
                }
            }
        }
    }
    Ok(limit)
}

/// (I − P + P*)⁻¹ for a unichain.
pub fn fundamental_matrix(p: &Matrix) -> Result<Matrix> {
    let star = limiting_matrix(p)?;
    invert_checked(Matrix::identity(p.nrows(), p.nrows()) - p + star, "fundamental matrix")
}

/// (I − αP + αP*)⁻¹, with P* the Cesaro limit (multichain allowed).
pub fn fundamental_matrix_alpha(p: &Matrix, alpha: f64) -> Result<Matrix> {
    check_discount(alpha)?;
    let star = cesaro_limit(p)?;
    fundamental_matrix_alpha_with(p, &star, alpha)
}

pub(crate) fn fundamental_matrix_alpha_with(p: &Matrix, star: &Matrix, alpha: f64) -> Result<Matrix> {
    let n = p.nrows();
    invert_checked(
        Matrix::identity(n, n) - p * alpha + star * alpha,
        "discounted fundamental matrix",
    )
}

fn invert_checked(a: Matrix, what: &'static str) -> Result<Matrix> {
    let n = a.nrows();
    let inv = linalg::inverse(a.clone())?;
    let residual = linalg::matrix_inf_norm(&(&a * &inv - Matrix::identity(n, n)));
    if residual > INVERSE_RESIDUAL {
        return Err(Error::Residual {
            what,
            residual,
            tolerance: INVERSE_RESIDUAL,
        });
    }
    Ok(inv)
}

/// H = (I − P + P*)⁻¹ − P*.
pub fn drazin_inverse(p: &Matrix) -> Result<Matrix> {
    let star = limiting_matrix(p)?;
    let f = fundamental_matrix(p)?;
    Ok(f - star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormBias {
    pub gain: f64,
    /// Normalised so that φᵀh = 0.
    pub bias: Vector,
}

pub fn bias_closed_form(p: &Matrix, c: &Vector) -> Result<ClosedFormBias> {
    if p.nrows() != c.len() {
        return Err(Error::LengthMismatch {
            left: p.nrows(),
            right: c.len(),
        });
    }
    let phi = stationary_distribution(p)?;
    let gain = phi.vector().dot(c);
    let f = fundamental_matrix(p)?;
    let bias = f * c - Vector::repeat(c.len(), gain);
    Ok(ClosedFormBias { gain, bias })
}

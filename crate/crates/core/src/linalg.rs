//! Thin helpers over nalgebra's dense LU.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots smaller than this, relative to the largest entry, mark the system as singular.
const PIVOT_RTOL: f64 = 1e-12;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn solve(a: Matrix, b: &Vector) -> Result<Vector> {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let lu = a.lu();
    let u = lu.u();
    if u.diagonal().iter().any(|d| d.abs() <= PIVOT_RTOL * scale) {
        return Err(Error::Singular);
    }
    lu.solve(b).ok_or(Error::Singular)
}

pub fn inverse(a: Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let lu = a.lu();
    if lu.u().diagonal().iter().any(|d| d.abs() <= PIVOT_RTOL * scale) {
        return Err(Error::Singular);
    }
    lu.solve(&Matrix::identity(n, n)).ok_or(Error::Singular)
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.amax()
}

/// Maximum absolute row sum.
pub fn matrix_inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Renders a matrix as CSV rows, one line per row.
pub fn to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in m.row_iter() {
        let cells: Vec<String> = r.iter().map(|x| format!("{x:.6}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

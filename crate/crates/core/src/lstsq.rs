//! Minimal-norm least squares through the SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub solution: DMatrix<f64>,
    /// Singular values of the design matrix, descending.
    pub singular_values: Vec<f64>,
    /// Number of singular values above `rel_tol * largest`.
    pub rank: usize,
}

impl LstsqSolution {
    /// `s_max / s_min`; infinite when the smallest singular value is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.singular_values.first(), self.singular_values.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => f64::NAN,
        }
    }
}

/// Solves `min ||design * X - target||_F`, truncating singular values below
/// `rel_tol` times the largest one.
pub fn solve(design: &DMatrix<f64>, target: &DMatrix<f64>, rel_tol: f64) -> Result<LstsqSolution> {
    if design.nrows() != target.nrows() {
        return Err(Error::Dimension(format!(
            "design has {} rows, target {}",
            design.nrows(),
            target.nrows()
        )));
    }
    let svd = design.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cutoff = singular_values.first().copied().unwrap_or(0.0) * rel_tol;

    let mut solution = DMatrix::zeros(design.ncols(), target.ncols());
    let mut rank = 0;
    for &i in &order {
        let s = svd.singular_values[i];
        if !(s > cutoff) || s == 0.0 {
            continue;
        }
        rank += 1;
        // x += v_i (u_i^T t) / s_i
        let coeffs = u.column(i).transpose() * target / s;
        solution += v_t.row(i).transpose() * coeffs;
    }
    Ok(LstsqSolution {
        solution,
        singular_values,
        rank,
    })
}

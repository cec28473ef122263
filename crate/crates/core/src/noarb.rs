//! The risk-neutral drift condition
//!
//! ```text
//! d_x g(x,y) = grad_y g(x,y) . b + 1/2 sum_{i,j} W_ij d_{y_i} d_{y_j} g(x,y)
//! ```
//!
//! tested on a finite maturity grid, and the tools built on it: the drift
//! solver, the volatility-sweep consistency probe, affine-rank detection and
//! curve reconstruction from the Hessian coefficient field `eta`.
//!
//! The second-order weight `W` defaults to the index pattern
//! `W_ij = sigma_ij sigma_ji` ([`index_pattern_weight`]); the sweep formulas
//! for `eta` and `gamma` are derived for it. For simulation the Itô weight
//! `sigma sigma^T` ([`covariance_weight`]) is used. The two coincide for
//! diagonal `sigma`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::CurveFamily;
use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::lstsq;

/// Relative singular-value cutoff of the drift design matrix.
pub const DRIFT_RANK_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for affine-rank detection.
pub const AFFINE_RANK_TOL: f64 = 1e-8;
/// Residual at or below which the consistency probe reports affine behaviour.
pub const SCC_TOL: f64 = 1e-8;

/// `W_ij = sigma_ij sigma_ji`.
pub fn index_pattern_weight(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    sigma.component_mul(&sigma.transpose())
}

/// `W = sigma sigma^T`.
pub fn covariance_weight(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    sigma * sigma.transpose()
}

fn second_order(weight: &DMatrix<f64>, hess: &DMatrix<f64>) -> f64 {
    0.5 * weight.component_mul(hess).sum()
}

fn check_square(name: &str, m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

fn check_vec(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::Dimension(format!("{name} has length {}, expected {d}", v.len())));
    }
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub rms: f64,
    pub max: f64,
}

/// Residual of the drift condition with the index-pattern weight.
pub fn rn_residual(
    m: &dyn CurveFamily,
    y: &[f64],
    sigma: &DMatrix<f64>,
    b: &[f64],
    grid: &XGrid,
) -> Result<Residuals> {
    check_square("sigma", sigma, m.dim())?;
    rn_residual_weighted(m, y, &index_pattern_weight(sigma), b, grid)
}

pub fn rn_residual_weighted(
    m: &dyn CurveFamily,
    y: &[f64],
    weight: &DMatrix<f64>,
    b: &[f64],
    grid: &XGrid,
) -> Result<Residuals> {
    let d = m.dim();
    check_vec("y", y, d)?;
    check_vec("b", b, d)?;
    check_square("weight", weight, d)?;
    let b = DVector::from_column_slice(b);
    let mut sum_sq = 0.0;
    let mut max = 0.0f64;
    for &x in grid.nodes() {
        let r = m.dx(x, y) - m.grad_y(x, y).dot(&b) - second_order(weight, &m.hess_y(x, y));
        sum_sq += r * r;
        max = max.max(r.abs());
    }
    if !sum_sq.is_finite() {
        return Err(Error::NonFinite("drift-condition residual".into()));
    }
    Ok(Residuals {
        rms: (sum_sq / grid.len() as f64).sqrt(),
        max,
    })
}

/// Least-squares drift `b(y)` for a fixed diffusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSolveResult {
    pub b: Vec<f64>,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub condition_number: f64,
    /// The gradient design matrix has full numerical rank `d`.
    pub rank_ok: bool,
}

pub fn solve_drift(
    m: &dyn CurveFamily,
    y: &[f64],
    sigma: &DMatrix<f64>,
    grid: &XGrid,
) -> Result<DriftSolveResult> {
    check_square("sigma", sigma, m.dim())?;
    solve_drift_weighted(m, y, &index_pattern_weight(sigma), grid)
}

/// Minimises the residual rms over `b`: rows `grad_y g(x_k, y)`, targets
/// `d_x g - 1/2 sum W_ij d_i d_j g`.
pub fn solve_drift_weighted(
    m: &dyn CurveFamily,
    y: &[f64],
    weight: &DMatrix<f64>,
    grid: &XGrid,
) -> Result<DriftSolveResult> {
    let d = m.dim();
    check_vec("y", y, d)?;
    check_square("weight", weight, d)?;
    grid.require_for_dim(d)?;
    let n = grid.len();
    let mut design = DMatrix::zeros(n, d);
    let mut target = DMatrix::zeros(n, 1);
    for (k, &x) in grid.nodes().iter().enumerate() {
        design.row_mut(k).copy_from(&m.grad_y(x, y).transpose());
        target[(k, 0)] = m.dx(x, y) - second_order(weight, &m.hess_y(x, y));
    }
    if design.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("drift system at y = {y:?}")));
    }
    if design.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateFamily { y: y.to_vec() });
    }
    let sol = lstsq::solve(&design, &target, DRIFT_RANK_TOL)?;
    let b: Vec<f64> = sol.solution.column(0).iter().copied().collect();
    let res = rn_residual_weighted(m, y, weight, &b, grid)?;
    Ok(DriftSolveResult {
        b,
        residual_rms: res.rms,
        residual_max: res.max,
        condition_number: sol.condition_number(),
        rank_ok: sol.rank == d,
    })
}

/// Symmetric `d x d` array of `R^d` vectors, `eta[i][j] = eta[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTensor {
    d: usize,
    data: Vec<f64>,
}

impl EtaTensor {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![0.0; d * d * d],
        }
    }

    /// Every `eta[i][j]` equal to `v`.
    pub fn constant(d: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), d);
        let mut e = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                e.set(i, j, v);
            }
        }
        e
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let o = (i * self.d + j) * self.d;
        &self.data[o..o + self.d]
    }

    /// Sets `eta[i][j]` and `eta[j][i]`.
    pub fn set(&mut self, i: usize, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.d);
        for (a, b) in [(i, j), (j, i)] {
            let o = (a * self.d + b) * self.d;
            self.data[o..o + self.d].copy_from_slice(v);
        }
    }
}

impl Serialize for EtaTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nested: Vec<Vec<&[f64]>> = (0..self.d)
            .map(|i| (0..self.d).map(|j| self.get(i, j)).collect())
            .collect();
        nested.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EtaTensor {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(de)?;
        let d = nested.len();
        let mut e = EtaTensor::zeros(d);
        for (i, row) in nested.iter().enumerate() {
            if row.len() != d {
                return Err(D::Error::custom("eta must be d x d"));
            }
            for (j, v) in row.iter().enumerate() {
                if v.len() != d {
                    return Err(D::Error::custom("eta entries must have length d"));
                }
                if j >= i {
                    e.set(i, j, v);
                } else if v.as_slice() != e.get(i, j) {
                    return Err(D::Error::custom("eta must be symmetric"));
                }
            }
        }
        Ok(e)
    }
}

/// Diffusion matrices compared by the consistency probe, with labels:
/// `I`, `2I`, `I+e_i_i` and `I+e_i_j` (1-based, `i < j`).
pub fn scc_sweep(d: usize) -> Vec<(String, DMatrix<f64>)> {
    let id = DMatrix::<f64>::identity(d, d);
    let mut out = vec![("I".to_string(), id.clone()), ("2I".to_string(), &id * 2.0)];
    for i in 0..d {
        for j in i..d {
            let mut s = id.clone();
            s[(i, j)] += 1.0;
            if i != j {
                s[(j, i)] += 1.0;
            }
            out.push((format!("I+e_{}_{}", i + 1, j + 1), s));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccReport {
    pub y: Vec<f64>,
    pub eta: EtaTensor,
    pub gamma: Vec<f64>,
    /// `max |d_i d_j g - grad_y g . eta_ij|` over the grid and all `i, j`.
    pub hessian_identity_residual: f64,
    /// `max |d_x g - grad_y g . gamma|` over the grid.
    pub x_identity_residual: f64,
    pub per_sigma: BTreeMap<String, DriftSolveResult>,
    /// Some sweep solve was rank deficient.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SccVerdict {
    AffineConsistent,
    Violation { residual: f64 },
    Inconclusive { residual: f64 },
}

impl SccReport {
    pub fn max_residual(&self) -> f64 {
        self.hessian_identity_residual.max(self.x_identity_residual)
    }

    pub fn verdict(&self, tol: f64) -> SccVerdict {
        let residual = self.max_residual();
        if self.inconclusive {
            SccVerdict::Inconclusive { residual }
        } else if residual <= tol {
            SccVerdict::AffineConsistent
        } else {
            SccVerdict::Violation { residual }
        }
    }
}

impl std::fmt::Display for SccVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SccVerdict::AffineConsistent => write!(f, "AFFINE-CONSISTENT"),
            SccVerdict::Violation { residual } => write!(f, "SCC-VIOLATION (residual={residual:.6e})"),
            SccVerdict::Inconclusive { residual } => {
                write!(f, "SCC-INCONCLUSIVE (rank-deficient drift solve, residual={residual:.6e})")
            }
        }
    }
}

/// Solves the drift for every matrix of [`scc_sweep`] and extracts `eta`,
/// `gamma` from the differences between the solutions.
pub fn scc_probe(m: &dyn CurveFamily, y: &[f64], grid: &XGrid) -> Result<SccReport> {
    let d = m.dim();
    check_vec("y", y, d)?;
    let sweep = scc_sweep(d);
    let solved: Vec<Result<DriftSolveResult>> = sweep
        .par_iter()
        .map(|(_, s)| solve_drift(m, y, s, grid))
        .collect();
    let mut per_sigma = BTreeMap::new();
    for ((label, _), r) in sweep.iter().zip(solved) {
        per_sigma.insert(label.clone(), r?);
    }
    let b = |label: &str| DVector::from_column_slice(&per_sigma[label].b);
    let b_id = b("I");

    let mut eta = EtaTensor::zeros(d);
    for i in 0..d {
        for j in i..d {
            let other = b(&format!("I+e_{}_{}", i + 1, j + 1));
            let v = if i == j {
                (&b_id - other) * (2.0 / 3.0)
            } else {
                &b_id - other
            };
            eta.set(i, j, v.as_slice());
        }
    }
    let gamma = (&b_id * 4.0 - b("2I")) / 3.0;

    let mut hess_res = 0.0f64;
    let mut x_res = 0.0f64;
    for &x in grid.nodes() {
        let grad = m.grad_y(x, y);
        let hess = m.hess_y(x, y);
        for i in 0..d {
            for j in 0..d {
                let e = DVector::from_column_slice(eta.get(i, j));
                hess_res = hess_res.max((hess[(i, j)] - grad.dot(&e)).abs());
            }
        }
        x_res = x_res.max((m.dx(x, y) - grad.dot(&gamma)).abs());
    }
    let inconclusive = per_sigma.values().any(|r| !r.rank_ok);
    Ok(SccReport {
        y: y.to_vec(),
        eta,
        gamma: gamma.iter().copied().collect(),
        hessian_identity_residual: hess_res,
        x_identity_residual: x_res,
        per_sigma,
        inconclusive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRank {
    pub rank: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Every difference curve vanished.
    pub degenerate: bool,
}

/// Numerical rank of the curve differences `g(., y_k) - g(., base_y)`.
pub fn detect_affine(
    m: &dyn CurveFamily,
    y_samples: &[Vec<f64>],
    base_y: &[f64],
    grid: &XGrid,
    rel_tol: f64,
) -> Result<AffineRank> {
    let d = m.dim();
    check_vec("base_y", base_y, d)?;
    if y_samples.len() < d + 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples for a {d}-factor family, got {}",
            d + 3,
            y_samples.len()
        )));
    }
    if grid.len() < 2 * y_samples.len() {
        return Err(Error::InvalidArgument(format!(
            "grid has {} nodes, need at least {} for {} samples",
            grid.len(),
            2 * y_samples.len(),
            y_samples.len()
        )));
    }
    for y in y_samples {
        check_vec("y sample", y, d)?;
    }
    let base = crate::curves::eval_curve(m, base_y, grid.nodes())?;
    let mut cols = DMatrix::zeros(grid.len(), y_samples.len());
    for (k, y) in y_samples.iter().enumerate() {
        let c = crate::curves::eval_curve(m, y, grid.nodes())?;
        for r in 0..grid.len() {
            cols[(r, k)] = c[r] - base[r];
        }
    }
    let mut singular_values: Vec<f64> = cols.singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let top = singular_values[0];
    let rank = if top > 0.0 {
        singular_values.iter().filter(|&&s| s > rel_tol * top).count()
    } else {
        0
    };
    Ok(AffineRank {
        rank,
        singular_values,
        degenerate: rank == 0,
    })
}

/// Rebuilds `h(y)` from `h(0)`, `grad h(0)` and the field `eta` with
/// `d_i d_j h = grad h . eta_ij`, by integrating along `t -> t y`:
///
/// ```text
/// d/dt h(ty)      = grad h(ty) . y
/// d/dt grad h(ty) = M(ty) grad h(ty),   M_ik = sum_j eta_ij,k y_j
/// ```
///
/// with classical fourth-order Runge-Kutta.
pub fn reconstruct_from_eta<F>(eta_field: F, g0: f64, grad0: &[f64], y: &[f64], n_steps: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<EtaTensor>,
{
    let d = grad0.len();
    check_vec("y", y, d)?;
    if n_steps < 100 {
        return Err(Error::InvalidArgument(format!("n_steps must be >= 100, got {n_steps}")));
    }
    let rhs = |t: f64, state: &DVector<f64>| -> Result<DVector<f64>> {
        let point: Vec<f64> = y.iter().map(|v| t * v).collect();
        let eta = eta_field(&point)?;
        if eta.dim() != d {
            return Err(Error::Dimension(format!("eta field has dimension {}, expected {d}", eta.dim())));
        }
        let grad = state.rows(1, d);
        let mut out = DVector::zeros(d + 1);
        out[0] = grad.dot(&DVector::from_column_slice(y));
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let e = eta.get(i, j);
                for k in 0..d {
                    acc += e[k] * y[j] * grad[k];
                }
            }
            out[i + 1] = acc;
        }
        Ok(out)
    };

    let mut state = DVector::zeros(d + 1);
    state[0] = g0;
    state.rows_mut(1, d).copy_from_slice(grad0);
    let h = 1.0 / n_steps as f64;
    for step in 0..n_steps {
        let t = step as f64 * h;
        let k1 = rhs(t, &state)?;
        let k2 = rhs(t + 0.5 * h, &(&state + &k1 * (0.5 * h)))?;
        let k3 = rhs(t + 0.5 * h, &(&state + &k2 * (0.5 * h)))?;
        let k4 = rhs(t + h, &(&state + &k3 * h))?;
        state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteReconstruction { t: t + h });
        }
    }
    Ok(state[0])
}

/// `eta` field of a family, read off the consistency probe at each point.
pub fn probe_eta_field<'a>(
    m: &'a dyn CurveFamily,
    grid: &'a XGrid,
) -> impl Fn(&[f64]) -> Result<EtaTensor> + 'a {
    move |y| scc_probe(m, y, grid).map(|r| r.eta)
}

/// Largest `|b(y)|` over a lattice with `per_axis` points per coordinate in
/// the box `[lo, hi]`; finite values indicate local boundedness on the box.
pub fn drift_bound_on_box(
    m: &dyn CurveFamily,
    weight: &DMatrix<f64>,
    lo: &[f64],
    hi: &[f64],
    per_axis: usize,
    grid: &XGrid,
) -> Result<f64> {
    let d = m.dim();
    check_vec("lo", lo, d)?;
    check_vec("hi", hi, d)?;
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(d as u32);
    let mut bound = 0.0f64;
    let mut y = vec![0.0; d];
    for idx in 0..total {
        let mut r = idx;
        for k in 0..d {
            let i = r % per_axis;
            r /= per_axis;
            y[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64;
        }
        let sol = solve_drift_weighted(m, &y, weight, grid)?;
        bound = bound.max(sol.b.iter().map(|v| v.abs()).fold(0.0, f64::max));
    }
    Ok(bound)
}

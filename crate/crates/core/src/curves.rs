//! Curve families `g(x, y)` indexed by a factor `y` in `R^d`, with the
//! derivatives the drift condition needs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::normal;
use crate::qe::QeFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// A `C^{1,2}` family of curves `x -> g(x, y)`.
///
/// Implementations return `NaN` rather than panicking when a value cannot
/// be represented; [`eval_curve`] turns that into an error.
pub trait CurveFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: f64, y: &[f64]) -> f64;
    fn dx(&self, x: f64, y: &[f64]) -> f64;
    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64>;
    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64>;

    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }
}

impl<T: CurveFamily + ?Sized> CurveFamily for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: f64, y: &[f64]) -> f64 {
        (**self).value(x, y)
    }
    fn dx(&self, x: f64, y: &[f64]) -> f64 {
        (**self).dx(x, y)
    }
    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64> {
        (**self).grad_y(x, y)
    }
    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64> {
        (**self).hess_y(x, y)
    }
    fn derivative_mode(&self) -> DerivativeMode {
        (**self).derivative_mode()
    }
}

/// Finite-difference step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    /// Central step for first derivatives.
    pub first: f64,
    /// Step for second derivatives.
    pub second: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            first: 1e-6,
            second: 1e-4,
        }
    }
}

/// `d/dx`; central where `x - h >= 0`, second-order forward otherwise.
pub fn fd_dx(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    if x >= h {
        (f(x + h) - f(x - h)) / (2.0 * h)
    } else {
        (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
    }
}

pub fn fd_grad(f: impl Fn(&[f64]) -> f64, y: &[f64], h: f64) -> DVector<f64> {
    let mut p = y.to_vec();
    DVector::from_fn(y.len(), |i, _| {
        p[i] = y[i] + h;
        let up = f(&p);
        p[i] = y[i] - h;
        let down = f(&p);
        p[i] = y[i];
        (up - down) / (2.0 * h)
    })
}

pub fn fd_hess(f: impl Fn(&[f64]) -> f64, y: &[f64], h: f64) -> DMatrix<f64> {
    let d = y.len();
    let mut p = y.to_vec();
    let mut at = |shift: &[(usize, f64)]| {
        for &(i, s) in shift {
            p[i] += s;
        }
        let v = f(&p);
        p.copy_from_slice(y);
        v
    };
    let centre = at(&[]);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        hess[(i, i)] = (at(&[(i, h)]) - 2.0 * centre + at(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Componentwise nonlinearity `A: R^d -> R^d` of an affine family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AffineMap {
    Identity,
    /// `A_k(y) = exp(rate_k y_k) - 1`.
    ExpMinusOne { rates: Vec<f64> },
    /// `A_k(y) = y_k + coeff_k y_k^3`.
    ComponentwiseCubic { coeffs: Vec<f64> },
}

impl AffineMap {
    fn params_len(&self) -> Option<usize> {
        match self {
            AffineMap::Identity => None,
            AffineMap::ExpMinusOne { rates } => Some(rates.len()),
            AffineMap::ComponentwiseCubic { coeffs } => Some(coeffs.len()),
        }
    }

    /// `(A_k, A_k', A_k'')` at `y_k`.
    pub fn component(&self, k: usize, yk: f64) -> (f64, f64, f64) {
        match self {
            AffineMap::Identity => (yk, 1.0, 0.0),
            AffineMap::ExpMinusOne { rates } => {
                let r = rates[k];
                let e = (r * yk).exp();
                (e - 1.0, r * e, r * r * e)
            }
            AffineMap::ComponentwiseCubic { coeffs } => {
                let a = coeffs[k];
                (yk + a * yk * yk * yk, 1.0 + 3.0 * a * yk * yk, 6.0 * a * yk)
            }
        }
    }

    pub fn apply(&self, y: &[f64]) -> DVector<f64> {
        DVector::from_fn(y.len(), |k, _| self.component(k, y[k]).0)
    }
}

/// `g(x, y) = c(x) + sum_k u_k(x) A_k(y)` with quasi-exponential `c`, `u_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineJson", into = "AffineJson")]
pub struct AffineModel {
    c: QeFunction,
    u: Vec<QeFunction>,
    amap: AffineMap,
    dc: QeFunction,
    du: Vec<QeFunction>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineJson {
    c: QeFunction,
    u: Vec<QeFunction>,
    amap: AffineMap,
}

impl TryFrom<AffineJson> for AffineModel {
    type Error = Error;
    fn try_from(j: AffineJson) -> Result<Self> {
        AffineModel::new(j.c, j.u, j.amap)
    }
}

impl From<AffineModel> for AffineJson {
    fn from(m: AffineModel) -> Self {
        AffineJson {
            c: m.c,
            u: m.u,
            amap: m.amap,
        }
    }
}

impl AffineModel {
    pub fn new(c: QeFunction, u: Vec<QeFunction>, amap: AffineMap) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::Dimension("affine model needs at least one factor".into()));
        }
        if let Some(len) = amap.params_len() {
            if len != u.len() {
                return Err(Error::Dimension(format!(
                    "{} factor curves but {len} map parameters",
                    u.len()
                )));
            }
        }
        let dc = c.derivative();
        let du = u.iter().map(QeFunction::derivative).collect();
        Ok(Self { c, u, amap, dc, du })
    }

    pub fn level(&self) -> &QeFunction {
        &self.c
    }

    pub fn factors(&self) -> &[QeFunction] {
        &self.u
    }

    pub fn amap(&self) -> &AffineMap {
        &self.amap
    }

    fn factor_values(fs: &[QeFunction], x: f64) -> Vec<f64> {
        fs.iter().map(|f| f.eval(x).unwrap_or(f64::NAN)).collect()
    }
}

impl CurveFamily for AffineModel {
    fn dim(&self) -> usize {
        self.u.len()
    }

    fn value(&self, x: f64, y: &[f64]) -> f64 {
        let u = Self::factor_values(&self.u, x);
        self.c.eval(x).unwrap_or(f64::NAN)
            + (0..u.len())
                .map(|k| u[k] * self.amap.component(k, y[k]).0)
                .sum::<f64>()
    }

    fn dx(&self, x: f64, y: &[f64]) -> f64 {
        let du = Self::factor_values(&self.du, x);
        self.dc.eval(x).unwrap_or(f64::NAN)
            + (0..du.len())
                .map(|k| du[k] * self.amap.component(k, y[k]).0)
                .sum::<f64>()
    }

    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64> {
        let u = Self::factor_values(&self.u, x);
        DVector::from_fn(u.len(), |k, _| u[k] * self.amap.component(k, y[k]).1)
    }

    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        if self.amap == AffineMap::Identity {
            return DMatrix::zeros(d, d);
        }
        let u = Self::factor_values(&self.u, x);
        DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                u[i] * self.amap.component(i, y[i]).2
            } else {
                0.0
            }
        })
    }
}

/// `g(x, y) = Phi((1 - y) / sqrt(1 + x))`: a one-factor family that is
/// risk neutral for unit volatility but has no finite-dimensional span.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianExampleModel;

impl GaussianExampleModel {
    /// `(z, phi(z), sqrt(1+x))`.
    fn parts(x: f64, y: f64) -> (f64, f64, f64) {
        let s = (1.0 + x).sqrt();
        let z = (1.0 - y) / s;
        (z, normal::pdf(z), s)
    }
}

impl CurveFamily for GaussianExampleModel {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: f64, y: &[f64]) -> f64 {
        normal::cdf((1.0 - y[0]) / (1.0 + x).sqrt())
    }

    fn dx(&self, x: f64, y: &[f64]) -> f64 {
        let (_, phi, s) = Self::parts(x, y[0]);
        -(1.0 - y[0]) * phi / (s * s * s) * 0.5
    }

    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64> {
        let (_, phi, s) = Self::parts(x, y[0]);
        DVector::from_element(1, -phi / s)
    }

    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64> {
        let (_, phi, s) = Self::parts(x, y[0]);
        DMatrix::from_element(1, 1, -(1.0 - y[0]) * phi / (s * s * s))
    }
}

/// `g(x, y) = level` for every `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantFamily {
    pub dim: usize,
    pub level: f64,
}

impl CurveFamily for ConstantFamily {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: f64, _y: &[f64]) -> f64 {
        self.level
    }
    fn dx(&self, _x: f64, _y: &[f64]) -> f64 {
        0.0
    }
    fn grad_y(&self, _x: f64, _y: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn hess_y(&self, _x: f64, _y: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
}

/// A user-supplied `g` whose derivatives are taken by finite differences.
pub struct FnFamily<F> {
    dim: usize,
    f: F,
    steps: FdSteps,
}

impl<F> FnFamily<F>
where
    F: Fn(f64, &[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self::with_steps(dim, f, FdSteps::default())
    }

    pub fn with_steps(dim: usize, f: F, steps: FdSteps) -> Self {
        Self { dim, f, steps }
    }
}

impl<F> CurveFamily for FnFamily<F>
where
    F: Fn(f64, &[f64]) -> f64 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: f64, y: &[f64]) -> f64 {
        (self.f)(x, y)
    }
    fn dx(&self, x: f64, y: &[f64]) -> f64 {
        fd_dx(|s| (self.f)(s, y), x, self.steps.first)
    }
    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64> {
        fd_grad(|p| (self.f)(x, p), y, self.steps.first)
    }
    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64> {
        fd_hess(|p| (self.f)(x, p), y, self.steps.second)
    }
    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference
    }
}

/// Every curve family this crate knows how to (de)serialise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    Affine(AffineModel),
    GaussianExample,
    Constant(ConstantFamily),
}

impl Model {
    fn inner(&self) -> &dyn CurveFamily {
        match self {
            Model::Affine(m) => m,
            Model::GaussianExample => &GaussianExampleModel,
            Model::Constant(m) => m,
        }
    }
}

impl CurveFamily for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn value(&self, x: f64, y: &[f64]) -> f64 {
        self.inner().value(x, y)
    }
    fn dx(&self, x: f64, y: &[f64]) -> f64 {
        self.inner().dx(x, y)
    }
    fn grad_y(&self, x: f64, y: &[f64]) -> DVector<f64> {
        self.inner().grad_y(x, y)
    }
    fn hess_y(&self, x: f64, y: &[f64]) -> DMatrix<f64> {
        self.inner().hess_y(x, y)
    }
    fn derivative_mode(&self) -> DerivativeMode {
        self.inner().derivative_mode()
    }
}

/// `x e^{-lambda x}` as a QE triple.
fn x_times_exp(lambda: f64, scale: f64) -> QeFunction {
    QeFunction::new(
        DMatrix::from_row_slice(2, 2, &[-lambda, 0.0, 1.0, -lambda]),
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![0.0, scale]),
    )
    .expect("static triple")
}

/// Names accepted by [`builtin_affine`].
pub const BUILTIN_AFFINE: [&str; 6] = [
    "decay",
    "decay-exp",
    "level-slope",
    "ns2",
    "ns2-cubic",
    "ns3",
];

/// Built-in affine families. In each, `c'` and `u'` stay in the span of
/// `u`, so a risk-neutral drift exists for every volatility.
///
/// * `decay`: `y e^{-x}`
/// * `decay-exp`: `e^{-x} (e^y - 1)`
/// * `level-slope`: `0.3 x + y` (drift is the constant 0.3)
/// * `ns2`: `0.5 + y_1 e^{-x} + y_2 x e^{-x}`
/// * `ns2-cubic`: `ns2` with `A_k(y) = y_k + 0.1 y_k^3`
/// * `ns3`: `y_1 + y_2 e^{-x} + y_3 x e^{-x}`
pub fn builtin_affine(name: &str) -> Option<AffineModel> {
    let e = |rate: f64| QeFunction::scalar_exp(rate, 1.0);
    let m = match name {
        "decay" => AffineModel::new(QeFunction::constant(0.0), vec![e(-1.0)], AffineMap::Identity),
        "decay-exp" => AffineModel::new(
            QeFunction::constant(0.0),
            vec![e(-1.0)],
            AffineMap::ExpMinusOne { rates: vec![1.0] },
        ),
        "level-slope" => AffineModel::new(
            QeFunction::new(
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 0.3]),
            )
            .expect("static triple"),
            vec![QeFunction::constant(1.0)],
            AffineMap::Identity,
        ),
        "ns2" => AffineModel::new(
            QeFunction::constant(0.5),
            vec![e(-1.0), x_times_exp(1.0, 1.0)],
            AffineMap::Identity,
        ),
        "ns2-cubic" => AffineModel::new(
            QeFunction::constant(0.5),
            vec![e(-1.0), x_times_exp(1.0, 1.0)],
            AffineMap::ComponentwiseCubic { coeffs: vec![0.1, 0.1] },
        ),
        "ns3" => AffineModel::new(
            QeFunction::constant(0.0),
            vec![QeFunction::constant(1.0), e(-1.0), x_times_exp(1.0, 1.0)],
            AffineMap::Identity,
        ),
        _ => return None,
    };
    Some(m.expect("built-in models are well formed"))
}

pub fn builtin_affine_models() -> Vec<(&'static str, AffineModel)> {
    BUILTIN_AFFINE
        .iter()
        .map(|&n| (n, builtin_affine(n).expect("listed name")))
        .collect()
}

fn check_point(m: &dyn CurveFamily, y: &[f64]) -> Result<()> {
    if y.len() != m.dim() {
        return Err(Error::Dimension(format!(
            "factor has length {}, family dimension is {}",
            y.len(),
            m.dim()
        )));
    }
    Ok(())
}

/// `g(x, y)` at every grid node.
pub fn eval_curve(m: &dyn CurveFamily, y: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    check_point(m, y)?;
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument("grid must be sorted and >= 0".into()));
    }
    grid.iter()
        .map(|&x| {
            let v = m.value(x, y);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteCurve { x })
            }
        })
        .collect()
}

/// Largest absolute gap between analytic derivatives and finite differences
/// over the grid. `None` for finite-difference families, where the
/// difference quotient is the definition.
pub fn check_c12(m: &dyn CurveFamily, y: &[f64], grid: &XGrid, steps: FdSteps) -> Result<Option<f64>> {
    check_point(m, y)?;
    if m.derivative_mode() == DerivativeMode::FiniteDifference {
        return Ok(None);
    }
    let mut worst = 0.0f64;
    for &x in grid.nodes() {
        let dx = fd_dx(|s| m.value(s, y), x, steps.first);
        worst = worst.max((m.dx(x, y) - dx).abs());
        let grad = fd_grad(|p| m.value(x, p), y, steps.first);
        worst = worst.max((m.grad_y(x, y) - grad).amax());
        let hess = fd_hess(|p| m.value(x, p), y, steps.second);
        worst = worst.max((m.hess_y(x, y) - hess).amax());
    }
    Ok(Some(worst))
}

/// `<h, h> = h(0)^2 + int_0^{x_max} h'(x)^2 (1+x)^{3/2} dx`, truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbertNorm {
    /// Squared norm with the integral truncated at `x_max`.
    pub squared_norm: f64,
    /// Integral over the last Simpson panel.
    pub last_panel: f64,
    /// Power-law extrapolation of the integral beyond `x_max` fitted on the
    /// last panel; infinite when the fitted decay is not integrable.
    pub tail_estimate: f64,
    /// Integrand not decreasing near `x_max`, or decaying too slowly.
    pub diverging: bool,
    pub x_max: f64,
    pub n_nodes: usize,
}

impl HilbertNorm {
    pub fn extrapolated(&self) -> f64 {
        self.squared_norm + self.tail_estimate
    }
}

pub const HILBERT_X_MAX: f64 = 200.0;
pub const HILBERT_NODES: usize = 20001;

/// Composite Simpson with `n_nodes` (rounded up to odd) nodes on `[0, x_max]`.
pub fn hilbert_norm(h0: f64, dh: impl Fn(f64) -> f64, x_max: f64, n_nodes: usize) -> Result<HilbertNorm> {
    if !(x_max >= 10.0) || n_nodes < 100 {
        return Err(Error::InvalidArgument(format!(
            "hilbert_norm needs x_max >= 10 and n_nodes >= 100, got {x_max}, {n_nodes}"
        )));
    }
    let n = if n_nodes.is_multiple_of(2) { n_nodes + 1 } else { n_nodes };
    let step = x_max / (n - 1) as f64;
    let w = |x: f64| {
        let d = dh(x);
        d * d * (1.0 + x).powf(1.5)
    };
    let vals: Vec<f64> = (0..n)
        .map(|k| w(if k == n - 1 { x_max } else { step * k as f64 }))
        .collect();
    if let Some(k) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCurve { x: step * k as f64 });
    }
    let mut integral = 0.0;
    let mut last_panel = 0.0;
    for p in (0..n - 1).step_by(2) {
        last_panel = step / 3.0 * (vals[p] + 4.0 * vals[p + 1] + vals[p + 2]);
        integral += last_panel;
    }

    let (f1, f2) = (vals[n - 3], vals[n - 1]);
    let mut diverging = f2 > f1;
    let tail_estimate = if f2 == 0.0 {
        0.0
    } else if f1 > f2 {
        let p = (f1 / f2).ln() / ((1.0 + x_max) / (1.0 + x_max - 2.0 * step)).ln();
        if p > 1.0 {
            f2 * (1.0 + x_max) / (p - 1.0)
        } else {
            diverging = true;
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(HilbertNorm {
        squared_norm: h0 * h0 + integral,
        last_panel,
        tail_estimate,
        diverging,
        x_max,
        n_nodes: n,
    })
}

/// [`hilbert_norm`] of the curve `g(., y)`.
pub fn curve_hilbert_norm(m: &dyn CurveFamily, y: &[f64], x_max: f64, n_nodes: usize) -> Result<HilbertNorm> {
    check_point(m, y)?;
    hilbert_norm(m.value(0.0, y), |x| m.dx(x, y), x_max, n_nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> AffineModel {
        builtin_affine("decay").unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_curve(&decay(), &[2.0], &[0.0]).unwrap(), vec![2.0]);
        let g = GaussianExampleModel;
        for v in eval_curve(&g, &[1.0], &[0.0, 0.7, 3.0, 50.0]).unwrap() {
            assert_eq!(v, 0.5);
        }
        let v = eval_curve(&g, &[0.0], &[0.0]).unwrap()[0];
        assert!((v - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn eval_reports_offending_node() {
        let blowup = AffineModel::new(
            QeFunction::constant(0.0),
            vec![QeFunction::scalar_exp(1.0, 1.0)],
            AffineMap::Identity,
        )
        .unwrap();
        match eval_curve(&blowup, &[1.0], &[0.0, 1.0, 800.0]) {
            Err(Error::NonFiniteCurve { x }) => assert_eq!(x, 800.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(eval_curve(&decay(), &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn gaussian_identity_and_bounds() {
        let g = GaussianExampleModel;
        for &x in &[0.0, 0.3, 2.0, 10.0] {
            for &y in &[-3.0, -0.5, 0.0, 1.0, 4.0] {
                let v = g.value(x, &[y]);
                assert!(v > 0.0 && v < 1.0);
                assert!((g.dx(x, &[y]) - 0.5 * g.hess_y(x, &[y])[(0, 0)]).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn c12_examples() {
        let grid = XGrid::default();
        let e = check_c12(&decay(), &[1.3], &grid, FdSteps::default()).unwrap().unwrap();
        assert!(e <= 1e-6, "{e}");
        let e = check_c12(&GaussianExampleModel, &[0.0], &grid, FdSteps::default()).unwrap().unwrap();
        assert!(e <= 1e-6, "{e}");
        let k = ConstantFamily { dim: 2, level: 5.0 };
        assert_eq!(check_c12(&k, &[0.0, 1.0], &grid, FdSteps::default()).unwrap(), Some(0.0));
        let f = FnFamily::new(1, |x: f64, y: &[f64]| y[0] * (-x).exp());
        assert_eq!(check_c12(&f, &[1.0], &grid, FdSteps::default()).unwrap(), None);
    }

    #[test]
    fn fn_family_derivatives() {
        let f = FnFamily::new(2, |x: f64, y: &[f64]| y[0] * y[1] * (-x).exp() + y[1] * y[1]);
        let (x, y) = (0.5f64, [1.5, -2.0]);
        assert!((f.dx(x, &y) + 1.5 * -2.0 * (-x).exp()).abs() < 1e-8);
        let g = f.grad_y(x, &y);
        assert!((g[0] - -2.0 * (-x).exp()).abs() < 1e-8);
        let h = f.hess_y(x, &y);
        assert!((h[(0, 1)] - (-x).exp()).abs() < 1e-6);
        assert!((h[(1, 1)] - 2.0).abs() < 1e-6);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
        // at x = 0 the one-sided rule is used
        assert!((f.dx(0.0, &y) + 1.5 * -2.0).abs() < 1e-8);
    }

    #[test]
    fn identity_map_has_zero_hessian() {
        let m = builtin_affine("ns3").unwrap();
        assert_eq!(m.hess_y(1.0, &[0.3, -0.2, 5.0]), DMatrix::zeros(3, 3));
    }

    #[test]
    fn hilbert_examples() {
        let one = hilbert_norm(1.0, |_| 0.0, 200.0, 1001).unwrap();
        assert_eq!(one.squared_norm, 1.0);
        assert!(!one.diverging);
        let g = curve_hilbert_norm(&GaussianExampleModel, &[1.0], 200.0, 1001).unwrap();
        assert_eq!(g.squared_norm, 0.25);
        assert!(hilbert_norm(1.0, |_| 0.0, 5.0, 1001).is_err());
        assert!(hilbert_norm(1.0, |_| 0.0, 50.0, 20).is_err());
    }

    #[test]
    fn hilbert_flags_growth() {
        let r = hilbert_norm(0.0, |x| x, 20.0, 201).unwrap();
        assert!(r.diverging);
        assert!(r.tail_estimate.is_infinite());
    }

    #[test]
    fn model_json() {
        let m = Model::Affine(builtin_affine("decay-exp").unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains(r#""kind":"affine""#), "{s}");
        assert!(s.contains(r#""amap":{"kind":"exp-minus-one","rates":[1.0]}"#), "{s}");
        let back: Model = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let g: Model = serde_json::from_str(r#"{"kind":"gaussian-example"}"#).unwrap();
        assert_eq!(g, Model::GaussianExample);
        let bad = r#"{"kind":"affine","c":{"n":1,"A":[[0.0]],"b":[1.0],"c":[0.0]},"u":[],"amap":{"kind":"identity"}}"#;
        assert!(serde_json::from_str::<Model>(bad).is_err());
    }
}

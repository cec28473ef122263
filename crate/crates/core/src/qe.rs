//! Quasi-exponential functions in matrix-exponential form `f(x) = c . (exp(A x) b)`.
//!
//! The matrix exponential uses scaling and squaring around the degree-13
//! diagonal Padé approximant. For `||M x||_1 <= 5.37` no squaring is needed;
//! above that the argument is halved `s = ceil(log2(||M x||_1 / 5.37))` times
//! and the approximant squared back up.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstsq;

/// Scaling threshold for the [13/13] Padé approximant.
const PADE13_THETA: f64 = 5.371920351148152;

/// Coefficients of the [13/13] Padé approximant to `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(M x)`.
///
/// Errors instead of returning infinities when the result cannot be
/// represented.
pub fn mat_exp(m: &DMatrix<f64>, x: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "mat_exp needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !x.is_finite() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mat_exp argument".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let a = m * x;
    let norm = norm1(&a);
    if !norm.is_finite() {
        return Err(Error::ExpOverflow { norm });
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }

    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::InvalidArgument("singular Padé denominator".into()))?;

    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::ExpOverflow { norm });
    }
    Ok(r)
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// A quasi-exponential function `x -> c . (exp(A x) b)`.
///
/// Serialises as `{"n": .., "A": [[..]], "b": [..], "c": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QeJson", into = "QeJson")]
pub struct QeFunction {
    generator: DMatrix<f64>,
    initial: DVector<f64>,
    readout: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QeJson {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl TryFrom<QeJson> for QeFunction {
    type Error = Error;

    fn try_from(j: QeJson) -> Result<Self> {
        if j.a.len() != j.n || j.a.iter().any(|row| row.len() != j.n) {
            return Err(Error::Dimension(format!("A must be {0}x{0}", j.n)));
        }
        let a = DMatrix::from_fn(j.n, j.n, |r, c| j.a[r][c]);
        QeFunction::new(a, DVector::from_vec(j.b), DVector::from_vec(j.c))
    }
}

impl From<QeFunction> for QeJson {
    fn from(f: QeFunction) -> Self {
        let n = f.dim();
        QeJson {
            n,
            a: (0..n)
                .map(|r| (0..n).map(|c| f.generator[(r, c)]).collect())
                .collect(),
            b: f.initial.iter().copied().collect(),
            c: f.readout.iter().copied().collect(),
        }
    }
}

/// One summand `exp(alpha x) [p(x) cos(omega x) + q(x) sin(omega x)]` of a
/// quasi-exponential function in polynomial-trigonometric form.
///
/// Polynomial coefficients are in increasing degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeTerm {
    pub alpha: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
}

impl QeFunction {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() || b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "QE triple needs square A (n >= 1) and b, c of length n; got A {}x{}, |b| = {}, |c| = {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("QE triple entry".into()));
        }
        Ok(Self {
            generator: a,
            initial: b,
            readout: c,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::scalar_exp(0.0, value)
    }

    /// `scale * exp(rate x)`.
    pub fn scalar_exp(rate: f64, scale: f64) -> Self {
        Self::new(
            DMatrix::from_element(1, 1, rate),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, scale),
        )
        .expect("1x1 triple is well formed")
    }

    /// Converts the polynomial-trigonometric form into a matrix triple.
    ///
    /// Each term of polynomial degree `m` contributes a real Jordan block
    /// of states `x^k/k! exp(alpha x)` (one per `k` when `omega == 0`,
    /// a cos/sin pair per `k` otherwise).
    pub fn from_terms(terms: &[QeTerm]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("no QE terms".into()));
        }
        let mut blocks: Vec<(DMatrix<f64>, DVector<f64>, DVector<f64>)> = Vec::new();
        for t in terms {
            let deg = t.p.len().max(t.q.len()).max(1) - 1;
            let coef = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0) * factorial(k);
            if t.omega == 0.0 {
                let m = deg + 1;
                let mut a = DMatrix::zeros(m, m);
                for k in 0..m {
                    a[(k, k)] = t.alpha;
                    if k > 0 {
                        a[(k, k - 1)] = 1.0;
                    }
                }
                let mut b = DVector::zeros(m);
                b[0] = 1.0;
                let c = DVector::from_fn(m, |k, _| coef(&t.p, k));
                blocks.push((a, b, c));
            } else {
                let m = 2 * (deg + 1);
                let mut a = DMatrix::zeros(m, m);
                for k in 0..=deg {
                    let (ci, si) = (2 * k, 2 * k + 1);
                    a[(ci, ci)] = t.alpha;
                    a[(si, si)] = t.alpha;
                    a[(ci, si)] = -t.omega;
                    a[(si, ci)] = t.omega;
                    if k > 0 {
                        a[(ci, ci - 2)] = 1.0;
                        a[(si, si - 2)] = 1.0;
                    }
                }
                let mut b = DVector::zeros(m);
                b[0] = 1.0;
                let c = DVector::from_fn(m, |i, _| {
                    if i % 2 == 0 {
                        coef(&t.p, i / 2)
                    } else {
                        coef(&t.q, i / 2)
                    }
                });
                blocks.push((a, b, c));
            }
        }
        let n: usize = blocks.iter().map(|(a, _, _)| a.nrows()).sum();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = DVector::zeros(n);
        let mut off = 0;
        for (ba, bb, bc) in blocks {
            let m = ba.nrows();
            a.view_mut((off, off), (m, m)).copy_from(&ba);
            b.rows_mut(off, m).copy_from(&bb);
            c.rows_mut(off, m).copy_from(&bc);
            off += m;
        }
        Self::new(a, b, c)
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    pub fn readout(&self) -> &DVector<f64> {
        &self.readout
    }

    /// The state `exp(A x) b`.
    pub fn state(&self, x: f64) -> Result<DVector<f64>> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "QE functions are evaluated on x >= 0, got {x}"
            )));
        }
        Ok(mat_exp(&self.generator, x)? * &self.initial)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.readout.dot(&self.state(x)?))
    }

    /// Same generator and initial state, readout `A^T c`.
    pub fn derivative(&self) -> Self {
        Self {
            generator: self.generator.clone(),
            initial: self.initial.clone(),
            readout: self.generator.transpose() * &self.readout,
        }
    }

    /// Exact integral over `[x0, x1]` via the augmented generator `[[A, b], [0, 0]]`.
    pub fn integral(&self, x0: f64, x1: f64) -> Result<f64> {
        if !(x0 >= 0.0 && x1 >= x0) {
            return Err(Error::InvalidArgument(format!(
                "integral needs 0 <= x0 <= x1, got [{x0}, {x1}]"
            )));
        }
        let n = self.dim();
        let mut aug = DMatrix::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.generator);
        aug.view_mut((0, n), (n, 1)).copy_from(&self.initial);
        // int_{x0}^{x1} e^{Az} b dz = e^{A x0} int_0^{x1-x0} e^{Az} b dz
        let tail = mat_exp(&aug, x1 - x0)?.view((0, n), (n, 1)).into_owned();
        let shifted = mat_exp(&self.generator, x0)? * tail;
        Ok(self.readout.dot(&shifted.column(0)))
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Least-squares generator of a sampled vector ODE `v' = B v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOdeFit {
    pub generator: DMatrix<f64>,
    /// Root-mean-square of `v'(x) - B v(x)` over interior samples and components.
    pub residual: f64,
    pub rank_deficient: bool,
}

/// Relative singular-value cutoff used for the sample matrix.
pub const ODE_FIT_RANK_TOL: f64 = 1e-10;

/// Fits `B` in `v' = B v` from samples on a uniform grid, with `v'` taken by
/// central differences at interior points.
pub fn fit_linear_ode(samples: &[(f64, DVector<f64>)]) -> Result<LinearOdeFit> {
    let d = samples
        .first()
        .map(|(_, v)| v.len())
        .ok_or_else(|| Error::InvalidArgument("no samples".into()))?;
    if d == 0 || samples.iter().any(|(_, v)| v.len() != d) {
        return Err(Error::Dimension("samples must share a positive dimension".into()));
    }
    if samples.len() < (2 * d).max(3) {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples for dimension {d}, got {}",
            (2 * d).max(3),
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|(x, v)| !x.is_finite() || v.iter().any(|e| !e.is_finite()))
    {
        return Err(Error::NonFinite("ODE samples".into()));
    }
    let h = samples[1].0 - samples[0].0;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("sample grid must be increasing".into()));
    }
    let span = samples[samples.len() - 1].0 - samples[0].0;
    for (k, w) in samples.windows(2).enumerate() {
        if ((w[1].0 - w[0].0) - h).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "sample grid is not uniform at index {k}"
            )));
        }
    }

    let m = samples.len() - 2;
    // Rows: v(x_k)^T B^T = v'(x_k)^T.
    let design = DMatrix::from_fn(m, d, |r, c| samples[r + 1].1[c]);
    let target = DMatrix::from_fn(m, d, |r, c| {
        (samples[r + 2].1[c] - samples[r].1[c]) / (2.0 * h)
    });
    let sol = lstsq::solve(&design, &target, ODE_FIT_RANK_TOL)?;
    let generator = sol.solution.transpose();
    let misfit = &design * &sol.solution - &target;
    let residual = (misfit.iter().map(|e| e * e).sum::<f64>() / (m * d) as f64).sqrt();
    Ok(LinearOdeFit {
        generator,
        residual,
        rank_deficient: sol.rank < d,
    })
}

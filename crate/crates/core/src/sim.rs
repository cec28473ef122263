//! Factor simulation, delivery-period futures prices and the statistical
//! checks that tie them back to the drift condition.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::CurveFamily;
use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::noarb::{covariance_weight, solve_drift_weighted};
use crate::rng::PathRng;

pub const DEFAULT_DT: f64 = 1e-3;
pub const FUTURES_QUAD_NODES: usize = 65;
pub const DRIFT_LATTICE_SPACING: f64 = 0.05;
/// Residual at or below which `scc_loop` accepts the estimated volatility.
pub const SCC_LOOP_TOL: f64 = 1e-6;

/// State-dependent drift `y -> beta(y)`.
pub trait DriftField: Send + Sync {
    fn drift(&self, y: &[f64]) -> Vec<f64>;
}

impl<F> DriftField for F
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn drift(&self, y: &[f64]) -> Vec<f64> {
        self(y)
    }
}

/// The risk-neutral drift of a family, solved on demand at lattice points
/// and interpolated multilinearly in between.
///
/// Lattice values depend only on the lattice point, so the cache contents
/// and every interpolated value are independent of insertion order.
pub struct RnDriftCache {
    model: Arc<dyn CurveFamily>,
    weight: DMatrix<f64>,
    grid: XGrid,
    spacing: f64,
    cells: RwLock<HashMap<Vec<i64>, Vec<f64>>>,
}

impl RnDriftCache {
    /// Drift for diffusion matrix `sigma` (Itô weight `sigma sigma^T`).
    pub fn new(model: Arc<dyn CurveFamily>, sigma: &DMatrix<f64>, grid: XGrid) -> Result<Self> {
        Self::with_spacing(model, sigma, grid, DRIFT_LATTICE_SPACING)
    }

    pub fn with_spacing(
        model: Arc<dyn CurveFamily>,
        sigma: &DMatrix<f64>,
        grid: XGrid,
        spacing: f64,
    ) -> Result<Self> {
        let d = model.dim();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Dimension(format!("sigma must be {d}x{d}")));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("lattice spacing must be positive".into()));
        }
        grid.require_for_dim(d)?;
        Ok(Self {
            model,
            weight: covariance_weight(sigma),
            grid,
            spacing,
            cells: RwLock::new(HashMap::new()),
        })
    }

    fn lattice_value(&self, key: &[i64]) -> Vec<f64> {
        if let Some(v) = self.cells.read().expect("cache lock").get(key) {
            return v.clone();
        }
        let y: Vec<f64> = key.iter().map(|&i| i as f64 * self.spacing).collect();
        let v = match solve_drift_weighted(self.model.as_ref(), &y, &self.weight, &self.grid) {
            Ok(r) => r.b,
            Err(_) => vec![f64::NAN; y.len()],
        };
        self.cells
            .write()
            .expect("cache lock")
            .entry(key.to_vec())
            .or_insert(v)
            .clone()
    }

    pub fn cached_points(&self) -> usize {
        self.cells.read().expect("cache lock").len()
    }
}

impl DriftField for RnDriftCache {
    fn drift(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len();
        let scaled: Vec<f64> = y.iter().map(|v| v / self.spacing).collect();
        if scaled.iter().any(|v| !v.is_finite()) {
            return vec![f64::NAN; d];
        }
        let base: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = scaled.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut out = vec![0.0; d];
        let mut key = vec![0i64; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                key[k] = base[k] + up as i64;
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.lattice_value(&key)) {
                *o += w * v;
            }
        }
        out
    }
}

/// `dY = beta(Y) dt + sigma dW`, `Y_0 = y0`.
#[derive(Clone)]
pub struct SdeSpec {
    pub drift: Arc<dyn DriftField>,
    pub sigma: DMatrix<f64>,
    pub y0: Vec<f64>,
}

impl SdeSpec {
    pub fn new(drift: Arc<dyn DriftField>, sigma: DMatrix<f64>, y0: Vec<f64>) -> Result<Self> {
        let d = y0.len();
        if d == 0 || sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Dimension(format!(
                "sigma is {}x{} for a {d}-dimensional start",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if sigma.iter().chain(y0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SDE parameters".into()));
        }
        Ok(Self { drift, sigma, y0 })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }
}

/// Simulated factor paths, stored path-major as `[path][time][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    times: Vec<f64>,
    dim: usize,
    n_paths: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub dt: f64,
}

const PATHSET_MAGIC: &[u8; 16] = b"FDR-PATHSET\0v001";

impl PathSet {
    pub fn from_parts(n_paths: usize, n_times: usize, dim: usize, dt: f64, seed: u64, data: Vec<f64>) -> Result<Self> {
        if n_paths == 0 || n_times == 0 || dim == 0 || !(dt > 0.0) {
            return Err(Error::InvalidArgument("empty path set".into()));
        }
        if data.len() != n_paths * n_times * dim {
            return Err(Error::Dimension(format!(
                "{} values for {n_paths} paths x {n_times} times x {dim} factors",
                data.len()
            )));
        }
        Ok(Self {
            times: (0..n_times).map(|k| k as f64 * dt).collect(),
            dim,
            n_paths,
            data,
            seed,
            dt,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.n_times() + step) * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn terminal(&self, path: usize) -> &[f64] {
        self.state(path, self.n_times() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// 16-byte magic, `n_paths`, `n_times`, `d` (u64), `dt`, `T` (f64),
    /// `seed` (u64), then the values; all little endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(PATHSET_MAGIC)?;
        for v in [self.n_paths as u64, self.n_times() as u64, self.dim as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.horizon().to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic)?;
        if &magic != PATHSET_MAGIC {
            return Err(Error::PathFormat("bad magic header".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n_paths = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_times = u64::from_le_bytes(next(&mut r)?) as usize;
        let dim = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let horizon = f64::from_le_bytes(next(&mut r)?);
        let seed = u64::from_le_bytes(next(&mut r)?);
        let count = n_paths
            .checked_mul(n_times)
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::PathFormat("dimensions overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 8 {
            return Err(Error::PathFormat(format!(
                "expected {} data bytes, found {}",
                count * 8,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let ps = Self::from_parts(n_paths, n_times, dim, dt, seed, data)
            .map_err(|e| Error::PathFormat(e.to_string()))?;
        if (ps.horizon() - horizon).abs() > 1e-9 * horizon.abs().max(1.0) {
            return Err(Error::PathFormat("horizon does not match dt and time count".into()));
        }
        Ok(ps)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Columns `path, time, y_1 .. y_d`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["path".to_string(), "time".to_string()];
        header.extend((1..=self.dim).map(|k| format!("y_{k}")));
        out.write_record(&header)?;
        for p in 0..self.n_paths {
            for (k, t) in self.times.iter().enumerate() {
                let mut rec = vec![p.to_string(), t.to_string()];
                rec.extend(self.state(p, k).iter().map(|v| v.to_string()));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Euler-Maruyama: `Y_{k+1} = Y_k + beta(Y_k) dt + sigma sqrt(dt) Z_k`.
///
/// `T` must be a whole number of steps. Paths are generated in parallel,
/// each from its own stream `(seed, path index)`.
pub fn simulate(spec: &SdeSpec, dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Result<PathSet> {
    if !(dt > 0.0) || !(horizon >= dt) || n_paths == 0 {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0, T >= dt, n_paths >= 1; got dt={dt}, T={horizon}, n_paths={n_paths}"
        )));
    }
    let n_steps = (horizon / dt).round() as usize;
    if ((n_steps as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!("T = {horizon} is not a multiple of dt = {dt}")));
    }
    let d = spec.dim();
    let n_times = n_steps + 1;
    let sqrt_dt = dt.sqrt();
    let mut data = vec![0.0; n_paths * n_times * d];

    let outcome: Vec<Result<()>> = data
        .par_chunks_mut(n_times * d)
        .enumerate()
        .map(|(p, chunk)| {
            let mut rng = PathRng::new(seed, p as u64);
            chunk[..d].copy_from_slice(&spec.y0);
            let mut z = DVector::zeros(d);
            for k in 0..n_steps {
                let (head, tail) = chunk.split_at_mut((k + 1) * d);
                let y = &head[k * d..];
                let b = spec.drift.drift(y);
                if b.len() != d || b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteDrift { path: p, step: k });
                }
                for v in z.iter_mut() {
                    *v = rng.standard_normal() * sqrt_dt;
                }
                let shock = &spec.sigma * &z;
                for i in 0..d {
                    tail[i] = y[i] + b[i] * dt + shock[i];
                }
            }
            Ok(())
        })
        .collect();
    outcome.into_iter().collect::<Result<Vec<()>>>()?;
    PathSet::from_parts(n_paths, n_times, d, dt, seed, data)
}

/// Delivery period `[T1, T2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FuturesJson", into = "FuturesJson")]
pub struct FuturesSpec {
    t1: f64,
    t2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuturesJson {
    #[serde(rename = "T1")]
    t1: f64,
    #[serde(rename = "T2")]
    t2: f64,
}

impl TryFrom<FuturesJson> for FuturesSpec {
    type Error = Error;
    fn try_from(j: FuturesJson) -> Result<Self> {
        FuturesSpec::new(j.t1, j.t2)
    }
}

impl From<FuturesSpec> for FuturesJson {
    fn from(f: FuturesSpec) -> Self {
        FuturesJson { t1: f.t1, t2: f.t2 }
    }
}

impl FuturesSpec {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0 && t2 > t1 && t2.is_finite()) {
            return Err(Error::InvalidArgument(format!("need 0 < T1 < T2, got [{t1}, {t2}]")));
        }
        Ok(Self { t1, t2 })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }
}

/// `1/(T2-T1) int_{T1}^{T2} g(u - t, y) du`, composite Simpson with
/// `n_quad` nodes (rounded up to odd).
pub fn futures_price_with(m: &dyn CurveFamily, y: &[f64], t: f64, fs: &FuturesSpec, n_quad: usize) -> Result<f64> {
    if t > fs.t1 {
        return Err(Error::ContractInDelivery { t, t1: fs.t1 });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("pricing time must be >= 0, got {t}")));
    }
    if y.len() != m.dim() {
        return Err(Error::Dimension(format!("factor has length {}, family dimension is {}", y.len(), m.dim())));
    }
    let n = (n_quad.max(3)) | 1;
    let h = (fs.t2 - fs.t1) / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let u = if k == n - 1 { fs.t2 } else { fs.t1 + h * k as f64 };
        let w = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * m.value(u - t, y);
    }
    let price = acc * h / 3.0 / (fs.t2 - fs.t1);
    if !price.is_finite() {
        return Err(Error::NonFinite(format!("futures price at y = {y:?}")));
    }
    Ok(price)
}

pub fn futures_price(m: &dyn CurveFamily, y: &[f64], t: f64, fs: &FuturesSpec) -> Result<f64> {
    futures_price_with(m, y, t, fs, FUTURES_QUAD_NODES)
}

/// Futures price at every time step of one path.
pub fn futures_along_path(m: &dyn CurveFamily, ps: &PathSet, path: usize, fs: &FuturesSpec) -> Result<Vec<f64>> {
    ps.times()
        .iter()
        .enumerate()
        .map(|(k, &t)| futures_price(m, ps.state(path, k), t, fs))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleStats {
    /// Mean of `F_T(T1,T2) - F_0(T1,T2)` over paths.
    pub drift_estimate: f64,
    pub std_error: f64,
    /// `drift_estimate / std_error`; zero when both vanish.
    pub z_score: f64,
}

pub fn martingale_test(m: &dyn CurveFamily, ps: &PathSet, fs: &FuturesSpec) -> Result<MartingaleStats> {
    let horizon = ps.horizon();
    if horizon > fs.t1 {
        return Err(Error::ContractInDelivery { t: horizon, t1: fs.t1 });
    }
    let diffs: Vec<Result<f64>> = (0..ps.n_paths())
        .into_par_iter()
        .map(|p| Ok(futures_price(m, ps.terminal(p), horizon, fs)? - futures_price(m, ps.state(p, 0), 0.0, fs)?))
        .collect();
    let diffs = diffs.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = if diffs.len() > 1 {
        diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_error = (var / n).sqrt();
    let z_score = if std_error > 0.0 {
        mean / std_error
    } else if mean == 0.0 {
        0.0
    } else {
        mean.signum() * f64::INFINITY
    };
    Ok(MartingaleStats {
        drift_estimate: mean,
        std_error,
        z_score,
    })
}

/// Realised covariation `sum_k dY_k dY_k^T / T`, averaged over paths.
pub fn estimate_vol(ps: &PathSet) -> Result<DMatrix<f64>> {
    let steps = ps.n_times() - 1;
    if ps.n_paths() * steps < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 increments, got {}",
            ps.n_paths() * steps
        )));
    }
    let d = ps.dim();
    let mut acc = DMatrix::zeros(d, d);
    for p in 0..ps.n_paths() {
        for k in 0..steps {
            let (a, b) = (ps.state(p, k), ps.state(p, k + 1));
            let inc = DVector::from_fn(d, |i, _| b[i] - a[i]);
            acc += &inc * inc.transpose();
        }
    }
    Ok(acc / (ps.horizon() * ps.n_paths() as f64))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SccLoopOptions {
    /// Probe with this diffusion matrix instead of the estimated one.
    pub sigma_override: Option<DMatrix<f64>>,
    /// Upper bound on the number of visited states checked.
    pub max_states: usize,
    pub tol: f64,
}

impl SccLoopOptions {
    pub fn new() -> Self {
        Self {
            sigma_override: None,
            max_states: 200,
            tol: SCC_LOOP_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccLoopReport {
    /// Covariance used in the drift condition.
    pub covariance: Vec<Vec<f64>>,
    /// Lower-triangular factor of `covariance`.
    pub factor: Vec<Vec<f64>>,
    /// The estimate was not positive definite and was projected.
    pub psd_projected: bool,
    pub states_checked: usize,
    pub max_residual: f64,
    /// Largest `|b|` among the solved drifts.
    pub drift_bound: f64,
    /// Bounding box of the checked states; nothing is certified outside it.
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub supported: bool,
}

impl SccLoopReport {
    pub fn verdict_line(&self) -> String {
        if self.supported {
            format!("model supports estimated volatility (max residual={:.6e})", self.max_residual)
        } else {
            format!("SCC-VIOLATION (residual={:.6e})", self.max_residual)
        }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Nearest positive semidefinite matrix (Frobenius) and a factor `L L^T` of it.
fn psd_factor(cov: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, bool) {
    let sym = (cov + cov.transpose()) * 0.5;
    if let Some(ch) = sym.clone().cholesky() {
        return (sym, ch.l(), false);
    }
    let eig = sym.symmetric_eigen();
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let psd = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&clamped.map(f64::sqrt));
    // Lower-triangular factor from the QR of root^T: root root^T = R^T R.
    let r = root.transpose().qr().r();
    let mut l = r.transpose();
    for j in 0..l.ncols() {
        if l[(j, j)] < 0.0 {
            l.column_mut(j).neg_mut();
        }
    }
    (psd, l, true)
}

/// Estimate the volatility from observed paths, then ask the family for a
/// risk-neutral drift at visited states.
pub fn scc_loop(
    m: &dyn CurveFamily,
    observed: &PathSet,
    grid: &XGrid,
    opts: &SccLoopOptions,
) -> Result<SccLoopReport> {
    let d = m.dim();
    if observed.dim() != d {
        return Err(Error::Dimension(format!(
            "paths are {}-dimensional, family has {d} factors",
            observed.dim()
        )));
    }
    let cov = match &opts.sigma_override {
        Some(s) => {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::Dimension(format!("sigma override must be {d}x{d}")));
            }
            covariance_weight(s)
        }
        None => estimate_vol(observed)?,
    };
    let (cov, factor, psd_projected) = psd_factor(&cov);
    let weight = &factor * factor.transpose();

    // Cycle through paths while sweeping time, so no stride can alias onto a
    // single time slice or a single path.
    let (np, nt) = (observed.n_paths(), observed.n_times());
    let count = opts.max_states.max(1).min(np * nt);
    let states: Vec<&[f64]> = (0..count)
        .map(|j| {
            let k = if count == 1 { 0 } else { j * (nt - 1) / (count - 1) };
            observed.state(j % np, k)
        })
        .collect();
    let solved: Vec<Result<(f64, f64)>> = states
        .par_iter()
        .map(|y| {
            let r = solve_drift_weighted(m, y, &weight, grid)?;
            Ok((r.residual_max, r.b.iter().map(|v| v.abs()).fold(0.0, f64::max)))
        })
        .collect();
    let mut max_residual = 0.0f64;
    let mut drift_bound = 0.0f64;
    for r in solved {
        let (res, b) = r?;
        max_residual = max_residual.max(res);
        drift_bound = drift_bound.max(b);
    }
    let mut box_lo = vec![f64::INFINITY; d];
    let mut box_hi = vec![f64::NEG_INFINITY; d];
    for y in &states {
        for k in 0..d {
            box_lo[k] = box_lo[k].min(y[k]);
            box_hi[k] = box_hi[k].max(y[k]);
        }
    }
    Ok(SccLoopReport {
        covariance: to_rows(&cov),
        factor: to_rows(&factor),
        psd_projected,
        states_checked: states.len(),
        max_residual,
        drift_bound,
        box_lo,
        box_hi,
        supported: max_residual <= opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{builtin_affine, ConstantFamily, GaussianExampleModel};

    fn zero_drift(d: usize) -> Arc<dyn DriftField> {
        Arc::new(move |_: &[f64]| vec![0.0; d])
    }

    #[test]
    fn zero_vol_zero_drift_is_constant() {
        let spec = SdeSpec::new(zero_drift(2), DMatrix::zeros(2, 2), vec![0.3, -1.0]).unwrap();
        let ps = simulate(&spec, 0.01, 0.5, 3, 1).unwrap();
        assert_eq!(ps.n_times(), 51);
        for p in 0..3 {
            for k in 0..ps.n_times() {
                assert_eq!(ps.state(p, k), &[0.3, -1.0]);
            }
        }
    }

    #[test]
    fn simulate_validates() {
        let spec = SdeSpec::new(zero_drift(1), DMatrix::from_element(1, 1, 1.0), vec![0.0]).unwrap();
        assert!(simulate(&spec, 0.0, 1.0, 1, 0).is_err());
        assert!(simulate(&spec, 0.1, 0.05, 1, 0).is_err());
        assert!(simulate(&spec, 0.1, 1.0, 0, 0).is_err());
        assert!(simulate(&spec, 0.3, 1.0, 1, 0).is_err());
        assert!(SdeSpec::new(zero_drift(1), DMatrix::zeros(2, 2), vec![0.0]).is_err());
    }

    #[test]
    fn bad_drift_names_path() {
        let spec = SdeSpec::new(
            Arc::new(|y: &[f64]| vec![if y[0] > 0.05 { f64::NAN } else { 1.0 }]),
            DMatrix::zeros(1, 1),
            vec![0.0],
        )
        .unwrap();
        match simulate(&spec, 0.01, 1.0, 2, 0) {
            Err(Error::NonFiniteDrift { path: 0, step }) => assert_eq!(step, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn price_examples() {
        let fs = FuturesSpec::new(1.0, 2.0).unwrap();
        let p = futures_price(&builtin_affine("decay").unwrap(), &[1.0], 0.0, &fs).unwrap();
        assert!((p - ((-1f64).exp() - (-2f64).exp())).abs() < 1e-8);
        let k = ConstantFamily { dim: 1, level: 4.2 };
        assert!((futures_price(&k, &[0.0], 0.5, &fs).unwrap() - 4.2).abs() < 1e-14);
        let g = futures_price(&GaussianExampleModel, &[1.0], 0.0, &FuturesSpec::new(0.3, 7.0).unwrap()).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        assert!(matches!(
            futures_price(&k, &[0.0], 1.5, &fs),
            Err(Error::ContractInDelivery { .. })
        ));
        assert!(FuturesSpec::new(2.0, 1.0).is_err());
        assert!(FuturesSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn futures_json() {
        let f: FuturesSpec = serde_json::from_str(r#"{"T1":1.0,"T2":2.0}"#).unwrap();
        assert_eq!(f, FuturesSpec::new(1.0, 2.0).unwrap());
        assert!(serde_json::from_str::<FuturesSpec>(r#"{"T1":2.0,"T2":1.0}"#).is_err());
    }

    #[test]
    fn drift_cache_interpolates_linear_drift() {
        let model: Arc<dyn CurveFamily> = Arc::new(builtin_affine("decay").unwrap());
        let cache = RnDriftCache::new(model, &DMatrix::from_element(1, 1, 1.0), XGrid::default()).unwrap();
        for &y in &[0.0, 0.013, -0.77, 2.4999] {
            assert!((cache.drift(&[y])[0] + y).abs() < 1e-12, "y = {y}");
        }
        assert!(cache.cached_points() >= 4);
    }

    #[test]
    fn binary_header_layout() {
        let ps = PathSet::from_parts(2, 3, 1, 0.5, 9, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let mut buf = Vec::new();
        ps.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..16], PATHSET_MAGIC);
        assert_eq!(buf.len(), 16 + 6 * 8 + 6 * 8);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(buf[48..56].try_into().unwrap()), 1.0);
        assert_eq!(PathSet::read_binary(&buf[..]).unwrap(), ps);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(PathSet::read_binary(&bad[..]).is_err());
        assert!(PathSet::read_binary(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let ps = PathSet::from_parts(1, 2, 2, 0.5, 0, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path,time,y_1,y_2\n0,0,1,2\n0,0.5,3,4.5\n");
    }

    #[test]
    fn vol_needs_increments() {
        let ps = PathSet::from_parts(1, 50, 1, 0.01, 0, vec![0.0; 50]).unwrap();
        assert!(estimate_vol(&ps).is_err());
    }

    #[test]
    fn psd_projection() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (psd, l, projected) = psd_factor(&bad);
        assert!(projected);
        assert!((&l * l.transpose() - &psd).amax() < 1e-12);
        assert!(psd.clone().symmetric_eigen().eigenvalues.iter().all(|v| *v > -1e-12));
        assert_eq!(l[(0, 1)], 0.0);
        let (_, l, projected) = psd_factor(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]));
        assert!(!projected);
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
    }
}

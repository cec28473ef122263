use std::sync::Arc;

use fdr_core::noarb::{detect_affine, probe_eta_field, reconstruct_from_eta, rn_residual, scc_probe, solve_drift, AFFINE_RANK_TOL, SCC_TOL};
use fdr_core::sim::{
    estimate_vol, futures_price, martingale_test, scc_loop, simulate, DriftField, RnDriftCache, SccLoopOptions,
    SCC_LOOP_TOL,
};
use fdr_core::{CurveFamily, Model, PathSet, SccVerdict, SdeSpec, XGrid};
use nalgebra::DMatrix;
use serde_json::json;

use crate::scenario::{DriftSpec, Scenario};
use crate::{CliError, Command, Outcome, Output, Status};

pub const DRIFT_TOL: f64 = 1e-8;
pub const RECONSTRUCT_TOL: f64 = 1e-6;
/// Largest `|z|` accepted by `martingale-test`.
pub const MARTINGALE_Z_LIMIT: f64 = 3.0;

const RESIDUAL_HEADER: [&str; 5] = ["y_index", "sigma_label", "residual_rms", "residual_max", "rank_ok"];
const MARTINGALE_HEADER: [&str; 5] = ["T1", "T2", "drift_estimate", "std_error", "z_score"];
const SINGULAR_HEADER: [&str; 2] = ["index", "value"];

pub(crate) fn dispatch(command: Command, s: &Scenario, out: &mut Output) -> Result<Outcome, CliError> {
    let model = s.model.resolve()?;
    match command {
        Command::CheckDrift => check_drift(s, &model, out),
        Command::SccProbe => scc(s, &model, out),
        Command::DetectAffine => affine(s, &model, out),
        Command::Simulate => simulate_cmd(s, &model, out),
        Command::Price => price(s, &model, out),
        Command::MartingaleTest => martingale(s, &model, out),
        Command::EstimateVol => vol(s, &model, out),
        Command::Reconstruct => reconstruct(s, &model, out),
        Command::SccLoop => loop_cmd(s, &model, out),
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Ok
    } else {
        Status::Violation
    }
}

fn check_drift(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let (grid, sigma, ys) = (s.grid()?, s.sigma(d)?, s.y_samples(d)?);
    let tol = s.tolerance.unwrap_or(DRIFT_TOL);
    let mut rows = Vec::new();
    let mut results = Vec::new();
    let mut worst = 0.0f64;
    for (i, y) in ys.iter().enumerate() {
        let r = solve_drift(m, y, &sigma, &grid)?;
        let check = rn_residual(m, y, &sigma, &r.b, &grid)?;
        worst = worst.max(check.max);
        rows.push(vec![i.to_string(), "sigma".into(), num(check.rms), num(check.max), r.rank_ok.to_string()]);
        results.push(json!({ "y_index": i, "y": y, "result": r }));
    }
    out.csv("residuals.csv", &RESIDUAL_HEADER, &rows)?;
    let ok = worst <= tol;
    let verdict = format!(
        "check-drift: max residual={worst:.6e} over {} states (tolerance {tol:e}): {}",
        ys.len(),
        if ok { "OK" } else { "VIOLATION" }
    );
    Ok(Outcome {
        status: status(ok),
        verdicts: vec![verdict],
        data: json!({ "max_residual": worst, "tolerance": tol, "results": results }),
    })
}

fn scc(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let (grid, ys) = (s.grid()?, s.y_samples(d)?);
    let tol = s.tolerance.unwrap_or(SCC_TOL);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut worst = 0.0f64;
    let mut inconclusive = false;
    for (i, y) in ys.iter().enumerate() {
        let r = scc_probe(m, y, &grid)?;
        for (label, sol) in &r.per_sigma {
            rows.push(vec![i.to_string(), label.clone(), num(sol.residual_rms), num(sol.residual_max), sol.rank_ok.to_string()]);
        }
        worst = worst.max(r.max_residual());
        inconclusive |= r.inconclusive;
        reports.push(r);
    }
    out.csv("scc_residuals.csv", &RESIDUAL_HEADER, &rows)?;
    out.json("scc_reports.json", &reports)?;
    let verdict = if inconclusive {
        SccVerdict::Inconclusive { residual: worst }
    } else if worst <= tol {
        SccVerdict::AffineConsistent
    } else {
        SccVerdict::Violation { residual: worst }
    };
    Ok(Outcome {
        status: status(verdict == SccVerdict::AffineConsistent),
        verdicts: vec![verdict.to_string()],
        data: json!({ "max_residual": worst, "tolerance": tol, "inconclusive": inconclusive, "verdict": verdict }),
    })
}

fn affine(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let (grid, ys, base) = (s.grid()?, s.y_samples(d)?, s.base_y(d)?);
    let tol = s.tolerance.unwrap_or(AFFINE_RANK_TOL);
    let r = detect_affine(m, ys, &base, &grid, tol)?;
    let rows: Vec<Vec<String>> = r
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, v)| vec![i.to_string(), num(*v)])
        .collect();
    out.csv("singular_values.csv", &SINGULAR_HEADER, &rows)?;
    let mut verdicts = vec![format!("rank={}", r.rank)];
    if r.degenerate {
        verdicts.push("all sampled curves coincide".into());
    }
    Ok(Outcome {
        status: status(r.rank <= d),
        verdicts,
        data: json!({ "rank": r.rank, "dim": d, "rel_tol": tol, "degenerate": r.degenerate, "singular_values": r.singular_values }),
    })
}

fn drift_field(s: &Scenario, m: &Model, sigma: &DMatrix<f64>, grid: XGrid) -> Result<Arc<dyn DriftField>, CliError> {
    let d = m.dim();
    Ok(match &s.sim()?.drift {
        DriftSpec::RiskNeutral => {
            let model: Arc<dyn CurveFamily> = Arc::new(m.clone());
            Arc::new(RnDriftCache::new(model, sigma, grid)?)
        }
        DriftSpec::Zero => Arc::new(move |_: &[f64]| vec![0.0; d]),
        DriftSpec::Constant(v) => {
            if v.len() != d {
                return Err(CliError::Config(format!("constant drift has length {}, expected {d}", v.len())));
            }
            let v = v.clone();
            Arc::new(move |_: &[f64]| v.clone())
        }
    })
}

fn simulate_paths(s: &Scenario, m: &Model) -> Result<PathSet, CliError> {
    let d = m.dim();
    let sim = s.sim()?;
    let sigma = s.sigma(d)?;
    let drift = drift_field(s, m, &sigma, s.grid()?)?;
    let y0 = if sim.y0.is_empty() { vec![0.0; d] } else { sim.y0.clone() };
    let spec = SdeSpec::new(drift, sigma, y0)?;
    Ok(simulate(&spec, sim.dt, sim.horizon, sim.n_paths, sim.seed)?)
}

fn observed_paths(s: &Scenario, m: &Model) -> Result<PathSet, CliError> {
    match &s.observed_paths {
        Some(p) => Ok(PathSet::load(p)?),
        None => simulate_paths(s, m),
    }
}

fn simulate_cmd(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let ps = simulate_paths(s, m)?;
    ps.save(&out.path("paths.bin"))?;
    let csv_path = out.path("paths.csv");
    let f = std::fs::File::create(&csv_path).map_err(crate::io_err(&csv_path))?;
    ps.write_csv(std::io::BufWriter::new(f))?;
    let d = ps.dim();
    let terminal_mean: Vec<f64> = (0..d)
        .map(|k| (0..ps.n_paths()).map(|p| ps.terminal(p)[k]).sum::<f64>() / ps.n_paths() as f64)
        .collect();
    let verdict = format!(
        "simulated {} paths x {} steps (dt={}, T={}, seed={})",
        ps.n_paths(),
        ps.n_times() - 1,
        ps.dt,
        ps.horizon(),
        ps.seed
    );
    Ok(Outcome {
        status: Status::Ok,
        verdicts: vec![verdict],
        data: json!({
            "n_paths": ps.n_paths(), "n_times": ps.n_times(), "dim": d, "dt": ps.dt,
            "T": ps.horizon(), "seed": ps.seed, "terminal_mean": terminal_mean,
        }),
    })
}

fn price(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let (ys, contracts) = (s.y_samples(d)?, s.futures()?);
    let mut rows = Vec::new();
    let mut prices = Vec::new();
    for (i, y) in ys.iter().enumerate() {
        for fs in contracts {
            let p = futures_price(m, y, 0.0, fs)?;
            rows.push(vec![i.to_string(), num(fs.t1()), num(fs.t2()), num(p)]);
            prices.push(json!({ "y_index": i, "T1": fs.t1(), "T2": fs.t2(), "price": p }));
        }
    }
    out.csv("prices.csv", &["y_index", "T1", "T2", "price"], &rows)?;
    let verdicts = if rows.len() == 1 {
        vec![format!("{:.6}", futures_price(m, &ys[0], 0.0, &contracts[0])?)]
    } else {
        rows.iter()
            .map(|r| format!("y_index={} T1={} T2={}: {:.6}", r[0], r[1], r[2], r[3].parse::<f64>().expect("formatted")))
            .collect()
    };
    Ok(Outcome {
        status: Status::Ok,
        verdicts,
        data: json!({ "prices": prices }),
    })
}

fn martingale(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let contracts = s.futures()?;
    let ps = simulate_paths(s, m)?;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut stats = Vec::new();
    let mut ok = true;
    for fs in contracts {
        let st = martingale_test(m, &ps, fs)?;
        let pass = st.z_score.abs() <= MARTINGALE_Z_LIMIT;
        ok &= pass;
        rows.push(vec![num(fs.t1()), num(fs.t2()), num(st.drift_estimate), num(st.std_error), num(st.z_score)]);
        verdicts.push(format!(
            "T1={} T2={}: drift={:.6e} se={:.6e} z={:.4} ({})",
            fs.t1(),
            fs.t2(),
            st.drift_estimate,
            st.std_error,
            st.z_score,
            if pass { "martingale" } else { "drift detected" }
        ));
        stats.push(json!({ "T1": fs.t1(), "T2": fs.t2(), "stats": st }));
    }
    out.csv("martingale.csv", &MARTINGALE_HEADER, &rows)?;
    Ok(Outcome {
        status: status(ok),
        verdicts,
        data: json!({ "z_limit": MARTINGALE_Z_LIMIT, "contracts": stats }),
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vol(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let ps = observed_paths(s, m)?;
    let v = estimate_vol(&ps)?;
    let mut rows = Vec::new();
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            rows.push(vec![i.to_string(), j.to_string(), num(v[(i, j)])]);
        }
    }
    out.csv("vol.csv", &["row", "col", "value"], &rows)?;
    let shown: Vec<String> = v
        .row_iter()
        .map(|r| format!("[{}]", r.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")))
        .collect();
    Ok(Outcome {
        status: Status::Ok,
        verdicts: vec![format!("estimated covariance: [{}]", shown.join(", "))],
        data: json!({ "covariance": matrix_rows(&v), "n_paths": ps.n_paths(), "n_times": ps.n_times() }),
    })
}

fn reconstruct(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let spec = s
        .reconstruct
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario has no `reconstruct` block".into()))?;
    let (grid, ys) = (s.grid()?, s.y_samples(d)?);
    let tol = s.tolerance.unwrap_or(RECONSTRUCT_TOL);
    let origin = vec![0.0; d];
    let g0 = m.value(spec.x0, &origin);
    let grad0 = m.grad_y(spec.x0, &origin);
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (i, y) in ys.iter().enumerate() {
        let h = reconstruct_from_eta(probe_eta_field(m, &grid), g0, grad0.as_slice(), y, spec.n_steps)?;
        let direct = m.value(spec.x0, y);
        let err = (h - direct).abs();
        worst = worst.max(err);
        rows.push(vec![i.to_string(), num(h), num(direct), num(err)]);
    }
    out.csv("reconstruct.csv", &["y_index", "reconstructed", "direct", "abs_error"], &rows)?;
    let ok = worst <= tol;
    Ok(Outcome {
        status: status(ok),
        verdicts: vec![format!(
            "reconstruct: max abs error={worst:.6e} at x0={} (tolerance {tol:e}): {}",
            spec.x0,
            if ok { "OK" } else { "VIOLATION" }
        )],
        data: json!({ "max_abs_error": worst, "tolerance": tol, "x0": spec.x0, "n_steps": spec.n_steps }),
    })
}

fn loop_cmd(s: &Scenario, m: &Model, out: &mut Output) -> Result<Outcome, CliError> {
    let d = m.dim();
    let ps = observed_paths(s, m)?;
    let opts = SccLoopOptions {
        sigma_override: s.sigma_override(d)?,
        tol: s.tolerance.unwrap_or(SCC_LOOP_TOL),
        ..SccLoopOptions::new()
    };
    let r = scc_loop(m, &ps, &s.grid()?, &opts)?;
    out.json("scc_loop_report.json", &r)?;
    let mut verdicts = vec![r.verdict_line()];
    verdicts.push(format!(
        "checked {} states in box {:?}..{:?}, drift bound {:.6e}{}",
        r.states_checked,
        r.box_lo,
        r.box_hi,
        r.drift_bound,
        if r.psd_projected { ", covariance projected to PSD" } else { "" }
    ));
    Ok(Outcome {
        status: status(r.supported),
        verdicts,
        data: serde_json::to_value(&r).expect("serialisable"),
    })
}

//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; absent values are `NaN`.
//! The plain functions below the exports do the work and are tested natively.

use ptomo_core::nonmarkov::{bloch_volume, sweep_theta, MapKind, PointStatus};
use ptomo_core::process::{markov_predict, run_process, InterventionSequence, ProcessKind, ProcessSpec};
use ptomo_core::quantum::state_fidelity;
use ptomo_core::tomography::{fit_restricted_tensor, generate_records, predict_output};
use ptomo_core::{NoiseSpec, Projector};
use wasm_bindgen::prelude::*;

/// `[θ, N, status]` per point; status 0 converged, 1 not converged,
/// 2 vanishing branch, 3 support mismatch.
#[wasm_bindgen(js_name = nonmarkovSweep)]
pub fn nonmarkov_sweep_js(process: &str, gamma: f64, lambda: f64, points: usize) -> Result<Vec<f64>, JsError> {
    nonmarkov_sweep(process, gamma, lambda, points).map_err(|e| JsError::new(&e))
}

/// `[n_tensor, n_markov, x, y, z, ...]`: the process-tensor cloud first.
#[wasm_bindgen(js_name = blochClouds)]
pub fn bloch_clouds_js(
    process: &str,
    gamma: f64,
    lambda: f64,
    theta: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    bloch_clouds(process, gamma, lambda, theta, samples).map_err(|e| JsError::new(&e))
}

/// 18×18 tensor fidelities, then 18×18 Markov fidelities, row index `A₀`.
#[wasm_bindgen(js_name = fidelityGrid)]
pub fn fidelity_grid_js(process: &str, gamma: f64, lambda: f64) -> Result<Vec<f64>, JsError> {
    fidelity_grid(process, gamma, lambda).map_err(|e| JsError::new(&e))
}

/// Labels of the grid rows and columns.
#[wasm_bindgen(js_name = gridLabels)]
pub fn grid_labels() -> Vec<String> {
    ptomo_core::quantum::OVERCOMPLETE_LABELS.iter().map(|s| s.to_string()).collect()
}

fn spec_for(process: &str, gamma: f64, lambda: f64) -> Result<ProcessSpec, String> {
    let kind = ProcessKind::parse(process).ok_or_else(|| format!("unknown process {process:?}"))?;
    let noise = if gamma == 0.0 && lambda == 0.0 {
        None
    } else {
        Some(NoiseSpec::new(gamma, lambda).map_err(|e| e.to_string())?)
    };
    Ok(ProcessSpec::named(kind, noise))
}

pub fn nonmarkov_sweep(process: &str, gamma: f64, lambda: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    let spec = spec_for(process, gamma, lambda)?;
    let records = generate_records(&spec, None).map_err(|e| e.to_string())?;
    let end = 11.0 * std::f64::consts::PI / 12.0;
    let grid: Vec<f64> = (0..points).map(|k| end * k as f64 / (points - 1) as f64).collect();
    let sweep = sweep_theta(&spec, &records, &grid).map_err(|e| e.to_string())?;
    Ok(sweep
        .iter()
        .flat_map(|p| {
            let status = match p.status {
                PointStatus::Converged => 0.0,
                PointStatus::NotConverged => 1.0,
                PointStatus::VanishingBranch => 2.0,
                PointStatus::SupportMismatch => 3.0,
            };
            [p.theta, p.n_value.unwrap_or(f64::NAN), status]
        })
        .collect())
}

pub fn bloch_clouds(process: &str, gamma: f64, lambda: f64, theta: f64, samples: usize) -> Result<Vec<f64>, String> {
    let spec = spec_for(process, gamma, lambda)?;
    let records = generate_records(&spec, None).map_err(|e| e.to_string())?;
    let tensor = fit_restricted_tensor(&records).map_err(|e| e.to_string())?;
    let cloud = |kind| bloch_volume(kind, &spec, &tensor, theta, samples).map_err(|e| e.to_string());
    let (t, m) = (cloud(MapKind::ProcessTensor)?, cloud(MapKind::MarkovMap)?);
    let mut out = vec![t.len() as f64, m.len() as f64];
    out.extend(t.iter().chain(&m).flat_map(|p| p.bloch));
    Ok(out)
}

pub fn fidelity_grid(process: &str, gamma: f64, lambda: f64) -> Result<Vec<f64>, String> {
    let spec = spec_for(process, gamma, lambda)?;
    let err = |e: ptomo_core::Error| e.to_string();
    let tensor = fit_restricted_tensor(&generate_records(&spec, None).map_err(err)?).map_err(err)?;
    let maps = spec.reduced_maps().map_err(err)?;
    let ops = Projector::overcomplete();
    let n = ops.len();
    let mut out = vec![f64::NAN; 2 * n * n];
    for (i, a0) in ops.iter().enumerate() {
        for (j, a1) in ops.iter().enumerate() {
            let seq = InterventionSequence::pair(a0.clone(), a1.clone());
            let truth = run_process(&spec, &seq).map_err(err)?;
            let Some(rho) = truth.rho_out.filter(|_| truth.p_joint >= 1e-9) else { continue };
            let fid = |pred: Option<ptomo_core::DensityMatrix>| pred.map_or(Ok(0.0), |p| state_fidelity(&p, &rho));
            out[i * n + j] = fid(predict_output(&tensor, &seq).map_err(err)?.rho).map_err(err)?;
            out[n * n + i * n + j] = fid(markov_predict(&spec, &seq, &maps).map_err(err)?).map_err(err)?;
        }
    }
    Ok(out)
}

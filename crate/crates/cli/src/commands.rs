//! The five experiment pipelines.

use crate::{Artifact, CliError, RunConfig, Table};
use ptomo_core::nonmarkov::{bloch_volume, sweep_theta, MapKind, PointStatus};
use ptomo_core::process::{
    derive_seed, markov_predict_with, run_process, InterventionSequence, ProcessSpec, ShotConfig,
};
use ptomo_core::quantum::{chi_fidelity, chi_of_map, cnot, cz, reduced_map_with_noise, state_fidelity, BASIS_LABELS};
use ptomo_core::textio::{format_matrix, format_records};
use ptomo_core::tomography::{
    denoise_records, fit_restricted_tensor, generate_records, predict_output, qpt_of_map, qpt_projector, TomoRecord,
    DENOISE_ITERATIONS,
};
use ptomo_core::{CMatrix, ChiMatrix, DensityMatrix, Error, Projector};

/// Repetitions of POVM tomography in shot mode.
pub const POVM_REPETITIONS: u64 = 20;

/// Pairs whose true branch probability is below this are omitted from grids.
pub const MIN_PAIR_PROB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CharacterizePovm,
    ReducedMaps,
    TomoPredict,
    Nonmarkov,
    Volume,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::CharacterizePovm, Command::ReducedMaps, Command::TomoPredict, Command::Nonmarkov, Command::Volume];

    pub fn name(self) -> &'static str {
        match self {
            Command::CharacterizePovm => "characterize-povm",
            Command::ReducedMaps => "reduced-maps",
            Command::TomoPredict => "tomo-predict",
            Command::Nonmarkov => "nonmarkov",
            Command::Volume => "volume",
        }
    }
}

/// Files to write, human-readable summary lines, and any steps that did
/// not converge.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
    pub nonconverged: Vec<String>,
}

impl Outcome {
    fn table(&mut self, name: &str, table: &Table, hash: &str) {
        self.artifacts.push(Artifact { name: name.into(), contents: table.render(hash) });
    }

    fn matrix(&mut self, name: &str, m: &CMatrix, hash: &str) {
        self.artifacts
            .push(Artifact { name: name.into(), contents: format!("# config_hash={hash}\n{}", format_matrix(m)) });
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::CharacterizePovm => characterize_povm(cfg),
        Command::ReducedMaps => reduced_maps(cfg),
        Command::TomoPredict => tomo_predict(cfg),
        Command::Nonmarkov => nonmarkov(cfg),
        Command::Volume => volume(cfg),
    }
}

/// File-name friendly projector label: `xy+` becomes `xyp`.
pub fn file_tag(label: &str) -> String {
    label.replace('+', "p").replace('-', "m")
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn label(p: &Projector) -> &str {
    p.label().expect("named projector")
}

/// Shot configuration for repetition `rep`; repetition 0 uses the seed as given.
fn repetition_shots(cfg: &RunConfig, rep: u64) -> Option<ShotConfig> {
    cfg.shot_config().map(|s| if rep == 0 { s } else { ShotConfig { seed: derive_seed(s.seed, &[rep]), ..s } })
}

/// QPT of every over-complete projector, with fidelities to the ideal map.
pub fn characterize_povm(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let hash = cfg.hash();
    let reps = if cfg.shots.is_some() { POVM_REPETITIONS } else { 1 };
    let mut detail = Table::new(&["label", "in_basis", "repetition", "fidelity"]);
    let mut summary = Table::new(&["label", "in_basis", "mean", "std", "min", "max"]);
    let mut out = Outcome::default();
    let mut basis_fids = Vec::new();
    for p in Projector::overcomplete() {
        let ideal = ChiMatrix::from_projector(&p);
        let in_basis = BASIS_LABELS.contains(&label(&p));
        let mut fids = Vec::new();
        for rep in 0..reps {
            let chi = qpt_projector(&p, repetition_shots(cfg, rep).as_ref())?;
            let f = chi_fidelity(&chi, &ideal)?;
            if rep == 0 {
                out.matrix(&format!("chi_povm_{}.txt", file_tag(label(&p))), chi.chi(), &hash);
            }
            detail.push(vec![label(&p).into(), in_basis.to_string(), rep.to_string(), num(f)]);
            fids.push(f);
        }
        let m = mean(&fids);
        let sd = (fids.iter().map(|f| (f - m).powi(2)).sum::<f64>() / fids.len() as f64).sqrt();
        let max = fids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.push(vec![label(&p).into(), in_basis.to_string(), num(m), num(sd), num(min(&fids)), num(max)]);
        if in_basis {
            basis_fids.extend(fids);
        }
    }
    out.table("povm_fidelity.csv", &detail, &hash);
    out.table("povm_summary.csv", &summary, &hash);
    out.summary.push(format!(
        "basis POVM fidelity: mean {:.6}, min {:.6} over {} runs",
        mean(&basis_fids),
        min(&basis_fids),
        basis_fids.len()
    ));
    Ok(out)
}

/// Environment states used for the reduced CZ maps.
pub fn reduced_map_environments() -> Vec<(&'static str, DensityMatrix)> {
    let named = |l: &str| Projector::named(l).expect("named").state();
    vec![("e0", named("z+")), ("e1", named("z-")), ("eym", named("y-"))]
}

/// χ of the two-qubit gates and of CZ reduced on three environment states.
pub fn reduced_maps(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let hash = cfg.hash();
    let noise = cfg.noise;
    let mut out = Outcome::default();
    let mut table = Table::new(&["map", "fidelity_to_ideal", "tomography_fidelity", "trace_preservation_error"]);

    for (name, u) in [("cz", cz()), ("cnot", cnot())] {
        let ideal = ChiMatrix::from_unitary(&u)?;
        let actual = chi_of_map(2, |m| {
            let v = u.sandwich(m).expect("4x4");
            noise.map_or(v.clone(), |n| n.apply_mat(&v))
        })?;
        out.matrix(&format!("chi_{name}.txt"), actual.chi(), &hash);
        table.push(vec![
            name.into(),
            num(chi_fidelity(&actual, &ideal)?),
            String::new(),
            num(actual.trace_preservation_error()),
        ]);
    }

    for (k, (tag, env)) in reduced_map_environments().into_iter().enumerate() {
        let name = format!("reduced_cz_{tag}");
        let ideal = reduced_map_with_noise(&cz(), &env, None)?;
        let actual = reduced_map_with_noise(&cz(), &env, noise.as_ref())?;
        out.matrix(&format!("chi_{name}.txt"), actual.chi(), &hash);
        let tomo = match cfg.shot_config() {
            None => String::new(),
            Some(shots) => {
                let est = qpt_of_map(|m| actual.apply_mat(m).expect("2x2"), Some(&shots), 0x7ed + k as u64)?;
                out.matrix(&format!("chi_{name}_qpt.txt"), est.chi(), &hash);
                num(chi_fidelity(&est, &actual)?)
            }
        };
        table.push(vec![
            name.clone(),
            num(chi_fidelity(&actual, &ideal)?),
            tomo,
            num(actual.trace_preservation_error()),
        ]);
    }
    out.summary.push(format!("wrote {} χ matrices", out.artifacts.len()));
    out.table("reduced_maps.csv", &table, &hash);
    Ok(out)
}

/// The 81 records the tensor is fitted from: exact, or sampled and then
/// cleaned by the positive-comb projection.
pub fn tomography_records(cfg: &RunConfig) -> Result<(Vec<TomoRecord>, Option<Vec<TomoRecord>>), CliError> {
    let spec = cfg.spec();
    match cfg.shot_config() {
        None => Ok((generate_records(&spec, None)?, None)),
        Some(shots) => {
            let raw = generate_records(&spec, Some(&shots))?;
            let (clean, _) = denoise_records(&raw, DENOISE_ITERATIONS)?;
            Ok((clean, Some(raw)))
        }
    }
}

/// Intervention and reduced-interaction χ matrices for the Markov predictor:
/// exact, or estimated by process tomography in shot mode.
fn markov_inputs(cfg: &RunConfig, spec: &ProcessSpec) -> Result<(Vec<ChiMatrix>, Vec<ChiMatrix>), CliError> {
    let projectors = Projector::overcomplete();
    let reduced = spec.reduced_maps()?;
    match cfg.shot_config() {
        None => Ok((projectors.iter().map(ChiMatrix::from_projector).collect(), reduced)),
        Some(shots) => {
            let povms = projectors.iter().map(|p| qpt_projector(p, Some(&shots))).collect::<Result<_, _>>()?;
            let maps = reduced
                .iter()
                .enumerate()
                .map(|(k, chi)| qpt_of_map(|m| chi.apply_mat(m).expect("2x2"), Some(&shots), 0xa11 + k as u64))
                .collect::<Result<_, _>>()?;
            Ok((povms, maps))
        }
    }
}

/// One cell of the prediction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub a0: String,
    pub a1: String,
    pub p_joint: f64,
    pub fidelity_tensor: f64,
    pub fidelity_markov: f64,
}

fn fidelity_or_zero(pred: Option<DensityMatrix>, truth: &DensityMatrix) -> Result<f64, Error> {
    pred.map_or(Ok(0.0), |rho| state_fidelity(&rho, truth))
}

/// Both predictors against the exact simulation on the 18x18 grid.
pub fn prediction_grid(cfg: &RunConfig, records: &[TomoRecord]) -> Result<Vec<GridCell>, CliError> {
    let spec = cfg.spec();
    let tensor = fit_restricted_tensor(records)?;
    let (povms, maps) = markov_inputs(cfg, &spec)?;
    let projectors = Projector::overcomplete();
    let mut cells = Vec::new();
    for (i0, a0) in projectors.iter().enumerate() {
        for (i1, a1) in projectors.iter().enumerate() {
            let seq = InterventionSequence::pair(a0.clone(), a1.clone());
            let truth = run_process(&spec, &seq)?;
            let Some(rho) = truth.rho_out.filter(|_| truth.p_joint >= MIN_PAIR_PROB) else { continue };
            let tensor_pred = predict_output(&tensor, &seq)?.rho;
            let markov_pred = markov_predict_with(&spec, &[povms[i0].clone(), povms[i1].clone()], &maps)?;
            cells.push(GridCell {
                a0: label(a0).into(),
                a1: label(a1).into(),
                p_joint: truth.p_joint,
                fidelity_tensor: fidelity_or_zero(tensor_pred, &rho)?,
                fidelity_markov: fidelity_or_zero(markov_pred, &rho)?,
            });
        }
    }
    Ok(cells)
}

pub fn tomo_predict(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let hash = cfg.hash();
    let mut out = Outcome::default();
    let (records, raw) = tomography_records(cfg)?;
    let header = format!("# config_hash={hash}\n");
    if let Some(raw) = &raw {
        out.artifacts
            .push(Artifact { name: "records_raw.txt".into(), contents: header.clone() + &format_records(raw) });
    }
    out.artifacts.push(Artifact { name: "records.txt".into(), contents: header + &format_records(&records) });
    let tensor = fit_restricted_tensor(&records)?;
    out.matrix("tensor.txt", &tensor.map, &hash);

    let cells = prediction_grid(cfg, &records)?;
    let mut grid = Table::new(&["a0", "a1", "p_joint", "fidelity_tensor", "fidelity_markov"]);
    for c in &cells {
        grid.push(vec![c.a0.clone(), c.a1.clone(), num(c.p_joint), num(c.fidelity_tensor), num(c.fidelity_markov)]);
    }
    out.table("tomo_predict.csv", &grid, &hash);

    let mut summary = Table::new(&["a0", "pairs", "tensor_mean", "tensor_min", "markov_mean", "markov_min"]);
    let labels: Vec<String> = Projector::overcomplete().iter().map(|p| label(p).to_owned()).collect();
    for g in labels.iter().map(String::as_str).chain(["all"]) {
        let sel: Vec<&GridCell> = cells.iter().filter(|c| g == "all" || c.a0 == g).collect();
        let t: Vec<f64> = sel.iter().map(|c| c.fidelity_tensor).collect();
        let m: Vec<f64> = sel.iter().map(|c| c.fidelity_markov).collect();
        summary.push(vec![g.into(), sel.len().to_string(), num(mean(&t)), num(min(&t)), num(mean(&m)), num(min(&m))]);
    }
    out.table("tomo_summary.csv", &summary, &hash);

    let t: Vec<f64> = cells.iter().map(|c| c.fidelity_tensor).collect();
    let m: Vec<f64> = cells.iter().map(|c| c.fidelity_markov).collect();
    out.summary.push(format!(
        "{} pairs; tensor mean fidelity {:.6}, Markov mean fidelity {:.6}",
        cells.len(),
        mean(&t),
        mean(&m)
    ));
    Ok(out)
}

pub fn nonmarkov(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let hash = cfg.hash();
    let mut out = Outcome::default();
    let (records, _) = tomography_records(cfg)?;
    let points = sweep_theta(&cfg.spec(), &records, &cfg.theta_grid)?;
    let mut table = Table::new(&["theta", "n", "status", "iterations"]);
    for p in &points {
        table.push(vec![
            num(p.theta),
            p.n_value.map_or(String::new(), num),
            p.status.name().to_string(),
            p.iterations.to_string(),
        ]);
        if matches!(p.status, PointStatus::NotConverged | PointStatus::SupportMismatch) {
            out.nonconverged.push(format!("theta = {}: {}", p.theta, p.status.name()));
        }
    }
    out.table("nonmarkov.csv", &table, &hash);
    if let Some(peak) =
        points.iter().filter(|p| p.n_value.is_some()).max_by(|a, b| a.n_value.partial_cmp(&b.n_value).unwrap())
    {
        out.summary.push(format!("peak N = {:.6} at theta = {:.6}", peak.n_value.unwrap(), peak.theta));
    }
    Ok(out)
}

pub fn volume(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let hash = cfg.hash();
    let spec = cfg.spec();
    let mut out = Outcome::default();
    let (records, _) = tomography_records(cfg)?;
    let tensor = fit_restricted_tensor(&records)?;
    let mut cloud = Table::new(&["map", "theta", "a1_theta", "a1_phi", "x", "y", "z"]);
    let mut stats = Table::new(&["map", "theta", "points", "mean_radius", "max_transverse"]);
    for &theta in &cfg.theta_grid {
        for (name, kind) in [("process-tensor", MapKind::ProcessTensor), ("markov", MapKind::MarkovMap)] {
            let points = match bloch_volume(kind, &spec, &tensor, theta, cfg.volume_samples) {
                Ok(p) => p,
                Err(Error::VanishingBranch(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let mut radii = Vec::new();
            let mut transverse: f64 = 0.0;
            for p in &points {
                let [x, y, z] = p.bloch;
                cloud.push(vec![name.into(), num(theta), num(p.a1_theta), num(p.a1_phi), num(x), num(y), num(z)]);
                radii.push((x * x + y * y + z * z).sqrt());
                transverse = transverse.max(x.hypot(y));
            }
            stats.push(vec![name.into(), num(theta), points.len().to_string(), num(mean(&radii)), num(transverse)]);
        }
    }
    out.table("bloch_volume.csv", &cloud, &hash);
    out.table("bloch_volume_summary.csv", &stats, &hash);
    out.summary.push(format!("{} theta values, {} samples per cloud", cfg.theta_grid.len(), cfg.volume_samples));
    Ok(out)
}

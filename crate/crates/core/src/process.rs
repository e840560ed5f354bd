//! Exact and sampled execution of the system–environment process, and the
//! Markovian predictor built from reduced single-qubit maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qlinalg::{partial_trace, CMatrix, Subsystem};
use crate::quantum::{
    apply_chi, cnot, cz, reduced_map_with_noise, unitarity_error, ChiMatrix, DensityMatrix, NoiseSpec, Projector,
};

/// Branches with a joint probability below this have no output state.
pub const P_JOINT_CUTOFF: f64 = 1e-12;

/// The two named process layouts: which gate follows which intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessKind {
    CnotCz,
    CzCnot,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::CnotCz => "cnot-cz",
            Self::CzCnot => "cz-cnot",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "cnot-cz" => Some(Self::CnotCz),
            "cz-cnot" => Some(Self::CzCnot),
            _ => None,
        }
    }
}

/// A sequence of joint unitaries acting on `S ⊗ E`, interleaved with
/// projective interventions on S.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    interactions: Vec<CMatrix>,
    initial_state: DensityMatrix,
    noise: Option<NoiseSpec>,
}

impl ProcessSpec {
    pub fn new(interactions: Vec<CMatrix>, initial_state: DensityMatrix, noise: Option<NoiseSpec>) -> Result<Self> {
        for u in &interactions {
            if u.rows() != 4 || u.cols() != 4 {
                return Err(Error::BadDims(format!("{}x{} interaction", u.rows(), u.cols())));
            }
            let err = unitarity_error(u);
            if err > 1e-8 {
                return Err(Error::NotUnitary(err));
            }
        }
        if initial_state.nqubits() != 2 {
            return Err(Error::BadDims("initial state must span S and E".into()));
        }
        if (initial_state.trace() - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(initial_state.trace()));
        }
        let noise = noise.filter(|n| !n.is_trivial());
        Ok(Self { interactions, initial_state, noise })
    }

    /// Named two-step process starting from `|00>`.
    pub fn named(kind: ProcessKind, noise: Option<NoiseSpec>) -> Self {
        let gates = match kind {
            ProcessKind::CnotCz => vec![cnot(), cz()],
            ProcessKind::CzCnot => vec![cz(), cnot()],
        };
        Self::new(gates, DensityMatrix::ground(2), noise).expect("named processes are valid")
    }

    pub fn cnot_cz() -> Self {
        Self::named(ProcessKind::CnotCz, None)
    }

    pub fn cz_cnot() -> Self {
        Self::named(ProcessKind::CzCnot, None)
    }

    pub fn interactions(&self) -> &[CMatrix] {
        &self.interactions
    }

    pub fn initial_state(&self) -> &DensityMatrix {
        &self.initial_state
    }

    pub fn noise(&self) -> Option<&NoiseSpec> {
        self.noise.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.interactions.len()
    }

    /// Applies interaction `k` (and the noise channel, if any) to a joint operator.
    pub fn interact(&self, k: usize, joint: &CMatrix) -> CMatrix {
        let out = self.interactions[k].sandwich(joint).expect("interaction and joint state are both 4x4");
        match &self.noise {
            Some(n) => n.apply_mat(&out),
            None => out,
        }
    }

    /// Environment marginal of the initial state.
    pub fn initial_env(&self) -> DensityMatrix {
        self.initial_state.reduce(Subsystem::B).expect("initial state is two-qubit")
    }

    /// Markovian reduced maps: each interaction traced over E held in its
    /// initial marginal, noise included.
    pub fn reduced_maps(&self) -> Result<Vec<ChiMatrix>> {
        let env = self.initial_env();
        self.interactions.iter().map(|u| reduced_map_with_noise(u, &env, self.noise.as_ref())).collect()
    }
}

/// One projector per interaction, applied to S just before it.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSequence {
    pub ops: Vec<Projector>,
}

impl InterventionSequence {
    pub fn new(ops: Vec<Projector>) -> Self {
        Self { ops }
    }

    pub fn pair(a0: Projector, a1: Projector) -> Self {
        Self { ops: vec![a0, a1] }
    }

    /// Builds a sequence from labels such as `["y-", "x+"]`.
    pub fn from_labels(labels: &[&str]) -> Result<Self> {
        Ok(Self { ops: labels.iter().map(|l| Projector::named(l)).collect::<Result<_>>()? })
    }

    fn check(&self, spec: &ProcessSpec) -> Result<()> {
        if self.ops.len() != spec.steps() {
            return Err(Error::BadSequence { ops: self.ops.len(), steps: spec.steps() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotConfig {
    pub shots: u64,
    pub seed: u64,
}

impl ShotConfig {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::NotPhysical("shots must be at least 1".into()));
        }
        Ok(Self { shots, seed })
    }
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self { shots: 3000, seed: 0 }
    }
}

/// Outcome of an exact run: the final system state (absent on a forbidden
/// branch) and the joint probability of all interventions.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOutput {
    pub rho_out: Option<DensityMatrix>,
    pub p_joint: f64,
}

/// Unnormalized joint `S ⊗ E` state after the whole sequence.
pub fn run_joint(spec: &ProcessSpec, seq: &InterventionSequence) -> Result<CMatrix> {
    seq.check(spec)?;
    let mut joint = spec.initial_state.mat().clone();
    for (k, p) in seq.ops.iter().enumerate() {
        joint = p.embed(0, 2)?.sandwich(&joint)?;
        joint = spec.interact(k, &joint);
    }
    Ok(joint)
}

/// Unnormalized system output `Tr_E[...]`; its trace is the joint probability.
pub fn run_process_unnormalized(spec: &ProcessSpec, seq: &InterventionSequence) -> Result<CMatrix> {
    partial_trace(&run_joint(spec, seq)?, 2, 2, Subsystem::A)
}

/// Exact contraction of the process with the given interventions.
pub fn run_process(spec: &ProcessSpec, seq: &InterventionSequence) -> Result<ProcessOutput> {
    let out = DensityMatrix::new_unchecked(run_process_unnormalized(spec, seq)?);
    let p_joint = out.trace().max(0.0);
    Ok(ProcessOutput { rho_out: out.normalized(P_JOINT_CUTOFF), p_joint })
}

/// Prediction under the Markov assumption: projector χ and reduced
/// interaction χ applied alternately, starting from the initial S marginal.
pub fn markov_predict(
    spec: &ProcessSpec,
    seq: &InterventionSequence,
    reduced_maps: &[ChiMatrix],
) -> Result<Option<DensityMatrix>> {
    seq.check(spec)?;
    if reduced_maps.len() != spec.steps() {
        return Err(Error::BadSequence { ops: reduced_maps.len(), steps: spec.steps() });
    }
    let intervention_maps: Vec<ChiMatrix> = seq.ops.iter().map(ChiMatrix::from_projector).collect();
    markov_predict_with(spec, &intervention_maps, reduced_maps)
}

/// As [`markov_predict`], with the interventions also given as χ matrices
/// (e.g. estimated by process tomography).
pub fn markov_predict_with(
    spec: &ProcessSpec,
    intervention_maps: &[ChiMatrix],
    reduced_maps: &[ChiMatrix],
) -> Result<Option<DensityMatrix>> {
    if intervention_maps.len() != spec.steps() || reduced_maps.len() != spec.steps() {
        return Err(Error::BadSequence { ops: intervention_maps.len(), steps: spec.steps() });
    }
    let mut rho = spec.initial_state.reduce(Subsystem::A)?;
    for (a, u) in intervention_maps.iter().zip(reduced_maps) {
        rho = apply_chi(a, &rho)?;
        rho = apply_chi(u, &rho)?;
    }
    Ok(rho.normalized(P_JOINT_CUTOFF))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into a seed; any change to any word changes it.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(seed), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

fn projector_words(p: &Projector) -> [u64; 2] {
    [p.theta().to_bits(), p.phi().to_bits()]
}

/// Counts from `shots` runs of a chain of post-selected stages.
///
/// `stage_probs[k]` is the probability that stage `k` passes given that all
/// earlier stages passed; the last stage is the readout. Each shot draws one
/// uniform per stage in stage order, so the stream layout is independent of
/// the outcomes. Returns `(readout passes, shots that survived every
/// stage before the readout)`.
pub fn sample_stages(stage_probs: &[f64], shots: u64, seed: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (last, interventions) = stage_probs.split_last().expect("at least a readout stage");
    let mut pass = 0;
    let mut total = 0;
    for _ in 0..shots {
        let mut alive = true;
        for &p in interventions {
            let u: f64 = rng.random();
            alive &= u < p;
        }
        let u: f64 = rng.random();
        if alive {
            total += 1;
            if u < *last {
                pass += 1;
            }
        }
    }
    (pass, total)
}

/// Conditional pass probabilities of each intervention and of the readout.
pub fn stage_probabilities(
    spec: &ProcessSpec,
    seq: &InterventionSequence,
    readout_axis: &Projector,
) -> Result<Vec<f64>> {
    seq.check(spec)?;
    let mut probs = Vec::with_capacity(seq.ops.len() + 1);
    let mut joint = spec.initial_state.mat().clone();
    let mut weight = 1.0;
    for (k, p) in seq.ops.iter().enumerate() {
        let projected = p.embed(0, 2)?.sandwich(&joint)?;
        let w = projected.trace().re.max(0.0);
        probs.push(if weight > 0.0 { (w / weight).clamp(0.0, 1.0) } else { 0.0 });
        weight = w;
        joint = spec.interact(k, &projected);
    }
    let rho = partial_trace(&joint, 2, 2, Subsystem::A)?;
    let t = rho.trace().re;
    let q = if t > 0.0 { ((readout_axis.mat() * &rho).trace().re / t).clamp(0.0, 1.0) } else { 0.0 };
    probs.push(q);
    Ok(probs)
}

/// Finite-shot post-selected counts for one readout projector.
///
/// Returns `(counts_pass, counts_total)`: `counts_total` shots survived all
/// interventions, of which `counts_pass` also passed the readout.
pub fn simulate_counts(
    spec: &ProcessSpec,
    seq: &InterventionSequence,
    readout_axis: &Projector,
    cfg: &ShotConfig,
) -> Result<(u64, u64)> {
    let probs = stage_probabilities(spec, seq, readout_axis)?;
    let mut words: Vec<u64> = seq.ops.iter().flat_map(projector_words).collect();
    words.extend(projector_words(readout_axis));
    Ok(sample_stages(&probs, cfg.shots, derive_seed(cfg.seed, &words)))
}

//! Conditional Choi states of the last process step and the minimum
//! relative entropy to an uncorrelated (Markovian) reference.
//!
//! Choi layout: an 8x8 matrix on `A_in ⊗ A_out ⊗ out`, where `A_in` is the
//! system just before the last intervention, `A_out` just after it, and
//! `out` the final system. An intervention with superoperator `C` produces
//! the output `Tr_A[(Cᵀ ⊗ I) Υ]`.

use crate::error::{Error, Result};
use crate::par_map;
use crate::process::ProcessSpec;
use crate::qlinalg::vec as vectorize;
use crate::qlinalg::{
    herm_eig, kron, partial_trace, r, solve_real, span_and_complement, CMatrix, Subsystem, C64, LOG_FLOOR, ZERO,
};
use crate::quantum::{pauli, pauli_basis, DensityMatrix, Projector};
use crate::tomography::{
    action_from_coeffs, expand_in_basis, fit_restricted_tensor, RestrictedProcessTensor, TomoRecord,
};

/// Branches whose first intervention has lower probability are not conditioned.
pub const MIN_BRANCH_PROB: f64 = 1e-9;

/// Support weight above which [`relative_entropy`] refuses to regularize.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Quadratic penalty on the dual variables. Fitted data satisfy the family
/// constraints only to about 1e-9, which can leave a boundary optimum
/// marginally infeasible; the penalty keeps the dual bounded there.
pub const DUAL_RIDGE: f64 = 1e-12;

/// Iteration cap of [`minimize_nonmarkovianity`].
pub const MAX_ITER: usize = 10_000;

/// A Choi operator of the last step together with the branch probability it
/// was conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState {
    pub mat: CMatrix,
    pub normalization: f64,
}

impl ChoiState {
    pub fn new(mat: CMatrix, normalization: f64) -> Result<Self> {
        if mat.rows() != 8 || mat.cols() != 8 {
            return Err(Error::BadDims(format!("{}x{} Choi state", mat.rows(), mat.cols())));
        }
        let herr = mat.hermiticity_error();
        if herr > 1e-8 {
            return Err(Error::NotHermitian(herr));
        }
        Ok(Self { mat: mat.hermitian_part(), normalization })
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Final-system output for an intervention with the given 4x4 superoperator.
    pub fn output_for(&self, superop: &CMatrix) -> CMatrix {
        contract_choi(&self.mat, superop)
    }
}

fn contract_choi(choi: &CMatrix, superop: &CMatrix) -> CMatrix {
    // Tr_A[(Cᵀ ⊗ I) Υ]: out[p, q] = Σ_ab C[a, b] Υ[a*2 + p, b*2 + q]
    let mut out = CMatrix::zeros(2, 2);
    for a in 0..4 {
        for b in 0..4 {
            let w = superop[(a, b)];
            if w == ZERO {
                continue;
            }
            for p in 0..2 {
                for q in 0..2 {
                    out[(p, q)] += w * choi[(a * 2 + p, b * 2 + q)];
                }
            }
        }
    }
    out
}

/// Every Choi state consistent with the conditioned data:
/// `base + Σ c_k directions[k]` for real `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiFamily {
    pub base: ChoiState,
    pub directions: Vec<CMatrix>,
    /// Conditioned outputs for the nine basis interventions.
    pub conditioned: Vec<CMatrix>,
}

impl ChoiFamily {
    /// Member with coefficients `c`.
    pub fn member(&self, c: &[f64]) -> CMatrix {
        let mut m = self.base.mat.clone();
        for (ck, d) in c.iter().zip(&self.directions) {
            m = &m + &d.scale_re(*ck);
        }
        m
    }

    /// Largest deviation of a candidate's outputs from the conditioned data.
    pub fn data_residual(&self, choi: &CMatrix) -> f64 {
        Projector::basis()
            .iter()
            .zip(&self.conditioned)
            .map(|(p, rho)| contract_choi(choi, &p.action()).max_abs_diff(rho))
            .fold(0.0, f64::max)
    }
}

/// Hermitian 4x4 basis `σa ⊗ σb / 2`, orthonormal under `Re Tr(AB)`.
fn herm4_basis() -> Vec<CMatrix> {
    pauli_basis(2).into_iter().map(|m| m.scale_re(0.5)).collect()
}

/// Hermitian 8x8 basis `σa ⊗ σb ⊗ σc / √8`.
fn herm8_basis() -> Vec<CMatrix> {
    pauli_basis(3).into_iter().map(|m| m.scale_re(1.0 / 8f64.sqrt())).collect()
}

fn real_coords(basis: &[CMatrix], m: &CMatrix) -> Vec<C64> {
    basis.iter().map(|h| r(h.hs_inner(m).re)).collect()
}

fn from_coords(basis: &[CMatrix], coords: &[C64]) -> CMatrix {
    let n = basis[0].rows();
    let mut m = CMatrix::zeros(n, n);
    for (h, c) in basis.iter().zip(coords) {
        if c.re != 0.0 {
            m = &m + &h.scale_re(c.re);
        }
    }
    m
}

/// Conditions the fitted tensor on the first intervention `a0`.
pub fn family_from_tensor(t: &RestrictedProcessTensor, a0: &Projector) -> Result<ChoiFamily> {
    let a0_vec = action_from_coeffs(&expand_in_basis(a0)?);
    let basis = Projector::basis();
    let out = |p: &Projector| t.contract(&vectorize(&p.action()), &a0_vec);
    let zp = Projector::named("z+")?;
    let p = (out(&zp)?.trace() + out(&zp.complement())?.trace()).re;
    if p < MIN_BRANCH_PROB {
        return Err(Error::VanishingBranch(p));
    }

    let actions: Vec<CMatrix> = basis.iter().map(Projector::action).collect();
    let conditioned: Vec<CMatrix> = basis.iter().map(|f| Ok(out(f)?.scale_re(1.0 / p))).collect::<Result<_>>()?;

    // Dual frame X_k of the intervention superoperators under Tr(Cᵀ X)
    let mut gram = vec![0.0; 81];
    for l in 0..9 {
        for m in 0..9 {
            gram[l * 9 + m] = (&actions[l] * &actions[m]).trace().re;
        }
    }
    let mut base = CMatrix::zeros(8, 8);
    for k in 0..9 {
        let mut e = vec![0.0; 9];
        e[k] = 1.0;
        // gram is symmetric, so a row of its inverse is a solve against e_k
        let row = solve_real(&gram, &e)?;
        let mut xk = CMatrix::zeros(4, 4);
        for (m, w) in row.iter().enumerate() {
            xk = &xk + &actions[m].conj().scale_re(*w);
        }
        base = &base + &kron(&xk, &conditioned[k]);
    }

    let h4 = herm4_basis();
    let constrained: Vec<Vec<C64>> = actions.iter().map(|c| real_coords(&h4, &c.conj())).collect();
    let (_, free) = span_and_complement(&constrained, 16, 1e-10);
    let mut directions = Vec::with_capacity(free.len() * 4);
    for coords in &free {
        let z = from_coords(&h4, coords);
        for k in 0..4 {
            directions.push(kron(&z, &pauli(k).scale_re(std::f64::consts::FRAC_1_SQRT_2)));
        }
    }

    Ok(ChoiFamily { base: ChoiState::new(base, p)?, directions, conditioned })
}

/// Fits the tensor from the records and conditions it on `P(θ)`.
pub fn condition_family(records: &[TomoRecord], theta: f64) -> Result<ChoiFamily> {
    family_from_tensor(&fit_restricted_tensor(records)?, &Projector::zy_plane(theta))
}

/// Normalized joint state after the first intervention and interaction.
fn first_step_branch(spec: &ProcessSpec, a0: &Projector) -> Result<CMatrix> {
    let joint = a0.embed(0, 2)?.sandwich(spec.initial_state().mat())?;
    let joint = spec.interact(0, &joint);
    let p = joint.trace().re;
    if p < MIN_BRANCH_PROB {
        return Err(Error::VanishingBranch(p));
    }
    Ok(joint.scale_re(1.0 / p))
}

/// Choi matrix `Σ_ij |i><j| ⊗ Λ(|i><j|)` of the last interaction traced
/// over an environment frozen in `rho_env`.
pub fn last_step_choi(spec: &ProcessSpec, rho_env: &CMatrix) -> CMatrix {
    let mut j = CMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            let mut e = CMatrix::zeros(2, 2);
            e[(a, b)] = r(1.0);
            let joint = spec.interact(spec.steps() - 1, &kron(&e, rho_env));
            let out = partial_trace(&joint, 2, 2, Subsystem::A).expect("4x4 joint state");
            j = &j + &kron(&e, &out);
        }
    }
    j
}

/// Uncorrelated reference `ρ₁ ⊗ J_Λ` for the branch `a0`: the system
/// marginal after the first step times the Choi of the last step with the
/// environment replaced by its branch-averaged marginal.
pub fn uncorrelated_choi(spec: &ProcessSpec, a0: &Projector) -> Result<ChoiState> {
    check_two_step(spec)?;
    let branch = first_step_branch(spec, a0)?;
    let rho1 = partial_trace(&branch, 2, 2, Subsystem::A)?;
    let rho_e = partial_trace(&branch, 2, 2, Subsystem::B)?;
    let p = (a0.mat() * spec.initial_state().reduce(Subsystem::A)?.mat()).trace().re;
    ChoiState::new(kron(&rho1, &last_step_choi(spec, &rho_e)), p)
}

/// The actual Choi state of the last step on the branch `a0`, environment
/// correlations included. Belongs to the conditioned family of exact data.
pub fn process_choi(spec: &ProcessSpec, a0: &Projector) -> Result<ChoiState> {
    check_two_step(spec)?;
    let branch = first_step_branch(spec, a0)?;
    let mut choi = CMatrix::zeros(8, 8);
    for i in 0..2 {
        for j in 0..2 {
            // <i|σ|j> on the environment
            let mut env = CMatrix::zeros(2, 2);
            for e in 0..2 {
                for f in 0..2 {
                    env[(e, f)] = branch[(i * 2 + e, j * 2 + f)];
                }
            }
            for k in 0..2 {
                for l in 0..2 {
                    let mut ekl = CMatrix::zeros(2, 2);
                    ekl[(k, l)] = r(1.0);
                    let joint = spec.interact(1, &kron(&ekl, &env));
                    let out = partial_trace(&joint, 2, 2, Subsystem::A)?;
                    for p in 0..2 {
                        for q in 0..2 {
                            choi[((i * 2 + k) * 2 + p, (j * 2 + l) * 2 + q)] += out[(p, q)];
                        }
                    }
                }
            }
        }
    }
    let p = (a0.mat() * spec.initial_state().reduce(Subsystem::A)?.mat()).trace().re;
    ChoiState::new(choi, p)
}

fn check_two_step(spec: &ProcessSpec) -> Result<()> {
    if spec.steps() != 2 {
        return Err(Error::BadSequence { ops: 2, steps: spec.steps() });
    }
    Ok(())
}

/// `Tr[a (ln a - ln b)]` after normalizing both to unit trace.
///
/// Eigenvalues are floored at `1e-12` inside the logarithms. If `a` puts
/// more than `1e-6` of its weight where `b` is below the floor, the
/// divergence is reported as a support mismatch instead.
pub fn relative_entropy_mat(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() || !a.is_square() {
        return Err(Error::BadDims("relative entropy of mismatched operators".into()));
    }
    let ta = a.trace().re;
    let tb = b.trace().re;
    if ta <= 0.0 || tb <= 0.0 {
        return Err(Error::NotNormalized(ta.min(tb)));
    }
    let a = a.scale_re(1.0 / ta);
    let b = b.scale_re(1.0 / tb);
    let ea = herm_eig(&a)?;
    let eb = herm_eig(&b)?;
    let mut outside = 0.0;
    let mut cross = 0.0;
    for (k, &lam) in eb.values.iter().enumerate() {
        let v = eb.column(k);
        let weight = a.apply(&v)?.iter().zip(&v).map(|(x, y)| y.conj() * x).sum::<C64>().re;
        if lam < LOG_FLOOR {
            outside += weight.max(0.0);
        }
        cross += weight * lam.max(LOG_FLOOR).ln();
    }
    if outside > SUPPORT_TOL {
        return Err(Error::SupportMismatch(outside));
    }
    let entropy_term: f64 = ea.values.iter().map(|&x| if x > 0.0 { x * x.max(LOG_FLOOR).ln() } else { 0.0 }).sum();
    Ok((entropy_term - cross).max(0.0))
}

pub fn relative_entropy(a: &ChoiState, b: &ChoiState) -> Result<f64> {
    relative_entropy_mat(&a.mat, &b.mat)
}

/// Result of [`minimize_nonmarkovianity`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonMarkovResult {
    pub n_value: f64,
    /// Member of the family attaining `n_value`, normalized to unit trace.
    pub optimizer: ChoiState,
    /// Dual value `-ln Z` at the final iterate; matches `n_value` once the
    /// constraint residual has vanished.
    pub dual_bound: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Orthonormal basis (under `Re Tr(AB)`) of the real span of Hermitian
/// matrices, from the eigenvectors of their Gram matrix. Singular values
/// below `tol` are treated as zero; unlike Gram-Schmidt this never rescales
/// a nearly dependent remainder up to unit norm.
fn independent_hermitian(mats: &[CMatrix], tol: f64) -> Result<Vec<CMatrix>> {
    let k = mats.len();
    let mut gram = CMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let g = r(mats[i].hs_inner(&mats[j]).re);
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = herm_eig(&gram)?;
    let mut out = Vec::new();
    for (col, &lam) in eig.values.iter().enumerate() {
        if lam <= tol * tol {
            break;
        }
        let n = mats[0].rows();
        let mut m = CMatrix::zeros(n, n);
        for (i, g) in mats.iter().enumerate() {
            m = &m + &g.scale_re(eig.vectors[(i, col)].re / lam.sqrt());
        }
        out.push(m.hermitian_part());
    }
    Ok(out)
}

/// Log-partition function `ln Tr exp(H)` with its spectral data.
struct Partition {
    log_z: f64,
    values: Vec<f64>,
    vectors: CMatrix,
    weights: Vec<f64>,
}

fn gibbs_state(p: &Partition) -> CMatrix {
    let n = p.weights.len();
    let mut w = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            w[(a, b)] = (0..n).map(|k| p.vectors[(a, k)] * p.vectors[(b, k)].conj() * p.weights[k]).sum();
        }
    }
    w
}

fn partition(h: &CMatrix) -> Result<Partition> {
    let eig = herm_eig(h)?;
    let top = eig.values[0];
    let ex: Vec<f64> = eig.values.iter().map(|&e| (e - top).exp()).collect();
    let z: f64 = ex.iter().sum();
    Ok(Partition {
        log_z: top + z.ln(),
        weights: ex.iter().map(|&x| x / z).collect(),
        values: eig.values,
        vectors: eig.vectors,
    })
}

/// Minimum over the family of `D(Υ/TrΥ || ref/Tr ref)` subject to `Υ ≥ 0`.
///
/// Solved through the dual: with `L = ln ref` on the support of `ref`, and
/// `G_i` an orthonormal basis of the Hermitian operators orthogonal to the
/// family's span, the optimum is `W = exp(L + Σ y_i G_i) / Z` at the `y`
/// minimizing `ln Z`, and `N = -ln Z`. Newton steps with Armijo backtracking
/// (start 1, shrink 0.5, constant 1e-4) drive the constraint residual
/// `Tr(W G_i)` to zero. `N` is evaluated on the Gibbs state itself; the
/// reported optimizer is that state projected onto the family span.
pub fn minimize_nonmarkovianity(fam: &ChoiFamily, reference: &ChoiState) -> Result<NonMarkovResult> {
    let rt = reference.trace();
    if rt <= 0.0 {
        return Err(Error::NotNormalized(rt));
    }
    let ref_n = reference.mat.scale_re(1.0 / rt);
    let eig = herm_eig(&ref_n)?;
    let top = eig.values[0];
    let support: Vec<usize> = (0..8).filter(|&k| eig.values[k] > 1e-12 * top).collect();
    let rank = support.len();
    let mut q = CMatrix::zeros(8, rank);
    for (c, &k) in support.iter().enumerate() {
        for i in 0..8 {
            q[(i, c)] = eig.vectors[(i, k)];
        }
    }
    let log_ref = CMatrix::real_diag(&support.iter().map(|&k| eig.values[k].ln()).collect::<Vec<_>>());

    // Constraints: W orthogonal to everything outside span(base, directions)
    let h8 = herm8_basis();
    let spanning: Vec<Vec<C64>> =
        std::iter::once(&fam.base.mat).chain(&fam.directions).map(|m| real_coords(&h8, m)).collect();
    let (span, outside) = span_and_complement(&spanning, 64, 1e-10);
    let constraints: Vec<CMatrix> = outside
        .iter()
        .map(|c| q.adjoint().matmul(&from_coords(&h8, c)).and_then(|m| m.matmul(&q)))
        .collect::<Result<_>>()?;
    // Constraints that vanish on the support are satisfied by every W there;
    // keeping them would leave flat directions in the dual.
    let constraints = independent_hermitian(&constraints, 1e-6)?;
    let m = constraints.len();

    let hamiltonian = |y: &[f64]| {
        let mut h = log_ref.clone();
        for (yi, g) in y.iter().zip(&constraints) {
            h = &h + &g.scale_re(*yi);
        }
        h
    };

    let mut y = vec![0.0; m];
    let mut part = partition(&hamiltonian(&y))?;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let v = &part.vectors;
        let rotated: Vec<CMatrix> =
            constraints.iter().map(|g| v.adjoint().matmul(g).and_then(|x| x.matmul(v))).collect::<Result<_>>()?;
        let grad: Vec<f64> = rotated.iter().map(|g| (0..rank).map(|a| part.weights[a] * g[(a, a)].re).sum()).collect();
        let total: Vec<f64> = grad.iter().zip(&y).map(|(g, yi)| g + DUAL_RIDGE * yi).collect();
        grad_norm = total.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < 1e-10 {
            break;
        }

        // Hessian of ln Z via divided differences of the exponential
        let mut kernel = vec![0.0; rank * rank];
        for a in 0..rank {
            for b in 0..rank {
                let (ea, eb) = (part.values[a], part.values[b]);
                kernel[a * rank + b] = if (ea - eb).abs() < 1e-12 {
                    part.weights[a]
                } else {
                    (part.weights[a] - part.weights[b]) / (ea - eb)
                };
            }
        }
        let mut hess = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for a in 0..rank {
                    for b in 0..rank {
                        acc += kernel[a * rank + b] * (rotated[i][(a, b)] * rotated[j][(b, a)]).re;
                    }
                }
                let hij = acc - grad[i] * grad[j];
                hess[i * m + j] = hij;
                hess[j * m + i] = hij;
            }
            hess[i * m + i] += DUAL_RIDGE;
        }
        let step: Vec<f64> = solve_real(&hess, &total)?.into_iter().map(|s| -s).collect();
        let slope: f64 = total.iter().zip(&step).map(|(g, s)| g * s).sum();

        let objective = |p: &Partition, y: &[f64]| p.log_z + 0.5 * DUAL_RIDGE * y.iter().map(|v| v * v).sum::<f64>();
        let f0 = objective(&part, &y);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(yi, si)| yi + t * si).collect();
            let p = partition(&hamiltonian(&trial))?;
            if objective(&p, &trial) <= f0 + 1e-4 * t * slope {
                accepted = Some((trial, p));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, p)) = accepted else { break };
        let improvement = f0 - objective(&p, &trial);
        let moved = gibbs_state(&p).max_abs_diff(&gibbs_state(&part));
        y = trial;
        part = p;
        // On a boundary optimum y runs off to infinity while W settles
        if grad_norm < 1e-8 && (improvement < 1e-13 || moved < 1e-12) {
            break;
        }
    }

    // W on the full space, then projected exactly onto the family span
    let w = q.matmul(&gibbs_state(&part))?.matmul(&q.adjoint())?.hermitian_part();
    let wc = real_coords(&h8, &w);
    let mut proj = vec![ZERO; 64];
    for s in &span {
        let coef: f64 = s.iter().zip(&wc).map(|(a, b)| a.re * b.re).sum();
        for (p, x) in proj.iter_mut().zip(s) {
            *p += r(coef * x.re);
        }
    }
    let w_proj = from_coords(&h8, &proj);
    let optimizer = w_proj.scale_re(1.0 / w_proj.trace().re);
    let converged = grad_norm < 1e-8;

    // A diverging dual means no PSD member lives on the reference's support;
    // the projected optimizer then carries the missing weight as negative
    // eigenvalues.
    if !converged {
        let negative: f64 = herm_eig(&optimizer)?.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        if negative > SUPPORT_TOL {
            return Err(Error::SupportMismatch(negative));
        }
    }
    let dual_bound = -part.log_z;
    Ok(NonMarkovResult {
        n_value: relative_entropy_mat(&w, &reference.mat)?,
        optimizer: ChoiState::new(optimizer, fam.base.normalization)?,
        dual_bound,
        converged,
        iterations,
    })
}

/// Rescales a family member (e.g. a normalized optimizer) so its outputs
/// are comparable with the conditioned data: the coefficient of `base` is
/// set to one.
pub fn rescale_to_family(fam: &ChoiFamily, member: &CMatrix) -> Result<CMatrix> {
    let h8 = herm8_basis();
    let dirs: Vec<Vec<C64>> = fam.directions.iter().map(|d| real_coords(&h8, d)).collect();
    let (dir_span, _) = span_and_complement(&dirs, 64, 1e-10);
    let perp = |m: &CMatrix| {
        let mut c = real_coords(&h8, m);
        for s in &dir_span {
            let coef: f64 = s.iter().zip(&c).map(|(a, b)| a.re * b.re).sum();
            for (ci, x) in c.iter_mut().zip(s) {
                *ci -= r(coef * x.re);
            }
        }
        c
    };
    let b = perp(&fam.base.mat);
    let bb: f64 = b.iter().map(|x| x.re * x.re).sum();
    let s: f64 = perp(member).iter().zip(&b).map(|(x, y)| x.re * y.re).sum::<f64>() / bb;
    if s.abs() < 1e-300 {
        return Err(Error::Singular("member has no component along the base".into()));
    }
    Ok(member.scale_re(1.0 / s))
}

/// Outcome of one θ point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Converged,
    NotConverged,
    /// `p(A₀)` below [`MIN_BRANCH_PROB`]; no value.
    VanishingBranch,
    /// No PSD family member lies on the reference's support, so the
    /// distance is infinite; no value.
    SupportMismatch,
}

impl PointStatus {
    pub fn name(self) -> &'static str {
        match self {
            PointStatus::Converged => "converged",
            PointStatus::NotConverged => "not-converged",
            PointStatus::VanishingBranch => "vanishing-branch",
            PointStatus::SupportMismatch => "support-mismatch",
        }
    }
}

/// One point of a θ sweep; `n_value` is absent unless the minimization ran.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub theta: f64,
    pub n_value: Option<f64>,
    pub status: PointStatus,
    pub iterations: usize,
}

/// Default sweep: 13 points uniformly spaced on `[0, 11π/12]`, stopping
/// short of the vanishing branch at π.
pub fn default_theta_grid() -> Vec<f64> {
    let end = 11.0 * std::f64::consts::PI / 12.0;
    (0..13).map(|k| end * k as f64 / 12.0).collect()
}

/// Non-Markovianity of the last step for each first intervention `P(θ)`.
pub fn sweep_theta(spec: &ProcessSpec, records: &[TomoRecord], thetas: &[f64]) -> Result<Vec<SweepPoint>> {
    let t = fit_restricted_tensor(records)?;
    par_map(thetas, |&theta| {
        let a0 = Projector::zy_plane(theta);
        let absent = |status| SweepPoint { theta, n_value: None, status, iterations: 0 };
        let res = family_from_tensor(&t, &a0).and_then(|fam| {
            let reference = uncorrelated_choi(spec, &a0)?;
            minimize_nonmarkovianity(&fam, &reference)
        });
        match res {
            Ok(res) => Ok(SweepPoint {
                theta,
                n_value: Some(res.n_value),
                status: if res.converged { PointStatus::Converged } else { PointStatus::NotConverged },
                iterations: res.iterations,
            }),
            Err(Error::VanishingBranch(_)) => Ok(absent(PointStatus::VanishingBranch)),
            Err(Error::SupportMismatch(_)) => Ok(absent(PointStatus::SupportMismatch)),
            Err(e) => Err(e),
        }
    })
    .into_iter()
    .collect()
}

/// Which last-step map a Bloch cloud is pushed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// The fitted process tensor conditioned on the first intervention.
    ProcessTensor,
    /// The reduced last-step map with the environment at its branch average.
    MarkovMap,
}

/// One output of a Bloch-cloud sweep, tagged with the sampled `A₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPoint {
    pub a1_theta: f64,
    pub a1_phi: f64,
    pub bloch: [f64; 3],
}

/// Deterministic, nearly uniform directions on the sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Output Bloch vectors of the last step for `n_samples` interventions `A₁`.
///
/// Samples whose output has negligible probability are skipped.
pub fn bloch_volume(
    kind: MapKind,
    spec: &ProcessSpec,
    tensor: &RestrictedProcessTensor,
    theta: f64,
    n_samples: usize,
) -> Result<Vec<BlochPoint>> {
    let a0 = Projector::zy_plane(theta);
    let a0_vec = action_from_coeffs(&expand_in_basis(&a0)?);
    let env = match kind {
        MapKind::MarkovMap => {
            let branch = first_step_branch(spec, &a0)?;
            Some(partial_trace(&branch, 2, 2, Subsystem::B)?)
        }
        MapKind::ProcessTensor => None,
    };
    let mut points = Vec::with_capacity(n_samples);
    for n in fibonacci_sphere(n_samples) {
        let a1 = Projector::from_bloch(n);
        let out = match &env {
            None => tensor.contract(&action_from_coeffs(&expand_in_basis(&a1)?), &a0_vec)?,
            Some(e) => {
                let joint = spec.interact(spec.steps() - 1, &kron(a1.mat(), e));
                partial_trace(&joint, 2, 2, Subsystem::A)?
            }
        };
        let out = out.hermitian_part();
        if out.trace().re <= 1e-12 {
            continue;
        }
        let rho = DensityMatrix::new_unchecked(out);
        points.push(BlochPoint { a1_theta: a1.theta(), a1_phi: a1.phi(), bloch: rho.bloch() });
    }
    Ok(points)
}

//! Qubit states, gates, projective interventions and CP maps.
//!
//! Conventions used throughout the crate:
//! - two-qubit operators act on `S ⊗ E` (system first);
//! - the Pauli basis is ordered `(I, σx, σy, σz)`, and for two qubits the
//!   product basis index is `4 * a + b` for `σa ⊗ σb`;
//! - superoperators act on column-stacked `vec(ρ)`, so
//!   `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::qlinalg::{
    c, herm_eig, kron, mat_sqrt_psd, partial_trace, project_psd, r, solve, unvec, vec, CMatrix, Subsystem, C64,
    HERMITIAN_TOL, I, ONE, ZERO,
};

/// Single-qubit Pauli matrix: 0 = I, 1 = σx, 2 = σy, 3 = σz.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        0 => CMatrix::identity(2),
        1 => CMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]]),
        2 => CMatrix::from_rows(&[[ZERO, -I], [I, ZERO]]),
        3 => CMatrix::real_diag(&[1.0, -1.0]),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Pauli product basis for `nqubits` qubits in the crate ordering.
pub fn pauli_basis(nqubits: usize) -> Vec<CMatrix> {
    let mut basis = vec![CMatrix::identity(1)];
    for _ in 0..nqubits {
        basis = basis.iter().flat_map(|b| (0..4).map(move |k| kron(b, &pauli(k)))).collect();
    }
    basis
}

pub fn cnot() -> CMatrix {
    CMatrix::from_real_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0]])
}

pub fn cz() -> CMatrix {
    CMatrix::real_diag(&[1.0, 1.0, 1.0, -1.0])
}

/// Max entrywise deviation of `u^dagger u` from the identity.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (&u.adjoint() * u).max_abs_diff(&CMatrix::identity(u.rows()))
}

/// Rotation by `theta` about the in-plane axis with azimuth `phi + π/2`.
///
/// Maps `|0>` to `cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>` exactly.
pub fn rotation_gate(theta: f64, phi: f64) -> CMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    let (nx, ny) = (-phi.sin(), phi.cos());
    // cos(θ/2) I - i sin(θ/2) (nx σx + ny σy)
    CMatrix::from_rows(&[[r(co), c(0.0, -s) * c(nx, -ny)], [c(0.0, -s) * c(nx, ny), r(co)]])
}

/// Hermitian, PSD, trace-at-most-one state of one or two qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    nqubits: usize,
}

impl DensityMatrix {
    /// Validates the state invariants (subnormalized states are allowed).
    pub fn new(mat: CMatrix) -> Result<Self> {
        let nqubits = match (mat.rows(), mat.cols()) {
            (2, 2) => 1,
            (4, 4) => 2,
            (a, b) => return Err(Error::BadDims(format!("{a}x{b} is not a 1- or 2-qubit state"))),
        };
        let herr = mat.hermiticity_error();
        if herr > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herr));
        }
        let mat = mat.hermitian_part();
        let tr = mat.trace().re;
        if !(-1e-8..=1.0 + 1e-8).contains(&tr) {
            return Err(Error::NotPhysical(format!("trace {tr}")));
        }
        let min = *herm_eig(&mat)?.values.last().unwrap();
        if min < -1e-8 {
            return Err(Error::NotPhysical(format!("eigenvalue {min}")));
        }
        Ok(Self { mat, nqubits })
    }

    /// Skips validation; used for outputs of maps that may be unphysical
    /// estimates (e.g. a non-CP χ fitted from noisy data).
    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        let nqubits = if mat.rows() == 2 { 1 } else { 2 };
        Self { mat: mat.hermitian_part(), nqubits }
    }

    pub fn from_ket(ket: &[C64]) -> Result<Self> {
        Self::new(CMatrix::outer(ket))
    }

    /// `|0…0><0…0|`.
    pub fn ground(nqubits: usize) -> Self {
        let d = 1 << nqubits;
        let mut m = CMatrix::zeros(d, d);
        m[(0, 0)] = ONE;
        Self { mat: m, nqubits }
    }

    pub fn maximally_mixed(nqubits: usize) -> Self {
        let d = 1 << nqubits;
        Self { mat: CMatrix::identity(d).scale_re(1.0 / d as f64), nqubits }
    }

    /// Single-qubit state from a Bloch vector with `|r| <= 1`.
    pub fn from_bloch(v: [f64; 3]) -> Result<Self> {
        let m = &(&(&CMatrix::identity(2) + &pauli(1).scale_re(v[0])) + &pauli(2).scale_re(v[1]))
            + &pauli(3).scale_re(v[2]);
        Self::new(m.scale_re(0.5))
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Rescaled to unit trace; `None` when the trace is below `min_trace`.
    pub fn normalized(&self, min_trace: f64) -> Option<DensityMatrix> {
        let t = self.trace();
        (t > min_trace).then(|| Self { mat: self.mat.scale_re(1.0 / t), nqubits: self.nqubits })
    }

    /// Bloch vector `(Tr ρσx, Tr ρσy, Tr ρσz) / Tr ρ` of a single-qubit state.
    pub fn bloch(&self) -> [f64; 3] {
        assert_eq!(self.nqubits, 1, "Bloch vector of a multi-qubit state");
        let t = self.trace();
        let m = &self.mat;
        [2.0 * m[(0, 1)].re / t, -2.0 * m[(0, 1)].im / t, (m[(0, 0)].re - m[(1, 1)].re) / t]
    }

    /// Reduced state of the system (`keep = A`) or environment (`keep = B`).
    pub fn reduce(&self, keep: Subsystem) -> Result<DensityMatrix> {
        if self.nqubits != 2 {
            return Err(Error::BadDims("partial trace of a single-qubit state".into()));
        }
        Ok(Self::new_unchecked(partial_trace(&self.mat, 2, 2, keep)?))
    }
}

/// Rank-one projector `|p><p|` with `|p> = cos(θ/2)|0> + e^{iφ} sin(θ/2)|1>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    theta: f64,
    phi: f64,
    mat: CMatrix,
    label: Option<String>,
}

const S2: f64 = FRAC_1_SQRT_2;

/// Bloch directions of the named projectors. Cyclic pairs (`xy`, `yz`,
/// `zx`) sit on the internal bisector `(a + b)/√2`; the reversed pairs
/// (`yx`, `zy`, `xz`) on the exterior bisector `(a - b)/√2`.
const NAMED: [(&str, [f64; 3]); 18] = [
    ("x+", [1.0, 0.0, 0.0]),
    ("x-", [-1.0, 0.0, 0.0]),
    ("y+", [0.0, 1.0, 0.0]),
    ("y-", [0.0, -1.0, 0.0]),
    ("z+", [0.0, 0.0, 1.0]),
    ("z-", [0.0, 0.0, -1.0]),
    ("xy+", [S2, S2, 0.0]),
    ("xy-", [-S2, -S2, 0.0]),
    ("yz+", [0.0, S2, S2]),
    ("yz-", [0.0, -S2, -S2]),
    ("zx+", [S2, 0.0, S2]),
    ("zx-", [-S2, 0.0, -S2]),
    ("yx+", [-S2, S2, 0.0]),
    ("yx-", [S2, -S2, 0.0]),
    ("zy+", [0.0, -S2, S2]),
    ("zy-", [0.0, S2, -S2]),
    ("xz+", [S2, 0.0, -S2]),
    ("xz-", [-S2, 0.0, S2]),
];

/// The nine-element tomography basis.
pub const BASIS_LABELS: [&str; 9] = ["x+", "x-", "y+", "z+", "y-", "z-", "xy+", "xz+", "yz+"];

/// The eighteen-element over-complete benchmarking set.
pub const OVERCOMPLETE_LABELS: [&str; 18] = [
    "x+", "x-", "y+", "z+", "y-", "z-", "xy+", "xz+", "yz+", "xy-", "xz-", "yz-", "yx+", "zx+", "zy+", "yx-", "zx-",
    "zy-",
];

/// Six axis states used for state tomography, in `x+, x-, y+, y-, z+, z-` order.
pub const AXIS_LABELS: [&str; 6] = ["x+", "x-", "y+", "y-", "z+", "z-"];

impl Projector {
    pub fn new(theta: f64, phi: f64) -> Self {
        let (mut theta, mut phi) = (theta, phi);
        theta = theta.rem_euclid(2.0 * PI);
        if theta > PI {
            theta = 2.0 * PI - theta;
            phi += PI;
        }
        phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        let (s, co) = (theta / 2.0).sin_cos();
        let ket = [r(co), C64::from_polar(s, phi)];
        Self { theta, phi, mat: CMatrix::outer(&ket), label: None }
    }

    /// Projector onto the pure state with the given Bloch direction.
    pub fn from_bloch(n: [f64; 3]) -> Self {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let z = (n[2] / norm).clamp(-1.0, 1.0);
        let theta = z.acos();
        let phi = if n[0].abs() < 1e-15 && n[1].abs() < 1e-15 { 0.0 } else { n[1].atan2(n[0]) };
        Self::new(theta, phi)
    }

    /// Named axis or bisector projector, e.g. `"y-"` or `"zy+"`.
    pub fn named(label: &str) -> Result<Self> {
        let (_, n) = NAMED.iter().find(|(l, _)| *l == label).ok_or_else(|| Error::BadLabel(label.to_string()))?;
        let mut p = Self::from_bloch(*n);
        p.label = Some(label.to_string());
        Ok(p)
    }

    /// First-step intervention `P(θ)` swept in the z–y plane: `θ = 0` is
    /// `z+`, `θ = π/4` is `zy+` and `θ = π/2` is `y-`.
    pub fn zy_plane(theta: f64) -> Self {
        Self::new(theta, 1.5 * PI)
    }

    pub fn basis() -> Vec<Projector> {
        BASIS_LABELS.iter().map(|l| Self::named(l).unwrap()).collect()
    }

    pub fn overcomplete() -> Vec<Projector> {
        OVERCOMPLETE_LABELS.iter().map(|l| Self::named(l).unwrap()).collect()
    }

    pub fn axes() -> Vec<Projector> {
        AXIS_LABELS.iter().map(|l| Self::named(l).unwrap()).collect()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Label if named, otherwise `P(θ,φ)`.
    pub fn describe(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => format!("P({:.6},{:.6})", self.theta, self.phi),
        }
    }

    pub fn ket(&self) -> [C64; 2] {
        let (s, co) = (self.theta / 2.0).sin_cos();
        [r(co), C64::from_polar(s, self.phi)]
    }

    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        [st * self.phi.cos(), st * self.phi.sin(), ct]
    }

    /// Orthogonal complement `I - P`.
    pub fn complement(&self) -> Projector {
        let b = self.bloch();
        Self::from_bloch([-b[0], -b[1], -b[2]])
    }

    /// The target state `|p><p|` as a density matrix.
    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.mat.clone())
    }

    /// Column-stacked superoperator of `ρ ↦ PρP`, i.e. `conj(P) ⊗ P`.
    pub fn action(&self) -> CMatrix {
        kron(&self.mat.conj(), &self.mat)
    }

    /// `P` embedded on qubit `target` of an `nqubits` register.
    pub fn embed(&self, target: usize, nqubits: usize) -> Result<CMatrix> {
        match (nqubits, target) {
            (1, 0) => Ok(self.mat.clone()),
            (2, 0) => Ok(kron(&self.mat, &CMatrix::identity(2))),
            (2, 1) => Ok(kron(&CMatrix::identity(2), &self.mat)),
            _ => Err(Error::BadTarget { target, nqubits }),
        }
    }
}

/// Post-selected projection of one qubit: returns the subnormalized state
/// `(P ⊗ I) ρ (P ⊗ I)` and the outcome probability `Tr[(P ⊗ I) ρ]`.
pub fn apply_projector(rho: &DensityMatrix, p: &Projector, target: usize) -> Result<(DensityMatrix, f64)> {
    let full = p.embed(target, rho.nqubits())?;
    let out = full.sandwich(rho.mat())?;
    let prob = (&full * rho.mat()).trace().re;
    Ok((DensityMatrix::new_unchecked(out), prob))
}

/// Independent amplitude-damping and dephasing applied to every qubit.
///
/// Dephasing uses Kraus operators `{√(1-λ) I, √λ σz}`, which scale
/// coherences by `1 - 2λ`; `λ = 1/2` erases them completely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gamma_amp: f64,
    pub lambda_phase: f64,
}

impl NoiseSpec {
    pub fn new(gamma_amp: f64, lambda_phase: f64) -> Result<Self> {
        for (name, v) in [("gamma_amp", gamma_amp), ("lambda_phase", lambda_phase)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::NotPhysical(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { gamma_amp, lambda_phase })
    }

    pub fn is_trivial(&self) -> bool {
        self.gamma_amp == 0.0 && self.lambda_phase == 0.0
    }

    fn kraus_sets(&self) -> [Vec<CMatrix>; 2] {
        let g = self.gamma_amp;
        let l = self.lambda_phase;
        let amp =
            vec![CMatrix::real_diag(&[1.0, (1.0 - g).sqrt()]), CMatrix::from_real_rows(&[[0.0, g.sqrt()], [0.0, 0.0]])];
        let deph = vec![CMatrix::identity(2).scale_re((1.0 - l).sqrt()), pauli(3).scale_re(l.sqrt())];
        [amp, deph]
    }

    /// Applies the channels to a raw 2x2 or 4x4 operator.
    pub fn apply_mat(&self, m: &CMatrix) -> CMatrix {
        if self.is_trivial() {
            return m.clone();
        }
        let nq = if m.rows() == 2 { 1 } else { 2 };
        let mut out = m.clone();
        for set in self.kraus_sets() {
            for q in 0..nq {
                let mut acc = CMatrix::zeros(m.rows(), m.cols());
                for k in &set {
                    let full = match (nq, q) {
                        (1, _) => k.clone(),
                        (_, 0) => kron(k, &CMatrix::identity(2)),
                        _ => kron(&CMatrix::identity(2), k),
                    };
                    acc = &acc + &(&(&full * &out) * &full.adjoint());
                }
                out = acc;
            }
        }
        out
    }
}

pub fn apply_noise(rho: &DensityMatrix, spec: &NoiseSpec) -> DensityMatrix {
    DensityMatrix::new_unchecked(spec.apply_mat(rho.mat()))
}

/// Process matrix in the Pauli product basis:
/// `Λ(ρ) = Σ_mn χ_mn E_m ρ E_n^dagger`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    nqubits: usize,
    chi: CMatrix,
}

impl ChiMatrix {
    pub fn new(chi: CMatrix) -> Result<Self> {
        let nqubits = match (chi.rows(), chi.cols()) {
            (4, 4) => 1,
            (16, 16) => 2,
            (a, b) => return Err(Error::BadDims(format!("{a}x{b} χ matrix"))),
        };
        let herr = chi.hermiticity_error();
        if herr > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herr));
        }
        Ok(Self { nqubits, chi: chi.hermitian_part() })
    }

    pub fn nqubits(&self) -> usize {
        self.nqubits
    }

    pub fn chi(&self) -> &CMatrix {
        &self.chi
    }

    fn dim(&self) -> usize {
        1 << self.nqubits
    }

    /// χ of the CP map `ρ ↦ Σ_k K_k ρ K_k^dagger`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let d = kraus.first().ok_or_else(|| Error::BadDims("empty Kraus set".into()))?.rows();
        let nq = match d {
            2 => 1,
            4 => 2,
            _ => return Err(Error::BadDims(format!("{d}-dimensional Kraus operator"))),
        };
        let basis = pauli_basis(nq);
        let n = basis.len();
        let mut chi = CMatrix::zeros(n, n);
        for k in kraus {
            if k.rows() != d || k.cols() != d {
                return Err(Error::BadDims("Kraus operators of mixed size".into()));
            }
            let coeffs: Vec<C64> = basis.iter().map(|e| e.hs_inner(k) / d as f64).collect();
            for m in 0..n {
                for l in 0..n {
                    chi[(m, l)] += coeffs[m] * coeffs[l].conj();
                }
            }
        }
        Self::new(chi)
    }

    pub fn identity(nqubits: usize) -> Self {
        Self::from_kraus(&[CMatrix::identity(1 << nqubits)]).unwrap()
    }

    pub fn from_unitary(u: &CMatrix) -> Result<Self> {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn from_projector(p: &Projector) -> Self {
        Self::from_kraus(std::slice::from_ref(p.mat())).unwrap()
    }

    /// χ from a column-stacking superoperator `S` with `vec(Λ(ρ)) = S vec(ρ)`.
    pub fn from_superop(s: &CMatrix) -> Result<Self> {
        let nq = match s.rows() {
            4 => 1,
            16 => 2,
            n => return Err(Error::BadDims(format!("{n}x{n} superoperator"))),
        };
        let basis = pauli_basis(nq);
        let n = basis.len();
        let d2 = n as f64;
        let mut chi = CMatrix::zeros(n, n);
        for m in 0..n {
            for l in 0..n {
                let b = kron(&basis[l].conj(), &basis[m]);
                chi[(m, l)] = b.hs_inner(s) / d2;
            }
        }
        Self::new(chi.hermitian_part())
    }

    /// Column-stacking superoperator of the map.
    pub fn superop(&self) -> CMatrix {
        let basis = pauli_basis(self.nqubits);
        let n = basis.len();
        let mut s = CMatrix::zeros(n, n);
        for m in 0..n {
            for l in 0..n {
                let w = self.chi[(m, l)];
                if w.norm() == 0.0 {
                    continue;
                }
                s = &s + &kron(&basis[l].conj(), &basis[m]).scale(w);
            }
        }
        s
    }

    /// Applies the map to an arbitrary operator of matching dimension.
    pub fn apply_mat(&self, rho: &CMatrix) -> Result<CMatrix> {
        let d = self.dim();
        if rho.rows() != d || rho.cols() != d {
            return Err(Error::BadDims(format!(
                "{}-qubit χ on a {}x{} operator",
                self.nqubits,
                rho.rows(),
                rho.cols()
            )));
        }
        let out = self.superop().apply(&vec(rho))?;
        unvec(&out, d, d)
    }

    /// Max deviation of `Σ χ_mn E_n^dagger E_m` from the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let basis = pauli_basis(self.nqubits);
        let d = self.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (m, em) in basis.iter().enumerate() {
            for (l, el) in basis.iter().enumerate() {
                acc = &acc + &(&el.adjoint() * em).scale(self.chi[(m, l)]);
            }
        }
        acc.max_abs_diff(&CMatrix::identity(d))
    }

    /// Divided by its trace.
    pub fn normalized(&self) -> Self {
        let t = self.chi.trace().re;
        Self { nqubits: self.nqubits, chi: self.chi.scale_re(1.0 / t) }
    }

    /// Nearest CP map (eigenvalues of χ clipped at zero).
    pub fn psd_projected(&self) -> Result<Self> {
        Ok(Self { nqubits: self.nqubits, chi: project_psd(&self.chi)? })
    }

    /// Choi matrix `Σ_ij |i><j| ⊗ Λ(|i><j|)` (input factor first).
    pub fn choi(&self) -> CMatrix {
        superop_to_choi(&self.superop())
    }
}

/// Reshuffles a column-stacking superoperator into its Choi matrix
/// `Σ_ij |i><j| ⊗ Λ(|i><j|)`.
pub fn superop_to_choi(s: &CMatrix) -> CMatrix {
    let d2 = s.rows();
    let d = (d2 as f64).sqrt().round() as usize;
    let mut choi = CMatrix::zeros(d2, d2);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    // Λ(|i><j|)[k, l] = S[l*d + k, j*d + i]
                    choi[(i * d + k, j * d + l)] = s[(l * d + k, j * d + i)];
                }
            }
        }
    }
    choi
}

/// Least-squares χ from input/output pairs (outputs may be subnormalized).
pub fn chi_from_process(pairs: &[(DensityMatrix, DensityMatrix)]) -> Result<ChiMatrix> {
    let (first, _) = pairs.first().ok_or(Error::InsufficientBasis { rank: 0, needed: 4 })?;
    let d = first.mat().rows();
    let d2 = d * d;
    if pairs.iter().any(|(a, b)| a.mat().rows() != d || b.mat().rows() != d) {
        return Err(Error::BadDims("input/output pairs of mixed size".into()));
    }
    let n = pairs.len();
    let mut x = CMatrix::zeros(d2, n);
    let mut y = CMatrix::zeros(d2, n);
    for (col, (rin, rout)) in pairs.iter().enumerate() {
        for (row, (a, b)) in vec(rin.mat()).into_iter().zip(vec(rout.mat())).enumerate() {
            x[(row, col)] = a;
            y[(row, col)] = b;
        }
    }
    let gram = &x * &x.adjoint();
    let spectrum = herm_eig(&gram)?.values;
    let top = spectrum[0].max(f64::MIN_POSITIVE);
    let rank = spectrum.iter().filter(|&&v| v > 1e-10 * top).count();
    if rank < d2 {
        return Err(Error::InsufficientBasis { rank, needed: d2 });
    }
    // S gram = y x^dagger  =>  gram S^dagger = x y^dagger
    let s_adj = solve(&gram, &(&x * &y.adjoint()))?;
    ChiMatrix::from_superop(&s_adj.adjoint())
}

pub fn apply_chi(chi: &ChiMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if chi.nqubits() != rho.nqubits() {
        return Err(Error::BadDims(format!("{}-qubit χ on a {}-qubit state", chi.nqubits(), rho.nqubits())));
    }
    Ok(DensityMatrix::new_unchecked(chi.apply_mat(rho.mat())?))
}

/// `Tr[χ_ideal χ]` after normalizing both matrices to unit trace.
pub fn chi_fidelity(chi: &ChiMatrix, chi_ideal: &ChiMatrix) -> Result<f64> {
    if chi.nqubits() != chi_ideal.nqubits() {
        return Err(Error::BadDims("χ matrices of different size".into()));
    }
    let a = chi.normalized();
    let b = chi_ideal.normalized();
    Ok((b.chi() * a.chi()).trace().re)
}

/// Product input states used for process tomography: the six axis states
/// for one qubit, all 36 products for two.
pub fn tomography_inputs(nqubits: usize) -> Vec<DensityMatrix> {
    let axes: Vec<CMatrix> = Projector::axes().into_iter().map(|p| p.mat().clone()).collect();
    match nqubits {
        1 => axes.into_iter().map(DensityMatrix::new_unchecked).collect(),
        _ => axes.iter().flat_map(|a| axes.iter().map(move |b| DensityMatrix::new_unchecked(kron(a, b)))).collect(),
    }
}

/// χ of a known CP map, obtained by probing it on the tomography inputs.
pub fn chi_of_map(nqubits: usize, map: impl Fn(&CMatrix) -> CMatrix) -> Result<ChiMatrix> {
    let pairs: Vec<_> = tomography_inputs(nqubits)
        .into_iter()
        .map(|rho| {
            let out = DensityMatrix::new_unchecked(map(rho.mat()));
            (rho, out)
        })
        .collect();
    chi_from_process(&pairs)
}

/// Reduced map `ρ_S ↦ Tr_E[u (ρ_S ⊗ ρ_E) u^dagger]` of a joint unitary.
pub fn reduced_map(u: &CMatrix, rho_env: &DensityMatrix) -> Result<ChiMatrix> {
    reduced_map_with_noise(u, rho_env, None)
}

/// As [`reduced_map`], with the joint noise channel applied after `u`.
pub fn reduced_map_with_noise(u: &CMatrix, rho_env: &DensityMatrix, noise: Option<&NoiseSpec>) -> Result<ChiMatrix> {
    if u.rows() != 4 || u.cols() != 4 || rho_env.nqubits() != 1 {
        return Err(Error::BadDims("reduced map needs a 4x4 unitary and a 1-qubit environment".into()));
    }
    let err = unitarity_error(u);
    if err > 1e-8 {
        return Err(Error::NotUnitary(err));
    }
    let env = rho_env.mat().clone();
    chi_of_map(1, |rs| {
        let joint = u.sandwich(&kron(rs, &env)).unwrap();
        let joint = match noise {
            Some(n) => n.apply_mat(&joint),
            None => joint,
        };
        partial_trace(&joint, 2, 2, Subsystem::A).unwrap()
    })
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.nqubits() != sigma.nqubits() {
        return Err(Error::BadDims("states of different size".into()));
    }
    for t in [rho.trace(), sigma.trace()] {
        if (t - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized(t));
        }
    }
    let sr = mat_sqrt_psd(rho.mat())?;
    let inner = sr.sandwich(sigma.mat())?;
    let root_trace = mat_sqrt_psd(&inner)?.trace().re;
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ket_overlap(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
    }

    fn apply_ket(u: &CMatrix, ket: &[C64]) -> Vec<C64> {
        u.apply(ket).unwrap()
    }

    #[test]
    fn rotation_gate_examples() {
        let z0 = [ONE, ZERO];
        for phi in [0.0, 0.7, 2.0] {
            let u = rotation_gate(0.0, phi);
            assert!(u.max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        }
        let out = apply_ket(&rotation_gate(PI, 0.0), &z0);
        assert!((ket_overlap(&out, &[ZERO, ONE]) - 1.0).abs() < 1e-12);
        let out = apply_ket(&rotation_gate(PI / 2.0, -PI / 2.0), &z0);
        let expected = [r(S2), c(0.0, -S2)];
        // exact, not only up to phase
        assert!((out[0] - expected[0]).norm() < 1e-15 && (out[1] - expected[1]).norm() < 1e-15);
    }

    #[test]
    fn rotation_gate_prepares_parameterized_state() {
        for (theta, phi) in [(0.3, 1.1), (2.5, -0.4), (PI, 4.0)] {
            let u = rotation_gate(theta, phi);
            assert!(unitarity_error(&u) < 1e-12);
            let out = apply_ket(&u, &[ONE, ZERO]);
            let want = Projector::new(theta, phi).ket();
            assert!((out[0] - want[0]).norm() < 1e-12);
            assert!((out[1] - want[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn projector_examples() {
        let p = Projector::new(0.0, 0.0);
        assert!(p.mat().max_abs_diff(&CMatrix::real_diag(&[1.0, 0.0])) < 1e-15);
        assert!(Projector::named("z+").unwrap().mat().max_abs_diff(p.mat()) < 1e-15);
        let p = Projector::new(PI, 0.0);
        assert!(p.mat().max_abs_diff(&CMatrix::real_diag(&[0.0, 1.0])) < 1e-15);

        let zy = Projector::named("zy+").unwrap();
        let (s8, c8) = (PI / 8.0).sin_cos();
        let want = CMatrix::outer(&[r(c8), c(0.0, -s8)]);
        assert!(zy.mat().max_abs_diff(&want) < 1e-15);
        assert!((zy.theta() - PI / 4.0).abs() < 1e-15);
        assert!(zy.mat().max_abs_diff(Projector::zy_plane(PI / 4.0).mat()) < 1e-15);

        let ym = Projector::named("y-").unwrap();
        assert!(ym.mat().max_abs_diff(Projector::zy_plane(PI / 2.0).mat()) < 1e-15);
        assert!(matches!(Projector::named("w+"), Err(Error::BadLabel(_))));
    }

    #[test]
    fn named_projectors_are_rank_one_and_paired() {
        for p in Projector::overcomplete() {
            let m = p.mat();
            assert!((m * m).max_abs_diff(m) < 1e-10);
            assert!((m.trace() - ONE).norm() < 1e-10);
            let sum = m + p.complement().mat();
            assert!(sum.max_abs_diff(&CMatrix::identity(2)) < 1e-10);
            let label = p.label().unwrap();
            let flipped = if let Some(stem) = label.strip_suffix('+') {
                format!("{stem}-")
            } else {
                format!("{}+", &label[..label.len() - 1])
            };
            let q = Projector::named(&flipped).unwrap();
            assert!((m + q.mat()).max_abs_diff(&CMatrix::identity(2)) < 1e-10);
        }
    }

    #[test]
    fn apply_projector_examples() {
        let ground = DensityMatrix::ground(1);
        let (out, p) = apply_projector(&ground, &Projector::named("z+").unwrap(), 0).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(out.mat().max_abs_diff(ground.mat()) < 1e-15);
        let (out, p) = apply_projector(&ground, &Projector::named("z-").unwrap(), 0).unwrap();
        assert!(p.abs() < 1e-15 && out.mat().max_abs() < 1e-15);
        assert!(matches!(apply_projector(&ground, &Projector::named("z-").unwrap(), 1), Err(Error::BadTarget { .. })));
    }

    #[test]
    fn projecting_one_half_of_a_bell_pair() {
        // statevector oracle: <+|_S (|00> - i|11>)/√2 = (|0> - i|1>)/2
        let mes = DensityMatrix::from_ket(&[r(S2), ZERO, ZERO, c(0.0, -S2)]).unwrap();
        let xp = Projector::named("x+").unwrap();
        let (out, p) = apply_projector(&mes, &xp, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        let env = out.reduce(Subsystem::B).unwrap().normalized(1e-12).unwrap();
        let want = DensityMatrix::from_ket(&[r(S2), c(0.0, -S2)]).unwrap();
        assert!(env.mat().max_abs_diff(want.mat()) < 1e-14);
    }

    #[test]
    fn gate_constants() {
        assert!(unitarity_error(&cz()) < 1e-15);
        assert!(unitarity_error(&cnot()) < 1e-15);
        // S control, E target
        let ket10 = [ZERO, ZERO, ONE, ZERO];
        let out = cnot().apply(&ket10).unwrap();
        assert_eq!(out, vec![ZERO, ZERO, ZERO, ONE]);
        let ket01 = [ZERO, ONE, ZERO, ZERO];
        assert_eq!(cnot().apply(&ket01).unwrap(), ket01.to_vec());
    }

    fn axis_pairs(map: impl Fn(&CMatrix) -> CMatrix) -> Vec<(DensityMatrix, DensityMatrix)> {
        tomography_inputs(1)
            .into_iter()
            .map(|rho| {
                let out = DensityMatrix::new_unchecked(map(rho.mat()));
                (rho, out)
            })
            .collect()
    }

    #[test]
    fn chi_from_process_examples() {
        let chi = chi_from_process(&axis_pairs(|m| m.clone())).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = ONE;
        assert!(chi.chi().max_abs_diff(&want) < 1e-12);

        let ym = Projector::named("y-").unwrap();
        let chi = chi_from_process(&axis_pairs(|m| ym.mat().sandwich(m).unwrap())).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(0, 0)] = r(0.25);
        want[(0, 2)] = r(-0.25);
        want[(2, 0)] = r(-0.25);
        want[(2, 2)] = r(0.25);
        assert!(chi.chi().max_abs_diff(&want) < 1e-12);

        let z = pauli(3);
        let chi = chi_from_process(&axis_pairs(|m| z.sandwich(m).unwrap())).unwrap();
        let mut want = CMatrix::zeros(4, 4);
        want[(3, 3)] = ONE;
        assert!(chi.chi().max_abs_diff(&want) < 1e-12);

        let short = &axis_pairs(|m| m.clone())[..3];
        assert!(matches!(chi_from_process(short), Err(Error::InsufficientBasis { .. })));
    }

    #[test]
    fn apply_chi_examples() {
        let plus = Projector::named("x+").unwrap().state();
        let id = ChiMatrix::identity(1);
        assert!(apply_chi(&id, &plus).unwrap().mat().max_abs_diff(plus.mat()) < 1e-14);

        let zchi = ChiMatrix::from_unitary(&pauli(3)).unwrap();
        let minus = Projector::named("x-").unwrap().state();
        assert!(apply_chi(&zchi, &plus).unwrap().mat().max_abs_diff(minus.mat()) < 1e-14);

        // oracle: direct P ρ P for ρ = |0><0|
        let ym = Projector::named("y-").unwrap();
        let ground = DensityMatrix::ground(1);
        let direct = ym.mat().sandwich(ground.mat()).unwrap();
        let out = apply_chi(&ChiMatrix::from_projector(&ym), &ground).unwrap();
        assert!(out.mat().max_abs_diff(&direct) < 1e-14);
        assert!(out.mat().max_abs_diff(&ym.mat().scale_re(0.5)) < 1e-14);

        assert!(apply_chi(&id, &DensityMatrix::ground(2)).is_err());
    }

    #[test]
    fn chi_fidelity_examples() {
        let x = ChiMatrix::from_unitary(&pauli(1)).unwrap();
        assert!((chi_fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-14);
        let i = ChiMatrix::identity(1);
        let z = ChiMatrix::from_unitary(&pauli(3)).unwrap();
        assert!(chi_fidelity(&i, &z).unwrap().abs() < 1e-14);
        // non-TP projector map normalizes to fidelity 1 against itself
        let ym = ChiMatrix::from_projector(&Projector::named("y-").unwrap());
        assert!((chi_fidelity(&ym.scale_for_test(0.4), &ym).unwrap() - 1.0).abs() < 1e-14);
    }

    impl ChiMatrix {
        fn scale_for_test(&self, k: f64) -> Self {
            Self { nqubits: self.nqubits, chi: self.chi.scale_re(k) }
        }
    }

    #[test]
    fn reduced_cz_maps() {
        let ground = DensityMatrix::ground(1);
        let id = ChiMatrix::identity(1);
        let chi = reduced_map(&cz(), &ground).unwrap();
        assert!(chi.chi().max_abs_diff(id.chi()) < 1e-9);

        let excited = Projector::named("z-").unwrap().state();
        let chi = reduced_map(&cz(), &excited).unwrap();
        let zchi = ChiMatrix::from_unitary(&pauli(3)).unwrap();
        assert!(chi.chi().max_abs_diff(zchi.chi()) < 1e-9);

        let ym = Projector::named("y-").unwrap().state();
        let chi = reduced_map(&cz(), &ym).unwrap();
        let half = &id.chi().scale_re(0.5) + &zchi.chi().scale_re(0.5);
        assert!(chi.chi().max_abs_diff(&half) < 1e-9);

        let not_unitary = CMatrix::real_diag(&[1.0, 1.0, 1.0, 0.5]);
        assert!(matches!(reduced_map(&not_unitary, &ground), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn two_qubit_chi_of_cz() {
        let chi = ChiMatrix::from_unitary(&cz()).unwrap();
        // (II + IZ + ZI - ZZ) / 2
        let idx = [0usize, 3, 12, 15];
        let sign = [1.0, 1.0, 1.0, -1.0];
        for (a, sa) in idx.iter().zip(sign) {
            for (b, sb) in idx.iter().zip(sign) {
                assert!((chi.chi()[(*a, *b)] - r(0.25 * sa * sb)).norm() < 1e-14);
            }
        }
        assert!(chi.trace_preservation_error() < 1e-12);
        let fitted = chi_of_map(2, |m| cz().sandwich(m).unwrap()).unwrap();
        assert!(fitted.chi().max_abs_diff(chi.chi()) < 1e-10);
    }

    #[test]
    fn state_fidelity_examples() {
        let plus = Projector::named("x+").unwrap().state();
        assert!((state_fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-12);
        let z0 = DensityMatrix::ground(1);
        let z1 = Projector::named("z-").unwrap().state();
        assert!(state_fidelity(&z0, &z1).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!((state_fidelity(&mixed, &plus).unwrap() - 0.5).abs() < 1e-12);
        let sub = DensityMatrix::new(z0.mat().scale_re(0.5)).unwrap();
        assert!(matches!(state_fidelity(&sub, &z0), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn noise_examples() {
        let plus = Projector::named("x+").unwrap().state();
        let none = NoiseSpec::new(0.0, 0.0).unwrap();
        assert!(apply_noise(&plus, &none).mat().max_abs_diff(plus.mat()) < 1e-15);
        let decay = NoiseSpec::new(1.0, 0.0).unwrap();
        let one = Projector::named("z-").unwrap().state();
        assert!(apply_noise(&one, &decay).mat().max_abs_diff(DensityMatrix::ground(1).mat()) < 1e-15);
        let deph = NoiseSpec::new(0.0, 0.5).unwrap();
        let out = apply_noise(&plus, &deph);
        assert!(out.mat().max_abs_diff(DensityMatrix::maximally_mixed(1).mat()) < 1e-15);
        assert!(NoiseSpec::new(1.5, 0.0).is_err());
    }

    #[test]
    fn choi_of_projector_action_is_product() {
        for p in Projector::basis() {
            let choi = ChiMatrix::from_projector(&p).choi();
            let want = kron(&p.mat().conj(), p.mat());
            assert!(choi.max_abs_diff(&want) < 1e-12);
        }
    }

    fn arb_state(nq: usize) -> impl Strategy<Value = DensityMatrix> {
        let d = 1usize << nq;
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
            let a = CMatrix::new(d, d, v.into_iter().map(|(x, y)| c(x, y)).collect()).unwrap();
            let m = &a * &a.adjoint();
            let t = m.trace().re;
            DensityMatrix::new(m.scale_re(1.0 / t)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn projection_breaks_entanglement(rho in arb_state(2), theta in 0.0..PI, phi in 0.0..(2.0 * PI)) {
            let p = Projector::new(theta, phi);
            let (out, prob) = apply_projector(&rho, &p, 0).unwrap();
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&prob));
            let env = partial_trace(out.mat(), 2, 2, Subsystem::B).unwrap();
            let factorized = kron(p.mat(), &env);
            prop_assert!(out.mat().max_abs_diff(&factorized) < 1e-10);
        }

        #[test]
        fn reduced_maps_are_trace_preserving(env in arb_state(1)) {
            for u in [cz(), cnot()] {
                let chi = reduced_map(&u, &env).unwrap();
                prop_assert!(chi.trace_preservation_error() < 1e-8);
            }
        }

        #[test]
        fn fidelity_is_symmetric_and_bounded(a in arb_state(1), b in arb_state(1)) {
            let f1 = state_fidelity(&a, &b).unwrap();
            let f2 = state_fidelity(&b, &a).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&f1));
        }

        #[test]
        fn chi_fit_round_trip(kr in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8)) {
            let k1 = CMatrix::new(2, 2, kr[..4].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let k2 = CMatrix::new(2, 2, kr[4..].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
            let chi = ChiMatrix::from_kraus(&[k1, k2]).unwrap();
            let pairs: Vec<_> = tomography_inputs(1)
                .into_iter()
                .map(|rho| {
                    let out = apply_chi(&chi, &rho).unwrap();
                    (rho, out)
                })
                .collect();
            let fitted = chi_from_process(&pairs).unwrap();
            prop_assert!(fitted.chi().max_abs_diff(chi.chi()) < 1e-8);
        }
    }
}

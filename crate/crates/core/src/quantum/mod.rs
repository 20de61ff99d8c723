//! Dense statevector oracle for Pauli-generated product ansatzes.
//!
//! The cost is `C(θ) = ⟨0|U(θ)† H U(θ)|0⟩` with
//! `U(θ) = e^{−iθ_1 A_1} ⋯ e^{−iθ_p A_p}`, so gate `p` acts first. Writing
//! `U_{>j} = e^{−iθ_{j+1} A_{j+1}} ⋯ e^{−iθ_p A_p}` and
//! `Ã_j = U_{>j}† A_j U_{>j}`, one has `∂_j U = −i U Ã_j` and therefore
//! `∂_j C = i⟨0|[Ã_j, H']|0⟩` with `H' = U† H U`.

mod circuit;
mod pauli;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use circuit::{Ansatz, StateVector};
pub use pauli::PauliString;

use crate::error::{invalid_arg, invalid_config, AletError, Result};
use crate::noise::{rad, NoisyEstimate};
use crate::oracle::CostOracle;
use crate::torus::TorusPoint;

/// Default register limit for dense simulation.
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Default finite-difference step for `K̇`.
pub const DEFAULT_KDOT_STEP: f64 = 1e-4;

/// Default relative threshold of the Gram-rank estimate.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

fn zero_c() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_register(n: usize, max_qubits: usize) -> Result<()> {
    if n > max_qubits {
        return Err(AletError::ResourceLimit(format!(
            "{n} qubits exceeds the dense-simulation limit of {max_qubits}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianTerm {
    pub pauli: PauliString,
    pub coeff: f64,
}

/// How to bound `‖H‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `Σ|c_k|`, by the triangle inequality.
    CoefficientSum,
    /// Spectral norm from a dense eigensolve.
    Dense,
}

#[derive(Debug, Clone, Deserialize)]
struct RawHamiltonian {
    terms: Vec<HamiltonianTerm>,
    #[serde(default)]
    lambda: Option<f64>,
}

/// Pauli-sum Hamiltonian with a known bound `Λ ≥ ‖H‖₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian")]
pub struct Hamiltonian {
    terms: Vec<HamiltonianTerm>,
    lambda: f64,
}

impl TryFrom<RawHamiltonian> for Hamiltonian {
    type Error = AletError;

    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        Hamiltonian::new(raw.terms, raw.lambda)
    }
}

impl Hamiltonian {
    /// Builds `H = Σ c_k P_k`. Without an explicit `Λ` the coefficient sum is
    /// used; an explicit `Λ` below it is checked against the dense norm.
    pub fn new(terms: Vec<HamiltonianTerm>, lambda: Option<f64>) -> Result<Self> {
        let n = terms
            .first()
            .ok_or_else(|| invalid_arg("Hamiltonian needs at least one term"))?
            .pauli
            .n_qubits();
        if let Some(t) = terms.iter().find(|t| t.pauli.n_qubits() != n) {
            return Err(invalid_arg(format!(
                "term {} acts on {} qubits, expected {n}",
                t.pauli,
                t.pauli.n_qubits()
            )));
        }
        if let Some(t) = terms.iter().find(|t| !t.coeff.is_finite()) {
            return Err(invalid_arg(format!("term {} has coefficient {}", t.pauli, t.coeff)));
        }
        let mut h = Self { terms, lambda: 0.0 };
        let sum = h.coefficient_sum();
        h.lambda = match lambda {
            None => sum,
            Some(l) if !(l > 0.0 && l.is_finite()) => {
                return Err(invalid_arg(format!("Λ = {l} must be positive")));
            }
            Some(l) if l >= sum => l,
            Some(l) => {
                let dense = lambda_bound(&h, LambdaMode::Dense, DEFAULT_MAX_QUBITS)?;
                if l < dense * (1.0 - 1e-12) {
                    return Err(invalid_arg(format!(
                        "Λ = {l} is below the spectral norm {dense}"
                    )));
                }
                l
            }
        };
        Ok(h)
    }

    pub fn n_qubits(&self) -> usize {
        self.terms[0].pauli.n_qubits()
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    /// The bound `Λ` in use.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![zero_c(); psi.len()];
        let mut buf = vec![zero_c(); psi.len()];
        for t in &self.terms {
            t.pauli.apply_into(psi, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b * t.coeff;
            }
        }
        out
    }

    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.pauli.expectation(psi))
            .sum()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits();
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.pauli.to_dense() * Complex64::new(t.coeff, 0.0);
        }
        m
    }
}

/// Upper bound on `‖H‖₂` by coefficient sum or dense eigensolve.
pub fn lambda_bound(h: &Hamiltonian, mode: LambdaMode, max_qubits: usize) -> Result<f64> {
    match mode {
        LambdaMode::CoefficientSum => Ok(h.coefficient_sum()),
        LambdaMode::Dense => {
            check_register(h.n_qubits(), max_qubits)?;
            let eig = SymmetricEigen::new(h.to_dense());
            Ok(eig.eigenvalues.iter().fold(0.0, |m: f64, e| m.max(e.abs())))
        }
    }
}

/// Number of eigenvalues of a symmetric matrix whose absolute value exceeds
/// `tol` times the largest absolute eigenvalue.
pub fn spectral_rank(m: DMatrix<f64>, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid_arg(format!("rank tolerance {tol} outside (0, 1)")));
    }
    let eig = SymmetricEigen::new(m).eigenvalues;
    let top = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok(eig.iter().filter(|e| e.abs() > tol * top).count())
}

/// `U(θ)|0…0⟩` for per-parameter angles `θ ∈ T^k`.
pub fn apply_ansatz(a: &Ansatz, theta: &[f64], max_qubits: usize) -> Result<StateVector> {
    check_register(a.n_qubits(), max_qubits)?;
    if theta.len() != a.n_params() {
        return Err(invalid_arg(format!(
            "θ has dimension {}, ansatz has {} parameters",
            theta.len(),
            a.n_params()
        )));
    }
    let angles = a.gate_angles(theta);
    let mut psi = StateVector::zero(a.n_qubits()).into_amplitudes();
    let mut scratch = vec![zero_c(); psi.len()];
    a.apply_range(&mut psi, &angles, 0, a.n_gates(), false, &mut scratch);
    Ok(StateVector::from_amplitudes(psi))
}

/// Variational cost oracle: an ansatz, a Hamiltonian and a register limit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumModel {
    ansatz: Ansatz,
    hamiltonian: Hamiltonian,
    max_qubits: usize,
}

impl QuantumModel {
    pub fn new(ansatz: Ansatz, hamiltonian: Hamiltonian) -> Result<Self> {
        Self::with_max_qubits(ansatz, hamiltonian, DEFAULT_MAX_QUBITS)
    }

    pub fn with_max_qubits(
        ansatz: Ansatz,
        hamiltonian: Hamiltonian,
        max_qubits: usize,
    ) -> Result<Self> {
        if ansatz.n_qubits() != hamiltonian.n_qubits() {
            return Err(invalid_arg(format!(
                "ansatz acts on {} qubits, Hamiltonian on {}",
                ansatz.n_qubits(),
                hamiltonian.n_qubits()
            )));
        }
        check_register(ansatz.n_qubits(), max_qubits)?;
        Ok(Self {
            ansatz,
            hamiltonian,
            max_qubits,
        })
    }

    pub fn ansatz(&self) -> &Ansatz {
        &self.ansatz
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.ansatz.n_params() {
            return Err(invalid_arg(format!(
                "θ has dimension {}, expected {}",
                theta.len(),
                self.ansatz.n_params()
            )));
        }
        Ok(())
    }

    fn check_direction(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.ansatz.n_params() {
            return Err(invalid_arg(format!(
                "direction has dimension {}, expected {}",
                v.len(),
                self.ansatz.n_params()
            )));
        }
        Ok(())
    }

    pub fn state(&self, theta: &[f64]) -> Result<StateVector> {
        apply_ansatz(&self.ansatz, theta, self.max_qubits)
    }

    pub fn energy(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.hamiltonian.expectation(self.state(theta)?.amplitudes()))
    }

    /// `2Λ √(Σ_c |c|²)`: each gate contributes at most `2Λ‖A_j‖ = 2Λ` to the
    /// derivative along its class. Untied this is `2Λ√p`.
    pub fn lipschitz_bound(&self) -> f64 {
        let s: f64 = self
            .ansatz
            .class_sizes()
            .iter()
            .map(|&c| (c * c) as f64)
            .sum();
        2.0 * self.hamiltonian.lambda() * s.sqrt()
    }

    /// Outcome width `R = 2Σ|c_k|` of the per-term shot model.
    pub fn outcome_range(&self) -> f64 {
        2.0 * self.hamiltonian.coefficient_sum()
    }

    /// Dense `Ã_j(θ)` for gate `j` (0-based).
    pub fn conjugated_generator(&self, j: usize, theta: &[f64]) -> Result<DMatrix<Complex64>> {
        self.check_theta(theta)?;
        if j >= self.ansatz.n_gates() {
            return Err(invalid_arg(format!(
                "gate index {j} out of range for {} gates",
                self.ansatz.n_gates()
            )));
        }
        let angles = self.ansatz.gate_angles(theta);
        let dim = 1usize << self.ansatz.n_qubits();
        let mut scratch = vec![zero_c(); dim];
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![zero_c(); dim];
        for col in 0..dim {
            e[col] = Complex64::new(1.0, 0.0);
            let out = self.ansatz.conjugated_apply(j, &angles, &e, &mut scratch);
            m.column_mut(col).copy_from_slice(&out);
            e[col] = zero_c();
        }
        Ok(m)
    }

    /// `K_θ(v) ψ = Σ_j v_{class(j)} Ã_j ψ`.
    fn k_apply(&self, angles: &[f64], v: &[f64], psi: &[Complex64]) -> Vec<Complex64> {
        let mut scratch = vec![zero_c(); psi.len()];
        let mut out = vec![zero_c(); psi.len()];
        for j in 0..self.ansatz.n_gates() {
            let w = v[self.ansatz.class_of(j)];
            if w == 0.0 {
                continue;
            }
            let t = self.ansatz.conjugated_apply(j, angles, psi, &mut scratch);
            for (o, x) in out.iter_mut().zip(&t) {
                *o += x * w;
            }
        }
        out
    }

    /// `H' ψ = U† H U ψ`.
    fn h_prime_apply(&self, angles: &[f64], psi: &[Complex64]) -> Vec<Complex64> {
        let p = self.ansatz.n_gates();
        let mut scratch = vec![zero_c(); psi.len()];
        let mut w = psi.to_vec();
        self.ansatz.apply_range(&mut w, angles, 0, p, false, &mut scratch);
        let mut out = self.hamiltonian.apply(&w);
        self.ansatz.apply_range(&mut out, angles, 0, p, true, &mut scratch);
        out
    }

    /// `∂_v C(θ) = i⟨0|[K, H']|0⟩ = −2 Im⟨0|K H'|0⟩`.
    pub fn directional_derivative(&self, theta: &[f64], v: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_direction(v)?;
        let angles = self.ansatz.gate_angles(theta);
        let zero = StateVector::zero(self.ansatz.n_qubits()).into_amplitudes();
        let a = self.k_apply(&angles, v, &zero);
        let b = self.h_prime_apply(&angles, &zero);
        Ok(-2.0 * inner(&a, &b).im)
    }

    /// `∂²_v C(θ) = −⟨[K,[K,H']]⟩ + i⟨[K̇, H']⟩`, with `K̇` from central
    /// differences of `K_{θ+tv}(v)` at step `step`.
    pub fn directional_second_derivative(&self, theta: &[f64], v: &[f64], step: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_direction(v)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid_arg(format!("finite-difference step {step} must be positive")));
        }
        let angles = self.ansatz.gate_angles(theta);
        let zero = StateVector::zero(self.ansatz.n_qubits()).into_amplitudes();
        let a = self.k_apply(&angles, v, &zero);
        let b = self.h_prime_apply(&angles, &zero);
        let kb = self.k_apply(&angles, v, &b);
        let ha = self.h_prime_apply(&angles, &a);
        let double = 2.0 * inner(&a, &kb).re - 2.0 * inner(&a, &ha).re;

        let shifted = |s: f64| {
            let th: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + s * step * d).collect();
            self.k_apply(&self.ansatz.gate_angles(&th), v, &zero)
        };
        let (plus, minus) = (shifted(1.0), shifted(-1.0));
        let a_dot: Vec<Complex64> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| (p - m) / (2.0 * step))
            .collect();
        Ok(-double - 2.0 * inner(&a_dot, &b).im)
    }

    /// Normalized Hilbert–Schmidt Gram matrix `Re tr(Ã_j Ã_k) / 2^n` over
    /// gates, accumulated one basis column at a time.
    pub fn gram_matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let angles = self.ansatz.gate_angles(theta);
        let p = self.ansatz.n_gates();
        let dim = 1usize << self.ansatz.n_qubits();
        let acc = (0..dim)
            .into_par_iter()
            .map(|col| {
                let mut e = vec![zero_c(); dim];
                e[col] = Complex64::new(1.0, 0.0);
                let mut scratch = vec![zero_c(); dim];
                let cols: Vec<Vec<Complex64>> = (0..p)
                    .map(|j| self.ansatz.conjugated_apply(j, &angles, &e, &mut scratch))
                    .collect();
                DMatrix::from_fn(p, p, |j, k| inner(&cols[j], &cols[k]).re)
            })
            .reduce(|| DMatrix::zeros(p, p), |a, b| a + b);
        Ok(acc / dim as f64)
    }

    /// Number of Gram eigenvalues above `tol` times the largest.
    pub fn effective_rank(&self, theta: &[f64], tol: f64) -> Result<usize> {
        spectral_rank(self.gram_matrix(theta)?, tol)
    }

    /// Central-difference Hessian of the cost at step `step`.
    pub fn fd_hessian(&self, theta: &[f64], step: f64) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid_arg(format!("finite-difference step {step} must be positive")));
        }
        let k = theta.len();
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let at = |si: f64, sj: f64| {
                    let mut x = theta.to_vec();
                    x[i] += si * step;
                    x[j] += sj * step;
                    self.energy(&x)
                };
                let v = (at(1.0, 1.0)? - at(1.0, -1.0)? - at(-1.0, 1.0)? + at(-1.0, -1.0)?)
                    / (4.0 * step * step);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// Mean of `n_shots` per-term measurement rounds, each outcome
    /// `Σ c_k s_k` with independent `s_k = ±1`, `P(+1) = (1 + ⟨P_k⟩)/2`.
    pub fn sample_energy(&self, theta: &[f64], n_shots: u64, rng: &mut dyn RngCore) -> Result<f64> {
        if n_shots == 0 {
            return Err(invalid_arg("n_shots must be at least 1"));
        }
        let psi = self.state(theta)?;
        let mut total = 0.0;
        for t in self.hamiltonian.terms() {
            let e = t.pauli.expectation(psi.amplitudes()).clamp(-1.0, 1.0);
            let ups = Binomial::new(n_shots, (1.0 + e) / 2.0)
                .map_err(|err| invalid_arg(format!("binomial parameters: {err}")))?
                .sample(rng);
            total += t.coeff * (2.0 * ups as f64 / n_shots as f64 - 1.0);
        }
        Ok(total)
    }

    /// Shot estimate with its Hoeffding radius at level `alpha` for the range
    /// `R = 2Σ|c_k|`.
    pub fn shot_sample(
        &self,
        theta: &[f64],
        n_shots: u64,
        alpha: f64,
        rng: &mut dyn RngCore,
    ) -> Result<NoisyEstimate> {
        let value = self.sample_energy(theta, n_shots, rng)?;
        Ok(NoisyEstimate {
            value,
            radius: rad(n_shots, alpha, self.outcome_range())?,
            level: alpha,
            n_shots,
        })
    }
}

impl CostOracle for QuantumModel {
    fn dim(&self) -> usize {
        self.ansatz.n_params()
    }

    fn cost(&self, theta: &TorusPoint) -> f64 {
        self.energy(theta.coords())
            .expect("θ dimension and register size are validated")
    }

    fn sample_mean(
        &self,
        theta: &TorusPoint,
        n_shots: u64,
        range: f64,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        let native = self.outcome_range();
        if range < native * (1.0 - 1e-12) {
            return Err(invalid_config(format!(
                "noise range {range} is below the shot outcome range {native}"
            )));
        }
        self.sample_energy(theta.coords(), n_shots, rng)
    }

    fn native_range(&self) -> Option<f64> {
        Some(self.outcome_range())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn ham(terms: &[(&str, f64)]) -> Hamiltonian {
        Hamiltonian::new(
            terms
                .iter()
                .map(|(s, c)| HamiltonianTerm { pauli: ps(s), coeff: *c })
                .collect(),
            None,
        )
        .unwrap()
    }

    fn xz() -> QuantumModel {
        QuantumModel::new(Ansatz::new(1, vec![ps("X")], None).unwrap(), ham(&[("Z", 1.0)])).unwrap()
    }

    fn random_pauli(rng: &mut ChaCha8Rng, n: usize) -> PauliString {
        loop {
            let s: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
            let p = ps(&s);
            if p.weight() > 0 {
                return p;
            }
        }
    }

    fn random_model(rng: &mut ChaCha8Rng) -> QuantumModel {
        let n = rng.random_range(1..=4);
        let p = rng.random_range(1..=8);
        let gens = (0..p).map(|_| random_pauli(rng, n)).collect();
        let terms = (0..rng.random_range(1..=4))
            .map(|_| HamiltonianTerm {
                pauli: random_pauli(rng, n),
                coeff: rng.random_range(-1.0..1.0),
            })
            .collect();
        QuantumModel::new(
            Ansatz::new(n, gens, None).unwrap(),
            Hamiltonian::new(terms, None).unwrap(),
        )
        .unwrap()
    }

    fn random_theta(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        (0..k).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
    }

    fn fd_cost(m: &QuantumModel, theta: &[f64], v: &[f64], s: f64) -> f64 {
        let th: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + s * d).collect();
        m.energy(&th).unwrap()
    }

    #[test]
    fn ansatz_examples() {
        let m = xz();
        let z = m.state(&[0.0]).unwrap();
        assert_eq!(z.amplitudes()[0], Complex64::new(1.0, 0.0));
        let s = m.state(&[PI / 2.0]).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn cost_examples() {
        let m = xz();
        assert!((m.energy(&[0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(m.energy(&[PI / 4.0]).unwrap().abs() < 1e-15);
        assert!((m.energy(&[PI / 2.0]).unwrap() + 1.0).abs() < 1e-15);
        for t in [0.3, 1.1, 2.9, 5.0] {
            assert!((m.energy(&[t]).unwrap() - (2.0 * t).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn register_limit() {
        let a = Ansatz::new(13, vec![ps("XIIIIIIIIIIII")], None).unwrap();
        let h = ham(&[("ZIIIIIIIIIIII", 1.0)]);
        assert!(matches!(
            QuantumModel::new(a.clone(), h.clone()),
            Err(AletError::ResourceLimit(_))
        ));
        assert!(matches!(
            apply_ansatz(&a, &[0.0], DEFAULT_MAX_QUBITS),
            Err(AletError::ResourceLimit(_))
        ));
        assert!(QuantumModel::with_max_qubits(a, h, 13).is_ok());
    }

    #[test]
    fn unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = random_model(&mut rng);
            let th = random_theta(&mut rng, m.ansatz().n_params());
            assert!((m.state(&th).unwrap().norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(xz().lipschitz_bound(), 2.0);
        let four = QuantumModel::new(
            Ansatz::new(2, vec![ps("XI"), ps("IX"), ps("YI"), ps("ZZ")], None).unwrap(),
            ham(&[("ZZ", 1.0)]),
        )
        .unwrap();
        assert_eq!(four.lipschitz_bound(), 4.0);
        let doubled = QuantumModel::new(
            four.ansatz().clone(),
            ham(&[("ZZ", 2.0)]),
        )
        .unwrap();
        assert_eq!(doubled.lipschitz_bound(), 8.0);
        let tied = QuantumModel::new(
            Ansatz::new(2, vec![ps("XI"), ps("IX"), ps("YI"), ps("ZZ")], Some(vec![0, 0, 0, 1])).unwrap(),
            ham(&[("ZZ", 1.0)]),
        )
        .unwrap();
        assert!((tied.lipschitz_bound() - 2.0 * 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lambda_examples() {
        let z = ham(&[("Z", 1.0)]);
        assert_eq!(lambda_bound(&z, LambdaMode::CoefficientSum, 12).unwrap(), 1.0);
        assert!((lambda_bound(&z, LambdaMode::Dense, 12).unwrap() - 1.0).abs() < 1e-14);
        let xz = ham(&[("X", 1.0), ("Z", 1.0)]);
        assert_eq!(lambda_bound(&xz, LambdaMode::CoefficientSum, 12).unwrap(), 2.0);
        assert!((lambda_bound(&xz, LambdaMode::Dense, 12).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let zz = ham(&[("ZZ", 0.5)]);
        assert_eq!(lambda_bound(&zz, LambdaMode::CoefficientSum, 12).unwrap(), 0.5);
        assert!((lambda_bound(&zz, LambdaMode::Dense, 12).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dense_never_exceeds_coefficient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let m = random_model(&mut rng);
            let h = m.hamiltonian();
            let dense = lambda_bound(h, LambdaMode::Dense, 12).unwrap();
            assert!(dense <= h.coefficient_sum() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn explicit_lambda_is_checked() {
        let terms = vec![
            HamiltonianTerm { pauli: ps("X"), coeff: 1.0 },
            HamiltonianTerm { pauli: ps("Z"), coeff: 1.0 },
        ];
        assert!(Hamiltonian::new(terms.clone(), Some(1.5)).is_ok());
        assert!(Hamiltonian::new(terms.clone(), Some(1.3)).is_err());
        assert!(Hamiltonian::new(terms, Some(-1.0)).is_err());
    }

    #[test]
    fn conjugated_generator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Ansatz::new(2, vec![ps("XI"), ps("ZY"), ps("YX")], None).unwrap();
        let m = QuantumModel::new(a, ham(&[("ZZ", 1.0)])).unwrap();
        let th = random_theta(&mut rng, 3);
        let last = m.conjugated_generator(2, &th).unwrap();
        assert!((last - ps("YX").to_dense()).norm() < 1e-14);
        for j in 0..3 {
            let g = m.conjugated_generator(j, &[0.0; 3]).unwrap();
            assert!((g - m.ansatz().generators()[j].to_dense()).norm() < 1e-14);
        }
        assert!(m.conjugated_generator(3, &th).is_err());

        // ZI commutes with the tail ZZ, IZ
        let c = Ansatz::new(2, vec![ps("ZI"), ps("ZZ"), ps("IZ")], None).unwrap();
        let m = QuantumModel::new(c, ham(&[("XX", 1.0)])).unwrap();
        let g = m.conjugated_generator(0, &th).unwrap();
        assert!((g - ps("ZI").to_dense()).norm() < 1e-14);
    }

    #[test]
    fn conjugated_generator_is_hermitian_with_pauli_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = random_model(&mut rng);
            let th = random_theta(&mut rng, m.ansatz().n_params());
            let j = rng.random_range(0..m.ansatz().n_gates());
            let g = m.conjugated_generator(j, &th).unwrap();
            assert!((&g - g.adjoint()).norm() < 1e-12);
            let sq = &g * &g;
            let id = DMatrix::<Complex64>::identity(g.nrows(), g.ncols());
            assert!((sq - id).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let m = xz();
        assert!(m.directional_derivative(&[0.0], &[1.0]).unwrap().abs() < 1e-15);
        let d = m.directional_derivative(&[PI / 8.0], &[1.0]).unwrap();
        assert!((d + 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(m.directional_derivative(&[0.7], &[0.0]).unwrap(), 0.0);
        let dd = m.directional_second_derivative(&[0.0], &[1.0], DEFAULT_KDOT_STEP).unwrap();
        assert!((dd + 4.0).abs() < 1e-12);
        let dd = m.directional_second_derivative(&[PI / 4.0], &[1.0], DEFAULT_KDOT_STEP).unwrap();
        assert!(dd.abs() < 1e-12);
        assert_eq!(
            m.directional_second_derivative(&[0.7], &[0.0], DEFAULT_KDOT_STEP).unwrap(),
            0.0
        );
        assert!(m.directional_derivative(&[0.1], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = random_model(&mut rng);
            let k = m.ansatz().n_params();
            let th = random_theta(&mut rng, k);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let fd = (fd_cost(&m, &th, &v, h) - fd_cost(&m, &th, &v, -h)) / (2.0 * h);
            let d = m.directional_derivative(&th, &v).unwrap();
            assert!((d - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{d} vs {fd}");
        }
    }

    #[test]
    fn second_derivative_matches_five_point_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let m = random_model(&mut rng);
            let k = m.ansatz().n_params();
            let th = random_theta(&mut rng, k);
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-3;
            let f = |s: f64| fd_cost(&m, &th, &v, s * h);
            let fd = (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0))
                / (12.0 * h * h);
            let dd = m
                .directional_second_derivative(&th, &v, DEFAULT_KDOT_STEP)
                .unwrap();
            assert!((dd - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{dd} vs {fd}");
        }
    }

    #[test]
    fn tied_derivatives_follow_class_sums() {
        let a = Ansatz::new(2, vec![ps("XI"), ps("ZY"), ps("IX"), ps("YY")], Some(vec![0, 1, 0, 1]))
            .unwrap();
        let m = QuantumModel::new(a, ham(&[("ZZ", 0.7), ("XI", -0.4)])).unwrap();
        let th = [0.4, 1.9];
        let v = [0.3, -0.8];
        let h = 1e-5;
        let fd = (fd_cost(&m, &th, &v, h) - fd_cost(&m, &th, &v, -h)) / (2.0 * h);
        assert!((m.directional_derivative(&th, &v).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn lipschitz_bound_is_sound_and_tight_for_single_qubit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m = random_model(&mut rng);
            let k = m.ansatz().n_params();
            let bound = m.lipschitz_bound();
            for _ in 0..2_000 {
                let th = random_theta(&mut rng, k);
                let g: f64 = (0..k)
                    .map(|i| {
                        let mut e = vec![0.0; k];
                        e[i] = 1.0;
                        m.directional_derivative(&th, &e).unwrap().powi(2)
                    })
                    .sum();
                assert!(g.sqrt() <= bound * (1.0 + 1e-12));
            }
        }
        let m = xz();
        let best = (0..1000)
            .map(|i| m.directional_derivative(&[i as f64 * 2.0 * PI / 1000.0], &[1.0]).unwrap().abs())
            .fold(0.0, f64::max);
        assert!(best >= 0.99 * m.lipschitz_bound());
    }

    #[test]
    fn effective_rank_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let same = Ansatz::new(2, vec![ps("XY"); 4], None).unwrap();
        let m = QuantumModel::new(same, ham(&[("ZZ", 1.0)])).unwrap();
        let th = random_theta(&mut rng, 4);
        assert_eq!(m.effective_rank(&th, DEFAULT_RANK_TOL).unwrap(), 1);

        let distinct = Ansatz::new(2, vec![ps("XI"), ps("ZY"), ps("IX"), ps("YY")], None).unwrap();
        let m = QuantumModel::new(distinct, ham(&[("ZZ", 1.0)])).unwrap();
        assert_eq!(m.effective_rank(&[0.0; 4], DEFAULT_RANK_TOL).unwrap(), 4);
        let g = m.gram_matrix(&[0.0; 4]).unwrap();
        assert!((g - DMatrix::<f64>::identity(4, 4)).norm() < 1e-14);

        // commuting templates tied into two classes
        let tied = Ansatz::new(
            2,
            vec![ps("ZI"), ps("IZ"), ps("ZI"), ps("IZ"), ps("ZI")],
            Some(vec![0, 1, 0, 1, 0]),
        )
        .unwrap();
        let m = QuantumModel::new(tied, ham(&[("XX", 1.0)])).unwrap();
        let th = random_theta(&mut rng, 2);
        assert_eq!(m.effective_rank(&th, DEFAULT_RANK_TOL).unwrap(), 2);
        assert!(m.effective_rank(&th, 0.0).is_err());
        assert!(m.effective_rank(&th, 1.0).is_err());
    }

    #[test]
    fn fd_hessian_of_single_qubit() {
        let m = xz();
        let h = m.fd_hessian(&[0.3], 1e-4).unwrap();
        assert!((h[(0, 0)] + 4.0 * 0.6f64.cos()).abs() < 1e-6);
        assert_eq!(spectral_rank(h, 1e-6).unwrap(), 1);
        let zero = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(spectral_rank(zero, 1e-6).unwrap(), 0);
    }

    #[test]
    fn fully_tied_circuits_collapse_to_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.random_range(1..=4);
            let g = random_pauli(&mut rng, n);
            let p = rng.random_range(1..=8);
            let a = Ansatz::new(n, vec![g; p], Some(vec![0; p])).unwrap();
            let h = Hamiltonian::new(
                vec![HamiltonianTerm { pauli: random_pauli(&mut rng, n), coeff: 1.0 }],
                None,
            )
            .unwrap();
            let m = QuantumModel::new(a, h).unwrap();
            let th = random_theta(&mut rng, 1);
            assert_eq!(m.effective_rank(&th, DEFAULT_RANK_TOL).unwrap(), 1);
        }
    }

    #[test]
    fn shot_sampling_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let m = random_model(&mut rng);
            let th = random_theta(&mut rng, m.ansatz().n_params());
            let exact = m.energy(&th).unwrap();
            let psi = m.state(&th).unwrap();
            let var: f64 = m
                .hamiltonian()
                .terms()
                .iter()
                .map(|t| t.coeff * t.coeff * (1.0 - t.pauli.expectation(psi.amplitudes()).powi(2)))
                .sum();
            let n = 100_000;
            let est = m.sample_energy(&th, n, &mut rng).unwrap();
            let se = (var / n as f64).sqrt();
            assert!((est - exact).abs() <= 4.0 * se + 1e-12, "{est} vs {exact} (se {se})");
        }
    }

    #[test]
    fn shot_sample_examples() {
        let m = xz();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // ⟨Z⟩ = 1 at θ = 0: no variance
        assert_eq!(m.sample_energy(&[0.0], 17, &mut rng).unwrap(), 1.0);
        let est = m.shot_sample(&[PI / 4.0], 100_000, 0.05, &mut rng).unwrap();
        assert!(est.value.abs() < 4.0 / 100_000f64.sqrt());
        assert_eq!(m.outcome_range(), 2.0);
        assert!((est.radius - rad(100_000, 0.05, 2.0).unwrap()).abs() < 1e-15);
        assert!(m.sample_energy(&[0.0], 0, &mut rng).is_err());
    }

    #[test]
    fn oracle_rejects_narrow_range() {
        let m = xz();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let th = TorusPoint::zeros(1);
        assert!(m.sample_mean(&th, 10, 1.0, &mut rng).is_err());
        assert!(m.sample_mean(&th, 10, 2.0, &mut rng).is_ok());
        assert_eq!(m.native_range(), Some(2.0));
    }

    #[test]
    fn specs_deserialize_from_text() {
        let a: Ansatz = serde_json::from_str(
            r#"{"n_qubits": 2, "generators": ["XZ", "IY"], "tying": [0, 0]}"#,
        )
        .unwrap();
        assert_eq!(a.n_params(), 1);
        let h: Hamiltonian =
            serde_json::from_str(r#"{"terms": [{"pauli": "ZZ", "coeff": 0.5}]}"#).unwrap();
        assert_eq!(h.lambda(), 0.5);
        assert!(serde_json::from_str::<Ansatz>(r#"{"n_qubits": 2, "generators": ["XQ"]}"#).is_err());
    }
}

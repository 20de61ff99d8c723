use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pauli::PauliString;
use crate::error::{invalid_arg, AletError, Result};

/// Dense state of an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The reference state `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }
}

/// `ψ ← e^{−iθP} ψ = cos θ ψ − i sin θ Pψ`. `scratch` must match `ψ` in length.
pub(crate) fn rotate(psi: &mut [Complex64], p: &PauliString, theta: f64, scratch: &mut [Complex64]) {
    p.apply_into(psi, scratch);
    let (s, c) = theta.sin_cos();
    let mis = Complex64::new(0.0, -s);
    for (a, pa) in psi.iter_mut().zip(scratch.iter()) {
        *a = *a * c + mis * pa;
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawAnsatz {
    n_qubits: usize,
    generators: Vec<PauliString>,
    #[serde(default)]
    tying: Option<Vec<usize>>,
}

/// Product ansatz `U(θ) = e^{−iθ_1 A_1} ⋯ e^{−iθ_p A_p}` with Pauli generators.
///
/// With tying, gate `j` uses the angle of class `tying[j]` and the parameter
/// torus is `T^k` for `k` classes. Gate and class indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAnsatz")]
pub struct Ansatz {
    n_qubits: usize,
    generators: Vec<PauliString>,
    tying: Option<Vec<usize>>,
    #[serde(skip)]
    classes: usize,
}

impl TryFrom<RawAnsatz> for Ansatz {
    type Error = AletError;

    fn try_from(raw: RawAnsatz) -> Result<Self> {
        Ansatz::new(raw.n_qubits, raw.generators, raw.tying)
    }
}

impl Ansatz {
    pub fn new(
        n_qubits: usize,
        generators: Vec<PauliString>,
        tying: Option<Vec<usize>>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(invalid_arg("ansatz needs at least one qubit"));
        }
        if generators.is_empty() {
            return Err(invalid_arg("ansatz needs at least one generator"));
        }
        if let Some((j, g)) = generators
            .iter()
            .enumerate()
            .find(|(_, g)| g.n_qubits() != n_qubits)
        {
            return Err(invalid_arg(format!(
                "generator {j} ({g}) acts on {} qubits, register has {n_qubits}",
                g.n_qubits()
            )));
        }
        let classes = match &tying {
            None => generators.len(),
            Some(t) => {
                if t.len() != generators.len() {
                    return Err(invalid_arg(format!(
                        "tying has {} entries for {} generators",
                        t.len(),
                        generators.len()
                    )));
                }
                let k = t.iter().max().map_or(0, |m| m + 1);
                let mut used = vec![false; k];
                for &c in t {
                    used[c] = true;
                }
                if let Some(c) = used.iter().position(|u| !u) {
                    return Err(invalid_arg(format!("tying class {c} has no gates")));
                }
                k
            }
        };
        Ok(Self {
            n_qubits,
            generators,
            tying,
            classes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// Number of gates `p`.
    pub fn n_gates(&self) -> usize {
        self.generators.len()
    }

    /// Dimension `k` of the parameter torus.
    pub fn n_params(&self) -> usize {
        self.classes
    }

    pub fn class_of(&self, gate: usize) -> usize {
        self.tying.as_ref().map_or(gate, |t| t[gate])
    }

    /// Per-gate angles for parameters `θ ∈ T^k`.
    pub fn gate_angles(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n_gates()).map(|j| theta[self.class_of(j)]).collect()
    }

    /// Class sizes `|c|`.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.classes];
        for j in 0..self.n_gates() {
            sizes[self.class_of(j)] += 1;
        }
        sizes
    }

    /// Applies gates `to − 1` down to `from`, i.e. `∏_{from ≤ j < to}` in
    /// circuit order, with angles negated when `inverse` (then in reverse).
    pub(crate) fn apply_range(
        &self,
        psi: &mut [Complex64],
        angles: &[f64],
        from: usize,
        to: usize,
        inverse: bool,
        scratch: &mut [Complex64],
    ) {
        let gates = self.generators[from..to].iter().zip(&angles[from..to]);
        if inverse {
            for (g, &a) in gates {
                rotate(psi, g, -a, scratch);
            }
        } else {
            for (g, &a) in gates.rev() {
                rotate(psi, g, a, scratch);
            }
        }
    }

    /// `Ã_j ψ = U_{>j}† A_j U_{>j} ψ`.
    pub(crate) fn conjugated_apply(
        &self,
        j: usize,
        angles: &[f64],
        psi: &[Complex64],
        scratch: &mut [Complex64],
    ) -> Vec<Complex64> {
        let p = self.n_gates();
        let mut w = psi.to_vec();
        self.apply_range(&mut w, angles, j + 1, p, false, scratch);
        let mut out = self.generators[j].apply(&w);
        self.apply_range(&mut out, angles, j + 1, p, true, scratch);
        out
    }
}

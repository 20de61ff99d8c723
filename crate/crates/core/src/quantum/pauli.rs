use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, AletError};

/// Unit-coefficient Pauli string on `n` qubits.
///
/// Letter `q` of the text form acts on qubit `q`, which is bit `n − 1 − q` of
/// a basis-state index (the first letter is the most significant bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub const MAX_QUBITS: usize = 63;

    pub fn identity(n: usize) -> Self {
        Self { n, x: 0, z: 0 }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// `i^{#Y}` phase shared by every basis state.
    fn base_phase(&self) -> Complex64 {
        match self.y_count() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    /// `out = P ψ`.
    pub fn apply_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let phase = self.base_phase();
        for (k, amp) in psi.iter().enumerate() {
            let sign = if (k as u64 & self.z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            out[(k as u64 ^ self.x) as usize] = phase * sign * amp;
        }
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut out);
        out
    }

    /// `⟨ψ|P|ψ⟩`, real because `P` is Hermitian.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let phase = self.base_phase();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, amp) in psi.iter().enumerate() {
            let sign = if (k as u64 & self.z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            acc += psi[(k as u64 ^ self.x) as usize].conj() * amp * sign;
        }
        (phase * acc).re
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        let phase = self.base_phase();
        for k in 0..dim {
            let sign = if (k as u64 & self.z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            m[((k as u64 ^ self.x) as usize, k)] = phase * sign;
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = AletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = s.chars().count();
        if n == 0 || n > Self::MAX_QUBITS {
            return Err(invalid_arg(format!(
                "Pauli string {s:?} must have 1 to {} letters",
                Self::MAX_QUBITS
            )));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (q, c) in s.chars().enumerate() {
            let bit = 1u64 << (n - 1 - q);
            match c {
                'I' => {}
                'X' => x |= bit,
                'Z' => z |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit;
                }
                _ => return Err(invalid_arg(format!("invalid Pauli letter {c:?} in {s:?}"))),
            }
        }
        Ok(Self { n, x, z })
    }
}

impl TryFrom<String> for PauliString {
    type Error = AletError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> String {
        p.to_string()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let bit = 1u64 << (self.n - 1 - q);
            let c = match (self.x & bit != 0, self.z & bit != 0) {
                (false, false) => 'I',
                (true, false) => 'X',
                (false, true) => 'Z',
                (true, true) => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

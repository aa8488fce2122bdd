use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::limits;
use crate::pauli::Pauli;

/// Normalized amplitudes over `n` qubits. Qubit 0 is the most significant bit of the index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

const NORM_TOL: f64 = 1e-10;

impl StateVector {
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(&BitString::zeros(n))
    }

    /// Computational basis state `|x⟩`.
    pub fn basis(x: &BitString) -> Result<Self> {
        let n = x.len();
        limits::check_qubits(n, "state vector")?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[x.to_index()] = C64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// Wraps raw amplitudes, checking length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "state length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        let norm = norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(StateVector { n, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let nrm = norm(&amps);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        amps.iter_mut().for_each(|a| *a /= nrm);
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Tensor product `self ⊗ other` (self on the leading qubits).
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let amps = kron(&self.amps, &other.amps);
        StateVector {
            n: self.n + other.n,
            amps,
        }
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Applies a single-qubit matrix to qubit `q` of an `n`-qubit register that is the leading
/// factor of a space `2^n ⊗ inner`.
pub(crate) fn apply_1q(amps: &mut [C64], n: usize, inner: usize, q: usize, m: &[[C64; 2]; 2]) {
    debug_assert_eq!(amps.len(), (1usize << n) * inner);
    let stride = inner << (n - 1 - q);
    let block = stride << 1;
    for base in (0..amps.len()).step_by(block) {
        for off in 0..stride {
            let i0 = base + off;
            let i1 = i0 + stride;
            let (a0, a1) = (amps[i0], amps[i1]);
            amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Two-qubit analogue of [`apply_1q`]; the local basis index is `(b_q0 << 1) | b_q1`.
pub(crate) fn apply_2q(
    amps: &mut [C64],
    n: usize,
    inner: usize,
    q0: usize,
    q1: usize,
    m: &[[C64; 4]; 4],
) {
    debug_assert_eq!(amps.len(), (1usize << n) * inner);
    let s0 = inner << (n - 1 - q0);
    let s1 = inner << (n - 1 - q1);
    let work = 1usize << n;
    for w in 0..work {
        let b0 = (w >> (n - 1 - q0)) & 1;
        let b1 = (w >> (n - 1 - q1)) & 1;
        if b0 != 0 || b1 != 0 {
            continue;
        }
        for c in 0..inner {
            let i00 = w * inner + c;
            let idx = [i00, i00 + s1, i00 + s0, i00 + s0 + s1];
            let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for (r, &ir) in idx.iter().enumerate() {
                amps[ir] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
            }
        }
    }
}

/// Index into the single-qubit stabilizer family `stab1 = {|0⟩,|1⟩,|+⟩,|−⟩,|y+⟩,|y−⟩}`.
pub const STAB1_LABELS: [&str; 6] = ["0", "1", "+", "-", "y+", "y-"];

/// Amplitudes of the `label`-th single-qubit stabilizer state.
pub fn stab1_state(label: u8) -> Result<[C64; 2]> {
    let h = FRAC_1_SQRT_2;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    Ok(match label {
        0 => [one, zero],
        1 => [zero, one],
        2 => [C64::new(h, 0.0), C64::new(h, 0.0)],
        3 => [C64::new(h, 0.0), C64::new(-h, 0.0)],
        4 => [C64::new(h, 0.0), C64::new(0.0, h)],
        5 => [C64::new(h, 0.0), C64::new(0.0, -h)],
        _ => {
            return Err(Error::invalid(format!(
                "stabilizer label {label} out of range 0..6"
            )))
        }
    })
}

/// `⟨s|P|s⟩` for a single-qubit stabilizer state; always one of `{-1, 0, 1}`.
pub fn stab1_expectation(label: u8, p: Pauli) -> f64 {
    let sign = if label % 2 == 0 { 1.0 } else { -1.0 };
    match (p, label / 2) {
        (Pauli::I, _) => 1.0,
        (Pauli::Z, 0) | (Pauli::X, 1) | (Pauli::Y, 2) => sign,
        _ => 0.0,
    }
}

/// Tensor product of single-qubit stabilizer states, one label per qubit.
pub fn prepare_stabilizer_product(labels: &[u8]) -> Result<StateVector> {
    if labels.is_empty() {
        return Err(Error::invalid("empty stabilizer label list"));
    }
    limits::check_qubits(labels.len(), "stabilizer product")?;
    let mut amps = vec![C64::new(1.0, 0.0)];
    for &l in labels {
        amps = kron(&amps, &stab1_state(l)?);
    }
    Ok(StateVector {
        n: labels.len(),
        amps,
    })
}

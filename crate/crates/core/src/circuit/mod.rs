//! Gate-level circuits, statevector simulation and the dispatcher construction.

mod dispatcher;
mod gate;
mod state;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use dispatcher::{BqpBranch, DispatchBranch, DispatcherSpec, Dispatched, ProbeCatalog};
pub use gate::{Gate, GateKind, GateMatrix};
pub(crate) use state::{apply_1q, apply_2q, inner, kron, norm};
pub use state::{
    prepare_stabilizer_product, stab1_expectation, stab1_state, StateVector, STAB1_LABELS,
};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::limits;

/// An ordered gate list `U = U_k ⋯ U_1` on `n` qubits (gate 0 is applied first).
/// Serialized as its text form.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("circuit needs at least one qubit"));
        }
        limits::check_qubits(n, "circuit")?;
        Ok(Circuit { n, gates: Vec::new() })
    }

    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit::new(n)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if gate.max_target() >= self.n {
            return Err(Error::invalid(format!(
                "gate {gate} targets qubit {} but circuit has {} qubits",
                gate.max_target(),
                self.n
            )));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Gate count `k`.
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// ASAP layered depth.
    pub fn depth(&self) -> usize {
        let mut ready = vec![0usize; self.n];
        let mut depth = 0;
        for g in &self.gates {
            let layer = 1 + g.targets().iter().map(|&q| ready[q]).max().unwrap_or(0);
            for &q in g.targets() {
                ready[q] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    /// The adjoint circuit `U†`.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n: self.n,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Ok(Circuit { n: self.n, gates })
    }

    /// Runs the circuit on a state.
    pub fn run(&self, input: &StateVector) -> Result<StateVector> {
        if input.n_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: input.n_qubits(),
            });
        }
        let mut out = input.clone();
        for g in &self.gates {
            apply_gate(out.amplitudes_mut(), self.n, 1, g);
        }
        Ok(out)
    }

    /// Runs the circuit on the basis state `|x⟩`.
    pub fn run_basis(&self, x: &BitString) -> Result<StateVector> {
        self.run(&StateVector::basis(x)?)
    }

    /// Random circuit of `k` gates: each gate is a Haar-random single-qubit unitary or, with
    /// probability one half when `n ≥ 2`, a CNOT on a random ordered pair.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Circuit> {
        let mut c = Circuit::new(n)?;
        for _ in 0..k {
            if n >= 2 && rng.random_bool(0.5) {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                c.push(Gate::cnot(a, b)?)?;
            } else {
                c.push(Gate::haar_1q(rng.random_range(0..n), rng))?;
            }
        }
        Ok(c)
    }

    /// Parses the circuit text format. An optional `qubits N` header fixes the register size;
    /// otherwise it is one more than the largest target. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Circuit> {
        let mut n: Option<usize> = None;
        let mut gates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lower = line.to_ascii_lowercase();
            if let Some(rest) = lower.strip_prefix("qubits") {
                let v = rest.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad qubit count: {e}"),
                })?;
                n = Some(v);
                continue;
            }
            gates.push(gate::parse_gate_line(line, i + 1)?);
        }
        let n = match n {
            Some(v) => v,
            None => gates
                .iter()
                .map(|g| g.max_target() + 1)
                .max()
                .ok_or_else(|| Error::invalid("circuit text has no gates and no qubits header"))?,
        };
        Circuit::from_gates(n, gates)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Circuit::parse(s)
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Circuit::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Applies `gate` to the leading `n`-qubit register of a `2^n ⊗ inner` space.
pub(crate) fn apply_gate(amps: &mut [C64], n: usize, inner: usize, gate: &Gate) {
    let t = gate.targets();
    match gate.matrix() {
        GateMatrix::One(m) => apply_1q(amps, n, inner, t[0], &m),
        GateMatrix::Two(m) => apply_2q(amps, n, inner, t[0], t[1], &m),
    }
}

/// Sparse columns of a gate lifted to the full `n`-qubit register: entry `j` lists the
/// nonzero `(row, value)` pairs of `U|j⟩`.
pub(crate) fn gate_columns(gate: &Gate, n: usize) -> Vec<Vec<(usize, C64)>> {
    let dim = 1usize << n;
    (0..dim)
        .map(|j| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[j] = C64::new(1.0, 0.0);
            apply_gate(&mut v, n, 1, gate);
            v.into_iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > 1e-15)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn x_flips_zero() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::single(GateKind::X, 0).unwrap()).unwrap();
        let out = c.run_basis(&"0".parse().unwrap()).unwrap();
        assert_eq!(out.amplitudes()[1], C64::new(1.0, 0.0));
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(2).unwrap();
        let psi = prepare_stabilizer_product(&[2, 5]).unwrap();
        assert_eq!(c.run(&psi).unwrap(), psi);
    }

    #[test]
    fn bell_pair() {
        let c = Circuit::parse("H 0\nCNOT 0 1\n").unwrap();
        let out = c.run_basis(&"00".parse().unwrap()).unwrap();
        let a = out.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[3].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
    }

    #[test]
    fn out_of_range_target_rejected() {
        let mut c = Circuit::new(2).unwrap();
        assert!(c.push(Gate::single(GateKind::H, 2).unwrap()).is_err());
        assert!(Circuit::parse("qubits 1\nCNOT 0 1").is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let c = Circuit::new(2).unwrap();
        assert!(matches!(
            c.run(&StateVector::zero(3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn depth_counts_layers() {
        let c = Circuit::parse("H 0\nH 1\nCNOT 0 1\nX 2").unwrap();
        assert_eq!(c.depth(), 2);
    }

    #[test]
    fn text_format_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Circuit::random(3, 12, &mut rng).unwrap();
        let back: Circuit = c.to_string().parse().unwrap();
        assert_eq!(back, c);
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_preserved(seed in any::<u64>(), n in 1usize..=8, k in 0usize..=50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = Circuit::random(n, k, &mut rng).unwrap();
            let psi = random_state(n, &mut rng);
            let out = c.run(&psi).unwrap();
            prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn composition_and_inverse(seed in any::<u64>(), n in 1usize..=5, k in 0usize..=20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c1 = Circuit::random(n, k, &mut rng).unwrap();
            let c2 = Circuit::random(n, k, &mut rng).unwrap();
            let psi = random_state(n, &mut rng);
            let seq = c2.run(&c1.run(&psi).unwrap()).unwrap();
            let joint = c1.then(&c2).unwrap().run(&psi).unwrap();
            for (a, b) in seq.amplitudes().iter().zip(joint.amplitudes()) {
                prop_assert!((a - b).norm() <= 1e-10);
            }
            let back = c1.inverse().run(&c1.run(&psi).unwrap()).unwrap();
            for (a, b) in back.amplitudes().iter().zip(psi.amplitudes()) {
                prop_assert!((a - b).norm() <= 1e-10);
            }
        }
    }
}

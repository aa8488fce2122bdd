//! The dispatcher circuit `U(x)`: the first input bit selects between a stabilizer probe
//! branch and a hard-computation branch on an `n_S`-qubit payload register.

use serde::{Deserialize, Serialize};

use super::{prepare_stabilizer_product, Circuit, StateVector};
use crate::bits::BitString;
use crate::error::{Error, Result};

/// Maps the payload bits of an `x₁ = 0` input to a stabilizer product state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeCatalog {
    /// Three payload bits per qubit; codes `0..=5` index `stab1`, codes 6 and 7 are unassigned.
    Packed,
    /// One label list per value of the `n_S` payload bits.
    Explicit(Vec<Vec<u8>>),
}

/// Produces the payload state of an `x₁ = 1` input from `x_S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BqpBranch {
    /// Loads `|x_S⟩` and runs the circuit on it.
    OnInput(Circuit),
    /// One circuit per value of `x_S`, each run on `|0^{n_S}⟩`.
    Table(Vec<Circuit>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatcherSpec {
    pub n_q: usize,
    pub n_s: usize,
    pub probe_catalog: ProbeCatalog,
    /// Rotation circuits `V(x_Q)` on the payload register, indexed by the value of `x_Q`.
    pub observable_catalog: Vec<Circuit>,
    pub bqp_branch: BqpBranch,
}

/// Which branch an input selects.
#[derive(Clone, Debug, PartialEq)]
pub enum DispatchBranch {
    Probe { labels: Vec<u8> },
    Bqp { x_s: BitString },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dispatched {
    pub branch: DispatchBranch,
    pub x_q: usize,
}

impl DispatcherSpec {
    pub fn new(
        n_q: usize,
        n_s: usize,
        probe_catalog: ProbeCatalog,
        observable_catalog: Vec<Circuit>,
        bqp_branch: BqpBranch,
    ) -> Result<Self> {
        let spec = DispatcherSpec {
            n_q,
            n_s,
            probe_catalog,
            observable_catalog,
            bqp_branch,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The shallow-unitary layout: no selector bits, packed probes, identity rotation.
    pub fn shallow(n_s: usize, bqp_branch: BqpBranch) -> Result<Self> {
        Self::new(0, n_s, ProbeCatalog::Packed, vec![Circuit::new(n_s)?], bqp_branch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::invalid("dispatcher payload register must be non-empty"));
        }
        if self.observable_catalog.len() != 1usize << self.n_q {
            return Err(Error::invalid(format!(
                "observable catalog has {} entries, expected 2^{} = {}",
                self.observable_catalog.len(),
                self.n_q,
                1usize << self.n_q
            )));
        }
        for c in &self.observable_catalog {
            if c.n_qubits() != self.n_s {
                return Err(Error::invalid("rotation circuit size differs from payload size"));
            }
        }
        if let ProbeCatalog::Explicit(entries) = &self.probe_catalog {
            if entries.len() != 1usize << self.n_s {
                return Err(Error::invalid(format!(
                    "probe catalog has {} entries, expected 2^{}",
                    entries.len(),
                    self.n_s
                )));
            }
            for e in entries {
                if e.len() != self.n_s || e.iter().any(|&l| l > 5) {
                    return Err(Error::invalid(format!("bad probe catalog entry {e:?}")));
                }
            }
        }
        match &self.bqp_branch {
            BqpBranch::OnInput(c) if c.n_qubits() != self.n_s => {
                return Err(Error::invalid("bqp circuit size differs from payload size"));
            }
            BqpBranch::Table(t) => {
                if t.len() != 1usize << self.n_s || t.iter().any(|c| c.n_qubits() != self.n_s) {
                    return Err(Error::invalid("bqp table must hold 2^n_S circuits on n_S qubits"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn payload_bits(&self) -> usize {
        match self.probe_catalog {
            ProbeCatalog::Packed => 3 * self.n_s,
            ProbeCatalog::Explicit(_) => self.n_s,
        }
    }

    /// Total input length `n = 1 + n_Q + payload bits`.
    pub fn n_inputs(&self) -> usize {
        1 + self.n_q + self.payload_bits()
    }

    /// Encodes probe labels into payload bits (packed layout only).
    pub fn encode_probe(&self, labels: &[u8]) -> Result<BitString> {
        if self.probe_catalog != ProbeCatalog::Packed || labels.len() != self.n_s {
            return Err(Error::invalid("probe encoding needs the packed catalog and n_S labels"));
        }
        let mut bits = Vec::with_capacity(3 * self.n_s);
        for &l in labels {
            if l > 5 {
                return Err(Error::invalid(format!("stabilizer label {l} out of range")));
            }
            bits.extend((0..3).map(|i| (l >> (2 - i)) & 1 == 1));
        }
        Ok(BitString::new(bits))
    }

    /// Splits an input into its branch, selector and payload description.
    pub fn decode(&self, x: &BitString) -> Result<Dispatched> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        let x_q = x.slice(1, self.n_q).to_index();
        let payload = x.slice(1 + self.n_q, self.payload_bits());
        let branch = if !x.get(0) {
            let labels = match &self.probe_catalog {
                ProbeCatalog::Packed => {
                    let mut labels = Vec::with_capacity(self.n_s);
                    for q in 0..self.n_s {
                        let code = payload.slice(3 * q, 3).to_index() as u8;
                        if code > 5 {
                            return Err(Error::CatalogMiss(payload.to_string()));
                        }
                        labels.push(code);
                    }
                    labels
                }
                ProbeCatalog::Explicit(entries) => entries
                    .get(payload.to_index())
                    .cloned()
                    .ok_or_else(|| Error::CatalogMiss(payload.to_string()))?,
            };
            DispatchBranch::Probe { labels }
        } else {
            DispatchBranch::Bqp {
                x_s: payload.slice(0, self.n_s),
            }
        };
        Ok(Dispatched { branch, x_q })
    }

    /// Payload-register state `|ψ_U(x_S)⟩` together with the decoded input.
    pub fn payload_state(&self, x: &BitString) -> Result<(Dispatched, StateVector)> {
        let d = self.decode(x)?;
        let state = match &d.branch {
            DispatchBranch::Probe { labels } => prepare_stabilizer_product(labels)?,
            DispatchBranch::Bqp { x_s } => match &self.bqp_branch {
                BqpBranch::OnInput(c) => c.run_basis(x_s)?,
                BqpBranch::Table(t) => t[x_s.to_index()].run(&StateVector::zero(self.n_s)?)?,
            },
        };
        Ok((d, state))
    }

    /// Full register state `|x₁⟩ ⊗ |x_Q⟩ ⊗ |ψ_U(x_S)⟩`.
    pub fn dispatcher_state(&self, x: &BitString) -> Result<StateVector> {
        let (_, payload) = self.payload_state(x)?;
        let control = StateVector::basis(&x.slice(0, 1 + self.n_q))?;
        Ok(control.tensor(&payload))
    }

    pub fn rotation(&self, x_q: usize) -> Result<&Circuit> {
        self.observable_catalog
            .get(x_q)
            .ok_or_else(|| Error::invalid(format!("x_Q = {x_q} outside the observable catalog")))
    }

    /// Index of a catalog rotation that acts as the identity, if any.
    pub fn identity_rotation_index(&self) -> Option<usize> {
        self.observable_catalog.iter().position(|c| {
            c.is_empty() || {
                let dim = 1usize << self.n_s;
                (0..dim).all(|j| {
                    let e = BitString::from_index(j, self.n_s);
                    StateVector::basis(&e)
                        .and_then(|s| c.run(&s))
                        .map(|out| {
                            out.amplitudes().iter().enumerate().all(|(i, a)| {
                                // identity up to a global phase is not accepted
                                let t = if i == j { 1.0 } else { 0.0 };
                                (a.re - t).abs() < 1e-12 && a.im.abs() < 1e-12
                            })
                        })
                        .unwrap_or(false)
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Gate, GateKind};
    use crate::pauli::{pauli_expectation, PauliString};

    fn x_on_first(n_s: usize) -> Circuit {
        let mut c = Circuit::new(n_s).unwrap();
        c.push(Gate::single(GateKind::X, 0).unwrap()).unwrap();
        c
    }

    #[test]
    fn probe_branch_lookup() {
        let spec = DispatcherSpec::shallow(2, BqpBranch::OnInput(Circuit::new(2).unwrap())).unwrap();
        assert_eq!(spec.n_inputs(), 7);
        let payload = spec.encode_probe(&[2, 2]).unwrap();
        let x = BitString::zeros(1).concat(&payload);
        let full = spec.dispatcher_state(&x).unwrap();
        let plus = prepare_stabilizer_product(&[0, 2, 2]).unwrap();
        assert!((full.fidelity(&plus).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bqp_branch_runs_circuit() {
        let spec = DispatcherSpec::shallow(3, BqpBranch::Table(vec![x_on_first(3); 8])).unwrap();
        let mut bits = vec![true];
        bits.extend(vec![false; 9]);
        let (_, payload) = spec.payload_state(&BitString::new(bits)).unwrap();
        assert_eq!(payload.amplitudes()[0b100].re, 1.0);
        let z1 = pauli_expectation(&payload, &"ZII".parse::<PauliString>().unwrap()).unwrap();
        assert!((z1 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_probe_is_zero_state() {
        let spec = DispatcherSpec::shallow(3, BqpBranch::OnInput(Circuit::new(3).unwrap())).unwrap();
        let (_, payload) = spec.payload_state(&BitString::zeros(10)).unwrap();
        assert_eq!(payload.amplitudes()[0].re, 1.0);
    }

    #[test]
    fn unassigned_code_is_a_catalog_miss() {
        let spec = DispatcherSpec::shallow(1, BqpBranch::OnInput(Circuit::new(1).unwrap())).unwrap();
        let x: BitString = "0111".parse().unwrap();
        match spec.decode(&x) {
            Err(Error::CatalogMiss(s)) => assert_eq!(s, "111"),
            other => panic!("expected catalog miss, got {other:?}"),
        }
    }

    #[test]
    fn identity_rotation_detection() {
        let mut h = Circuit::new(1).unwrap();
        h.push(Gate::single(GateKind::H, 0).unwrap()).unwrap();
        let spec = DispatcherSpec::new(
            1,
            1,
            ProbeCatalog::Packed,
            vec![h, Circuit::new(1).unwrap()],
            BqpBranch::OnInput(Circuit::new(1).unwrap()),
        )
        .unwrap();
        assert_eq!(spec.identity_rotation_index(), Some(1));
    }
}

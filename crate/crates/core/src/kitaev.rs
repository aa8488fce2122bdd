//! Kitaev's circuit-to-Hamiltonian map `H(x) = H_init + H_clock + Σ_t H_t` with the circuit
//! padded by `2T` identity steps, so that every clock value `t ≥ T` holds the finished
//! computation.
//!
//! Abstract basis index: `w · (3T+1) + t`. The unary form uses `N + 3T` qubits with the three
//! clock bits around a transition carrying the patterns `100 → 110`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{gate_columns, inner, norm, Circuit, Gate, StateVector};
use crate::clockham::{gate_dmatrix, ket_bra, LegalSubspace};
use crate::error::{Error, Result};
use crate::limits;
use crate::spectral::{eigh, embed_local, LocalOperator, SparseHermitian};

fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Clone, Debug)]
pub struct KitaevHamiltonian {
    n_work: usize,
    t_gates: usize,
    x: BitString,
    /// `3T` steps; `None` marks a padding identity.
    steps: Vec<Option<Gate>>,
    init: SparseHermitian,
    clock: SparseHermitian,
    props: Vec<SparseHermitian>,
    total: SparseHermitian,
}

/// Input bits followed by zeroed ancillas.
fn full_input(c: &Circuit, x: &BitString) -> Result<BitString> {
    if x.len() > c.n_qubits() {
        return Err(Error::invalid(format!(
            "input has {} bits but the circuit acts on {} qubits",
            x.len(),
            c.n_qubits()
        )));
    }
    Ok(x.concat(&BitString::zeros(c.n_qubits() - x.len())))
}

pub fn build_kitaev(c: &Circuit, x: &BitString) -> Result<KitaevHamiltonian> {
    let t_gates = c.len();
    if t_gates == 0 {
        return Err(Error::invalid("Kitaev construction needs at least one gate"));
    }
    let x = full_input(c, x)?;
    let n = c.n_qubits();
    let l = 3 * t_gates;
    let kk = l + 1;
    let dim = (1usize << n) * kk;
    limits::check_sparse_dim(dim, "Kitaev Hamiltonian")?;
    let steps: Vec<Option<Gate>> = c
        .gates()
        .iter()
        .cloned()
        .map(Some)
        .chain(std::iter::repeat_n(None, 2 * t_gates))
        .collect();

    let xi = x.to_index();
    let init_t: Vec<_> = (0..(1usize << n))
        .filter_map(|w| {
            let miss = (w ^ xi).count_ones();
            (miss > 0).then(|| (w * kk, w * kk, c64(miss as f64)))
        })
        .collect();
    let init = SparseHermitian::from_triplets(dim, init_t)?;
    let clock = SparseHermitian::zeros(dim)?;

    let mut props = Vec::with_capacity(l);
    for (idx, step) in steps.iter().enumerate() {
        let t = idx + 1;
        let mut trip = Vec::new();
        for w in 0..(1usize << n) {
            trip.push((w * kk + t, w * kk + t, c64(0.5)));
            trip.push((w * kk + t - 1, w * kk + t - 1, c64(0.5)));
        }
        match step {
            Some(g) => {
                for (col, entries) in gate_columns(g, n).into_iter().enumerate() {
                    for (row, u) in entries {
                        trip.push((row * kk + t, col * kk + t - 1, -u * 0.5));
                        trip.push((col * kk + t - 1, row * kk + t, -u.conj() * 0.5));
                    }
                }
            }
            None => {
                for w in 0..(1usize << n) {
                    trip.push((w * kk + t, w * kk + t - 1, c64(-0.5)));
                    trip.push((w * kk + t - 1, w * kk + t, c64(-0.5)));
                }
            }
        }
        props.push(SparseHermitian::from_triplets(dim, trip)?);
    }
    let mut all: Vec<(f64, &SparseHermitian)> = vec![(1.0, &init), (1.0, &clock)];
    all.extend(props.iter().map(|p| (1.0, p)));
    let total = SparseHermitian::linear_combination(&all)?;
    Ok(KitaevHamiltonian {
        n_work: n,
        t_gates,
        x,
        steps,
        init,
        clock,
        props,
        total,
    })
}

impl KitaevHamiltonian {
    pub fn n_work(&self) -> usize {
        self.n_work
    }

    /// Gate count before padding.
    pub fn t_gates(&self) -> usize {
        self.t_gates
    }

    /// `3T`.
    pub fn padded_t(&self) -> usize {
        self.steps.len()
    }

    pub fn input(&self) -> &BitString {
        &self.x
    }

    pub fn operator(&self) -> &SparseHermitian {
        &self.total
    }

    pub fn h_init(&self) -> &SparseHermitian {
        &self.init
    }

    /// Zero on the abstract clock; it only acts in the unary form.
    pub fn h_clock(&self) -> &SparseHermitian {
        &self.clock
    }

    pub fn h_prop(&self) -> &[SparseHermitian] {
        &self.props
    }

    /// Every term in the order init, clock, propagation `t = 1..=3T`.
    pub fn terms(&self) -> Vec<&SparseHermitian> {
        let mut v = vec![&self.init, &self.clock];
        v.extend(self.props.iter());
        v
    }

    pub fn clock_levels(&self) -> usize {
        self.steps.len() + 1
    }

    /// The padded circuit as a plain gate list (padding omitted).
    pub fn circuit(&self) -> Result<Circuit> {
        Circuit::from_gates(self.n_work, self.steps.iter().flatten().cloned().collect())
    }

    /// Work state at every clock value: `U_t ⋯ U_1 |x⟩`.
    pub fn partial_states(&self) -> Result<Vec<StateVector>> {
        let mut cur = StateVector::basis(&self.x)?;
        let mut out = vec![cur.clone()];
        for s in &self.steps {
            if let Some(g) = s {
                cur = Circuit::from_gates(self.n_work, vec![g.clone()])?.run(&cur)?;
            }
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Uniform superposition of the partial computations over all `3T+1` clock values.
    pub fn history_state(&self) -> Result<Vec<C64>> {
        let kk = self.clock_levels();
        let parts = self.partial_states()?;
        let s = 1.0 / (kk as f64).sqrt();
        let mut v = vec![c64(0.0); (1usize << self.n_work) * kk];
        for (t, p) in parts.iter().enumerate() {
            for (w, a) in p.amplitudes().iter().enumerate() {
                v[w * kk + t] = a * s;
            }
        }
        Ok(v)
    }

    /// Local terms on `N + 3T` qubits: work first, clock bit `i` (1-based) on qubit `N + i − 1`.
    pub fn unary_terms(&self) -> Result<Vec<LocalOperator>> {
        let n = self.n_work;
        let l = self.steps.len();
        let cq = |i: usize| n + i - 1;
        let mut ops = Vec::new();
        for (i, bit) in self.x.bits().iter().enumerate() {
            // wrong work value while clock bit 1 is unset
            let wrong = if *bit { 0 } else { 1 };
            let m = ket_bra(1, wrong, wrong).kronecker(&ket_bra(1, 0, 0));
            ops.push(LocalOperator::new(vec![i, cq(1)], m)?);
        }
        for i in 1..l {
            ops.push(LocalOperator::new(vec![cq(i), cq(i + 1)], ket_bra(2, 0b01, 0b01))?);
        }
        for (idx, step) in self.steps.iter().enumerate() {
            let t = idx + 1;
            let clock: Vec<usize> = [t.checked_sub(1).filter(|&b| b >= 1), Some(t), Some(t + 1).filter(|&b| b <= l)]
                .into_iter()
                .flatten()
                .collect();
            let bits = clock.len();
            let mut from = 0usize;
            for (p, &b) in clock.iter().enumerate() {
                if b < t {
                    from |= 1 << (bits - 1 - p);
                }
            }
            let pos = clock.iter().position(|&b| b == t).unwrap();
            let to = from | (1 << (bits - 1 - pos));
            let (u, mut qubits) = match step {
                Some(g) => (gate_dmatrix(g), g.targets().to_vec()),
                None => (DMatrix::identity(1, 1), Vec::new()),
            };
            let d = u.nrows();
            let eye = DMatrix::<C64>::identity(d, d);
            let proj = eye.kronecker(&(ket_bra(bits, to, to) + ket_bra(bits, from, from)));
            let hop = u.kronecker(&ket_bra(bits, to, from));
            let m = (proj - &hop - hop.adjoint()) * c64(0.5);
            qubits.extend(clock.iter().map(|&b| cq(b)));
            ops.push(LocalOperator::new(qubits, m)?);
        }
        Ok(ops)
    }

    pub fn unary_embedding(&self) -> Result<(SparseHermitian, LegalSubspace)> {
        let total = self.n_work + self.steps.len();
        limits::check_qubits(total, "unary Kitaev embedding")?;
        let op = embed_local(total, &self.unary_terms()?)?;
        Ok((op, LegalSubspace::new(self.n_work, self.steps.len())))
    }
}

/// `|x⟩`-initialized history state of `c`.
pub fn history_state(c: &Circuit, x: &BitString) -> Result<Vec<C64>> {
    build_kitaev(c, x)?.history_state()
}

/// `Z` on work qubit 0 times the projector onto clock values `t ≥ T`, i.e. clock bit `T` set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionObservable {
    pub n_work: usize,
    pub t_gates: usize,
}

pub fn decision_observable(n_work: usize, t_gates: usize) -> DecisionObservable {
    DecisionObservable { n_work, t_gates }
}

impl DecisionObservable {
    pub fn clock_levels(&self) -> usize {
        3 * self.t_gates + 1
    }

    /// `⟨v|O|v⟩` for an abstract work ⊗ clock vector.
    pub fn expectation(&self, v: &[C64]) -> Result<f64> {
        let kk = self.clock_levels();
        let dim = (1usize << self.n_work) * kk;
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        let top = 1usize << (self.n_work - 1);
        let mut acc = 0.0;
        for w in 0..(1usize << self.n_work) {
            let z = if w & top == 0 { 1.0 } else { -1.0 };
            for t in self.t_gates..kk {
                acc += z * v[w * kk + t].norm_sqr();
            }
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub energy: f64,
    pub residual: f64,
    pub gap: f64,
    pub decision_value: f64,
    /// Smallest eigenvalue from the dense solver.
    pub min_eigenvalue: f64,
    /// `|⟨ground|ψ⟩|²` against the dense lowest eigenvector.
    pub ground_overlap: f64,
    /// Weight of the finished computation `U|x⟩` in the reduced work state of `ψ`.
    pub output_overlap: f64,
    pub pass: bool,
}

/// Energy, eigen-residual and gap of `ψ` under `h`.
pub fn verify_ground(h: &KitaevHamiltonian, psi: &[C64], tol: f64) -> Result<GroundReport> {
    let op = h.operator();
    if psi.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: psi.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let nrm = norm(psi);
    let hv = op.matvec(psi)?;
    let energy = inner(psi, &hv).re / (nrm * nrm);
    let r: Vec<C64> = hv.iter().zip(psi).map(|(a, b)| a - b * energy).collect();
    let residual = norm(&r) / nrm;
    let eig = eigh(op)?;
    let gap = eig.values[1] - eig.values[0];
    let g0: Vec<C64> = eig.vectors.column(0).iter().copied().collect();
    let ground_overlap = inner(&g0, psi).norm_sqr() / (nrm * nrm);
    let decision_value = decision_observable(h.n_work, h.t_gates).expectation(psi)? / (nrm * nrm);

    let kk = h.clock_levels();
    let out = h.partial_states()?.pop().unwrap();
    let mut output_overlap = 0.0;
    for t in 0..kk {
        let slice: Vec<C64> = (0..(1usize << h.n_work)).map(|w| psi[w * kk + t]).collect();
        output_overlap += inner(out.amplitudes(), &slice).norm_sqr();
    }
    output_overlap /= nrm * nrm;

    Ok(GroundReport {
        n: h.n_work,
        t: h.t_gates,
        energy,
        residual,
        gap,
        decision_value,
        min_eigenvalue: eig.values[0],
        ground_overlap,
        output_overlap,
        pass: energy <= tol && residual <= tol && gap > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;
    use crate::pauli::PauliString;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_circuit(n: usize) -> Circuit {
        Circuit::from_gates(n, vec![Gate::single(GateKind::Rz(0.0), 0).unwrap()]).unwrap()
    }

    fn x_circuit() -> Circuit {
        Circuit::from_gates(1, vec![Gate::single(GateKind::X, 0).unwrap()]).unwrap()
    }

    #[test]
    fn identity_instance_ground_state() {
        let h = build_kitaev(&identity_circuit(1), &BitString::zeros(1)).unwrap();
        assert_eq!(h.operator().dim(), 8);
        let psi = h.history_state().unwrap();
        for t in 0..4 {
            assert!((psi[t] - c64(0.5)).norm() < 1e-15);
        }
        let r = verify_ground(&h, &psi, 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.energy.abs() <= 1e-10);
        assert!(r.min_eigenvalue.abs() <= 1e-10);
        assert!((r.ground_overlap - 1.0).abs() < 1e-9);
        // three of four branches are past clock T = 1
        assert!((r.decision_value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_x_history() {
        let h = build_kitaev(&x_circuit(), &BitString::zeros(1)).unwrap();
        let psi = h.history_state().unwrap();
        let kk = h.clock_levels();
        let s = 1.0 / (kk as f64).sqrt();
        assert!((psi[0] - c64(s)).norm() < 1e-15);
        for t in 1..kk {
            assert!(psi[t].norm() < 1e-15);
            assert!((psi[kk + t] - c64(s)).norm() < 1e-15);
        }
        let r = verify_ground(&h, &psi, 1e-10).unwrap();
        assert!(r.pass);
        assert!(r.decision_value < 0.0);
    }

    #[test]
    fn terms_psd_and_clock_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = Circuit::random(2, 3, &mut rng).unwrap();
        let h = build_kitaev(&c, &BitString::from_index(1, 2)).unwrap();
        for term in h.terms() {
            let e = eigh(term).unwrap();
            assert!(e.values[0] >= -1e-10);
        }
        assert_eq!(h.h_clock().nnz(), 0);
        assert!(build_kitaev(&Circuit::new(1).unwrap(), &BitString::zeros(1)).is_err());
    }

    #[test]
    fn decision_without_clock_is_zero() {
        let obs = decision_observable(1, 1);
        let mut v = vec![c64(0.0); 8];
        v[0] = c64(1.0);
        assert_eq!(obs.expectation(&v).unwrap(), 0.0);
    }

    #[test]
    fn unary_form_matches_abstract() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = Circuit::random(1, 2, &mut rng).unwrap();
        let h = build_kitaev(&c, &BitString::new(vec![true])).unwrap();
        let (op, legal) = h.unary_embedding().unwrap();
        let comp = legal.compress(&op).unwrap();
        let diff = (&comp - h.operator().to_dense()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
        // the history state is also a zero mode of the unary operator
        let hist = legal.embed(&h.history_state().unwrap()).unwrap();
        let r = op.matvec(&hist).unwrap();
        assert!(norm(&r) < 1e-10);
        let e = eigh(&op).unwrap();
        assert!(e.values[0].abs() < 1e-10 && e.values[1] > 1e-6);
    }

    #[test]
    fn decision_matches_final_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let c = Circuit::random(2, 2, &mut rng).unwrap();
        let h = build_kitaev(&c, &BitString::zeros(2)).unwrap();
        let fin = h.partial_states().unwrap().pop().unwrap();
        let z = crate::pauli::pauli_expectation(&fin, &"ZI".parse::<PauliString>().unwrap()).unwrap();
        let d = decision_observable(2, 2).expectation(&h.history_state().unwrap()).unwrap();
        assert!((d - z * 5.0 / 7.0).abs() < 1e-12);
    }
}

//! Feynman clock Hamiltonians `H = Σ_j w_j (U_j ⊗ |j⟩⟨j−1| + h.c.)` on a work ⊗ clock space,
//! the perfect-transfer weighting, and the domain-wall qubit encoding of the clock.
//!
//! Abstract basis index: `w · (k+1) + t` with `w` the work basis index and `t` the clock value.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{gate_columns, inner, kron, norm, Circuit, Gate, GateMatrix, StateVector};
use crate::error::{Error, Result};
use crate::limits;
use crate::spectral::{embed_local, DensePropagator, LocalOperator, SparseHermitian};

/// Overall coupling of the weighted clock. With it the restricted matrix is `J_x` of a
/// spin `k/2`, whose flip time is `π`.
pub const CHILDS_COUPLING: f64 = 0.5;

/// Default evolution time for transfer checks.
pub const TRANSFER_TIME: f64 = std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct ClockHamiltonian {
    work_n: usize,
    k: usize,
    weights: Vec<f64>,
    coupling: f64,
    circuit: Circuit,
    op: SparseHermitian,
}

/// `√(j(k+1−j))` for `j = 1..=k`.
pub fn childs_profile(k: usize) -> Vec<f64> {
    (1..=k).map(|j| ((j * (k + 1 - j)) as f64).sqrt()).collect()
}

/// Unit weights.
pub fn build_feynman_clock(c: &Circuit) -> Result<ClockHamiltonian> {
    ClockHamiltonian::new(c, vec![1.0; c.len()], 1.0)
}

/// Weights `√(j(k+1−j))` under the coupling [`CHILDS_COUPLING`].
pub fn build_childs_weighted(c: &Circuit) -> Result<ClockHamiltonian> {
    ClockHamiltonian::new(c, childs_profile(c.len()), CHILDS_COUPLING)
}

pub(crate) fn gate_dmatrix(g: &Gate) -> DMatrix<C64> {
    match g.matrix() {
        GateMatrix::One(m) => DMatrix::from_fn(2, 2, |r, c| m[r][c]),
        GateMatrix::Two(m) => DMatrix::from_fn(4, 4, |r, c| m[r][c]),
    }
}

/// `|a⟩⟨b|` on `bits` qubits.
pub(crate) fn ket_bra(bits: usize, a: usize, b: usize) -> DMatrix<C64> {
    let d = 1usize << bits;
    let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    m[(a, b)] = C64::new(1.0, 0.0);
    m
}

impl ClockHamiltonian {
    pub fn new(c: &Circuit, weights: Vec<f64>, coupling: f64) -> Result<Self> {
        let k = c.len();
        if k == 0 {
            return Err(Error::invalid("clock Hamiltonian needs a circuit with at least one gate"));
        }
        if weights.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: weights.len() });
        }
        if weights.iter().chain([&coupling]).any(|w| !w.is_finite()) {
            return Err(Error::invalid("clock weights must be finite"));
        }
        let n = c.n_qubits();
        let kk = k + 1;
        let dim = (1usize << n) * kk;
        limits::check_sparse_dim(dim, "clock Hamiltonian")?;
        let mut t = Vec::new();
        for (j, g) in c.gates().iter().enumerate() {
            let s = weights[j] * coupling;
            // forward hop clock j → j+1 (0-based gate j is U_{j+1})
            for (col, entries) in gate_columns(g, n).into_iter().enumerate() {
                for (row, u) in entries {
                    let v = u * s;
                    t.push((row * kk + j + 1, col * kk + j, v));
                    t.push((col * kk + j, row * kk + j + 1, v.conj()));
                }
            }
        }
        let op = SparseHermitian::from_triplets(dim, t)?;
        Ok(ClockHamiltonian {
            work_n: n,
            k,
            weights,
            coupling,
            circuit: c.clone(),
            op,
        })
    }

    pub fn work_n(&self) -> usize {
        self.work_n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// The operator in the abstract clock representation.
    pub fn operator(&self) -> &SparseHermitian {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    fn check_work(&self, psi: &StateVector) -> Result<()> {
        if psi.n_qubits() != self.work_n {
            return Err(Error::DimensionMismatch {
                expected: self.work_n,
                got: psi.n_qubits(),
            });
        }
        Ok(())
    }

    fn clock_ket(&self, t: usize) -> Vec<C64> {
        let mut e = vec![C64::new(0.0, 0.0); self.k + 1];
        e[t] = C64::new(1.0, 0.0);
        e
    }

    /// `|ψ_j⟩ = U_j ⋯ U_1 |ψ⟩ ⊗ |j⟩` for `j = 0..=k`.
    pub fn krylov_basis(&self, psi: &StateVector) -> Result<Vec<Vec<C64>>> {
        self.check_work(psi)?;
        let mut cur = psi.clone();
        let mut out = vec![kron(cur.amplitudes(), &self.clock_ket(0))];
        for (j, g) in self.circuit.gates().iter().enumerate() {
            cur = Circuit::from_gates(self.work_n, vec![g.clone()])?.run(&cur)?;
            out.push(kron(cur.amplitudes(), &self.clock_ket(j + 1)));
        }
        Ok(out)
    }

    pub fn initial_state(&self, psi: &StateVector) -> Result<Vec<C64>> {
        self.check_work(psi)?;
        Ok(kron(psi.amplitudes(), &self.clock_ket(0)))
    }

    /// `U|ψ⟩ ⊗ |k⟩`.
    pub fn target_state(&self, psi: &StateVector) -> Result<Vec<C64>> {
        self.check_work(psi)?;
        let out = self.circuit.run(psi)?;
        Ok(kron(out.amplitudes(), &self.clock_ket(self.k)))
    }

    /// `⟨ψ_i|H|ψ_j⟩` over the Krylov basis of `psi`.
    pub fn restricted_matrix(&self, psi: &StateVector) -> Result<DMatrix<C64>> {
        let basis = self.krylov_basis(psi)?;
        let hb: Vec<Vec<C64>> = basis.iter().map(|b| self.op.matvec(b)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(self.k + 1, self.k + 1, |i, j| inner(&basis[i], &hb[j])))
    }

    /// Local terms of the domain-wall encoding: work qubits first, clock bit `i` (1-based)
    /// on qubit `work_n + i − 1`.
    pub fn unary_terms(&self) -> Result<Vec<LocalOperator>> {
        let n = self.work_n;
        let k = self.k;
        let mut ops = Vec::with_capacity(k);
        for (idx, g) in self.circuit.gates().iter().enumerate() {
            let j = idx + 1;
            // clock bits j−1, j, j+1 that exist; the forward hop flips bit j from 0 to 1
            let clock: Vec<usize> = [j.checked_sub(1).filter(|&b| b >= 1), Some(j), Some(j + 1).filter(|&b| b <= k)]
                .into_iter()
                .flatten()
                .collect();
            let bits = clock.len();
            let mut from = 0usize;
            for (p, &b) in clock.iter().enumerate() {
                if b < j {
                    from |= 1 << (bits - 1 - p);
                }
            }
            let pos_j = clock.iter().position(|&b| b == j).unwrap();
            let to = from | (1 << (bits - 1 - pos_j));
            let u = gate_dmatrix(g);
            let fwd = u.kronecker(&ket_bra(bits, to, from));
            let s = C64::new(self.weights[idx] * self.coupling, 0.0);
            let m = (&fwd + fwd.adjoint()) * s;
            let mut qubits = g.targets().to_vec();
            qubits.extend(clock.iter().map(|b| n + b - 1));
            ops.push(LocalOperator::new(qubits, m)?);
        }
        Ok(ops)
    }

    /// Largest number of qubits any unary term acts on nontrivially.
    pub fn measured_locality(&self) -> Result<usize> {
        Ok(self
            .unary_terms()?
            .iter()
            .map(|op| op.nontrivial_qubits().len())
            .max()
            .unwrap_or(0))
    }
}

/// Domain-wall code of clock value `t` on `k` bits, as an integer with clock bit 1 most significant.
pub fn unary_code(t: usize, k: usize) -> usize {
    ((1usize << t) - 1) << (k - t)
}

/// Isometry from an abstract `2^n · (k+1)` space into the legal subspace of `n + k` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct LegalSubspace {
    n_total: usize,
    map: Vec<usize>,
}

impl LegalSubspace {
    pub fn new(work_n: usize, k: usize) -> Self {
        let map = (0..(1usize << work_n))
            .flat_map(|w| (0..=k).map(move |t| (w << k) | unary_code(t, k)))
            .collect();
        LegalSubspace { n_total: work_n + k, map }
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Full-space index of each abstract basis state.
    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.map.contains(&idx)
    }

    pub fn embed(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.map.len() {
            return Err(Error::DimensionMismatch { expected: self.map.len(), got: v.len() });
        }
        let mut out = vec![C64::new(0.0, 0.0); 1usize << self.n_total];
        for (a, &i) in v.iter().zip(&self.map) {
            out[i] = *a;
        }
        Ok(out)
    }

    /// `V† v`.
    pub fn project(&self, v: &[C64]) -> Result<Vec<C64>> {
        let full = 1usize << self.n_total;
        if v.len() != full {
            return Err(Error::DimensionMismatch { expected: full, got: v.len() });
        }
        Ok(self.map.iter().map(|&i| v[i]).collect())
    }

    /// `V† H V` as a dense matrix.
    pub fn compress(&self, h: &SparseHermitian) -> Result<DMatrix<C64>> {
        let d = self.map.len();
        let mut out = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for j in 0..d {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[j] = C64::new(1.0, 0.0);
            let col = self.project(&h.matvec(&self.embed(&e)?)?)?;
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// The clock Hamiltonian on `work_n + k` qubits and the isometry onto its legal clock states.
pub fn unary_embedding(h: &ClockHamiltonian) -> Result<(SparseHermitian, LegalSubspace)> {
    let total = h.work_n + h.k;
    limits::check_qubits(total, "unary clock embedding")?;
    let op = embed_local(total, &h.unary_terms()?)?;
    Ok((op, LegalSubspace::new(h.work_n, h.k)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub k: usize,
    pub n_work: usize,
    pub fidelity: f64,
    pub t_used: f64,
    /// Largest norm outside the Krylov span over sampled times in `[0, t_used]`.
    pub leakage: f64,
    pub locality_measured: usize,
    pub pass: bool,
}

const LEAKAGE_SAMPLES: usize = 20;

/// Evolves `|ψ⟩|0⟩` under `h` for time `t` and compares with `U|ψ⟩|k⟩`.
pub fn transfer_report(h: &ClockHamiltonian, psi: &StateVector, t: f64, tol: f64) -> Result<TransferReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let prop = DensePropagator::new(h.operator())?;
    let start = h.initial_state(psi)?;
    let target = h.target_state(psi)?;
    let basis = h.krylov_basis(psi)?;
    let mut leakage = 0.0f64;
    let mut evolved = start.clone();
    for s in 0..LEAKAGE_SAMPLES {
        let ts = t * (s + 1) as f64 / LEAKAGE_SAMPLES as f64;
        let v = prop.apply(&start, ts)?;
        let mut r = v.clone();
        for b in &basis {
            let c = inner(b, &r);
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        leakage = leakage.max(norm(&r));
        if s + 1 == LEAKAGE_SAMPLES {
            evolved = v;
        }
    }
    let fidelity = inner(&target, &evolved).norm_sqr();
    Ok(TransferReport {
        k: h.k,
        n_work: h.work_n,
        fidelity,
        t_used: t,
        leakage,
        locality_measured: h.measured_locality()?,
        pass: fidelity >= 1.0 - tol,
    })
}

/// Transfer check under the weighted clock at `t = π`.
pub fn verify_perfect_transfer(c: &Circuit, psi_in: &StateVector, tol: f64) -> Result<TransferReport> {
    let h = build_childs_weighted(c)?;
    transfer_report(&h, psi_in, TRANSFER_TIME, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use crate::circuit::GateKind;
    use crate::spectral::evolve;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn x_circuit() -> Circuit {
        Circuit::from_gates(1, vec![Gate::single(GateKind::X, 0).unwrap()]).unwrap()
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn feynman_restricted_matrices() {
        let zero = StateVector::zero(1).unwrap();
        let h = build_feynman_clock(&x_circuit()).unwrap();
        let m = h.restricted_matrix(&zero).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!(max_diff(&m, &want) < 1e-14);

        let id2 = Circuit::from_gates(1, vec![Gate::single(GateKind::Rz(0.0), 0).unwrap(); 2]).unwrap();
        let m = build_feynman_clock(&id2).unwrap().restricted_matrix(&zero).unwrap();
        let want = DMatrix::from_fn(3, 3, |i, j| if i.abs_diff(j) == 1 { c(1.0) } else { c(0.0) });
        assert!(max_diff(&m, &want) < 1e-14);
    }

    #[test]
    fn childs_weights() {
        assert_eq!(childs_profile(1), vec![1.0]);
        let w3 = childs_profile(3);
        assert!((w3[0] - 3f64.sqrt()).abs() < 1e-15 && w3[1] == 2.0 && (w3[2] - 3f64.sqrt()).abs() < 1e-15);
        for k in 1..12 {
            let w = childs_profile(k);
            for j in 0..k {
                assert_eq!(w[j], w[k - 1 - j]);
            }
        }
        // restricted matrix is J_x of spin k/2: entries coupling · √(j(k+1−j))
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let circ = Circuit::random(2, 2, &mut rng).unwrap();
        let h = build_childs_weighted(&circ).unwrap();
        let m = h.restricted_matrix(&StateVector::zero(2).unwrap()).unwrap();
        let s2 = 2f64.sqrt() * CHILDS_COUPLING;
        let want = DMatrix::from_row_slice(3, 3, &[c(0.0), c(s2), c(0.0), c(s2), c(0.0), c(s2), c(0.0), c(s2), c(0.0)]);
        assert!(max_diff(&m, &want) < 1e-12);
    }

    #[test]
    fn block_tridiagonal_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let circ = Circuit::random(2, 4, &mut rng).unwrap();
        let h = build_childs_weighted(&circ).unwrap();
        let kk = h.k() + 1;
        for (r, col, _) in h.operator().triplets() {
            assert!((r % kk).abs_diff(col % kk) <= 1);
        }
        let d = h.operator().to_dense();
        assert!(max_diff(&d, &d.adjoint()) < 1e-12);
        assert!(build_feynman_clock(&Circuit::new(1).unwrap()).is_err());
    }

    #[test]
    fn single_flip_transfer() {
        let r = verify_perfect_transfer(&x_circuit(), &StateVector::zero(1).unwrap(), 1e-9).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-9);
        assert!(r.pass);
        assert!(r.leakage < 1e-9);
        assert!(verify_perfect_transfer(&x_circuit(), &StateVector::zero(1).unwrap(), 0.0).is_err());
    }

    #[test]
    fn unweighted_clock_is_imperfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let circ = Circuit::random(1, 3, &mut rng).unwrap();
        let h = build_feynman_clock(&circ).unwrap();
        let r = transfer_report(&h, &StateVector::zero(1).unwrap(), TRANSFER_TIME, 1e-9).unwrap();
        assert!(r.fidelity < 1.0 - 1e-6);
    }

    #[test]
    fn unary_codes() {
        assert_eq!(unary_code(1, 2), 0b10);
        assert_eq!(unary_code(0, 3), 0);
        assert_eq!(unary_code(3, 3), 0b111);
        let legal = LegalSubspace::new(0, 2);
        assert!(!legal.contains_index(0b01));
        assert_eq!(legal.map(), &[0b00, 0b10, 0b11]);
    }

    #[test]
    fn unary_compression_reproduces_abstract() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (n, k) in [(1, 1), (1, 2), (2, 3), (2, 4)] {
            let circ = Circuit::random(n, k, &mut rng).unwrap();
            let h = build_childs_weighted(&circ).unwrap();
            let (op, legal) = unary_embedding(&h).unwrap();
            let comp = legal.compress(&op).unwrap();
            assert!(max_diff(&comp, &h.operator().to_dense()) < 1e-10, "n={n} k={k}");
            assert!(h.measured_locality().unwrap() <= 5);
        }
    }

    #[test]
    fn unary_evolution_stays_legal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let circ = Circuit::random(2, 3, &mut rng).unwrap();
        let h = build_childs_weighted(&circ).unwrap();
        let (op, legal) = unary_embedding(&h).unwrap();
        let psi = StateVector::basis(&BitString::from_index(2, 2)).unwrap();
        let a = evolve(h.operator(), &h.initial_state(&psi).unwrap(), 1.3).unwrap();
        let u = evolve(&op, &legal.embed(&h.initial_state(&psi).unwrap()).unwrap(), 1.3).unwrap();
        let back = legal.embed(&a).unwrap();
        let d: f64 = back.iter().zip(&u).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(d < 1e-8);
    }
}

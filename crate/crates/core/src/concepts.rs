//! Concept classes `f^α(x) = Tr[ρ(x) O(α)]`, input distributions and seeded dataset generation.

use std::collections::HashMap;
use std::hash::Hasher;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{prepare_stabilizer_product, Circuit, DispatchBranch, DispatcherSpec, Gate, GateKind, StateVector, STAB1_LABELS};
use crate::clockham::{build_childs_weighted, build_feynman_clock};
use crate::error::{Error, Result};
use crate::kitaev::build_kitaev;
use crate::pauli::{enumerate_local_paulis, Geometry, Pauli, PauliObservable, PauliString};
use crate::rng::stream_rng;
use crate::spectral::{ground_state, DensePropagator, EvolveMethod, SparseHermitian};

pub const DATASET_SCHEMA_VERSION: u32 = 1;

fn default_tau() -> f64 {
    std::f64::consts::PI
}

/// Where the evolution Hamiltonian of an evolved or flipped concept comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianSource {
    /// `H = 0` on `n` qubits.
    Zero { n: usize },
    /// Weighted clock of a circuit; inputs load the work register, clock starts at 0.
    ChildsClock { circuit: Circuit },
    /// Unweighted clock of a circuit.
    FeynmanClock { circuit: Circuit },
    /// Seeded chain `Σ J_i Z_i Z_{i+1} + h_x Σ X_i`, `J_i ~ U[−j, j]`.
    Ising { n: usize, j: f64, hx: f64, seed: u64 },
    /// Operator dump file on `log₂ dim` qubits.
    File { path: String },
}

/// Family `x ↦ H(x)` whose ground states define the concept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundFamily {
    /// Kitaev Hamiltonian of the circuit with input `x`.
    Kitaev { circuit: Circuit },
    /// `Σ J_i Z_i Z_{i+1} + h_x Σ X_i + h_z Σ (−1)^{x_i} Z_i`.
    Ising { n: usize, j: f64, hx: f64, hz: f64, seed: u64 },
}

/// Which k-local basis a concept uses on its `n` work qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub k: usize,
    #[serde(default)]
    pub geometry: Geometry,
}

impl BasisSpec {
    pub fn enumerate(&self, n: usize) -> Result<Vec<PauliString>> {
        enumerate_local_paulis(n, self.k, self.geometry)
    }
}

/// One layer entry of a shallow parametrized circuit; each consumes one angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemplateGate {
    /// `exp(−iθ/2 · P₀ ⊗ P₁)`.
    Pair { q0: usize, q1: usize, letters: [Pauli; 2] },
    /// `RX`, `RY` or `RZ` by `θ`.
    Single { q: usize, axis: Pauli },
}

/// `W(α)`: layers of parametrized gates with `W(0) = I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShallowTemplate {
    pub n: usize,
    pub layers: Vec<Vec<TemplateGate>>,
}

impl ShallowTemplate {
    /// One layer: `P₀⊗P₁` rotations on pairs `(0,1), (2,3), …` and `RY` on a leftover qubit.
    pub fn single_layer(n: usize, letters: [Pauli; 2]) -> Self {
        let mut layer: Vec<TemplateGate> = (0..n / 2)
            .map(|p| TemplateGate::Pair {
                q0: 2 * p,
                q1: 2 * p + 1,
                letters,
            })
            .collect();
        if n % 2 == 1 {
            layer.push(TemplateGate::Single { q: n - 1, axis: Pauli::Y });
        }
        ShallowTemplate { n, layers: vec![layer] }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        for layer in &self.layers {
            let mut used = vec![false; self.n];
            for g in layer {
                let qs = match g {
                    TemplateGate::Pair { q0, q1, .. } => vec![*q0, *q1],
                    TemplateGate::Single { q, axis } => {
                        if *axis == Pauli::I {
                            return Err(Error::invalid("single-qubit template rotation needs an axis"));
                        }
                        vec![*q]
                    }
                };
                for q in qs {
                    if q >= self.n || used[q] {
                        return Err(Error::invalid(format!("template layer reuses or exceeds qubit {q}")));
                    }
                    used[q] = true;
                }
            }
        }
        Ok(())
    }

    pub fn build(&self, alpha: &[f64]) -> Result<Circuit> {
        self.validate()?;
        if alpha.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: alpha.len(),
            });
        }
        let mut c = Circuit::new(self.n)?;
        let mut a = alpha.iter();
        for layer in &self.layers {
            for g in layer {
                let theta = *a.next().unwrap();
                if theta == 0.0 {
                    continue;
                }
                let gate = match g {
                    TemplateGate::Pair { q0, q1, letters } => Gate::pauli_rotation_2q(*letters, theta, *q0, *q1)?,
                    TemplateGate::Single { q, axis } => {
                        let kind = match axis {
                            Pauli::X => GateKind::Rx(theta),
                            Pauli::Y => GateKind::Ry(theta),
                            _ => GateKind::Rz(theta),
                        };
                        Gate::single(kind, *q)?
                    }
                };
                c.push(gate)?;
            }
        }
        Ok(c)
    }
}

/// A labeled concept: which states and which observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ConceptSpec {
    /// `ρ(x) = e^{iHτ}|x⟩⟨x|e^{−iHτ}`, observable `Σ αᵢ Pᵢ` on the work register.
    Evolved {
        hamiltonian: HamiltonianSource,
        #[serde(default = "default_tau")]
        tau: f64,
        basis: BasisSpec,
        alpha: Vec<f64>,
    },
    /// `ρ(x)` the ground state of `H(x)`.
    GroundState { family: GroundFamily, basis: BasisSpec, alpha: Vec<f64> },
    /// Dispatcher states measured with `W(α) V(x_Q) O V(x_Q)† W(α)†`.
    UnitaryParam {
        dispatcher: DispatcherSpec,
        template: ShallowTemplate,
        alpha: Vec<f64>,
        base_obs: PauliString,
    },
    /// Fixed state `ρ(x_fixed)`; the input is the coefficient vector.
    Flipped {
        x_fixed: BitString,
        hamiltonian: HamiltonianSource,
        #[serde(default = "default_tau")]
        tau: f64,
        basis: BasisSpec,
    },
}

impl ConceptSpec {
    /// FNV-1a hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        let mut h = fnv::FnvHasher::default();
        h.write(json.as_bytes());
        format!("{:016x}", h.finish())
    }

    pub fn alpha(&self) -> Option<&[f64]> {
        match self {
            ConceptSpec::Evolved { alpha, .. } | ConceptSpec::GroundState { alpha, .. } | ConceptSpec::UnitaryParam { alpha, .. } => Some(alpha),
            ConceptSpec::Flipped { .. } => None,
        }
    }
}

/// Hard instance: the weighted clock of `decider` evolved for `π`, measured with `Z` on
/// work qubit 0, over a basis of `min(2, n)`-local line strings.
pub fn hard_instance(decider: &Circuit, n: usize) -> Result<ConceptSpec> {
    if decider.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: decider.n_qubits(),
        });
    }
    if decider.is_empty() {
        return Err(Error::invalid("decider circuit has no gates"));
    }
    let basis = BasisSpec {
        k: n.min(2),
        geometry: Geometry::LineContiguous,
    };
    let labels = basis.enumerate(n)?;
    let z0 = PauliString::single(n, 0, Pauli::Z);
    let alpha = labels.iter().map(|p| if *p == z0 { 1.0 } else { 0.0 }).collect();
    Ok(ConceptSpec::Evolved {
        hamiltonian: HamiltonianSource::ChildsClock { circuit: decider.clone() },
        tau: default_tau(),
        basis,
        alpha,
    })
}

fn ising_chain(n: usize, j: f64, hx: f64, field: &[f64], seed: u64) -> Result<SparseHermitian> {
    if n == 0 {
        return Err(Error::invalid("Ising chain needs at least one qubit"));
    }
    crate::limits::check_qubits(n, "Ising chain")?;
    let mut rng = stream_rng(seed, 0);
    let couplings: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.random_range(-1.0..=1.0) * j).collect();
    let dim = 1usize << n;
    let mut t = Vec::new();
    for w in 0..dim {
        let z = |q: usize| if (w >> (n - 1 - q)) & 1 == 0 { 1.0 } else { -1.0 };
        let mut diag = 0.0;
        for (q, jq) in couplings.iter().enumerate() {
            diag += jq * z(q) * z(q + 1);
        }
        for (q, h) in field.iter().enumerate() {
            diag += h * z(q);
        }
        if diag != 0.0 {
            t.push((w, w, C64::new(diag, 0.0)));
        }
        if hx != 0.0 {
            for q in 0..n {
                t.push((w ^ (1 << (n - 1 - q)), w, C64::new(hx, 0.0)));
            }
        }
    }
    SparseHermitian::from_triplets(dim, t)
}

/// A Hamiltonian with its work register size and clock (inner) dimension.
struct Evolution {
    n: usize,
    inner: usize,
    op: SparseHermitian,
    prop: OnceLock<std::result::Result<DensePropagator, String>>,
}

impl Evolution {
    fn from_source(src: &HamiltonianSource) -> Result<Self> {
        let (n, inner, op) = match src {
            HamiltonianSource::Zero { n } => {
                crate::limits::check_qubits(*n, "zero Hamiltonian")?;
                (*n, 1, SparseHermitian::zeros(1usize << n)?)
            }
            HamiltonianSource::ChildsClock { circuit } => {
                let h = build_childs_weighted(circuit)?;
                (h.work_n(), h.k() + 1, h.operator().clone())
            }
            HamiltonianSource::FeynmanClock { circuit } => {
                let h = build_feynman_clock(circuit)?;
                (h.work_n(), h.k() + 1, h.operator().clone())
            }
            HamiltonianSource::Ising { n, j, hx, seed } => (*n, 1, ising_chain(*n, *j, *hx, &[], *seed)?),
            HamiltonianSource::File { path } => {
                let op = SparseHermitian::parse(&std::fs::read_to_string(path)?)?;
                let dim = op.dim();
                if !dim.is_power_of_two() {
                    return Err(Error::invalid(format!("operator dimension {dim} is not a power of two")));
                }
                (dim.trailing_zeros() as usize, 1, op)
            }
        };
        if n == 0 {
            return Err(Error::invalid("concept needs at least one work qubit"));
        }
        Ok(Evolution {
            n,
            inner,
            op,
            prop: OnceLock::new(),
        })
    }

    /// `e^{iHτ}(|x⟩ ⊗ |0⟩_clock)`.
    fn evolve(&self, x: &BitString, tau: f64) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut v = vec![C64::new(0.0, 0.0); self.op.dim()];
        v[x.to_index() * self.inner] = C64::new(1.0, 0.0);
        if tau == 0.0 || self.op.nnz() == 0 {
            return Ok(v);
        }
        if self.op.dim() > crate::limits::DENSE_DIM_LIMIT {
            return crate::spectral::evolve_with(&self.op, &v, tau, EvolveMethod::Krylov);
        }
        let prop = self
            .prop
            .get_or_init(|| DensePropagator::new(&self.op).map_err(|e| e.to_string()));
        match prop {
            Ok(p) => p.apply(&v, tau),
            Err(e) => Err(Error::NoConvergence {
                what: "dense propagator",
                detail: e.clone(),
            }),
        }
    }
}

enum Kind {
    Evolved { evo: Evolution, tau: f64 },
    Ground { family: GroundFamily, n: usize },
    Unitary {
        dispatcher: DispatcherSpec,
        w: Circuit,
        base: PauliString,
    },
    Flipped { phi: Vec<f64> },
}

/// Values of one input: the concept value and, for basis concepts, the exact features.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluated {
    pub f: f64,
    pub features: Option<Vec<f64>>,
}

/// A compiled concept ready for evaluation.
pub struct Concept {
    spec: ConceptSpec,
    kind: Kind,
    basis: Vec<PauliString>,
    alpha: Vec<f64>,
    n_input: usize,
}

impl std::fmt::Debug for Concept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Concept").field("spec", &self.spec).finish()
    }
}

fn check_alpha(alpha: &[f64], m: usize) -> Result<()> {
    if alpha.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: alpha.len() });
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && a.abs() <= 1.0)) {
        return Err(Error::invalid(format!("coefficient {a} outside [-1, 1]")));
    }
    Ok(())
}

impl Concept {
    pub fn build(spec: &ConceptSpec) -> Result<Self> {
        let (kind, basis, alpha, n_input) = match spec {
            ConceptSpec::Evolved { hamiltonian, tau, basis, alpha } => {
                if !tau.is_finite() {
                    return Err(Error::invalid("evolution time must be finite"));
                }
                let evo = Evolution::from_source(hamiltonian)?;
                let b = basis.enumerate(evo.n)?;
                check_alpha(alpha, b.len())?;
                let n = evo.n;
                (Kind::Evolved { evo, tau: *tau }, b, alpha.clone(), n)
            }
            ConceptSpec::GroundState { family, basis, alpha } => {
                let n = match family {
                    GroundFamily::Kitaev { circuit } => circuit.n_qubits(),
                    GroundFamily::Ising { n, .. } => *n,
                };
                let b = basis.enumerate(n)?;
                check_alpha(alpha, b.len())?;
                (Kind::Ground { family: family.clone(), n }, b, alpha.clone(), n)
            }
            ConceptSpec::UnitaryParam { dispatcher, template, alpha, base_obs } => {
                dispatcher.validate()?;
                if template.n != dispatcher.n_s || base_obs.n_qubits() != dispatcher.n_s {
                    return Err(Error::invalid("template and base observable must act on the n_S payload qubits"));
                }
                let w = template.build(alpha)?;
                let n = dispatcher.n_inputs();
                (
                    Kind::Unitary {
                        dispatcher: dispatcher.clone(),
                        w,
                        base: base_obs.clone(),
                    },
                    Vec::new(),
                    alpha.clone(),
                    n,
                )
            }
            ConceptSpec::Flipped { x_fixed, hamiltonian, tau, basis } => {
                let evo = Evolution::from_source(hamiltonian)?;
                let b = basis.enumerate(evo.n)?;
                let state = evo.evolve(x_fixed, *tau)?;
                let phi = b.iter().map(|p| p.expectation_raw(&state, evo.inner)).collect::<Result<Vec<_>>>()?;
                let m = b.len();
                (Kind::Flipped { phi }, b, Vec::new(), m)
            }
        };
        Ok(Concept {
            spec: spec.clone(),
            kind,
            basis,
            alpha,
            n_input,
        })
    }

    pub fn spec(&self) -> &ConceptSpec {
        &self.spec
    }

    /// Input bit length; for the flipped concept, the coefficient count `m`.
    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn basis(&self) -> &[PauliString] {
        &self.basis
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn is_flipped(&self) -> bool {
        matches!(self.kind, Kind::Flipped { .. })
    }

    pub fn dispatcher(&self) -> Option<&DispatcherSpec> {
        match &self.kind {
            Kind::Unitary { dispatcher, .. } => Some(dispatcher),
            _ => None,
        }
    }

    pub fn observable(&self) -> Result<PauliObservable> {
        PauliObservable::new(self.basis.clone(), self.alpha.clone())
    }

    /// Exact expectations `⟨Pᵢ⟩` of the basis on the fixed flipped state.
    pub fn flipped_truth(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Flipped { phi } => Some(phi),
            _ => None,
        }
    }

    fn check_x(&self, x: &BitString) -> Result<()> {
        if self.is_flipped() {
            return Err(Error::invalid("flipped concepts take a coefficient vector as input"));
        }
        if x.len() != self.n_input {
            return Err(Error::DimensionMismatch {
                expected: self.n_input,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Work-register vector of `ρ(x)` and its clock dimension.
    fn state(&self, x: &BitString) -> Result<(Vec<C64>, usize)> {
        match &self.kind {
            Kind::Evolved { evo, tau } => Ok((evo.evolve(x, *tau)?, evo.inner)),
            Kind::Ground { family, n } => {
                let (h, inner) = match family {
                    GroundFamily::Kitaev { circuit } => {
                        let k = build_kitaev(circuit, x)?;
                        let inner = k.clock_levels();
                        (k.operator().clone(), inner)
                    }
                    GroundFamily::Ising { j, hx, hz, seed, .. } => {
                        let field: Vec<f64> = x.bits().iter().map(|&b| if b { -hz } else { *hz }).collect();
                        (ising_chain(*n, *j, *hx, &field, *seed)?, 1)
                    }
                };
                let g = ground_state(&h)?;
                if g.degenerate {
                    return Err(Error::DegenerateGroundState { gap: g.gap });
                }
                Ok((g.state, inner))
            }
            _ => unreachable!(),
        }
    }

    pub fn evaluate(&self, x: &BitString) -> Result<Evaluated> {
        self.check_x(x)?;
        match &self.kind {
            Kind::Unitary { dispatcher, w, base } => {
                let (d, payload) = dispatcher.payload_state(x)?;
                let mut rot = w.inverse();
                if let DispatchBranch::Probe { .. } = d.branch {
                    rot = rot.then(&dispatcher.rotation(d.x_q)?.inverse())?;
                }
                let out = rot.run(&payload)?;
                let f = crate::pauli::pauli_expectation(&out, base)?;
                Ok(Evaluated { f, features: None })
            }
            _ => {
                let (v, inner) = self.state(x)?;
                let phi = self.basis.iter().map(|p| p.expectation_raw(&v, inner)).collect::<Result<Vec<_>>>()?;
                let f = self.alpha.iter().zip(&phi).map(|(a, p)| a * p).sum();
                Ok(Evaluated { f, features: Some(phi) })
            }
        }
    }

    /// `f^α(x)`.
    pub fn eval(&self, x: &BitString) -> Result<f64> {
        Ok(self.evaluate(x)?.f)
    }

    /// `Σ αᵢ ⟨Pᵢ⟩` on the fixed state of a flipped concept.
    pub fn eval_flipped(&self, alpha: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::Flipped { phi } => {
                if alpha.len() != phi.len() {
                    return Err(Error::DimensionMismatch { expected: phi.len(), got: alpha.len() });
                }
                Ok(alpha.iter().zip(phi).map(|(a, p)| a * p).sum())
            }
            _ => Err(Error::invalid("not a flipped concept")),
        }
    }

    pub fn eval_input(&self, x: &InputValue) -> Result<f64> {
        match x {
            InputValue::Bits(b) => self.eval(b),
            InputValue::Real(a) => self.eval_flipped(a),
        }
    }

    pub fn features(&self, x: &BitString) -> Result<Vec<f64>> {
        self.evaluate(x)?
            .features
            .ok_or_else(|| Error::invalid("this concept variant has no Pauli feature map"))
    }
}

/// `f^α(x)` from a spec.
pub fn concept_eval(spec: &ConceptSpec, x: &BitString) -> Result<f64> {
    Concept::build(spec)?.eval(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureNoise {
    #[default]
    Exact,
    /// Mean of `shots` single-shot `±1` outcomes per entry.
    Shots { shots: u64 },
}

impl FeatureNoise {
    /// `√(9/s)`, the three-sigma width of one entry.
    pub fn eps1(&self) -> f64 {
        match self {
            FeatureNoise::Exact => 0.0,
            FeatureNoise::Shots { shots } => (9.0 / *shots as f64).sqrt().min(2.0),
        }
    }
}

/// Empirical mean of `shots` outcomes of a `±1` observable with expectation `e`.
pub fn shot_estimate<R: Rng + ?Sized>(e: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shot count must be positive"));
    }
    let p = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
    let bin = Binomial::new(shots, p).map_err(|e| Error::invalid(e.to_string()))?;
    let count = bin.sample(rng);
    Ok((2 * count) as f64 / shots as f64 - 1.0)
}

/// Applies the feature noise model to exact features.
pub fn noisy_features<R: Rng + ?Sized>(exact: &[f64], noise: FeatureNoise, rng: &mut R) -> Result<Vec<f64>> {
    match noise {
        FeatureNoise::Exact => Ok(exact.to_vec()),
        FeatureNoise::Shots { shots } => exact.iter().map(|&e| shot_estimate(e, shots, rng)).collect(),
    }
}

/// `φ(x)` under a noise model.
pub fn feature_map<R: Rng + ?Sized>(concept: &Concept, x: &BitString, noise: FeatureNoise, rng: &mut R) -> Result<Vec<f64>> {
    noisy_features(&concept.features(x)?, noise, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelNoise {
    #[default]
    Exact,
    /// Independent noise uniform on `[−ε₂, ε₂]`.
    Uniform { eps2: f64 },
    /// Finite-shot estimate of each term of `O(α)`.
    Shots { shots: u64 },
}

/// Input value of a sample: a bitstring, or a coefficient vector for flipped concepts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputValue {
    Bits(BitString),
    Real(Vec<f64>),
}

impl InputValue {
    pub fn bits(&self) -> Option<&BitString> {
        match self {
            InputValue::Bits(b) => Some(b),
            InputValue::Real(_) => None,
        }
    }

    pub fn real(&self) -> Option<&[f64]> {
        match self {
            InputValue::Real(a) => Some(a),
            InputValue::Bits(_) => None,
        }
    }

    fn key(&self) -> String {
        match self {
            InputValue::Bits(b) => b.to_string(),
            InputValue::Real(a) => format!("{a:?}"),
        }
    }
}

/// One entry of a joint probe/measurement law for the `x₁ = 0` branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEntry {
    pub x_q: usize,
    pub labels: Vec<u8>,
    pub weight: f64,
}

/// Draws `(x_Q, probe labels)` for the `x₁ = 0` branch of a dispatcher input.
pub trait JointSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<u8>);
}

impl JointSampler for [JointEntry] {
    fn sample(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<u8>) {
        let total: f64 = self.iter().map(|e| e.weight).sum();
        let mut u = rng.random::<f64>() * total;
        for e in self {
            if u < e.weight {
                return (e.x_q, e.labels.clone());
            }
            u -= e.weight;
        }
        let last = self.last().unwrap();
        (last.x_q, last.labels.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    #[default]
    Uniform,
    /// Independent bits with `P(x_i = 1) = p[i]`.
    Bernoulli { p: Vec<f64> },
    /// Explicit `(x, probability)` table.
    Table { entries: Vec<(BitString, f64)> },
    /// Fair coin for `x₁`; on `x₁ = 0` uniform `x_Q` and uniform stab1 labels (or a joint
    /// law); on `x₁ = 1` uniform `x_Q`, `x_S` from `bqp_law` (uniform when absent) and
    /// uniform remaining payload bits.
    Dispatcher {
        #[serde(default)]
        bqp_law: Option<Vec<f64>>,
        #[serde(default)]
        joint: Option<Vec<JointEntry>>,
    },
    /// Product-uniform coefficients on `[−1, 1]^m` (flipped concepts).
    UniformReal,
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn check_probs(p: &[f64], sum_to_one: bool) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
        return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
    }
    if sum_to_one {
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("probabilities sum to {s}, expected 1")));
        }
    }
    Ok(())
}

impl InputDistribution {
    pub fn validate(&self, concept: &Concept) -> Result<()> {
        let n = concept.n_input();
        match self {
            InputDistribution::Uniform => {
                if concept.is_flipped() {
                    return Err(Error::invalid("flipped concepts need the uniform_real distribution"));
                }
            }
            InputDistribution::Bernoulli { p } => {
                if p.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: p.len() });
                }
                check_probs(p, false)?;
            }
            InputDistribution::Table { entries } => {
                if entries.is_empty() {
                    return Err(Error::invalid("cannot sample from an empty table"));
                }
                if let Some((x, _)) = entries.iter().find(|(x, _)| x.len() != n) {
                    return Err(Error::DimensionMismatch { expected: n, got: x.len() });
                }
                let p: Vec<f64> = entries.iter().map(|e| e.1).collect();
                check_probs(&p, true)?;
            }
            InputDistribution::Dispatcher { bqp_law, joint } => {
                let d = concept
                    .dispatcher()
                    .ok_or_else(|| Error::invalid("dispatcher distribution needs a unitary-parametrized concept"))?;
                if let Some(law) = bqp_law {
                    if law.len() != 1usize << d.n_s {
                        return Err(Error::DimensionMismatch { expected: 1 << d.n_s, got: law.len() });
                    }
                    check_probs(law, true)?;
                }
                if let Some(j) = joint {
                    if j.is_empty() {
                        return Err(Error::invalid("joint probe law is empty"));
                    }
                    for e in j {
                        if e.x_q >= 1usize << d.n_q || e.labels.len() != d.n_s || e.labels.iter().any(|&l| l > 5) || !(e.weight >= 0.0) {
                            return Err(Error::invalid(format!("bad joint law entry {e:?}")));
                        }
                    }
                }
            }
            InputDistribution::UniformReal => {
                if !concept.is_flipped() {
                    return Err(Error::invalid("uniform_real applies to flipped concepts only"));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, concept: &Concept, rng: &mut ChaCha8Rng) -> Result<InputValue> {
        let n = concept.n_input();
        let bits = |rng: &mut ChaCha8Rng, len: usize| BitString::new((0..len).map(|_| rng.random_bool(0.5)).collect());
        Ok(match self {
            InputDistribution::Uniform => InputValue::Bits(bits(rng, n)),
            InputDistribution::Bernoulli { p } => InputValue::Bits(BitString::new(p.iter().map(|&pi| rng.random_bool(pi)).collect())),
            InputDistribution::Table { entries } => {
                let w: Vec<f64> = entries.iter().map(|e| e.1).collect();
                InputValue::Bits(entries[pick(&w, rng)].0.clone())
            }
            InputDistribution::UniformReal => InputValue::Real((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()),
            InputDistribution::Dispatcher { bqp_law, joint } => {
                let d = concept.dispatcher().unwrap();
                let x1 = rng.random_bool(0.5);
                let head = BitString::new(vec![x1]);
                let x = if !x1 {
                    let (x_q, labels) = match joint {
                        Some(j) => j.as_slice().sample(rng),
                        None => (
                            rng.random_range(0..1usize << d.n_q),
                            (0..d.n_s).map(|_| rng.random_range(0..STAB1_LABELS.len() as u8)).collect(),
                        ),
                    };
                    let payload = match &d.probe_catalog {
                        crate::circuit::ProbeCatalog::Packed => d.encode_probe(&labels)?,
                        crate::circuit::ProbeCatalog::Explicit(_) => bits(rng, d.n_s),
                    };
                    head.concat(&BitString::from_index(x_q, d.n_q)).concat(&payload)
                } else {
                    let x_q = bits(rng, d.n_q);
                    let x_s = match bqp_law {
                        Some(law) => BitString::from_index(pick(law, rng), d.n_s),
                        None => bits(rng, d.n_s),
                    };
                    let rest = bits(rng, d.payload_bits() - d.n_s);
                    head.concat(&x_q).concat(&x_s).concat(&rest)
                };
                InputValue::Bits(x)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: InputValue,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub concept_fingerprint: String,
    pub eps2_declared: f64,
    pub noise: LabelNoise,
    pub seed: u64,
    pub stream_offset: u64,
    pub distribution: InputDistribution,
    pub n_input: usize,
    pub count: usize,
    /// `max_ℓ |y_ℓ − f(x_ℓ)|` measured during generation.
    pub audit_max_dev: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Sample>,
    /// Exact concept values, aligned with `samples`.
    pub truth: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// JSON lines: the meta record, then one `{x, y}` per sample.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &MetaLine { meta: self.meta.clone() })?;
        w.write_all(b"\n")?;
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }

    /// Reads a file written by [`Dataset::write_jsonl`]. Exact values are not stored, so
    /// `truth` comes back empty.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty dataset file".into(),
        })?;
        let meta: MetaLine = serde_json::from_str(&first?).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let mut samples = Vec::new();
        for (i, l) in lines {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        Ok(Dataset {
            meta: meta.meta,
            samples,
            truth: Vec::new(),
        })
    }
}

/// Evaluates each distinct input once, in parallel.
pub fn evaluate_distinct(concept: &Concept, inputs: &[InputValue]) -> Result<HashMap<String, Evaluated>> {
    let mut uniq: Vec<&InputValue> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for x in inputs {
        if seen.insert(x.key()) {
            uniq.push(x);
        }
    }
    let vals: Vec<(String, Evaluated)> = uniq
        .par_iter()
        .map(|x| {
            let ev = match x {
                InputValue::Bits(b) => concept.evaluate(b)?,
                InputValue::Real(a) => Evaluated {
                    f: concept.eval_flipped(a)?,
                    features: concept.flipped_truth().map(|p| p.to_vec()),
                },
            };
            Ok((x.key(), ev))
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().collect())
}

/// Draws `count` inputs; input `i` uses stream `stream_offset + i` of `seed`.
pub fn sample_inputs(concept: &Concept, dist: &InputDistribution, count: usize, seed: u64, stream_offset: u64) -> Result<Vec<InputValue>> {
    dist.validate(concept)?;
    (0..count)
        .into_par_iter()
        .map(|i| dist.sample(concept, &mut stream_rng(seed, stream_offset + i as u64)))
        .collect()
}

fn noisy_label(concept: &Concept, ev: &Evaluated, x: &InputValue, noise: LabelNoise, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match noise {
        LabelNoise::Exact => ev.f,
        LabelNoise::Uniform { eps2 } => ev.f + if eps2 > 0.0 { rng.random_range(-eps2..=eps2) } else { 0.0 },
        LabelNoise::Shots { shots } => match (&ev.features, x) {
            (Some(phi), InputValue::Bits(_)) => {
                let mut y = 0.0;
                for (a, e) in concept.alpha().iter().zip(phi) {
                    if *a != 0.0 {
                        y += a * shot_estimate(*e, shots, rng)?;
                    }
                }
                y
            }
            (Some(phi), InputValue::Real(a)) => {
                let mut y = 0.0;
                for (ai, e) in a.iter().zip(phi) {
                    if *ai != 0.0 {
                        y += ai * shot_estimate(*e, shots, rng)?;
                    }
                }
                y
            }
            (None, _) => shot_estimate(ev.f, shots, rng)?,
        },
    })
}

/// Worst-case label deviation implied by a noise model (three-sigma for shots).
pub fn declared_eps2(concept: &Concept, noise: LabelNoise) -> f64 {
    match noise {
        LabelNoise::Exact => 0.0,
        LabelNoise::Uniform { eps2 } => eps2,
        LabelNoise::Shots { shots } => {
            let a2: f64 = if concept.is_flipped() {
                concept.n_input() as f64
            } else if concept.basis().is_empty() {
                1.0
            } else {
                concept.alpha().iter().map(|a| a * a).sum()
            };
            3.0 * (a2 / shots as f64).sqrt()
        }
    }
}

/// Generates a dataset. Sample `i` draws its input and its label noise from stream
/// `stream_offset + i` of `seed`, so the output does not depend on thread count.
pub fn gen_dataset_streams(
    concept: &Concept,
    dist: &InputDistribution,
    count: usize,
    noise: LabelNoise,
    seed: u64,
    stream_offset: u64,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    match noise {
        LabelNoise::Uniform { eps2 } if !(eps2.is_finite() && eps2 >= 0.0) => {
            return Err(Error::invalid(format!("eps2 must be >= 0, got {eps2}")));
        }
        LabelNoise::Shots { shots: 0 } => return Err(Error::invalid("shot count must be positive")),
        _ => {}
    }
    dist.validate(concept)?;
    let draws: Vec<(InputValue, ChaCha8Rng)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, stream_offset + i as u64);
            let x = dist.sample(concept, &mut rng)?;
            Ok((x, rng))
        })
        .collect::<Result<_>>()?;
    let inputs: Vec<InputValue> = draws.iter().map(|d| d.0.clone()).collect();
    let table = evaluate_distinct(concept, &inputs)?;
    let labeled: Vec<(Sample, f64)> = draws
        .into_par_iter()
        .map(|(x, mut rng)| {
            let ev = &table[&x.key()];
            let y = noisy_label(concept, ev, &x, noise, &mut rng)?;
            Ok((Sample { x, y }, ev.f))
        })
        .collect::<Result<_>>()?;
    let audit = labeled.iter().map(|(s, f)| (s.y - f).abs()).fold(0.0, f64::max);
    let (samples, truth): (Vec<Sample>, Vec<f64>) = labeled.into_iter().unzip();
    Ok(Dataset {
        meta: DatasetMeta {
            schema_version: DATASET_SCHEMA_VERSION,
            concept_fingerprint: concept.spec().fingerprint(),
            eps2_declared: declared_eps2(concept, noise),
            noise,
            seed,
            stream_offset,
            distribution: dist.clone(),
            n_input: concept.n_input(),
            count,
            audit_max_dev: audit,
        },
        samples,
        truth,
    })
}

/// `T^α = {(x_ℓ, y_ℓ)}` of size `count`.
pub fn gen_dataset(spec: &ConceptSpec, dist: &InputDistribution, count: usize, noise: LabelNoise, seed: u64) -> Result<Dataset> {
    gen_dataset_streams(&Concept::build(spec)?, dist, count, noise, seed, 0)
}

/// Probe state and its labels for the `x₁ = 0` branch of a dispatcher input, or `None`.
pub fn probe_of(d: &DispatcherSpec, x: &BitString) -> Result<Option<(usize, Vec<u8>)>> {
    let dec = d.decode(x)?;
    Ok(match dec.branch {
        DispatchBranch::Probe { labels } => Some((dec.x_q, labels)),
        DispatchBranch::Bqp { .. } => None,
    })
}

/// Product stabilizer state of `labels` (re-exported for callers building probe sets).
pub fn probe_state(labels: &[u8]) -> Result<StateVector> {
    prepare_stabilizer_product(labels)
}

//! Pauli strings, real Pauli observables `O(α) = Σ αᵢ Pᵢ` and exact expectation values.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::StateVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[o, z], [z, o]],
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        }
    }
}

/// A tensor product of single-qubit Paulis; letter `q` acts on qubit `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        PauliString { letters }
    }

    pub fn identity(n: usize) -> Self {
        PauliString {
            letters: vec![Pauli::I; n],
        }
    }

    /// `p` on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.letters[q] = p;
        s
    }

    pub fn from_label(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(Error::invalid("empty Pauli label"));
        }
        label
            .chars()
            .enumerate()
            .map(|(pos, ch)| {
                Pauli::from_symbol(ch).ok_or_else(|| Error::PauliParse {
                    label: label.to_string(),
                    pos,
                    ch,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString::new)
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.symbol()).collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn letter(&self, q: usize) -> Pauli {
        self.letters[q]
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// Bit masks over basis-state indices: X-type flips and Z-type phases. Y sets both.
    fn masks(&self) -> (usize, usize, u32) {
        let n = self.letters.len();
        let (mut xm, mut zm, mut ny) = (0usize, 0usize, 0u32);
        for (q, p) in self.letters.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => xm |= bit,
                Pauli::Z => zm |= bit,
                Pauli::Y => {
                    xm |= bit;
                    zm |= bit;
                    ny += 1;
                }
            }
        }
        (xm, zm, ny)
    }

    /// Applies the string in place to the leading register of a `2^n ⊗ inner` vector.
    pub fn apply_in_place(&self, amps: &mut [C64], inner: usize) -> Result<()> {
        let n = self.letters.len();
        let expected = (1usize << n) * inner;
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        let (xm, zm, ny) = self.masks();
        let yphase = C64::new(0.0, 1.0).powu(ny);
        let src = amps.to_vec();
        for w in 0..(1usize << n) {
            let sign = if (w & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let ph = yphase * sign;
            let target = w ^ xm;
            for c in 0..inner {
                amps[target * inner + c] = ph * src[w * inner + c];
            }
        }
        Ok(())
    }

    /// `⟨ψ|P ⊗ I_inner|ψ⟩` for a vector on `2^n ⊗ inner`.
    pub fn expectation_raw(&self, amps: &[C64], inner: usize) -> Result<f64> {
        let n = self.letters.len();
        let expected = (1usize << n) * inner;
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        let (xm, zm, ny) = self.masks();
        let yphase = C64::new(0.0, 1.0).powu(ny);
        let mut acc = C64::new(0.0, 0.0);
        for w in 0..(1usize << n) {
            let sign = if (w & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let target = w ^ xm;
            let mut s = C64::new(0.0, 0.0);
            for c in 0..inner {
                s += amps[target * inner + c].conj() * amps[w * inner + c];
            }
            acc += s * sign;
        }
        Ok((acc * yphase).re)
    }

    /// Dense `2^n × 2^n` matrix, row-major.
    pub fn dense_matrix(&self) -> Vec<C64> {
        let n = self.letters.len();
        let dim = 1usize << n;
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        let (xm, zm, ny) = self.masks();
        let yphase = C64::new(0.0, 1.0).powu(ny);
        for col in 0..dim {
            let sign = if (col & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(col ^ xm) * dim + col] = yphase * sign;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PauliString::from_label(s)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PauliString::from_label(&s).map_err(serde::de::Error::custom)
    }
}

/// Which qubit subsets count as "k-local".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Supports inside a contiguous window of `k` qubits on a line.
    #[default]
    LineContiguous,
    /// Any support of size at most `k`.
    AllSubsets,
}

fn words(k: usize) -> Vec<Vec<Pauli>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|w| {
                Pauli::ALL.iter().map(move |&p| {
                    let mut v = w.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out
}

/// Deterministic k-local Pauli basis, identity first.
///
/// `LineContiguous` walks windows `[s, s+k)` in order of `s` and, within a window, the
/// letter words in lexicographic `I < X < Y < Z` order, keeping the first occurrence of
/// each string. `AllSubsets` orders by weight, then support (lexicographic), then letters.
pub fn enumerate_local_paulis(n: usize, k: usize, geometry: Geometry) -> Result<Vec<PauliString>> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "locality k = {k} must satisfy 1 <= k <= n = {n}"
        )));
    }
    let mut out = vec![PauliString::identity(n)];
    match geometry {
        Geometry::LineContiguous => {
            let mut seen = std::collections::HashSet::new();
            seen.insert(PauliString::identity(n));
            for start in 0..=(n - k) {
                for w in words(k) {
                    if w.iter().all(|&p| p == Pauli::I) {
                        continue;
                    }
                    let mut letters = vec![Pauli::I; n];
                    letters[start..start + k].copy_from_slice(&w);
                    let s = PauliString::new(letters);
                    if seen.insert(s.clone()) {
                        out.push(s);
                    }
                }
            }
        }
        Geometry::AllSubsets => {
            for weight in 1..=k {
                for support in combinations(n, weight) {
                    for w in words_non_identity(weight) {
                        let mut letters = vec![Pauli::I; n];
                        for (&q, &p) in support.iter().zip(&w) {
                            letters[q] = p;
                        }
                        out.push(PauliString::new(letters));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn words_non_identity(k: usize) -> Vec<Vec<Pauli>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|w| {
                Pauli::NON_IDENTITY.iter().map(move |&p| {
                    let mut v = w.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out
}

pub(crate) fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// `⟨ψ|P|ψ⟩`.
pub fn pauli_expectation(state: &StateVector, p: &PauliString) -> Result<f64> {
    if p.n_qubits() != state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            got: p.n_qubits(),
        });
    }
    p.expectation_raw(state.amplitudes(), 1)
}

/// A real combination of Pauli strings over a fixed basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliObservable {
    n: usize,
    basis: Vec<PauliString>,
    alpha: Vec<f64>,
}

impl PauliObservable {
    /// Checks that the basis shares one qubit count and every coefficient lies in `[-1, 1]`.
    pub fn new(basis: Vec<PauliString>, alpha: Vec<f64>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::invalid("observable basis is empty"));
        }
        if basis.len() != alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: alpha.len(),
            });
        }
        let n = basis[0].n_qubits();
        if let Some(bad) = basis.iter().find(|p| p.n_qubits() != n) {
            return Err(Error::invalid(format!(
                "basis string {bad} has {} qubits, expected {n}",
                bad.n_qubits()
            )));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && a.abs() <= 1.0)) {
            return Err(Error::invalid(format!("coefficient {a} outside [-1, 1]")));
        }
        Ok(PauliObservable { n, basis, alpha })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[PauliString] {
        &self.basis
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.alpha.iter().map(|a| a.abs()).sum()
    }

    /// Nonzero terms only.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &PauliString)> {
        self.alpha
            .iter()
            .zip(&self.basis)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, p)| (*a, p))
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        if state.n_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: state.n_qubits(),
            });
        }
        self.expectation_raw(state.amplitudes(), 1)
    }

    /// Expectation of `O ⊗ I_inner`.
    pub fn expectation_raw(&self, amps: &[C64], inner: usize) -> Result<f64> {
        let mut acc = 0.0;
        for (a, p) in self.terms() {
            acc += a * p.expectation_raw(amps, inner)?;
        }
        Ok(acc)
    }

    /// Dense matrix (row-major), for small-n cross checks.
    pub fn dense_matrix(&self) -> Vec<C64> {
        let dim = 1usize << self.n;
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for (a, p) in self.terms() {
            for (dst, src) in m.iter_mut().zip(p.dense_matrix()) {
                *dst += src * a;
            }
        }
        m
    }
}

/// `observable_expectation(ψ, O)`.
pub fn observable_expectation(state: &StateVector, obs: &PauliObservable) -> Result<f64> {
    obs.expectation(state)
}

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The gate alphabet. Custom matrices are checked for unitarity on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    S,
    T,
    Cnot,
    Cz,
    Rx(f64),
    Ry(f64),
    Rz(f64),
    Custom1([[C64; 2]; 2]),
    Custom2(Box<[[C64; 4]; 4]>),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Cz | GateKind::Custom2(_) => 2,
            _ => 1,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Rz(_) => "RZ",
            GateKind::Custom1(_) => "U1",
            GateKind::Custom2(_) => "U2",
        }
    }
}

/// Dense local matrix of a gate.
#[derive(Clone, Debug, PartialEq)]
pub enum GateMatrix {
    One([[C64; 2]; 2]),
    Two(Box<[[C64; 4]; 4]>),
}

/// A gate applied to one or two distinct qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::invalid(format!(
                "{} takes {} target(s), got {}",
                kind.name(),
                kind.arity(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::invalid(format!(
                "{} targets must be distinct, got {:?}",
                kind.name(),
                targets
            )));
        }
        match &kind {
            GateKind::Custom1(m) => check_unitary(&m.iter().flatten().copied().collect::<Vec<_>>(), 2)?,
            GateKind::Custom2(m) => check_unitary(&m.iter().flatten().copied().collect::<Vec<_>>(), 4)?,
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) if !t.is_finite() => {
                return Err(Error::invalid("rotation angle must be finite"));
            }
            _ => {}
        }
        Ok(Gate { kind, targets })
    }

    pub fn single(kind: GateKind, q: usize) -> Result<Self> {
        Gate::new(kind, vec![q])
    }

    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        Gate::new(GateKind::Cnot, vec![control, target])
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn max_target(&self) -> usize {
        *self.targets.iter().max().expect("gate has targets")
    }

    pub fn matrix(&self) -> GateMatrix {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let h = FRAC_1_SQRT_2;
        match &self.kind {
            GateKind::X => GateMatrix::One([[z, o], [o, z]]),
            GateKind::Y => GateMatrix::One([[z, c(0.0, -1.0)], [c(0.0, 1.0), z]]),
            GateKind::Z => GateMatrix::One([[o, z], [z, -o]]),
            GateKind::H => GateMatrix::One([[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]),
            GateKind::S => GateMatrix::One([[o, z], [z, c(0.0, 1.0)]]),
            GateKind::T => GateMatrix::One([[o, z], [z, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]]),
            GateKind::Rx(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                GateMatrix::One([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
            }
            GateKind::Ry(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                GateMatrix::One([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
            }
            GateKind::Rz(t) => GateMatrix::One([
                [C64::from_polar(1.0, -t / 2.0), z],
                [z, C64::from_polar(1.0, t / 2.0)],
            ]),
            GateKind::Cnot => GateMatrix::Two(Box::new([
                [o, z, z, z],
                [z, o, z, z],
                [z, z, z, o],
                [z, z, o, z],
            ])),
            GateKind::Cz => GateMatrix::Two(Box::new([
                [o, z, z, z],
                [z, o, z, z],
                [z, z, o, z],
                [z, z, z, -o],
            ])),
            GateKind::Custom1(m) => GateMatrix::One(*m),
            GateKind::Custom2(m) => GateMatrix::Two(m.clone()),
        }
    }

    /// The adjoint gate on the same targets.
    pub fn inverse(&self) -> Gate {
        let kind = match &self.kind {
            GateKind::X | GateKind::Y | GateKind::Z | GateKind::H | GateKind::Cnot | GateKind::Cz => {
                self.kind.clone()
            }
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Rz(t) => GateKind::Rz(-t),
            _ => match self.matrix() {
                GateMatrix::One(m) => {
                    let mut a = [[c(0.0, 0.0); 2]; 2];
                    for (i, row) in a.iter_mut().enumerate() {
                        for (j, e) in row.iter_mut().enumerate() {
                            *e = m[j][i].conj();
                        }
                    }
                    GateKind::Custom1(a)
                }
                GateMatrix::Two(m) => {
                    let mut a = [[c(0.0, 0.0); 4]; 4];
                    for (i, row) in a.iter_mut().enumerate() {
                        for (j, e) in row.iter_mut().enumerate() {
                            *e = m[j][i].conj();
                        }
                    }
                    GateKind::Custom2(Box::new(a))
                }
            },
        };
        Gate {
            kind,
            targets: self.targets.clone(),
        }
    }

    /// Haar-random single-qubit unitary on qubit `q`.
    pub fn haar_1q<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Gate {
        let g: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = c(g[0] / nrm, g[1] / nrm);
        let b = c(g[2] / nrm, g[3] / nrm);
        let phase = C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
        let m = [[a * phase, -b.conj() * phase], [b * phase, a.conj() * phase]];
        Gate {
            kind: GateKind::Custom1(m),
            targets: vec![q],
        }
    }

    /// `exp(-i θ/2 · P₀⊗P₁)` on two qubits, for Pauli letters given as 2×2 matrices.
    pub fn pauli_rotation_2q(letters: [crate::pauli::Pauli; 2], theta: f64, q0: usize, q1: usize) -> Result<Gate> {
        let pm = |p: crate::pauli::Pauli| p.matrix();
        let (a, b) = (pm(letters[0]), pm(letters[1]));
        let (s, co) = (theta / 2.0).sin_cos();
        let mut m = [[c(0.0, 0.0); 4]; 4];
        for r in 0..4 {
            for col in 0..4 {
                let kr = a[r >> 1][col >> 1] * b[r & 1][col & 1];
                let id = if r == col { co } else { 0.0 };
                m[r][col] = c(id, 0.0) + c(0.0, -s) * kr;
            }
        }
        Gate::new(GateKind::Custom2(Box::new(m)), vec![q0, q1])
    }
}

fn check_unitary(m: &[C64], d: usize) -> Result<()> {
    if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::invalid("custom gate has non-finite entries"));
    }
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let s: C64 = (0..d).map(|k| m[k * d + i].conj() * m[k * d + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - c(target, 0.0)).norm());
        }
    }
    if worst > UNITARY_TOL {
        return Err(Error::invalid(format!(
            "custom gate is not unitary (max |U†U - I| = {worst:.3e})"
        )));
    }
    Ok(())
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        for t in &self.targets {
            write!(f, " {t}")?;
        }
        match &self.kind {
            GateKind::Rx(t) | GateKind::Ry(t) | GateKind::Rz(t) => write!(f, " {t:?}"),
            GateKind::Custom1(m) => m.iter().flatten().try_for_each(|z| write!(f, " {:?} {:?}", z.re, z.im)),
            GateKind::Custom2(m) => m.iter().flatten().try_for_each(|z| write!(f, " {:?} {:?}", z.re, z.im)),
            _ => Ok(()),
        }
    }
}

/// Parses one line of the circuit text format: `KIND target [target2] [theta | matrix entries]`.
pub(crate) fn parse_gate_line(line: &str, lineno: usize) -> Result<Gate> {
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let mut tok = line.split_whitespace();
    let kind = tok.next().ok_or_else(|| err("empty gate line".into()))?.to_ascii_uppercase();
    let rest: Vec<&str> = tok.collect();
    let idx = |i: usize| -> Result<usize> {
        rest.get(i)
            .ok_or_else(|| err(format!("{kind}: missing target {}", i + 1)))?
            .parse::<usize>()
            .map_err(|e| err(format!("{kind}: bad target: {e}")))
    };
    let num = |i: usize| -> Result<f64> {
        rest.get(i)
            .ok_or_else(|| err(format!("{kind}: missing numeric argument {}", i + 1)))?
            .parse::<f64>()
            .map_err(|e| err(format!("{kind}: bad number: {e}")))
    };
    let expect_len = |n: usize| -> Result<()> {
        if rest.len() != n {
            return Err(err(format!("{kind}: expected {n} arguments, got {}", rest.len())));
        }
        Ok(())
    };
    let gate = match kind.as_str() {
        "X" | "Y" | "Z" | "H" | "S" | "T" => {
            expect_len(1)?;
            let k = match kind.as_str() {
                "X" => GateKind::X,
                "Y" => GateKind::Y,
                "Z" => GateKind::Z,
                "H" => GateKind::H,
                "S" => GateKind::S,
                _ => GateKind::T,
            };
            Gate::single(k, idx(0)?)
        }
        "CNOT" | "CX" | "CZ" => {
            expect_len(2)?;
            let k = if kind == "CZ" { GateKind::Cz } else { GateKind::Cnot };
            Gate::new(k, vec![idx(0)?, idx(1)?])
        }
        "RX" | "RY" | "RZ" => {
            expect_len(2)?;
            let t = num(1)?;
            let k = match kind.as_str() {
                "RX" => GateKind::Rx(t),
                "RY" => GateKind::Ry(t),
                _ => GateKind::Rz(t),
            };
            Gate::single(k, idx(0)?)
        }
        "U1" => {
            expect_len(1 + 8)?;
            let mut m = [[c(0.0, 0.0); 2]; 2];
            for r in 0..2 {
                for col in 0..2 {
                    let base = 1 + 2 * (2 * r + col);
                    m[r][col] = c(num(base)?, num(base + 1)?);
                }
            }
            Gate::single(GateKind::Custom1(m), idx(0)?)
        }
        "U2" => {
            expect_len(2 + 32)?;
            let mut m = [[c(0.0, 0.0); 4]; 4];
            for r in 0..4 {
                for col in 0..4 {
                    let base = 2 + 2 * (4 * r + col);
                    m[r][col] = c(num(base)?, num(base + 1)?);
                }
            }
            Gate::new(GateKind::Custom2(Box::new(m)), vec![idx(0)?, idx(1)?])
        }
        other => return Err(err(format!("unknown gate kind {other:?}"))),
    };
    gate.map_err(|e| err(e.to_string()))
}

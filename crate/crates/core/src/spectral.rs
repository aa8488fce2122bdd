//! Sparse Hermitian operators, time evolution `e^{iHt}` and lowest-eigenpair solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{inner, norm};
use crate::error::{Error, Result};
use crate::limits::DENSE_DIM_LIMIT;

const HERMITIAN_TOL: f64 = 1e-12;
const PAR_DIM: usize = 1 << 11;

/// Step tolerance of the Krylov propagator.
pub const KRYLOV_TOL: f64 = 1e-10;
/// Ground states whose gap falls below this are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Hermitian matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    norm_bound: f64,
}

impl SparseHermitian {
    /// Builds from coordinate triplets. Duplicates are summed; the result must be Hermitian.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("operator dimension must be at least 1"));
        }
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::invalid(format!(
                "entry ({r}, {c}) outside a {dim}-dimensional operator"
            )));
        }
        if let Some(&(_, _, v)) = triplets.iter().find(|(_, _, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid(format!("non-finite matrix entry {v}")));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut h = SparseHermitian {
            dim,
            row_ptr,
            cols,
            vals,
            norm_bound: 0.0,
        };
        h.prune();
        h.check_hermitian()?;
        h.norm_bound = h.gershgorin();
        Ok(h)
    }

    /// The zero operator.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::from_triplets(dim, Vec::new())
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid("dense operator must be square"));
        }
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != zero() {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), t)
    }

    fn prune(&mut self) {
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.cols.len());
        let mut vals = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != zero() {
                    cols.push(self.cols[k]);
                    vals.push(self.vals[k]);
                }
            }
            row_ptr[r + 1] = cols.len();
        }
        self.row_ptr = row_ptr;
        self.cols = cols;
        self.vals = vals;
    }

    fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => zero(),
        }
    }

    fn check_hermitian(&self) -> Result<()> {
        let scale = self.vals.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                let d = (self.vals[k] - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(worst));
        }
        Ok(())
    }

    fn gershgorin(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Upper bound on the operator norm (maximum absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// `Σ cᵢ Hᵢ` over operators of equal dimension.
    pub fn linear_combination(terms: &[(f64, &SparseHermitian)]) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, h)| h.dim)
            .ok_or_else(|| Error::invalid("empty operator sum"))?;
        let mut t = Vec::new();
        for (c, h) in terms {
            if h.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: h.dim });
            }
            t.extend(h.triplets().map(|(r, col, v)| (r, col, v * *c)));
        }
        Self::from_triplets(dim, t)
    }

    pub fn scaled(&self, c: f64) -> SparseHermitian {
        let mut h = self.clone();
        h.vals.iter_mut().for_each(|v| *v *= c);
        h.prune();
        h.norm_bound = h.gershgorin();
        h
    }

    fn row_dot(&self, r: usize, v: &[C64]) -> C64 {
        (self.row_ptr[r]..self.row_ptr[r + 1]).fold(zero(), |acc, k| acc + self.vals[k] * v[self.cols[k]])
    }

    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) -> Result<()> {
        if v.len() != self.dim || out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: if v.len() != self.dim { v.len() } else { out.len() },
            });
        }
        if self.dim >= PAR_DIM {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o = self.row_dot(r, v));
        } else {
            out.iter_mut().enumerate().for_each(|(r, o)| *o = self.row_dot(r, v));
        }
        Ok(())
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![zero(); self.dim];
        self.matvec_into(v, &mut out)?;
        Ok(out)
    }

    /// `⟨v|H|v⟩` (not normalized by `⟨v|v⟩`).
    pub fn expectation(&self, v: &[C64]) -> Result<f64> {
        Ok(inner(v, &self.matvec(v)?).re)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, zero());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Text dump: a `dim D nnz K` header, then one `row col re im` line per nonzero.
    pub fn dump(&self) -> String {
        let mut s = format!("dim {} nnz {}\n", self.dim, self.nnz());
        for (r, c, v) in self.triplets() {
            s.push_str(&format!("{r} {c} {} {}\n", v.re, v.im));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "dim" || h[2] != "nnz" {
            return Err(perr(hl, "header must read `dim D nnz K`"));
        }
        let dim: usize = h[1].parse().map_err(|_| perr(hl, "bad dim"))?;
        let nnz: usize = h[3].parse().map_err(|_| perr(hl, "bad nnz"))?;
        let mut t = Vec::with_capacity(nnz);
        for (ln, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(perr(ln, "expected `row col re im`"));
            }
            let r = f[0].parse().map_err(|_| perr(ln, "bad row"))?;
            let c = f[1].parse().map_err(|_| perr(ln, "bad col"))?;
            let re = f[2].parse().map_err(|_| perr(ln, "bad real part"))?;
            let im = f[3].parse().map_err(|_| perr(ln, "bad imaginary part"))?;
            t.push((r, c, C64::new(re, im)));
        }
        if t.len() != nnz {
            return Err(perr(hl, &format!("header declares {nnz} entries, found {}", t.len())));
        }
        Self::from_triplets(dim, t)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: DMatrix<C64>,
}

pub fn eigh(h: &SparseHermitian) -> Result<DenseEigen> {
    if h.dim > DENSE_DIM_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "dense eigendecomposition of dimension {} exceeds {DENSE_DIM_LIMIT}",
            h.dim
        )));
    }
    Ok(eigh_dense(h.to_dense()))
}

pub fn eigh_dense(m: DMatrix<C64>) -> DenseEigen {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    DenseEigen { values, vectors }
}

/// Reusable `e^{iHt}` from one eigendecomposition.
#[derive(Clone, Debug)]
pub struct DensePropagator {
    eig: DenseEigen,
}

impl DensePropagator {
    pub fn new(h: &SparseHermitian) -> Result<Self> {
        Ok(DensePropagator { eig: eigh(h)? })
    }

    pub fn eigen(&self) -> &DenseEigen {
        &self.eig
    }

    pub fn apply(&self, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        let dim = self.eig.values.len();
        if psi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: psi.len() });
        }
        if !t.is_finite() {
            return Err(Error::invalid("evolution time must be finite"));
        }
        let v = &self.eig.vectors;
        let coeffs = v.adjoint() * DVector::from_column_slice(psi);
        let phased = DVector::from_fn(dim, |i, _| coeffs[i] * C64::from_polar(1.0, self.eig.values[i] * t));
        Ok((v * phased).as_slice().to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveMethod {
    /// Dense below the switchover dimension, Krylov above.
    #[default]
    Auto,
    Dense,
    Krylov,
}

/// `e^{iHt} ψ`.
pub fn evolve(h: &SparseHermitian, psi: &[C64], t: f64) -> Result<Vec<C64>> {
    evolve_with(h, psi, t, EvolveMethod::Auto)
}

pub fn evolve_with(h: &SparseHermitian, psi: &[C64], t: f64, method: EvolveMethod) -> Result<Vec<C64>> {
    if psi.len() != h.dim {
        return Err(Error::DimensionMismatch { expected: h.dim, got: psi.len() });
    }
    if !t.is_finite() {
        return Err(Error::invalid("evolution time must be finite"));
    }
    if t == 0.0 {
        return Ok(psi.to_vec());
    }
    let dense = match method {
        EvolveMethod::Auto => h.dim <= DENSE_DIM_LIMIT,
        EvolveMethod::Dense => true,
        EvolveMethod::Krylov => false,
    };
    if dense {
        DensePropagator::new(h)?.apply(psi, t)
    } else {
        krylov_evolve(h, psi, t, &KrylovConfig::default())
    }
}

/// Parameters of the Lanczos propagator.
#[derive(Clone, Debug)]
pub struct KrylovConfig {
    pub max_dim: usize,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            max_dim: 40,
            tol: KRYLOV_TOL,
            max_steps: 100_000,
        }
    }
}

/// Orthonormal Lanczos basis with the tridiagonal coefficients.
struct LanczosRun {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    /// `beta[j]` couples basis vectors `j` and `j+1`; the last entry is the residual norm.
    beta: Vec<f64>,
}

fn orthogonalize(w: &mut [C64], against: &[Vec<C64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for b in against {
            let c = inner(b, w);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

fn lanczos(h: &SparseHermitian, v0: &[C64], m: usize, deflate: &[Vec<C64>]) -> Result<LanczosRun> {
    let n0 = norm(v0);
    let mut v: Vec<C64> = v0.iter().map(|x| x / n0).collect();
    let mut run = LanczosRun {
        basis: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
    };
    let mut w = vec![zero(); h.dim];
    for _ in 0..m {
        h.matvec_into(&v, &mut w)?;
        let a = inner(&v, &w).re;
        run.basis.push(v);
        run.alpha.push(a);
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, &run.basis);
        let b = norm(&w);
        run.beta.push(b);
        if b <= 1e-13 * h.norm_bound.max(1.0) || run.basis.len() == h.dim {
            break;
        }
        v = w.iter().map(|x| x / b).collect();
    }
    Ok(run)
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    })
}

/// Time-stepped Lanczos propagation with full reorthogonalization. Each step is accepted
/// when the a-posteriori error estimate is below `cfg.tol`; otherwise the step is halved.
pub fn krylov_evolve(h: &SparseHermitian, psi: &[C64], t: f64, cfg: &KrylovConfig) -> Result<Vec<C64>> {
    if psi.len() != h.dim {
        return Err(Error::DimensionMismatch { expected: h.dim, got: psi.len() });
    }
    let mut v = psi.to_vec();
    let scale = norm(&v);
    if scale == 0.0 || t == 0.0 {
        return Ok(v);
    }
    let mut remaining = t;
    let mut dt = t;
    let mut steps = 0usize;
    while remaining.abs() > 0.0 {
        if dt.abs() > remaining.abs() {
            dt = remaining;
        }
        let run = lanczos(h, &v, cfg.max_dim.min(h.dim), &[])?;
        let m = run.alpha.len();
        let eig = tridiagonal(&run.alpha, &run.beta[..m]).symmetric_eigen();
        let happy = *run.beta.last().unwrap() <= 1e-13 * h.norm_bound.max(1.0) || m == h.dim;
        loop {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::NoConvergence {
                    what: "Krylov propagator",
                    detail: format!("{steps} steps with {remaining:.3e} time remaining"),
                });
            }
            // e^{iT dt} e₁ in the Krylov basis
            let coef: Vec<C64> = (0..m)
                .map(|r| {
                    (0..m).fold(zero(), |acc, k| {
                        acc + C64::from_polar(eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)], eig.eigenvalues[k] * dt)
                    })
                })
                .collect();
            let err = if happy { 0.0 } else { run.beta[m - 1] * coef[m - 1].norm() };
            if err <= cfg.tol {
                let mut out = vec![zero(); h.dim];
                for (c, b) in coef.iter().zip(&run.basis) {
                    out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x * scale);
                }
                v = out;
                remaining -= dt;
                break;
            }
            dt *= 0.5;
        }
        // grow the step again after an accepted one
        dt *= 1.5;
    }
    Ok(v)
}

/// Lowest eigenpair with the gap to the next level.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: Vec<C64>,
    pub second: f64,
    pub gap: f64,
    pub residual: f64,
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub fn ground_state(h: &SparseHermitian) -> Result<GroundState> {
    ground_state_with(h, EigenMethod::Auto)
}

pub fn ground_state_with(h: &SparseHermitian, method: EigenMethod) -> Result<GroundState> {
    let dense = match method {
        EigenMethod::Auto => h.dim <= DENSE_DIM_LIMIT,
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
    };
    let (energy, state, second) = if dense {
        let e = eigh(h)?;
        let state = e.vectors.column(0).iter().copied().collect();
        let second = e.values.get(1).copied().unwrap_or(e.values[0]);
        (e.values[0], state, second)
    } else {
        let (e0, v0) = lanczos_lowest(h, &[])?;
        let second = if h.dim > 1 {
            lanczos_lowest(h, std::slice::from_ref(&v0))?.0
        } else {
            e0
        };
        (e0, v0, second)
    };
    let hv = h.matvec(&state)?;
    let residual = norm(&hv.iter().zip(&state).map(|(a, b)| a - b * energy).collect::<Vec<_>>());
    let gap = (second - energy).max(0.0);
    Ok(GroundState {
        energy,
        state,
        second,
        gap,
        residual,
        degenerate: h.dim > 1 && gap < DEGENERACY_TOL,
    })
}

pub fn spectral_gap(h: &SparseHermitian) -> Result<f64> {
    Ok(ground_state(h)?.gap)
}

/// Restarted Lanczos for the lowest eigenpair in the complement of `deflate`.
fn lanczos_lowest(h: &SparseHermitian, deflate: &[Vec<C64>]) -> Result<(f64, Vec<C64>)> {
    const MAX_RESTARTS: usize = 200;
    // a fresh start per deflation level; reusing one start vector can miss a degenerate partner
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + deflate.len() as u64);
    let mut v: Vec<C64> = (0..h.dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    orthogonalize(&mut v, deflate);
    let m = 80.min(h.dim - deflate.len());
    for _ in 0..MAX_RESTARTS {
        let run = lanczos(h, &v, m, deflate)?;
        let k = run.alpha.len();
        let eig = tridiagonal(&run.alpha, &run.beta[..k]).symmetric_eigen();
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &e)| (i, e))
            .unwrap();
        let mut ritz = vec![zero(); h.dim];
        for (j, b) in run.basis.iter().enumerate() {
            let c = eig.eigenvectors[(j, imin)];
            ritz.iter_mut().zip(b).for_each(|(o, x)| *o += x * c);
        }
        orthogonalize(&mut ritz, deflate);
        let nr = norm(&ritz);
        ritz.iter_mut().for_each(|x| *x /= nr);
        let hv = h.matvec(&ritz)?;
        let mut r: Vec<C64> = hv.iter().zip(&ritz).map(|(a, b)| a - b * theta).collect();
        orthogonalize(&mut r, deflate);
        if norm(&r) <= 1e-10 * h.norm_bound.max(1.0) {
            return Ok((theta, ritz));
        }
        v = ritz;
    }
    Err(Error::NoConvergence {
        what: "Lanczos eigensolver",
        detail: format!("{MAX_RESTARTS} restarts"),
    })
}

/// A dense operator on a few qubits of a larger register. `qubits[0]` is the most
/// significant bit of the local index.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    pub qubits: Vec<usize>,
    pub matrix: DMatrix<C64>,
}

impl LocalOperator {
    pub fn new(qubits: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = 1usize << qubits.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        let mut s = qubits.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != qubits.len() {
            return Err(Error::invalid("local operator qubits must be distinct"));
        }
        Ok(LocalOperator { qubits, matrix })
    }

    /// Qubits on which the operator does not factor as `I ⊗ (rest)`.
    pub fn nontrivial_qubits(&self) -> Vec<usize> {
        let r = self.qubits.len();
        let d = 1usize << r;
        let mut out = Vec::new();
        for (pos, &q) in self.qubits.iter().enumerate() {
            let bit = 1usize << (r - 1 - pos);
            let mut trivial = true;
            'outer: for row in 0..d {
                for col in 0..d {
                    let (rb, cb) = (row & bit != 0, col & bit != 0);
                    let partner = if rb == cb {
                        self.matrix[(row ^ bit, col ^ bit)]
                    } else {
                        zero()
                    };
                    if (self.matrix[(row, col)] - partner).norm() > 1e-12 {
                        trivial = false;
                        break 'outer;
                    }
                }
            }
            if !trivial {
                out.push(q);
            }
        }
        out
    }

    /// Triplets of the operator lifted to an `n`-qubit register.
    pub fn lift(&self, n: usize) -> Result<Vec<(usize, usize, C64)>> {
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= n) {
            return Err(Error::invalid(format!("local operator qubit {q} outside {n}-qubit register")));
        }
        let r = self.qubits.len();
        let d = 1usize << r;
        let shifts: Vec<usize> = self.qubits.iter().map(|&q| n - 1 - q).collect();
        let mask: usize = shifts.iter().map(|s| 1usize << s).sum();
        let local_of = |j: usize| -> usize {
            shifts.iter().fold(0, |acc, &s| (acc << 1) | ((j >> s) & 1))
        };
        let global_of = |rest: usize, loc: usize| -> usize {
            shifts
                .iter()
                .enumerate()
                .fold(rest, |acc, (p, &s)| acc | (((loc >> (r - 1 - p)) & 1) << s))
        };
        let mut t = Vec::new();
        for j in 0..(1usize << n) {
            let lc = local_of(j);
            let rest = j & !mask;
            for lr in 0..d {
                let v = self.matrix[(lr, lc)];
                if v != zero() {
                    t.push((global_of(rest, lr), j, v));
                }
            }
        }
        Ok(t)
    }
}

/// `Σ` of local operators as a sparse operator on `n` qubits.
pub fn embed_local(n: usize, ops: &[LocalOperator]) -> Result<SparseHermitian> {
    crate::limits::check_qubits(n, "embedded operator")?;
    let mut t = Vec::new();
    for op in ops {
        t.extend(op.lift(n)?);
    }
    SparseHermitian::from_triplets(1usize << n, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(dim: usize, density: f64, rng: &mut ChaCha8Rng) -> SparseHermitian {
        let mut t = Vec::new();
        for r in 0..dim {
            t.push((r, r, c(rng.random_range(-1.0..1.0), 0.0)));
            for col in r + 1..dim {
                if rng.random_bool(density.min(1.0)) {
                    let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    t.push((r, col, v));
                    t.push((col, r, v.conj()));
                }
            }
        }
        SparseHermitian::from_triplets(dim, t).unwrap()
    }

    fn random_vec(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        let v: Vec<C64> = (0..dim).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    fn dist(a: &[C64], b: &[C64]) -> f64 {
        norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    #[test]
    fn rejects_non_hermitian() {
        let t = vec![(0, 1, c(1.0, 0.0)), (1, 0, c(0.5, 0.0))];
        assert!(matches!(SparseHermitian::from_triplets(2, t), Err(Error::NotHermitian(_))));
        let t = vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, 1.0))];
        assert!(SparseHermitian::from_triplets(2, t).is_err());
        assert!(SparseHermitian::from_triplets(0, vec![]).is_err());
    }

    #[test]
    fn z_evolution_closed_form() {
        let z = SparseHermitian::from_triplets(2, vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = vec![c(h, 0.0), c(h, 0.0)];
        let out = evolve(&z, &plus, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((out[0] - c(0.0, h)).norm() < 1e-12);
        assert!((out[1] - c(0.0, -h)).norm() < 1e-12);
        let x_exp = 2.0 * (out[0].conj() * out[1]).re;
        assert!((x_exp + 1.0).abs() < 1e-12);
        assert_eq!(evolve(&z, &plus, 0.0).unwrap(), plus);
    }

    #[test]
    fn ground_state_examples() {
        let d = SparseHermitian::from_triplets(3, (0..3).map(|i| (i, i, c(i as f64, 0.0))).collect()).unwrap();
        let g = ground_state(&d).unwrap();
        assert!(g.energy.abs() < 1e-14);
        assert!((g.state[0].norm() - 1.0).abs() < 1e-12);
        assert!((spectral_gap(&d).unwrap() - 1.0).abs() < 1e-12);

        let mx = SparseHermitian::from_triplets(2, vec![(0, 1, c(-1.0, 0.0)), (1, 0, c(-1.0, 0.0))]).unwrap();
        let g = ground_state(&mx).unwrap();
        assert!((g.energy + 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(((g.state[0].conj() * h + g.state[1].conj() * h).norm() - 1.0).abs() < 1e-12);

        let mz = SparseHermitian::from_triplets(2, vec![(0, 0, c(-1.0, 0.0)), (1, 1, c(1.0, 0.0))]).unwrap();
        assert!((spectral_gap(&mz).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degeneracy_is_flagged() {
        let d = SparseHermitian::from_triplets(3, vec![(2, 2, c(1.0, 0.0))]).unwrap();
        let g = ground_state(&d).unwrap();
        assert!(g.degenerate);
        let g = ground_state_with(&d, EigenMethod::Lanczos).unwrap();
        assert!(g.degenerate);
    }

    #[test]
    fn lanczos_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [5, 40, 300] {
            let h = random_hermitian(dim, 0.05, &mut rng);
            let a = ground_state_with(&h, EigenMethod::Dense).unwrap();
            let b = ground_state_with(&h, EigenMethod::Lanczos).unwrap();
            assert!((a.energy - b.energy).abs() < 1e-9, "dim {dim}");
            assert!((a.second - b.second).abs() < 1e-8, "dim {dim}");
            assert!(b.residual < 1e-8);
        }
    }

    #[test]
    fn dump_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(12, 0.3, &mut rng);
        let back = SparseHermitian::parse(&h.dump()).unwrap();
        assert_eq!(back, h);
        assert!(SparseHermitian::parse("dim 2 nnz 1\n0 0 1\n").is_err());
    }

    #[test]
    fn local_operator_embedding() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let op = LocalOperator::new(vec![1], x.clone()).unwrap();
        let h = embed_local(2, &[op]).unwrap();
        let d = h.to_dense();
        // I ⊗ X
        assert_eq!(d[(0, 1)], c(1.0, 0.0));
        assert_eq!(d[(2, 3)], c(1.0, 0.0));
        assert_eq!(d[(0, 2)], c(0.0, 0.0));
        let ix = x.kronecker(&DMatrix::identity(2, 2));
        let padded = LocalOperator::new(vec![0, 1], DMatrix::identity(2, 2).kronecker(&x)).unwrap();
        assert_eq!(padded.nontrivial_qubits(), vec![1]);
        let padded = LocalOperator::new(vec![3, 0], ix).unwrap();
        assert_eq!(padded.nontrivial_qubits(), vec![3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unitarity_and_group_law(seed in any::<u64>(), dim in 2usize..=512, t1 in 0.0f64..10.0, t2 in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(dim, 4.0 / dim as f64, &mut rng);
            let psi = random_vec(dim, &mut rng);
            let prop = DensePropagator::new(&h).unwrap();
            let a = prop.apply(&psi, t1).unwrap();
            prop_assert!((norm(&a) - 1.0).abs() <= 1e-9);
            let ab = prop.apply(&a, t2).unwrap();
            let direct = prop.apply(&psi, t1 + t2).unwrap();
            prop_assert!(dist(&ab, &direct) <= 1e-8);
            let e0 = h.expectation(&psi).unwrap();
            prop_assert!((h.expectation(&a).unwrap() - e0).abs() <= 1e-8);
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn krylov_matches_dense(seed in any::<u64>(), dim in 2usize..=1024, t in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(dim, 6.0 / dim as f64, &mut rng);
            let psi = random_vec(dim, &mut rng);
            let a = evolve_with(&h, &psi, t, EvolveMethod::Dense).unwrap();
            let b = evolve_with(&h, &psi, t, EvolveMethod::Krylov).unwrap();
            prop_assert!(dist(&a, &b) <= 1e-8, "distance {}", dist(&a, &b));
            prop_assert!((norm(&b) - 1.0).abs() <= 1e-9);
        }
    }
}

//! ℓ1-constrained least squares by projected gradient with a Frank–Wolfe duality-gap stop.

use std::hash::Hasher;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FEATURE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `1/L` with `L = 2 λ_max(ΦᵀΦ/N)`.
    #[default]
    Fixed,
    /// Armijo backtracking from a doubled previous step.
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassoConfig {
    /// ℓ1 budget on the weight vector.
    #[serde(rename = "B")]
    pub b: f64,
    /// Optimization slack; the solver certifies a gap of `eps3 / 2`.
    pub eps3: f64,
    pub max_iters: usize,
    pub step: StepRule,
    /// Stop early once the training MSE is below this.
    pub tol_residual: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            b: 1.0,
            eps3: 0.02,
            max_iters: 200_000,
            step: StepRule::Fixed,
            tol_residual: 0.0,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::invalid(format!("B must be finite and >= 0, got {}", self.b)));
        }
        if !(self.eps3.is_finite() && self.eps3 > 0.0) {
            return Err(Error::invalid(format!("eps3 must be > 0, got {}", self.eps3)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoDiagnostics {
    pub train_mse: f64,
    pub iterations: usize,
    /// Frank–Wolfe gap at the returned iterate; bounds its suboptimality.
    pub certified_gap: f64,
    pub lipschitz: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    /// Feature labels in column order (empty when trained on anonymous features).
    pub basis: Vec<String>,
    pub basis_fingerprint: String,
    pub w: Vec<f64>,
    #[serde(rename = "B")]
    pub b: f64,
    pub diagnostics: LassoDiagnostics,
}

impl LassoModel {
    pub fn with_basis(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: labels.len(),
            });
        }
        self.basis_fingerprint = basis_fingerprint(&labels);
        self.basis = labels;
        Ok(self)
    }

    /// `h(x) = w · φ(x)`.
    pub fn predict(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: phi.len(),
            });
        }
        Ok(dot(&self.w, phi))
    }

    pub fn predict_many(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        features.iter().map(|p| self.predict(p)).collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|x| x.abs()).sum()
    }
}

/// FNV-1a fingerprint of an ordered label list.
pub fn basis_fingerprint(labels: &[String]) -> String {
    let mut h = fnv::FnvHasher::default();
    for l in labels {
        h.write(l.as_bytes());
        h.write_u8(b'\n');
    }
    format!("{:016x}", h.finish())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto `{w : ‖w‖₁ ≤ B}` by the sort-and-threshold rule.
pub fn project_l1(v: &[f64], b: f64) -> Result<Vec<f64>> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::invalid(format!("radius must be finite and >= 0, got {b}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vector to project has non-finite entries"));
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= b {
        return Ok(v.to_vec());
    }
    if b == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - b) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect();
    // rounding can leave the sum a few ulps above the radius
    let s: f64 = out.iter().map(|x| x.abs()).sum();
    if s > b {
        let f = b / s;
        out.iter_mut().for_each(|x| *x *= f);
    }
    Ok(out)
}

/// Quadratic form of the training objective: `f(w) = wᵀGw − 2cᵀw + y2`.
pub(crate) struct Quadratic {
    g: DMatrix<f64>,
    c: Vec<f64>,
    y2: f64,
}

impl Quadratic {
    pub(crate) fn new(features: &[Vec<f64>], labels: &[f64]) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::invalid("training set is empty"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        let m = features[0].len();
        if m == 0 {
            return Err(Error::invalid("feature vectors are empty"));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != m {
                return Err(Error::invalid(format!("feature row {i} has {} entries, expected {m}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !(v.abs() <= 1.0 + FEATURE_SLACK)) {
                return Err(Error::invalid(format!("feature row {i} has entry {v} outside [-1, 1]")));
            }
        }
        if let Some(y) = labels.iter().find(|y| !y.is_finite()) {
            return Err(Error::invalid(format!("non-finite label {y}")));
        }
        let phi = DMatrix::from_fn(n, m, |r, c| features[r][c]);
        let y = nalgebra::DVector::from_column_slice(labels);
        let nf = n as f64;
        let g = (phi.transpose() * &phi) / nf;
        let c = ((phi.transpose() * &y) / nf).as_slice().to_vec();
        let y2 = y.norm_squared() / nf;
        Ok(Quadratic { g, c, y2 })
    }

    pub(crate) fn value(&self, w: &[f64]) -> f64 {
        let gw = self.gw(w);
        (dot(w, &gw) - 2.0 * dot(&self.c, w) + self.y2).max(0.0)
    }

    fn gw(&self, w: &[f64]) -> Vec<f64> {
        let m = w.len();
        (0..m).map(|r| (0..m).map(|c| self.g[(r, c)] * w[c]).sum()).collect()
    }

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        self.gw(w).iter().zip(&self.c).map(|(a, c)| 2.0 * (a - c)).collect()
    }

    fn lipschitz(&self) -> f64 {
        let ev = self.g.clone().symmetric_eigen().eigenvalues;
        2.0 * ev.iter().cloned().fold(0.0, f64::max)
    }
}

/// `⟨g, w⟩ + B‖g‖∞ = max over the ball of ⟨g, w − s⟩`.
fn fw_gap(g: &[f64], w: &[f64], b: f64) -> f64 {
    dot(g, w) + b * g.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Trains and also returns the objective value after every iteration.
pub fn lasso_train_traced(features: &[Vec<f64>], labels: &[f64], cfg: &LassoConfig) -> Result<(LassoModel, Vec<f64>)> {
    cfg.validate()?;
    let q = Quadratic::new(features, labels)?;
    let m = features[0].len();
    let lip = q.lipschitz();
    let mut w = vec![0.0; m];
    let mut f = q.value(&w);
    let mut trace = vec![f];
    let mut g = q.grad(&w);
    let mut gap = fw_gap(&g, &w, cfg.b);
    let target = cfg.eps3 / 2.0;
    let mut step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut iters = 0;
    let done = |gap: f64, f: f64| gap <= target || f <= cfg.tol_residual;
    while !done(gap, f) && iters < cfg.max_iters && cfg.b > 0.0 && lip > 0.0 {
        iters += 1;
        let (w_new, f_new) = match cfg.step {
            StepRule::Fixed => {
                let trial: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
                let wn = project_l1(&trial, cfg.b)?;
                let fv = q.value(&wn);
                (wn, fv)
            }
            StepRule::Backtracking => {
                let mut s = step * 2.0;
                loop {
                    let trial: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - s * gi).collect();
                    let wn = project_l1(&trial, cfg.b)?;
                    let d: Vec<f64> = wn.iter().zip(&w).map(|(a, b)| a - b).collect();
                    let fv = q.value(&wn);
                    let model = f + dot(&g, &d) + dot(&d, &d) / (2.0 * s);
                    if fv <= model + 1e-15 || s <= 1.0 / lip {
                        step = s;
                        break (wn, fv);
                    }
                    s *= 0.5;
                }
            }
        };
        // a projected step with 1/L never increases f; guard against rounding
        if f_new > f {
            trace.push(f);
            break;
        }
        w = w_new;
        f = f_new;
        trace.push(f);
        g = q.grad(&w);
        gap = fw_gap(&g, &w, cfg.b);
    }
    let converged = done(gap, f) || cfg.b == 0.0 || lip == 0.0;
    let model = LassoModel {
        basis: Vec::new(),
        basis_fingerprint: String::new(),
        w,
        b: cfg.b,
        diagnostics: LassoDiagnostics {
            train_mse: f,
            iterations: iters,
            certified_gap: gap.max(0.0),
            lipschitz: lip,
            converged,
        },
    };
    if !converged {
        return Err(Error::LassoNotConverged {
            gap,
            iterations: iters,
            best: Box::new(model),
        });
    }
    Ok((model, trace))
}

/// `min_{‖w‖₁ ≤ B} (1/N) Σ (w·φ_ℓ − y_ℓ)²`.
pub fn lasso_train(features: &[Vec<f64>], labels: &[f64], cfg: &LassoConfig) -> Result<LassoModel> {
    lasso_train_traced(features, labels, cfg).map(|(m, _)| m)
}

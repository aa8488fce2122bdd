//! Flipped concept: labels are linear in the input coefficients, so a least-squares solve
//! recovers the fixed expectations `⟨Pᵢ⟩`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular value cutoff for the numerical rank.
const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlippedSolution {
    pub v: Vec<f64>,
    pub rank: usize,
    /// `‖A v − y‖₂`.
    pub residual: f64,
    /// `σ_max / σ_min` over the retained singular values.
    pub condition: f64,
    /// Set when the system has rank below `m` and no ridge term; `v` is then the
    /// minimum-norm solution.
    pub rank_deficient: bool,
    pub lambda: f64,
}

impl FlippedSolution {
    pub fn predict(&self, alpha: &[f64]) -> Result<f64> {
        if alpha.len() != self.v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.v.len(),
                got: alpha.len(),
            });
        }
        Ok(alpha.iter().zip(&self.v).map(|(a, v)| a * v).sum())
    }
}

/// Solves `min ‖A v − y‖² + λ‖v‖²` where the rows of `A` are the sample coefficient vectors.
pub fn flipped_solve(samples: &[(Vec<f64>, f64)], lambda: f64) -> Result<FlippedSolution> {
    let first = samples.first().ok_or_else(|| Error::invalid("no samples"))?;
    let m = first.0.len();
    if m == 0 {
        return Err(Error::invalid("coefficient vectors are empty"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    let n = samples.len();
    let mut a = DMatrix::<f64>::zeros(n, m);
    let mut y = DVector::<f64>::zeros(n);
    for (i, (alpha, yi)) in samples.iter().enumerate() {
        if alpha.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: alpha.len() });
        }
        if !yi.is_finite() || alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value in sample {i}")));
        }
        a.row_mut(i).copy_from_slice(alpha);
        y[i] = *yi;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = RANK_RTOL * smax.max(f64::MIN_POSITIVE);
    let kept: Vec<f64> = svd.singular_values.iter().cloned().filter(|&s| s > cut).collect();
    let rank = kept.len();
    let condition = if rank == 0 {
        f64::INFINITY
    } else {
        smax / kept.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let uty = u.transpose() * &y;
    let mut coef = DVector::<f64>::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        // Tikhonov filter s/(s²+λ); plain pseudo-inverse when λ = 0
        coef[i] = if lambda > 0.0 {
            s * uty[i] / (s * s + lambda)
        } else if s > cut {
            uty[i] / s
        } else {
            0.0
        };
    }
    let v = vt.transpose() * coef;
    let residual = (&a * &v - &y).norm();
    Ok(FlippedSolution {
        v: v.iter().cloned().collect(),
        rank,
        residual,
        condition,
        rank_deficient: rank < m && lambda == 0.0,
        lambda,
    })
}

//! Sample-size and generalization arithmetic for the ℓ1-ball regression class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `⌈2 B⁴ √(2 ln(2m/δ)) / ε₃²⌉`.
pub fn sample_complexity(b: f64, m: usize, delta: f64, eps3: f64) -> Result<u64> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::invalid(format!("B must be finite and >= 0, got {b}")));
    }
    if m == 0 {
        return Err(Error::invalid("feature count m must be positive"));
    }
    check_delta(delta)?;
    if !(eps3.is_finite() && eps3 > 0.0) {
        return Err(Error::invalid(format!("eps3 must be > 0, got {eps3}")));
    }
    let n = 2.0 * b.powi(4) * (2.0 * (2.0 * m as f64 / delta).ln()).sqrt() / (eps3 * eps3);
    Ok(n.ceil() as u64)
}

/// Both forms of the risk bound with `r∞ = 1` and `M = B + 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `R̂ + 2 r∞ B M √(2 ln(2m)/N) + M √(2 ln(1/δ)/(2N))`.
    pub theorem: f64,
    /// `R̂ + 2 B M √(2 ln(2m)/N) + M² √(ln(1/δ)/(2N))`.
    pub appendix: f64,
    pub m_const: f64,
    pub r_inf: f64,
}

pub fn generalization_bound(train_mse: f64, b: f64, m: usize, n: usize, delta: f64) -> Result<BoundReport> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("bound needs N >= 1 and m >= 1"));
    }
    check_delta(delta)?;
    let r_inf = 1.0;
    let mc = b + 2.0;
    let nf = n as f64;
    let complexity = 2.0 * b * mc * (2.0 * (2.0 * m as f64).ln() / nf).sqrt();
    let conf = (1.0 / delta).ln();
    Ok(BoundReport {
        theorem: train_mse + r_inf * complexity + mc * (2.0 * conf / (2.0 * nf)).sqrt(),
        appendix: train_mse + complexity + mc * mc * (conf / (2.0 * nf)).sqrt(),
        m_const: mc,
        r_inf,
    })
}

/// Split of a target risk `ε` into feature, label and optimization tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBudget {
    pub eps1_prime: f64,
    pub eps2: f64,
    pub eps3: f64,
}

impl EpsBudget {
    /// `ε′₁ = 0.2ε, ε₂ = ε, ε₃ = 0.4ε`.
    pub fn default_for(eps: f64) -> Self {
        EpsBudget {
            eps1_prime: 0.2 * eps,
            eps2: eps,
            eps3: 0.4 * eps,
        }
    }

    /// `(ε′₁ + ε₂)² + ε₃`.
    pub fn composite(&self) -> f64 {
        (self.eps1_prime + self.eps2).powi(2) + self.eps3
    }

    /// Per-entry feature tolerance `ε₁ = ε′₁ / B`.
    pub fn eps1(&self, b: f64) -> f64 {
        if b > 0.0 {
            self.eps1_prime / b
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_laws() {
        let base = 2.0 * (2.0f64 * (2.0 * 10.0 / 0.1f64).ln()).sqrt();
        assert_eq!(sample_complexity(1.0, 10, 0.1, 1.0).unwrap(), base.ceil() as u64);
        let n1 = 2.0 * (2.0f64 * (20.0f64 / 0.1).ln()).sqrt() / 0.01;
        let n2 = 2.0 * 16.0 * (2.0f64 * (20.0f64 / 0.1).ln()).sqrt() / 0.01;
        assert_eq!(sample_complexity(1.0, 10, 0.1, 0.1).unwrap(), n1.ceil() as u64);
        assert_eq!(sample_complexity(2.0, 10, 0.1, 0.1).unwrap(), n2.ceil() as u64);
        assert!(sample_complexity(1.0, 0, 0.1, 0.1).is_err());
        assert!(sample_complexity(1.0, 4, 1.5, 0.1).is_err());
    }

    #[test]
    fn bound_shrinks_with_n() {
        let a = generalization_bound(0.01, 1.0, 16, 1000, 0.1).unwrap();
        let b = generalization_bound(0.01, 1.0, 16, 4000, 0.1).unwrap();
        assert!(((a.theorem - 0.01) / (b.theorem - 0.01) - 2.0).abs() < 1e-12);
        assert!(((a.appendix - 0.01) / (b.appendix - 0.01) - 2.0).abs() < 1e-12);
        let far = generalization_bound(0.01, 1.0, 16, usize::MAX / 2, 0.1).unwrap();
        assert!((far.theorem - 0.01).abs() < 1e-6);
    }

    #[test]
    fn budget_composes_below_target() {
        for eps in [0.01, 0.05, 0.1, 0.3] {
            let b = EpsBudget::default_for(eps);
            assert!(b.composite() <= eps);
        }
    }
}

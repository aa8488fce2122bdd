//! Learning a low-support observable from single-qubit stabilizer probes.
//!
//! For a product probe `|ψ⟩ = ⊗ |s_q⟩` with `s_q` uniform over the six stabilizer states,
//! `E[⟨ψ|P|ψ⟩⟨ψ|Q|ψ⟩] = δ_{PQ} 3^{−|supp Q|}`, so `3^{|supp Q|} · mean(v ⟨ψ|Q|ψ⟩)` is an
//! unbiased estimate of the coefficient of `Q`.

use serde::{Deserialize, Serialize};

use crate::circuit::stab1_expectation;
use crate::error::{Error, Result};
use crate::pauli::{enumerate_local_paulis, Geometry, PauliObservable, PauliString};

/// A probe state given by its stabilizer labels and an observed value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub labels: Vec<u8>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShallowLearnConfig {
    /// Largest support searched.
    pub k_max: usize,
    pub eps: f64,
    pub delta: f64,
    /// Estimates with magnitude below this are dropped.
    pub threshold: f64,
}

impl Default for ShallowLearnConfig {
    fn default() -> Self {
        ShallowLearnConfig {
            k_max: 2,
            eps: 0.1,
            delta: 0.05,
            threshold: 0.05,
        }
    }
}

impl ShallowLearnConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_max == 0 || self.k_max > n {
            return Err(Error::invalid(format!("k_max must lie in 1..={n}, got {}", self.k_max)));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::invalid("threshold must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Probe count `⌈9^k ln(n 4^k / δ) / ε²⌉`.
pub fn shallow_probe_count(n: usize, k: usize, eps: f64, delta: f64) -> Result<u64> {
    if n == 0 || !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("probe count needs n >= 1, eps > 0 and delta in (0, 1)"));
    }
    let v = 9f64.powi(k as i32) * (n as f64 * 4f64.powi(k as i32) / delta).ln() / (eps * eps);
    if !v.is_finite() || v > u64::MAX as f64 {
        return Err(Error::ResourceLimit(format!("probe count {v:e} overflows")));
    }
    Ok(v.ceil() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShallowModel {
    /// Surviving terms after clamping to `[−1, 1]` and thresholding.
    pub observable: PauliObservable,
    /// Every candidate with its raw estimate.
    pub raw: Vec<(PauliString, f64)>,
    pub n_probes: usize,
    pub warnings: Vec<String>,
}

impl ShallowModel {
    pub fn n_qubits(&self) -> usize {
        self.observable.n_qubits()
    }

    /// `⟨ψ|O′|ψ⟩` on a stabilizer product, computed from the label table.
    pub fn stabilizer_value(&self, labels: &[u8]) -> Result<f64> {
        stabilizer_expectation(&self.observable, labels)
    }
}

/// `⟨ψ|P|ψ⟩` for a product of stabilizer states.
pub fn stabilizer_pauli(p: &PauliString, labels: &[u8]) -> f64 {
    p.letters()
        .iter()
        .zip(labels)
        .map(|(&l, &s)| stab1_expectation(s, l))
        .product()
}

pub fn stabilizer_expectation(obs: &PauliObservable, labels: &[u8]) -> Result<f64> {
    if labels.len() != obs.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: obs.n_qubits(),
            got: labels.len(),
        });
    }
    Ok(obs.terms().map(|(a, p)| a * stabilizer_pauli(p, labels)).sum())
}

/// All `6^n` label lists, in lexicographic order.
pub fn all_stabilizer_probes(n: usize) -> Vec<Vec<u8>> {
    let total = 6usize.pow(n as u32);
    (0..total)
        .map(|mut i| {
            let mut l = vec![0u8; n];
            for q in (0..n).rev() {
                l[q] = (i % 6) as u8;
                i /= 6;
            }
            l
        })
        .collect()
}

/// Estimates every coefficient with support at most `k_max`.
pub fn shallow_learn(probes: &[Probe], cfg: &ShallowLearnConfig) -> Result<ShallowModel> {
    let first = probes.first().ok_or_else(|| Error::invalid("probe set is empty"))?;
    let n = first.labels.len();
    cfg.validate(n)?;
    for p in probes {
        if p.labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.labels.len() });
        }
        if p.labels.iter().any(|&l| l > 5) {
            return Err(Error::invalid(format!("stabilizer label out of range in {:?}", p.labels)));
        }
        if !p.value.is_finite() {
            return Err(Error::invalid("probe value is not finite"));
        }
    }
    let candidates = enumerate_local_paulis(n, cfg.k_max, Geometry::AllSubsets)?;
    let count = probes.len() as f64;
    let raw: Vec<(PauliString, f64)> = candidates
        .into_iter()
        .map(|q| {
            let s: f64 = probes.iter().map(|p| p.value * stabilizer_pauli(&q, &p.labels)).sum();
            let est = 3f64.powi(q.weight() as i32) * s / count;
            (q, est)
        })
        .collect();
    let mut warnings = Vec::new();
    let need = shallow_probe_count(n, cfg.k_max, cfg.eps, cfg.delta)?;
    if (probes.len() as u64) < need {
        warnings.push(format!(
            "{} probes below the {need} suggested for k_max = {}, eps = {}, delta = {}",
            probes.len(),
            cfg.k_max,
            cfg.eps,
            cfg.delta
        ));
    }
    let (basis, alpha): (Vec<PauliString>, Vec<f64>) = raw
        .iter()
        .filter(|(_, a)| a.abs() >= cfg.threshold && *a != 0.0)
        .map(|(q, a)| (q.clone(), a.clamp(-1.0, 1.0)))
        .unzip();
    let observable = if basis.is_empty() {
        PauliObservable::new(vec![PauliString::identity(n)], vec![0.0])?
    } else {
        PauliObservable::new(basis, alpha)?
    };
    Ok(ShallowModel {
        observable,
        raw,
        n_probes: probes.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::shallow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(terms: &[(&str, f64)]) -> PauliObservable {
        PauliObservable::new(terms.iter().map(|t| t.0.parse().unwrap()).collect(), terms.iter().map(|t| t.1).collect()).unwrap()
    }

    fn coef(model: &ShallowModel, label: &str) -> f64 {
        let p: PauliString = label.parse().unwrap();
        model.raw.iter().find(|(q, _)| *q == p).unwrap().1
    }

    fn exact_probes(o: &PauliObservable) -> Vec<Probe> {
        all_stabilizer_probes(o.n_qubits())
            .into_iter()
            .map(|labels| Probe {
                value: stabilizer_expectation(o, &labels).unwrap(),
                labels,
            })
            .collect()
    }

    #[test]
    fn single_z_exact() {
        let m = shallow_learn(&exact_probes(&obs(&[("Z", 1.0)])), &ShallowLearnConfig { k_max: 1, ..Default::default() }).unwrap();
        assert_eq!(coef(&m, "Z"), 1.0);
        assert_eq!(coef(&m, "X"), 0.0);
        assert_eq!(coef(&m, "I"), 0.0);
    }

    #[test]
    fn identity_coefficient_is_mean() {
        let probes = vec![Probe { labels: vec![0], value: 0.3 }, Probe { labels: vec![3], value: 0.5 }];
        let m = shallow_learn(&probes, &ShallowLearnConfig { k_max: 1, ..Default::default() }).unwrap();
        assert!((coef(&m, "I") - 0.4).abs() < 1e-15);
    }

    #[test]
    fn full_enumeration_is_exact() {
        let o = obs(&[("XZI", 0.4), ("IYY", -0.3), ("ZII", 0.2), ("III", 0.1)]);
        let m = shallow_learn(&exact_probes(&o), &ShallowLearnConfig { k_max: 2, threshold: 0.0, ..Default::default() }).unwrap();
        for (q, est) in &m.raw {
            let want = o.basis().iter().position(|p| p == q).map(|i| o.alpha()[i]).unwrap_or(0.0);
            assert!((est - want).abs() < 1e-12, "{q}: {est} vs {want}");
        }
    }

    #[test]
    fn sampled_two_body_term() {
        let o = obs(&[("XXI", 0.7)]);
        let mut ok = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let probes: Vec<Probe> = (0..20000)
                .map(|_| {
                    let labels: Vec<u8> = (0..3).map(|_| rng.random_range(0..6)).collect();
                    Probe { value: stabilizer_expectation(&o, &labels).unwrap(), labels }
                })
                .collect();
            let m = shallow::shallow_learn(&probes, &ShallowLearnConfig { k_max: 2, threshold: 0.0, ..Default::default() }).unwrap();
            let err = m
                .raw
                .iter()
                .map(|(q, e)| (e - if q.label() == "XXI" { 0.7 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            if err <= 0.1 {
                ok += 1;
            }
        }
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn bad_input() {
        assert!(shallow_learn(&[], &ShallowLearnConfig::default()).is_err());
        let p = vec![Probe { labels: vec![0], value: 1.0 }];
        assert!(shallow_learn(&p, &ShallowLearnConfig { k_max: 2, ..Default::default() }).is_err());
        let p = vec![Probe { labels: vec![7], value: 1.0 }];
        assert!(shallow_learn(&p, &ShallowLearnConfig { k_max: 1, ..Default::default() }).is_err());
        let m = shallow_learn(&[Probe { labels: vec![0, 0], value: 1.0 }], &ShallowLearnConfig::default()).unwrap();
        assert!(!m.warnings.is_empty());
    }

    #[test]
    fn probe_count_formula() {
        let n = shallow_probe_count(4, 2, 0.1, 0.05).unwrap();
        assert_eq!(n, (81.0 * (4.0 * 16.0 / 0.05f64).ln() / 0.01).ceil() as u64);
    }
}

//! Learner for dispatcher concepts: the `x₁ = 0` half of the data are stabilizer probes of
//! the rotated observables, which are then measured on the `x₁ = 1` payload states.

use serde::{Deserialize, Serialize};

use super::shallow::{shallow_learn, stabilizer_expectation, Probe, ShallowLearnConfig, ShallowModel};
use crate::bits::BitString;
use crate::circuit::{DispatchBranch, DispatcherSpec};
use crate::error::{Error, Result};
use crate::pauli::observable_expectation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnitaryLearnConfig {
    pub shallow: ShallowLearnConfig,
    /// Fewest `x₁ = 0` samples accepted.
    pub min_probes: usize,
}

impl Default for UnitaryLearnConfig {
    fn default() -> Self {
        UnitaryLearnConfig {
            shallow: ShallowLearnConfig::default(),
            min_probes: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryPredictor {
    pub dispatcher: DispatcherSpec,
    /// Learned `O′_q` for each selector value `q`; `None` when no probe had that value.
    pub models: Vec<Option<ShallowModel>>,
    /// Selector whose rotation is the identity; its `O′` serves the `x₁ = 1` inputs.
    pub identity_index: usize,
    pub n_probes: usize,
    /// `x₁ = 0` samples whose payload hit an unassigned catalog code.
    pub skipped: usize,
}

impl UnitaryPredictor {
    fn model(&self, q: usize) -> Result<&ShallowModel> {
        self.models
            .get(q)
            .and_then(|m| m.as_ref())
            .ok_or_else(|| Error::InsufficientProbes { have: 0, need: 1 }.in_phase("prediction"))
    }

    pub fn predict(&self, x: &BitString) -> Result<f64> {
        let d = self.dispatcher.decode(x)?;
        match &d.branch {
            DispatchBranch::Probe { labels } => stabilizer_expectation(&self.model(d.x_q)?.observable, labels),
            DispatchBranch::Bqp { .. } => {
                let (_, state) = self.dispatcher.payload_state(x)?;
                observable_expectation(&state, &self.model(self.identity_index)?.observable)
            }
        }
    }
}

/// Learns from `(x, y)` pairs drawn from a dispatcher concept.
pub fn unitary_param_learn(samples: &[(BitString, f64)], dispatcher: &DispatcherSpec, cfg: &UnitaryLearnConfig) -> Result<UnitaryPredictor> {
    dispatcher.validate()?;
    let identity_index = dispatcher
        .identity_rotation_index()
        .ok_or_else(|| Error::invalid("observable catalog has no identity rotation; x1 = 1 inputs cannot be predicted"))?;
    let n_sel = 1usize << dispatcher.n_q;
    let mut groups: Vec<Vec<Probe>> = vec![Vec::new(); n_sel];
    let mut skipped = 0;
    for (x, y) in samples {
        if x.len() != dispatcher.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: dispatcher.n_inputs(),
                got: x.len(),
            });
        }
        if x.get(0) {
            continue;
        }
        match dispatcher.decode(x) {
            Ok(d) => {
                if let DispatchBranch::Probe { labels } = d.branch {
                    groups[d.x_q].push(Probe { labels, value: *y });
                }
            }
            Err(Error::CatalogMiss(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let n_probes: usize = groups.iter().map(|g| g.len()).sum();
    let need = cfg.min_probes.max(1);
    if n_probes < need || groups[identity_index].is_empty() {
        return Err(Error::InsufficientProbes {
            have: if groups[identity_index].is_empty() { 0 } else { n_probes },
            need,
        });
    }
    let models = groups
        .iter()
        .map(|g| if g.is_empty() { Ok(None) } else { shallow_learn(g, &cfg.shallow).map(Some) })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnitaryPredictor {
        dispatcher: dispatcher.clone(),
        models,
        identity_index,
        n_probes,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{BqpBranch, Circuit, Gate, GateKind};
    use crate::concepts::{gen_dataset, Concept, ConceptSpec, InputDistribution, LabelNoise, ShallowTemplate};
    use crate::pauli::Pauli;

    fn spec(alpha: Vec<f64>) -> ConceptSpec {
        let bqp = Circuit::from_gates(3, vec![Gate::single(GateKind::H, 0).unwrap(), Gate::cnot(0, 1).unwrap()]).unwrap();
        ConceptSpec::UnitaryParam {
            dispatcher: DispatcherSpec::shallow(3, BqpBranch::OnInput(bqp)).unwrap(),
            template: ShallowTemplate::single_layer(3, [Pauli::X, Pauli::Y]),
            alpha,
            base_obs: "ZII".parse().unwrap(),
        }
    }

    fn pairs(spec: &ConceptSpec, n: usize, seed: u64) -> Vec<(BitString, f64)> {
        let ds = gen_dataset(spec, &InputDistribution::Dispatcher { bqp_law: None, joint: None }, n, LabelNoise::Exact, seed).unwrap();
        ds.samples.into_iter().map(|s| (s.x.bits().unwrap().clone(), s.y)).collect()
    }

    #[test]
    fn identity_template_recovers_base() {
        let s = spec(vec![0.0, 0.0]);
        let ConceptSpec::UnitaryParam { dispatcher, .. } = &s else { unreachable!() };
        let p = unitary_param_learn(&pairs(&s, 4000, 1), dispatcher, &UnitaryLearnConfig::default()).unwrap();
        let o = &p.models[0].as_ref().unwrap().observable;
        let z0 = o.basis().iter().position(|q| q.label() == "ZII").unwrap();
        assert!((o.alpha()[z0] - 1.0).abs() <= 0.1);
        assert!(o.alpha().iter().enumerate().all(|(i, a)| i == z0 || a.abs() <= 0.1));
    }

    #[test]
    fn predictions_track_concept() {
        let s = spec(vec![0.8, -0.5]);
        let ConceptSpec::UnitaryParam { dispatcher, .. } = &s else { unreachable!() };
        let p = unitary_param_learn(&pairs(&s, 20000, 2), dispatcher, &UnitaryLearnConfig::default()).unwrap();
        let c = Concept::build(&s).unwrap();
        let test = pairs(&s, 500, 99);
        let mse: f64 = test.iter().map(|(x, _)| (p.predict(x).unwrap() - c.eval(x).unwrap()).powi(2)).sum::<f64>() / 500.0;
        assert!(mse <= 0.05, "mse {mse}");
    }

    #[test]
    fn no_probes_is_an_error() {
        let s = spec(vec![0.0, 0.0]);
        let ConceptSpec::UnitaryParam { dispatcher, .. } = &s else { unreachable!() };
        let only_bqp: Vec<(BitString, f64)> = pairs(&s, 200, 3).into_iter().filter(|(x, _)| x.get(0)).collect();
        assert!(matches!(
            unitary_param_learn(&only_bqp, dispatcher, &UnitaryLearnConfig::default()),
            Err(Error::InsufficientProbes { have: 0, .. })
        ));
    }
}
